#include "tdlab/lemmas.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "tdlab/errors.hpp"
#include "tdlab/rng.hpp"

namespace tdlab {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Tracks the worst (most negative) slack and the arguments that produced it.
struct SlackTracker {
    double worst = kInf;
    std::vector<double> witness;

    void observe(double slack, std::initializer_list<double> args) {
        if (slack < worst) {
            worst = slack;
            witness.assign(args);
        }
    }
    void observe_vec(double slack, const Vec& w) {
        if (slack < worst) {
            worst = slack;
            witness.assign(w.data(), w.data() + w.size());
        }
    }
};

LemmaCheck finish(const std::string& id, std::int64_t trials, const SlackTracker& tracker) {
    LemmaCheck check;
    check.lemma_id = id;
    check.trials = trials;
    check.max_violation = tracker.worst;
    check.witness = tracker.witness;
    return check;
}

Vec gaussian_direction(Rng& rng, int d) {
    Vec v(d);
    for (int i = 0; i < d; i += 2) {
        const double u1 = 1.0 - rng.next_double();
        const double u2 = rng.next_double();
        const double mag = std::sqrt(-2.0 * std::log(u1));
        v[i] = mag * std::cos(2.0 * M_PI * u2);
        if (i + 1 < d) v[i + 1] = mag * std::sin(2.0 * M_PI * u2);
    }
    const double norm = v.norm();
    return norm > 0.0 ? Vec(v / norm) : Vec(Vec::Unit(d, 0));
}

Vec draw_in_ball(Rng& rng, const Vec& center, double radius) {
    return center + radius * rng.next_double() * gaussian_direction(rng, static_cast<int>(center.size()));
}

double quad_form(const Mat& sigma, const Vec& v) { return v.dot(sigma * v); }

constexpr double kRadiusGrid[] = {0.25, 1.0, 4.0, 10.0};

}  // namespace

// ─── stationary expectation inequalities ─────────────────────────────────────

std::vector<LemmaCheck> check_iid_lemmas(const ProblemBundle& bundle, int trials,
                                         std::uint64_t seed) {
    const FixedPoints fixed = solve_fixed_point(bundle, 0.0);
    const double gamma = bundle.mdp.gamma;
    Rng rng(derive_stream(seed, 0x11d));

    SlackTracker crossing, identity, lower, second;
    const double base_radius = std::max(1.0, fixed.w_star.norm());
    for (int trial = 0; trial < trials; ++trial) {
        const double radius = kRadiusGrid[trial % 4] * base_radius;
        const Vec w = draw_in_ball(rng, fixed.w_star, radius);
        const Vec diff = w - fixed.w_star;
        const double value_gap = quad_form(bundle.analysis.sigma, diff);

        const Vec g = mean_path_direction(w, bundle, 0.0);
        crossing.observe_vec(g.dot(fixed.w_star - w) - (1.0 - gamma) * value_gap, w);

        // ||V_{w1} - V_{w2}||^2_D computed against the features directly.
        const Vec w2 = draw_in_ball(rng, fixed.w_star, radius);
        const Vec pair_diff = w - w2;
        const Vec value_diff = bundle.features.phi * pair_diff;
        const double d_norm = value_diff.dot(bundle.analysis.mu_pi.asDiagonal() * value_diff);
        const double sigma_norm = quad_form(bundle.analysis.sigma, pair_diff);
        identity.observe_vec(-std::abs(d_norm - sigma_norm) / std::max(1.0, std::abs(d_norm)), w);
        lower.observe_vec(d_norm - bundle.analysis.omega * pair_diff.squaredNorm(), w);

        second.observe_vec(2.0 * fixed.sigma_sq + 8.0 * value_gap - expected_sq_norm(w, bundle, 0.0),
                           w);
    }
    return {finish("crossing-gap", trials, crossing), finish("norm-identity", trials, identity),
            finish("norm-lower-bound", trials, lower), finish("second-moment", trials, second)};
}

// ─── per-sample and mean-path norm inequalities ──────────────────────────────

std::vector<LemmaCheck> check_lipschitz_and_norm_bounds(const ProblemBundle& bundle, int trials,
                                                        double lambda, std::uint64_t seed) {
    if (lambda < 0.0) fail(ErrorCode::missing_lambda, "lambda must be non-negative");
    const FixedPoints plain = solve_fixed_point(bundle, 0.0);
    const FixedPoints reg = solve_fixed_point(bundle, lambda);
    const double gamma = bundle.mdp.gamma;
    const double omega = bundle.analysis.omega;
    const int n = bundle.mdp.n;
    Rng rng(derive_stream(seed, 0x11b));

    SlackTracker sample_lip, mean_lip, sample_norm, reg_sample_norm, reg_mean_norm;
    SlackTracker reg_crossing, reg_mean_sq;

    // Per-sample directions are e * phi(s) - lambda w with e the temporal
    // difference error, so every transition reduces to scalars once
    // q = Phi w is precomputed.
    Vec row_sq(n), row_norm(n);
    for (int s = 0; s < n; ++s) {
        row_sq[s] = bundle.features.phi.row(s).squaredNorm();
        row_norm[s] = std::sqrt(row_sq[s]);
    }

    const double base_radius = std::max(1.0, reg.w_reg_star.norm());
    for (int trial = 0; trial < trials; ++trial) {
        const double radius = kRadiusGrid[trial % 4] * base_radius;
        const Vec w = draw_in_ball(rng, reg.w_reg_star, radius);
        const Vec w2 = draw_in_ball(rng, reg.w_reg_star, radius);
        const double pair_dist = (w - w2).norm();
        const double dist_plain = (w - plain.w_star).norm();
        const double dist_reg = (w - reg.w_reg_star).norm();
        const Vec q1 = bundle.features.phi * w;
        const Vec q2 = bundle.features.phi * w2;
        const double w_sq = w.squaredNorm();

        const double lip_rhs = 2.0 * pair_dist;
        const double norm_rhs = 2.0 * dist_plain + 4.0 * plain.zeta;
        const double reg_norm_rhs = (2.0 + lambda) * dist_reg + (3.0 + lambda) * reg.zeta;
        for (int s = 0; s < n; ++s) {
            const double base1 = bundle.mdp.r[s] - q1[s];
            const double base2 = bundle.mdp.r[s] - q2[s];
            for (int s2 = 0; s2 < n; ++s2) {
                if (bundle.mdp.P(s, s2) == 0.0) continue;
                const double td1 = base1 + gamma * q1[s2];
                const double td2 = base2 + gamma * q2[s2];
                sample_lip.observe(lip_rhs - std::abs(td1 - td2) * row_norm[s],
                                   {static_cast<double>(s), static_cast<double>(s2)});
                sample_norm.observe(norm_rhs - std::abs(td1) * row_norm[s],
                                    {static_cast<double>(s), static_cast<double>(s2)});
                const double gr_sq = td1 * td1 * row_sq[s] -
                                     2.0 * lambda * td1 * q1[s] + lambda * lambda * w_sq;
                reg_sample_norm.observe(reg_norm_rhs - std::sqrt(std::max(0.0, gr_sq)),
                                        {static_cast<double>(s), static_cast<double>(s2)});
            }
        }

        mean_lip.observe_vec(2.0 * pair_dist - (mean_path_direction(w, bundle, 0.0) -
                                                mean_path_direction(w2, bundle, 0.0))
                                                   .norm(),
                             w);
        const Vec gr_mean = mean_path_direction(w, bundle, lambda);
        reg_mean_norm.observe_vec((2.0 + lambda) * dist_reg - gr_mean.norm(), w);
        reg_crossing.observe_vec(gr_mean.dot(reg.w_reg_star - w) -
                                     ((1.0 - gamma) * omega + lambda) * dist_reg * dist_reg,
                                 w);
        reg_mean_sq.observe_vec((8.0 + 2.0 * lambda * lambda) * dist_reg * dist_reg -
                                    gr_mean.squaredNorm(),
                                w);
    }

    // Distance between the two fixed points, deterministic in the instance.
    SlackTracker shift;
    const double shift_rhs =
        lambda * plain.w_star.norm() / (lambda + omega * (1.0 - gamma));
    shift.observe((lambda == 0.0 ? 0.0 : shift_rhs) -
                      (plain.w_star - reg.w_reg_star).norm(),
                  {lambda});

    return {finish("sample-lipschitz", trials, sample_lip),
            finish("mean-lipschitz", trials, mean_lip),
            finish("sample-norm", trials, sample_norm),
            finish("reg-sample-norm", trials, reg_sample_norm),
            finish("reg-mean-norm", trials, reg_mean_norm),
            finish("reg-crossing-gap", trials, reg_crossing),
            finish("reg-mean-sq-norm", trials, reg_mean_sq),
            finish("fixed-point-shift", 1, shift)};
}

// ─── Markovian trajectory inequalities ───────────────────────────────────────

std::vector<LemmaCheck> check_markovian_lemmas(const ProblemBundle& bundle,
                                               const MixingProfile& mixing, double lambda,
                                               std::int64_t T, int n_seeds, std::uint64_t seed) {
    if (lambda < 0.0) fail(ErrorCode::missing_lambda, "lambda must be non-negative");
    const double gamma = bundle.mdp.gamma;
    const double eta0 =
        lambda > 0.0
            ? default_eta0(Theorem::reg_markov, gamma, bundle.analysis.omega, lambda, T)
            : default_eta0(Theorem::exp_markov, gamma, bundle.analysis.omega, std::nullopt, T);
    const MixingProfile profile = mixing.for_run(eta0, lambda, T);
    if (T < profile.tau_mix)
        fail(ErrorCode::trace_too_short,
             "horizon " + std::to_string(T) + " is below tau_mix = " +
                 std::to_string(profile.tau_mix));

    const FixedPoints fixed = solve_fixed_point(bundle, lambda);
    const Vec w1 = Vec::Zero(bundle.dim());
    const RegConstants constants =
        reg_constants(lambda, EnvelopeFit{profile.m, profile.rho}, T,
                      (w1 - fixed.w_reg_star).norm(), fixed.zeta);
    const double B = constants.B_taumix;
    const double log_T = std::log(static_cast<double>(T));
    const double ln4 = log_T * log_T * log_T * log_T;
    const std::int64_t tau = profile.tau_mix;

    SlackTracker iterate_bound, window_drift, noise_moment;
    std::vector<double> noise_sum(static_cast<size_t>(T) + 1, 0.0);

    Schedule schedule{ScheduleKind::exponential, eta0, T};
    for (int i = 0; i < n_seeds; ++i) {
        RunConfig config;
        config.variant = lambda > 0.0 ? Variant::regularized : Variant::standard;
        config.lambda = lambda > 0.0 ? lambda : 0.0;
        config.schedule = schedule;
        config.regime = Regime::markovian;
        config.T = T;
        config.seed = derive_stream(seed, 0x313 + static_cast<std::uint64_t>(i));

        std::vector<Vec> trajectory;
        trajectory.reserve(static_cast<size_t>(T) + 1);
        auto observer = [&](std::int64_t t, const Vec& w, const Transition& tr, double) {
            trajectory.push_back(w);
            const Vec noise = sample_direction(w, tr, bundle.features, gamma, lambda) -
                              mean_path_direction(w, bundle, lambda);
            noise_sum[static_cast<size_t>(t)] += noise.squaredNorm();
        };
        const RunRecord record = run_with_observer(config, bundle, observer);
        trajectory.push_back(record.w_final);

        // trajectory[k] is the iterate after k updates, i.e. w_{k+1}.
        for (std::int64_t k = 0; k < static_cast<std::int64_t>(trajectory.size()); ++k) {
            iterate_bound.observe(B - (trajectory[static_cast<size_t>(k)] - fixed.w_reg_star)
                                          .squaredNorm(),
                                  {static_cast<double>(i), static_cast<double>(k)});
        }
        for (std::int64_t t = tau + 1; t <= T; ++t) {
            const double eta_t = step_size(schedule, t);
            const double drift =
                (trajectory[static_cast<size_t>(t - 1)] - trajectory[static_cast<size_t>(t - 1 - tau)])
                    .squaredNorm();
            window_drift.observe(constants.c1 * constants.c1 * B * eta_t * eta_t * ln4 - drift,
                                 {static_cast<double>(i), static_cast<double>(t)});
        }
    }

    for (std::int64_t t = 1; t <= T; ++t) {
        const double mean_noise = noise_sum[static_cast<size_t>(t)] / n_seeds;
        noise_moment.observe(constants.Cprime * B - mean_noise, {static_cast<double>(t)});
    }

    // Deviation of the time-t expected direction from the stationary one,
    // by exact propagation of the state distribution. With td(s) the expected
    // temporal-difference error at s, the deviation is Phi^T (td x (nu_t - mu_pi)).
    SlackTracker mixing_dev, step_dev;
    {
        Rng rng(derive_stream(seed, 0x43d));
        const double eta_T = eta0 / static_cast<double>(T);
        std::vector<Vec> draws;
        draws.push_back(Vec::Zero(bundle.dim()));
        draws.push_back(fixed.w_reg_star);
        for (int j = 0; j < 3; ++j)
            draws.push_back(draw_in_ball(rng, fixed.w_reg_star, kRadiusGrid[j + 1] * fixed.zeta));

        for (const Vec& w : draws) {
            const Vec q = bundle.features.phi * w;
            const Vec td = bundle.mdp.r + gamma * (bundle.mdp.P * q) - q;
            Vec nu = bundle.mdp.mu0;
            for (std::int64_t t = 0; t <= T; ++t) {
                if (t >= profile.tau_delta) {
                    const Vec gap = nu - bundle.analysis.mu_pi;
                    const double dev =
                        (bundle.features.phi.transpose() * td.cwiseProduct(gap).eval()).norm();
                    mixing_dev.observe(2.0 * (2.0 + lambda) * profile.delta * (w.norm() + 1.0) - dev,
                                       {static_cast<double>(t)});
                    if (t >= profile.tau_mix)
                        step_dev.observe(eta_T * (w.norm() + 1.0) - dev, {static_cast<double>(t)});
                }
                if (t < T) nu = bundle.mdp.P.transpose() * nu;
            }
        }
    }

    const std::int64_t trace_trials = static_cast<std::int64_t>(n_seeds) * T;
    return {finish("iterate-bound", trace_trials, iterate_bound),
            finish("window-drift", trace_trials, window_drift),
            finish("noise-second-moment", static_cast<std::int64_t>(T), noise_moment),
            finish("mixing-deviation", 5 * (T + 1), mixing_dev),
            finish("step-deviation", 5 * (T + 1), step_dev)};
}

// ─── scalar helper inequalities ──────────────────────────────────────────────

std::vector<LemmaCheck> check_helper_lemmas() {
    const std::vector<std::int64_t> horizons{10, 100, 1000, 10000, 65536};
    const std::vector<double> rates{0.01, 0.1, 1.0, 10.0};

    SlackTracker partial, weighted, dominance;
    std::int64_t partial_trials = 0, weighted_trials = 0, dominance_trials = 0;

    for (std::int64_t T : horizons) {
        const double T_d = static_cast<double>(T);
        const double log_T = std::log(T_d);
        const double alpha = std::exp(-log_T / T_d);

        std::vector<double> powers(static_cast<size_t>(T) + 1);
        powers[0] = 1.0;
        for (std::int64_t t = 1; t <= T; ++t)
            powers[static_cast<size_t>(t)] = powers[static_cast<size_t>(t - 1)] * alpha;

        double X = 0.0;
        for (std::int64_t t = 1; t <= T; ++t) X += powers[static_cast<size_t>(t)];
        partial.observe(X - (alpha * T_d / log_T - 1.0 / log_T), {T_d});
        ++partial_trials;

        for (double a : rates) {
            // Tail sums accumulated from the right so no cancellation occurs.
            double tail = 0.0;
            double lhs = 0.0;
            std::vector<double> terms(static_cast<size_t>(T));
            for (std::int64_t t = T; t >= 1; --t) {
                terms[static_cast<size_t>(t - 1)] = powers[static_cast<size_t>(t)] *
                                                    powers[static_cast<size_t>(t)] *
                                                    std::exp(-a * tail);
                tail += powers[static_cast<size_t>(t)];
            }
            for (double term : terms) lhs += term;
            const double c = std::exp(a / log_T);
            const double rhs =
                4.0 * c * log_T * log_T / (a * a * std::exp(2.0) * alpha * alpha * T_d);
            weighted.observe(rhs - lhs, {T_d, a});
            ++weighted_trials;
        }
    }

    for (double x = 1e-3; x <= 1e3 + 1e-9; x *= 10.0) {
        for (double nu = 1e-3; nu <= 1e3 + 1e-9; nu *= 10.0) {
            const double rhs = std::pow(nu / (std::exp(1.0) * x), nu);
            dominance.observe(rhs - std::exp(-x), {x, nu});
            ++dominance_trials;
        }
    }

    return {finish("partial-sum", partial_trials, partial),
            finish("weighted-sum", weighted_trials, weighted),
            finish("exp-dominance", dominance_trials, dominance)};
}

std::vector<LemmaCheck> check_all_lemmas(const ProblemBundle& bundle, int trials,
                                         std::uint64_t seed) {
    std::vector<LemmaCheck> all = check_helper_lemmas();

    auto absorb = [&all](std::vector<LemmaCheck> batch, const std::string& tag) {
        for (auto& check : batch) {
            check.lemma_id += tag;
            all.push_back(std::move(check));
        }
    };

    absorb(check_iid_lemmas(bundle, trials, seed), "");
    absorb(check_lipschitz_and_norm_bounds(bundle, trials, 0.0, seed), "");
    absorb(check_lipschitz_and_norm_bounds(bundle, trials, 0.1, seed), "@l=0.1");

    const std::int64_t T = 1 << 12;
    const double lambda = 1.0 / std::sqrt(static_cast<double>(T));
    const MixingProfile mixing = build_mixing_profile(bundle.mdp, bundle.analysis);
    absorb(check_markovian_lemmas(bundle, mixing, 0.0, T, 4, seed), "@markov");
    absorb(check_markovian_lemmas(bundle, mixing, lambda, T, 4, seed), "@markov-reg");
    return all;
}

}  // namespace tdlab

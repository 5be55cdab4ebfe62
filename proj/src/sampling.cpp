#include "tdlab/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "tdlab/errors.hpp"

namespace tdlab {

Regime parse_regime(const std::string& name) {
    if (name == "mean-path") return Regime::mean_path;
    if (name == "iid") return Regime::iid;
    if (name == "markovian") return Regime::markovian;
    fail(ErrorCode::config_invalid, "no sampling regime named '" + name + "'");
}

std::string regime_name(Regime regime) {
    switch (regime) {
        case Regime::mean_path: return "mean-path";
        case Regime::iid: return "iid";
        case Regime::markovian: return "markovian";
    }
    return "?";
}

// ─── transition source ───────────────────────────────────────────────────────

namespace {

std::vector<double> cumsum_of(const Vec& probs) {
    std::vector<double> out(static_cast<size_t>(probs.size()));
    double acc = 0.0;
    for (Eigen::Index i = 0; i < probs.size(); ++i) {
        acc += probs[i];
        out[static_cast<size_t>(i)] = acc;
    }
    return out;
}

}  // namespace

TransitionSource::TransitionSource(Regime regime, const MdpSpec& mdp,
                                   const StationaryAnalysis* analysis, std::uint64_t seed)
    : regime_(regime), mdp_(&mdp), rng_(seed) {
    if (regime_ == Regime::mean_path) return;
    row_cumsum_.reserve(static_cast<size_t>(mdp.n));
    for (int s = 0; s < mdp.n; ++s) row_cumsum_.push_back(cumsum_of(mdp.P.row(s).transpose()));
    if (regime_ == Regime::iid) {
        if (analysis == nullptr)
            fail(ErrorCode::mean_path_has_no_samples,
                 "iid sampling needs the stationary distribution");
        mu_pi_cumsum_ = cumsum_of(analysis->mu_pi);
    } else {
        state_ = -1;  // drawn from mu0 on the first call
    }
}

Transition TransitionSource::next() {
    if (regime_ == Regime::mean_path)
        fail(ErrorCode::mean_path_has_no_samples,
             "mean-path runs use the exact expected direction, not samples");
    Transition tr;
    if (regime_ == Regime::iid) {
        tr.s = rng_.categorical_from_cumsum(mu_pi_cumsum_);
    } else {
        if (state_ < 0) state_ = rng_.categorical(mdp_->mu0);
        tr.s = state_;
    }
    tr.reward = mdp_->r[tr.s];
    tr.s_next = rng_.categorical_from_cumsum(row_cumsum_[static_cast<size_t>(tr.s)]);
    if (regime_ == Regime::markovian) state_ = tr.s_next;
    return tr;
}

// ─── exact mixing curve ──────────────────────────────────────────────────────

std::vector<double> exact_tv_curve(const MdpSpec& mdp, const StationaryAnalysis& analysis,
                                   int t_max) {
    if (t_max < 0) fail(ErrorCode::invalid_mixing, "t_max must be non-negative");
    const int n = mdp.n;
    std::vector<double> curve(static_cast<size_t>(t_max) + 1);
    Mat rows = Mat::Identity(n, n);  // row s = delta_s P^t
    for (int t = 0; t <= t_max; ++t) {
        double worst = 0.0;
        for (int s = 0; s < n; ++s) {
            const double tv = 0.5 * (rows.row(s).transpose() - analysis.mu_pi).lpNorm<1>();
            worst = std::max(worst, tv);
        }
        curve[static_cast<size_t>(t)] = worst;
        if (t < t_max) rows = rows * mdp.P;
    }
    return curve;
}

// ─── envelope fit ────────────────────────────────────────────────────────────

EnvelopeFit fit_mixing(const std::vector<double>& tv_curve, int window_lo, int window_hi) {
    const int len = static_cast<int>(tv_curve.size());
    if (len == 0) fail(ErrorCode::invalid_mixing, "empty tv curve");
    if (window_lo < 0 || window_hi >= len || window_lo > window_hi)
        fail(ErrorCode::invalid_mixing, "fit window outside the curve");

    // Entries at or below the noise floor carry no rate information.
    const double floor = std::max(tv_curve[0] * 1e-12, 1e-300);
    for (int t = window_lo; t <= window_hi; ++t) {
        if (tv_curve[static_cast<size_t>(t)] <= floor)
            fail(ErrorCode::window_contains_zero,
                 "tv_curve[" + std::to_string(t) + "] is zero (or sub-noise) inside the fit window");
    }

    EnvelopeFit fit;
    if (window_lo == window_hi) {
        // A single point fixes no rate; the curve is flat-to-zero beyond it, so
        // any rate gives a valid envelope. Pick one that collapses immediately.
        fit.rho = 1e-12;
        fit.m = std::max(tv_curve[static_cast<size_t>(window_lo)], tv_curve[0]);
        return fit;
    }

    // Least squares on ln tv over the window.
    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    const int count = window_hi - window_lo + 1;
    for (int t = window_lo; t <= window_hi; ++t) {
        const double x = static_cast<double>(t);
        const double y = std::log(tv_curve[static_cast<size_t>(t)]);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    const double denom = count * sxx - sx * sx;
    double slope = (count * sxy - sx * sy) / denom;
    double intercept = (sy - slope * sx) / count;

    // The regression fixes the rate; the envelope is made valid by inflating m
    // with the smallest factor >= 1 that lifts m rho^t above the whole clean
    // curve. Sub-noise entries sit far below any envelope already.
    double rho = std::exp(slope);
    rho = std::min(rho, 1.0 - 1e-12);
    if (!(rho > 0.0)) rho = 1e-12;

    double m = std::exp(intercept);
    for (int t = 0; t < len; ++t) {
        const double tv = tv_curve[static_cast<size_t>(t)];
        if (tv > floor) m = std::max(m, tv / std::pow(rho, static_cast<double>(t)));
    }
    fit.m = m;
    fit.rho = rho;
    return fit;
}

std::pair<int, int> default_fit_window(const std::vector<double>& tv_curve) {
    int last = -1;
    for (int t = 0; t < static_cast<int>(tv_curve.size()); ++t)
        if (tv_curve[static_cast<size_t>(t)] > 1e-10) last = t;
    if (last < 1) return {0, 0};
    return {1, last};
}

// ─── mixing cutoffs ──────────────────────────────────────────────────────────

std::int64_t compute_tau(double m, double rho, double delta) {
    if (!(delta > 0.0) || !(delta < 1.0)) fail(ErrorCode::bad_delta, "delta must lie in (0,1)");
    if (!(m > 0.0) || !(rho > 0.0) || rho >= 1.0)
        fail(ErrorCode::invalid_mixing, "envelope needs m > 0 and rho in (0,1)");
    if (m <= delta) return 0;
    const double raw = std::log(m / delta) / std::log(1.0 / rho);
    auto tau = static_cast<std::int64_t>(std::ceil(raw));
    tau = std::max<std::int64_t>(tau, 0);
    // Guard the closed form against edge-of-ulp rounding by direct verification.
    auto decayed = [&](std::int64_t t) { return m * std::pow(rho, static_cast<double>(t)); };
    while (decayed(tau) > delta) ++tau;
    while (tau > 0 && decayed(tau - 1) <= delta) --tau;
    return tau;
}

MixingProfile MixingProfile::for_run(double eta0, double lambda, std::int64_t T) const {
    if (!(eta0 > 0.0)) fail(ErrorCode::invalid_mixing, "eta0 must be positive");
    if (T < 1) fail(ErrorCode::invalid_mixing, "horizon must be positive");
    if (lambda < 0.0) fail(ErrorCode::missing_lambda, "lambda must be non-negative");
    MixingProfile out = *this;
    out.delta = eta0 / (2.0 * (2.0 + lambda) * static_cast<double>(T));
    out.tau_delta = compute_tau(m, rho, out.delta);
    out.tau_mix = out.tau_delta;
    out.a = 1.0 / std::log(1.0 / rho);
    out.b = std::log(2.0 * (2.0 + lambda) * m) / std::log(1.0 / rho);
    return out;
}

MixingProfile build_mixing_profile(const MdpSpec& mdp, const StationaryAnalysis& analysis,
                                   int t_max) {
    MixingProfile profile;
    profile.tv_curve = exact_tv_curve(mdp, analysis, t_max);
    const auto [lo, hi] = default_fit_window(profile.tv_curve);
    const EnvelopeFit fit = fit_mixing(profile.tv_curve, lo, hi);
    profile.m = fit.m;
    profile.rho = fit.rho;
    return profile;
}

}  // namespace tdlab

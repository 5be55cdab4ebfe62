#include "tdlab/oracle.hpp"

#include <cmath>
#include <sstream>

#include <nlohmann/json.hpp>

#include "tdlab/errors.hpp"

namespace tdlab {

ProblemBundle ProblemBundle::prepare(MdpSpec mdp, FeatureMap features) {
    ProblemBundle bundle;
    bundle.analysis = stationary_analysis(mdp, features);
    bundle.mdp = std::move(mdp);
    bundle.features = std::move(features);
    const Mat& phi = bundle.features.phi;
    const auto D = bundle.analysis.D();
    bundle.A_mat = phi.transpose() * D *
                   (Mat::Identity(bundle.mdp.n, bundle.mdp.n) - bundle.mdp.gamma * bundle.mdp.P) *
                   phi;
    bundle.b_vec = phi.transpose() * D * bundle.mdp.r;
    return bundle;
}

// ─── fixed points ────────────────────────────────────────────────────────────

FixedPoints solve_fixed_point(const ProblemBundle& bundle, double lambda) {
    if (lambda < 0.0) fail(ErrorCode::missing_lambda, "lambda must be non-negative");
    const int d = bundle.dim();
    FixedPoints out;
    out.lambda = lambda;

    Eigen::FullPivLU<Mat> base(bundle.A_mat);
    if (!base.isInvertible())
        fail(ErrorCode::singular_system, "A = Phi^T D (I - gamma P) Phi is singular");
    out.w_star = base.solve(bundle.b_vec);

    if (lambda == 0.0) {
        out.w_reg_star = out.w_star;
    } else {
        Eigen::FullPivLU<Mat> reg(bundle.A_mat + lambda * Mat::Identity(d, d));
        if (!reg.isInvertible())
            fail(ErrorCode::singular_system, "A + lambda I is singular");
        out.w_reg_star = reg.solve(bundle.b_vec);
    }

    out.sigma_sq = expected_sq_norm(out.w_star, bundle, 0.0);
    out.zeta = std::max(1.0, out.w_reg_star.norm());
    return out;
}

Vec sample_direction(const Vec& w, const Transition& tr, const FeatureMap& features,
                     double gamma, double lambda) {
    const Vec phi_s = features.row(tr.s);
    const Vec phi_next = features.row(tr.s_next);
    const double td_error = tr.reward + gamma * phi_next.dot(w) - phi_s.dot(w);
    Vec g = td_error * phi_s;
    if (lambda != 0.0) g -= lambda * w;
    return g;
}

Vec mean_path_direction(const Vec& w, const ProblemBundle& bundle, double lambda) {
    return direction_under_distribution(w, bundle.analysis.mu_pi, bundle, lambda);
}

double expected_sq_norm(const Vec& w, const ProblemBundle& bundle, double lambda) {
    // Exact double sum over (s, s'); with q = Phi w every term reduces to
    // scalars because ||e phi(s) - lambda w||^2 = e^2 ||phi(s)||^2
    // - 2 lambda e q(s) + lambda^2 ||w||^2.
    const int n = bundle.mdp.n;
    const Vec q = bundle.features.phi * w;
    Vec row_sq(n);
    for (int s = 0; s < n; ++s) row_sq[s] = bundle.features.phi.row(s).squaredNorm();
    const double w_sq = lambda != 0.0 ? w.squaredNorm() : 0.0;
    double acc = 0.0;
    for (int s = 0; s < n; ++s) {
        const double mass_s = bundle.analysis.mu_pi[s];
        if (mass_s == 0.0) continue;
        const double base = bundle.mdp.r[s] - q[s];
        for (int s2 = 0; s2 < n; ++s2) {
            const double p = bundle.mdp.P(s, s2);
            if (p == 0.0) continue;
            const double e = base + bundle.mdp.gamma * q[s2];
            double term = e * e * row_sq[s];
            if (lambda != 0.0) term += lambda * (lambda * w_sq - 2.0 * e * q[s]);
            acc += mass_s * p * term;
        }
    }
    return acc;
}

Vec direction_under_distribution(const Vec& w, const Vec& nu, const ProblemBundle& bundle,
                                 double lambda) {
    // Exact enumeration over (s, s') ~ nu x P; the successor average factors
    // through P q with q = Phi w.
    const Vec q = bundle.features.phi * w;
    const Vec td = bundle.mdp.r + bundle.mdp.gamma * (bundle.mdp.P * q) - q;
    Vec g = bundle.features.phi.transpose() * nu.cwiseProduct(td);
    if (lambda != 0.0) g -= lambda * w;
    return g;
}

// ─── guarantee constants ─────────────────────────────────────────────────────

Theorem parse_theorem(const std::string& name) {
    if (name == "constant-mean") return Theorem::constant_mean;
    if (name == "constant-iid") return Theorem::constant_iid;
    if (name == "exp-iid") return Theorem::exp_iid;
    if (name == "exp-markov") return Theorem::exp_markov;
    if (name == "reg-markov") return Theorem::reg_markov;
    fail(ErrorCode::unsupported_theorem, "no guarantee named '" + name + "'");
}

std::string theorem_name(Theorem theorem) {
    switch (theorem) {
        case Theorem::constant_mean: return "constant-mean";
        case Theorem::constant_iid: return "constant-iid";
        case Theorem::exp_iid: return "exp-iid";
        case Theorem::exp_markov: return "exp-markov";
        case Theorem::reg_markov: return "reg-markov";
    }
    return "?";
}

std::pair<double, double> rate_constants(double lambda) {
    const double two_l = 2.0 + lambda;
    const double three_l = 3.0 + lambda;
    const double c1 = std::sqrt(2560.0) * two_l;
    const double c2 = 4.0 * two_l * two_l + 4.0 * three_l * three_l + 2.0 * two_l * two_l;
    const double C = c1 / 2.0 + 3.0 + c1 * c2;
    const double Cprime = 10.0 * three_l * three_l;
    return {C, Cprime};
}

RegConstants reg_constants(double lambda, const EnvelopeFit& envelope, std::int64_t T,
                           double w1_dist, double zeta) {
    if (lambda < 0.0) fail(ErrorCode::missing_lambda, "lambda must be non-negative");
    if (!(envelope.m > 0.0) || !(envelope.rho > 0.0) || envelope.rho >= 1.0)
        fail(ErrorCode::invalid_mixing, "constants need m > 0 and rho in (0,1)");
    if (T < 2) fail(ErrorCode::index_out_of_horizon, "constants need T >= 2");
    const double two_l = 2.0 + lambda;
    const double three_l = 3.0 + lambda;
    RegConstants k;
    k.a = 1.0 / std::log(1.0 / envelope.rho);
    k.b = std::log(2.0 * two_l * envelope.m) / std::log(1.0 / envelope.rho);
    k.c1 = std::sqrt(2560.0) * two_l;
    k.c2 = 4.0 * two_l * two_l + 4.0 * three_l * three_l + 2.0 * two_l * two_l;
    k.C1 = k.c1 / 2.0;
    k.C2 = k.c1 * k.c2 / 2.0;
    k.C = k.C1 + 3.0 + 2.0 * k.C2;
    k.Cprime = 10.0 * three_l * three_l;
    const double log_T = std::log(static_cast<double>(T));
    k.C_T = 2.0 * (k.C * log_T * log_T + k.Cprime);
    k.B_taumix = std::exp(2.0 * two_l * std::max(k.a, k.b)) * (w1_dist + zeta) * (w1_dist + zeta);
    return k;
}

// ─── bound evaluators ────────────────────────────────────────────────────────

namespace {

struct ExpGrid {
    double log_T;
    double alpha;
    double decay;  // alpha T / ln T
    double tail;   // ln^2 T / (alpha^2 T)
};

ExpGrid exp_grid(std::int64_t T) {
    if (T < 2) fail(ErrorCode::index_out_of_horizon, "exponential-schedule bounds need T >= 2");
    ExpGrid g;
    g.log_T = std::log(static_cast<double>(T));
    g.alpha = std::exp(-g.log_T / static_cast<double>(T));
    g.decay = g.alpha * static_cast<double>(T) / g.log_T;
    g.tail = g.log_T * g.log_T / (g.alpha * g.alpha * static_cast<double>(T));
    return g;
}

}  // namespace

double eval_bound(Theorem theorem, const BoundInputs& inputs, const FixedPoints& fixed,
                  const StationaryAnalysis& analysis, double gamma) {
    const double omega = analysis.omega;
    const double contraction = omega * (1.0 - gamma);
    const double e = std::exp(1.0);
    const double d0 = inputs.initial_error_sq;

    switch (theorem) {
        case Theorem::constant_mean:
            return std::exp(-inputs.eta0 * contraction * static_cast<double>(inputs.T)) * d0;

        case Theorem::constant_iid:
            return std::exp(-inputs.eta0 * contraction * static_cast<double>(inputs.T)) * d0 +
                   inputs.eta0 * 2.0 * fixed.sigma_sq / contraction;

        case Theorem::exp_iid: {
            const ExpGrid g = exp_grid(inputs.T);
            const double bias = e * d0 * std::exp(-inputs.eta0 * contraction * g.decay);
            const double noise = 8.0 * fixed.sigma_sq / (e * contraction * contraction) * g.tail;
            return bias + noise;
        }

        case Theorem::exp_markov: {
            if (!inputs.mixing.has_value())
                fail(ErrorCode::missing_mixing_profile, "exp-markov bound needs a mixing profile");
            const ExpGrid g = exp_grid(inputs.T);
            const RegConstants k =
                reg_constants(0.0, EnvelopeFit{inputs.mixing->m, inputs.mixing->rho}, inputs.T,
                              std::sqrt(d0), fixed.zeta);
            const double bias = e * d0 * std::exp(-inputs.eta0 * contraction * g.decay);
            const double noise =
                8.0 * k.C_T * k.B_taumix / (e * contraction * contraction) * g.tail;
            return bias + noise;
        }

        case Theorem::reg_markov: {
            if (!inputs.mixing.has_value())
                fail(ErrorCode::missing_mixing_profile, "reg-markov bound needs a mixing profile");
            if (!(inputs.lambda > 0.0))
                fail(ErrorCode::missing_lambda, "reg-markov bound needs lambda > 0");
            const ExpGrid g = exp_grid(inputs.T);
            const RegConstants k =
                reg_constants(inputs.lambda, EnvelopeFit{inputs.mixing->m, inputs.mixing->rho},
                              inputs.T, std::sqrt(d0), fixed.zeta);
            const double bias =
                2.0 * e * d0 * std::exp(-2.0 * inputs.eta0 * contraction * g.decay);
            const double noise =
                8.0 * k.C_T * k.B_taumix / (e * e * contraction * contraction) * g.tail;
            const double shift = 2.0 * inputs.lambda * inputs.lambda * fixed.w_star.squaredNorm() /
                                 (contraction * contraction);
            return bias + noise + shift;
        }
    }
    fail(ErrorCode::unsupported_theorem, "unhandled guarantee");
}

OracleReport oracle_report(const ProblemBundle& bundle, double lambda) {
    OracleReport report;
    report.fixed = solve_fixed_point(bundle, lambda);
    report.omega = bundle.analysis.omega;
    report.lambda2_mod = bundle.analysis.lambda2_mod;
    return report;
}

std::string OracleReport::to_json() const {
    nlohmann::json doc;
    doc["w_star"] = std::vector<double>(fixed.w_star.data(), fixed.w_star.data() + fixed.w_star.size());
    doc["w_reg_star"] =
        std::vector<double>(fixed.w_reg_star.data(), fixed.w_reg_star.data() + fixed.w_reg_star.size());
    doc["lambda"] = fixed.lambda;
    doc["sigma_sq"] = fixed.sigma_sq;
    doc["zeta"] = fixed.zeta;
    doc["omega"] = omega;
    doc["lambda2_mod"] = lambda2_mod;
    return doc.dump(2);
}

}  // namespace tdlab

#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "tdlab/mdp.hpp"
#include "tdlab/sampling.hpp"

namespace tdlab {

/// Everything a run or a check needs about one instance, computed once.
/// A_mat = Phi^T D (I - gamma P) Phi and b_vec = Phi^T D r give the expected
/// update direction g(w) = b - A w in closed form.
struct ProblemBundle {
    MdpSpec mdp;
    FeatureMap features;
    StationaryAnalysis analysis;
    Mat A_mat;
    Vec b_vec;

    static ProblemBundle prepare(MdpSpec mdp, FeatureMap features);
    int dim() const { return features.dim(); }
};

/// Fixed points of the expected update: w_star solves A w = b, w_reg_star solves
/// (A + lambda I) w = b. sigma_sq = E||g_t(w_star)||^2 under stationary sampling
/// (exact enumeration), zeta = max(1, ||w_reg_star||).
struct FixedPoints {
    Vec w_star;
    Vec w_reg_star;
    double lambda = 0.0;
    double sigma_sq = 0.0;
    double zeta = 0.0;
};

FixedPoints solve_fixed_point(const ProblemBundle& bundle, double lambda);

/// Expected (regularized) update direction at w, by exact enumeration over
/// (s, s') weighted by mu_pi(s) P(s, s').
Vec mean_path_direction(const Vec& w, const ProblemBundle& bundle, double lambda = 0.0);

/// Per-sample update direction g_{s,s'}(w) minus lambda w.
Vec sample_direction(const Vec& w, const Transition& tr, const FeatureMap& features,
                     double gamma, double lambda = 0.0);

/// E||g_t(w)||^2 at w under stationary sampling, exact enumeration.
double expected_sq_norm(const Vec& w, const ProblemBundle& bundle, double lambda = 0.0);

/// Expected direction when s_t follows an arbitrary distribution nu (s' ~ P(s,.)).
Vec direction_under_distribution(const Vec& w, const Vec& nu, const ProblemBundle& bundle,
                                 double lambda = 0.0);

enum class Theorem { constant_mean, constant_iid, exp_iid, exp_markov, reg_markov };

Theorem parse_theorem(const std::string& name);
std::string theorem_name(Theorem theorem);

/// Constants that drive the Markovian-rate guarantees. All are per-(lambda, T,
/// envelope) and deliberately explicit so their growth can be inspected.
struct RegConstants {
    double a = 0.0;        // 1 / ln(1/rho)
    double b = 0.0;        // ln(2 (2+lambda) m) / ln(1/rho)
    double c1 = 0.0;       // c1^2 = 2560 (2+lambda)^2
    double c2 = 0.0;       // 4(2+lambda)^2 + 4(3+lambda)^2 + 2(2+lambda)^2
    double C1 = 0.0;       // c1 / 2
    double C2 = 0.0;       // c1 c2 / 2
    double C = 0.0;        // C1 + 3 + 2 C2
    double Cprime = 0.0;   // 10 (3+lambda)^2
    double B_taumix = 0.0; // exp(2 (2+lambda) max(a,b)) (||w1 - w_reg_star|| + zeta)^2
    double C_T = 0.0;      // 2 (C ln^2 T + Cprime)
};

RegConstants reg_constants(double lambda, const EnvelopeFit& envelope, std::int64_t T,
                           double w1_dist, double zeta);

/// The lambda-only pieces of RegConstants, (C, Cprime); shared by the step-scale
/// defaults so the two sites cannot drift apart.
std::pair<double, double> rate_constants(double lambda);

struct BoundInputs {
    std::int64_t T = 0;
    double eta0 = 0.0;
    /// Squared distance from the initial iterate to the fixed point the theorem
    /// tracks (w_star, or w_reg_star for the regularized guarantee).
    double initial_error_sq = 0.0;
    double lambda = 0.0;
    std::optional<MixingProfile> mixing;  // required by the Markovian theorems
};

/// Explicit right-hand side of the named guarantee, every constant spelled out.
double eval_bound(Theorem theorem, const BoundInputs& inputs, const FixedPoints& fixed,
                  const StationaryAnalysis& analysis, double gamma);

struct OracleReport {
    FixedPoints fixed;
    double omega = 0.0;
    double lambda2_mod = 0.0;
    std::string to_json() const;
};

OracleReport oracle_report(const ProblemBundle& bundle, double lambda);

}  // namespace tdlab

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tdlab/oracle.hpp"
#include "tdlab/td.hpp"

namespace tdlab {

/// One verified inequality. max_violation is the most negative slack seen
/// (RHS - LHS, or the signed gap the lemma states); a check passes when
/// max_violation >= -1e-9. witness holds the arguments at the worst slack so
/// a failure can be replayed.
struct LemmaCheck {
    std::string lemma_id;
    std::int64_t trials = 0;
    double max_violation = 0.0;  // minimum slack across trials; negative means a violation
    std::vector<double> witness;

    bool pass() const { return max_violation >= -1e-9; }
};

/// Expectation-level inequalities under stationary sampling, exact enumeration,
/// random w drawn from balls of several radii around the fixed point:
///   crossing-gap:     g(w).(w_star - w) >= (1-gamma) ||V_w - V_{w_star}||^2_D
///   norm-identity:    ||V_{w1}-V_{w2}||^2_D = ||w1-w2||^2_Sigma (relative gap)
///   norm-lower-bound: ||V_{w1}-V_{w2}||^2_D >= omega ||w1-w2||^2
///   second-moment:    E||g_t(w)||^2 <= 2 sigma^2 + 8 ||V_w - V_{w_star}||^2_D
std::vector<LemmaCheck> check_iid_lemmas(const ProblemBundle& bundle, int trials,
                                         std::uint64_t seed);

/// Per-sample and mean-path Lipschitz/norm inequalities, the per-(s,s') ones
/// checked exhaustively for every transition:
///   sample-lipschitz, mean-lipschitz              (constant 2)
///   sample-norm:      ||g_t(w)|| <= 2||w-w_star|| + 4 zeta
///   reg-sample-norm:  ||g^r_t(w)|| <= (2+lambda)||w-w_reg_star|| + (3+lambda) zeta
///   reg-mean-norm:    ||g^r(w)|| <= (2+lambda)||w-w_reg_star||
///   reg-crossing-gap: g^r(w).(w_reg_star-w) >= ((1-gamma) omega + lambda)||w-w_reg_star||^2
///   reg-mean-sq-norm: ||g^r(w)||^2 <= (8 + 2 lambda^2)||w-w_reg_star||^2
///   fixed-point-shift: ||w_star-w_reg_star|| <= lambda ||w_star|| / (lambda + omega(1-gamma))
std::vector<LemmaCheck> check_lipschitz_and_norm_bounds(const ProblemBundle& bundle, int trials,
                                                        double lambda, std::uint64_t seed);

/// Trajectory-level inequalities for Markovian runs at the theorem step scale:
///   mixing-deviation:  ||E_{s_t ~ nu_t} g^r_t(w) - g^r(w)|| <= 2(2+lambda) delta (||w||+1)
///                      for all t >= tau_delta (exact distribution propagation)
///   step-deviation:    same left side <= eta_T (||w||+1) for t >= tau_mix
///   iterate-bound:     ||w_t - w_reg_star||^2 <= B(tau_mix) for every t
///   window-drift:      ||w_t - w_{t-tau_mix}||^2 <= c1^2 B(tau_mix) eta_t^2 ln^4 T
///   noise-second-moment: mean_t over seeds of ||g^r_t(w_t) - g^r(w_t)||^2 <= C' B(tau_mix)
/// Throws TraceTooShort when T < tau_mix.
std::vector<LemmaCheck> check_markovian_lemmas(const ProblemBundle& bundle,
                                               const MixingProfile& mixing, double lambda,
                                               std::int64_t T, int n_seeds, std::uint64_t seed);

/// Scalar inequalities behind the step-size algebra, on deterministic grids:
///   partial-sum:   sum_{t=1..T} alpha^t >= alpha T / ln T - 1 / ln T
///   weighted-sum:  sum_t alpha^{2t} exp(-a sum_{i>t} alpha^i)
///                    <= 4 exp(a/ln T) ln^2 T / (a^2 e^2 alpha^2 T)
///   exp-dominance: exp(-x) <= (nu / (e x))^nu
std::vector<LemmaCheck> check_helper_lemmas();

/// Every suite above over one instance; used by the CLI and acceptance runs.
std::vector<LemmaCheck> check_all_lemmas(const ProblemBundle& bundle, int trials,
                                         std::uint64_t seed);

}  // namespace tdlab

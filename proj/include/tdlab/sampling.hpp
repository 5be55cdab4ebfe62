#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "tdlab/mdp.hpp"
#include "tdlab/rng.hpp"

namespace tdlab {

enum class Regime { mean_path, iid, markovian };

Regime parse_regime(const std::string& name);
std::string regime_name(Regime regime);

struct Transition {
    int s = 0;
    double reward = 0.0;
    int s_next = 0;
};

/// Draws (s, r(s), s') per regime. iid: s ~ mu_pi, s' ~ P(s,.). markovian: s0 ~ mu0,
/// then the chain advances so consecutive transitions share states. mean_path has
/// no samples; next() throws and callers must use the exact expected direction.
class TransitionSource {
  public:
    TransitionSource(Regime regime, const MdpSpec& mdp, const StationaryAnalysis* analysis,
                     std::uint64_t seed);

    Transition next();
    Regime regime() const { return regime_; }

  private:
    Regime regime_;
    const MdpSpec* mdp_;
    Rng rng_;
    std::vector<std::vector<double>> row_cumsum_;
    std::vector<double> mu_pi_cumsum_;
    int state_ = -1;
};

/// tv_curve[t] = sup over point-mass starts of the total-variation distance
/// between the time-t state distribution and mu_pi. Point masses suffice: the
/// TV distance is convex in the initial distribution.
std::vector<double> exact_tv_curve(const MdpSpec& mdp, const StationaryAnalysis& analysis,
                                   int t_max);

/// Geometric envelope tv_curve[t] <= m rho^t for every t. A log-linear fit over
/// `window` (inclusive index range) fixes the rate; m is then inflated by the
/// smallest factor >= 1 that makes the envelope dominate the whole curve.
/// Throws WindowContainsZero when the window touches a zero (or sub-noise)
/// entry.
struct EnvelopeFit {
    double m = 0.0;
    double rho = 0.0;
};

EnvelopeFit fit_mixing(const std::vector<double>& tv_curve, int window_lo, int window_hi);

/// Default fit window [1, t*] where t* is the last index with tv above 1e-10.
std::pair<int, int> default_fit_window(const std::vector<double>& tv_curve);

/// Smallest t with m rho^t <= delta; closed form, then verified directly.
std::int64_t compute_tau(double m, double rho, double delta);

/// Envelope plus the run-specific mixing cutoffs used by the Markovian theory:
/// delta = eta0 / (2 (2+lambda) T), tau_delta = tau at that delta, tau_mix its
/// alias, and the envelope logarithms a = 1/ln(1/rho), b = ln(2(2+lambda)m)/ln(1/rho).
struct MixingProfile {
    double m = 0.0;
    double rho = 0.0;
    std::vector<double> tv_curve;
    double delta = 0.0;
    std::int64_t tau_delta = 0;
    std::int64_t tau_mix = 0;
    double a = 0.0;
    double b = 0.0;

    /// Copy of the envelope with delta/tau/a/b recomputed for a run with the
    /// given step scale, regularization and horizon.
    MixingProfile for_run(double eta0, double lambda, std::int64_t T) const;
};

/// Envelope fit over the exact curve; run-specific fields are left unset until
/// for_run() supplies (eta0, lambda, T).
MixingProfile build_mixing_profile(const MdpSpec& mdp, const StationaryAnalysis& analysis,
                                   int t_max = 256);

}  // namespace tdlab

#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "tdlab/oracle.hpp"

namespace tdlab {

enum class ScheduleKind {
    constant,            // eta_t = eta0
    inv_sqrt_t,          // eta_t = eta0 / sqrt(T), constant across the run
    poly,                // eta_t = eta0 / (t + 1)^z
    inv_omega_t,         // eta_t = eta0 / (1 + omega t)
    exponential,         // eta_t = eta0 alpha^t, alpha = (1/T)^(1/T)
    exponential_scaled,  // eta_t = (eta0 / divisor) alpha^t
};

ScheduleKind parse_schedule_kind(const std::string& name);
std::string schedule_kind_name(ScheduleKind kind);

struct Schedule {
    ScheduleKind kind = ScheduleKind::constant;
    double eta0 = 0.0;
    std::int64_t T = 0;
    double poly_z = 1.0;     // poly only
    double omega = 0.0;      // inv_omega_t only
    double divisor = 1.0;    // exponential_scaled only

    /// alpha = (1/T)^(1/T), evaluated as exp(-ln T / T).
    double alpha() const;
};

/// eta_t for t in [0, T]. The exponential kinds are evaluated in log space,
/// eta0 exp(-(t/T) ln T), so eta_T = eta0 / T holds exactly at the endpoint.
/// Throws IndexOutOfHorizon outside [0, T].
double step_size(const Schedule& schedule, std::int64_t t);

/// The step scale each guarantee prescribes:
///   constant_mean, constant_iid, exp_iid: (1 - gamma) / 8
///   exp_markov:  (1-gamma) omega / (2 [C ln^2 T + C'])     (lambda = 0 constants)
///   reg_markov:  min{ lambda/([C ln^2 T + C'] + 8 + 2 lambda^2),
///                     1/(2 lambda), (1-gamma)/(16 ln T), lambda/10 }
/// The envelope parameter is accepted for interface parity; the formulas above
/// do not consult it. Throws MissingOmega / MissingLambda when a needed input
/// is absent.
double default_eta0(Theorem theorem, double gamma, std::optional<double> omega,
                    std::optional<double> lambda, std::int64_t T,
                    const std::optional<EnvelopeFit>& envelope = std::nullopt);

/// Step scale for Markovian runs meant to visibly converge at desk horizons;
/// the theorem-prescribed values above are far too small to move the iterate.
double practical_eta0(double gamma, double lambda);

}  // namespace tdlab

#include "tdlab/schedule.hpp"

#include <algorithm>
#include <cmath>

#include "tdlab/errors.hpp"

namespace tdlab {

ScheduleKind parse_schedule_kind(const std::string& name) {
    if (name == "constant") return ScheduleKind::constant;
    if (name == "inv-sqrt-T") return ScheduleKind::inv_sqrt_t;
    if (name == "poly") return ScheduleKind::poly;
    if (name == "inv-omega-t") return ScheduleKind::inv_omega_t;
    if (name == "exponential") return ScheduleKind::exponential;
    if (name == "exponential-scaled") return ScheduleKind::exponential_scaled;
    fail(ErrorCode::config_invalid, "no schedule kind named '" + name + "'");
}

std::string schedule_kind_name(ScheduleKind kind) {
    switch (kind) {
        case ScheduleKind::constant: return "constant";
        case ScheduleKind::inv_sqrt_t: return "inv-sqrt-T";
        case ScheduleKind::poly: return "poly";
        case ScheduleKind::inv_omega_t: return "inv-omega-t";
        case ScheduleKind::exponential: return "exponential";
        case ScheduleKind::exponential_scaled: return "exponential-scaled";
    }
    return "?";
}

double Schedule::alpha() const {
    const double T_d = static_cast<double>(T);
    return std::exp(-std::log(T_d) / T_d);
}

double step_size(const Schedule& schedule, std::int64_t t) {
    if (schedule.T < 1) fail(ErrorCode::index_out_of_horizon, "schedule horizon must be positive");
    if (t < 0 || t > schedule.T)
        fail(ErrorCode::index_out_of_horizon,
             "t = " + std::to_string(t) + " outside [0, " + std::to_string(schedule.T) + "]");
    if (!(schedule.eta0 > 0.0)) fail(ErrorCode::config_invalid, "eta0 must be positive");
    const double T_d = static_cast<double>(schedule.T);
    const double t_d = static_cast<double>(t);
    switch (schedule.kind) {
        case ScheduleKind::constant:
            return schedule.eta0;
        case ScheduleKind::inv_sqrt_t:
            return schedule.eta0 / std::sqrt(T_d);
        case ScheduleKind::poly:
            if (!(schedule.poly_z > 0.0))
                fail(ErrorCode::config_invalid, "poly schedule needs z > 0");
            return schedule.eta0 / std::pow(t_d + 1.0, schedule.poly_z);
        case ScheduleKind::inv_omega_t:
            if (!(schedule.omega > 0.0)) fail(ErrorCode::missing_omega, "inv-omega-t needs omega");
            return schedule.eta0 / (1.0 + schedule.omega * t_d);
        case ScheduleKind::exponential:
        case ScheduleKind::exponential_scaled: {
            double scale = schedule.eta0;
            if (schedule.kind == ScheduleKind::exponential_scaled) {
                if (!(schedule.divisor > 0.0))
                    fail(ErrorCode::config_invalid, "scaled schedule needs a positive divisor");
                scale /= schedule.divisor;
            }
            // Log-space form of eta0 alpha^t; the endpoints t = 0 and t = T are
            // pinned so eta_T = eta0 / T holds exactly.
            if (t == 0) return scale;
            if (t == schedule.T) return scale / T_d;
            return scale * std::exp(-(t_d / T_d) * std::log(T_d));
        }
    }
    fail(ErrorCode::config_invalid, "unhandled schedule kind");
}

double default_eta0(Theorem theorem, double gamma, std::optional<double> omega,
                    std::optional<double> lambda, std::int64_t T,
                    const std::optional<EnvelopeFit>& envelope) {
    (void)envelope;  // the explicit formulas below do not consult the envelope
    if (!(gamma > 0.0) || !(gamma < 1.0))
        fail(ErrorCode::discount_out_of_range, "gamma must lie strictly inside (0,1)");
    switch (theorem) {
        case Theorem::constant_mean:
        case Theorem::constant_iid:
        case Theorem::exp_iid:
            return (1.0 - gamma) / 8.0;
        case Theorem::exp_markov: {
            if (!omega.has_value())
                fail(ErrorCode::missing_omega, "exp-markov step scale needs omega");
            if (T < 2) fail(ErrorCode::index_out_of_horizon, "step scale needs T >= 2");
            const double log_T = std::log(static_cast<double>(T));
            const auto [C, Cprime] = rate_constants(0.0);
            return (1.0 - gamma) * (*omega) / (2.0 * (C * log_T * log_T + Cprime));
        }
        case Theorem::reg_markov: {
            if (!lambda.has_value() || !(*lambda > 0.0))
                fail(ErrorCode::missing_lambda, "reg-markov step scale needs lambda > 0");
            if (T < 2) fail(ErrorCode::index_out_of_horizon, "step scale needs T >= 2");
            const double l = *lambda;
            const double log_T = std::log(static_cast<double>(T));
            const auto [C, Cprime] = rate_constants(l);
            const double v1 = l / (C * log_T * log_T + Cprime + 8.0 + 2.0 * l * l);
            const double v2 = 1.0 / (2.0 * l);
            const double v3 = (1.0 - gamma) / (16.0 * log_T);
            const double v4 = l / 10.0;
            return std::min(std::min(v1, v2), std::min(v3, v4));
        }
    }
    fail(ErrorCode::unsupported_theorem, "unhandled guarantee");
}

double practical_eta0(double gamma, double lambda) {
    if (!(gamma > 0.0) || !(gamma < 1.0))
        fail(ErrorCode::discount_out_of_range, "gamma must lie strictly inside (0,1)");
    return std::min(0.5, 4.0 * (1.0 - gamma)) / (1.0 + lambda);
}

}  // namespace tdlab

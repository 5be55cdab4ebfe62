#pragma once

#include <stdexcept>
#include <string>

namespace tdlab {

/// Failure categories surfaced by the library. Each maps 1:1 to a documented
/// contract violation; tests match on the code, not the message text.
enum class ErrorCode {
    non_stochastic_row,
    reward_out_of_range,
    discount_out_of_range,
    bad_initial_distribution,
    feature_shape_mismatch,
    degenerate_features,
    chain_not_ergodic,
    unknown_family,
    singular_system,
    missing_mixing_profile,
    unsupported_theorem,
    invalid_mixing,
    missing_omega,
    missing_lambda,
    index_out_of_horizon,
    mean_path_has_no_samples,
    window_contains_zero,
    bad_delta,
    trace_too_short,
    non_finite_iterate,
    heterogeneous_configs,
    config_invalid,
    insufficient_horizons,
    io_failure,
};

const char* error_code_name(ErrorCode code);

class TdError : public std::runtime_error {
  public:
    TdError(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(error_code_name(code)) + ": " + what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

  private:
    ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) {
    throw TdError(code, what);
}

}  // namespace tdlab

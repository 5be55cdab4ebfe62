#include "tdlab/errors.hpp"

namespace tdlab {

const char* error_code_name(ErrorCode code) {
    switch (code) {
        case ErrorCode::non_stochastic_row: return "NonStochasticRow";
        case ErrorCode::reward_out_of_range: return "RewardOutOfRange";
        case ErrorCode::discount_out_of_range: return "DiscountOutOfRange";
        case ErrorCode::bad_initial_distribution: return "BadInitialDistribution";
        case ErrorCode::feature_shape_mismatch: return "FeatureShapeMismatch";
        case ErrorCode::degenerate_features: return "DegenerateFeatures";
        case ErrorCode::chain_not_ergodic: return "ChainNotErgodic";
        case ErrorCode::unknown_family: return "UnknownFamily";
        case ErrorCode::singular_system: return "SingularSystem";
        case ErrorCode::missing_mixing_profile: return "MissingMixingProfile";
        case ErrorCode::unsupported_theorem: return "UnsupportedTheorem";
        case ErrorCode::invalid_mixing: return "InvalidMixing";
        case ErrorCode::missing_omega: return "MissingOmega";
        case ErrorCode::missing_lambda: return "MissingLambda";
        case ErrorCode::index_out_of_horizon: return "IndexOutOfHorizon";
        case ErrorCode::mean_path_has_no_samples: return "MeanPathHasNoSamples";
        case ErrorCode::window_contains_zero: return "WindowContainsZero";
        case ErrorCode::bad_delta: return "BadDelta";
        case ErrorCode::trace_too_short: return "TraceTooShort";
        case ErrorCode::non_finite_iterate: return "NonFiniteIterate";
        case ErrorCode::heterogeneous_configs: return "HeterogeneousConfigs";
        case ErrorCode::config_invalid: return "ConfigInvalid";
        case ErrorCode::insufficient_horizons: return "InsufficientHorizons";
        case ErrorCode::io_failure: return "IoFailure";
    }
    return "UnknownError";
}

}  // namespace tdlab

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "tdlab/mdp.hpp"
#include "tdlab/oracle.hpp"
#include "tdlab/td.hpp"

namespace tdlab {

/// One sweep cell: every field except the horizon-dependent resolutions is
/// fixed before any run starts. lambda_rule/"eta0_rule" capture the symbolic
/// choices ("inv-sqrt-T", "theorem-default", "practical") resolved per horizon.
struct CellSpec {
    Variant variant = Variant::standard;
    double lambda = 0.0;
    bool lambda_inv_sqrt_T = false;
    double radius = 0.0;
    double tail_fraction = 0.5;
    ScheduleKind schedule = ScheduleKind::exponential;
    std::optional<double> eta0;   // empty selects the theorem default (or practical override)
    double poly_z = 1.0;
    double divisor = 1.0;
    Regime regime = Regime::iid;
    std::optional<Vec> w_init;         // explicit start (default: zero vector)
    std::optional<Vec> w_init_offset;  // start at w_star + offset; exclusive with w_init
};

struct ExperimentConfig {
    Problem problem;
    std::string problem_label;
    std::string problem_ref_json;  // the config's problem field, verbatim (may be empty)
    std::vector<CellSpec> cells;
    std::vector<std::int64_t> horizons;
    int seeds = 1;
    std::uint64_t base_seed = 0;
    std::string out_dir;
    std::vector<Theorem> bounds;
    bool practical_eta0 = false;
    int mixing_t_max = 256;
};

/// Strict parse: unknown keys anywhere raise ConfigInvalid naming the path.
ExperimentConfig parse_experiment_config(const std::string& json_text,
                                         const std::string& base_dir = ".");
ExperimentConfig load_experiment_config(const std::string& path);

/// Resolves a textual problem reference: "ref-chain", one of the generator
/// families with inline options ("garnet:seed=3,n=12,d=5,branching=3,gamma=0.95",
/// bare "chain" picks the defaults), or a path to a problem JSON file. Relative
/// paths resolve against base_dir.
Problem resolve_problem_ref(const std::string& text, const std::string& base_dir = ".");

struct ExperimentResult {
    std::string csv_path;
    std::string summary_path;
    std::string manifest_path;
    /// mean final error keyed by (cell index, T), for assertions without re-parsing.
    std::map<std::pair<int, std::int64_t>, double> mean_final_error;
    std::map<std::pair<int, std::int64_t>, double> bound_at_T;
};

/// Runs every (cell, horizon, seed), writes rows.csv + summary.json + manifest.json
/// under out_dir. Output bytes depend only on the config and the binary.
ExperimentResult run_experiment(const ExperimentConfig& config);

struct RateFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r_squared = 0.0;
    /// Slope against ln(ln^2 T / T) instead of ln T; near 1 when the data decays
    /// like ln^2 T / T.
    double corrected_slope = 0.0;
    std::int64_t T_min = 0;
    std::int64_t T_max = 0;
};

/// Log-log regression of mean final error against the horizon. Requires at
/// least four geometrically spaced horizons.
RateFit fit_rate(const std::vector<std::pair<std::int64_t, double>>& error_by_T);

/// Reads a rows.csv produced by run_experiment and fits each (variant, schedule,
/// regime) group with >= 4 horizons. Returns a human-readable table.
std::string fit_rates_from_csv(const std::string& csv_path);

}  // namespace tdlab

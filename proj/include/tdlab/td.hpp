#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "tdlab/oracle.hpp"
#include "tdlab/sampling.hpp"
#include "tdlab/schedule.hpp"

namespace tdlab {

enum class Variant { standard, regularized, projected, tail_average };

Variant parse_variant(const std::string& name);
std::string variant_name(Variant variant);

struct RunConfig {
    Variant variant = Variant::standard;
    double lambda = 0.0;          // regularized only
    double radius = 0.0;          // projected only; 0 selects the default 2 zeta / ((1-gamma) omega)
    double tail_fraction = 0.5;   // tail_average only
    Schedule schedule;
    Regime regime = Regime::iid;
    std::int64_t T = 0;
    std::uint64_t seed = 0;
    std::optional<Vec> w_init;    // defaults to zero
    std::vector<std::int64_t> checkpoints;  // defaults to {1,2,4,...} plus T
};

std::vector<std::int64_t> default_checkpoints(std::int64_t T);

struct CheckpointRow {
    std::int64_t t = 0;
    double error_sq = 0.0;       // ||w_t - w_star||^2
    double reg_error_sq = 0.0;   // ||w_t - w_reg_star||^2 (equals error_sq when lambda = 0)
    double value_error = 0.0;    // ||V_{w_t} - V_{w_star}||^2_D
};

struct RunRecord {
    RunConfig config;
    double initial_error_sq = 0.0;
    double initial_reg_error_sq = 0.0;
    std::vector<CheckpointRow> rows;
    Vec w_final;
    std::optional<Vec> w_tail_avg;
    double tail_avg_error_sq = 0.0;
    std::int64_t diverged_at = -1;  // first t with a non-finite coordinate, -1 if none
    std::optional<double> bound;    // theorem RHS at t = T when requested
};

/// One update from w given a sampled transition: w + eta [ (r + gamma w.phi(s')
/// - w.phi(s)) phi(s) - lambda w ].
Vec td_step(const Vec& w, const Transition& tr, double eta, double lambda,
            const FeatureMap& features, double gamma);

/// Iterates t = 1..T from w_1 = w_init; step t uses eta_t = step_size(schedule, t)
/// and the recorded value at checkpoint t is the iterate reached after t updates.
/// mean_path runs use the exact expected direction and ignore the seed.
/// A non-finite coordinate aborts the run and records diverged_at.
RunRecord run(const RunConfig& config, const ProblemBundle& bundle);

/// Same as run() but invokes observer(t, w_before, transition, eta) for every
/// sampled step; Markovian lemma checks reconstruct per-step noise from this.
using StepObserver = std::function<void(std::int64_t, const Vec&, const Transition&, double)>;
RunRecord run_with_observer(const RunConfig& config, const ProblemBundle& bundle,
                            const StepObserver& observer);

struct SummaryRow {
    std::int64_t t = 0;
    double mean_error_sq = 0.0;
    double stderr_error_sq = 0.0;  // NaN when only one record
    double mean_value_error = 0.0;
};

/// Per-checkpoint mean and standard error across records. Records must share a
/// config up to seed; summation is done in ascending-seed order so the result
/// is independent of input order. Throws HeterogeneousConfigs otherwise.
std::vector<SummaryRow> aggregate(const std::vector<RunRecord>& records);

}  // namespace tdlab

#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "tdlab/errors.hpp"
#include "tdlab/experiment.hpp"
#include "tdlab/mdp.hpp"
#include "tdlab/oracle.hpp"
#include "tdlab/schedule.hpp"
#include "test_support.hpp"

namespace {

using namespace tdlab;
using namespace tdlab::test;
using nlohmann::json;
namespace fs = std::filesystem;

// Fresh scratch directory per call; stale content from earlier runs is wiped.
std::string scratch_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir.string();
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE_MESSAGE(bool(in), "cannot open ", path);
    std::stringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

void write_file(const std::string& path, const std::string& body) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << body;
    REQUIRE(bool(out));
}

std::vector<std::string> split_lines(const std::string& text) {
    std::vector<std::string> lines;
    std::stringstream in(text);
    std::string line;
    while (std::getline(in, line)) lines.push_back(line);
    return lines;
}

// Keeps trailing empty fields, so a row ending in ',' yields an empty last field.
std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> fields;
    std::string current;
    for (char c : line) {
        if (c == ',') {
            fields.push_back(current);
            current.clear();
        } else {
            current += c;
        }
    }
    fields.push_back(current);
    return fields;
}

void expect_config_invalid(const std::string& config_text) {
    expect_code(ErrorCode::config_invalid, [&] { parse_experiment_config(config_text); });
}

// Wraps a single cell object into a minimal config for rejection tests.
std::string with_cell(const std::string& cell_json) {
    return std::string(R"({"problem": "ref-chain", "cells": [)") + cell_json + "]}";
}

std::string sweep_config_json(const std::string& out_dir) {
    return std::string(R"({
        "problem": "ref-chain",
        "label": "two-state",
        "cells": [
            {"variant": "standard", "schedule": "exponential", "regime": "iid",
             "eta0": 0.0125},
            {"variant": "regularized", "lambda": "inv-sqrt-T", "schedule": "exponential",
             "regime": "iid", "tail_fraction": 0.25}
        ],
        "horizons": [16, 32],
        "seeds": 3,
        "base_seed": 42,
        "bounds": ["exp-iid"],
        "out_dir": ")") +
           out_dir + "\"}";
}

}  // namespace

TEST_SUITE("experiment") {

TEST_CASE("problem references resolve to the chain, generators, and files") {
    const Problem ref = resolve_problem_ref("ref-chain");
    CHECK(ref.mdp.n == 2);
    CHECK(ref.mdp.gamma == 0.9);
    CHECK(same_bits(ref.features.phi, Mat(Mat::Identity(2, 2))));

    const Problem chain = resolve_problem_ref("chain");
    CHECK(chain.mdp.n == 8);
    CHECK(chain.features.dim() == 4);
    CHECK(chain.mdp.gamma == 0.9);

    const Problem garnet = resolve_problem_ref("garnet:seed=3,n=12,d=5,branching=3,gamma=0.95");
    CHECK(garnet.mdp.n == 12);
    CHECK(garnet.features.dim() == 5);
    CHECK(garnet.mdp.gamma == 0.95);
    for (int s = 0; s < garnet.mdp.n; ++s) {
        int successors = 0;
        for (int sp = 0; sp < garnet.mdp.n; ++sp)
            if (garnet.mdp.P(s, sp) > 0.0) ++successors;
        CHECK(successors == 3);
    }

    const Problem dense = resolve_problem_ref("dense-dirichlet:n=4,d=2");
    CHECK(dense.mdp.n == 4);
    CHECK(dense.features.dim() == 2);
    CHECK((dense.mdp.P.array() > 0.0).all());

    // Same reference text, same instance, bit for bit.
    const Problem again = resolve_problem_ref("garnet:seed=3,n=12,d=5,branching=3,gamma=0.95");
    CHECK(same_bits(again.mdp.P, garnet.mdp.P));
    CHECK(same_bits(again.features.phi, garnet.features.phi));

    const std::string dir = scratch_dir("tdlab-test-problem-refs");
    save_problem_file(ref, dir + "/prob.json");
    const Problem from_relative = resolve_problem_ref("prob.json", dir);
    CHECK(same_bits(from_relative.mdp.P, ref.mdp.P));
    CHECK(same_bits(from_relative.mdp.r, ref.mdp.r));
    CHECK(same_bits(from_relative.features.phi, ref.features.phi));
    const Problem from_absolute = resolve_problem_ref(dir + "/prob.json");
    CHECK(same_bits(from_absolute.mdp.P, ref.mdp.P));

    expect_code(ErrorCode::config_invalid, [] { resolve_problem_ref("chain:n"); });
    expect_code(ErrorCode::config_invalid, [] { resolve_problem_ref("chain:widgets=3"); });
    expect_code(ErrorCode::config_invalid, [] { resolve_problem_ref("garnet:n=abc"); });
    expect_code(ErrorCode::io_failure, [] { resolve_problem_ref("no-such-problem.json"); });
    // Not a family name, so the text is treated as a (missing) file path.
    expect_code(ErrorCode::io_failure, [] { resolve_problem_ref("frobnicator:n=3"); });
}

TEST_CASE("configs parse with strict keys, defaults, and full field coverage") {
    const ExperimentConfig minimal = parse_experiment_config(R"({"problem": "ref-chain"})");
    CHECK(minimal.problem.mdp.n == 2);
    CHECK(minimal.problem_ref_json == "\"ref-chain\"");
    CHECK(minimal.cells.empty());
    CHECK(minimal.horizons.empty());
    CHECK(minimal.seeds == 1);
    CHECK(minimal.base_seed == 0);
    CHECK(minimal.out_dir == "results");
    CHECK(minimal.bounds.empty());
    CHECK_FALSE(minimal.practical_eta0);
    CHECK(minimal.mixing_t_max == 256);

    const ExperimentConfig full = parse_experiment_config(R"({
        "problem": "ref-chain",
        "label": "renamed",
        "cells": [
            {"variant": "regularized", "lambda": 0.25, "radius": 3.5, "tail_fraction": 0.5,
             "schedule": "poly", "eta0": 0.2, "poly_z": 0.7, "regime": "markovian",
             "w_init": [1.0, 2.0]},
            {"variant": "tail-average", "schedule": "inv-sqrt-T", "regime": "mean-path",
             "tail_fraction": 0.125, "divisor": 2.5},
            {"variant": "regularized", "lambda": "inv-sqrt-T", "w_init_offset": [0.5, -0.5]}
        ],
        "horizons": [8, 16],
        "seeds": 4,
        "base_seed": 99,
        "out_dir": "elsewhere",
        "bounds": ["exp-iid", "reg-markov"],
        "practical_eta0": true,
        "mixing_t_max": 64
    })");
    CHECK(full.problem_label == "renamed");
    REQUIRE(full.cells.size() == 3);
    const CellSpec& c0 = full.cells[0];
    CHECK(c0.variant == Variant::regularized);
    CHECK(c0.lambda == 0.25);
    CHECK_FALSE(c0.lambda_inv_sqrt_T);
    CHECK(c0.radius == 3.5);
    CHECK(c0.tail_fraction == 0.5);
    CHECK(c0.schedule == ScheduleKind::poly);
    REQUIRE(bool(c0.eta0));
    CHECK(*c0.eta0 == 0.2);
    CHECK(c0.poly_z == 0.7);
    CHECK(c0.regime == Regime::markovian);
    REQUIRE(bool(c0.w_init));
    CHECK((*c0.w_init)(0) == 1.0);
    CHECK((*c0.w_init)(1) == 2.0);
    CHECK_FALSE(bool(c0.w_init_offset));
    const CellSpec& c1 = full.cells[1];
    CHECK(c1.variant == Variant::tail_average);
    CHECK(c1.schedule == ScheduleKind::inv_sqrt_t);
    CHECK(c1.regime == Regime::mean_path);
    CHECK(c1.tail_fraction == 0.125);
    CHECK(c1.divisor == 2.5);
    CHECK_FALSE(bool(c1.eta0));
    const CellSpec& c2 = full.cells[2];
    CHECK(c2.lambda_inv_sqrt_T);
    REQUIRE(bool(c2.w_init_offset));
    CHECK((*c2.w_init_offset)(1) == -0.5);
    REQUIRE(full.horizons.size() == 2);
    CHECK(full.horizons[0] == 8);
    CHECK(full.horizons[1] == 16);
    CHECK(full.seeds == 4);
    CHECK(full.base_seed == 99);
    CHECK(full.out_dir == "elsewhere");
    REQUIRE(full.bounds.size() == 2);
    CHECK(full.bounds[0] == Theorem::exp_iid);
    CHECK(full.bounds[1] == Theorem::reg_markov);
    CHECK(full.practical_eta0);
    CHECK(full.mixing_t_max == 64);

    // Root-level rejections.
    expect_config_invalid("{");
    expect_config_invalid("[]");
    expect_config_invalid(R"({"problem": "ref-chain", "mystery": 1})");
    expect_config_invalid("{}");
    expect_config_invalid(R"({"problem": "ref-chain", "seeds": 0})");
    expect_config_invalid(R"({"problem": "ref-chain", "seeds": "three"})");
    expect_config_invalid(R"({"problem": "ref-chain", "horizons": [0]})");
    expect_config_invalid(R"({"problem": "ref-chain", "horizons": 16})");
    expect_config_invalid(R"({"problem": "ref-chain", "mixing_t_max": 1})");
    expect_config_invalid(R"({"problem": "ref-chain", "bounds": ["never-heard-of-it"]})");
    expect_config_invalid(R"({"problem": "ref-chain", "bounds": "exp-iid"})");
    expect_config_invalid(R"({"problem": "ref-chain", "practical_eta0": 1})");

    // Cell-level rejections.
    expect_config_invalid(with_cell(R"({"variant": "standard", "surprise": 1})"));
    expect_config_invalid(with_cell(R"({"variant": "warp"})"));
    expect_config_invalid(with_cell(R"({"variant": "standard", "schedule": "linear"})"));
    expect_config_invalid(with_cell(R"({"variant": "standard", "regime": "exact"})"));
    expect_config_invalid(with_cell(R"({"variant": "standard", "lambda": "sometimes"})"));
    expect_config_invalid(with_cell(R"({"variant": "standard", "lambda": 0.1})"));
    expect_config_invalid(with_cell(R"({"variant": "standard", "lambda": "inv-sqrt-T"})"));
    expect_config_invalid(with_cell(R"({"variant": "regularized", "lambda": -0.25})"));
    expect_config_invalid(
        with_cell(R"({"variant": "standard", "w_init": [1, 0], "w_init_offset": [0, 1]})"));
    expect_config_invalid(with_cell(R"({"variant": "standard", "eta0": 0.0})"));
    expect_config_invalid(with_cell(R"({"variant": "standard", "tail_fraction": 0.0})"));
    expect_config_invalid(with_cell(R"({"variant": "standard", "tail_fraction": 1.5})"));
    expect_config_invalid(with_cell(R"({"variant": "standard", "divisor": 0.0})"));
    expect_config_invalid(with_cell(R"({"variant": "standard", "radius": -1.0})"));

    // File loading: relative problem paths resolve against the config's directory.
    const std::string dir = scratch_dir("tdlab-test-config-files");
    save_problem_file(resolve_problem_ref("ref-chain"), dir + "/prob.json");
    write_file(dir + "/cfg.json", R"({"problem": "prob.json", "horizons": [4]})");
    const ExperimentConfig loaded = load_experiment_config(dir + "/cfg.json");
    CHECK(loaded.problem.mdp.n == 2);
    REQUIRE(loaded.horizons.size() == 1);
    expect_code(ErrorCode::io_failure, [&] { load_experiment_config(dir + "/absent.json"); });
}

TEST_CASE("sweeps write exact headers, bounds on final rows, and reproducible bytes") {
    const std::string dir1 = scratch_dir("tdlab-test-sweep-1");
    const ExperimentConfig config = parse_experiment_config(sweep_config_json(dir1));
    const ExperimentResult result = run_experiment(config);

    CHECK(result.csv_path == (fs::path(dir1) / "rows.csv").string());
    CHECK(result.summary_path == (fs::path(dir1) / "summary.json").string());
    CHECK(result.manifest_path == (fs::path(dir1) / "manifest.json").string());
    REQUIRE(fs::exists(result.csv_path));
    REQUIRE(fs::exists(result.summary_path));
    REQUIRE(fs::exists(result.manifest_path));

    const std::string csv = read_file(result.csv_path);
    const std::vector<std::string> lines = split_lines(csv);
    REQUIRE(lines.size() >= 1);
    CHECK(lines[0] == "variant,schedule_kind,regime,T,seed,t,error_sq,value_error,bound");
    // 3 seeds x (5 checkpoints at T=16 + 6 at T=32) per cell, 2 cells.
    CHECK(lines.size() == 1 + 2 * 3 * (5 + 6));

    std::map<std::string, int> rows_per_run;              // "variant/T/seed" -> row count
    std::map<std::pair<int, std::int64_t>, double> sums;  // (cell, T) -> sum of final error_sq
    int bound_rows = 0;
    for (size_t i = 1; i < lines.size(); ++i) {
        const std::vector<std::string> f = split_csv(lines[i]);
        REQUIRE_MESSAGE(f.size() == 9, "row ", i, " has ", f.size(), " fields");
        const int cell = f[0] == "standard" ? 0 : 1;
        CHECK((f[0] == "standard" || f[0] == "regularized"));
        CHECK(f[1] == "exponential");
        CHECK(f[2] == "iid");
        const std::int64_t T = std::stoll(f[3]);
        const int seed = std::stoi(f[4]);
        const std::int64_t t = std::stoll(f[5]);
        CHECK((T == 16 || T == 32));
        CHECK(seed >= 0);
        CHECK(seed < 3);
        CHECK(t >= 1);
        CHECK(t <= T);
        const double error_sq = std::stod(f[6]);
        const double value_error = std::stod(f[7]);
        CHECK(std::isfinite(error_sq));
        CHECK(error_sq >= 0.0);
        CHECK(std::isfinite(value_error));
        CHECK(value_error >= 0.0);
        rows_per_run[f[0] + "/" + f[3] + "/" + f[4]] += 1;
        if (t == T) sums[{cell, T}] += error_sq;
        // The bound column is filled only on final rows of the cell the requested
        // theorem applies to (the standard exponential iid cell here).
        if (!f[8].empty()) {
            ++bound_rows;
            CHECK(f[0] == "standard");
            CHECK(t == T);
            CHECK(std::stod(f[8]) == result.bound_at_T.at({0, T}));
        }
    }
    CHECK(bound_rows == 2 * 3);
    CHECK(rows_per_run.size() == 2 * 2 * 3);
    for (const auto& [key, count] : rows_per_run)
        CHECK(count == (key.find("/16/") != std::string::npos ? 5 : 6));

    REQUIRE(result.mean_final_error.size() == 4);
    REQUIRE(result.bound_at_T.size() == 2);
    for (const auto& [key, sum] : sums)
        CHECK(close_rel(sum / 3.0, result.mean_final_error.at(key), 1e-12));

    // The recorded bound re-evaluates exactly: the explicit 0.0125 step size is
    // within tolerance of the prescribed default, so the bound uses the run's value.
    const auto& bundle = ref_bundle();
    const FixedPoints fp = solve_fixed_point(bundle, 0.0);
    for (std::int64_t T : {std::int64_t{16}, std::int64_t{32}}) {
        BoundInputs in;
        in.T = T;
        in.eta0 = 0.0125;
        in.initial_error_sq = fp.w_star.squaredNorm();
        CHECK(result.bound_at_T.at({0, T}) ==
              eval_bound(Theorem::exp_iid, in, fp, bundle.analysis, bundle.mdp.gamma));
    }

    const json manifest = json::parse(read_file(result.manifest_path));
    CHECK(manifest.at("problem") == "two-state");
    CHECK(manifest.at("files") == json::array({"rows.csv", "summary.json"}));
    const json& echo = manifest.at("config");
    CHECK(echo.at("problem") == "ref-chain");
    CHECK(echo.at("horizons") == json::array({16, 32}));
    CHECK(echo.at("seeds") == 3);
    CHECK(echo.at("base_seed") == 42);
    CHECK(echo.at("bounds") == json::array({"exp-iid"}));
    CHECK(echo.at("practical_eta0") == false);
    CHECK(echo.at("mixing_t_max") == 256);
    REQUIRE(echo.at("cells").size() == 2);
    CHECK(echo.at("cells")[0].at("variant") == "standard");
    CHECK(echo.at("cells")[0].at("eta0") == 0.0125);
    CHECK(echo.at("cells")[0].at("lambda") == 0.0);
    CHECK(echo.at("cells")[1].at("lambda") == "inv-sqrt-T");
    CHECK_FALSE(echo.at("cells")[1].contains("eta0"));

    const json summary = json::parse(read_file(result.summary_path));
    CHECK(summary.at("problem") == "two-state");
    CHECK(summary.at("gamma") == 0.9);
    CHECK(close_rel(summary.at("omega").get<double>(), 1.0 / 3.0, 1e-12));
    CHECK(summary.at("seeds") == 3);
    CHECK(summary.at("base_seed") == 42);
    REQUIRE(summary.at("cells").size() == 2);
    const json& cell0 = summary.at("cells")[0];
    CHECK(cell0.at("index") == 0);
    CHECK(cell0.at("variant") == "standard");
    CHECK(cell0.at("schedule") == "exponential");
    CHECK(cell0.at("regime") == "iid");
    CHECK(cell0.at("lambda_rule") == "fixed");
    CHECK(cell0.at("rate_fit").is_null());  // two horizons cannot support a fit
    REQUIRE(cell0.at("horizons").size() == 2);
    const json& h0 = cell0.at("horizons")[0];
    CHECK(h0.at("T") == 16);
    CHECK(h0.at("lambda") == 0.0);
    CHECK(h0.at("eta0") == 0.0125);
    CHECK(h0.at("eta0_rule") == "explicit");
    CHECK(h0.at("initial_error_sq").get<double>() == fp.w_star.squaredNorm());
    CHECK(h0.at("mean_final_error_sq").get<double>() == result.mean_final_error.at({0, 16}));
    CHECK(h0.at("diverged") == 0);  // count of diverged seeds
    CHECK(h0.at("bound").get<double>() == result.bound_at_T.at({0, 16}));
    CHECK(h0.at("bound_theorem") == "exp-iid");
    REQUIRE(h0.at("checkpoints").size() == 5);
    CHECK(h0.at("checkpoints")[0].contains("t"));
    CHECK(h0.at("checkpoints")[0].contains("mean_error_sq"));
    CHECK(h0.at("checkpoints")[0].contains("stderr_error_sq"));
    const json& cell1 = summary.at("cells")[1];
    CHECK(cell1.at("lambda_rule") == "inv-sqrt-T");
    const json& h10 = cell1.at("horizons")[0];
    CHECK(h10.at("lambda") == 0.25);  // 1/sqrt(16)
    CHECK(close_rel(cell1.at("horizons")[1].at("lambda").get<double>(), 1.0 / std::sqrt(32.0),
                    1e-15));
    // No applicable schedule/regime theorem: the step size falls back to (1-gamma)/8.
    CHECK(h10.at("eta0_rule") == "theorem-default");
    CHECK(h10.at("eta0").get<double>() == (1.0 - 0.9) / 8.0);
    CHECK_FALSE(h10.contains("bound"));

    // Same config into a different directory: identical bytes in all three files.
    const std::string dir2 = scratch_dir("tdlab-test-sweep-2");
    const ExperimentResult rerun = run_experiment(parse_experiment_config(sweep_config_json(dir2)));
    CHECK(read_file(rerun.csv_path) == csv);
    CHECK(read_file(rerun.summary_path) == read_file(result.summary_path));
    CHECK(read_file(rerun.manifest_path) == read_file(result.manifest_path));
}

TEST_CASE("a sweep with no cells still writes a manifest and nothing else") {
    const std::string dir = scratch_dir("tdlab-test-sweep-empty");
    const ExperimentConfig config = parse_experiment_config(
        std::string(R"({"problem": "ref-chain", "horizons": [16], "out_dir": ")") + dir + "\"}");
    const ExperimentResult result = run_experiment(config);
    CHECK(result.csv_path.empty());
    CHECK(result.summary_path.empty());
    CHECK(result.mean_final_error.empty());
    CHECK(result.bound_at_T.empty());
    REQUIRE(fs::exists(result.manifest_path));
    CHECK_FALSE(fs::exists(fs::path(dir) / "rows.csv"));
    CHECK_FALSE(fs::exists(fs::path(dir) / "summary.json"));
    const json manifest = json::parse(read_file(result.manifest_path));
    CHECK(manifest.at("files") == json::array());
    CHECK(manifest.at("config").at("problem") == "ref-chain");
}

TEST_CASE("explicit starts and step-size rules flow through to the summary") {
    const std::string dir = scratch_dir("tdlab-test-sweep-starts");
    const ExperimentConfig config = parse_experiment_config(
        std::string(R"({
        "problem": "ref-chain",
        "cells": [
            {"variant": "standard", "schedule": "constant", "regime": "mean-path",
             "eta0": 0.05, "w_init": [8.0, 4.0]},
            {"variant": "standard", "schedule": "constant", "regime": "mean-path"},
            {"variant": "standard", "schedule": "constant", "regime": "mean-path",
             "w_init_offset": [1.0, 0.0]}
        ],
        "horizons": [8],
        "seeds": 2,
        "base_seed": 7,
        "practical_eta0": true,
        "out_dir": ")") +
        dir + "\"}");
    const ExperimentResult result = run_experiment(config);

    const auto& bundle = ref_bundle();
    const FixedPoints fp = solve_fixed_point(bundle, 0.0);
    Vec w0(2);
    w0 << 8.0, 4.0;

    const json summary = json::parse(read_file(result.summary_path));
    REQUIRE(summary.at("cells").size() == 3);
    const json& h0 = summary.at("cells")[0].at("horizons")[0];
    CHECK(h0.at("eta0") == 0.05);
    CHECK(h0.at("eta0_rule") == "explicit");
    CHECK(h0.at("initial_error_sq").get<double>() == (w0 - fp.w_star).squaredNorm());

    // No explicit step size + the practical flag: the heuristic rule applies.
    const json& h1 = summary.at("cells")[1].at("horizons")[0];
    CHECK(h1.at("eta0_rule") == "practical");
    CHECK(h1.at("eta0").get<double>() == practical_eta0(0.9, 0.0));
    // Mean-path runs are seed-independent, so the spread across seeds is zero.
    for (const json& cp : h1.at("checkpoints"))
        CHECK(cp.at("stderr_error_sq").get<double>() == 0.0);

    // Offset starts are measured from the fixed point itself.
    const json& h2 = summary.at("cells")[2].at("horizons")[0];
    CHECK(close_rel(h2.at("initial_error_sq").get<double>(), 1.0, 1e-12));

    // Start vectors must match the feature dimension.
    for (const char* bad_cell :
         {R"({"variant": "standard", "schedule": "constant", "regime": "mean-path",
             "w_init_offset": [1.0, 0.0, 0.0]})",
          R"({"variant": "standard", "schedule": "constant", "regime": "mean-path",
             "w_init": [1.0]})"}) {
        const ExperimentConfig bad = parse_experiment_config(
            std::string(R"({"problem": "ref-chain", "horizons": [4], "cells": [)") + bad_cell +
            R"(], "out_dir": ")" + dir + "-bad\"}");
        expect_code(ErrorCode::config_invalid, [&] { run_experiment(bad); });
    }
}

TEST_CASE("rate fits recover synthetic decay laws and reject unusable inputs") {
    std::vector<std::pair<std::int64_t, double>> inverse;
    std::vector<std::pair<std::int64_t, double>> corrected;
    for (std::int64_t T = 1024; T <= 16384; T *= 2) {
        const double T_d = static_cast<double>(T);
        inverse.emplace_back(T, 3.0 / T_d);
        corrected.emplace_back(T, 5.0 * std::log(T_d) * std::log(T_d) / T_d);
    }

    const RateFit inv_fit = fit_rate(inverse);
    CHECK(close_rel(inv_fit.slope, -1.0, 1e-12));
    CHECK(close_rel(inv_fit.intercept, std::log(3.0), 1e-12));
    CHECK(inv_fit.r_squared >= 1.0 - 1e-12);
    CHECK(inv_fit.T_min == 1024);
    CHECK(inv_fit.T_max == 16384);

    const RateFit corr_fit = fit_rate(corrected);
    CHECK(close_rel(corr_fit.corrected_slope, 1.0, 1e-12));
    CHECK(corr_fit.slope > -1.0);  // the log^2 factor flattens the raw slope
    CHECK(corr_fit.slope < -0.5);

    // Input order is irrelevant: the fit sorts by horizon.
    std::vector<std::pair<std::int64_t, double>> shuffled = {inverse[3], inverse[0], inverse[4],
                                                             inverse[2], inverse[1]};
    const RateFit shuffled_fit = fit_rate(shuffled);
    CHECK(shuffled_fit.slope == inv_fit.slope);
    CHECK(shuffled_fit.corrected_slope == inv_fit.corrected_slope);

    expect_code(ErrorCode::insufficient_horizons, [&] {
        fit_rate({inverse[0], inverse[1], inverse[2]});
    });
    expect_code(ErrorCode::insufficient_horizons, [&] {
        fit_rate({inverse[0], inverse[0], inverse[1], inverse[2]});
    });
    expect_code(ErrorCode::insufficient_horizons, [&] {
        fit_rate({{1024, 1.0}, {2048, 0.5}, {4096, 0.25}, {6144, 0.125}});
    });
    expect_code(ErrorCode::insufficient_horizons, [&] {
        fit_rate({{1000, 1.0}, {2000, 0.5}, {4000, 0.25}, {8001, 0.125}});
    });
    expect_code(ErrorCode::insufficient_horizons, [&] {
        fit_rate({{1024, 1.0}, {2048, 0.5}, {4096, 0.0}, {8192, 0.125}});
    });
    expect_code(ErrorCode::insufficient_horizons, [&] {
        fit_rate({{1024, 1.0}, {2048, 0.5}, {4096, -0.25}, {8192, 0.125}});
    });
    // Exact geometric spacing with a non-power-of-two ratio is accepted.
    const RateFit scaled = fit_rate({{1000, 3e-3}, {2000, 1.5e-3}, {4000, 7.5e-4}, {8000, 3.75e-4}});
    CHECK(close_rel(scaled.slope, -1.0, 1e-12));
}

TEST_CASE("csv rate tables average seeds, group runs, and annotate sparse groups") {
    const std::string dir = scratch_dir("tdlab-test-rate-table");
    const std::string path = dir + "/rows.csv";
    std::string body = "variant,schedule_kind,regime,T,seed,t,error_sq,value_error,bound\n";
    // Four geometric horizons with error 3/T, two seeds each; mid-run rows are ignored.
    for (std::int64_t T : {1024, 2048, 4096, 8192}) {
        for (int seed = 0; seed < 2; ++seed) {
            body += "standard,constant,iid," + std::to_string(T) + "," + std::to_string(seed) +
                    "," + std::to_string(T) + "," + std::to_string(3.0 / static_cast<double>(T)) +
                    ",0,\n";
            body += "standard,constant,iid," + std::to_string(T) + "," + std::to_string(seed) +
                    ",512,99.0,0,\n";
        }
    }
    // Only two horizons: reported as skipped, not fitted.
    body += "regularized,exponential,markovian,16,0,16,1.0,0,\n";
    body += "regularized,exponential,markovian,32,0,32,0.5,0,\n";
    // Four horizons but zero error: the fit failure is annotated instead of thrown.
    for (std::int64_t T : {16, 32, 64, 128})
        body += "projected,poly,mean-path," + std::to_string(T) + ",0," + std::to_string(T) +
                ",0.0,0,\n";
    write_file(path, body);

    const std::string table = fit_rates_from_csv(path);
    INFO(table);
    CHECK(table.find("group") != std::string::npos);
    CHECK(table.find("standard/constant/iid") != std::string::npos);
    CHECK(table.find("-1.000") != std::string::npos);
    CHECK(table.find("1024..8192") != std::string::npos);
    CHECK(table.find("regularized/exponential/markovian  (skipped: needs at least 4 horizons, "
                     "has 2)") != std::string::npos);
    CHECK(table.find("projected/poly/mean-path  (skipped: ") != std::string::npos);

    expect_code(ErrorCode::io_failure, [&] { fit_rates_from_csv(dir + "/absent.csv"); });
    write_file(dir + "/wrong-header.csv", "a,b,c\n");
    expect_code(ErrorCode::config_invalid, [&] { fit_rates_from_csv(dir + "/wrong-header.csv"); });
    write_file(dir + "/short-row.csv",
               "variant,schedule_kind,regime,T,seed,t,error_sq,value_error,bound\n"
               "standard,constant,iid\n");
    expect_code(ErrorCode::config_invalid, [&] { fit_rates_from_csv(dir + "/short-row.csv"); });
    write_file(dir + "/bad-number.csv",
               "variant,schedule_kind,regime,T,seed,t,error_sq,value_error,bound\n"
               "standard,constant,iid,xx,0,16,1.0,0,\n");
    expect_code(ErrorCode::config_invalid, [&] { fit_rates_from_csv(dir + "/bad-number.csv"); });
}

}  // TEST_SUITE

#include "tdlab/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "tdlab/errors.hpp"
#include "tdlab/rng.hpp"
#include "tdlab/schedule.hpp"

namespace tdlab {

namespace {

using nlohmann::json;

// %.17g round-trips every double; all persisted numbers go through here so a
// rerun with the same config reproduces the files byte for byte.
std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return std::string(buf);
}

[[noreturn]] void bad_config(const std::string& path, const std::string& why) {
    fail(ErrorCode::config_invalid, "config field '" + path + "': " + why);
}

void reject_unknown_keys(const json& obj, const std::string& path,
                         std::initializer_list<const char*> allowed) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        bool known = false;
        for (const char* key : allowed)
            if (it.key() == key) {
                known = true;
                break;
            }
        if (!known) bad_config(path + it.key(), "unknown key");
    }
}

double as_number(const json& value, const std::string& path) {
    if (!value.is_number()) bad_config(path, "expected a number");
    return value.get<double>();
}

std::int64_t as_integer(const json& value, const std::string& path) {
    if (!value.is_number_integer()) bad_config(path, "expected an integer");
    return value.get<std::int64_t>();
}

std::string as_string(const json& value, const std::string& path) {
    if (!value.is_string()) bad_config(path, "expected a string");
    return value.get<std::string>();
}

// Re-tags parse errors from the enum parsers with the config field path.
template <typename F>
auto parsed_at(const std::string& path, F&& f) {
    try {
        return f();
    } catch (const TdError& e) {
        bad_config(path, e.what());
    }
}

std::string join_path(const std::string& base_dir, const std::string& path) {
    std::filesystem::path p(path);
    if (p.is_absolute() || base_dir.empty() || base_dir == ".") return path;
    return (std::filesystem::path(base_dir) / p).string();
}

struct GeneratorRef {
    Family family = Family::dense_dirichlet;
    std::uint64_t seed = 1;
    int n = 8;
    int d = 4;
    int branching = 2;
    double gamma = 0.9;
};

Problem make_from_generator(const GeneratorRef& ref) {
    GeneratorOptions options;
    options.family = ref.family;
    options.branching = ref.branching;
    options.gamma = ref.gamma;
    auto [mdp, features] = make_random_mdp(ref.seed, ref.n, ref.d, options);
    return Problem{std::move(mdp), std::move(features)};
}

bool is_family_name(const std::string& text) {
    return text == "dense-dirichlet" || text == "chain" || text == "garnet";
}

GeneratorRef parse_generator_text(const std::string& text) {
    GeneratorRef ref;
    const auto colon = text.find(':');
    const std::string family = text.substr(0, colon);
    ref.family = parse_family(family);
    if (colon == std::string::npos) return ref;
    std::stringstream rest(text.substr(colon + 1));
    std::string item;
    while (std::getline(rest, item, ',')) {
        if (item.empty()) continue;
        const auto eq = item.find('=');
        if (eq == std::string::npos)
            fail(ErrorCode::config_invalid, "generator option '" + item + "' is not key=value");
        const std::string key = item.substr(0, eq);
        const std::string value = item.substr(eq + 1);
        try {
            if (key == "seed")
                ref.seed = static_cast<std::uint64_t>(std::stoull(value));
            else if (key == "n")
                ref.n = std::stoi(value);
            else if (key == "d")
                ref.d = std::stoi(value);
            else if (key == "branching")
                ref.branching = std::stoi(value);
            else if (key == "gamma")
                ref.gamma = std::stod(value);
            else
                fail(ErrorCode::config_invalid, "unknown generator option '" + key + "'");
        } catch (const std::logic_error&) {
            fail(ErrorCode::config_invalid,
                 "generator option '" + key + "' has a malformed value '" + value + "'");
        }
    }
    return ref;
}

Problem parse_problem_field(const json& value, const std::string& base_dir, std::string& label) {
    if (value.is_string()) {
        const std::string text = value.get<std::string>();
        label = text;
        return resolve_problem_ref(text, base_dir);
    }
    if (!value.is_object()) bad_config("problem", "expected a string or an object");
    if (value.contains("path")) {
        reject_unknown_keys(value, "problem.", {"path"});
        const std::string path = as_string(value.at("path"), "problem.path");
        label = path;
        return load_problem_file(join_path(base_dir, path));
    }
    if (value.contains("family")) {
        reject_unknown_keys(value, "problem.", {"family", "seed", "n", "d", "branching", "gamma"});
        GeneratorRef ref;
        ref.family = parsed_at("problem.family",
                               [&] { return parse_family(as_string(value.at("family"),
                                                                   "problem.family")); });
        if (value.contains("seed"))
            ref.seed = static_cast<std::uint64_t>(as_integer(value.at("seed"), "problem.seed"));
        if (value.contains("n")) ref.n = static_cast<int>(as_integer(value.at("n"), "problem.n"));
        if (value.contains("d")) ref.d = static_cast<int>(as_integer(value.at("d"), "problem.d"));
        if (value.contains("branching"))
            ref.branching = static_cast<int>(as_integer(value.at("branching"), "problem.branching"));
        if (value.contains("gamma")) ref.gamma = as_number(value.at("gamma"), "problem.gamma");
        label = family_name(ref.family) + ":seed=" + std::to_string(ref.seed) +
                ",n=" + std::to_string(ref.n) + ",d=" + std::to_string(ref.d);
        return make_from_generator(ref);
    }
    label = "inline";
    return parsed_at("problem", [&] { return problem_from_json(value.dump()); });
}

Vec as_vector(const json& value, const std::string& path) {
    if (!value.is_array()) bad_config(path, "expected an array of numbers");
    Vec v(static_cast<int>(value.size()));
    for (size_t i = 0; i < value.size(); ++i)
        v[static_cast<int>(i)] = as_number(value[i], path + "[" + std::to_string(i) + "]");
    return v;
}

CellSpec parse_cell(const json& value, const std::string& path) {
    if (!value.is_object()) bad_config(path, "expected an object");
    reject_unknown_keys(value, path + ".",
                        {"variant", "lambda", "radius", "tail_fraction", "schedule", "eta0",
                         "poly_z", "divisor", "regime", "w_init", "w_init_offset"});
    CellSpec cell;
    if (value.contains("variant"))
        cell.variant = parsed_at(path + ".variant", [&] {
            return parse_variant(as_string(value.at("variant"), path + ".variant"));
        });
    if (value.contains("lambda")) {
        const json& lam = value.at("lambda");
        if (lam.is_string()) {
            if (lam.get<std::string>() != "inv-sqrt-T")
                bad_config(path + ".lambda", "expected a number or \"inv-sqrt-T\"");
            cell.lambda_inv_sqrt_T = true;
        } else {
            cell.lambda = as_number(lam, path + ".lambda");
            if (cell.lambda < 0.0) bad_config(path + ".lambda", "must be non-negative");
        }
    }
    if (value.contains("radius")) {
        cell.radius = as_number(value.at("radius"), path + ".radius");
        if (cell.radius < 0.0) bad_config(path + ".radius", "must be non-negative");
    }
    if (value.contains("tail_fraction")) {
        cell.tail_fraction = as_number(value.at("tail_fraction"), path + ".tail_fraction");
        if (!(cell.tail_fraction > 0.0 && cell.tail_fraction <= 1.0))
            bad_config(path + ".tail_fraction", "must lie in (0, 1]");
    }
    if (value.contains("schedule"))
        cell.schedule = parsed_at(path + ".schedule", [&] {
            return parse_schedule_kind(as_string(value.at("schedule"), path + ".schedule"));
        });
    if (value.contains("eta0")) {
        cell.eta0 = as_number(value.at("eta0"), path + ".eta0");
        if (*cell.eta0 <= 0.0) bad_config(path + ".eta0", "must be positive");
    }
    if (value.contains("poly_z")) cell.poly_z = as_number(value.at("poly_z"), path + ".poly_z");
    if (value.contains("divisor")) {
        cell.divisor = as_number(value.at("divisor"), path + ".divisor");
        if (cell.divisor <= 0.0) bad_config(path + ".divisor", "must be positive");
    }
    if (value.contains("regime"))
        cell.regime = parsed_at(path + ".regime", [&] {
            return parse_regime(as_string(value.at("regime"), path + ".regime"));
        });
    if (value.contains("w_init")) cell.w_init = as_vector(value.at("w_init"), path + ".w_init");
    if (value.contains("w_init_offset"))
        cell.w_init_offset = as_vector(value.at("w_init_offset"), path + ".w_init_offset");
    if (cell.w_init && cell.w_init_offset)
        bad_config(path + ".w_init_offset", "exclusive with w_init");
    if (cell.lambda_inv_sqrt_T && cell.variant != Variant::regularized)
        bad_config(path + ".lambda", "\"inv-sqrt-T\" requires the regularized variant");
    if (cell.lambda > 0.0 && cell.variant != Variant::regularized)
        bad_config(path + ".lambda", "positive lambda requires the regularized variant");
    return cell;
}

double resolve_lambda(const CellSpec& cell, std::int64_t T) {
    if (cell.lambda_inv_sqrt_T) return 1.0 / std::sqrt(static_cast<double>(T));
    return cell.lambda;
}

// The guarantee that speaks about this cell's (variant, schedule, regime)
// combination, if any.
std::optional<Theorem> applicable_theorem(const CellSpec& cell) {
    const bool standard_like = cell.variant == Variant::standard;
    if (standard_like && cell.schedule == ScheduleKind::constant) {
        if (cell.regime == Regime::mean_path) return Theorem::constant_mean;
        if (cell.regime == Regime::iid) return Theorem::constant_iid;
    }
    if (standard_like && cell.schedule == ScheduleKind::exponential) {
        if (cell.regime == Regime::iid) return Theorem::exp_iid;
        if (cell.regime == Regime::markovian) return Theorem::exp_markov;
    }
    if (cell.variant == Variant::regularized && cell.schedule == ScheduleKind::exponential &&
        cell.regime == Regime::markovian)
        return Theorem::reg_markov;
    return std::nullopt;
}

// Step scale the matching guarantee prescribes; cells no guarantee speaks about
// fall back to the universal stability constant (1 - gamma) / 8.
double theorem_eta0(const CellSpec& cell, const ProblemBundle& bundle, double lambda,
                    std::int64_t T) {
    const auto theorem = applicable_theorem(cell);
    if (!theorem) return (1.0 - bundle.mdp.gamma) / 8.0;
    std::optional<double> lam;
    if (*theorem == Theorem::reg_markov) lam = lambda;
    return default_eta0(*theorem, bundle.mdp.gamma, bundle.analysis.omega, lam, T);
}

struct ResolvedEta {
    double value = 0.0;
    std::string rule;
};

ResolvedEta resolve_eta0(const ExperimentConfig& config, const CellSpec& cell,
                         const ProblemBundle& bundle, double lambda, std::int64_t T) {
    if (cell.eta0) return {*cell.eta0, "explicit"};
    if (config.practical_eta0) return {practical_eta0(bundle.mdp.gamma, lambda), "practical"};
    return {theorem_eta0(cell, bundle, lambda, T), "theorem-default"};
}

std::string cell_label(const CellSpec& cell) {
    return variant_name(cell.variant) + "/" + schedule_kind_name(cell.schedule) + "/" +
           regime_name(cell.regime);
}

json ratefit_to_json(const RateFit& fit) {
    json j;
    j["slope"] = fit.slope;
    j["intercept"] = fit.intercept;
    j["r_squared"] = fit.r_squared;
    j["corrected_slope"] = fit.corrected_slope;
    j["T_min"] = fit.T_min;
    j["T_max"] = fit.T_max;
    return j;
}

struct LinearFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r_squared = 1.0;
};

LinearFit least_squares(const std::vector<double>& x, const std::vector<double>& y) {
    const auto n = static_cast<double>(x.size());
    double sx = 0.0, sy = 0.0;
    for (size_t i = 0; i < x.size(); ++i) {
        sx += x[i];
        sy += y[i];
    }
    const double mx = sx / n, my = sy / n;
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
        syy += (y[i] - my) * (y[i] - my);
    }
    LinearFit fit;
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    if (syy > 1e-300) {
        double ss_res = 0.0;
        for (size_t i = 0; i < x.size(); ++i) {
            const double resid = y[i] - (fit.intercept + fit.slope * x[i]);
            ss_res += resid * resid;
        }
        fit.r_squared = 1.0 - ss_res / syy;
    }
    return fit;
}

void write_file_or_throw(const std::string& path, const std::string& body) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << body;
    if (!out) fail(ErrorCode::io_failure, "cannot write " + path);
}

}  // namespace

Problem resolve_problem_ref(const std::string& text, const std::string& base_dir) {
    if (text == "ref-chain") {
        auto [mdp, features] = reference_chain();
        return Problem{std::move(mdp), std::move(features)};
    }
    if (text.find(':') != std::string::npos &&
        is_family_name(text.substr(0, text.find(':'))))
        return make_from_generator(parse_generator_text(text));
    if (is_family_name(text)) return make_from_generator(parse_generator_text(text));
    return load_problem_file(join_path(base_dir, text));
}

ExperimentConfig parse_experiment_config(const std::string& json_text,
                                         const std::string& base_dir) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::parse_error& e) {
        fail(ErrorCode::config_invalid, std::string("config is not valid JSON: ") + e.what());
    }
    if (!doc.is_object()) bad_config("<root>", "expected an object");
    reject_unknown_keys(doc, "",
                        {"problem", "label", "cells", "horizons", "seeds", "base_seed", "out_dir",
                         "bounds", "practical_eta0", "mixing_t_max"});
    if (!doc.contains("problem")) bad_config("problem", "required");

    ExperimentConfig config;
    config.problem = parse_problem_field(doc.at("problem"), base_dir, config.problem_label);
    config.problem_ref_json = doc.at("problem").dump();
    if (doc.contains("label")) config.problem_label = as_string(doc.at("label"), "label");

    if (doc.contains("cells")) {
        const json& cells = doc.at("cells");
        if (!cells.is_array()) bad_config("cells", "expected an array");
        for (size_t i = 0; i < cells.size(); ++i)
            config.cells.push_back(parse_cell(cells[i], "cells[" + std::to_string(i) + "]"));
    }
    if (doc.contains("horizons")) {
        const json& horizons = doc.at("horizons");
        if (!horizons.is_array()) bad_config("horizons", "expected an array");
        for (size_t i = 0; i < horizons.size(); ++i) {
            const std::string path = "horizons[" + std::to_string(i) + "]";
            const std::int64_t T = as_integer(horizons[i], path);
            if (T < 1) bad_config(path, "must be >= 1");
            config.horizons.push_back(T);
        }
    }
    if (doc.contains("seeds")) {
        config.seeds = static_cast<int>(as_integer(doc.at("seeds"), "seeds"));
        if (config.seeds < 1) bad_config("seeds", "must be >= 1");
    }
    if (doc.contains("base_seed"))
        config.base_seed = static_cast<std::uint64_t>(as_integer(doc.at("base_seed"), "base_seed"));
    config.out_dir = "results";
    if (doc.contains("out_dir")) config.out_dir = as_string(doc.at("out_dir"), "out_dir");
    if (doc.contains("bounds")) {
        const json& bounds = doc.at("bounds");
        if (!bounds.is_array()) bad_config("bounds", "expected an array");
        for (size_t i = 0; i < bounds.size(); ++i) {
            const std::string path = "bounds[" + std::to_string(i) + "]";
            config.bounds.push_back(
                parsed_at(path, [&] { return parse_theorem(as_string(bounds[i], path)); }));
        }
    }
    if (doc.contains("practical_eta0")) {
        if (!doc.at("practical_eta0").is_boolean()) bad_config("practical_eta0", "expected a bool");
        config.practical_eta0 = doc.at("practical_eta0").get<bool>();
    }
    if (doc.contains("mixing_t_max")) {
        config.mixing_t_max = static_cast<int>(as_integer(doc.at("mixing_t_max"), "mixing_t_max"));
        if (config.mixing_t_max < 2) bad_config("mixing_t_max", "must be >= 2");
    }
    return config;
}

ExperimentConfig load_experiment_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorCode::io_failure, "cannot open config file " + path);
    std::stringstream buffer;
    buffer << in.rdbuf();
    return parse_experiment_config(buffer.str(),
                                   std::filesystem::path(path).parent_path().string());
}

ExperimentResult run_experiment(const ExperimentConfig& config) {
    std::filesystem::create_directories(config.out_dir);
    const auto out_path = [&](const char* name) {
        return (std::filesystem::path(config.out_dir) / name).string();
    };

    ExperimentResult result;
    result.manifest_path = out_path("manifest.json");

    json cells_echo = json::array();
    for (const CellSpec& cell : config.cells) {
        json c;
        c["variant"] = variant_name(cell.variant);
        if (cell.lambda_inv_sqrt_T)
            c["lambda"] = "inv-sqrt-T";
        else
            c["lambda"] = cell.lambda;
        c["radius"] = cell.radius;
        c["tail_fraction"] = cell.tail_fraction;
        c["schedule"] = schedule_kind_name(cell.schedule);
        if (cell.eta0) c["eta0"] = *cell.eta0;
        c["poly_z"] = cell.poly_z;
        c["divisor"] = cell.divisor;
        c["regime"] = regime_name(cell.regime);
        if (cell.w_init)
            c["w_init"] = std::vector<double>(cell.w_init->data(),
                                              cell.w_init->data() + cell.w_init->size());
        if (cell.w_init_offset)
            c["w_init_offset"] = std::vector<double>(
                cell.w_init_offset->data(), cell.w_init_offset->data() + cell.w_init_offset->size());
        cells_echo.push_back(c);
    }
    json bounds_echo = json::array();
    for (Theorem theorem : config.bounds) bounds_echo.push_back(theorem_name(theorem));

    json manifest;
    manifest["problem"] = config.problem_label;
    manifest["files"] = json::array();
    manifest["config"]["problem"] = config.problem_ref_json.empty()
                                        ? json(config.problem_label)
                                        : json::parse(config.problem_ref_json);
    manifest["config"]["cells"] = cells_echo;
    manifest["config"]["horizons"] = config.horizons;
    manifest["config"]["seeds"] = config.seeds;
    manifest["config"]["base_seed"] = config.base_seed;
    manifest["config"]["bounds"] = bounds_echo;
    manifest["config"]["practical_eta0"] = config.practical_eta0;
    manifest["config"]["mixing_t_max"] = config.mixing_t_max;

    if (config.cells.empty() || config.horizons.empty()) {
        write_file_or_throw(result.manifest_path, manifest.dump(2) + "\n");
        return result;
    }

    ProblemBundle bundle = ProblemBundle::prepare(config.problem.mdp, config.problem.features);

    const bool needs_mixing = [&] {
        for (const CellSpec& cell : config.cells) {
            const auto theorem = applicable_theorem(cell);
            if (!theorem) continue;
            if (*theorem != Theorem::exp_markov && *theorem != Theorem::reg_markov) continue;
            if (std::find(config.bounds.begin(), config.bounds.end(), *theorem) !=
                config.bounds.end())
                return true;
        }
        return false;
    }();
    std::optional<MixingProfile> mixing_base;
    if (needs_mixing)
        mixing_base = build_mixing_profile(bundle.mdp, bundle.analysis, config.mixing_t_max);

    std::string csv = "variant,schedule_kind,regime,T,seed,t,error_sq,value_error,bound\n";
    json summary_cells = json::array();

    for (size_t ci = 0; ci < config.cells.size(); ++ci) {
        const CellSpec& cell = config.cells[ci];
        std::optional<Vec> w_init = cell.w_init;
        if (cell.w_init_offset) {
            if (cell.w_init_offset->size() != bundle.dim())
                fail(ErrorCode::config_invalid,
                     "cell " + std::to_string(ci) + ": w_init_offset has dimension " +
                         std::to_string(cell.w_init_offset->size()) + ", problem has " +
                         std::to_string(bundle.dim()));
            w_init = Vec(solve_fixed_point(bundle, 0.0).w_star + *cell.w_init_offset);
        }
        const auto theorem = applicable_theorem(cell);
        const bool want_bound =
            theorem && std::find(config.bounds.begin(), config.bounds.end(), *theorem) !=
                           config.bounds.end();

        json cell_json;
        cell_json["index"] = ci;
        cell_json["variant"] = variant_name(cell.variant);
        cell_json["schedule"] = schedule_kind_name(cell.schedule);
        cell_json["regime"] = regime_name(cell.regime);
        cell_json["lambda_rule"] = cell.lambda_inv_sqrt_T ? "inv-sqrt-T" : "fixed";
        json horizon_rows = json::array();
        std::vector<std::pair<std::int64_t, double>> final_errors;

        for (std::int64_t T : config.horizons) {
            const double lambda = resolve_lambda(cell, T);
            const ResolvedEta eta = resolve_eta0(config, cell, bundle, lambda, T);

            Schedule schedule;
            schedule.kind = cell.schedule;
            schedule.eta0 = eta.value;
            schedule.T = T;
            schedule.poly_z = cell.poly_z;
            schedule.omega = bundle.analysis.omega;
            schedule.divisor = cell.divisor;

            std::vector<RunRecord> records;
            records.reserve(static_cast<size_t>(config.seeds));
            const std::uint64_t cell_stream = derive_stream(
                derive_stream(config.base_seed, static_cast<std::uint64_t>(ci)),
                static_cast<std::uint64_t>(T));
            for (int si = 0; si < config.seeds; ++si) {
                RunConfig run_config;
                run_config.variant = cell.variant;
                run_config.lambda = cell.variant == Variant::regularized ? lambda : 0.0;
                run_config.radius = cell.radius;
                run_config.tail_fraction = cell.tail_fraction;
                run_config.schedule = schedule;
                run_config.regime = cell.regime;
                run_config.T = T;
                run_config.seed = derive_stream(cell_stream, static_cast<std::uint64_t>(si));
                run_config.w_init = w_init;
                try {
                    records.push_back(run(run_config, bundle));
                } catch (const TdError& e) {
                    throw TdError(e.code(), "cell " + std::to_string(ci) + " (" +
                                                cell_label(cell) + "), T=" + std::to_string(T) +
                                                ", seed " + std::to_string(si) + ": " + e.what());
                }
            }

            // The guarantee is evaluated at a step scale its premise admits: the
            // run's own eta0 when small enough, otherwise the prescribed value
            // (the Markovian statements pin eta0 exactly, so always the latter).
            std::optional<double> bound;
            if (want_bound) {
                const double prescribed = theorem_eta0(cell, bundle, lambda, T);
                double bound_eta0 = prescribed;
                if ((*theorem == Theorem::constant_mean || *theorem == Theorem::constant_iid ||
                     *theorem == Theorem::exp_iid) &&
                    eta.value <= prescribed * (1.0 + 1e-12))
                    bound_eta0 = eta.value;
                BoundInputs inputs;
                inputs.T = T;
                inputs.eta0 = bound_eta0;
                inputs.lambda = *theorem == Theorem::reg_markov ? lambda : 0.0;
                inputs.initial_error_sq = *theorem == Theorem::reg_markov
                                              ? records.front().initial_reg_error_sq
                                              : records.front().initial_error_sq;
                if (*theorem == Theorem::exp_markov || *theorem == Theorem::reg_markov)
                    inputs.mixing = mixing_base->for_run(bound_eta0, inputs.lambda, T);
                const FixedPoints fixed = solve_fixed_point(bundle, inputs.lambda);
                bound = eval_bound(*theorem, inputs, fixed, bundle.analysis, bundle.mdp.gamma);
                result.bound_at_T[{static_cast<int>(ci), T}] = *bound;
            }

            for (int si = 0; si < config.seeds; ++si) {
                const RunRecord& record = records[static_cast<size_t>(si)];
                for (const CheckpointRow& row : record.rows) {
                    csv += variant_name(cell.variant);
                    csv += ',';
                    csv += schedule_kind_name(cell.schedule);
                    csv += ',';
                    csv += regime_name(cell.regime);
                    csv += ',';
                    csv += std::to_string(T);
                    csv += ',';
                    csv += std::to_string(si);
                    csv += ',';
                    csv += std::to_string(row.t);
                    csv += ',';
                    csv += format_double(row.error_sq);
                    csv += ',';
                    csv += format_double(row.value_error);
                    csv += ',';
                    if (bound && row.t == T) csv += format_double(*bound);
                    csv += '\n';
                }
            }

            const std::vector<SummaryRow> agg = aggregate(records);
            json checkpoints = json::array();
            for (const SummaryRow& row : agg) {
                json cp;
                cp["t"] = row.t;
                cp["mean_error_sq"] = row.mean_error_sq;
                cp["stderr_error_sq"] = row.stderr_error_sq;
                cp["mean_value_error"] = row.mean_value_error;
                checkpoints.push_back(cp);
            }
            int diverged = 0;
            for (const RunRecord& record : records)
                if (record.diverged_at >= 0) ++diverged;

            const double mean_final = agg.back().mean_error_sq;
            result.mean_final_error[{static_cast<int>(ci), T}] = mean_final;
            final_errors.emplace_back(T, mean_final);

            json hj;
            hj["T"] = T;
            hj["lambda"] = lambda;
            hj["eta0"] = eta.value;
            hj["eta0_rule"] = eta.rule;
            hj["initial_error_sq"] = records.front().initial_error_sq;
            hj["initial_reg_error_sq"] = records.front().initial_reg_error_sq;
            hj["mean_final_error_sq"] = mean_final;
            hj["diverged"] = diverged;
            hj["checkpoints"] = checkpoints;
            if (bound) {
                hj["bound"] = *bound;
                hj["bound_theorem"] = theorem_name(*theorem);
            }
            horizon_rows.push_back(hj);
        }

        cell_json["horizons"] = horizon_rows;
        try {
            cell_json["rate_fit"] = ratefit_to_json(fit_rate(final_errors));
        } catch (const TdError&) {
            cell_json["rate_fit"] = nullptr;
        }
        summary_cells.push_back(cell_json);
    }

    result.csv_path = out_path("rows.csv");
    write_file_or_throw(result.csv_path, csv);

    json summary;
    summary["problem"] = config.problem_label;
    summary["gamma"] = bundle.mdp.gamma;
    summary["omega"] = bundle.analysis.omega;
    summary["seeds"] = config.seeds;
    summary["base_seed"] = config.base_seed;
    summary["cells"] = summary_cells;
    result.summary_path = out_path("summary.json");
    write_file_or_throw(result.summary_path, summary.dump(2) + "\n");

    manifest["files"].push_back("rows.csv");
    manifest["files"].push_back("summary.json");
    write_file_or_throw(result.manifest_path, manifest.dump(2) + "\n");
    return result;
}

RateFit fit_rate(const std::vector<std::pair<std::int64_t, double>>& error_by_T) {
    if (error_by_T.size() < 4)
        fail(ErrorCode::insufficient_horizons,
             "rate fit needs >= 4 horizons, got " + std::to_string(error_by_T.size()));
    std::vector<std::pair<std::int64_t, double>> points = error_by_T;
    std::sort(points.begin(), points.end());
    for (size_t i = 1; i < points.size(); ++i)
        if (points[i].first == points[i - 1].first)
            fail(ErrorCode::insufficient_horizons, "duplicate horizon in rate fit");
    const double ratio =
        static_cast<double>(points[1].first) / static_cast<double>(points[0].first);
    for (size_t i = 1; i < points.size(); ++i) {
        const double r =
            static_cast<double>(points[i].first) / static_cast<double>(points[i - 1].first);
        if (std::abs(r / ratio - 1.0) > 1e-9)
            fail(ErrorCode::insufficient_horizons, "horizons are not geometrically spaced");
    }
    std::vector<double> log_T, log_err, corrected_x;
    for (const auto& [T, err] : points) {
        if (!(err > 0.0))
            fail(ErrorCode::insufficient_horizons, "rate fit needs positive mean errors");
        const double T_d = static_cast<double>(T);
        log_T.push_back(std::log(T_d));
        log_err.push_back(std::log(err));
        corrected_x.push_back(std::log(std::log(T_d) * std::log(T_d) / T_d));
    }
    const LinearFit plain = least_squares(log_T, log_err);
    const LinearFit corrected = least_squares(corrected_x, log_err);
    RateFit fit;
    fit.slope = plain.slope;
    fit.intercept = plain.intercept;
    fit.r_squared = plain.r_squared;
    fit.corrected_slope = corrected.slope;
    fit.T_min = points.front().first;
    fit.T_max = points.back().first;
    return fit;
}

std::string fit_rates_from_csv(const std::string& csv_path) {
    std::ifstream in(csv_path, std::ios::binary);
    if (!in) fail(ErrorCode::io_failure, "cannot open " + csv_path);
    std::string line;
    if (!std::getline(in, line) ||
        line != "variant,schedule_kind,regime,T,seed,t,error_sq,value_error,bound")
        fail(ErrorCode::config_invalid, csv_path + " does not carry the expected header");

    // group key -> T -> (sum of final error_sq, count)
    std::map<std::string, std::map<std::int64_t, std::pair<double, std::int64_t>>> groups;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> fields;
        std::stringstream row(line);
        std::string field;
        while (std::getline(row, field, ',')) fields.push_back(field);
        if (fields.size() < 8)
            fail(ErrorCode::config_invalid, csv_path + " has a malformed row: " + line);
        std::int64_t T = 0, t = 0;
        double error_sq = 0.0;
        try {
            T = std::stoll(fields[3]);
            t = std::stoll(fields[5]);
            error_sq = std::stod(fields[6]);
        } catch (const std::logic_error&) {
            fail(ErrorCode::config_invalid, csv_path + " has a malformed row: " + line);
        }
        if (t != T) continue;
        auto& slot = groups[fields[0] + "/" + fields[1] + "/" + fields[2]][T];
        slot.first += error_sq;
        slot.second += 1;
    }

    std::ostringstream table;
    table << "group                                    T-range           slope    corrected  "
             "r^2\n";
    for (const auto& [key, by_T] : groups) {
        std::vector<std::pair<std::int64_t, double>> points;
        for (const auto& [T, acc] : by_T)
            points.emplace_back(T, acc.first / static_cast<double>(acc.second));
        std::string row;
        if (points.size() < 4) {
            table << key << "  (skipped: needs at least 4 horizons, has "
                  << points.size() << ")\n";
            continue;
        }
        try {
            const RateFit fit = fit_rate(points);
            char buf[128];
            std::snprintf(buf, sizeof(buf), "%-40s %6lld..%-8lld %8.3f %8.3f %8.4f", key.c_str(),
                          static_cast<long long>(fit.T_min), static_cast<long long>(fit.T_max),
                          fit.slope, fit.corrected_slope, fit.r_squared);
            row = buf;
        } catch (const TdError& e) {
            row = key + "  (skipped: " + std::string(e.what()) + ")";
        }
        table << row << "\n";
    }
    return table.str();
}

}  // namespace tdlab

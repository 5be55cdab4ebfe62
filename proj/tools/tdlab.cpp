// Command-line front end: oracle inspection, experiment sweeps, mixing
// diagnostics, the inequality check suite, and rate fitting over result CSVs.

#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "tdlab/errors.hpp"
#include "tdlab/experiment.hpp"
#include "tdlab/lemmas.hpp"
#include "tdlab/oracle.hpp"
#include "tdlab/rng.hpp"
#include "tdlab/sampling.hpp"
#include "tdlab/schedule.hpp"
#include "tdlab/td.hpp"

namespace {

using nlohmann::json;
using namespace tdlab;

int cmd_oracle(const std::string& problem_ref, double lambda, std::int64_t T, int mixing_t_max) {
    const Problem problem = resolve_problem_ref(problem_ref);
    ProblemBundle bundle = ProblemBundle::prepare(problem.mdp, problem.features);
    const double gamma = bundle.mdp.gamma;
    const double lam = lambda >= 0.0 ? lambda : 1.0 / std::sqrt(static_cast<double>(T));

    const OracleReport report = oracle_report(bundle, lam);
    json doc = json::parse(report.to_json());

    const MixingProfile mixing = build_mixing_profile(bundle.mdp, bundle.analysis, mixing_t_max);
    doc["mixing"]["m"] = mixing.m;
    doc["mixing"]["rho"] = mixing.rho;

    const FixedPoints plain = solve_fixed_point(bundle, 0.0);
    const FixedPoints reg = solve_fixed_point(bundle, lam);
    json bounds;
    for (const Theorem theorem :
         {Theorem::constant_mean, Theorem::constant_iid, Theorem::exp_iid, Theorem::exp_markov,
          Theorem::reg_markov}) {
        const bool is_reg = theorem == Theorem::reg_markov;
        BoundInputs inputs;
        inputs.T = T;
        inputs.lambda = is_reg ? lam : 0.0;
        inputs.eta0 = default_eta0(theorem, gamma, bundle.analysis.omega,
                                   is_reg ? std::optional<double>(lam) : std::nullopt, T);
        inputs.initial_error_sq =
            is_reg ? reg.w_reg_star.squaredNorm() : plain.w_star.squaredNorm();
        if (theorem == Theorem::exp_markov || theorem == Theorem::reg_markov)
            inputs.mixing = mixing.for_run(inputs.eta0, inputs.lambda, T);
        json entry;
        entry["eta0"] = inputs.eta0;
        entry["rhs"] = eval_bound(theorem, inputs, is_reg ? reg : plain, bundle.analysis, gamma);
        if (inputs.mixing) entry["tau_mix"] = inputs.mixing->tau_mix;
        bounds[theorem_name(theorem)] = entry;
    }
    doc["bounds"] = bounds;
    doc["bounds_T"] = T;

    std::printf("%s\n", doc.dump(2).c_str());
    return 0;
}

int cmd_run(const std::string& config_path, const std::optional<std::string>& out_dir,
            bool practical, const std::optional<std::uint64_t>& seed) {
    ExperimentConfig config = load_experiment_config(config_path);
    if (out_dir) config.out_dir = *out_dir;
    if (practical) config.practical_eta0 = true;
    if (seed) config.base_seed = *seed;

    const ExperimentResult result = run_experiment(config);
    std::printf("manifest: %s\n", result.manifest_path.c_str());
    if (!result.csv_path.empty()) std::printf("rows:     %s\n", result.csv_path.c_str());
    if (!result.summary_path.empty()) std::printf("summary:  %s\n", result.summary_path.c_str());
    for (const auto& [key, value] : result.mean_final_error) {
        std::printf("cell %d T=%" PRId64 "  mean final error %.6g", key.first, key.second, value);
        const auto bound = result.bound_at_T.find(key);
        if (bound != result.bound_at_T.end()) std::printf("  (bound %.6g)", bound->second);
        std::printf("\n");
    }
    return 0;
}

int cmd_mixing(const std::string& problem_ref, int t_max) {
    const Problem problem = resolve_problem_ref(problem_ref);
    ProblemBundle bundle = ProblemBundle::prepare(problem.mdp, problem.features);
    const MixingProfile mixing = build_mixing_profile(bundle.mdp, bundle.analysis, t_max);
    std::fprintf(stderr, "envelope: m=%.17g rho=%.17g\n", mixing.m, mixing.rho);
    std::printf("t,tv,envelope\n");
    for (size_t t = 0; t < mixing.tv_curve.size(); ++t)
        std::printf("%zu,%.17g,%.17g\n", t, mixing.tv_curve[t],
                    mixing.m * std::pow(mixing.rho, static_cast<double>(t)));
    return 0;
}

int cmd_lemmas(const std::string& problem_ref, int trials, int instances, std::uint64_t seed) {
    // Worst observation per lemma id across every checked instance.
    std::map<std::string, LemmaCheck> worst;
    auto absorb = [&worst](std::vector<LemmaCheck> checks) {
        for (LemmaCheck& check : checks) {
            auto it = worst.find(check.lemma_id);
            if (it == worst.end()) {
                worst.emplace(check.lemma_id, std::move(check));
            } else {
                it->second.trials += check.trials;
                if (check.max_violation < it->second.max_violation) {
                    it->second.max_violation = check.max_violation;
                    it->second.witness = std::move(check.witness);
                }
            }
        }
    };

    {
        const Problem problem = resolve_problem_ref(problem_ref);
        ProblemBundle bundle = ProblemBundle::prepare(problem.mdp, problem.features);
        absorb(check_all_lemmas(bundle, trials, derive_stream(seed, 0)));
    }
    const Family families[] = {Family::dense_dirichlet, Family::chain, Family::garnet};
    for (int i = 1; i < instances; ++i) {
        GeneratorOptions options;
        options.family = families[i % 3];
        const int n = 3 + static_cast<int>(derive_stream(seed, 0x900 + i) % 18);
        const int d = 1 + static_cast<int>(derive_stream(seed, 0xa00 + i) % 8) % n;
        auto [mdp, features] =
            make_random_mdp(derive_stream(seed, 0xb00 + i), n, std::min(n, d), options);
        ProblemBundle bundle = ProblemBundle::prepare(std::move(mdp), std::move(features));
        absorb(check_all_lemmas(bundle, trials, derive_stream(seed, i)));
    }

    bool all_pass = true;
    std::printf("%-28s %12s %16s  %s\n", "lemma", "trials", "max-violation", "pass");
    for (const auto& [id, check] : worst) {
        const bool pass = check.pass();
        all_pass = all_pass && pass;
        std::printf("%-28s %12lld %16.3e  %s\n", id.c_str(),
                    static_cast<long long>(check.trials), check.max_violation,
                    pass ? "yes" : "NO");
    }
    std::printf("%s\n", all_pass ? "all checks passed" : "CHECK FAILURES PRESENT");
    return all_pass ? 0 : 1;
}

int cmd_fit(const std::string& csv_path) {
    std::printf("%s", fit_rates_from_csv(csv_path).c_str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"TD(0) step-size schedule laboratory"};
    app.require_subcommand(1);

    std::uint64_t seed = 1;
    app.add_option("--seed", seed, "base seed for anything randomized");

    auto* oracle_cmd = app.add_subcommand("oracle", "fixed points, omega, sigma^2 and bounds");
    std::string oracle_problem;
    double oracle_lambda = -1.0;
    std::int64_t oracle_T = 4096;
    int oracle_t_max = 256;
    oracle_cmd->add_option("problem", oracle_problem, "problem reference")->required();
    oracle_cmd->add_option("--lambda", oracle_lambda,
                           "regularization (default 1/sqrt(T))");
    oracle_cmd->add_option("--T", oracle_T, "horizon the bounds are evaluated at");
    oracle_cmd->add_option("--t-max", oracle_t_max, "mixing curve length");

    auto* run_cmd = app.add_subcommand("run", "execute an experiment config");
    std::string run_config;
    std::string run_out_dir;
    bool run_practical = false;
    bool seed_given = false;
    run_cmd->add_option("config", run_config, "experiment config JSON")->required();
    auto* out_opt = run_cmd->add_option("--out-dir", run_out_dir, "output directory override");
    run_cmd->add_flag("--practical-eta0", run_practical,
                      "use the practical step scale for cells without explicit eta0");

    auto* mixing_cmd = app.add_subcommand("mixing", "exact TV curve and fitted envelope as CSV");
    std::string mixing_problem;
    int mixing_t_max = 256;
    mixing_cmd->add_option("problem", mixing_problem, "problem reference")->required();
    mixing_cmd->add_option("--t-max", mixing_t_max, "curve length");

    auto* lemmas_cmd = app.add_subcommand("lemmas", "run the inequality check suite");
    std::string lemmas_problem = "ref-chain";
    int lemmas_trials = 1000;
    int lemmas_instances = 1;
    lemmas_cmd->add_option("--problem", lemmas_problem, "first checked instance");
    lemmas_cmd->add_option("--trials", lemmas_trials, "trials per randomized check");
    lemmas_cmd->add_option("--instances", lemmas_instances,
                           "total instances (extras are generated)");

    auto* fit_cmd = app.add_subcommand("fit", "fit decay rates from a rows.csv");
    std::string fit_csv;
    fit_cmd->add_option("csv", fit_csv, "rows.csv path")->required();

    CLI11_PARSE(app, argc, argv);
    seed_given = app.count("--seed") > 0;

    try {
        if (oracle_cmd->parsed())
            return cmd_oracle(oracle_problem, oracle_lambda, oracle_T, oracle_t_max);
        if (run_cmd->parsed())
            return cmd_run(run_config,
                           out_opt->count() ? std::optional<std::string>(run_out_dir)
                                            : std::nullopt,
                           run_practical,
                           seed_given ? std::optional<std::uint64_t>(seed) : std::nullopt);
        if (mixing_cmd->parsed()) return cmd_mixing(mixing_problem, mixing_t_max);
        if (lemmas_cmd->parsed())
            return cmd_lemmas(lemmas_problem, lemmas_trials, lemmas_instances, seed);
        if (fit_cmd->parsed()) return cmd_fit(fit_csv);
    } catch (const TdError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 0;
}

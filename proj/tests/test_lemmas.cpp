#include <doctest.h>

#include <algorithm>
#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include <tdlab/lemmas.hpp>

#include "test_support.hpp"

using namespace tdlab;
using namespace tdlab::test;

namespace {

const LemmaCheck& find_check(const std::vector<LemmaCheck>& checks, const std::string& id) {
    for (const auto& check : checks)
        if (check.lemma_id == id) return check;
    REQUIRE_MESSAGE(false, "missing lemma id: ", id);
    static const LemmaCheck none;
    return none;
}

void expect_all_pass(const std::vector<LemmaCheck>& checks) {
    for (const auto& check : checks) {
        INFO("lemma ", check.lemma_id, " slack ", check.max_violation);
        CHECK(check.pass());
        CHECK(check.trials > 0);
    }
}

}  // namespace

TEST_SUITE("lemmas") {

TEST_CASE("scalar helper inequalities hold on their grids") {
    const auto checks = check_helper_lemmas();
    REQUIRE(checks.size() == 3);
    expect_all_pass(checks);
    CHECK(find_check(checks, "partial-sum").trials == 5);
    CHECK(find_check(checks, "weighted-sum").trials == 20);
    CHECK(find_check(checks, "exp-dominance").trials == 49);
}

TEST_CASE("expectation-level inequalities hold under stationary sampling") {
    const auto& bundle = ref_bundle();
    const auto checks = check_iid_lemmas(bundle, 300, 7);
    REQUIRE(checks.size() == 4);
    expect_all_pass(checks);
    for (const char* id : {"crossing-gap", "norm-identity", "norm-lower-bound", "second-moment"})
        CHECK(find_check(checks, id).trials == 300);
}

TEST_CASE("per-sample and mean-path bounds hold for both regularizations") {
    const auto& bundle = ref_bundle();
    for (double lambda : {0.0, 0.1}) {
        const auto checks = check_lipschitz_and_norm_bounds(bundle, 200, lambda, 11);
        REQUIRE(checks.size() == 8);
        expect_all_pass(checks);
        for (const char* id : {"sample-lipschitz", "mean-lipschitz", "sample-norm",
                               "reg-sample-norm", "reg-mean-norm", "reg-crossing-gap",
                               "reg-mean-sq-norm", "fixed-point-shift"})
            CHECK(find_check(checks, id).trials > 0);
        CHECK(find_check(checks, "fixed-point-shift").trials == 1);
    }
    expect_code(ErrorCode::missing_lambda,
                [&] { check_lipschitz_and_norm_bounds(bundle, 10, -0.5, 11); });
}

TEST_CASE("markovian trajectory inequalities hold at the theorem step scale") {
    const auto& bundle = ref_bundle();
    const MixingProfile mixing = build_mixing_profile(bundle.mdp, bundle.analysis);
    const std::int64_t T = 1 << 10;
    const int n_seeds = 2;
    for (double lambda : {0.0, 1.0 / 32.0}) {
        const auto checks = check_markovian_lemmas(bundle, mixing, lambda, T, n_seeds, 19);
        REQUIRE(checks.size() == 5);
        expect_all_pass(checks);
        CHECK(find_check(checks, "iterate-bound").trials == n_seeds * T);
        CHECK(find_check(checks, "window-drift").trials == n_seeds * T);
        CHECK(find_check(checks, "noise-second-moment").trials == T);
        CHECK(find_check(checks, "mixing-deviation").trials == 5 * (T + 1));
        CHECK(find_check(checks, "step-deviation").trials == 5 * (T + 1));
    }

    // The mixing cutoff tau exceeds short horizons at the theorem step scale.
    expect_code(ErrorCode::trace_too_short,
                [&] { check_markovian_lemmas(bundle, mixing, 0.0, 16, 1, 19); });
    expect_code(ErrorCode::missing_lambda,
                [&] { check_markovian_lemmas(bundle, mixing, -1.0, T, 1, 19); });
}

TEST_CASE("lemma checks are deterministic in the seed") {
    const auto& bundle = ref_bundle();
    const auto a = check_iid_lemmas(bundle, 50, 123);
    const auto b = check_iid_lemmas(bundle, 50, 123);
    REQUIRE(a.size() == b.size());
    for (size_t k = 0; k < a.size(); ++k) {
        CHECK(a[k].lemma_id == b[k].lemma_id);
        CHECK(a[k].max_violation == b[k].max_violation);
        CHECK(a[k].witness == b[k].witness);
    }
    const auto c = check_lipschitz_and_norm_bounds(bundle, 50, 0.1, 123);
    const auto d = check_lipschitz_and_norm_bounds(bundle, 50, 0.1, 123);
    for (size_t k = 0; k < c.size(); ++k)
        CHECK(c[k].max_violation == d[k].max_violation);
}

TEST_CASE("the composite sweep covers every inequality with tags") {
    const auto& bundle = ref_bundle();
    const auto checks = check_all_lemmas(bundle, 100, 5);
    CHECK(checks.size() == 33);  // 3 helpers + 4 iid + 8 + 8 lipschitz + 5 + 5 markov
    expect_all_pass(checks);

    std::set<std::string> ids;
    for (const auto& check : checks) ids.insert(check.lemma_id);
    CHECK(ids.size() == checks.size());  // tags keep every entry distinct
    for (const char* id :
         {"partial-sum", "weighted-sum", "exp-dominance", "crossing-gap", "second-moment",
          "sample-lipschitz", "fixed-point-shift", "sample-lipschitz@l=0.1",
          "fixed-point-shift@l=0.1", "iterate-bound@markov", "window-drift@markov",
          "noise-second-moment@markov-reg", "mixing-deviation@markov-reg",
          "step-deviation@markov"})
        CHECK(ids.count(id) == 1);
}

}  // TEST_SUITE

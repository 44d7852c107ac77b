#include "doctest.h"
#include "support.hpp"

#include "blr/errors.hpp"
#include "blr/selection.hpp"

#include <atomic>
#include <map>
#include <set>

using namespace blr;

namespace {

// Additive lml table: intercept-only value plus one gain per variable.
ModelFitter additive(double base, std::map<std::string, double> gains, std::atomic<int> *calls = nullptr,
                     std::set<std::string> failing = {}) {
    return [=](const std::vector<std::string> &vars) {
        if (calls != nullptr) {
            ++*calls;
        }
        FitResult f;
        f.variables = vars;
        f.converged = true;
        f.lml = base;
        for (const auto &v : vars) {
            if (failing.contains(v)) {
                throw NumericError(ErrorCode::SingularHessian, "singular");
            }
            f.lml += gains.at(v);
        }
        return f;
    };
}

} // namespace

TEST_CASE("forward selection adds the best improving variable until none improves") {
    const auto trace = forward_select(additive(-10.0, {{"a", 1.0}, {"b", 3.0}, {"c", -0.5}}), {"a", "b", "c"},
                                      Stage::One);
    CHECK(trace.final_model == std::vector<std::string>{"b", "a"});
    REQUIRE(trace.steps.size() == 3);
    CHECK(trace.steps[0].chosen == "b");
    CHECK(trace.steps[1].chosen == "a");
    CHECK_FALSE(trace.steps[2].chosen.has_value());
    CHECK(trace.steps[2].candidates.size() == 1);
    CHECK(*trace.steps[2].candidates[0].lml == doctest::Approx(-6.5));
    // 1 + 3 + 2 + 1
    CHECK(trace.fits_performed == 7);
    CHECK(trace.all_evaluated.size() == 7);
    CHECK(trace.find("stage1:a,b") != nullptr);
    CHECK(trace.find("stage1:a,b")->variables == std::vector<std::string>{"a", "b"});
}

TEST_CASE("nothing improves on the intercept") {
    const auto trace = forward_select(additive(-10.0, {{"a", -1.0}, {"b", 0.0}}), {"a", "b"}, Stage::Two);
    CHECK(trace.final_model.empty());
    REQUIRE(trace.steps.size() == 1);
    CHECK_FALSE(trace.steps[0].chosen.has_value());
    CHECK(trace.all_evaluated.front().signature == "stage2:(intercept)");
}

TEST_CASE("ties go to the earlier pool entry") {
    const auto trace = forward_select(additive(0.0, {{"z", 1.0}, {"a", 1.0}}), {"z", "a"}, Stage::One);
    CHECK(trace.steps[0].chosen == "z");
    const auto swapped = forward_select(additive(0.0, {{"z", 1.0}, {"a", 1.0}}), {"a", "z"}, Stage::One);
    CHECK(swapped.steps[0].chosen == "a");
}

TEST_CASE("failed candidates are recorded and skipped") {
    const auto trace =
        forward_select(additive(0.0, {{"a", 2.0}, {"b", 5.0}}, nullptr, {"b"}), {"a", "b"}, Stage::One);
    CHECK(trace.final_model == std::vector<std::string>{"a"});
    const auto &b = trace.steps[0].candidates[1];
    CHECK_FALSE(b.lml.has_value());
    CHECK(b.error.find("SingularHessian") != std::string::npos);
    CHECK_THROWS_AS(forward_select(additive(0.0, {{"a", 1.0}}, nullptr, {"a"}), {"a"}, Stage::One), NumericError);
}

TEST_CASE("non-converged fits count as failures") {
    const ModelFitter f = [](const std::vector<std::string> &vars) {
        FitResult r;
        r.converged = vars.empty();
        r.lml = vars.empty() ? 0.0 : 100.0;
        return r;
    };
    CHECK_THROWS_AS(forward_select(f, {"a"}, Stage::One), NumericError);
}

TEST_CASE("pool validation") {
    CHECK_THROWS_AS(forward_select(additive(0.0, {}), {}, Stage::One), DataError);
    CHECK_THROWS_AS(forward_select(additive(0.0, {{"a", 1.0}}), {"a", "a"}, Stage::One), DataError);
}

TEST_CASE("signatures ignore order") {
    CHECK(model_signature({"b", "a"}, Stage::One) == model_signature({"a", "b"}, Stage::One));
    CHECK(model_signature({}, Stage::Two) == "stage2:(intercept)");
}

TEST_CASE("thread count does not change the trace") {
    std::atomic<int> calls{0};
    const std::map<std::string, double> gains{{"a", 0.5}, {"b", 2.0}, {"c", 1.0}, {"d", 2.0}, {"e", -1.0}};
    const auto one = forward_select(additive(-3.0, gains, &calls), {"a", "b", "c", "d", "e"}, Stage::One, 1);
    const int serial_calls = calls.exchange(0);
    const auto four = forward_select(additive(-3.0, gains, &calls), {"a", "b", "c", "d", "e"}, Stage::One, 4);
    CHECK(calls.load() == serial_calls);
    CHECK(one.final_model == four.final_model);
    REQUIRE(one.all_evaluated.size() == four.all_evaluated.size());
    for (std::size_t k = 0; k < one.all_evaluated.size(); ++k) {
        CHECK(one.all_evaluated[k].signature == four.all_evaluated[k].signature);
    }
}

TEST_CASE("dataset front end recovers a strong effect") {
    const auto data = testing::simulated_cohort(31, 300, 4, 0.0, {{"x2", 1.5}});
    SelectionSettings s;
    const auto trace = forward_select(data, default_pool(data, Stage::One), Stage::One, s);
    REQUIRE_FALSE(trace.final_model.empty());
    CHECK(trace.final_model.front() == "x2");
}

TEST_CASE("per-fall variables are rejected in a stage one pool") {
    const auto data = example_cohort(2019);
    CHECK_THROWS_AS(forward_select(data, {"glasses"}, Stage::One, SelectionSettings{}), DataError);
    const auto pool = default_pool(data, Stage::One);
    CHECK(std::find(pool.begin(), pool.end(), "glasses") == pool.end());
    const auto pool2 = default_pool(data, Stage::Two);
    CHECK(std::find(pool2.begin(), pool2.end(), "glasses") != pool2.end());
}

TEST_CASE("a pure noise covariate usually lowers the marginal likelihood") {
    int lower = 0;
    for (int rep = 0; rep < 10; ++rep) {
        const auto data = testing::simulated_cohort(500 + rep, 200, 2, 0.0, {{"x1", 1.0}});
        const double with = lml_stage1(data, {"x1", "x2"}, PriorSpec{}).lml;
        const double without = lml_stage1(data, {"x1"}, PriorSpec{}).lml;
        lower += with < without ? 1 : 0;
    }
    CHECK(lower >= 8);
}

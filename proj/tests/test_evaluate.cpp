#include "doctest.h"
#include "support.hpp"

#include "blr/errors.hpp"
#include "blr/evaluate.hpp"
#include "blr/oracle.hpp"

#include <random>
#include <set>
#include <sstream>

using namespace blr;

namespace {

CohortDataset two_patients() {
    std::istringstream p("patient_id,x1,fell\nA,0.5,1\nB,-1,0\n");
    std::istringstream f("patient_id,fall_index,fall_clock_time,fall_time_category,location,glasses,injured\n"
                         "A,1,08:00,,INSIDE,0,1\n");
    return read_cohort(p, f, parse_schema(R"([{"name": "x1", "kind": "continuous"}])"));
}

} // namespace

TEST_CASE("AUC equals pair counting exactly, ties included") {
    std::mt19937_64 gen(2024);
    for (int rep = 0; rep < 100; ++rep) {
        const int n = 2 + static_cast<int>(gen() % 29);
        const int levels = 1 + static_cast<int>(gen() % 8);
        std::vector<int> labels(static_cast<std::size_t>(n));
        std::vector<double> scores(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) {
            labels[static_cast<std::size_t>(i)] = static_cast<int>(gen() % 2);
            scores[static_cast<std::size_t>(i)] = static_cast<double>(gen() % static_cast<unsigned>(levels)) / 7.0;
        }
        labels[0] = 0;
        labels[1] = 1;
        const auto roc = roc_auc(labels, scores);
        CHECK(roc.auc == oracle::pair_count_auc(labels, scores).value);
        REQUIRE(roc.points.size() >= 2);
        CHECK(roc.points.front().fpr == 0.0);
        CHECK(roc.points.front().tpr == 0.0);
        CHECK(roc.points.back().fpr == 1.0);
        CHECK(roc.points.back().tpr == 1.0);
        for (std::size_t k = 1; k < roc.points.size(); ++k) {
            CHECK(roc.points[k].threshold < roc.points[k - 1].threshold);
            CHECK(roc.points[k].fpr >= roc.points[k - 1].fpr);
            CHECK(roc.points[k].tpr >= roc.points[k - 1].tpr);
        }
    }
}

TEST_CASE("AUC extremes") {
    CHECK(roc_auc({0, 0, 1, 1}, {0.1, 0.2, 0.8, 0.9}).auc == 1.0);
    CHECK(roc_auc({1, 1, 0, 0}, {0.1, 0.2, 0.8, 0.9}).auc == 0.0);
    CHECK(roc_auc({1, 0, 1, 0}, {0.3, 0.3, 0.3, 0.3}).auc == 0.5);
    CHECK_THROWS_AS(roc_auc({1, 1}, {0.1, 0.2}), DataError);
    CHECK_THROWS_AS(roc_auc({1, 0}, {0.1}), NumericError);
}

TEST_CASE("confusion metrics use a closed threshold") {
    const std::vector<int> y{1, 1, 1, 0, 0, 0, 0};
    const std::vector<double> p{0.9, 0.5, 0.2, 0.5, 0.4, 0.1, 0.0};
    const auto c = confusion_metrics(y, p, 0.5);
    CHECK(c.tp == 2);
    CHECK(c.fn == 1);
    CHECK(c.fp == 1);
    CHECK(c.tn == 3);
    CHECK(c.sensitivity == doctest::Approx(2.0 / 3.0));
    CHECK(c.specificity == doctest::Approx(0.75));
    CHECK(c.accuracy == doctest::Approx(5.0 / 7.0));
    const auto none = confusion_metrics({0, 0}, {0.2, 0.7}, 0.5);
    CHECK(none.sensitivity == 0.0);
    CHECK(none.specificity == 0.5);
}

TEST_CASE("chosen threshold maximizes Youden's J") {
    std::mt19937_64 gen(7);
    for (int rep = 0; rep < 50; ++rep) {
        const int n = 4 + static_cast<int>(gen() % 20);
        std::vector<int> y(static_cast<std::size_t>(n));
        std::vector<double> p(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) {
            y[static_cast<std::size_t>(i)] = i % 2;
            p[static_cast<std::size_t>(i)] = static_cast<double>(gen() % 10) / 10.0;
        }
        std::vector<double> candidates = p;
        candidates.push_back(0.0);
        candidates.push_back(1.0);
        double best_j = -2.0;
        double best_t = 2.0;
        for (double t : candidates) {
            const auto c = confusion_metrics(y, p, t);
            const double j = c.sensitivity + c.specificity;
            if (j > best_j + 1e-12 || (std::abs(j - best_j) <= 1e-12 && t < best_t)) {
                best_j = j;
                best_t = t;
            }
        }
        CHECK(choose_threshold(y, p) == best_t);
    }
}

TEST_CASE("two-patient leave-one-out reduces to one-observation fits") {
    const auto data = two_patients();
    LooSettings s;
    s.prior = PriorSpec{4.0, 1.0, 1.0};
    s.skip_single_class_folds = false;
    const auto report = loo_cv(data, Stage::One, s);
    REQUIRE(report.rows.size() == 2);
    CHECK(report.skipped.empty());
    for (int held = 0; held < 2; ++held) {
        const double y = held == 0 ? 0.0 : 1.0; // label of the remaining patient
        const auto f = [&](double b) { return y * b - log1p_exp(b) - b * b / 8.0; };
        const double mode = oracle::golden_section_max(f, -20.0, 20.0);
        CHECK(report.rows[static_cast<std::size_t>(held)].probability ==
              doctest::Approx(inv_logit(mode)).epsilon(1e-7));
    }
    CHECK(report.rows[0].id == "A");
    CHECK(report.rows[0].label == 1);
    REQUIRE(report.roc.has_value());
    CHECK(report.roc->auc == 0.0);

    s.skip_single_class_folds = true;
    const auto skipped = loo_cv(data, Stage::One, s);
    CHECK(skipped.rows.empty());
    REQUIRE(skipped.skipped.size() == 2);
    CHECK(skipped.skipped[0].reason.find("DegenerateFold") != std::string::npos);
    CHECK_FALSE(skipped.roc.has_value());
}

TEST_CASE("stage one leave-one-out on a simulated cohort") {
    const auto data = testing::simulated_cohort(41, 60, 2, 0.0, {{"x1", 2.0}});
    LooSettings s;
    s.variables = {"x1"};
    const auto report = loo_cv(data, Stage::One, s);
    CHECK(report.n_folds == 60);
    CHECK(report.rows.size() == 60);
    REQUIRE(report.roc.has_value());
    REQUIRE(report.confusion.has_value());
    CHECK(report.roc->auc > 0.7);
    std::set<std::size_t> folds;
    for (const auto &r : report.rows) {
        folds.insert(r.fold);
        CHECK(r.mc_standard_error == 0.0);
    }
    CHECK(folds.size() == 60);

    s.threads = 4;
    const auto parallel = loo_cv(data, Stage::One, s);
    for (std::size_t k = 0; k < report.rows.size(); ++k) {
        CHECK(parallel.rows[k].probability == report.rows[k].probability);
    }
}

TEST_CASE("single-fall patients make the two stage two units identical") {
    SimulationConfig c;
    c.seed = 17;
    c.n_patients = 40;
    c.covariates["x1"] = Marginal{};
    c.stage1.intercept = 0.5;
    c.stage2.coefficients["x1"] = 1.0;
    c.sigma2 = 0.5;
    c.falls_per_faller.kind = FallCountDistribution::Kind::Fixed;
    c.falls_per_faller.count = 1;
    const auto data = simulate(c, testing::continuous_schema(1));
    LooSettings s;
    s.variables = {"x1"};
    s.mc.seed = 3;
    s.mc.n_sigma2_draws = 20;
    s.mc.n_epsilon_draws = 10;
    s.unit = LooUnit::Patient;
    const auto by_patient = loo_cv(data, Stage::Two, s);
    s.unit = LooUnit::Fall;
    const auto by_fall = loo_cv(data, Stage::Two, s);
    REQUIRE(by_patient.rows.size() == data.falls.size());
    REQUIRE(by_fall.rows.size() == by_patient.rows.size());
    for (std::size_t k = 0; k < by_fall.rows.size(); ++k) {
        CHECK(by_fall.rows[k].id == by_patient.rows[k].id);
        CHECK(by_fall.rows[k].probability == by_patient.rows[k].probability);
    }
}

TEST_CASE("stage two leave-one-fall-out predicts known patients") {
    SimulationConfig c;
    c.seed = 18;
    c.n_patients = 30;
    c.covariates["x1"] = Marginal{};
    c.stage1.intercept = 1.0;
    c.sigma2 = 1.0;
    c.falls_per_faller.kind = FallCountDistribution::Kind::Fixed;
    c.falls_per_faller.count = 3;
    const auto data = simulate(c, testing::continuous_schema(1));
    LooSettings s;
    s.variables = {};
    s.mc.seed = 4;
    s.mc.n_sigma2_draws = 10;
    s.mc.n_epsilon_draws = 4;
    s.unit = LooUnit::Fall;
    s.threads = 0;
    const auto report = loo_cv(data, Stage::Two, s);
    CHECK(report.n_folds == data.falls.size());
    CHECK(report.rows.size() + report.skipped.size() == data.falls.size());
    for (const auto &r : report.rows) {
        CHECK(r.probability > 0.0);
        CHECK(r.probability < 1.0);
        CHECK(r.mc_standard_error >= 0.0);
    }
}

TEST_CASE("pipeline leave-one-out selects inside each fold") {
    const auto data = testing::simulated_cohort(43, 30, 3, 0.0, {{"x3", 2.0}});
    LooSettings s;
    s.mode = LooMode::Pipeline;
    s.pool = {"x1", "x2", "x3"};
    s.threads = 2;
    const auto report = loo_cv(data, Stage::One, s);
    CHECK(report.rows.size() == 30);
    CHECK(report.mode == LooMode::Pipeline);
    for (const auto &r : report.rows) {
        CHECK(r.mc_standard_error == 0.0);
    }
    s.pool.clear();
    CHECK_THROWS_AS(loo_cv(data, Stage::One, s), DataError);
}

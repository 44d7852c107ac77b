#include "doctest.h"
#include "support.hpp"

#include "blr/errors.hpp"

#include <sstream>

using namespace blr;

namespace {

const char *kSchema = R"([
  {"name": "age", "kind": "continuous", "stage": "baseline"},
  {"name": "bmi", "kind": "categorical", "levels": ["Normal", "Overweight", "Obese"], "reference": "Normal", "stage": "baseline"},
  {"name": "fearful", "kind": "ordinal", "levels": ["low", "mid", "high"], "scores": [1, 2, 3], "stage": "baseline"},
  {"name": "fall_time_category", "kind": "categorical", "levels": ["MORNING", "AFTERNOON", "NIGHT"], "reference": "AFTERNOON", "stage": "per_fall"},
  {"name": "glasses", "kind": "binary", "stage": "per_fall"}
])";

const char *kPatients = "patient_id,age,bmi,fearful,fell\n"
                        "A,70,Normal,low,1\n"
                        "B,65.5,Overweight,high,0\n"
                        "C,80,Obese,mid,1\n";

const char *kFalls = "patient_id,fall_index,fall_clock_time,fall_time_category,location,glasses,injured\n"
                     "A,1,06:00,MORNING,INSIDE,1,0\n"
                     "A,2,13:00,,OUTSIDE,0,1\n"
                     "C,1,,NIGHT,INSIDE,,0\n";

CohortDataset tiny() {
    std::istringstream p(kPatients);
    std::istringstream f(kFalls);
    return read_cohort(p, f, parse_schema(kSchema));
}

ErrorCode code_of(const std::string &patients, const std::string &falls) {
    std::istringstream p(patients);
    std::istringstream f(falls);
    try {
        read_cohort(p, f, parse_schema(kSchema));
    } catch (const Error &e) {
        return e.code();
    }
    FAIL("expected an error");
    return ErrorCode::MalformedInput;
}

} // namespace

TEST_CASE("fall time buckets are half-open on the left") {
    CHECK(bucket_fall_time(780) == FallTime::Afternoon);
    CHECK(bucket_fall_time(360) == FallTime::Morning);
    CHECK(bucket_fall_time(1320) == FallTime::Night);
    CHECK(bucket_fall_time(359) == FallTime::Night);
    CHECK(bucket_fall_time(719) == FallTime::Morning);
    CHECK(bucket_fall_time(720) == FallTime::Afternoon);
    CHECK(bucket_fall_time(1259) == FallTime::Afternoon);
    CHECK(bucket_fall_time(1260) == FallTime::Night);
    CHECK(bucket_fall_time(0) == FallTime::Night);
    CHECK_THROWS_AS(bucket_fall_time(1440), DataError);
    CHECK_THROWS_AS(bucket_fall_time(-1), DataError);
}

TEST_CASE("every minute of the day falls in exactly one bucket") {
    int counts[3] = {0, 0, 0};
    for (int m = 0; m < 1440; ++m) {
        ++counts[static_cast<int>(bucket_fall_time(m))];
    }
    CHECK(counts[0] == 360);
    CHECK(counts[1] == 540);
    CHECK(counts[2] == 540);
}

TEST_CASE("clock parsing") {
    CHECK(parse_clock("06:00") == 360);
    CHECK(parse_clock("23:59") == 1439);
    CHECK(format_clock(1320) == "22:00");
    CHECK_THROWS_AS(parse_clock("24:00"), DataError);
    CHECK_THROWS_AS(parse_clock("7pm"), DataError);
}

TEST_CASE("tiny cohort loads and derives categories from clock times") {
    const auto d = tiny();
    REQUIRE(d.patients.size() == 3);
    REQUIRE(d.falls.size() == 3);
    CHECK(d.faller_count() == 2);
    CHECK(d.injured_count() == 1);
    CHECK(d.falls[1].category == FallTime::Afternoon);
    CHECK_FALSE(d.falls[2].clock_minutes.has_value());
    CHECK_FALSE(d.falls[2].glasses.has_value());
}

TEST_CASE("ingestion errors") {
    const std::string header = "patient_id,fall_index,fall_clock_time,fall_time_category,location,glasses,injured\n";
    CHECK(code_of("patient_id,age,bmi\nA,70,Normal\n", header) == ErrorCode::MissingColumn);
    CHECK(code_of("patient_id,age,bmi,fearful\nA,,Normal,low\n", header) == ErrorCode::MissingValue);
    CHECK(code_of("patient_id,age,bmi,fearful\nA,70,Huge,low\n", header) == ErrorCode::UnknownCategoryLevel);
    CHECK(code_of("patient_id,age,bmi,fearful\nA,70,Normal,low\n", header + "Z,1,,NIGHT,INSIDE,1,0\n") ==
          ErrorCode::OrphanFallEvent);
    CHECK(code_of("patient_id,age,bmi,fearful,fell\nA,70,Normal,low,1\n", header) ==
          ErrorCode::InconsistentFellFlag);
    CHECK(code_of("patient_id,age,bmi,fearful\nA,70,Normal,low\nA,71,Normal,low\n", header) ==
          ErrorCode::DuplicatePatient);
    CHECK(code_of("patient_id,age,bmi,fearful\nA,70,Normal,low\n", header + "A,2,,NIGHT,INSIDE,1,0\n") ==
          ErrorCode::BadFallIndex);
    CHECK(code_of("patient_id,age,bmi,fearful\nA,70,Normal,low\n", header + "A,1,13:00,NIGHT,INSIDE,1,0\n") ==
          ErrorCode::MalformedInput);
}

TEST_CASE("empty falls file with no fallers is valid") {
    std::istringstream p("patient_id,age,bmi,fearful,fell\nA,70,Normal,low,0\nB,60,Obese,mid,0\n");
    std::istringstream f("patient_id,fall_index,fall_clock_time,fall_time_category,location,glasses,injured\n");
    const auto d = read_cohort(p, f, parse_schema(kSchema));
    CHECK(d.falls.empty());
    CHECK(d.faller_count() == 0);
}

TEST_CASE("csv round trip reproduces every record") {
    const auto d = example_cohort(2019);
    std::ostringstream p;
    std::ostringstream f;
    write_patients_csv(d, p);
    write_falls_csv(d, f);
    std::istringstream pi(p.str());
    std::istringstream fi(f.str());
    const auto back = read_cohort(pi, fi, parse_schema(schema_to_json(d.schema)));
    CHECK(back.patients == d.patients);
    CHECK(back.falls == d.falls);
}

TEST_CASE("bundled example cohort counts") {
    const auto d = load_csv(BLR_DATA_DIR "/patients.csv", BLR_DATA_DIR "/falls.csv",
                            load_schema(BLR_DATA_DIR "/schema.json"));
    const auto s = summarize(d);
    CHECK(s.n_patients == 99);
    CHECK(s.n_fallers == 55);
    CHECK(s.n_single_fallers == 20);
    CHECK(s.n_falls == 335);
    CHECK(s.injured_fraction >= 0.24);
    CHECK(s.injured_fraction <= 0.26);
    CHECK(encode(d, {"fall_time_category"}, Stage::Two).rows() == 335);
}

TEST_CASE("encoding") {
    const auto d = tiny();
    SUBCASE("empty subset is an intercept column") {
        const auto m = encode(d, {}, Stage::One);
        CHECK(m.cols() == 1);
        CHECK((m.x.array() == 1.0).all());
    }
    SUBCASE("categorical dummies against the reference") {
        const auto m = encode(d, {"bmi"}, Stage::One);
        REQUIRE(m.cols() == 3);
        CHECK(m.column_names[1] == "bmi[Overweight]");
        CHECK(m.column_names[2] == "bmi[Obese]");
        Eigen::MatrixXd expected(3, 2);
        expected << 0, 0, 1, 0, 0, 1;
        CHECK(m.x.rightCols(2) == expected);
    }
    SUBCASE("ordinal scores and optional dummy coding") {
        auto m = encode(d, {"fearful"}, Stage::One);
        CHECK(m.x(1, 1) == 3.0);
        auto schema = d.schema;
        schema[2].dummy_coding = true;
        CohortDataset dd = d;
        dd.schema = schema;
        m = encode(dd, {"fearful"}, Stage::One);
        CHECK(m.cols() == 3);
        CHECK(m.x(1, 2) == 1.0);
    }
    SUBCASE("column count is one plus the expansion widths") {
        const auto m = encode(d, {"age", "bmi", "fearful"}, Stage::One);
        CHECK(m.cols() == 1 + 1 + 2 + 1);
    }
    SUBCASE("per-fall variables are Stage Two only") {
        CHECK_THROWS_AS(encode(d, {"glasses"}, Stage::One), DataError);
        const auto m = encode(d, {"age", "fall_time_category"}, Stage::Two);
        CHECK(m.rows() == 3);
        CHECK(m.row_ids[1] == "A#2");
        CHECK(m.x(2, 1) == 80.0);
        CHECK(m.patient_of_row == std::vector<std::size_t>{0, 0, 2});
    }
    SUBCASE("missing optional per-fall value") {
        CHECK_THROWS_AS(encode(d, {"glasses"}, Stage::Two), DataError);
    }
    SUBCASE("standardization records a reusable transform") {
        const auto m = encode(d, {"age"}, Stage::One, {true, std::nullopt});
        REQUIRE(m.transform.has_value());
        CHECK(m.x.col(1).mean() == doctest::Approx(0.0).epsilon(1e-12));
        const double sd = std::sqrt(m.x.col(1).squaredNorm() / 2.0);
        CHECK(sd == doctest::Approx(1.0));
        const auto again = encode(d, {"age"}, Stage::One, {true, m.transform});
        CHECK(again.x == m.x);
        Eigen::VectorXd coef(2);
        coef << 0.5, 2.0;
        const auto raw = m.transform->to_raw_scale(coef);
        const auto plain = encode(d, {"age"}, Stage::One);
        CHECK((plain.x * raw - m.x * coef).cwiseAbs().maxCoeff() < 1e-12);
    }
}

TEST_CASE("schema validation") {
    CHECK_THROWS_AS(parse_schema(R"([{"name": "b", "kind": "categorical", "levels": ["x"], "reference": "y"}])"),
                    DataError);
    CHECK_THROWS_AS(
        parse_schema(R"([{"name": "o", "kind": "ordinal", "levels": ["a", "b"], "scores": [2, 1]}])"), DataError);
    const auto s = parse_schema(kSchema);
    CHECK(parse_schema(schema_to_json(s)).size() == s.size());
}

TEST_CASE("summaries split by fall and injury status") {
    const auto s = summarize(tiny());
    CHECK(s.n_patients == 3);
    CHECK(s.n_fallers == 2);
    CHECK(s.n_single_fallers == 1);
    CHECK(s.n_injured == 1);
    const auto &age = s.variables[0];
    CHECK(*age.mean_fell == doctest::Approx(75.0));
    CHECK(*age.mean_not_fell == doctest::Approx(65.5));

    std::istringstream p("patient_id,age,bmi,fearful\nA,70,Normal,low\n");
    std::istringstream f("patient_id,fall_index,fall_clock_time,fall_time_category,location,glasses,injured\n");
    const auto single = summarize(read_cohort(p, f, parse_schema(kSchema)));
    CHECK(single.n_falls == 0);
    CHECK(single.injured_fraction == 0.0);
    CHECK_FALSE(single.variables[0].mean_injured.has_value());
}

TEST_CASE("simulation is deterministic in the seed") {
    const auto a = blr::testing::simulated_cohort(5, 200, 3, 0.0, {{"x1", 1.0}});
    const auto b = blr::testing::simulated_cohort(5, 200, 3, 0.0, {{"x1", 1.0}});
    const auto c = blr::testing::simulated_cohort(6, 200, 3, 0.0, {{"x1", 1.0}});
    CHECK(a.patients == b.patients);
    CHECK(a.falls == b.falls);
    CHECK_FALSE(a.patients == c.patients);
    CHECK(example_cohort(2019).patients == example_cohort(2019).patients);
}

TEST_CASE("null model falls at rate one half") {
    const auto d = blr::testing::simulated_cohort(11, 10000, 1, 0.0, {});
    const double rate = static_cast<double>(d.faller_count()) / 10000.0;
    CHECK(std::abs(rate - 0.5) < 0.02);
}

TEST_CASE("simulated fall rate matches Monte Carlo integration of the model") {
    const auto d = blr::testing::simulated_cohort(12, 10000, 1, -1.0, {{"x1", 2.0}});
    std::mt19937_64 gen(99);
    std::normal_distribution<double> normal;
    double acc = 0.0;
    for (int i = 0; i < 200000; ++i) {
        acc += inv_logit(-1.0 + 2.0 * normal(gen));
    }
    const double rate = static_cast<double>(d.faller_count()) / 10000.0;
    CHECK(std::abs(rate - acc / 200000.0) < 0.01);
}

TEST_CASE("zero random-intercept variance gives equal injury risk for identical falls") {
    SimulationConfig c;
    c.seed = 3;
    c.n_patients = 50;
    c.covariates["x1"] = Marginal{};
    c.stage1.intercept = 3.0;
    c.stage2.intercept = 0.0;
    c.sigma2 = 0.0;
    c.falls_per_faller.kind = FallCountDistribution::Kind::Fixed;
    c.falls_per_faller.count = 40;
    const auto d = simulate(c, blr::testing::continuous_schema(1));
    std::size_t injured = d.injured_count();
    const double rate = static_cast<double>(injured) / static_cast<double>(d.falls.size());
    CHECK(std::abs(rate - 0.5) < 0.05);
}

TEST_CASE("simulation config validation") {
    SimulationConfig c;
    c.seed = 1;
    c.sigma2 = -1.0;
    CHECK_THROWS_AS(simulate(c, blr::testing::continuous_schema(1)), DataError);
    c.sigma2 = 0.0;
    CHECK_THROWS_AS(simulate(c, blr::testing::continuous_schema(1)), DataError); // no marginal for x1
    c.covariates["x1"] = Marginal{};
    c.stage1.coefficients["nope"] = 1.0;
    CHECK_THROWS_AS(simulate(c, blr::testing::continuous_schema(1)), DataError);
}

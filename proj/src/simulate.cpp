#include "blr/datamodel.hpp"
#include "blr/errors.hpp"

#include "json.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace blr {

using nlohmann::json;

namespace {

// nearest multiple of step
double snap(double x, double step) {
    if (step < 1.0) {
        const double inv = std::round(1.0 / step);
        return std::round(x * inv) / inv;
    }
    return std::round(x / step) * step;
}


double inv_logit(double eta) {
    return eta >= 0 ? 1.0 / (1.0 + std::exp(-eta)) : std::exp(eta) / (1.0 + std::exp(eta));
}

Marginal parse_marginal(const std::string &name, const json &j) {
    Marginal m;
    const auto dist = j.at("distribution").get<std::string>();
    if (dist == "normal") {
        m.kind = Marginal::Kind::Normal;
        m.a = j.value("mean", 0.0);
        m.b = j.value("sd", 1.0);
        if (!(m.b >= 0)) throw DataError(ErrorCode::InvalidConfig, fmt::format("'{}': sd must be >= 0", name));
    } else if (dist == "uniform") {
        m.kind = Marginal::Kind::Uniform;
        m.a = j.value("low", 0.0);
        m.b = j.value("high", 1.0);
        if (!(m.b >= m.a)) throw DataError(ErrorCode::InvalidConfig, fmt::format("'{}': high < low", name));
    } else if (dist == "bernoulli") {
        m.kind = Marginal::Kind::Bernoulli;
        m.a = j.value("p", 0.5);
        if (!(m.a >= 0 && m.a <= 1)) throw DataError(ErrorCode::InvalidConfig, fmt::format("'{}': p not in [0,1]", name));
    } else if (dist == "categorical") {
        m.kind = Marginal::Kind::Categorical;
        m.probs = j.at("probs").get<std::vector<double>>();
    } else {
        throw DataError(ErrorCode::InvalidConfig, fmt::format("'{}': unknown distribution '{}'", name, dist));
    }
    if (j.contains("round")) m.round_to = j["round"].get<double>();
    if (j.contains("min")) m.min = j["min"].get<double>();
    if (j.contains("max")) m.max = j["max"].get<double>();
    return m;
}

json marginal_to_json(const Marginal &m) {
    json j;
    switch (m.kind) {
    case Marginal::Kind::Normal:
        j = {{"distribution", "normal"}, {"mean", m.a}, {"sd", m.b}};
        break;
    case Marginal::Kind::Uniform:
        j = {{"distribution", "uniform"}, {"low", m.a}, {"high", m.b}};
        break;
    case Marginal::Kind::Bernoulli:
        j = {{"distribution", "bernoulli"}, {"p", m.a}};
        break;
    case Marginal::Kind::Categorical:
        j = {{"distribution", "categorical"}, {"probs", m.probs}};
        break;
    }
    if (m.round_to) j["round"] = *m.round_to;
    if (m.min) j["min"] = *m.min;
    if (m.max) j["max"] = *m.max;
    return j;
}

StageCoefficients parse_stage(const json &j) {
    StageCoefficients s;
    s.intercept = j.value("intercept", 0.0);
    if (j.contains("coefficients")) {
        s.coefficients = j["coefficients"].get<std::map<std::string, double>>();
    }
    return s;
}

class Sampler {
public:
    explicit Sampler(std::uint64_t seed) : rng_(seed) {}

    double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(rng_); }
    double normal(double mean, double sd) { return std::normal_distribution<double>(mean, sd)(rng_); }
    bool bernoulli(double p) { return uniform() < p; }

    std::size_t categorical(const std::vector<double> &probs) {
        const double total = std::accumulate(probs.begin(), probs.end(), 0.0);
        double u = uniform() * total;
        for (std::size_t k = 0; k < probs.size(); ++k) {
            if (u < probs[k]) return k;
            u -= probs[k];
        }
        return probs.size() - 1;
    }

    int poisson(double mean) { return std::poisson_distribution<int>(mean)(rng_); }
    double gamma(double shape, double scale) { return std::gamma_distribution<double>(shape, scale)(rng_); }

    template <typename T> void shuffle(std::vector<T> &v) { std::shuffle(v.begin(), v.end(), rng_); }

    int fall_count(const FallCountDistribution &d) {
        if (d.kind == FallCountDistribution::Kind::Fixed) return d.count;
        for (int attempt = 0; attempt < 100000; ++attempt) {
            const double lambda =
                d.kind == FallCountDistribution::Kind::ZeroTruncatedPoisson ? d.mean
                                                                            : gamma(d.dispersion, d.mean / d.dispersion);
            const int r = lambda > 0 ? poisson(lambda) : 0;
            if (r > 0) return r;
        }
        throw DataError(ErrorCode::InvalidConfig, "falls_per_faller: cannot draw a positive count");
    }

    int clock_in(FallTime t) {
        switch (t) {
        case FallTime::Morning: return 360 + static_cast<int>(uniform() * 360);
        case FallTime::Afternoon: return 720 + static_cast<int>(uniform() * 540);
        case FallTime::Night: return (1260 + static_cast<int>(uniform() * 540)) % 1440;
        }
        return 0;
    }

private:
    std::mt19937_64 rng_;
};

CovariateValue draw_value(Sampler &s, const CovariateSchema &var, const Marginal &m) {
    if (var.kind == CovariateKind::Categorical || var.kind == CovariateKind::Ordinal) {
        if (m.kind != Marginal::Kind::Categorical || m.probs.size() != var.levels.size()) {
            throw DataError(ErrorCode::InvalidConfig,
                            fmt::format("'{}': need a categorical marginal with {} probabilities", var.name, var.levels.size()));
        }
        return var.levels[s.categorical(m.probs)];
    }
    double x = 0.0;
    switch (m.kind) {
    case Marginal::Kind::Normal: x = s.normal(m.a, m.b); break;
    case Marginal::Kind::Uniform: x = m.a + (m.b - m.a) * s.uniform(); break;
    case Marginal::Kind::Bernoulli: x = s.bernoulli(m.a) ? 1.0 : 0.0; break;
    case Marginal::Kind::Categorical:
        throw DataError(ErrorCode::InvalidConfig, fmt::format("'{}': categorical marginal for a numeric variable", var.name));
    }
    if (var.kind == CovariateKind::Binary && m.kind != Marginal::Kind::Bernoulli) {
        throw DataError(ErrorCode::InvalidConfig, fmt::format("'{}': binary variables need a bernoulli marginal", var.name));
    }
    if (m.round_to && *m.round_to > 0) x = snap(x, *m.round_to);
    if (m.min) x = std::max(x, *m.min);
    if (m.max) x = std::min(x, *m.max);
    return x;
}

Eigen::VectorXd coefficient_vector(const DesignMatrix &d, const StageCoefficients &c, std::string_view stage) {
    Eigen::VectorXd beta = Eigen::VectorXd::Zero(d.cols());
    beta[0] = c.intercept;
    for (const auto &[name, value] : c.coefficients) {
        const auto it = std::find(d.column_names.begin(), d.column_names.end(), name);
        if (it == d.column_names.end() || it == d.column_names.begin()) {
            throw DataError(ErrorCode::InvalidConfig,
                            fmt::format("{} coefficient '{}' does not name a design column", stage, name));
        }
        beta[it - d.column_names.begin()] = value;
    }
    return beta;
}

} // namespace

SimulationConfig parse_simulation_config(const std::string &json_text) {
    SimulationConfig c;
    try {
        const auto j = json::parse(json_text);
        c.seed = j.at("seed").get<std::uint64_t>();
        c.n_patients = j.value("n_patients", std::size_t{100});
        if (j.contains("covariates")) {
            for (const auto &[name, m] : j["covariates"].items()) c.covariates[name] = parse_marginal(name, m);
        }
        if (j.contains("perfall")) {
            for (const auto &[name, m] : j["perfall"].items()) c.perfall[name] = parse_marginal(name, m);
        }
        if (j.contains("stage1")) c.stage1 = parse_stage(j["stage1"]);
        if (j.contains("stage2")) c.stage2 = parse_stage(j["stage2"]);
        c.sigma2 = j.value("sigma2", 0.0);
        if (j.contains("falls_per_faller")) {
            const auto &f = j["falls_per_faller"];
            const auto dist = f.value("distribution", std::string{"ztnb"});
            const auto params = f.value("params", json::object());
            if (dist == "ztnb") {
                c.falls_per_faller.kind = FallCountDistribution::Kind::ZeroTruncatedNegBinomial;
                c.falls_per_faller.mean = params.value("mean", 4.0);
                c.falls_per_faller.dispersion = params.value("dispersion", 1.0);
            } else if (dist == "poisson") {
                c.falls_per_faller.kind = FallCountDistribution::Kind::ZeroTruncatedPoisson;
                c.falls_per_faller.mean = params.value("mean", 4.0);
            } else if (dist == "fixed") {
                c.falls_per_faller.kind = FallCountDistribution::Kind::Fixed;
                c.falls_per_faller.count = params.value("count", 1);
            } else {
                throw DataError(ErrorCode::InvalidConfig, fmt::format("unknown falls_per_faller distribution '{}'", dist));
            }
        }
    } catch (const json::exception &e) {
        throw DataError(ErrorCode::InvalidConfig, e.what());
    }
    return c;
}

std::string simulation_config_to_json(const SimulationConfig &c) {
    json j;
    j["seed"] = c.seed;
    j["n_patients"] = c.n_patients;
    for (const auto &[name, m] : c.covariates) j["covariates"][name] = marginal_to_json(m);
    for (const auto &[name, m] : c.perfall) j["perfall"][name] = marginal_to_json(m);
    j["stage1"] = {{"intercept", c.stage1.intercept}, {"coefficients", c.stage1.coefficients}};
    j["stage2"] = {{"intercept", c.stage2.intercept}, {"coefficients", c.stage2.coefficients}};
    j["sigma2"] = c.sigma2;
    switch (c.falls_per_faller.kind) {
    case FallCountDistribution::Kind::ZeroTruncatedNegBinomial:
        j["falls_per_faller"] = {{"distribution", "ztnb"},
                                 {"params", {{"mean", c.falls_per_faller.mean}, {"dispersion", c.falls_per_faller.dispersion}}}};
        break;
    case FallCountDistribution::Kind::ZeroTruncatedPoisson:
        j["falls_per_faller"] = {{"distribution", "poisson"}, {"params", {{"mean", c.falls_per_faller.mean}}}};
        break;
    case FallCountDistribution::Kind::Fixed:
        j["falls_per_faller"] = {{"distribution", "fixed"}, {"params", {{"count", c.falls_per_faller.count}}}};
        break;
    }
    return j.dump(2) + "\n";
}

CohortDataset simulate(const SimulationConfig &config, std::vector<CovariateSchema> schema) {
    if (!(config.sigma2 >= 0.0) || !std::isfinite(config.sigma2)) {
        throw DataError(ErrorCode::InvalidConfig, "sigma2 must be >= 0");
    }
    if (config.n_patients == 0) {
        throw DataError(ErrorCode::InvalidConfig, "n_patients must be positive");
    }
    const auto &fpf = config.falls_per_faller;
    if ((fpf.kind == FallCountDistribution::Kind::Fixed && fpf.count < 1) ||
        (fpf.kind != FallCountDistribution::Kind::Fixed && !(fpf.mean > 0)) ||
        (fpf.kind == FallCountDistribution::Kind::ZeroTruncatedNegBinomial && !(fpf.dispersion > 0))) {
        throw DataError(ErrorCode::InvalidConfig, "falls_per_faller parameters out of range");
    }
    CohortDataset data;
    data.schema = std::move(schema);
    for (const auto &v : data.schema) {
        v.validate();
        if (v.availability == Availability::Baseline && !config.covariates.contains(v.name)) {
            throw DataError(ErrorCode::InvalidConfig, fmt::format("no marginal distribution for '{}'", v.name));
        }
    }
    for (const auto &[name, m] : config.covariates) {
        const auto *v = data.find_variable(name);
        if (v == nullptr || v->availability != Availability::Baseline) {
            throw DataError(ErrorCode::InvalidConfig, fmt::format("covariate '{}' is not a baseline schema variable", name));
        }
    }

    Sampler s(config.seed);
    const int width = static_cast<int>(std::to_string(config.n_patients).size());
    for (std::size_t i = 0; i < config.n_patients; ++i) {
        PatientRecord p;
        p.patient_id = fmt::format("P{:0{}}", i + 1, width);
        for (const auto &v : data.schema) {
            if (v.availability == Availability::Baseline) {
                p.baseline[v.name] = draw_value(s, v, config.covariates.at(v.name));
            }
        }
        data.patients.push_back(std::move(p));
    }

    std::vector<std::string> baseline_names;
    std::vector<std::string> all_names;
    for (const auto &v : data.schema) {
        all_names.push_back(v.name);
        if (v.availability == Availability::Baseline) baseline_names.push_back(v.name);
    }
    const auto d1 = encode(data, baseline_names, Stage::One);
    const Eigen::VectorXd eta1 = d1.x * coefficient_vector(d1, config.stage1, "stage1");
    for (std::size_t i = 0; i < data.patients.size(); ++i) {
        data.patients[i].fell = s.bernoulli(inv_logit(eta1[static_cast<Eigen::Index>(i)]));
    }

    auto perfall_marginal = [&](std::string_view name) -> const Marginal * {
        const auto it = config.perfall.find(std::string(name));
        return it == config.perfall.end() ? nullptr : &it->second;
    };
    const auto *time_var = data.find_variable(kFallTimeVar);
    const auto *loc_var = data.find_variable(kLocationVar);
    for (const auto &p : data.patients) {
        if (!p.fell) continue;
        const int r = s.fall_count(config.falls_per_faller);
        for (int k = 1; k <= r; ++k) {
            FallEvent f;
            f.patient_id = p.patient_id;
            f.fall_index = k;
            if (const auto *m = perfall_marginal(kFallTimeVar); m && time_var) {
                f.category = parse_fall_time(std::get<std::string>(draw_value(s, *time_var, *m)));
            } else {
                f.category = static_cast<FallTime>(s.categorical({1.0, 1.0, 1.0}));
            }
            f.clock_minutes = s.clock_in(f.category);
            if (const auto *m = perfall_marginal(kLocationVar); m && loc_var) {
                f.location = parse_location(std::get<std::string>(draw_value(s, *loc_var, *m)));
            } else {
                f.location = s.bernoulli(0.5) ? Location::Outside : Location::Inside;
            }
            const auto *gm = perfall_marginal(kGlassesVar);
            f.glasses = s.bernoulli(gm ? gm->a : 0.5);
            data.falls.push_back(std::move(f));
        }
    }

    if (!data.falls.empty()) {
        std::vector<double> epsilon(data.patients.size(), 0.0);
        const double sd = std::sqrt(config.sigma2);
        for (std::size_t i = 0; i < data.patients.size(); ++i) {
            if (data.patients[i].fell && sd > 0) epsilon[i] = s.normal(0.0, sd);
        }
        const auto d2 = encode(data, all_names, Stage::Two);
        const Eigen::VectorXd eta2 = d2.x * coefficient_vector(d2, config.stage2, "stage2");
        for (std::size_t r = 0; r < data.falls.size(); ++r) {
            const double eta = eta2[static_cast<Eigen::Index>(r)] + epsilon[d2.patient_of_row[r]];
            data.falls[r].injured = s.bernoulli(inv_logit(eta));
        }
    } else if (config.stage2.coefficients.size() > 0) {
        // still validate stage-2 coefficient names against the design columns
        auto tmp = data;
        const auto d2 = encode(tmp, all_names, Stage::Two);
        coefficient_vector(d2, config.stage2, "stage2");
    }
    data.validate();
    return data;
}

// ---- bundled example cohort ------------------------------------------------

std::vector<CovariateSchema> example_schema() {
    using K = CovariateKind;
    auto var = [](std::string name, K kind, std::vector<std::string> levels = {}, std::string reference = {},
                  Availability availability = Availability::Baseline) {
        CovariateSchema v;
        v.name = std::move(name);
        v.kind = kind;
        v.levels = std::move(levels);
        v.reference = std::move(reference);
        v.availability = availability;
        if (kind == K::Ordinal) {
            for (std::size_t i = 0; i < v.levels.size(); ++i) {
                v.scores.push_back(static_cast<double>(i + 1));
            }
        }
        return v;
    };
    std::vector<CovariateSchema> s;
    s.push_back(var("age", K::Continuous));
    s.push_back(var("gender", K::Categorical, {"Male", "Female"}, "Male"));
    s.push_back(var("bmi", K::Categorical, {"Normal", "Overweight", "Obese"}, "Normal"));
    s.push_back(var("tinetti_balance", K::Continuous));
    s.push_back(var("tinetti_gait", K::Continuous));
    s.push_back(var("functional_reach", K::Continuous));
    s.push_back(var("tug", K::Continuous));
    s.push_back(var("previous_falls", K::Binary));
    for (const char *name : {"sf36_physical_functioning", "sf36_physical_health", "sf36_bodily_pain",
                             "sf36_general_health", "sf36_vitality", "sf36_social_functioning",
                             "sf36_emotional_problems", "sf36_mental_health"}) {
        s.push_back(var(name, K::Continuous));
    }
    s.push_back(var("bdi", K::Continuous));
    s.push_back(var("bai", K::Continuous));
    s.push_back(var("self_rated_balance", K::Ordinal, {"Excellent", "Very good", "Good", "Fair", "Poor"}));
    s.push_back(var("fearful", K::Ordinal, {"Not at all", "Slightly", "Moderately", "Quite a bit", "Extremely"}));
    s.push_back(var("fall_time_category", K::Categorical, {"MORNING", "AFTERNOON", "NIGHT"}, "AFTERNOON",
                    Availability::PerFall));
    s.push_back(var("location", K::Categorical, {"INSIDE", "OUTSIDE"}, "OUTSIDE", Availability::PerFall));
    s.push_back(var("glasses", K::Binary, {}, {}, Availability::PerFall));
    return s;
}

CohortDataset example_cohort(std::uint64_t seed) {
    constexpr std::size_t kPatients = 99;
    constexpr std::size_t kFallers = 55;
    constexpr std::size_t kSingleFallers = 20;
    constexpr std::size_t kFalls = 335;
    constexpr std::size_t kInjured = 84;

    CohortDataset data;
    data.schema = example_schema();
    Sampler s(seed);

    // Categorical margins are fixed counts, randomly assigned to patients.
    auto fixed_counts = [&](const std::vector<std::string> &levels, const std::vector<std::size_t> &counts) {
        std::vector<std::string> values;
        for (std::size_t k = 0; k < levels.size(); ++k) values.insert(values.end(), counts[k], levels[k]);
        s.shuffle(values);
        return values;
    };
    const auto gender = fixed_counts({"Male", "Female"}, {43, 56});
    const auto bmi = fixed_counts({"Normal", "Overweight", "Obese"}, {44, 34, 21});
    const auto balance = fixed_counts({"Excellent", "Very good", "Good", "Fair", "Poor"}, {4, 28, 35, 27, 5});
    const auto fearful =
        fixed_counts({"Not at all", "Slightly", "Moderately", "Quite a bit", "Extremely"}, {40, 40, 11, 6, 2});
    const auto previous = fixed_counts({"0", "1"}, {62, 37});

    auto draw = [&](double mean, double sd, double lo, double hi, double step) {
        const double x = snap(s.normal(mean, sd), step);
        return std::clamp(x, lo, hi);
    };
    std::vector<double> propensity(kPatients);
    for (std::size_t i = 0; i < kPatients; ++i) {
        PatientRecord p;
        p.patient_id = fmt::format("PD{:03d}", i + 1);
        auto &b = p.baseline;
        b["age"] = draw(66.9, 8.0, 40, 90, 1);
        b["gender"] = gender[i];
        b["bmi"] = bmi[i];
        b["tinetti_balance"] = draw(14.9, 1.4, 0, 16, 1);
        b["tinetti_gait"] = draw(10.6, 1.3, 0, 12, 1);
        b["functional_reach"] = draw(28.3, 5.5, 5, 50, 0.1);
        b["tug"] = draw(11.0, 3.0, 5, 40, 0.1);
        b["previous_falls"] = previous[i] == "1" ? 1.0 : 0.0;
        b["sf36_physical_functioning"] = draw(73.4, 20, 0, 100, 1);
        b["sf36_physical_health"] = draw(58.8, 30, 0, 100, 1);
        b["sf36_bodily_pain"] = draw(74.5, 20, 0, 100, 1);
        b["sf36_general_health"] = draw(61.2, 18, 0, 100, 1);
        b["sf36_vitality"] = draw(57.8, 18, 0, 100, 1);
        b["sf36_social_functioning"] = draw(83.5, 18, 0, 100, 1);
        b["sf36_emotional_problems"] = draw(81.5, 25, 0, 100, 1);
        b["sf36_mental_health"] = draw(81.1, 12, 0, 100, 1);
        b["bdi"] = draw(6.1, 4.0, 0, 63, 1);
        b["bai"] = draw(6.8, 5.0, 0, 63, 1);
        b["self_rated_balance"] = balance[i];
        b["fearful"] = fearful[i];
        const double fear_score = static_cast<double>(data.variable("fearful").level_index(fearful[i]));
        const double u = std::clamp(s.uniform(), 1e-12, 1 - 1e-12);
        propensity[i] = -0.5 * (std::get<double>(b["tinetti_gait"]) - 10.6) + 0.9 * std::get<double>(b["previous_falls"]) +
                        0.5 * fear_score + std::log(u / (1 - u));
        data.patients.push_back(std::move(p));
    }

    std::vector<std::size_t> order(kPatients);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return propensity[a] > propensity[b]; });
    std::vector<std::size_t> fallers(order.begin(), order.begin() + kFallers);
    std::sort(fallers.begin(), fallers.end());
    for (auto i : fallers) data.patients[i].fell = true;

    std::vector<std::size_t> counts(kPatients, 0);
    auto shuffled = fallers;
    s.shuffle(shuffled);
    std::vector<double> weight;
    for (std::size_t k = 0; k < kFallers; ++k) {
        counts[shuffled[k]] = k < kSingleFallers ? 1 : 2;
        if (k >= kSingleFallers) weight.push_back(s.gamma(0.8, 1.0));
    }
    const std::size_t extra = kFalls - kSingleFallers - 2 * (kFallers - kSingleFallers);
    for (std::size_t e = 0; e < extra; ++e) {
        ++counts[shuffled[kSingleFallers + s.categorical(weight)]];
    }

    std::vector<double> injury;
    std::vector<double> patient_effect(kPatients);
    for (auto &x : patient_effect) x = s.normal(0.0, 0.5);
    for (std::size_t i = 0; i < kPatients; ++i) {
        const auto &b = data.patients[i].baseline;
        for (std::size_t k = 1; k <= counts[i]; ++k) {
            FallEvent f;
            f.patient_id = data.patients[i].patient_id;
            f.fall_index = static_cast<int>(k);
            f.category = static_cast<FallTime>(s.categorical({0.45, 0.35, 0.20}));
            f.clock_minutes = s.clock_in(f.category);
            f.location = s.bernoulli(0.25) ? Location::Outside : Location::Inside;
            f.glasses = s.bernoulli(0.5);
            const double u = std::clamp(s.uniform(), 1e-12, 1 - 1e-12);
            injury.push_back(-1.3 * (f.category == FallTime::Morning) + 0.7 * (f.location == Location::Outside) +
                             0.5 * (std::get<std::string>(b.at("gender")) == "Female") +
                             0.3 * (std::get<double>(b.at("tinetti_balance")) - 14.9) + patient_effect[i] +
                             std::log(u / (1 - u)));
            data.falls.push_back(std::move(f));
        }
    }
    std::vector<std::size_t> fall_order(data.falls.size());
    std::iota(fall_order.begin(), fall_order.end(), 0);
    std::stable_sort(fall_order.begin(), fall_order.end(), [&](auto a, auto b) { return injury[a] > injury[b]; });
    for (std::size_t k = 0; k < kInjured; ++k) data.falls[fall_order[k]].injured = true;

    data.validate();
    return data;
}

} // namespace blr

#include "blr/datamodel.hpp"
#include "blr/errors.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

namespace blr {

std::string_view to_string(FallTime t) {
    switch (t) {
    case FallTime::Morning: return "MORNING";
    case FallTime::Afternoon: return "AFTERNOON";
    case FallTime::Night: return "NIGHT";
    }
    return "?";
}

std::string_view to_string(Location l) {
    return l == Location::Inside ? "INSIDE" : "OUTSIDE";
}

std::string_view to_string(CovariateKind k) {
    switch (k) {
    case CovariateKind::Continuous: return "continuous";
    case CovariateKind::Binary: return "binary";
    case CovariateKind::Categorical: return "categorical";
    case CovariateKind::Ordinal: return "ordinal";
    }
    return "?";
}

FallTime parse_fall_time(std::string_view label) {
    if (label == "MORNING") return FallTime::Morning;
    if (label == "AFTERNOON") return FallTime::Afternoon;
    if (label == "NIGHT") return FallTime::Night;
    throw DataError(ErrorCode::UnknownCategoryLevel,
                    fmt::format("fall_time_category '{}' (expected MORNING, AFTERNOON or NIGHT)", label));
}

Location parse_location(std::string_view label) {
    if (label == "INSIDE") return Location::Inside;
    if (label == "OUTSIDE") return Location::Outside;
    throw DataError(ErrorCode::UnknownCategoryLevel,
                    fmt::format("location '{}' (expected INSIDE or OUTSIDE)", label));
}

FallTime bucket_fall_time(int minutes) {
    if (minutes < 0 || minutes > 1439) {
        throw DataError(ErrorCode::OutOfRange, fmt::format("fall time {} not in [0, 1439]", minutes));
    }
    if (minutes >= 360 && minutes < 720) {
        return FallTime::Morning;
    }
    if (minutes >= 720 && minutes < 1260) {
        return FallTime::Afternoon;
    }
    return FallTime::Night;
}

int parse_clock(std::string_view text) {
    auto bad = [&] {
        return DataError(ErrorCode::MalformedInput, fmt::format("bad clock time '{}' (expected HH:MM)", text));
    };
    const auto colon = text.find(':');
    if (colon == std::string_view::npos || colon == 0 || colon > 2 || text.size() != colon + 3) {
        throw bad();
    }
    int h = 0;
    int m = 0;
    for (char c : text.substr(0, colon)) {
        if (c < '0' || c > '9') throw bad();
        h = h * 10 + (c - '0');
    }
    for (char c : text.substr(colon + 1)) {
        if (c < '0' || c > '9') throw bad();
        m = m * 10 + (c - '0');
    }
    if (h > 23 || m > 59) {
        throw DataError(ErrorCode::OutOfRange, fmt::format("clock time '{}' out of range", text));
    }
    return h * 60 + m;
}

std::string format_clock(int minutes) {
    return fmt::format("{:02d}:{:02d}", minutes / 60, minutes % 60);
}

// ---- schema ---------------------------------------------------------------

std::size_t CovariateSchema::expansion_width() const {
    switch (kind) {
    case CovariateKind::Continuous:
    case CovariateKind::Binary:
        return 1;
    case CovariateKind::Categorical:
        return levels.size() - 1;
    case CovariateKind::Ordinal:
        return dummy_coding ? levels.size() - 1 : 1;
    }
    return 0;
}

bool CovariateSchema::has_level(std::string_view level) const {
    return std::find(levels.begin(), levels.end(), level) != levels.end();
}

std::size_t CovariateSchema::level_index(std::string_view level) const {
    const auto it = std::find(levels.begin(), levels.end(), level);
    if (it == levels.end()) {
        throw DataError(ErrorCode::UnknownCategoryLevel,
                        fmt::format("level '{}' is not declared for variable '{}'", level, name));
    }
    return static_cast<std::size_t>(it - levels.begin());
}

void CovariateSchema::validate() const {
    auto fail = [&](const std::string &why) {
        throw DataError(ErrorCode::InvalidSchema, fmt::format("variable '{}': {}", name, why));
    };
    if (name.empty()) {
        fail("empty name");
    }
    if (name == "patient_id" || name == "fell" || name == "fall_index" || name == "injured" ||
        name == "fall_clock_time") {
        fail("name is reserved");
    }
    const std::set<std::string> unique(levels.begin(), levels.end());
    switch (kind) {
    case CovariateKind::Continuous:
    case CovariateKind::Binary:
        if (!levels.empty()) fail("levels only apply to categorical or ordinal variables");
        break;
    case CovariateKind::Categorical:
        if (levels.size() < 2) fail("needs at least two levels");
        if (unique.size() != levels.size()) fail("duplicate levels");
        if (!has_level(reference)) fail(fmt::format("reference level '{}' is not a declared level", reference));
        break;
    case CovariateKind::Ordinal:
        if (levels.size() < 2) fail("needs at least two levels");
        if (unique.size() != levels.size()) fail("duplicate levels");
        if (scores.size() != levels.size()) fail("one score per level required");
        for (std::size_t i = 1; i < scores.size(); ++i) {
            if (!(scores[i] > scores[i - 1])) fail("scores must be strictly increasing");
        }
        break;
    }
    if (availability == Availability::PerFall) {
        if (name == kFallTimeVar) {
            if (kind != CovariateKind::Categorical) fail("must be categorical");
            for (const auto &l : levels) parse_fall_time(l);
        } else if (name == kLocationVar) {
            if (kind != CovariateKind::Categorical) fail("must be categorical");
            for (const auto &l : levels) parse_location(l);
        } else if (name == kGlassesVar) {
            if (kind != CovariateKind::Binary) fail("must be binary");
        } else {
            fail("unknown per-fall variable (expected fall_time_category, location or glasses)");
        }
    }
}

std::vector<std::string> expansion_names(const CovariateSchema &var) {
    std::vector<std::string> names;
    const bool dummies = var.kind == CovariateKind::Categorical ||
                         (var.kind == CovariateKind::Ordinal && var.dummy_coding);
    if (!dummies) {
        names.push_back(var.name);
        return names;
    }
    const std::string &ref = var.kind == CovariateKind::Categorical ? var.reference : var.levels.front();
    for (const auto &level : var.levels) {
        if (level != ref) {
            names.push_back(fmt::format("{}[{}]", var.name, level));
        }
    }
    return names;
}

// ---- dataset --------------------------------------------------------------

CovariateValue FallEvent::perfall_value(std::string_view name) const {
    if (name == kFallTimeVar) {
        return std::string(to_string(category));
    }
    if (name == kLocationVar) {
        return std::string(to_string(location));
    }
    if (name == kGlassesVar) {
        if (!glasses) {
            throw DataError(ErrorCode::MissingValue,
                            fmt::format("patient '{}' fall {}: glasses not recorded", patient_id, fall_index));
        }
        return *glasses ? 1.0 : 0.0;
    }
    throw DataError(ErrorCode::UnknownVariable, fmt::format("'{}' is not a per-fall variable", name));
}

const CovariateSchema *CohortDataset::find_variable(std::string_view name) const {
    for (const auto &v : schema) {
        if (v.name == name) {
            return &v;
        }
    }
    return nullptr;
}

const CovariateSchema &CohortDataset::variable(std::string_view name) const {
    if (const auto *v = find_variable(name)) {
        return *v;
    }
    throw DataError(ErrorCode::UnknownVariable, fmt::format("variable '{}' is not in the schema", name));
}

std::size_t CohortDataset::declaration_index(std::string_view name) const {
    return static_cast<std::size_t>(&variable(name) - schema.data());
}

std::size_t CohortDataset::patient_index(std::string_view patient_id) const {
    for (std::size_t i = 0; i < patients.size(); ++i) {
        if (patients[i].patient_id == patient_id) {
            return i;
        }
    }
    throw DataError(ErrorCode::UnknownPatient, fmt::format("patient '{}' not found", patient_id));
}

std::size_t CohortDataset::faller_count() const {
    return static_cast<std::size_t>(
        std::count_if(patients.begin(), patients.end(), [](const auto &p) { return p.fell; }));
}

std::size_t CohortDataset::injured_count() const {
    return static_cast<std::size_t>(
        std::count_if(falls.begin(), falls.end(), [](const auto &f) { return f.injured; }));
}

namespace {

void check_value(const CovariateSchema &var, const CovariateValue &value, const std::string &who) {
    switch (var.kind) {
    case CovariateKind::Continuous:
        if (!std::holds_alternative<double>(value) || !std::isfinite(std::get<double>(value))) {
            throw DataError(ErrorCode::MalformedInput, fmt::format("{}: '{}' must be a finite number", who, var.name));
        }
        break;
    case CovariateKind::Binary: {
        const auto *d = std::get_if<double>(&value);
        if (d == nullptr || (*d != 0.0 && *d != 1.0)) {
            throw DataError(ErrorCode::MalformedInput, fmt::format("{}: '{}' must be 0 or 1", who, var.name));
        }
        break;
    }
    case CovariateKind::Categorical:
    case CovariateKind::Ordinal: {
        const auto *s = std::get_if<std::string>(&value);
        if (s == nullptr) {
            throw DataError(ErrorCode::UnknownCategoryLevel, fmt::format("{}: '{}' needs a level label", who, var.name));
        }
        var.level_index(*s);
        break;
    }
    }
}

} // namespace

void CohortDataset::validate() const {
    std::set<std::string> names;
    for (const auto &v : schema) {
        v.validate();
        if (!names.insert(v.name).second) {
            throw DataError(ErrorCode::InvalidSchema, fmt::format("variable '{}' declared twice", v.name));
        }
    }
    std::map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < patients.size(); ++i) {
        const auto &p = patients[i];
        if (p.patient_id.empty()) {
            throw DataError(ErrorCode::MissingValue, fmt::format("patient row {}: empty patient_id", i + 1));
        }
        if (!index.emplace(p.patient_id, i).second) {
            throw DataError(ErrorCode::DuplicatePatient, fmt::format("patient_id '{}' appears twice", p.patient_id));
        }
        for (const auto &v : schema) {
            if (v.availability != Availability::Baseline) {
                continue;
            }
            const auto it = p.baseline.find(v.name);
            if (it == p.baseline.end()) {
                throw DataError(ErrorCode::MissingValue,
                                fmt::format("patient '{}': missing value for '{}'", p.patient_id, v.name));
            }
            check_value(v, it->second, fmt::format("patient '{}'", p.patient_id));
        }
    }
    std::vector<int> fall_counts(patients.size(), 0);
    std::size_t last_patient = 0;
    for (std::size_t k = 0; k < falls.size(); ++k) {
        const auto &f = falls[k];
        const auto it = index.find(f.patient_id);
        if (it == index.end()) {
            throw DataError(ErrorCode::OrphanFallEvent,
                            fmt::format("fall row {} references unknown patient '{}'", k + 1, f.patient_id));
        }
        if (it->second < last_patient) {
            throw DataError(ErrorCode::MalformedInput, "falls must be grouped by patient in patient order");
        }
        last_patient = it->second;
        if (f.fall_index != ++fall_counts[it->second]) {
            throw DataError(ErrorCode::BadFallIndex,
                            fmt::format("patient '{}': fall_index {} breaks the 1..R sequence", f.patient_id,
                                        f.fall_index));
        }
        if (f.clock_minutes && bucket_fall_time(*f.clock_minutes) != f.category) {
            throw DataError(ErrorCode::MalformedInput,
                            fmt::format("patient '{}' fall {}: category {} disagrees with clock time {}",
                                        f.patient_id, f.fall_index, to_string(f.category),
                                        format_clock(*f.clock_minutes)));
        }
    }
    for (std::size_t i = 0; i < patients.size(); ++i) {
        if (patients[i].fell != (fall_counts[i] > 0)) {
            throw DataError(ErrorCode::InconsistentFellFlag,
                            fmt::format("patient '{}': fell={} but {} fall events", patients[i].patient_id,
                                        patients[i].fell ? 1 : 0, fall_counts[i]));
        }
    }
}

// ---- encoding -------------------------------------------------------------

Eigen::VectorXd Standardization::to_raw_scale(const Eigen::VectorXd &coefficients) const {
    Eigen::VectorXd raw = coefficients;
    for (std::size_t k = 0; k < columns.size(); ++k) {
        const auto j = columns[k];
        raw[j] = coefficients[j] / sd[k];
        raw[0] -= coefficients[j] * mean[k] / sd[k];
    }
    return raw;
}

namespace {

void fill_columns(const CovariateSchema &var, const CovariateValue &value, Eigen::Ref<Eigen::RowVectorXd, 0, Eigen::InnerStride<>> out) {
    switch (var.kind) {
    case CovariateKind::Continuous:
    case CovariateKind::Binary:
        out[0] = std::get<double>(value);
        return;
    case CovariateKind::Ordinal:
        if (!var.dummy_coding) {
            out[0] = var.scores[var.level_index(std::get<std::string>(value))];
            return;
        }
        [[fallthrough]];
    case CovariateKind::Categorical: {
        const std::string &ref = var.kind == CovariateKind::Categorical ? var.reference : var.levels.front();
        const auto &level = std::get<std::string>(value);
        var.level_index(level);
        out.setZero();
        Eigen::Index col = 0;
        for (const auto &l : var.levels) {
            if (l == ref) {
                continue;
            }
            if (l == level) {
                out[col] = 1.0;
            }
            ++col;
        }
        return;
    }
    }
}

} // namespace

DesignMatrix encode(const CohortDataset &data, const std::vector<std::string> &variables, Stage stage,
                    const EncodeOptions &options) {
    DesignMatrix d;
    d.stage = stage;
    d.variables = variables;
    d.column_names.push_back("(intercept)");
    std::vector<const CovariateSchema *> vars;
    std::set<std::string> seen;
    for (const auto &name : variables) {
        const auto &var = data.variable(name);
        if (!seen.insert(name).second) {
            throw DataError(ErrorCode::InvalidConfig, fmt::format("variable '{}' listed twice", name));
        }
        if (stage == Stage::One && var.availability == Availability::PerFall) {
            throw DataError(ErrorCode::StageMismatch,
                            fmt::format("per-fall variable '{}' cannot enter a Stage 1 model", name));
        }
        vars.push_back(&var);
        for (auto &c : expansion_names(var)) {
            d.column_names.push_back(std::move(c));
        }
    }
    const auto n_cols = static_cast<Eigen::Index>(d.column_names.size());

    if (stage == Stage::One) {
        const auto n = static_cast<Eigen::Index>(data.patients.size());
        d.x.resize(n, n_cols);
        d.outcome.resize(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            const auto &p = data.patients[static_cast<std::size_t>(i)];
            d.x(i, 0) = 1.0;
            Eigen::Index col = 1;
            for (const auto *var : vars) {
                const auto w = static_cast<Eigen::Index>(var->expansion_width());
                const auto it = p.baseline.find(var->name);
                if (it == p.baseline.end()) {
                    throw DataError(ErrorCode::MissingValue,
                                    fmt::format("patient '{}': missing '{}'", p.patient_id, var->name));
                }
                fill_columns(*var, it->second, d.x.row(i).segment(col, w));
                col += w;
            }
            d.outcome[i] = p.fell ? 1.0 : 0.0;
            d.row_ids.push_back(p.patient_id);
        }
    } else {
        std::map<std::string_view, std::size_t> index;
        for (std::size_t i = 0; i < data.patients.size(); ++i) {
            index.emplace(data.patients[i].patient_id, i);
        }
        const auto n = static_cast<Eigen::Index>(data.falls.size());
        d.x.resize(n, n_cols);
        d.outcome.resize(n);
        for (Eigen::Index r = 0; r < n; ++r) {
            const auto &f = data.falls[static_cast<std::size_t>(r)];
            const auto pit = index.find(f.patient_id);
            if (pit == index.end()) {
                throw DataError(ErrorCode::OrphanFallEvent, fmt::format("unknown patient '{}'", f.patient_id));
            }
            const auto &p = data.patients[pit->second];
            d.x(r, 0) = 1.0;
            Eigen::Index col = 1;
            for (const auto *var : vars) {
                const auto w = static_cast<Eigen::Index>(var->expansion_width());
                if (var->availability == Availability::PerFall) {
                    fill_columns(*var, f.perfall_value(var->name), d.x.row(r).segment(col, w));
                } else {
                    const auto it = p.baseline.find(var->name);
                    if (it == p.baseline.end()) {
                        throw DataError(ErrorCode::MissingValue,
                                        fmt::format("patient '{}': missing '{}'", p.patient_id, var->name));
                    }
                    fill_columns(*var, it->second, d.x.row(r).segment(col, w));
                }
                col += w;
            }
            d.outcome[r] = f.injured ? 1.0 : 0.0;
            d.row_ids.push_back(fmt::format("{}#{}", f.patient_id, f.fall_index));
            d.patient_of_row.push_back(pit->second);
        }
    }

    if (options.transform || options.standardize) {
        Standardization t;
        if (options.transform) {
            t = *options.transform;
        } else {
            Eigen::Index col = 1;
            for (const auto *var : vars) {
                const auto w = static_cast<Eigen::Index>(var->expansion_width());
                if (var->kind == CovariateKind::Continuous && d.rows() > 1) {
                    const auto column = d.x.col(col);
                    const double mean = column.mean();
                    const double sd =
                        std::sqrt((column.array() - mean).square().sum() / static_cast<double>(d.rows() - 1));
                    if (sd > 0.0) {
                        t.columns.push_back(col);
                        t.mean.push_back(mean);
                        t.sd.push_back(sd);
                    }
                }
                col += w;
            }
        }
        for (std::size_t k = 0; k < t.columns.size(); ++k) {
            if (t.columns[k] >= d.cols()) {
                throw DataError(ErrorCode::DimensionMismatch, "standardization does not match the design");
            }
            d.x.col(t.columns[k]) = (d.x.col(t.columns[k]).array() - t.mean[k]) / t.sd[k];
        }
        d.transform = std::move(t);
    }
    return d;
}

// ---- summaries ------------------------------------------------------------

namespace {

struct MeanAcc {
    double sum = 0.0;
    std::size_t n = 0;
    void add(double v) {
        sum += v;
        ++n;
    }
    std::optional<double> get() const {
        if (n == 0) return std::nullopt;
        return sum / static_cast<double>(n);
    }
};

double numeric_value(const CovariateSchema &var, const CovariateValue &v) {
    if (const auto *d = std::get_if<double>(&v)) {
        return *d;
    }
    return var.scores[var.level_index(std::get<std::string>(v))];
}

} // namespace

DatasetSummary summarize(const CohortDataset &data) {
    DatasetSummary s;
    s.n_patients = data.patients.size();
    s.n_fallers = data.faller_count();
    s.n_falls = data.falls.size();
    s.n_injured = data.injured_count();
    s.injured_fraction = s.n_falls == 0 ? 0.0 : static_cast<double>(s.n_injured) / static_cast<double>(s.n_falls);

    std::map<std::string_view, std::size_t> index;
    std::vector<int> per_patient(data.patients.size(), 0);
    for (std::size_t i = 0; i < data.patients.size(); ++i) {
        index.emplace(data.patients[i].patient_id, i);
    }
    for (const auto &f : data.falls) {
        ++per_patient[index.at(f.patient_id)];
    }
    s.n_single_fallers = static_cast<std::size_t>(std::count(per_patient.begin(), per_patient.end(), 1));

    for (const auto &var : data.schema) {
        VariableSummary vs;
        vs.name = var.name;
        vs.kind = var.kind;
        vs.availability = var.availability;
        const bool levelled = var.kind == CovariateKind::Categorical || var.kind == CovariateKind::Ordinal;
        if (levelled) {
            for (const auto &l : var.levels) {
                vs.levels.push_back(LevelSummary{l});
            }
        }
        MeanAcc all, fell, not_fell, inj, not_inj;
        if (var.availability == Availability::Baseline) {
            for (const auto &p : data.patients) {
                const auto &v = p.baseline.at(var.name);
                if (levelled) {
                    auto &ls = vs.levels[var.level_index(std::get<std::string>(v))];
                    ++ls.all;
                    ++(p.fell ? ls.fell : ls.not_fell);
                } else {
                    const double x = numeric_value(var, v);
                    all.add(x);
                    (p.fell ? fell : not_fell).add(x);
                }
            }
        }
        for (const auto &f : data.falls) {
            if (var.name == kGlassesVar && var.availability == Availability::PerFall && !f.glasses) {
                continue;
            }
            const CovariateValue v = var.availability == Availability::PerFall
                                         ? f.perfall_value(var.name)
                                         : data.patients[index.at(f.patient_id)].baseline.at(var.name);
            if (levelled) {
                auto &ls = vs.levels[var.level_index(std::get<std::string>(v))];
                ++(f.injured ? ls.injured : ls.not_injured);
                if (var.availability == Availability::PerFall) {
                    ++ls.all;
                }
            } else {
                const double x = numeric_value(var, v);
                (f.injured ? inj : not_inj).add(x);
                if (var.availability == Availability::PerFall) {
                    all.add(x);
                }
            }
        }
        vs.mean_all = all.get();
        vs.mean_fell = fell.get();
        vs.mean_not_fell = not_fell.get();
        vs.mean_injured = inj.get();
        vs.mean_not_injured = not_inj.get();
        s.variables.push_back(std::move(vs));
    }
    return s;
}

} // namespace blr

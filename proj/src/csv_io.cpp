// CSV and JSON (de)serialization of cohort data, schemas and summaries.

#include "blr/datamodel.hpp"
#include "blr/errors.hpp"

#include "json.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <charconv>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

namespace blr {

using nlohmann::json;

namespace {

std::vector<std::string> split_csv_line(const std::string &line) {
    std::vector<std::string> fields;
    std::string field;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    field += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                field += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.push_back(std::move(field));
            field.clear();
        } else {
            field += c;
        }
    }
    fields.push_back(std::move(field));
    return fields;
}

std::string csv_field(std::string_view s) {
    if (s.find_first_of(",\"\n") == std::string_view::npos) {
        return std::string(s);
    }
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + '"';
}

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    std::optional<std::size_t> column(std::string_view name) const {
        const auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end()) return std::nullopt;
        return static_cast<std::size_t>(it - header.begin());
    }
};

CsvTable read_table(std::istream &in, std::string_view what) {
    CsvTable t;
    std::string line;
    bool first = true;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (first) {
            if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) {
                line.erase(0, 3);
            }
            t.header = split_csv_line(line);
            first = false;
            continue;
        }
        if (line.empty()) {
            continue;
        }
        auto fields = split_csv_line(line);
        if (fields.size() != t.header.size()) {
            throw DataError(ErrorCode::MalformedInput,
                            fmt::format("{} line {}: {} fields, header has {}", what, line_no, fields.size(),
                                        t.header.size()));
        }
        t.rows.push_back(std::move(fields));
    }
    if (first) {
        throw DataError(ErrorCode::MalformedInput, fmt::format("{}: missing header row", what));
    }
    return t;
}

double parse_number(const std::string &s, std::string_view what, std::size_t row, std::string_view column) {
    double v = 0.0;
    const auto *end = s.data() + s.size();
    const auto res = std::from_chars(s.data(), end, v);
    if (res.ec != std::errc{} || res.ptr != end) {
        throw DataError(ErrorCode::MalformedInput,
                        fmt::format("{} row {}, column '{}': '{}' is not a number", what, row, column, s));
    }
    return v;
}

bool parse_flag(const std::string &s, std::string_view what, std::size_t row, std::string_view column) {
    if (s == "0") return false;
    if (s == "1") return true;
    throw DataError(ErrorCode::MalformedInput,
                    fmt::format("{} row {}, column '{}': '{}' must be 0 or 1", what, row, column, s));
}

CovariateKind parse_kind(const std::string &s) {
    if (s == "continuous") return CovariateKind::Continuous;
    if (s == "binary") return CovariateKind::Binary;
    if (s == "categorical") return CovariateKind::Categorical;
    if (s == "ordinal") return CovariateKind::Ordinal;
    throw DataError(ErrorCode::InvalidSchema, fmt::format("unknown kind '{}'", s));
}

} // namespace

// ---- schema ---------------------------------------------------------------

std::vector<CovariateSchema> parse_schema(const std::string &json_text) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::exception &e) {
        throw DataError(ErrorCode::InvalidSchema, e.what());
    }
    if (!doc.is_array()) {
        throw DataError(ErrorCode::InvalidSchema, "schema must be a JSON array");
    }
    std::vector<CovariateSchema> schema;
    try {
        for (const auto &item : doc) {
            CovariateSchema v;
            v.name = item.at("name").get<std::string>();
            v.kind = parse_kind(item.at("kind").get<std::string>());
            v.levels = item.value("levels", std::vector<std::string>{});
            v.reference = item.value("reference", std::string{});
            v.scores = item.value("scores", std::vector<double>{});
            v.dummy_coding = item.value("dummy_coding", false);
            const auto stage = item.value("stage", std::string{"baseline"});
            if (stage == "baseline") {
                v.availability = Availability::Baseline;
            } else if (stage == "per_fall") {
                v.availability = Availability::PerFall;
            } else {
                throw DataError(ErrorCode::InvalidSchema, fmt::format("variable '{}': unknown stage '{}'", v.name, stage));
            }
            if (v.kind == CovariateKind::Categorical && v.reference.empty() && !v.levels.empty()) {
                v.reference = v.levels.front();
            }
            if (v.kind == CovariateKind::Ordinal && v.scores.empty()) {
                for (std::size_t k = 0; k < v.levels.size(); ++k) {
                    v.scores.push_back(static_cast<double>(k + 1));
                }
            }
            v.validate();
            schema.push_back(std::move(v));
        }
    } catch (const json::exception &e) {
        throw DataError(ErrorCode::InvalidSchema, e.what());
    }
    return schema;
}

std::vector<CovariateSchema> load_schema(const std::filesystem::path &path) {
    std::ifstream in(path);
    if (!in) {
        throw DataError(ErrorCode::MalformedInput, fmt::format("cannot open schema '{}'", path.string()));
    }
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_schema(buf.str());
}

std::string schema_to_json(const std::vector<CovariateSchema> &schema) {
    json doc = json::array();
    for (const auto &v : schema) {
        json item;
        item["name"] = v.name;
        item["kind"] = std::string(to_string(v.kind));
        if (!v.levels.empty()) item["levels"] = v.levels;
        if (v.kind == CovariateKind::Categorical) item["reference"] = v.reference;
        if (v.kind == CovariateKind::Ordinal) {
            item["scores"] = v.scores;
            if (v.dummy_coding) item["dummy_coding"] = true;
        }
        item["stage"] = v.availability == Availability::Baseline ? "baseline" : "per_fall";
        doc.push_back(std::move(item));
    }
    return doc.dump(2) + "\n";
}

// ---- cohort CSV -----------------------------------------------------------

CohortDataset read_cohort(std::istream &patients_in, std::istream &falls_in, std::vector<CovariateSchema> schema) {
    CohortDataset data;
    data.schema = std::move(schema);
    for (const auto &v : data.schema) {
        v.validate();
    }

    const auto pt = read_table(patients_in, "patients.csv");
    const auto id_col = pt.column("patient_id");
    if (!id_col) {
        throw DataError(ErrorCode::MissingColumn, "patients.csv: missing column 'patient_id'");
    }
    std::vector<std::pair<const CovariateSchema *, std::size_t>> columns;
    for (const auto &v : data.schema) {
        if (v.availability != Availability::Baseline) continue;
        const auto c = pt.column(v.name);
        if (!c) {
            throw DataError(ErrorCode::MissingColumn, fmt::format("patients.csv: missing column '{}'", v.name));
        }
        columns.emplace_back(&v, *c);
    }
    for (const auto &h : pt.header) {
        if (h != "patient_id" && h != "fell" && !data.find_variable(h)) {
            throw DataError(ErrorCode::MalformedInput, fmt::format("patients.csv: column '{}' is not in the schema", h));
        }
    }
    const auto fell_col = pt.column("fell");
    std::vector<std::optional<bool>> fell_flag;

    for (std::size_t r = 0; r < pt.rows.size(); ++r) {
        const auto &row = pt.rows[r];
        const std::size_t row_no = r + 1;
        PatientRecord p;
        p.patient_id = row[*id_col];
        if (p.patient_id.empty()) {
            throw DataError(ErrorCode::MissingValue, fmt::format("patients.csv row {}, column 'patient_id': empty", row_no));
        }
        for (const auto &[var, c] : columns) {
            const auto &cell = row[c];
            if (cell.empty()) {
                throw DataError(ErrorCode::MissingValue,
                                fmt::format("patients.csv row {}, column '{}': missing value", row_no, var->name));
            }
            switch (var->kind) {
            case CovariateKind::Continuous:
                p.baseline[var->name] = parse_number(cell, "patients.csv", row_no, var->name);
                break;
            case CovariateKind::Binary:
                p.baseline[var->name] = parse_flag(cell, "patients.csv", row_no, var->name) ? 1.0 : 0.0;
                break;
            case CovariateKind::Categorical:
            case CovariateKind::Ordinal:
                if (!var->has_level(cell)) {
                    throw DataError(ErrorCode::UnknownCategoryLevel,
                                    fmt::format("patients.csv row {}, column '{}': unknown level '{}'", row_no,
                                                var->name, cell));
                }
                p.baseline[var->name] = cell;
                break;
            }
        }
        if (fell_col) {
            const auto &cell = row[*fell_col];
            if (cell.empty()) {
                throw DataError(ErrorCode::MissingValue, fmt::format("patients.csv row {}, column 'fell': missing value", row_no));
            }
            fell_flag.push_back(parse_flag(cell, "patients.csv", row_no, "fell"));
        } else {
            fell_flag.push_back(std::nullopt);
        }
        data.patients.push_back(std::move(p));
    }

    const auto ft = read_table(falls_in, "falls.csv");
    constexpr std::string_view fall_columns[] = {"patient_id", "fall_index",  "fall_clock_time", "fall_time_category",
                                                 "location",   "glasses",     "injured"};
    std::map<std::string_view, std::size_t> fc;
    for (auto name : fall_columns) {
        const auto c = ft.column(name);
        if (!c) {
            throw DataError(ErrorCode::MissingColumn, fmt::format("falls.csv: missing column '{}'", name));
        }
        fc[name] = *c;
    }
    std::map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < data.patients.size(); ++i) {
        if (!index.emplace(data.patients[i].patient_id, i).second) {
            throw DataError(ErrorCode::DuplicatePatient,
                            fmt::format("patients.csv: patient_id '{}' appears twice", data.patients[i].patient_id));
        }
    }
    std::vector<std::pair<std::size_t, FallEvent>> falls;
    for (std::size_t r = 0; r < ft.rows.size(); ++r) {
        const auto &row = ft.rows[r];
        const std::size_t row_no = r + 1;
        auto required = [&](std::string_view col) -> const std::string & {
            const auto &cell = row[fc.at(col)];
            if (cell.empty()) {
                throw DataError(ErrorCode::MissingValue, fmt::format("falls.csv row {}, column '{}': missing value", row_no, col));
            }
            return cell;
        };
        FallEvent f;
        f.patient_id = required("patient_id");
        const auto it = index.find(f.patient_id);
        if (it == index.end()) {
            throw DataError(ErrorCode::OrphanFallEvent,
                            fmt::format("falls.csv row {}: unknown patient '{}'", row_no, f.patient_id));
        }
        const double idx = parse_number(required("fall_index"), "falls.csv", row_no, "fall_index");
        if (idx < 1 || idx != static_cast<double>(static_cast<int>(idx))) {
            throw DataError(ErrorCode::BadFallIndex, fmt::format("falls.csv row {}: fall_index must be a positive integer", row_no));
        }
        f.fall_index = static_cast<int>(idx);
        const auto &clock = row[fc.at("fall_clock_time")];
        if (!clock.empty()) {
            f.clock_minutes = parse_clock(clock);
        }
        const auto &cat = row[fc.at("fall_time_category")];
        if (cat.empty()) {
            if (!f.clock_minutes) {
                throw DataError(ErrorCode::MissingValue,
                                fmt::format("falls.csv row {}: neither fall_time_category nor fall_clock_time given", row_no));
            }
            f.category = bucket_fall_time(*f.clock_minutes);
        } else {
            f.category = parse_fall_time(cat);
        }
        f.location = parse_location(required("location"));
        const auto &glasses = row[fc.at("glasses")];
        if (!glasses.empty()) {
            f.glasses = parse_flag(glasses, "falls.csv", row_no, "glasses");
        }
        f.injured = parse_flag(required("injured"), "falls.csv", row_no, "injured");
        falls.emplace_back(it->second, std::move(f));
    }
    std::stable_sort(falls.begin(), falls.end(), [](const auto &a, const auto &b) {
        return a.first != b.first ? a.first < b.first : a.second.fall_index < b.second.fall_index;
    });
    std::vector<int> counts(data.patients.size(), 0);
    for (auto &[i, f] : falls) {
        ++counts[i];
        data.falls.push_back(std::move(f));
    }
    for (std::size_t i = 0; i < data.patients.size(); ++i) {
        const bool derived = counts[i] > 0;
        if (fell_flag[i] && *fell_flag[i] != derived) {
            throw DataError(ErrorCode::InconsistentFellFlag,
                            fmt::format("patient '{}': fell={} but {} fall events in falls.csv",
                                        data.patients[i].patient_id, *fell_flag[i] ? 1 : 0, counts[i]));
        }
        data.patients[i].fell = derived;
    }
    data.validate();
    return data;
}

CohortDataset load_csv(const std::filesystem::path &patients_path, const std::filesystem::path &falls_path,
                       std::vector<CovariateSchema> schema) {
    std::ifstream p(patients_path);
    if (!p) {
        throw DataError(ErrorCode::MalformedInput, fmt::format("cannot open '{}'", patients_path.string()));
    }
    std::ifstream f(falls_path);
    if (!f) {
        throw DataError(ErrorCode::MalformedInput, fmt::format("cannot open '{}'", falls_path.string()));
    }
    return read_cohort(p, f, std::move(schema));
}

void write_patients_csv(const CohortDataset &data, std::ostream &out) {
    out << "patient_id";
    for (const auto &v : data.schema) {
        if (v.availability == Availability::Baseline) {
            out << ',' << csv_field(v.name);
        }
    }
    out << ",fell\n";
    for (const auto &p : data.patients) {
        out << csv_field(p.patient_id);
        for (const auto &v : data.schema) {
            if (v.availability != Availability::Baseline) continue;
            const auto &value = p.baseline.at(v.name);
            out << ',';
            if (const auto *d = std::get_if<double>(&value)) {
                out << fmt::format("{}", *d);
            } else {
                out << csv_field(std::get<std::string>(value));
            }
        }
        out << ',' << (p.fell ? 1 : 0) << '\n';
    }
}

void write_falls_csv(const CohortDataset &data, std::ostream &out) {
    out << "patient_id,fall_index,fall_clock_time,fall_time_category,location,glasses,injured\n";
    for (const auto &f : data.falls) {
        out << csv_field(f.patient_id) << ',' << f.fall_index << ','
            << (f.clock_minutes ? format_clock(*f.clock_minutes) : std::string{}) << ',' << to_string(f.category)
            << ',' << to_string(f.location) << ',' << (f.glasses ? (*f.glasses ? "1" : "0") : "") << ','
            << (f.injured ? 1 : 0) << '\n';
    }
}

void write_csv(const CohortDataset &data, const std::filesystem::path &patients_path,
               const std::filesystem::path &falls_path) {
    std::ofstream p(patients_path);
    write_patients_csv(data, p);
    std::ofstream f(falls_path);
    write_falls_csv(data, f);
    if (!p || !f) {
        throw DataError(ErrorCode::MalformedInput, "failed to write cohort CSV files");
    }
}

// ---- summary --------------------------------------------------------------

std::string summary_to_json(const DatasetSummary &s) {
    auto opt = [](const std::optional<double> &v) -> json { return v ? json(*v) : json(nullptr); };
    auto pct = [](std::size_t part, std::size_t whole) -> json {
        return whole == 0 ? json(nullptr) : json(100.0 * static_cast<double>(part) / static_cast<double>(whole));
    };
    json doc;
    doc["n_patients"] = s.n_patients;
    doc["n_fallers"] = s.n_fallers;
    doc["n_single_fallers"] = s.n_single_fallers;
    doc["n_falls"] = s.n_falls;
    doc["n_injured"] = s.n_injured;
    doc["injured_fraction"] = s.injured_fraction;
    json vars = json::array();
    for (const auto &v : s.variables) {
        json item;
        item["name"] = v.name;
        item["kind"] = std::string(to_string(v.kind));
        item["stage"] = v.availability == Availability::Baseline ? "baseline" : "per_fall";
        if (v.levels.empty()) {
            item["mean"] = {{"all", opt(v.mean_all)},
                            {"fell", opt(v.mean_fell)},
                            {"not_fell", opt(v.mean_not_fell)},
                            {"injured", opt(v.mean_injured)},
                            {"not_injured", opt(v.mean_not_injured)}};
        } else {
            json levels = json::array();
            std::size_t total = 0;
            for (const auto &l : v.levels) total += l.all;
            for (const auto &l : v.levels) {
                levels.push_back({{"level", l.level},
                                  {"all", l.all},
                                  {"all_pct", pct(l.all, total)},
                                  {"fell", l.fell},
                                  {"fell_pct", pct(l.fell, l.fell + l.not_fell)},
                                  {"not_fell", l.not_fell},
                                  {"injured", l.injured},
                                  {"injured_pct", pct(l.injured, l.injured + l.not_injured)},
                                  {"not_injured", l.not_injured}});
            }
            item["levels"] = std::move(levels);
        }
        vars.push_back(std::move(item));
    }
    doc["variables"] = std::move(vars);
    return doc.dump(2) + "\n";
}

} // namespace blr

#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace blr {

enum class CovariateKind { Continuous, Binary, Categorical, Ordinal };
enum class Availability { Baseline, PerFall };

/// Stage One models whether a patient falls (one row per patient); Stage Two
/// models whether a fall is injurious (one row per fall).
enum class Stage { One = 1, Two = 2 };

enum class FallTime { Morning, Afternoon, Night };
enum class Location { Inside, Outside };

std::string_view to_string(FallTime t);
std::string_view to_string(Location l);
std::string_view to_string(CovariateKind k);
FallTime parse_fall_time(std::string_view label);
Location parse_location(std::string_view label);

/// Names of the per-fall covariates a falls file can carry.
inline constexpr std::string_view kFallTimeVar = "fall_time_category";
inline constexpr std::string_view kLocationVar = "location";
inline constexpr std::string_view kGlassesVar = "glasses";

struct CovariateSchema {
    std::string name;
    CovariateKind kind = CovariateKind::Continuous;
    std::vector<std::string> levels;   // categorical / ordinal
    std::string reference;             // categorical
    std::vector<double> scores;        // ordinal, strictly increasing
    Availability availability = Availability::Baseline;
    bool dummy_coding = false;         // ordinal only: expand like a categorical

    /// Number of design columns this variable contributes.
    std::size_t expansion_width() const;
    /// Throws DataError(InvalidSchema) when the invariants do not hold.
    void validate() const;
    bool has_level(std::string_view level) const;
    /// Index of `level` in `levels`, throws UnknownCategoryLevel.
    std::size_t level_index(std::string_view level) const;
};

using CovariateValue = std::variant<double, std::string>;

struct PatientRecord {
    std::string patient_id;
    std::map<std::string, CovariateValue> baseline;
    bool fell = false;

    bool operator==(const PatientRecord &) const = default;
};

struct FallEvent {
    std::string patient_id;
    int fall_index = 1;
    std::optional<int> clock_minutes;
    FallTime category = FallTime::Morning;
    Location location = Location::Inside;
    std::optional<bool> glasses;
    bool injured = false;

    /// Value of a per-fall covariate by schema name; throws MissingValue for
    /// an absent optional field and UnknownVariable for other names.
    CovariateValue perfall_value(std::string_view name) const;

    bool operator==(const FallEvent &) const = default;
};

struct CohortDataset {
    std::vector<CovariateSchema> schema;
    std::vector<PatientRecord> patients;
    std::vector<FallEvent> falls; // grouped by patient in patient order, fall_index ascending

    const CovariateSchema &variable(std::string_view name) const;
    const CovariateSchema *find_variable(std::string_view name) const;
    /// Position of the variable in schema declaration order.
    std::size_t declaration_index(std::string_view name) const;
    std::size_t patient_index(std::string_view patient_id) const;
    std::size_t faller_count() const;
    std::size_t injured_count() const;
    /// Checks every dataset invariant; throws DataError on the first violation.
    void validate() const;
};

/// Maps minutes after midnight onto the three fall-time intervals.
FallTime bucket_fall_time(int minutes);
/// Parses "HH:MM" into minutes after midnight.
int parse_clock(std::string_view text);
std::string format_clock(int minutes);

std::vector<CovariateSchema> parse_schema(const std::string &json_text);
std::vector<CovariateSchema> load_schema(const std::filesystem::path &path);
std::string schema_to_json(const std::vector<CovariateSchema> &schema);

CohortDataset read_cohort(std::istream &patients, std::istream &falls,
                          std::vector<CovariateSchema> schema);
CohortDataset load_csv(const std::filesystem::path &patients_path,
                       const std::filesystem::path &falls_path,
                       std::vector<CovariateSchema> schema);
void write_patients_csv(const CohortDataset &data, std::ostream &out);
void write_falls_csv(const CohortDataset &data, std::ostream &out);
void write_csv(const CohortDataset &data, const std::filesystem::path &patients_path,
               const std::filesystem::path &falls_path);

/// Column-wise affine transform applied to continuous columns.
struct Standardization {
    std::vector<Eigen::Index> columns;
    std::vector<double> mean;
    std::vector<double> sd;

    /// Converts coefficients fitted on the standardized scale back to raw units.
    Eigen::VectorXd to_raw_scale(const Eigen::VectorXd &coefficients) const;
};

struct EncodeOptions {
    bool standardize = false;
    /// Reuse a transform computed on other data (e.g. a training fold).
    std::optional<Standardization> transform;
};

/// A chosen covariate subset realized as numbers, one row per patient
/// (Stage One) or per fall (Stage Two). Column 0 is the intercept.
struct DesignMatrix {
    Stage stage = Stage::One;
    std::vector<std::string> variables;
    std::vector<std::string> column_names;
    Eigen::MatrixXd x;
    Eigen::VectorXd outcome;
    std::vector<std::string> row_ids;
    /// Stage Two: index into the dataset's patients for each fall row.
    std::vector<std::size_t> patient_of_row;
    std::optional<Standardization> transform;

    Eigen::Index rows() const { return x.rows(); }
    Eigen::Index cols() const { return x.cols(); }
};

DesignMatrix encode(const CohortDataset &data, const std::vector<std::string> &variables,
                    Stage stage, const EncodeOptions &options = {});

/// Names of design columns a variable expands to (without the intercept).
std::vector<std::string> expansion_names(const CovariateSchema &var);

struct LevelSummary {
    std::string level;
    std::size_t all = 0;
    std::size_t fell = 0;
    std::size_t not_fell = 0;
    std::size_t injured = 0;
    std::size_t not_injured = 0;
};

struct VariableSummary {
    std::string name;
    CovariateKind kind = CovariateKind::Continuous;
    Availability availability = Availability::Baseline;
    // continuous / binary: means (nullopt when the group is empty)
    std::optional<double> mean_all, mean_fell, mean_not_fell, mean_injured, mean_not_injured;
    // categorical / ordinal
    std::vector<LevelSummary> levels;
};

struct DatasetSummary {
    std::size_t n_patients = 0;
    std::size_t n_fallers = 0;
    std::size_t n_single_fallers = 0;
    std::size_t n_falls = 0;
    std::size_t n_injured = 0;
    double injured_fraction = 0.0; // 0 when there are no falls
    std::vector<VariableSummary> variables;
};

DatasetSummary summarize(const CohortDataset &data);
std::string summary_to_json(const DatasetSummary &summary);

// ---- synthetic data -------------------------------------------------------

struct Marginal {
    enum class Kind { Normal, Uniform, Bernoulli, Categorical };
    Kind kind = Kind::Normal;
    double a = 0.0; // normal mean / uniform low / bernoulli p
    double b = 1.0; // normal sd / uniform high
    std::vector<double> probs; // categorical, aligned with schema levels
    std::optional<double> round_to; // snap draws to a multiple (integer scores)
    std::optional<double> min, max; // clamp
};

struct StageCoefficients {
    double intercept = 0.0;
    /// Keyed by design column name, e.g. "age" or "bmi[Obese]".
    std::map<std::string, double> coefficients;
};

struct FallCountDistribution {
    enum class Kind { ZeroTruncatedNegBinomial, ZeroTruncatedPoisson, Fixed };
    Kind kind = Kind::ZeroTruncatedNegBinomial;
    double mean = 4.0;       // underlying (untruncated) mean
    double dispersion = 1.0; // negative binomial size
    int count = 1;           // fixed
};

struct SimulationConfig {
    std::uint64_t seed = 0;
    std::size_t n_patients = 100;
    std::map<std::string, Marginal> covariates; // every baseline schema variable
    std::map<std::string, Marginal> perfall;    // per-fall variables (optional)
    StageCoefficients stage1;
    StageCoefficients stage2;
    double sigma2 = 0.0;
    FallCountDistribution falls_per_faller;
};

SimulationConfig parse_simulation_config(const std::string &json_text);
std::string simulation_config_to_json(const SimulationConfig &config);

/// Draws a cohort from the two-stage generative model. Deterministic in config.seed.
CohortDataset simulate(const SimulationConfig &config, std::vector<CovariateSchema> schema);

/// Schema of the bundled example cohort.
std::vector<CovariateSchema> example_schema();
/// Synthetic example cohort with 99 patients, 55 fallers (20 of them single
/// fallers), 335 falls and 84 injurious falls.
CohortDataset example_cohort(std::uint64_t seed);

} // namespace blr

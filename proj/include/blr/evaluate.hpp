#pragma once

#include "blr/bma.hpp"
#include "blr/predict.hpp"
#include "blr/selection.hpp"

#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace blr {

struct Confusion {
    double threshold = 0.5;
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t tn = 0;
    std::size_t fn = 0;
    double sensitivity = 0.0;
    double specificity = 0.0;
    double accuracy = 0.0;
};

/// Rows with probability >= threshold are classified positive. A rate whose
/// denominator is zero is reported as 0.
Confusion confusion_metrics(const std::vector<int> &labels, const std::vector<double> &probabilities,
                            double threshold);

/// Maximizes Youden's J over the observed probabilities plus 0 and 1;
/// the smallest maximizer wins.
double choose_threshold(const std::vector<int> &labels, const std::vector<double> &probabilities);

struct RocPoint {
    double threshold = 0.0;
    double fpr = 0.0;
    double tpr = 0.0;
};

struct RocResult {
    std::vector<RocPoint> points; // decreasing threshold, from (0,0) to (1,1)
    double auc = 0.0;
};

/// ROC over the unique scores; tied scores form one diagonal segment so the
/// trapezoid area equals the Mann-Whitney statistic.
RocResult roc_auc(const std::vector<int> &labels, const std::vector<double> &scores);

enum class LooUnit { Patient, Fall };
enum class LooMode { FixedModel, Pipeline };

struct LooSettings {
    LooUnit unit = LooUnit::Patient;
    LooMode mode = LooMode::FixedModel;
    std::vector<std::string> variables; // FixedModel
    std::vector<std::string> pool;      // Pipeline
    WeightRule weight_rule = WeightRule::NormalizedMarginal;
    PriorSpec prior;
    GridSettings grid;
    NewtonSettings newton;
    EncodeOptions encoding;
    McSettings mc;
    unsigned threads = 1;
    /// Skip (and record) folds whose training outcomes are all equal.
    bool skip_single_class_folds = true;
};

struct LooRow {
    std::string id;
    int label = 0;
    double probability = 0.0;
    double mc_standard_error = 0.0;
    std::size_t fold = 0;
};

struct SkippedFold {
    std::size_t fold = 0;
    std::string unit_id;
    std::string reason;
};

struct EvalReport {
    Stage stage = Stage::One;
    LooUnit unit = LooUnit::Patient;
    LooMode mode = LooMode::FixedModel;
    std::size_t n_folds = 0;
    std::vector<LooRow> rows; // dataset row order
    std::vector<SkippedFold> skipped;
    // present when the predicted rows contain both classes
    std::optional<Confusion> confusion;
    std::optional<RocResult> roc;
};

/// Leave-one-out cross-validation. Stage One holds out patients. Stage Two
/// holds out a faller's falls (Patient) or one fall (Fall); a held-out fall
/// whose patient keeps other falls in training is predicted as a known patient.
EvalReport loo_cv(const CohortDataset &data, Stage stage, const LooSettings &settings);

} // namespace blr

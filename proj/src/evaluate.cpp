#include "blr/evaluate.hpp"
#include "blr/errors.hpp"
#include "blr/parallel.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>

namespace blr {

namespace {

void check_inputs(const std::vector<int> &labels, const std::vector<double> &scores, bool need_both) {
    if (labels.size() != scores.size()) {
        throw NumericError(ErrorCode::DimensionMismatch,
                           fmt::format("{} labels but {} scores", labels.size(), scores.size()));
    }
    if (!need_both) {
        return;
    }
    const auto pos = std::count(labels.begin(), labels.end(), 1);
    if (pos == 0 || pos == static_cast<std::ptrdiff_t>(labels.size())) {
        throw DataError(ErrorCode::SingleClass, "both outcome classes are required");
    }
}

double ratio(std::size_t num, std::size_t den) {
    return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

} // namespace

Confusion confusion_metrics(const std::vector<int> &labels, const std::vector<double> &probabilities,
                            double threshold) {
    check_inputs(labels, probabilities, false);
    Confusion c;
    c.threshold = threshold;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const bool positive = probabilities[i] >= threshold;
        if (labels[i] == 1) {
            ++(positive ? c.tp : c.fn);
        } else {
            ++(positive ? c.fp : c.tn);
        }
    }
    c.sensitivity = ratio(c.tp, c.tp + c.fn);
    c.specificity = ratio(c.tn, c.tn + c.fp);
    c.accuracy = ratio(c.tp + c.tn, labels.size());
    return c;
}

double choose_threshold(const std::vector<int> &labels, const std::vector<double> &probabilities) {
    check_inputs(labels, probabilities, true);
    std::vector<double> candidates = probabilities;
    candidates.push_back(0.0);
    candidates.push_back(1.0);
    std::sort(candidates.begin(), candidates.end());
    candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());

    const auto n_pos = static_cast<std::int64_t>(std::count(labels.begin(), labels.end(), 1));
    const auto n_neg = static_cast<std::int64_t>(labels.size()) - n_pos;
    // J * n_pos * n_neg = tp * n_neg + tn * n_pos - n_pos * n_neg, compared exactly
    std::int64_t best_score = 0;
    double best = candidates.front();
    bool first = true;
    for (double t : candidates) {
        const auto c = confusion_metrics(labels, probabilities, t);
        const auto score = static_cast<std::int64_t>(c.tp) * n_neg + static_cast<std::int64_t>(c.tn) * n_pos;
        if (first || score > best_score) {
            best_score = score;
            best = t;
            first = false;
        }
    }
    return best;
}

RocResult roc_auc(const std::vector<int> &labels, const std::vector<double> &scores) {
    check_inputs(labels, scores, true);
    std::vector<std::size_t> order(labels.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

    const auto n_pos = static_cast<std::uint64_t>(std::count(labels.begin(), labels.end(), 1));
    const auto n_neg = static_cast<std::uint64_t>(labels.size()) - n_pos;
    RocResult out;
    out.points.push_back({std::numeric_limits<double>::infinity(), 0.0, 0.0});
    std::uint64_t tp = 0;
    std::uint64_t fp = 0;
    std::uint64_t twice_area = 0; // in units of one pos-neg pair
    for (std::size_t i = 0; i < order.size();) {
        const double s = scores[order[i]];
        const auto tp0 = tp;
        const auto fp0 = fp;
        for (; i < order.size() && scores[order[i]] == s; ++i) {
            ++(labels[order[i]] == 1 ? tp : fp);
        }
        twice_area += (fp - fp0) * (tp + tp0);
        out.points.push_back(
            {s, static_cast<double>(fp) / static_cast<double>(n_neg), static_cast<double>(tp) / static_cast<double>(n_pos)});
    }
    out.auc = static_cast<double>(twice_area) / static_cast<double>(2 * n_pos * n_neg);
    return out;
}

// ---- leave-one-out --------------------------------------------------------

namespace {

struct Fold {
    std::string unit_id;
    std::size_t patient = 0;
    std::vector<std::size_t> rows; // dataset rows: patients (Stage One) or falls (Stage Two)
    bool known_patient = false;
};

std::vector<Fold> make_folds(const CohortDataset &data, Stage stage, LooUnit unit) {
    std::vector<Fold> folds;
    if (stage == Stage::One) {
        for (std::size_t i = 0; i < data.patients.size(); ++i) {
            folds.push_back({data.patients[i].patient_id, i, {i}, false});
        }
        return folds;
    }
    std::vector<std::size_t> falls_of(data.patients.size(), 0);
    for (const auto &f : data.falls) {
        ++falls_of[data.patient_index(f.patient_id)];
    }
    for (std::size_t j = 0; j < data.falls.size(); ++j) {
        const auto &f = data.falls[j];
        const auto i = data.patient_index(f.patient_id);
        if (unit == LooUnit::Fall) {
            folds.push_back({fmt::format("{}#{}", f.patient_id, f.fall_index), i, {j}, falls_of[i] > 1});
        } else if (folds.empty() || folds.back().patient != i) {
            folds.push_back({f.patient_id, i, {j}, false});
        } else {
            folds.back().rows.push_back(j);
        }
    }
    return folds;
}

struct Split {
    CohortDataset train;
    CohortDataset held;
};

Split split(const CohortDataset &data, Stage stage, const Fold &fold) {
    Split s;
    s.train.schema = data.schema;
    s.held.schema = data.schema;
    if (stage == Stage::One) {
        for (std::size_t i = 0; i < data.patients.size(); ++i) {
            (i == fold.patient ? s.held : s.train).patients.push_back(data.patients[i]);
        }
        return s;
    }
    s.train.patients = data.patients;
    s.held.patients.push_back(data.patients[fold.patient]);
    for (std::size_t j = 0; j < data.falls.size(); ++j) {
        const bool out = std::find(fold.rows.begin(), fold.rows.end(), j) != fold.rows.end();
        (out ? s.held : s.train).falls.push_back(data.falls[j]);
    }
    return s;
}

bool single_class(const CohortDataset &train, Stage stage) {
    std::size_t pos = 0;
    std::size_t n = 0;
    if (stage == Stage::One) {
        n = train.patients.size();
        pos = static_cast<std::size_t>(
            std::count_if(train.patients.begin(), train.patients.end(), [](const auto &p) { return p.fell; }));
    } else {
        n = train.falls.size();
        pos = static_cast<std::size_t>(
            std::count_if(train.falls.begin(), train.falls.end(), [](const auto &f) { return f.injured; }));
    }
    return pos == 0 || pos == n;
}

struct FoldResult {
    std::vector<double> probabilities;
    std::vector<double> mc_se;
    std::string skip_reason;
};

PredictionBatch predict_member(const FitResult &fit, const CohortDataset &held, Stage stage, const Fold &fold,
                               const LooSettings &settings, const std::vector<std::uint64_t> &keys) {
    EncodeOptions enc;
    enc.standardize = settings.encoding.standardize;
    enc.transform = fit.transform;
    const auto design = encode(held, fit.variables, stage, enc);
    return predict(fit, design, fold.known_patient, settings.mc, 1, keys);
}

FoldResult run_fold(const CohortDataset &data, Stage stage, const Fold &fold, const LooSettings &settings) {
    FoldResult r;
    const auto s = split(data, stage, fold);
    if (single_class(s.train, stage)) {
        const std::string reason = fmt::format("{}: training outcomes have a single class",
                                               to_string(ErrorCode::DegenerateFold));
        if (settings.skip_single_class_folds) {
            r.skip_reason = reason;
            return r;
        }
    }
    const std::vector<std::uint64_t> keys(fold.rows.begin(), fold.rows.end());
    GridSettings grid = settings.grid;
    grid.threads = 1;

    if (settings.mode == LooMode::FixedModel) {
        const auto design = encode(s.train, settings.variables, stage, settings.encoding);
        const auto fit = fit_model(design, settings.prior, grid, settings.newton);
        if (!fit.converged) {
            r.skip_reason = fmt::format("{}: refit did not converge", to_string(ErrorCode::NotConverged));
            return r;
        }
        const auto batch = predict_member(fit, s.held, stage, fold, settings, keys);
        r.probabilities = batch.probabilities;
        r.mc_se = batch.mc_standard_error;
        return r;
    }

    SelectionSettings sel{settings.prior, grid, settings.newton, settings.encoding, 1};
    const auto trace = forward_select(s.train, settings.pool, stage, sel);
    const auto ensemble = build_ensemble(trace, settings.weight_rule);
    std::vector<PredictionBatch> batches(ensemble.members.size());
    for (std::size_t m = 0; m < ensemble.members.size(); ++m) {
        batches[m] = predict_member(ensemble.members[m].fit, s.held, stage, fold, settings, keys);
    }
    r.probabilities = bma_predict(ensemble, [&](const BmaMember &member) {
        return batches[static_cast<std::size_t>(&member - ensemble.members.data())].probabilities;
    });
    r.mc_se.assign(fold.rows.size(), 0.0);
    for (std::size_t k = 0; k < fold.rows.size(); ++k) {
        double v = 0.0;
        for (std::size_t m = 0; m < batches.size(); ++m) {
            const double w = ensemble.members[m].weight * batches[m].mc_standard_error[k];
            v += w * w;
        }
        r.mc_se[k] = std::sqrt(v);
    }
    return r;
}

} // namespace

EvalReport loo_cv(const CohortDataset &data, Stage stage, const LooSettings &settings) {
    settings.prior.validate();
    if (settings.mode == LooMode::Pipeline && settings.pool.empty()) {
        throw DataError(ErrorCode::InvalidConfig, "pipeline LOO needs a candidate pool");
    }
    for (const auto &name : settings.mode == LooMode::FixedModel ? settings.variables : settings.pool) {
        if (stage == Stage::One && data.variable(name).availability == Availability::PerFall) {
            throw DataError(ErrorCode::StageMismatch, fmt::format("per-fall variable '{}' in a Stage 1 model", name));
        }
    }
    const auto folds = make_folds(data, stage, settings.unit);
    std::vector<FoldResult> results(folds.size());
    parallel_for(folds.size(), settings.threads,
                 [&](std::size_t k) { results[k] = run_fold(data, stage, folds[k], settings); });

    EvalReport report;
    report.stage = stage;
    report.unit = settings.unit;
    report.mode = settings.mode;
    report.n_folds = folds.size();
    const std::size_t n_rows = stage == Stage::One ? data.patients.size() : data.falls.size();
    std::vector<std::optional<LooRow>> by_row(n_rows);
    for (std::size_t k = 0; k < folds.size(); ++k) {
        if (!results[k].skip_reason.empty()) {
            report.skipped.push_back({k, folds[k].unit_id, results[k].skip_reason});
            continue;
        }
        for (std::size_t t = 0; t < folds[k].rows.size(); ++t) {
            const auto j = folds[k].rows[t];
            LooRow row;
            row.fold = k;
            row.probability = results[k].probabilities[t];
            row.mc_standard_error = results[k].mc_se[t];
            if (stage == Stage::One) {
                row.id = data.patients[j].patient_id;
                row.label = data.patients[j].fell ? 1 : 0;
            } else {
                const auto &f = data.falls[j];
                row.id = fmt::format("{}#{}", f.patient_id, f.fall_index);
                row.label = f.injured ? 1 : 0;
            }
            by_row[j] = std::move(row);
        }
    }
    std::vector<int> labels;
    std::vector<double> probs;
    for (auto &row : by_row) {
        if (row) {
            labels.push_back(row->label);
            probs.push_back(row->probability);
            report.rows.push_back(std::move(*row));
        }
    }
    const auto pos = std::count(labels.begin(), labels.end(), 1);
    if (pos > 0 && pos < static_cast<std::ptrdiff_t>(labels.size())) {
        report.confusion = confusion_metrics(labels, probs, choose_threshold(labels, probs));
        report.roc = roc_auc(labels, probs);
    }
    return report;
}

} // namespace blr

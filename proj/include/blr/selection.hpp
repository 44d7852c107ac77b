#pragma once

#include "blr/laplace.hpp"

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace blr {

/// Canonical key of a model: stage prefix plus the sorted variable names.
std::string model_signature(const std::vector<std::string> &variables, Stage stage);

/// Improvements and ties are judged with this slack (nats).
inline constexpr double kLmlTolerance = 1e-9;

struct CandidateOutcome {
    std::string variable;
    std::optional<double> lml; // nullopt: the fit failed
    std::string error;
};

struct SelectionStep {
    int step_index = 0;
    std::vector<CandidateOutcome> candidates;
    std::optional<std::string> chosen; // nullopt: STOP
};

struct EvaluatedModel {
    std::string signature;
    std::vector<std::string> variables; // declaration order
    std::optional<FitResult> fit;       // nullopt: the fit failed
    std::string error;
};

struct SelectionTrace {
    Stage stage = Stage::One;
    std::vector<SelectionStep> steps;
    std::vector<std::string> final_model; // inclusion order
    std::vector<EvaluatedModel> all_evaluated; // first-visit order, one entry per signature
    std::size_t fits_performed = 0;

    const EvaluatedModel *find(const std::string &signature) const;
};

/// Fits a model given its variables (already in declaration order).
using ModelFitter = std::function<FitResult(const std::vector<std::string> &)>;

struct SelectionSettings {
    PriorSpec prior;
    GridSettings grid;
    NewtonSettings newton;
    EncodeOptions encoding;
    unsigned threads = 1;
};

/// Baseline variables for Stage One; every schema variable for Stage Two.
std::vector<std::string> default_pool(const CohortDataset &data, Stage stage);

/// Forward selection on log marginal likelihood starting from the
/// intercept-only model. `pool` must be in the order used for tie-breaking.
SelectionTrace forward_select(const ModelFitter &fitter, const std::vector<std::string> &pool, Stage stage,
                              unsigned threads = 1);

/// Dataset front end: validates the pool, orders it by schema declaration and
/// fits each candidate with the Laplace approximation of its stage.
SelectionTrace forward_select(const CohortDataset &data, const std::vector<std::string> &pool, Stage stage,
                              const SelectionSettings &settings);

} // namespace blr

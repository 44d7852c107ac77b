#pragma once

#include "blr/selection.hpp"

#include <functional>
#include <string>
#include <vector>

namespace blr {

enum class WeightRule {
    /// Posterior model probability under equal prior model weights:
    /// exp(lml_m - logsumexp(lml)).
    NormalizedMarginal,
    /// lml_m / sum(lml); defined only when every lml is negative.
    LiteralLmlRatio,
};

struct BmaMember {
    std::string signature;
    std::vector<std::string> variables;
    double lml = 0.0;
    double weight = 0.0;
    FitResult fit;
};

struct BmaEnsemble {
    WeightRule weight_rule = WeightRule::NormalizedMarginal;
    std::vector<BmaMember> members; // trace visit order
};

std::vector<double> model_weights(const std::vector<double> &lml, WeightRule rule);

/// Every successful fit of the trace becomes a member.
BmaEnsemble build_ensemble(const SelectionTrace &trace, WeightRule rule = WeightRule::NormalizedMarginal);

using MemberPredictor = std::function<std::vector<double>(const BmaMember &)>;

/// Weighted average of member predictions, clamped to the member range per row.
std::vector<double> bma_predict(const BmaEnsemble &ensemble, const MemberPredictor &predict, unsigned threads = 1);

/// Members sorted by weight (descending, ties by visit order), at most k.
std::vector<const BmaMember *> top_members(const BmaEnsemble &ensemble, std::size_t k = 5);

/// Variable-by-model table with a trailing Weight row.
std::string format_top_table(const BmaEnsemble &ensemble, const std::vector<std::string> &variable_order,
                             std::size_t k = 5);

} // namespace blr

#pragma once

#include "blr/bma.hpp"
#include "blr/evaluate.hpp"
#include "blr/selection.hpp"

#include <iosfwd>
#include <string>

namespace blr {

std::string fit_to_json(const FitResult &fit);
std::string trace_to_json(const SelectionTrace &trace);
std::string ensemble_to_json(const BmaEnsemble &ensemble, std::size_t top_k = 5);
std::string eval_to_json(const EvalReport &report);

/// Coefficient table with posterior mean, sd, odds ratio and 95% interval.
std::string format_fit_table(const FitResult &fit);

/// threshold,fpr,tpr (the leading point has threshold "inf").
void write_roc_csv(std::ostream &out, const RocResult &roc);
/// row_id,label,probability,mc_se,fold
void write_loo_csv(std::ostream &out, const EvalReport &report);

std::string to_string(WeightRule rule);
std::string to_string(LooUnit unit);
std::string to_string(LooMode mode);

} // namespace blr

#include "blr/selection.hpp"
#include "blr/errors.hpp"
#include "blr/parallel.hpp"

#include <fmt/format.h>
#include <fmt/ranges.h>

#include <algorithm>
#include <map>
#include <set>

namespace blr {

std::string model_signature(const std::vector<std::string> &variables, Stage stage) {
    const std::string prefix = stage == Stage::One ? "stage1:" : "stage2:";
    if (variables.empty()) {
        return prefix + "(intercept)";
    }
    std::vector<std::string> sorted = variables;
    std::sort(sorted.begin(), sorted.end());
    return prefix + fmt::format("{}", fmt::join(sorted, ","));
}

const EvaluatedModel *SelectionTrace::find(const std::string &signature) const {
    for (const auto &m : all_evaluated) {
        if (m.signature == signature) {
            return &m;
        }
    }
    return nullptr;
}

std::vector<std::string> default_pool(const CohortDataset &data, Stage stage) {
    std::vector<std::string> pool;
    for (const auto &v : data.schema) {
        if (stage == Stage::Two || v.availability == Availability::Baseline) {
            pool.push_back(v.name);
        }
    }
    return pool;
}

namespace {

EvaluatedModel evaluate(const ModelFitter &fitter, std::vector<std::string> variables, Stage stage) {
    EvaluatedModel m;
    m.signature = model_signature(variables, stage);
    m.variables = std::move(variables);
    try {
        FitResult fit = fitter(m.variables);
        if (!fit.converged) {
            m.error = "optimizer did not converge";
        } else {
            m.fit = std::move(fit);
        }
    } catch (const Error &e) {
        m.error = e.what();
    }
    return m;
}

} // namespace

SelectionTrace forward_select(const ModelFitter &fitter, const std::vector<std::string> &pool, Stage stage,
                              unsigned threads) {
    if (pool.empty()) {
        throw DataError(ErrorCode::InvalidConfig, "candidate pool is empty");
    }
    std::map<std::string, std::size_t> rank;
    for (std::size_t i = 0; i < pool.size(); ++i) {
        if (!rank.emplace(pool[i], i).second) {
            throw DataError(ErrorCode::InvalidConfig, fmt::format("'{}' appears twice in the pool", pool[i]));
        }
    }
    auto ordered = [&](std::vector<std::string> vars) {
        std::sort(vars.begin(), vars.end(), [&](const auto &a, const auto &b) { return rank.at(a) < rank.at(b); });
        return vars;
    };

    SelectionTrace trace;
    trace.stage = stage;
    std::map<std::string, std::size_t> visited;

    auto base = evaluate(fitter, {}, stage);
    ++trace.fits_performed;
    if (!base.fit) {
        throw NumericError(ErrorCode::AllCandidatesFailed, fmt::format("intercept-only model failed: {}", base.error));
    }
    double current_lml = base.fit->lml;
    visited.emplace(base.signature, 0);
    trace.all_evaluated.push_back(std::move(base));

    std::vector<std::string> current;
    for (int step = 1;; ++step) {
        SelectionStep s;
        s.step_index = step;
        std::vector<std::string> remaining;
        for (const auto &v : pool) {
            if (std::find(current.begin(), current.end(), v) == current.end()) {
                remaining.push_back(v);
            }
        }
        // fit every candidate not seen before, concurrently
        std::vector<std::vector<std::string>> models;
        std::vector<std::string> signatures;
        std::vector<std::size_t> pending;
        std::set<std::string> scheduled;
        for (const auto &v : remaining) {
            auto vars = current;
            vars.push_back(v);
            vars = ordered(std::move(vars));
            signatures.push_back(model_signature(vars, stage));
            if (!visited.contains(signatures.back()) && scheduled.insert(signatures.back()).second) {
                pending.push_back(models.size());
            }
            models.push_back(std::move(vars));
        }
        std::vector<EvaluatedModel> fresh(pending.size());
        parallel_for(pending.size(), threads,
                     [&](std::size_t k) { fresh[k] = evaluate(fitter, models[pending[k]], stage); });
        trace.fits_performed += fresh.size();
        for (auto &m : fresh) {
            visited.emplace(m.signature, trace.all_evaluated.size());
            trace.all_evaluated.push_back(std::move(m));
        }

        std::optional<std::size_t> best;
        double best_lml = 0.0;
        for (std::size_t k = 0; k < remaining.size(); ++k) {
            const auto &m = trace.all_evaluated[visited.at(signatures[k])];
            CandidateOutcome c{remaining[k], std::nullopt, m.error};
            if (m.fit) {
                c.lml = m.fit->lml;
                if (!best || *c.lml > best_lml + kLmlTolerance) {
                    best = k;
                    best_lml = *c.lml;
                }
            }
            s.candidates.push_back(std::move(c));
        }
        if (step == 1 && !remaining.empty() && !best) {
            throw NumericError(ErrorCode::AllCandidatesFailed, "no candidate model could be fitted at step 1");
        }
        if (best && best_lml > current_lml + kLmlTolerance) {
            s.chosen = remaining[*best];
            current.push_back(remaining[*best]);
            current_lml = best_lml;
            trace.steps.push_back(std::move(s));
            continue;
        }
        trace.steps.push_back(std::move(s));
        break;
    }
    trace.final_model = current;
    return trace;
}

SelectionTrace forward_select(const CohortDataset &data, const std::vector<std::string> &pool, Stage stage,
                              const SelectionSettings &settings) {
    std::vector<std::string> ordered = pool;
    for (const auto &name : ordered) {
        const auto &var = data.variable(name);
        if (stage == Stage::One && var.availability == Availability::PerFall) {
            throw DataError(ErrorCode::StageMismatch, fmt::format("per-fall variable '{}' in a Stage 1 pool", name));
        }
    }
    std::stable_sort(ordered.begin(), ordered.end(), [&](const auto &a, const auto &b) {
        return data.declaration_index(a) < data.declaration_index(b);
    });
    const ModelFitter fitter = [&](const std::vector<std::string> &vars) {
        const auto design = encode(data, vars, stage, settings.encoding);
        return fit_model(design, settings.prior, settings.grid, settings.newton);
    };
    return forward_select(fitter, ordered, stage, settings.threads);
}

} // namespace blr

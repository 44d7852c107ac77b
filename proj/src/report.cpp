#include "blr/report.hpp"

#include "json.hpp"

#include <fmt/format.h>
#include <fmt/ostream.h>

#include <cmath>
#include <ostream>

namespace blr {

using nlohmann::ordered_json;

namespace {

ordered_json fit_json(const FitResult &fit) {
    ordered_json j;
    j["model"] = model_signature(fit.variables, fit.stage);
    j["stage"] = static_cast<int>(fit.stage);
    j["variables"] = fit.variables;
    j["lml"] = fit.lml;
    j["converged"] = fit.converged;
    j["iterations"] = fit.iterations;
    auto coefficients = ordered_json::array();
    if (fit.converged) {
        for (const auto &c : posterior_summary(fit)) {
            coefficients.push_back({{"name", c.name},
                                    {"mean", c.mean},
                                    {"sd", c.sd},
                                    {"odds_ratio", c.odds_ratio},
                                    {"ci_low", c.ci_low},
                                    {"ci_high", c.ci_high}});
        }
    }
    j["coefficients"] = coefficients;
    if (fit.stage == Stage::Two) {
        auto grid = ordered_json::array();
        for (const auto &g : fit.sigma2_grid) {
            grid.push_back({{"sigma2", g.sigma2},
                            {"conditional_lml", g.conditional_lml},
                            {"log_hyperprior", g.log_hyperprior},
                            {"log_delta", g.log_delta},
                            {"weight", g.weight}});
        }
        j["sigma2_grid"] = grid;
    }
    if (fit.transform) {
        auto t = ordered_json::array();
        for (std::size_t k = 0; k < fit.transform->columns.size(); ++k) {
            t.push_back({{"column", fit.column_names[static_cast<std::size_t>(fit.transform->columns[k])]},
                         {"mean", fit.transform->mean[k]},
                         {"sd", fit.transform->sd[k]}});
        }
        j["standardization"] = t;
    }
    return j;
}

ordered_json confusion_json(const Confusion &c) {
    return {{"threshold", c.threshold},     {"tp", c.tp},
            {"fp", c.fp},                   {"tn", c.tn},
            {"fn", c.fn},                   {"sensitivity", c.sensitivity},
            {"specificity", c.specificity}, {"accuracy", c.accuracy}};
}

} // namespace

std::string to_string(WeightRule rule) {
    return rule == WeightRule::NormalizedMarginal ? "normalized" : "literal";
}

std::string to_string(LooUnit unit) {
    return unit == LooUnit::Patient ? "patient" : "fall";
}

std::string to_string(LooMode mode) {
    return mode == LooMode::FixedModel ? "fixed" : "pipeline";
}

std::string fit_to_json(const FitResult &fit) {
    return fit_json(fit).dump(2) + "\n";
}

std::string trace_to_json(const SelectionTrace &trace) {
    ordered_json j;
    j["stage"] = static_cast<int>(trace.stage);
    auto steps = ordered_json::array();
    for (const auto &s : trace.steps) {
        auto candidates = ordered_json::array();
        for (const auto &c : s.candidates) {
            ordered_json cj{{"variable", c.variable}};
            cj["lml"] = c.lml ? ordered_json(*c.lml) : ordered_json(nullptr);
            if (!c.error.empty()) {
                cj["error"] = c.error;
            }
            candidates.push_back(cj);
        }
        steps.push_back({{"step", s.step_index},
                         {"candidates", candidates},
                         {"chosen", s.chosen ? ordered_json(*s.chosen) : ordered_json("STOP")}});
    }
    j["steps"] = steps;
    j["final_model"] = trace.final_model;
    auto evaluated = ordered_json::array();
    for (const auto &m : trace.all_evaluated) {
        ordered_json mj{{"signature", m.signature}, {"variables", m.variables}};
        mj["lml"] = m.fit ? ordered_json(m.fit->lml) : ordered_json(nullptr);
        if (!m.error.empty()) {
            mj["error"] = m.error;
        }
        evaluated.push_back(mj);
    }
    j["evaluated"] = evaluated;
    j["fits_performed"] = trace.fits_performed;
    return j.dump(2) + "\n";
}

std::string ensemble_to_json(const BmaEnsemble &ensemble, std::size_t top_k) {
    ordered_json j;
    j["weight_rule"] = to_string(ensemble.weight_rule);
    auto members = ordered_json::array();
    for (const auto &m : ensemble.members) {
        members.push_back({{"signature", m.signature}, {"variables", m.variables}, {"lml", m.lml}, {"weight", m.weight}});
    }
    j["members"] = members;
    auto top = ordered_json::array();
    for (const auto *m : top_members(ensemble, top_k)) {
        top.push_back(fit_json(m->fit));
        top.back()["weight"] = m->weight;
    }
    j["top_models"] = top;
    return j.dump(2) + "\n";
}

std::string eval_to_json(const EvalReport &report) {
    ordered_json j;
    j["stage"] = static_cast<int>(report.stage);
    j["unit"] = to_string(report.unit);
    j["mode"] = to_string(report.mode);
    j["n_folds"] = report.n_folds;
    j["n_rows"] = report.rows.size();
    auto skipped = ordered_json::array();
    for (const auto &s : report.skipped) {
        skipped.push_back({{"fold", s.fold}, {"unit", s.unit_id}, {"reason", s.reason}});
    }
    j["skipped_folds"] = skipped;
    j["confusion"] = report.confusion ? confusion_json(*report.confusion) : ordered_json(nullptr);
    j["auc"] = report.roc ? ordered_json(report.roc->auc) : ordered_json(nullptr);
    auto rows = ordered_json::array();
    for (const auto &r : report.rows) {
        rows.push_back({{"id", r.id}, {"label", r.label}, {"probability", r.probability}});
    }
    j["rows"] = rows;
    return j.dump(2) + "\n";
}

std::string format_fit_table(const FitResult &fit) {
    std::string out = fmt::format("{}  lml = {:.4f}\n", model_signature(fit.variables, fit.stage), fit.lml);
    std::size_t width = 11;
    for (const auto &c : fit.column_names) {
        width = std::max(width, c.size());
    }
    out += fmt::format("{:<{}} {:>10} {:>10} {:>10} {:>10} {:>10}\n", "term", width, "mean", "sd", "OR", "2.5%",
                       "97.5%");
    for (const auto &c : posterior_summary(fit)) {
        out += fmt::format("{:<{}} {:>10.4f} {:>10.4f} {:>10.4g} {:>10.4g} {:>10.4g}\n", c.name, width, c.mean, c.sd,
                           c.odds_ratio, c.ci_low, c.ci_high);
    }
    if (fit.stage == Stage::Two) {
        const auto &g = fit.sigma2_grid[fit.modal_grid_index()];
        out += fmt::format("modal sigma2 = {:.4g} ({} grid points)\n", g.sigma2, fit.sigma2_grid.size());
    }
    return out;
}

void write_roc_csv(std::ostream &out, const RocResult &roc) {
    out << "threshold,fpr,tpr\n";
    for (const auto &p : roc.points) {
        if (std::isinf(p.threshold)) {
            fmt::print(out, "inf,{},{}\n", p.fpr, p.tpr);
        } else {
            fmt::print(out, "{},{},{}\n", p.threshold, p.fpr, p.tpr);
        }
    }
}

void write_loo_csv(std::ostream &out, const EvalReport &report) {
    out << "row_id,label,probability,mc_se,fold\n";
    for (const auto &r : report.rows) {
        fmt::print(out, "{},{},{},{},{}\n", r.id, r.label, r.probability, r.mc_standard_error, r.fold);
    }
}

} // namespace blr

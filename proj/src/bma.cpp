#include "blr/bma.hpp"
#include "blr/errors.hpp"
#include "blr/parallel.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace blr {

std::vector<double> model_weights(const std::vector<double> &lml, WeightRule rule) {
    if (lml.empty()) {
        throw DataError(ErrorCode::EmptyEnsemble, "no models to weight");
    }
    std::vector<double> w(lml.size());
    if (rule == WeightRule::LiteralLmlRatio) {
        double total = 0.0;
        for (double v : lml) {
            if (!(v < 0.0)) {
                throw DataError(ErrorCode::LiteralWeightsUndefined,
                                "the lml-ratio weight rule needs every lml to be negative");
            }
            total += v;
        }
        for (std::size_t m = 0; m < lml.size(); ++m) {
            w[m] = lml[m] / total;
        }
    } else {
        const double top = *std::max_element(lml.begin(), lml.end());
        double sum = 0.0;
        for (std::size_t m = 0; m < lml.size(); ++m) {
            w[m] = std::exp(lml[m] - top);
            sum += w[m];
        }
        for (auto &x : w) {
            x /= sum;
        }
    }
    return w;
}

BmaEnsemble build_ensemble(const SelectionTrace &trace, WeightRule rule) {
    BmaEnsemble e;
    e.weight_rule = rule;
    std::vector<double> lml;
    for (const auto &m : trace.all_evaluated) {
        if (!m.fit) {
            continue;
        }
        e.members.push_back(BmaMember{m.signature, m.variables, m.fit->lml, 0.0, *m.fit});
        lml.push_back(m.fit->lml);
    }
    if (e.members.empty()) {
        throw DataError(ErrorCode::EmptyEnsemble, "the selection trace has no successful fits");
    }
    const auto w = model_weights(lml, rule);
    for (std::size_t m = 0; m < w.size(); ++m) {
        e.members[m].weight = w[m];
    }
    return e;
}

std::vector<double> bma_predict(const BmaEnsemble &ensemble, const MemberPredictor &predict, unsigned threads) {
    if (ensemble.members.empty()) {
        throw DataError(ErrorCode::EmptyEnsemble, "cannot predict with an empty ensemble");
    }
    std::vector<std::vector<double>> per_member(ensemble.members.size());
    parallel_for(per_member.size(), threads, [&](std::size_t m) { per_member[m] = predict(ensemble.members[m]); });
    const std::size_t n = per_member.front().size();
    for (const auto &p : per_member) {
        if (p.size() != n) {
            throw NumericError(ErrorCode::DimensionMismatch, "members predicted different numbers of rows");
        }
    }
    std::vector<double> out(n, 0.0);
    for (std::size_t r = 0; r < n; ++r) {
        double lo = per_member[0][r];
        double hi = lo;
        double acc = 0.0;
        for (std::size_t m = 0; m < per_member.size(); ++m) {
            const double p = per_member[m][r];
            acc += ensemble.members[m].weight * p;
            lo = std::min(lo, p);
            hi = std::max(hi, p);
        }
        out[r] = std::clamp(acc, lo, hi);
    }
    return out;
}

std::vector<const BmaMember *> top_members(const BmaEnsemble &ensemble, std::size_t k) {
    std::vector<const BmaMember *> out;
    for (const auto &m : ensemble.members) {
        out.push_back(&m);
    }
    std::stable_sort(out.begin(), out.end(), [](const auto *a, const auto *b) { return a->weight > b->weight; });
    if (out.size() > k) {
        out.resize(k);
    }
    return out;
}

std::string format_top_table(const BmaEnsemble &ensemble, const std::vector<std::string> &variable_order,
                             std::size_t k) {
    const auto top = top_members(ensemble, k);
    std::vector<std::string> rows;
    for (const auto &v : variable_order) {
        const bool used = std::any_of(top.begin(), top.end(), [&](const auto *m) {
            return std::find(m->variables.begin(), m->variables.end(), v) != m->variables.end();
        });
        if (used) {
            rows.push_back(v);
        }
    }
    std::size_t width = 8;
    for (const auto &r : rows) {
        width = std::max(width, r.size());
    }
    std::string out = fmt::format("{:<{}}", "Variable", width);
    for (std::size_t c = 0; c < top.size(); ++c) {
        out += fmt::format(" | {:^6}", c + 1);
    }
    out += "\n" + std::string(width + 9 * top.size(), '-') + "\n";
    for (const auto &r : rows) {
        out += fmt::format("{:<{}}", r, width);
        for (const auto *m : top) {
            const bool in = std::find(m->variables.begin(), m->variables.end(), r) != m->variables.end();
            out += fmt::format(" | {:^6}", in ? "x" : "");
        }
        out += "\n";
    }
    out += std::string(width + 9 * top.size(), '-') + "\n";
    out += fmt::format("{:<{}}", "Weight", width);
    for (const auto *m : top) {
        out += fmt::format(" | {:^6.2f}", m->weight);
    }
    out += "\n";
    return out;
}

} // namespace blr

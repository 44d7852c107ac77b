#include "blr/predict.hpp"
#include "blr/errors.hpp"
#include "blr/parallel.hpp"

#include <fmt/format.h>
#include <fmt/ostream.h>

#include <cmath>
#include <map>
#include <ostream>
#include <random>

namespace blr {

namespace {

void check_columns(const FitResult &fit, const DesignMatrix &design) {
    if (design.cols() != fit.map_estimate.coefficients.size()) {
        throw NumericError(ErrorCode::DimensionMismatch,
                           fmt::format("design has {} columns, fit has {} coefficients", design.cols(),
                                       fit.map_estimate.coefficients.size()));
    }
}

std::mt19937_64 substream(std::uint64_t seed, std::uint64_t key) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(key), static_cast<std::uint32_t>(key >> 32)};
    return std::mt19937_64(seq);
}

std::string patient_of(const std::string &row_id) {
    return row_id.substr(0, row_id.rfind('#'));
}

} // namespace

PredictionBatch predict_stage1(const FitResult &fit, const DesignMatrix &design) {
    check_columns(fit, design);
    PredictionBatch out;
    out.row_ids = design.row_ids;
    const Eigen::VectorXd eta = design.x * fit.map_estimate.coefficients;
    out.probabilities.resize(static_cast<std::size_t>(eta.size()));
    out.mc_standard_error.assign(out.probabilities.size(), 0.0);
    for (Eigen::Index i = 0; i < eta.size(); ++i) {
        out.probabilities[static_cast<std::size_t>(i)] = inv_logit(eta[i]);
    }
    return out;
}

PredictionBatch predict_stage2(const FitResult &fit, const DesignMatrix &design, bool patient_known,
                               const McSettings &mc, unsigned threads, const std::vector<std::uint64_t> &row_keys) {
    check_columns(fit, design);
    if (fit.sigma2_grid.empty()) {
        throw NumericError(ErrorCode::DimensionMismatch, "Stage 2 prediction needs a sigma2 grid");
    }
    if (mc.n_sigma2_draws < 2 || mc.n_epsilon_draws < 1) {
        throw DataError(ErrorCode::InvalidConfig, "need at least 2 sigma2 draws and 1 epsilon draw");
    }
    const auto n = static_cast<std::size_t>(design.rows());
    if (!row_keys.empty() && row_keys.size() != n) {
        throw NumericError(ErrorCode::DimensionMismatch, "one row key per row is required");
    }
    const auto p = design.cols();

    std::vector<Eigen::Index> group(n, -1);
    if (patient_known) {
        std::map<std::string, Eigen::Index> index;
        for (std::size_t g = 0; g < fit.group_ids.size(); ++g) {
            index.emplace(fit.group_ids[g], static_cast<Eigen::Index>(g));
        }
        for (std::size_t r = 0; r < n; ++r) {
            const auto id = patient_of(design.row_ids[r]);
            const auto it = index.find(id);
            if (it == index.end()) {
                throw DataError(ErrorCode::UnknownPatient, fmt::format("patient '{}' is not in the fit", id));
            }
            group[r] = it->second;
        }
    }

    std::vector<double> weights;
    for (const auto &g : fit.sigma2_grid) {
        weights.push_back(g.weight);
    }

    PredictionBatch out;
    out.row_ids = design.row_ids;
    out.mc = mc;
    out.probabilities.resize(n);
    out.mc_standard_error.resize(n);
    parallel_for(n, threads, [&](std::size_t r) {
        auto gen = substream(mc.seed, row_keys.empty() ? r : row_keys[r]);
        std::discrete_distribution<std::size_t> pick(weights.begin(), weights.end());
        std::normal_distribution<double> normal;
        const auto S = static_cast<std::size_t>(mc.n_sigma2_draws);
        std::vector<double> group_mean(S);
        for (std::size_t s = 0; s < S; ++s) {
            const auto &gp = fit.sigma2_grid[pick(gen)];
            const double fixed = design.x.row(static_cast<Eigen::Index>(r)).dot(gp.mode.head(p));
            double centre = 0.0;
            double scale = std::sqrt(gp.sigma2);
            if (patient_known) {
                const Eigen::Index k = p + group[r];
                centre = gp.mode[k];
                scale = std::sqrt(gp.covariance(k, k));
            }
            double acc = 0.0;
            double z = 0.0;
            for (int e = 0; e < mc.n_epsilon_draws; ++e) {
                z = e % 2 == 0 ? normal(gen) : -z;
                const double eta = fixed + centre + scale * z;
                acc += mc.literal_logodds_mean ? eta : inv_logit(eta);
            }
            group_mean[s] = acc / mc.n_epsilon_draws;
        }
        double mean = 0.0;
        for (double v : group_mean) {
            mean += v;
        }
        mean /= static_cast<double>(S);
        double ss = 0.0;
        for (double v : group_mean) {
            ss += (v - mean) * (v - mean);
        }
        double se = std::sqrt(ss / static_cast<double>(S - 1) / static_cast<double>(S));
        if (mc.literal_logodds_mean) {
            const double prob = inv_logit(mean);
            se *= prob * (1.0 - prob);
            mean = prob;
        }
        out.probabilities[r] = mean;
        out.mc_standard_error[r] = se;
    });
    return out;
}

PredictionBatch predict(const FitResult &fit, const DesignMatrix &design, bool patient_known, const McSettings &mc,
                        unsigned threads, const std::vector<std::uint64_t> &row_keys) {
    if (fit.stage == Stage::One) {
        return predict_stage1(fit, design);
    }
    return predict_stage2(fit, design, patient_known, mc, threads, row_keys);
}

void write_predictions_csv(std::ostream &out, const PredictionBatch &batch) {
    out << "row_id,probability,mc_se\n";
    for (std::size_t r = 0; r < batch.row_ids.size(); ++r) {
        fmt::print(out, "{},{},{}\n", batch.row_ids[r], batch.probabilities[r], batch.mc_standard_error[r]);
    }
}

} // namespace blr

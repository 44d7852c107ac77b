#pragma once

#include "blr/laplace.hpp"

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace blr {

struct McSettings {
    int n_sigma2_draws = 200;
    int n_epsilon_draws = 50; // per sigma2 draw, used in antithetic pairs
    std::uint64_t seed = 0;
    /// Average the log-odds over draws and map the mean through the logistic
    /// function instead of averaging probabilities.
    bool literal_logodds_mean = false;
};

struct PredictionBatch {
    std::vector<std::string> row_ids;
    std::vector<double> probabilities;
    std::vector<double> mc_standard_error; // zero for plug-in predictions
    McSettings mc;
};

/// Plug-in probabilities at the MAP coefficients.
PredictionBatch predict_stage1(const FitResult &fit, const DesignMatrix &design);

/// Monte Carlo predictive probabilities for fall rows. New patients draw their
/// random intercept from N(0, sigma2); known patients use the conditional
/// posterior of their intercept at the drawn grid point. Row r draws from a
/// generator seeded with (seed, row_keys[r]); row_keys defaults to 0..n-1.
PredictionBatch predict_stage2(const FitResult &fit, const DesignMatrix &design, bool patient_known,
                               const McSettings &mc = {}, unsigned threads = 1,
                               const std::vector<std::uint64_t> &row_keys = {});

/// Dispatches on the fit's stage; Stage One ignores `mc`.
PredictionBatch predict(const FitResult &fit, const DesignMatrix &design, bool patient_known = false,
                        const McSettings &mc = {}, unsigned threads = 1,
                        const std::vector<std::uint64_t> &row_keys = {});

/// CSV with header row_id,probability,mc_se.
void write_predictions_csv(std::ostream &out, const PredictionBatch &batch);

} // namespace blr

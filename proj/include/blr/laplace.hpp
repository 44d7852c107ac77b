#pragma once

#include "blr/datamodel.hpp"
#include "blr/glm_core.hpp"

#include <Eigen/Dense>

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace blr {

struct NewtonSettings {
    int max_iter = 100;
    double grad_tol = 1e-8; // max-norm
    int max_halvings = 30;
};

/// Cholesky-based factorization of a symmetric positive-definite matrix whose
/// trailing block (after `dense_dim`) is diagonal. Uses the Schur complement of
/// the diagonal block, so the cost is O(p^3 + m p^2) for p dense and m diagonal
/// dimensions. Adds a 1e-8 ridge and retries once if the first attempt fails.
class BlockCholesky {
public:
    BlockCholesky(const Eigen::MatrixXd &a, Eigen::Index dense_dim);

    Eigen::VectorXd solve(const Eigen::VectorXd &rhs) const;
    double log_determinant() const;
    Eigen::MatrixXd inverse() const;
    bool used_ridge() const { return ridged_; }

private:
    bool factorize(const Eigen::MatrixXd &a);

    Eigen::Index p_ = 0;
    Eigen::Index m_ = 0;
    Eigen::MatrixXd coupling_;  // p x m block
    Eigen::VectorXd diag_;      // m diagonal entries
    Eigen::LLT<Eigen::MatrixXd> schur_;
    bool ridged_ = false;
};

using Objective = std::function<ObjectiveEval(const Eigen::VectorXd &)>;

struct MapFit {
    Eigen::VectorXd x;
    ObjectiveEval eval;
    bool converged = false;
    int iterations = 0;
};

/// Newton ascent with step halving. `dense_dim` tells the linear solver how
/// many leading latent dimensions form the dense block (-1: all of them).
MapFit fit_map(const Objective &objective, Eigen::VectorXd initial, const NewtonSettings &settings = {},
               Eigen::Index dense_dim = -1);

/// One point of the random-intercept variance grid.
struct GridPoint {
    double sigma2 = 0.0;
    double conditional_lml = 0.0;
    double log_hyperprior = 0.0;
    double log_delta = 0.0;  // log quadrature weight in sigma2
    double weight = 0.0;     // normalized posterior weight
    Eigen::VectorXd mode;    // (coefficients, random intercepts)
    Eigen::MatrixXd covariance;
    bool converged = false;
    int iterations = 0;
};

struct FitResult {
    Stage stage = Stage::One;
    std::vector<std::string> variables;
    std::vector<std::string> column_names;
    LatentState map_estimate;
    Eigen::MatrixXd posterior_cov;
    double lml = 0.0;
    std::vector<GridPoint> sigma2_grid; // Stage Two only
    std::vector<std::string> group_ids; // Stage Two: patient of each random intercept
    std::optional<Standardization> transform;
    bool converged = false;
    int iterations = 0;

    /// Index of the grid point with maximal posterior weight (Stage Two).
    std::size_t modal_grid_index() const;
};

struct GridSettings {
    int n_points = 25;
    double span_sd = 5.0;      // half-width in curvature sds
    int max_expansions = 3;
    double boundary_weight = 1e-3;
    double scan_lo = -12.0;    // log sigma2 range of the coarse mode search
    double scan_hi = 6.0;
    double scan_step = 1.0;
    unsigned threads = 1;
};

/// Laplace approximation of the log marginal likelihood of a fixed-effects model.
FitResult fit_stage1(const DesignMatrix &design, const PriorSpec &prior, const NewtonSettings &settings = {});
FitResult lml_stage1(const CohortDataset &data, const std::vector<std::string> &variables, const PriorSpec &prior,
                     const NewtonSettings &settings = {});

/// Conditional Laplace fit of the random-intercept model at a fixed sigma2.
GridPoint fit_stage2_conditional(const GroupedDesign &design, const Eigen::VectorXd &y, const PriorSpec &prior,
                                 double sigma2, const NewtonSettings &settings = {});

/// Nested Laplace with integration over log sigma2 on an adaptive grid.
FitResult fit_stage2(const DesignMatrix &design, const PriorSpec &prior, const GridSettings &grid = {},
                     const NewtonSettings &settings = {});
FitResult lml_stage2(const CohortDataset &data, const std::vector<std::string> &baseline_variables,
                     const std::vector<std::string> &perfall_variables, const PriorSpec &prior,
                     const GridSettings &grid = {}, const NewtonSettings &settings = {});

/// Fits whichever stage the design belongs to.
FitResult fit_model(const DesignMatrix &design, const PriorSpec &prior, const GridSettings &grid = {},
                    const NewtonSettings &settings = {});

struct CoefficientSummary {
    std::string name;
    double mean = 0.0;
    double sd = 0.0;
    double odds_ratio = 1.0;
    double ci_low = 1.0;
    double ci_high = 1.0;
};

struct MixtureMoments {
    double mean = 0.0;
    double sd = 0.0;
};

/// Mean and sd of a finite Gaussian mixture (law of total variance).
MixtureMoments mixture_moments(const std::vector<double> &weights, const std::vector<double> &means,
                               const std::vector<double> &sds);

/// Gaussian-Laplace marginal summaries with odds ratios and 95% intervals.
std::vector<CoefficientSummary> posterior_summary(const FitResult &fit);

} // namespace blr

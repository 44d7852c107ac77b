#pragma once

#include "blr/laplace.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace blr::oracle {

struct OracleResult {
    double value = 0.0;
    double error_estimate = 0.0;
    std::string method;
    std::map<std::string, double> settings;
};

using LogDensity = std::function<long double(const std::vector<long double> &)>;

/// log of the integral of exp(f) over a box, by a tensor trapezoid rule with
/// n_points per axis (odd, so the n/2 grid nests). The error estimate is the
/// gap to the coarse grid. Throws BoundsTooNarrow when the integrand on the
/// box boundary exceeds 1e-12 of its peak.
OracleResult quadrature_lml(const LogDensity &log_density, const std::vector<std::pair<double, double>> &bounds,
                            int n_points = 161);

/// Stage One marginal likelihood by quadrature. Bounds are mode +- 12 sd from
/// a separate pilot fit. At most 3 coefficients.
OracleResult quadrature_lml_stage1(const Eigen::MatrixXd &x, const Eigen::VectorXd &y, const PriorSpec &prior,
                                   int n_points = 161);

/// Long-double log joint densities, written apart from the main kernels.
long double log_joint_stage1(const std::vector<long double> &beta, const Eigen::MatrixXd &x, const Eigen::VectorXd &y,
                             const PriorSpec &prior);
long double log_joint_stage2(const Eigen::VectorXd &latent, const Eigen::MatrixXd &x,
                             const std::vector<Eigen::Index> &group, const Eigen::VectorXd &y, const PriorSpec &prior,
                             double sigma2);

struct ImportanceSettings {
    int n_samples = 20000;
    std::uint64_t seed = 1;
    double dof = 5.0;
    double envelope_probability = 0.2; // share of log sigma2 draws from the wide envelope
    double envelope_margin = 5.0;      // envelope extends the grid by this much in log sigma2
    int min_ess = 100;
};

/// Importance-sampling estimate of the random-intercept model's marginal
/// likelihood, integrating sigma2 as well. The proposal for log sigma2 mixes
/// uniform draws within grid cells (by grid weight) and a wide uniform
/// envelope; latents come from a multivariate t at the nearest grid point.
/// The error estimate is the Monte Carlo sd of the log estimate.
OracleResult importance_lml(const Eigen::MatrixXd &x, const std::vector<Eigen::Index> &group, const Eigen::VectorXd &y,
                            const PriorSpec &prior, const FitResult &fit, const ImportanceSettings &settings = {});

/// Same at a fixed sigma2, with the proposal centred at `location` with scale `scale`.
OracleResult importance_lml_fixed_sigma2(const Eigen::MatrixXd &x, const std::vector<Eigen::Index> &group,
                                         const Eigen::VectorXd &y, const PriorSpec &prior, double sigma2,
                                         const Eigen::VectorXd &location, const Eigen::MatrixXd &scale,
                                         const ImportanceSettings &settings = {});

/// Exact Mann-Whitney AUC by enumerating every positive-negative pair.
OracleResult pair_count_auc(const std::vector<int> &labels, const std::vector<double> &scores);

/// Central differences (with one Richardson step) of a scalar function.
Eigen::VectorXd fd_gradient(const std::function<double(const Eigen::VectorXd &)> &f, const Eigen::VectorXd &x);
/// Central differences of a vector function (e.g. a Jacobian of a gradient).
Eigen::MatrixXd fd_jacobian(const std::function<Eigen::VectorXd(const Eigen::VectorXd &)> &f,
                            const Eigen::VectorXd &x);
/// Second differences of function values.
Eigen::MatrixXd fd_hessian(const std::function<double(const Eigen::VectorXd &)> &f, const Eigen::VectorXd &x);

// 50-digit reference kernels
double hp_inv_logit(double eta);
double hp_log_likelihood_stage1(const Eigen::VectorXd &beta, const Eigen::MatrixXd &x, const Eigen::VectorXd &y);
double hp_log_inverse_gamma(double sigma2, double a, double b);
std::vector<double> hp_softmax(const std::vector<double> &v);

/// Nodes and weights of n-point Gauss-Hermite quadrature (weight exp(-x^2)).
std::pair<std::vector<double>, std::vector<double>> gauss_hermite(int n);

/// E[inv_logit(eta + e)] for e ~ N(0, sigma2) by Gauss-Hermite quadrature.
double expected_inv_logit(double eta, double sigma2, int n_nodes = 80);

/// Arg max of a unimodal f on [lo, hi].
double golden_section_max(const std::function<double(double)> &f, double lo, double hi, double tol = 1e-10);

} // namespace blr::oracle

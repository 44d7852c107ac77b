#pragma once

#include <Eigen/Dense>

#include <string>
#include <vector>

namespace blr {

struct DesignMatrix;

/// Gaussian N(0, v0) prior on every coefficient, Inverse-Gamma(a, b) (shape,
/// rate) prior on the random-intercept variance.
struct PriorSpec {
    double v0 = 1000.0;
    double a = 0.001;
    double b = 0.001;

    /// Throws DataError(InvalidConfig) unless v0, a, b are all positive.
    void validate() const;
};

/// Point in latent space: coefficients, then (Stage Two) one random intercept
/// per patient; sigma2 conditions the random-intercept prior.
struct LatentState {
    Eigen::VectorXd coefficients;
    Eigen::VectorXd random_intercepts;
    double sigma2 = 0.0;
};

struct ObjectiveEval {
    double value = 0.0;
    Eigen::VectorXd gradient;
    Eigen::MatrixXd hessian;
};

/// Fixed-effects design for fall rows plus the patient (group) of each row.
/// Groups are numbered 0..n_groups-1 in order of first appearance.
struct GroupedDesign {
    Eigen::MatrixXd x;
    std::vector<Eigen::Index> group;
    Eigen::Index n_groups = 0;
    std::vector<std::string> group_ids;

    Eigen::Index n_fixed() const { return x.cols(); }
    Eigen::Index n_latent() const { return x.cols() + n_groups; }
};

/// Builds the grouped design of a Stage Two DesignMatrix (groups = patients with falls).
GroupedDesign make_grouped_design(const DesignMatrix &design);

inline constexpr double kLog2Pi = 1.8378770664093454835606594728112;

/// log(1 + exp(eta)) without overflow or loss of precision.
double log1p_exp(double eta);
/// Logistic function 1 / (1 + exp(-eta)), stable for large |eta|.
double inv_logit(double eta);
double log_normal_density(double x, double mean, double variance);

double log_likelihood_stage1(const Eigen::VectorXd &beta, const Eigen::MatrixXd &x, const Eigen::VectorXd &y);

/// Log joint density of coefficients and outcomes with analytic gradient and
/// Hessian (grad = X'(y - pi) - beta/v0, hess = -X'WX - I/v0).
ObjectiveEval log_joint_stage1(const Eigen::VectorXd &beta, const Eigen::MatrixXd &x, const Eigen::VectorXd &y,
                               const PriorSpec &prior);

/// Log joint density of the random-intercept model at fixed sigma2 over the
/// stacked latent vector (coefficients, random intercepts). The Hessian has a
/// dense coefficient block, a coupling block and a diagonal intercept block.
ObjectiveEval log_joint_stage2(const Eigen::VectorXd &latent, const GroupedDesign &design, const Eigen::VectorXd &y,
                               const PriorSpec &prior, double sigma2);

/// Log density of the Inverse-Gamma(a, b) prior at sigma2.
double log_hyperprior_sigma2(double sigma2, const PriorSpec &prior);

} // namespace blr

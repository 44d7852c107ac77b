#include "blr/laplace.hpp"
#include "blr/errors.hpp"
#include "blr/parallel.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>

namespace blr {

// ---- linear algebra ---------------------------------------------------------

BlockCholesky::BlockCholesky(const Eigen::MatrixXd &a, Eigen::Index dense_dim) {
    const Eigen::Index n = a.rows();
    p_ = (dense_dim < 0 || dense_dim > n) ? n : dense_dim;
    m_ = n - p_;
    if (factorize(a)) {
        return;
    }
    Eigen::MatrixXd ridged = a;
    ridged.diagonal().array() += 1e-8;
    ridged_ = true;
    if (!factorize(ridged)) {
        throw NumericError(ErrorCode::SingularHessian,
                           fmt::format("negative Hessian of dimension {} is not positive definite", n));
    }
}

bool BlockCholesky::factorize(const Eigen::MatrixXd &a) {
    if (!a.allFinite()) {
        return false;
    }
    diag_ = a.diagonal().tail(m_);
    if (m_ > 0 && !(diag_.array() > 0).all()) {
        return false;
    }
    coupling_ = a.topRightCorner(p_, m_);
    Eigen::MatrixXd schur = a.topLeftCorner(p_, p_);
    if (m_ > 0) {
        const Eigen::MatrixXd scaled = coupling_ * diag_.cwiseInverse().cwiseSqrt().asDiagonal();
        schur.noalias() -= scaled * scaled.transpose();
    }
    schur_.compute(schur);
    return schur_.info() == Eigen::Success;
}

Eigen::VectorXd BlockCholesky::solve(const Eigen::VectorXd &rhs) const {
    Eigen::VectorXd out(p_ + m_);
    const Eigen::VectorXd e_scaled = rhs.tail(m_).cwiseQuotient(diag_);
    out.head(p_) = schur_.solve(rhs.head(p_) - coupling_ * e_scaled);
    out.tail(m_) = (rhs.tail(m_) - coupling_.transpose() * out.head(p_)).cwiseQuotient(diag_);
    return out;
}

double BlockCholesky::log_determinant() const {
    const auto &l = schur_.matrixLLT();
    return 2.0 * l.diagonal().array().log().sum() + diag_.array().log().sum();
}

Eigen::MatrixXd BlockCholesky::inverse() const {
    Eigen::MatrixXd out(p_ + m_, p_ + m_);
    const Eigen::MatrixXd s_inv = schur_.solve(Eigen::MatrixXd::Identity(p_, p_));
    const Eigen::MatrixXd b = coupling_ * diag_.cwiseInverse().asDiagonal(); // C D^-1
    const Eigen::MatrixXd s_inv_b = s_inv * b;
    out.topLeftCorner(p_, p_) = s_inv;
    out.topRightCorner(p_, m_) = -s_inv_b;
    out.bottomLeftCorner(m_, p_) = -s_inv_b.transpose();
    Eigen::MatrixXd ee = b.transpose() * s_inv_b;
    ee.diagonal() += diag_.cwiseInverse();
    out.bottomRightCorner(m_, m_) = ee;
    return (0.5 * (out + out.transpose())).eval();
}

// ---- optimizer ----------------------------------------------------------------

MapFit fit_map(const Objective &objective, Eigen::VectorXd initial, const NewtonSettings &settings,
               Eigen::Index dense_dim) {
    MapFit fit;
    fit.x = std::move(initial);
    fit.eval = objective(fit.x);
    if (!std::isfinite(fit.eval.value) || !fit.eval.gradient.allFinite()) {
        throw NumericError(ErrorCode::NonFiniteObjective, "objective is not finite at the initial point");
    }
    auto max_norm = [](const Eigen::VectorXd &g) { return g.size() == 0 ? 0.0 : g.cwiseAbs().maxCoeff(); };
    for (int iter = 0; iter < settings.max_iter; ++iter) {
        if (max_norm(fit.eval.gradient) <= settings.grad_tol) {
            break;
        }
        const BlockCholesky factor(-fit.eval.hessian, dense_dim);
        const Eigen::VectorXd step = factor.solve(fit.eval.gradient);
        double scale = 1.0;
        bool accepted = false;
        // rounding slack so a full step at the optimum is not rejected on noise
        const double accept_above = fit.eval.value - 1e-12 * (1.0 + std::fabs(fit.eval.value));
        for (int h = 0; h <= settings.max_halvings; ++h, scale *= 0.5) {
            Eigen::VectorXd candidate = fit.x + scale * step;
            ObjectiveEval e = objective(candidate);
            if (std::isfinite(e.value) && e.gradient.allFinite() && e.value >= accept_above) {
                fit.x = std::move(candidate);
                fit.eval = std::move(e);
                accepted = true;
                break;
            }
        }
        if (!accepted) {
            break;
        }
        ++fit.iterations;
    }
    fit.converged = max_norm(fit.eval.gradient) <= settings.grad_tol;
    return fit;
}

// ---- Stage One -------------------------------------------------------------------

FitResult fit_stage1(const DesignMatrix &design, const PriorSpec &prior, const NewtonSettings &settings) {
    prior.validate();
    const Eigen::MatrixXd &x = design.x;
    const Eigen::VectorXd &y = design.outcome;
    const auto objective = [&](const Eigen::VectorXd &beta) { return log_joint_stage1(beta, x, y, prior); };
    const MapFit map = fit_map(objective, Eigen::VectorXd::Zero(x.cols()), settings);
    const BlockCholesky factor(-map.eval.hessian, -1);
    const auto d = static_cast<double>(x.cols());

    FitResult fit;
    fit.stage = Stage::One;
    fit.variables = design.variables;
    fit.column_names = design.column_names;
    fit.transform = design.transform;
    fit.map_estimate.coefficients = map.x;
    fit.posterior_cov = factor.inverse();
    fit.lml = map.eval.value + 0.5 * d * kLog2Pi - 0.5 * factor.log_determinant();
    fit.converged = map.converged;
    fit.iterations = map.iterations;
    return fit;
}

FitResult lml_stage1(const CohortDataset &data, const std::vector<std::string> &variables, const PriorSpec &prior,
                     const NewtonSettings &settings) {
    return fit_stage1(encode(data, variables, Stage::One), prior, settings);
}

// ---- Stage Two -------------------------------------------------------------------

GridPoint fit_stage2_conditional(const GroupedDesign &design, const Eigen::VectorXd &y, const PriorSpec &prior,
                                 double sigma2, const NewtonSettings &settings) {
    const auto objective = [&](const Eigen::VectorXd &latent) {
        return log_joint_stage2(latent, design, y, prior, sigma2);
    };
    const MapFit map = fit_map(objective, Eigen::VectorXd::Zero(design.n_latent()), settings, design.n_fixed());
    const BlockCholesky factor(-map.eval.hessian, design.n_fixed());
    GridPoint gp;
    gp.sigma2 = sigma2;
    gp.conditional_lml = map.eval.value + 0.5 * static_cast<double>(design.n_latent()) * kLog2Pi -
                         0.5 * factor.log_determinant();
    gp.log_hyperprior = log_hyperprior_sigma2(sigma2, prior);
    gp.mode = map.x;
    gp.covariance = factor.inverse();
    gp.converged = map.converged;
    gp.iterations = map.iterations;
    return gp;
}

namespace {

double log_sum_exp(const std::vector<double> &v) {
    const double top = *std::max_element(v.begin(), v.end());
    if (!std::isfinite(top)) {
        return top;
    }
    double s = 0.0;
    for (double x : v) {
        s += std::exp(x - top);
    }
    return top + std::log(s);
}

} // namespace

FitResult fit_stage2(const DesignMatrix &design, const PriorSpec &prior, const GridSettings &grid,
                     const NewtonSettings &settings) {
    prior.validate();
    if (design.rows() == 0) {
        throw DataError(ErrorCode::InvalidConfig, "a Stage 2 fit needs at least one fall event");
    }
    if (grid.n_points < 3 || !(grid.scan_hi > grid.scan_lo) || !(grid.scan_step > 0)) {
        throw DataError(ErrorCode::InvalidConfig, "grid settings out of range");
    }
    const GroupedDesign g = make_grouped_design(design);
    const Eigen::VectorXd &y = design.outcome;

    // log posterior density of t = log sigma2, up to a constant
    auto log_density = [&](double t) {
        const GridPoint gp = fit_stage2_conditional(g, y, prior, std::exp(t), settings);
        return gp.conditional_lml + gp.log_hyperprior + t;
    };

    std::vector<double> scan_t;
    for (double t = grid.scan_lo; t <= grid.scan_hi + 1e-12; t += grid.scan_step) {
        scan_t.push_back(t);
    }
    std::vector<double> scan_h(scan_t.size());
    parallel_for(scan_t.size(), grid.threads, [&](std::size_t i) { scan_h[i] = log_density(scan_t[i]); });
    const auto best = static_cast<std::size_t>(std::max_element(scan_h.begin(), scan_h.end()) - scan_h.begin());

    // golden-section refinement around the best scan point
    double lo = scan_t[best] - grid.scan_step;
    double hi = scan_t[best] + grid.scan_step;
    const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
    double c = hi - inv_phi * (hi - lo);
    double d = lo + inv_phi * (hi - lo);
    double hc = log_density(c);
    double hd = log_density(d);
    while (hi - lo > 1e-3) {
        if (hc >= hd) {
            hi = d;
            d = c;
            hd = hc;
            c = hi - inv_phi * (hi - lo);
            hc = log_density(c);
        } else {
            lo = c;
            c = d;
            hc = hd;
            d = lo + inv_phi * (hi - lo);
            hd = log_density(d);
        }
    }
    const double mode = hc >= hd ? c : d;
    const double h_mode = std::max(hc, hd);

    constexpr double kStep = 0.1;
    const double curvature = (log_density(mode + kStep) - 2.0 * h_mode + log_density(mode - kStep)) / (kStep * kStep);
    const double kappa = curvature < 0 ? std::clamp(1.0 / std::sqrt(-curvature), 0.05, 3.0) : 3.0;

    double t_lo = mode - grid.span_sd * kappa;
    double t_hi = mode + grid.span_sd * kappa;
    const auto n = static_cast<std::size_t>(grid.n_points);
    std::vector<GridPoint> points(n);
    std::vector<double> log_w(n);
    double lml = 0.0;
    for (int expansion = 0;; ++expansion) {
        const double spacing = (t_hi - t_lo) / static_cast<double>(n - 1);
        parallel_for(n, grid.threads, [&](std::size_t k) {
            const double t = t_lo + spacing * static_cast<double>(k);
            points[k] = fit_stage2_conditional(g, y, prior, std::exp(t), settings);
            const double trap = (k == 0 || k == n - 1) ? 0.5 * spacing : spacing;
            points[k].log_delta = std::log(trap) + t;
            log_w[k] = points[k].conditional_lml + points[k].log_hyperprior + points[k].log_delta;
        });
        lml = log_sum_exp(log_w);
        if (!std::isfinite(lml)) {
            throw NumericError(ErrorCode::NonFiniteObjective, "marginal likelihood over the sigma2 grid is not finite");
        }
        for (std::size_t k = 0; k < n; ++k) {
            points[k].weight = std::exp(log_w[k] - lml);
        }
        const bool low_heavy = points.front().weight > grid.boundary_weight;
        const bool high_heavy = points.back().weight > grid.boundary_weight;
        if (!low_heavy && !high_heavy) {
            break;
        }
        if (expansion == grid.max_expansions) {
            throw NumericError(ErrorCode::GridDegenerate,
                               fmt::format("posterior mass on the sigma2 grid boundary after {} expansions "
                                           "(log sigma2 in [{:.3g}, {:.3g}])",
                                           grid.max_expansions, t_lo, t_hi));
        }
        if (low_heavy) t_lo -= grid.span_sd * kappa;
        if (high_heavy) t_hi += grid.span_sd * kappa;
    }
    // renormalize so weights sum to one to rounding
    double total = 0.0;
    for (const auto &p : points) total += p.weight;
    for (auto &p : points) p.weight /= total;

    FitResult fit;
    fit.stage = Stage::Two;
    fit.variables = design.variables;
    fit.column_names = design.column_names;
    fit.transform = design.transform;
    fit.group_ids = g.group_ids;
    fit.lml = lml;
    fit.converged = true;
    for (const auto &p : points) {
        fit.converged = fit.converged && p.converged;
        fit.iterations += p.iterations;
    }
    fit.sigma2_grid = std::move(points);
    const auto &modal = fit.sigma2_grid[fit.modal_grid_index()];
    fit.map_estimate.coefficients = modal.mode.head(g.n_fixed());
    fit.map_estimate.random_intercepts = modal.mode.tail(g.n_groups);
    fit.map_estimate.sigma2 = modal.sigma2;
    fit.posterior_cov = modal.covariance;
    return fit;
}

FitResult lml_stage2(const CohortDataset &data, const std::vector<std::string> &baseline_variables,
                     const std::vector<std::string> &perfall_variables, const PriorSpec &prior,
                     const GridSettings &grid, const NewtonSettings &settings) {
    std::vector<std::string> all = baseline_variables;
    for (const auto &name : baseline_variables) {
        if (data.variable(name).availability != Availability::Baseline) {
            throw DataError(ErrorCode::StageMismatch, fmt::format("'{}' is not a baseline variable", name));
        }
    }
    for (const auto &name : perfall_variables) {
        if (data.variable(name).availability != Availability::PerFall) {
            throw DataError(ErrorCode::StageMismatch, fmt::format("'{}' is not a per-fall variable", name));
        }
        all.push_back(name);
    }
    return fit_stage2(encode(data, all, Stage::Two), prior, grid, settings);
}

FitResult fit_model(const DesignMatrix &design, const PriorSpec &prior, const GridSettings &grid,
                    const NewtonSettings &settings) {
    return design.stage == Stage::One ? fit_stage1(design, prior, settings) : fit_stage2(design, prior, grid, settings);
}

std::size_t FitResult::modal_grid_index() const {
    std::size_t best = 0;
    for (std::size_t k = 1; k < sigma2_grid.size(); ++k) {
        if (sigma2_grid[k].weight > sigma2_grid[best].weight) {
            best = k;
        }
    }
    return best;
}

// ---- summaries ---------------------------------------------------------------------

MixtureMoments mixture_moments(const std::vector<double> &weights, const std::vector<double> &means,
                               const std::vector<double> &sds) {
    double mean = 0.0;
    for (std::size_t k = 0; k < weights.size(); ++k) {
        mean += weights[k] * means[k];
    }
    double var = 0.0;
    for (std::size_t k = 0; k < weights.size(); ++k) {
        const double d = means[k] - mean;
        var += weights[k] * (sds[k] * sds[k] + d * d);
    }
    return {mean, std::sqrt(std::max(var, 0.0))};
}

std::vector<CoefficientSummary> posterior_summary(const FitResult &fit) {
    if (!fit.converged) {
        throw NumericError(ErrorCode::NotConverged, "posterior summary requested for a fit that did not converge");
    }
    constexpr double z = 1.959963984540054;
    std::vector<CoefficientSummary> out;
    const auto p = fit.map_estimate.coefficients.size();
    for (Eigen::Index k = 0; k < p; ++k) {
        CoefficientSummary s;
        s.name = fit.column_names[static_cast<std::size_t>(k)];
        if (fit.stage == Stage::One) {
            s.mean = fit.map_estimate.coefficients[k];
            s.sd = std::sqrt(fit.posterior_cov(k, k));
        } else {
            std::vector<double> w, mu, sd;
            for (const auto &gp : fit.sigma2_grid) {
                w.push_back(gp.weight);
                mu.push_back(gp.mode[k]);
                sd.push_back(std::sqrt(gp.covariance(k, k)));
            }
            const auto mix = mixture_moments(w, mu, sd);
            s.mean = mix.mean;
            s.sd = mix.sd;
        }
        s.odds_ratio = std::exp(s.mean);
        s.ci_low = std::exp(s.mean - z * s.sd);
        s.ci_high = std::exp(s.mean + z * s.sd);
        out.push_back(std::move(s));
    }
    return out;
}

} // namespace blr

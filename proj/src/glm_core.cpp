#include "blr/glm_core.hpp"
#include "blr/datamodel.hpp"
#include "blr/errors.hpp"

#include <fmt/format.h>

#include <cmath>
#include <map>

namespace blr {

void PriorSpec::validate() const {
    if (!(v0 > 0) || !(a > 0) || !(b > 0) || !std::isfinite(v0) || !std::isfinite(a) || !std::isfinite(b)) {
        throw DataError(ErrorCode::InvalidConfig, fmt::format("prior needs v0, a, b > 0 (got {}, {}, {})", v0, a, b));
    }
}

GroupedDesign make_grouped_design(const DesignMatrix &design) {
    if (design.stage != Stage::Two || design.patient_of_row.size() != static_cast<std::size_t>(design.rows())) {
        throw NumericError(ErrorCode::DimensionMismatch, "grouped design needs a Stage 2 design matrix");
    }
    GroupedDesign g;
    g.x = design.x;
    std::map<std::size_t, Eigen::Index> index;
    for (std::size_t r = 0; r < design.patient_of_row.size(); ++r) {
        const auto [it, inserted] = index.emplace(design.patient_of_row[r], g.n_groups);
        if (inserted) {
            ++g.n_groups;
            const auto &id = design.row_ids[r];
            g.group_ids.push_back(id.substr(0, id.rfind('#')));
        }
        g.group.push_back(it->second);
    }
    return g;
}

double log1p_exp(double eta) {
    return eta > 0 ? eta + std::log1p(std::exp(-eta)) : std::log1p(std::exp(eta));
}

double inv_logit(double eta) {
    if (eta >= 0) {
        return 1.0 / (1.0 + std::exp(-eta));
    }
    const double e = std::exp(eta);
    return e / (1.0 + e);
}

double log_normal_density(double x, double mean, double variance) {
    const double d = x - mean;
    return -0.5 * (kLog2Pi + std::log(variance) + d * d / variance);
}

namespace {

void check_stage1(const Eigen::VectorXd &beta, const Eigen::MatrixXd &x, const Eigen::VectorXd &y) {
    if (x.cols() != beta.size() || x.rows() != y.size()) {
        throw NumericError(ErrorCode::DimensionMismatch,
                           fmt::format("design {}x{}, coefficients {}, outcomes {}", x.rows(), x.cols(), beta.size(),
                                       y.size()));
    }
}

} // namespace

double log_likelihood_stage1(const Eigen::VectorXd &beta, const Eigen::MatrixXd &x, const Eigen::VectorXd &y) {
    check_stage1(beta, x, y);
    const Eigen::VectorXd eta = x * beta;
    double ll = 0.0;
    for (Eigen::Index i = 0; i < eta.size(); ++i) {
        ll += y[i] * eta[i] - log1p_exp(eta[i]);
    }
    return ll;
}

ObjectiveEval log_joint_stage1(const Eigen::VectorXd &beta, const Eigen::MatrixXd &x, const Eigen::VectorXd &y,
                               const PriorSpec &prior) {
    check_stage1(beta, x, y);
    const Eigen::Index n = x.rows();
    const Eigen::Index p = x.cols();
    const Eigen::VectorXd eta = x * beta;
    Eigen::VectorXd resid(n);
    Eigen::VectorXd w(n);
    double value = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        value += y[i] * eta[i] - log1p_exp(eta[i]);
        const double pi = inv_logit(eta[i]);
        resid[i] = y[i] - pi;
        w[i] = pi * (1.0 - pi);
    }
    for (Eigen::Index k = 0; k < p; ++k) {
        value += log_normal_density(beta[k], 0.0, prior.v0);
    }
    ObjectiveEval out;
    out.value = value;
    out.gradient = x.transpose() * resid - beta / prior.v0;
    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(p, p);
    h.selfadjointView<Eigen::Lower>().rankUpdate((x.array().colwise() * w.array().sqrt()).matrix().transpose(), -1.0);
    h.diagonal().array() -= 1.0 / prior.v0;
    out.hessian = h.selfadjointView<Eigen::Lower>();
    return out;
}

ObjectiveEval log_joint_stage2(const Eigen::VectorXd &latent, const GroupedDesign &design, const Eigen::VectorXd &y,
                               const PriorSpec &prior, double sigma2) {
    if (!(sigma2 > 0)) {
        throw NumericError(ErrorCode::NonpositiveSigma2, fmt::format("sigma2 = {}", sigma2));
    }
    const Eigen::Index p = design.n_fixed();
    const Eigen::Index m = design.n_groups;
    const Eigen::Index n = design.x.rows();
    if (latent.size() != p + m || y.size() != n || static_cast<Eigen::Index>(design.group.size()) != n) {
        throw NumericError(ErrorCode::DimensionMismatch,
                           fmt::format("latent {}, expected {} + {}; rows {}, outcomes {}", latent.size(), p, m, n,
                                       y.size()));
    }
    const auto alpha = latent.head(p);
    const auto eps = latent.tail(m);
    Eigen::VectorXd eta = design.x * alpha;
    Eigen::VectorXd resid(n);
    Eigen::VectorXd w(n);
    double value = 0.0;
    for (Eigen::Index r = 0; r < n; ++r) {
        eta[r] += eps[design.group[static_cast<std::size_t>(r)]];
        value += y[r] * eta[r] - log1p_exp(eta[r]);
        const double pi = inv_logit(eta[r]);
        resid[r] = y[r] - pi;
        w[r] = pi * (1.0 - pi);
    }
    for (Eigen::Index k = 0; k < p; ++k) {
        value += log_normal_density(alpha[k], 0.0, prior.v0);
    }
    for (Eigen::Index g = 0; g < m; ++g) {
        value += log_normal_density(eps[g], 0.0, sigma2);
    }

    ObjectiveEval out;
    out.value = value;
    out.gradient.resize(p + m);
    out.gradient.head(p) = design.x.transpose() * resid - alpha / prior.v0;
    out.gradient.tail(m) = -eps / sigma2;
    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(p + m, p + m);
    auto haa = h.topLeftCorner(p, p);
    haa.selfadjointView<Eigen::Lower>().rankUpdate(
        (design.x.array().colwise() * w.array().sqrt()).matrix().transpose(), -1.0);
    haa.diagonal().array() -= 1.0 / prior.v0;
    for (Eigen::Index r = 0; r < n; ++r) {
        const Eigen::Index g = p + design.group[static_cast<std::size_t>(r)];
        out.gradient[g] += resid[r];
        h(g, g) -= w[r];
        h.row(g).head(p) -= w[r] * design.x.row(r);
    }
    h.diagonal().tail(m).array() -= 1.0 / sigma2;
    out.hessian = h.selfadjointView<Eigen::Lower>();
    return out;
}

double log_hyperprior_sigma2(double sigma2, const PriorSpec &prior) {
    if (!(sigma2 > 0)) {
        throw NumericError(ErrorCode::NonpositiveSigma2, fmt::format("sigma2 = {}", sigma2));
    }
    return prior.a * std::log(prior.b) - std::lgamma(prior.a) - (prior.a + 1.0) * std::log(sigma2) - prior.b / sigma2;
}

} // namespace blr

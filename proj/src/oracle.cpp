#include "blr/oracle.hpp"
#include "blr/errors.hpp"

#include <boost/multiprecision/cpp_bin_float.hpp>
#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace blr::oracle {

namespace {

using hp = boost::multiprecision::cpp_bin_float_50;
using ld = long double;

constexpr ld kLnTwoPi = 1.837877066409345483560659472811235279722794947275566825634L;

ld softplus(ld eta) {
    return eta > 0 ? eta + std::log1p(std::exp(-eta)) : std::log1p(std::exp(eta));
}

// running log-sum-exp
struct LogAccumulator {
    ld top = -std::numeric_limits<ld>::infinity();
    ld sum = 0.0L;

    void add(ld v) {
        if (v == -std::numeric_limits<ld>::infinity()) {
            return;
        }
        if (v > top) {
            sum = sum * std::exp(top - v) + 1.0L;
            top = v;
        } else {
            sum += std::exp(v - top);
        }
    }
    ld value() const { return top + std::log(sum); }
};

} // namespace

// ---- quadrature ---------------------------------------------------------------

OracleResult quadrature_lml(const LogDensity &log_density, const std::vector<std::pair<double, double>> &bounds,
                            int n_points) {
    const auto dim = bounds.size();
    if (dim == 0 || dim > 3) {
        throw DataError(ErrorCode::InvalidConfig, fmt::format("quadrature supports 1 to 3 dimensions, got {}", dim));
    }
    if (n_points < 5 || n_points % 2 == 0) {
        throw DataError(ErrorCode::InvalidConfig, "quadrature needs an odd number of points, at least 5");
    }
    std::vector<ld> h(dim);
    for (std::size_t a = 0; a < dim; ++a) {
        if (!(bounds[a].second > bounds[a].first)) {
            throw DataError(ErrorCode::InvalidConfig, "empty quadrature interval");
        }
        h[a] = (static_cast<ld>(bounds[a].second) - bounds[a].first) / (n_points - 1);
    }
    const auto n = static_cast<std::size_t>(n_points);
    std::size_t total = 1;
    for (std::size_t a = 0; a < dim; ++a) {
        total *= n;
    }

    LogAccumulator fine;
    LogAccumulator coarse;
    ld peak = -std::numeric_limits<ld>::infinity();
    ld edge = -std::numeric_limits<ld>::infinity();
    std::vector<long double> point(dim);
    std::vector<std::size_t> idx(dim);
    for (std::size_t flat = 0; flat < total; ++flat) {
        std::size_t rest = flat;
        bool on_edge = false;
        bool on_coarse = true;
        ld log_w_fine = 0.0L;
        ld log_w_coarse = 0.0L;
        for (std::size_t a = 0; a < dim; ++a) {
            idx[a] = rest % n;
            rest /= n;
            point[a] = bounds[a].first + h[a] * static_cast<ld>(idx[a]);
            const bool end = idx[a] == 0 || idx[a] == n - 1;
            on_edge = on_edge || end;
            on_coarse = on_coarse && idx[a] % 2 == 0;
            log_w_fine += std::log(end ? h[a] / 2 : h[a]);
            log_w_coarse += std::log(end ? h[a] : 2 * h[a]);
        }
        const ld f = log_density(point);
        if (std::isnan(f)) {
            throw NumericError(ErrorCode::NonFiniteObjective, "integrand is NaN");
        }
        peak = std::max(peak, f);
        if (on_edge) {
            edge = std::max(edge, f);
        }
        fine.add(f + log_w_fine);
        if (on_coarse) {
            coarse.add(f + log_w_coarse);
        }
    }
    if (edge > peak + std::log(1e-12L)) {
        throw NumericError(ErrorCode::BoundsTooNarrow,
                           fmt::format("integrand at the boundary is {:.3g} of its peak",
                                       static_cast<double>(std::exp(edge - peak))));
    }
    OracleResult r;
    r.value = static_cast<double>(fine.value());
    r.error_estimate = static_cast<double>(std::fabs(fine.value() - coarse.value()));
    r.method = "tensor-trapezoid";
    r.settings = {{"dim", static_cast<double>(dim)}, {"n_points", n_points}};
    return r;
}

long double log_joint_stage1(const std::vector<long double> &beta, const Eigen::MatrixXd &x, const Eigen::VectorXd &y,
                             const PriorSpec &prior) {
    ld out = 0.0L;
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        ld eta = 0.0L;
        for (Eigen::Index k = 0; k < x.cols(); ++k) {
            eta += beta[static_cast<std::size_t>(k)] * x(i, k);
        }
        out += y[i] > 0.5 ? -softplus(-eta) : -softplus(eta);
    }
    for (const ld b : beta) {
        out -= 0.5L * (kLnTwoPi + std::log(static_cast<ld>(prior.v0)) + b * b / prior.v0);
    }
    return out;
}

OracleResult quadrature_lml_stage1(const Eigen::MatrixXd &x, const Eigen::VectorXd &y, const PriorSpec &prior,
                                   int n_points) {
    const auto p = static_cast<std::size_t>(x.cols());
    if (p == 0 || p > 3) {
        throw DataError(ErrorCode::InvalidConfig, fmt::format("quadrature supports 1 to 3 coefficients, got {}", p));
    }
    // pilot Newton fit in long double, coordinates written out directly
    std::vector<ld> beta(p, 0.0L);
    Eigen::Matrix<ld, Eigen::Dynamic, Eigen::Dynamic> info(p, p);
    for (int iter = 0; iter < 200; ++iter) {
        Eigen::Matrix<ld, Eigen::Dynamic, 1> grad(p);
        for (std::size_t k = 0; k < p; ++k) {
            grad[static_cast<Eigen::Index>(k)] = -beta[k] / prior.v0;
        }
        info.setIdentity();
        info /= static_cast<ld>(prior.v0);
        for (Eigen::Index i = 0; i < x.rows(); ++i) {
            ld eta = 0.0L;
            for (std::size_t k = 0; k < p; ++k) {
                eta += beta[k] * x(i, static_cast<Eigen::Index>(k));
            }
            const ld mu = 1.0L / (1.0L + std::exp(-eta));
            for (Eigen::Index a = 0; a < static_cast<Eigen::Index>(p); ++a) {
                grad[a] += (y[i] - mu) * x(i, a);
                for (Eigen::Index b = 0; b < static_cast<Eigen::Index>(p); ++b) {
                    info(a, b) += mu * (1.0L - mu) * x(i, a) * x(i, b);
                }
            }
        }
        const Eigen::Matrix<ld, Eigen::Dynamic, 1> step = info.ldlt().solve(grad);
        const ld before = log_joint_stage1(beta, x, y, prior);
        ld scale = 1.0L;
        std::vector<ld> next(p);
        for (int halving = 0; halving < 60; ++halving, scale /= 2) {
            for (std::size_t k = 0; k < p; ++k) {
                next[k] = beta[k] + scale * step[static_cast<Eigen::Index>(k)];
            }
            if (log_joint_stage1(next, x, y, prior) >= before) {
                break;
            }
        }
        beta = next;
        if (grad.cwiseAbs().maxCoeff() < 1e-12L) {
            break;
        }
    }
    // integrate over whitened coordinates beta = mode + L z
    const Eigen::Matrix<ld, Eigen::Dynamic, Eigen::Dynamic> cov = info.inverse();
    const Eigen::Matrix<ld, Eigen::Dynamic, Eigen::Dynamic> l = cov.llt().matrixL();
    ld log_jacobian = 0.0L;
    for (std::size_t k = 0; k < p; ++k) {
        log_jacobian += std::log(l(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k)));
    }
    std::vector<ld> b(p);
    const LogDensity f = [&](const std::vector<long double> &z) {
        for (std::size_t a = 0; a < p; ++a) {
            b[a] = beta[a];
            for (std::size_t c = 0; c <= a; ++c) {
                b[a] += l(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(c)) * z[c];
            }
        }
        return log_joint_stage1(b, x, y, prior) + log_jacobian;
    };
    // skewed posteriors can need a wider box
    double half_width = 12.0;
    OracleResult r;
    for (int attempt = 0;; ++attempt) {
        try {
            r = quadrature_lml(f, std::vector<std::pair<double, double>>(p, {-half_width, half_width}), n_points);
            break;
        } catch (const NumericError &e) {
            if (e.code() != ErrorCode::BoundsTooNarrow || attempt == 3) {
                throw;
            }
            half_width *= 1.5;
        }
    }
    r.settings["half_width_sd"] = half_width;
    r.method = "tensor-trapezoid-stage1";
    return r;
}

long double log_joint_stage2(const Eigen::VectorXd &latent, const Eigen::MatrixXd &x,
                             const std::vector<Eigen::Index> &group, const Eigen::VectorXd &y, const PriorSpec &prior,
                             double sigma2) {
    const Eigen::Index p = x.cols();
    const Eigen::Index m = latent.size() - p;
    ld out = 0.0L;
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
        ld eta = latent[p + group[static_cast<std::size_t>(r)]];
        for (Eigen::Index k = 0; k < p; ++k) {
            eta += static_cast<ld>(x(r, k)) * latent[k];
        }
        out -= y[r] > 0.5 ? softplus(-eta) : softplus(eta);
    }
    for (Eigen::Index k = 0; k < p; ++k) {
        out -= 0.5L * (kLnTwoPi + std::log(static_cast<ld>(prior.v0)) +
                       static_cast<ld>(latent[k]) * latent[k] / prior.v0);
    }
    for (Eigen::Index g = 0; g < m; ++g) {
        out -= 0.5L * (kLnTwoPi + std::log(static_cast<ld>(sigma2)) +
                       static_cast<ld>(latent[p + g]) * latent[p + g] / sigma2);
    }
    return out;
}

// ---- importance sampling ------------------------------------------------------------

namespace {

struct TProposal {
    Eigen::VectorXd location;
    Eigen::MatrixXd chol; // lower factor of the scale
    ld log_norm = 0.0L;
    double dof = 5.0;

    TProposal(const Eigen::VectorXd &mu, const Eigen::MatrixXd &scale, double nu) : location(mu), dof(nu) {
        const auto d = static_cast<ld>(mu.size());
        if (scale.rows() != mu.size() || scale.cols() != mu.size() || !scale.allFinite()) {
            throw NumericError(ErrorCode::InvalidProposal, "proposal scale has the wrong shape");
        }
        Eigen::LLT<Eigen::MatrixXd> llt(scale);
        if (llt.info() != Eigen::Success || (llt.matrixL().toDenseMatrix().diagonal().array() <= 0).any()) {
            throw NumericError(ErrorCode::InvalidProposal, "proposal scale is not positive definite");
        }
        chol = llt.matrixL();
        ld log_det = 0.0L;
        for (Eigen::Index k = 0; k < chol.rows(); ++k) {
            log_det += 2.0L * std::log(static_cast<ld>(chol(k, k)));
        }
        log_norm = std::lgamma((nu + d) / 2) - std::lgamma(static_cast<ld>(nu) / 2) -
                   d / 2 * std::log(static_cast<ld>(nu) * 3.14159265358979323846264338327950288L) - log_det / 2;
    }

    template <typename Gen>
    Eigen::VectorXd draw(Gen &gen) const {
        std::normal_distribution<double> normal;
        std::chi_squared_distribution<double> chi2(dof);
        Eigen::VectorXd z(location.size());
        for (Eigen::Index k = 0; k < z.size(); ++k) {
            z[k] = normal(gen);
        }
        const double s = std::sqrt(dof / chi2(gen));
        return location + s * (chol * z);
    }

    ld log_density(const Eigen::VectorXd &v) const {
        const Eigen::VectorXd u = chol.triangularView<Eigen::Lower>().solve(v - location);
        const auto d = static_cast<ld>(location.size());
        return log_norm - (dof + d) / 2 * std::log1p(static_cast<ld>(u.squaredNorm()) / dof);
    }
};

OracleResult finish(const std::vector<ld> &log_w, const ImportanceSettings &settings, const std::string &method) {
    LogAccumulator acc;
    LogAccumulator acc2;
    for (ld v : log_w) {
        acc.add(v);
        acc2.add(2 * v);
    }
    const auto n = static_cast<ld>(log_w.size());
    const ld log_mean = acc.value() - std::log(n);
    const ld ess = std::exp(2 * acc.value() - acc2.value());
    if (ess < settings.min_ess) {
        throw NumericError(ErrorCode::EffectiveSampleTooSmall,
                           fmt::format("effective sample size {:.1f} below {}", static_cast<double>(ess),
                                       settings.min_ess));
    }
    // relative variance of the mean weight, which is also the sd of its log
    const ld second = std::exp(acc2.value() - std::log(n) - 2 * log_mean);
    const ld rel_var = std::max<ld>(0.0L, (second - 1.0L) / n);
    OracleResult r;
    r.value = static_cast<double>(log_mean);
    r.error_estimate = static_cast<double>(std::sqrt(rel_var));
    r.method = method;
    r.settings = {{"n_samples", static_cast<double>(settings.n_samples)},
                  {"seed", static_cast<double>(settings.seed)},
                  {"dof", settings.dof},
                  {"ess", static_cast<double>(ess)}};
    return r;
}

void check_problem(const Eigen::MatrixXd &x, const std::vector<Eigen::Index> &group, const Eigen::VectorXd &y) {
    if (static_cast<Eigen::Index>(group.size()) != x.rows() || y.size() != x.rows()) {
        throw NumericError(ErrorCode::DimensionMismatch, "rows, groups and outcomes disagree");
    }
}

} // namespace

OracleResult importance_lml(const Eigen::MatrixXd &x, const std::vector<Eigen::Index> &group, const Eigen::VectorXd &y,
                            const PriorSpec &prior, const FitResult &fit, const ImportanceSettings &settings) {
    check_problem(x, group, y);
    const auto &grid = fit.sigma2_grid;
    if (grid.size() < 2) {
        throw NumericError(ErrorCode::InvalidProposal, "importance sampling needs a fitted sigma2 grid");
    }
    const std::size_t k = grid.size();
    std::vector<double> t(k);
    for (std::size_t j = 0; j < k; ++j) {
        t[j] = std::log(grid[j].sigma2);
    }
    // cells around each grid node
    std::vector<double> lo(k);
    std::vector<double> hi(k);
    for (std::size_t j = 0; j < k; ++j) {
        lo[j] = j == 0 ? t[0] - (t[1] - t[0]) / 2 : (t[j - 1] + t[j]) / 2;
        hi[j] = j + 1 == k ? t[k - 1] + (t[k - 1] - t[k - 2]) / 2 : (t[j] + t[j + 1]) / 2;
    }
    const double env_lo = lo.front() - settings.envelope_margin;
    const double env_hi = hi.back() + settings.envelope_margin;
    std::vector<double> cell_w(k);
    for (std::size_t j = 0; j < k; ++j) {
        cell_w[j] = grid[j].weight;
    }
    const double pe = settings.envelope_probability;
    auto log_q_t = [&](double v) {
        ld dens = pe / (env_hi - env_lo);
        for (std::size_t j = 0; j < k; ++j) {
            if (v >= lo[j] && v < hi[j]) {
                dens += (1 - pe) * cell_w[j] / (hi[j] - lo[j]);
            }
        }
        return std::log(dens);
    };
    std::vector<TProposal> proposals;
    proposals.reserve(k);
    for (const auto &gp : grid) {
        proposals.emplace_back(gp.mode, gp.covariance, settings.dof);
    }

    std::mt19937_64 gen(settings.seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::discrete_distribution<std::size_t> pick(cell_w.begin(), cell_w.end());
    std::vector<ld> log_w(static_cast<std::size_t>(settings.n_samples));
    for (auto &w : log_w) {
        double tv = 0.0;
        if (unit(gen) < pe) {
            tv = env_lo + (env_hi - env_lo) * unit(gen);
        } else {
            const auto j = pick(gen);
            tv = lo[j] + (hi[j] - lo[j]) * unit(gen);
        }
        const auto nearest = static_cast<std::size_t>(
            std::min_element(t.begin(), t.end(), [&](double a, double b) { return std::fabs(a - tv) < std::fabs(b - tv); }) -
            t.begin());
        const auto &q = proposals[nearest];
        const Eigen::VectorXd theta = q.draw(gen);
        const double sigma2 = std::exp(tv);
        const ld log_prior_s2 = prior.a * std::log(static_cast<ld>(prior.b)) - std::lgamma(static_cast<ld>(prior.a)) -
                                (prior.a + 1) * static_cast<ld>(tv) - prior.b / static_cast<ld>(sigma2);
        w = log_joint_stage2(theta, x, group, y, prior, sigma2) + log_prior_s2 + tv - log_q_t(tv) -
            q.log_density(theta);
    }
    return finish(log_w, settings, "importance-t-mixture");
}

OracleResult importance_lml_fixed_sigma2(const Eigen::MatrixXd &x, const std::vector<Eigen::Index> &group,
                                         const Eigen::VectorXd &y, const PriorSpec &prior, double sigma2,
                                         const Eigen::VectorXd &location, const Eigen::MatrixXd &scale,
                                         const ImportanceSettings &settings) {
    check_problem(x, group, y);
    if (!(sigma2 > 0)) {
        throw NumericError(ErrorCode::NonpositiveSigma2, fmt::format("sigma2 = {}", sigma2));
    }
    const TProposal q(location, scale, settings.dof);
    std::mt19937_64 gen(settings.seed);
    std::vector<ld> log_w(static_cast<std::size_t>(settings.n_samples));
    for (auto &w : log_w) {
        const Eigen::VectorXd theta = q.draw(gen);
        w = log_joint_stage2(theta, x, group, y, prior, sigma2) - q.log_density(theta);
    }
    return finish(log_w, settings, "importance-t");
}

// ---- AUC -------------------------------------------------------------------------

OracleResult pair_count_auc(const std::vector<int> &labels, const std::vector<double> &scores) {
    if (labels.size() != scores.size()) {
        throw NumericError(ErrorCode::DimensionMismatch, "labels and scores differ in length");
    }
    std::uint64_t greater = 0;
    std::uint64_t equal = 0;
    std::uint64_t n_pos = 0;
    std::uint64_t n_neg = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] != 1) {
            ++n_neg;
            continue;
        }
        ++n_pos;
        for (std::size_t j = 0; j < labels.size(); ++j) {
            if (labels[j] == 1) {
                continue;
            }
            if (scores[i] > scores[j]) {
                ++greater;
            } else if (scores[i] == scores[j]) {
                ++equal;
            }
        }
    }
    if (n_pos == 0 || n_neg == 0) {
        throw DataError(ErrorCode::SingleClass, "both outcome classes are required");
    }
    OracleResult r;
    r.value = static_cast<double>(2 * greater + equal) / static_cast<double>(2 * n_pos * n_neg);
    r.method = "pair-count";
    r.settings = {{"n", static_cast<double>(labels.size())}};
    return r;
}

// ---- finite differences ---------------------------------------------------------------

Eigen::VectorXd fd_gradient(const std::function<double(const Eigen::VectorXd &)> &f, const Eigen::VectorXd &x) {
    Eigen::VectorXd g(x.size());
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        const double h = 1e-3 * std::max(1.0, std::fabs(x[i]));
        auto central = [&](double step) {
            Eigen::VectorXd a = x;
            Eigen::VectorXd b = x;
            a[i] += step;
            b[i] -= step;
            return (f(a) - f(b)) / (2 * step);
        };
        g[i] = (4 * central(h / 2) - central(h)) / 3;
    }
    return g;
}

Eigen::MatrixXd fd_jacobian(const std::function<Eigen::VectorXd(const Eigen::VectorXd &)> &f,
                            const Eigen::VectorXd &x) {
    Eigen::MatrixXd j;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        const double h = 1e-3 * std::max(1.0, std::fabs(x[i]));
        auto central = [&](double step) {
            Eigen::VectorXd a = x;
            Eigen::VectorXd b = x;
            a[i] += step;
            b[i] -= step;
            return Eigen::VectorXd((f(a) - f(b)) / (2 * step));
        };
        const Eigen::VectorXd col = (4 * central(h / 2) - central(h)) / 3;
        if (i == 0) {
            j.resize(col.size(), x.size());
        }
        j.col(i) = col;
    }
    return j;
}

Eigen::MatrixXd fd_hessian(const std::function<double(const Eigen::VectorXd &)> &f, const Eigen::VectorXd &x) {
    const Eigen::Index n = x.size();
    Eigen::MatrixXd h(n, n);
    const double f0 = f(x);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double hi = 1e-3 * std::max(1.0, std::fabs(x[i]));
        Eigen::VectorXd a = x;
        Eigen::VectorXd b = x;
        a[i] += hi;
        b[i] -= hi;
        h(i, i) = (f(a) - 2 * f0 + f(b)) / (hi * hi);
        for (Eigen::Index j = 0; j < i; ++j) {
            const double hj = 1e-3 * std::max(1.0, std::fabs(x[j]));
            Eigen::VectorXd pp = x, pm = x, mp = x, mm = x;
            pp[i] += hi, pp[j] += hj;
            pm[i] += hi, pm[j] -= hj;
            mp[i] -= hi, mp[j] += hj;
            mm[i] -= hi, mm[j] -= hj;
            h(i, j) = h(j, i) = (f(pp) - f(pm) - f(mp) + f(mm)) / (4 * hi * hj);
        }
    }
    return h;
}

// ---- extended precision -------------------------------------------------------------

double hp_inv_logit(double eta) {
    const hp one = 1;
    return static_cast<double>(one / (one + boost::multiprecision::exp(-hp(eta))));
}

double hp_log_likelihood_stage1(const Eigen::VectorXd &beta, const Eigen::MatrixXd &x, const Eigen::VectorXd &y) {
    if (x.cols() != beta.size() || x.rows() != y.size()) {
        throw NumericError(ErrorCode::DimensionMismatch, "design, coefficients and outcomes disagree");
    }
    hp total = 0;
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        hp eta = 0;
        for (Eigen::Index k = 0; k < x.cols(); ++k) {
            eta += hp(x(i, k)) * hp(beta[k]);
        }
        const hp mu = 1 / (1 + boost::multiprecision::exp(-eta));
        total += y[i] > 0.5 ? boost::multiprecision::log(mu) : boost::multiprecision::log(1 - mu);
    }
    return static_cast<double>(total);
}

double hp_log_inverse_gamma(double sigma2, double a, double b) {
    const hp s(sigma2), ha(a), hb(b);
    return static_cast<double>(ha * boost::multiprecision::log(hb) - boost::multiprecision::lgamma(ha) -
                               (ha + 1) * boost::multiprecision::log(s) - hb / s);
}

std::vector<double> hp_softmax(const std::vector<double> &v) {
    std::vector<hp> e;
    hp total = 0;
    for (double x : v) {
        e.push_back(boost::multiprecision::exp(hp(x)));
        total += e.back();
    }
    std::vector<double> out;
    for (const auto &x : e) {
        out.push_back(static_cast<double>(x / total));
    }
    return out;
}

// ---- Gauss-Hermite -----------------------------------------------------------------

std::pair<std::vector<double>, std::vector<double>> gauss_hermite(int n) {
    if (n < 1) {
        throw DataError(ErrorCode::InvalidConfig, "Gauss-Hermite needs at least one node");
    }
    Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(n, n);
    for (int k = 1; k < n; ++k) {
        jacobi(k, k - 1) = jacobi(k - 1, k) = std::sqrt(k / 2.0);
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(jacobi);
    std::vector<double> nodes(static_cast<std::size_t>(n));
    std::vector<double> weights(static_cast<std::size_t>(n));
    const double root_pi = std::sqrt(3.14159265358979323846);
    for (int k = 0; k < n; ++k) {
        nodes[static_cast<std::size_t>(k)] = eig.eigenvalues()[k];
        const double v = eig.eigenvectors()(0, k);
        weights[static_cast<std::size_t>(k)] = root_pi * v * v;
    }
    return {nodes, weights};
}

double expected_inv_logit(double eta, double sigma2, int n_nodes) {
    const auto [nodes, weights] = gauss_hermite(n_nodes);
    const ld scale = std::sqrt(2.0L * sigma2);
    ld acc = 0.0L;
    for (std::size_t k = 0; k < nodes.size(); ++k) {
        acc += weights[k] / (1.0L + std::exp(-(eta + scale * nodes[k])));
    }
    return static_cast<double>(acc / std::sqrt(3.14159265358979323846264338327950288L));
}

double golden_section_max(const std::function<double(double)> &f, double lo, double hi, double tol) {
    const double r = (std::sqrt(5.0) - 1) / 2;
    double a = hi - r * (hi - lo);
    double b = lo + r * (hi - lo);
    double fa = f(a);
    double fb = f(b);
    while (hi - lo > tol) {
        if (fa < fb) {
            lo = a;
            a = b;
            fa = fb;
            b = lo + r * (hi - lo);
            fb = f(b);
        } else {
            hi = b;
            b = a;
            fb = fa;
            a = hi - r * (hi - lo);
            fa = f(a);
        }
    }
    return (lo + hi) / 2;
}

} // namespace blr::oracle

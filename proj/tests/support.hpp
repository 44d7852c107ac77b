#pragma once

#include "blr/datamodel.hpp"
#include "blr/glm_core.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace blr::testing {

// Stage One design: intercept plus standard normal covariates, outcomes from beta.
inline DesignMatrix random_stage1(std::uint64_t seed, int n, const std::vector<double> &beta) {
    std::mt19937_64 gen(seed);
    std::normal_distribution<double> normal;
    std::uniform_real_distribution<double> unit;
    DesignMatrix d;
    d.stage = Stage::One;
    const auto p = static_cast<Eigen::Index>(beta.size());
    d.x.resize(n, p);
    d.outcome.resize(n);
    d.column_names.push_back("(intercept)");
    for (Eigen::Index k = 1; k < p; ++k) {
        d.column_names.push_back("x" + std::to_string(k));
        d.variables.push_back("x" + std::to_string(k));
    }
    for (int i = 0; i < n; ++i) {
        double eta = 0.0;
        for (Eigen::Index k = 0; k < p; ++k) {
            d.x(i, k) = k == 0 ? 1.0 : normal(gen);
            eta += d.x(i, k) * beta[static_cast<std::size_t>(k)];
        }
        d.outcome[i] = unit(gen) < inv_logit(eta) ? 1.0 : 0.0;
        d.row_ids.push_back("R" + std::to_string(i + 1));
    }
    return d;
}

// Stage Two design: m patients with 1..max_falls falls each, one normal covariate.
inline DesignMatrix random_stage2(std::uint64_t seed, int m, int max_falls, double intercept, double slope,
                                  double sigma2) {
    std::mt19937_64 gen(seed);
    std::normal_distribution<double> normal;
    std::uniform_real_distribution<double> unit;
    std::uniform_int_distribution<int> count(1, max_falls);
    DesignMatrix d;
    d.stage = Stage::Two;
    d.variables = {"x1"};
    d.column_names = {"(intercept)", "x1"};
    std::vector<double> xs;
    std::vector<double> ys;
    for (int g = 0; g < m; ++g) {
        const double eps = std::sqrt(sigma2) * normal(gen);
        const int k = count(gen);
        for (int r = 1; r <= k; ++r) {
            const double x = normal(gen);
            xs.push_back(x);
            ys.push_back(unit(gen) < inv_logit(intercept + slope * x + eps) ? 1.0 : 0.0);
            d.row_ids.push_back("P" + std::to_string(g + 1) + "#" + std::to_string(r));
            d.patient_of_row.push_back(static_cast<std::size_t>(g));
        }
    }
    const auto n = static_cast<Eigen::Index>(xs.size());
    d.x.resize(n, 2);
    d.outcome.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        d.x(i, 0) = 1.0;
        d.x(i, 1) = xs[static_cast<std::size_t>(i)];
        d.outcome[i] = ys[static_cast<std::size_t>(i)];
    }
    return d;
}

// Schema of n continuous baseline variables x1..xn.
inline std::vector<CovariateSchema> continuous_schema(int n) {
    std::vector<CovariateSchema> s;
    for (int k = 1; k <= n; ++k) {
        CovariateSchema v;
        v.name = "x" + std::to_string(k);
        s.push_back(v);
    }
    return s;
}

// Cohort with standard normal x1..xn and fell drawn from the given Stage One effects.
inline CohortDataset simulated_cohort(std::uint64_t seed, std::size_t n_patients, int n_vars, double intercept,
                                      const std::map<std::string, double> &effects) {
    SimulationConfig c;
    c.seed = seed;
    c.n_patients = n_patients;
    for (int k = 1; k <= n_vars; ++k) {
        c.covariates["x" + std::to_string(k)] = Marginal{};
    }
    c.stage1.intercept = intercept;
    c.stage1.coefficients = effects;
    c.falls_per_faller.kind = FallCountDistribution::Kind::Fixed;
    c.falls_per_faller.count = 1;
    return simulate(c, continuous_schema(n_vars));
}

inline std::vector<int> labels_of(const Eigen::VectorXd &y) {
    std::vector<int> out;
    for (Eigen::Index i = 0; i < y.size(); ++i) {
        out.push_back(y[i] > 0.5 ? 1 : 0);
    }
    return out;
}

} // namespace blr::testing

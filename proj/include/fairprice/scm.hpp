// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "fairprice/common.hpp"
#include "fairprice/dataset.hpp"
#include "fairprice/gower.hpp"
#include "fairprice/linalg.hpp"

namespace fairprice::fair {

// Euclidean projection onto the probability simplex (Duchi et al.).
inline void project_simplex(std::vector<double>& w) {
    const std::size_t k = w.size();
    std::vector<double> u(w);
    std::sort(u.begin(), u.end(), std::greater<>());
    double css = 0.0, theta = 0.0;
    std::size_t rho = 0;
    for (std::size_t i = 0; i < k; ++i) {
        css += u[i];
        const double t = (css - 1.0) / static_cast<double>(i + 1);
        if (u[i] - t > 0.0) {
            rho = i + 1;
            theta = t;
        }
    }
    (void)rho;
    for (double& x : w) x = std::max(x - theta, 0.0);
    // tidy the sum so downstream arithmetic sees an exact simplex point
    double s = std::accumulate(w.begin(), w.end(), 0.0);
    if (s > 0.0)
        for (double& x : w) x /= s;
}

struct ScmSolution {
    std::vector<double> weights;
    double objective = 0.0;  // V-weighted residual norm at the solution
    int iterations = 0;
};

// Donor weights minimizing sqrt((x0 - D'W)' V (x0 - D'W)) over the simplex
// {W >= 0, sum W = 1}. Projected gradient from the best single-donor vertex;
// the step uses a spectral upper bound of the quadratic's Hessian.
inline ScmSolution scm_weights(const std::vector<double>& x0, const Matrix& donors,
                               const std::vector<double>& v, int max_iter = 2000) {
    const std::size_t k = donors.rows();
    const std::size_t p = donors.cols();
    if (k == 0) throw DomainError("scm_weights: empty donor pool");
    if (x0.size() != p) throw DomainError("scm_weights: feature dimension mismatch");
    if (v.size() != p) throw DomainError("scm_weights: V dimension mismatch");
    double vsum = 0.0;
    for (double vi : v) {
        if (vi < 0.0) throw DomainError("scm_weights: V must be nonnegative");
        vsum += vi;
    }
    if (std::abs(vsum - 1.0) > 1e-6) throw DomainError("scm_weights: V must sum to 1");

    const auto objective_sq = [&](const std::vector<double>& w) {
        double f = 0.0;
        for (std::size_t l = 0; l < p; ++l) {
            double fitted = 0.0;
            for (std::size_t j = 0; j < k; ++j) fitted += w[j] * donors(j, l);
            const double r = x0[l] - fitted;
            f += v[l] * r * r;
        }
        return f;
    };

    // warm start: best single donor
    std::vector<double> w(k, 0.0);
    {
        std::size_t best = 0;
        double best_f = std::numeric_limits<double>::infinity();
        std::vector<double> e(k, 0.0);
        for (std::size_t j = 0; j < k; ++j) {
            e[j] = 1.0;
            const double f = objective_sq(e);
            if (f < best_f) {
                best_f = f;
                best = j;
            }
            e[j] = 0.0;
        }
        w[best] = 1.0;
    }

    // Hessian of the squared objective is 2 D V D'; bound its spectral norm
    // by min(trace, Frobenius)
    double trace = 0.0, frob2 = 0.0;
    {
        Matrix h(k, k);
        for (std::size_t a = 0; a < k; ++a)
            for (std::size_t b = 0; b <= a; ++b) {
                double s = 0.0;
                for (std::size_t l = 0; l < p; ++l) s += v[l] * donors(a, l) * donors(b, l);
                h(a, b) = 2.0 * s;
                h(b, a) = 2.0 * s;
            }
        for (std::size_t a = 0; a < k; ++a) {
            trace += h(a, a);
            for (std::size_t b = 0; b < k; ++b) frob2 += h(a, b) * h(a, b);
        }
    }
    const double lipschitz = std::max(std::min(trace, std::sqrt(frob2)), 1e-12);
    const double step = 1.0 / lipschitz;

    ScmSolution sol;
    double f = objective_sq(w);
    const double tol = 1e-10 * std::max(1.0, f);
    std::vector<double> grad(k), fitted(p);
    int iter = 0;
    for (; iter < max_iter && f > 1e-18; ++iter) {
        for (std::size_t l = 0; l < p; ++l) {
            double s = 0.0;
            for (std::size_t j = 0; j < k; ++j) s += w[j] * donors(j, l);
            fitted[l] = s;
        }
        for (std::size_t j = 0; j < k; ++j) {
            double g = 0.0;
            for (std::size_t l = 0; l < p; ++l)
                g -= 2.0 * v[l] * (x0[l] - fitted[l]) * donors(j, l);
            grad[j] = g;
        }
        for (std::size_t j = 0; j < k; ++j) w[j] -= step * grad[j];
        project_simplex(w);
        const double f_new = objective_sq(w);
        const double improvement = f - f_new;
        f = f_new;
        if (improvement < tol && improvement >= 0.0) break;
    }
    sol.weights = std::move(w);
    sol.objective = std::sqrt(std::max(f, 0.0));
    sol.iterations = iter;
    return sol;
}

struct ScmRow {
    double y_counterfactual = 0.0;
    double y_prime = 0.0;
    double objective = 0.0;
    std::vector<std::pair<std::size_t, double>> weights;  // (donor row, weight), sparse
};

struct ScmAdjustment {
    std::vector<ScmRow> rows;
    std::vector<double> v;  // diagonal importance weights over design columns

    std::vector<double> adjusted_targets() const {
        std::vector<double> out(rows.size());
        for (std::size_t i = 0; i < rows.size(); ++i) out[i] = rows[i].y_prime;
        return out;
    }
};

struct ScmParams {
    std::size_t donor_k = 50;  // Gower-nearest opposite-group rows per solve
    int max_iter = 2000;
};

// Feature matrix for SCM matching: the non-protected design with numeric
// columns rescaled to [0,1] by the training ranges, mirroring Gower scaling
// so the importance weights V act on comparable coordinates.
inline Matrix scm_feature_matrix(const data::Dataset& ds, const data::Encoder& enc) {
    auto mm = enc.encode(ds);
    for (std::size_t c = 0; c < mm.column_names.size(); ++c) {
        const auto it = ds.numeric_ranges.find(mm.column_names[c]);
        if (it == ds.numeric_ranges.end() || it->second.span() <= 0.0) continue;
        for (std::size_t i = 0; i < mm.design.rows(); ++i)
            mm.design(i, c) = (mm.design(i, c) - it->second.min) / it->second.span();
    }
    return mm.design;
}

// Per-row counterfactual claims from opposite-group donors and the adjusted
// target Y' = (Y0 + Ycf) / 2.
inline ScmAdjustment scm_adjust(const data::Dataset& ds, const data::Encoder& enc,
                                const std::vector<double>& importances,
                                const ScmParams& params = {}) {
    const std::size_t n = ds.n_rows();
    const auto mask = ds.group_a_mask();
    const auto& y = ds.target();
    const Matrix x = scm_feature_matrix(ds, enc);
    if (importances.size() != x.cols())
        throw DomainError("scm_adjust: importance vector does not match design width");

    std::vector<std::size_t> group_a, group_b;
    for (std::size_t i = 0; i < n; ++i) (mask[i] > 0.5 ? group_a : group_b).push_back(i);
    if (group_a.empty() || group_b.empty())
        throw DomainError("scm_adjust: both sensitive groups must be non-empty");

    data::GowerContext gower(ds);
    ScmAdjustment adj;
    adj.v = importances;
    adj.rows.resize(n);

    parallel_for(n, [&](std::size_t i) {
        const auto& donors_idx_all = mask[i] > 0.5 ? group_b : group_a;
        const auto nearest = gower.k_nearest(i, donors_idx_all, params.donor_k);
        Matrix donors(nearest.size(), x.cols());
        for (std::size_t j = 0; j < nearest.size(); ++j)
            for (std::size_t c = 0; c < x.cols(); ++c)
                donors(j, c) = x(nearest[j].first, c);
        std::vector<double> x0(x.cols());
        for (std::size_t c = 0; c < x.cols(); ++c) x0[c] = x(i, c);

        const auto sol = scm_weights(x0, donors, importances, params.max_iter);
        ScmRow row;
        row.objective = sol.objective;
        double ycf = 0.0;
        for (std::size_t j = 0; j < nearest.size(); ++j) {
            ycf += sol.weights[j] * y[nearest[j].first];
            if (sol.weights[j] > 1e-12) row.weights.emplace_back(nearest[j].first, sol.weights[j]);
        }
        row.y_counterfactual = ycf;
        row.y_prime = 0.5 * (y[i] + ycf);
        adj.rows[i] = std::move(row);
    });
    return adj;
}

}  // namespace fairprice::fair

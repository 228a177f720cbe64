// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include <json.hpp>

#include "fairprice/common.hpp"
#include "fairprice/dataset.hpp"

namespace fairprice::model {

enum class GbtLoss { SquaredError, PoissonDeviance, GammaDeviance };

inline std::string to_string(GbtLoss l) {
    switch (l) {
        case GbtLoss::SquaredError: return "squared_error";
        case GbtLoss::PoissonDeviance: return "poisson";
        case GbtLoss::GammaDeviance: return "gamma";
    }
    throw DomainError("bad loss");
}

inline GbtLoss gbt_loss_from_string(const std::string& s) {
    if (s == "squared_error") return GbtLoss::SquaredError;
    if (s == "poisson") return GbtLoss::PoissonDeviance;
    if (s == "gamma") return GbtLoss::GammaDeviance;
    throw DomainError("unknown loss: " + s);
}

struct GbtParams {
    int n_trees = 200;
    int max_depth = 4;
    double learning_rate = 0.1;
    int min_leaf = 20;
    double lambda_l2 = 1.0;

    void validate() const {
        if (n_trees < 0) throw DomainError("gbt: n_trees must be >= 0");
        if (max_depth < 1) throw DomainError("gbt: max_depth must be >= 1");
        if (!(learning_rate > 0.0 && learning_rate <= 1.0))
            throw DomainError("gbt: learning_rate must lie in (0,1]");
        if (min_leaf < 1) throw DomainError("gbt: min_leaf must be >= 1");
        if (lambda_l2 < 0.0) throw DomainError("gbt: lambda_l2 must be >= 0");
    }
};

// Flat binary tree; children index into the node vector.
struct GbtNode {
    bool is_leaf = true;
    int feature = -1;
    double threshold = 0.0;  // x[feature] < threshold goes left
    int left = -1;
    int right = -1;
    double value = 0.0;  // leaf weight (raw-score increment before shrinkage)
};

struct GbtTree {
    std::vector<GbtNode> nodes;

    double eval(const double* row) const {
        int idx = 0;
        while (!nodes[idx].is_leaf)
            idx = row[nodes[idx].feature] < nodes[idx].threshold ? nodes[idx].left
                                                                 : nodes[idx].right;
        return nodes[idx].value;
    }
};

// Second-order boosted regression trees with exact greedy split search and
// L2 leaf regularization. Deviance losses model the log of the mean: the
// prediction is exp(raw score), which keeps premiums strictly positive.
struct GbtModel {
    GbtLoss loss = GbtLoss::SquaredError;
    GbtParams params;
    double base_score = 0.0;  // raw-score offset
    std::vector<GbtTree> trees;
    std::vector<double> train_loss;  // per-round mean training loss, round 0 = base
    std::size_t n_features = 0;

    bool log_output() const { return loss != GbtLoss::SquaredError; }
};

namespace gbt_detail {

inline void grad_hess(GbtLoss loss, double y, double f, double w, double& g, double& h) {
    switch (loss) {
        case GbtLoss::SquaredError:
            g = w * (f - y);
            h = w;
            return;
        case GbtLoss::PoissonDeviance: {
            const double mu = std::exp(std::min(f, 700.0));
            g = w * (mu - y);
            h = w * mu;
            return;
        }
        case GbtLoss::GammaDeviance: {
            const double e = std::exp(-std::min(std::max(f, -700.0), 700.0));
            g = w * (1.0 - y * e);
            h = w * (y * e);
            return;
        }
    }
}

inline double mean_loss(GbtLoss loss, const std::vector<double>& y, const std::vector<double>& f,
                        const std::vector<double>& w) {
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        double li = 0.0;
        switch (loss) {
            case GbtLoss::SquaredError: li = 0.5 * (y[i] - f[i]) * (y[i] - f[i]); break;
            case GbtLoss::PoissonDeviance: li = std::exp(std::min(f[i], 700.0)) - y[i] * f[i]; break;
            case GbtLoss::GammaDeviance: li = y[i] * std::exp(-f[i]) + f[i]; break;
        }
        num += w[i] * li;
        den += w[i];
    }
    return num / den;
}

struct SplitResult {
    bool found = false;
    int feature = -1;
    double threshold = 0.0;
    double gain = 0.0;
};

inline double leaf_objective(double g, double h, double lambda) {
    return g * g / (h + lambda);
}

// Exact greedy search over one node's rows.
inline SplitResult best_split(const Matrix& x, const std::vector<double>& grad,
                              const std::vector<double>& hess,
                              const std::vector<int>& rows, const GbtParams& params) {
    SplitResult best;
    double g_total = 0.0, h_total = 0.0;
    for (int r : rows) {
        g_total += grad[r];
        h_total += hess[r];
    }
    const double parent_obj = leaf_objective(g_total, h_total, params.lambda_l2);

    std::vector<std::pair<double, int>> order(rows.size());
    for (std::size_t f = 0; f < x.cols(); ++f) {
        for (std::size_t k = 0; k < rows.size(); ++k)
            order[k] = {x(static_cast<std::size_t>(rows[k]), f), rows[k]};
        std::sort(order.begin(), order.end());
        double g_left = 0.0, h_left = 0.0;
        for (std::size_t k = 0; k + 1 < order.size(); ++k) {
            g_left += grad[order[k].second];
            h_left += hess[order[k].second];
            if (order[k].first == order[k + 1].first) continue;  // no boundary here
            const std::size_t n_left = k + 1;
            const std::size_t n_right = order.size() - n_left;
            if (n_left < static_cast<std::size_t>(params.min_leaf) ||
                n_right < static_cast<std::size_t>(params.min_leaf))
                continue;
            const double g_right = g_total - g_left;
            const double h_right = h_total - h_left;
            const double gain = leaf_objective(g_left, h_left, params.lambda_l2) +
                                leaf_objective(g_right, h_right, params.lambda_l2) - parent_obj;
            if (gain > best.gain + 1e-12) {
                best.found = true;
                best.feature = static_cast<int>(f);
                best.threshold = 0.5 * (order[k].first + order[k + 1].first);
                best.gain = gain;
            }
        }
    }
    return best;
}

inline int grow(GbtTree& tree, const Matrix& x, const std::vector<double>& grad,
                const std::vector<double>& hess, std::vector<int> rows, int depth,
                const GbtParams& params) {
    const int idx = static_cast<int>(tree.nodes.size());
    tree.nodes.emplace_back();
    double g = 0.0, h = 0.0;
    for (int r : rows) {
        g += grad[r];
        h += hess[r];
    }
    SplitResult split;
    if (depth < params.max_depth &&
        rows.size() >= 2 * static_cast<std::size_t>(params.min_leaf))
        split = best_split(x, grad, hess, rows, params);
    if (!split.found) {
        tree.nodes[idx].value = -g / (h + params.lambda_l2);
        return idx;
    }
    std::vector<int> left, right;
    for (int r : rows)
        (x(static_cast<std::size_t>(r), static_cast<std::size_t>(split.feature)) < split.threshold
             ? left
             : right)
            .push_back(r);
    rows.clear();
    rows.shrink_to_fit();
    const int l = grow(tree, x, grad, hess, std::move(left), depth + 1, params);
    const int r = grow(tree, x, grad, hess, std::move(right), depth + 1, params);
    tree.nodes[idx].is_leaf = false;
    tree.nodes[idx].feature = split.feature;
    tree.nodes[idx].threshold = split.threshold;
    tree.nodes[idx].left = l;
    tree.nodes[idx].right = r;
    return idx;
}

}  // namespace gbt_detail

inline GbtModel gbt_fit(const data::ModelMatrix& mm, const std::vector<double>& y, GbtLoss loss,
                        const GbtParams& params, const std::vector<double>& prior_weights = {}) {
    params.validate();
    const std::size_t n = mm.design.rows();
    if (y.size() != n) throw DomainError("gbt_fit: target length mismatch");
    if (params.n_trees > 0 && n < 2 * static_cast<std::size_t>(params.min_leaf))
        throw DomainError("gbt_fit: need at least 2*min_leaf rows");
    std::vector<double> w(prior_weights);
    if (w.empty()) w.assign(n, 1.0);
    if (w.size() != n) throw DomainError("gbt_fit: weight length mismatch");
    double wsum = 0.0, wy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (loss != GbtLoss::SquaredError && y[i] < 0.0)
            throw DomainError("gbt_fit: negative response under deviance loss");
        if (loss == GbtLoss::GammaDeviance && w[i] > 0.0 && y[i] <= 0.0)
            throw DomainError("gbt_fit: Gamma requires strictly positive response");
        wsum += w[i];
        wy += w[i] * y[i];
    }

    GbtModel m;
    m.loss = loss;
    m.params = params;
    m.n_features = mm.design.cols();
    const double ybar = std::max(wy / wsum, 1e-10);
    m.base_score = m.log_output() ? std::log(ybar) : ybar;

    std::vector<double> f(n, m.base_score), grad(n), hess(n);
    m.train_loss.push_back(gbt_detail::mean_loss(loss, y, f, w));
    std::vector<int> all_rows(n);
    std::iota(all_rows.begin(), all_rows.end(), 0);

    for (int t = 0; t < params.n_trees; ++t) {
        for (std::size_t i = 0; i < n; ++i)
            gbt_detail::grad_hess(loss, y[i], f[i], w[i], grad[i], hess[i]);
        GbtTree tree;
        gbt_detail::grow(tree, mm.design, grad, hess, all_rows, 0, params);
        for (std::size_t i = 0; i < n; ++i)
            f[i] += params.learning_rate * tree.eval(mm.design.row(i));
        m.trees.push_back(std::move(tree));
        m.train_loss.push_back(gbt_detail::mean_loss(loss, y, f, w));
    }
    return m;
}

inline std::vector<double> gbt_predict(const GbtModel& m, const data::ModelMatrix& mm) {
    if (mm.design.cols() != m.n_features)
        throw DomainError("gbt_predict: design has " + std::to_string(mm.design.cols()) +
                          " columns, model expects " + std::to_string(m.n_features));
    std::vector<double> out(mm.design.rows(), m.base_score);
    for (std::size_t i = 0; i < mm.design.rows(); ++i) {
        const double* row = mm.design.row(i);
        for (const auto& tree : m.trees) out[i] += m.params.learning_rate * tree.eval(row);
        if (m.log_output()) out[i] = std::exp(std::min(out[i], 700.0));
    }
    return out;
}

inline nlohmann::json to_json(const GbtModel& m) {
    nlohmann::json trees = nlohmann::json::array();
    for (const auto& t : m.trees) {
        nlohmann::json nodes = nlohmann::json::array();
        for (const auto& nd : t.nodes) {
            nodes.push_back({{"leaf", nd.is_leaf},
                             {"feature", nd.feature},
                             {"threshold", nd.threshold},
                             {"left", nd.left},
                             {"right", nd.right},
                             {"value", nd.value}});
        }
        trees.push_back(std::move(nodes));
    }
    return nlohmann::json{{"type", "gbt"},
                          {"version", 1},
                          {"loss", to_string(m.loss)},
                          {"base_score", m.base_score},
                          {"learning_rate", m.params.learning_rate},
                          {"n_features", m.n_features},
                          {"trees", trees}};
}

inline GbtModel gbt_from_json(const nlohmann::json& j) {
    GbtModel m;
    m.loss = gbt_loss_from_string(j.at("loss"));
    m.base_score = j.at("base_score").get<double>();
    m.params.learning_rate = j.at("learning_rate").get<double>();
    m.n_features = j.at("n_features").get<std::size_t>();
    for (const auto& jt : j.at("trees")) {
        GbtTree t;
        for (const auto& jn : jt) {
            GbtNode nd;
            nd.is_leaf = jn.at("leaf").get<bool>();
            nd.feature = jn.at("feature").get<int>();
            nd.threshold = jn.at("threshold").get<double>();
            nd.left = jn.at("left").get<int>();
            nd.right = jn.at("right").get<int>();
            nd.value = jn.at("value").get<double>();
            t.nodes.push_back(nd);
        }
        m.trees.push_back(std::move(t));
    }
    return m;
}

}  // namespace fairprice::model

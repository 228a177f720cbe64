// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include <json.hpp>

#include "fairprice/common.hpp"
#include "fairprice/dataset.hpp"

namespace fairprice::model {

struct ForestParams {
    int n_trees = 100;
    int mtry = 0;  // 0 -> max(1, p/3)
    int min_leaf = 5;
    int max_depth = 25;
    std::uint64_t seed = 0;

    void validate() const {
        if (n_trees < 1) throw DomainError("forest: n_trees must be >= 1");
        if (min_leaf < 1) throw DomainError("forest: min_leaf must be >= 1");
        if (max_depth < 1) throw DomainError("forest: max_depth must be >= 1");
    }
};

struct ForestNode {
    bool is_leaf = true;
    int feature = -1;
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    double value = 0.0;
};

struct ForestTree {
    std::vector<ForestNode> nodes;

    double eval(const double* row) const {
        int idx = 0;
        while (!nodes[idx].is_leaf)
            idx = row[nodes[idx].feature] < nodes[idx].threshold ? nodes[idx].left
                                                                 : nodes[idx].right;
        return nodes[idx].value;
    }
};

// CART regression forest on bootstrap samples. Importances are the total
// variance reduction credited to each feature, normalized to sum to one.
struct ForestModel {
    ForestParams params;
    std::vector<ForestTree> trees;
    std::vector<double> importances;
    std::size_t n_features = 0;
};

namespace forest_detail {

struct NodeStats {
    double sum = 0.0;
    double sum2 = 0.0;
    std::size_t n = 0;
    double sse() const {
        return n == 0 ? 0.0 : sum2 - sum * sum / static_cast<double>(n);
    }
};

inline int grow(ForestTree& tree, const Matrix& x, const std::vector<double>& y,
                std::vector<int> rows, int depth, const ForestParams& params, int mtry,
                Rng& rng, std::vector<double>& importance) {
    const int idx = static_cast<int>(tree.nodes.size());
    tree.nodes.emplace_back();
    NodeStats stats;
    for (int r : rows) {
        stats.sum += y[r];
        stats.sum2 += y[r] * y[r];
        ++stats.n;
    }
    tree.nodes[idx].value = stats.sum / static_cast<double>(stats.n);
    if (depth >= params.max_depth || rows.size() < 2 * static_cast<std::size_t>(params.min_leaf))
        return idx;

    // sample mtry candidate features without replacement
    const std::size_t p = x.cols();
    std::vector<int> feats(p);
    std::iota(feats.begin(), feats.end(), 0);
    for (int k = 0; k < mtry && static_cast<std::size_t>(k) < p; ++k) {
        const std::size_t j =
            static_cast<std::size_t>(k) + rng() % (p - static_cast<std::size_t>(k));
        std::swap(feats[static_cast<std::size_t>(k)], feats[j]);
    }

    const double parent_sse = stats.sse();
    double best_gain = 1e-12;
    int best_feature = -1;
    double best_threshold = 0.0;
    std::vector<std::pair<double, int>> order(rows.size());
    for (int k = 0; k < mtry && static_cast<std::size_t>(k) < p; ++k) {
        const auto f = static_cast<std::size_t>(feats[static_cast<std::size_t>(k)]);
        for (std::size_t i = 0; i < rows.size(); ++i)
            order[i] = {x(static_cast<std::size_t>(rows[i]), f), rows[i]};
        std::sort(order.begin(), order.end());
        NodeStats left;
        for (std::size_t i = 0; i + 1 < order.size(); ++i) {
            left.sum += y[order[i].second];
            left.sum2 += y[order[i].second] * y[order[i].second];
            ++left.n;
            if (order[i].first == order[i + 1].first) continue;
            const std::size_t nr = order.size() - left.n;
            if (left.n < static_cast<std::size_t>(params.min_leaf) ||
                nr < static_cast<std::size_t>(params.min_leaf))
                continue;
            NodeStats right{stats.sum - left.sum, stats.sum2 - left.sum2, nr};
            const double gain = parent_sse - left.sse() - right.sse();
            if (gain > best_gain) {
                best_gain = gain;
                best_feature = static_cast<int>(f);
                best_threshold = 0.5 * (order[i].first + order[i + 1].first);
            }
        }
    }
    if (best_feature < 0) return idx;

    importance[static_cast<std::size_t>(best_feature)] += best_gain;
    std::vector<int> left, right;
    for (int r : rows)
        (x(static_cast<std::size_t>(r), static_cast<std::size_t>(best_feature)) < best_threshold
             ? left
             : right)
            .push_back(r);
    rows.clear();
    rows.shrink_to_fit();
    const int l = grow(tree, x, y, std::move(left), depth + 1, params, mtry, rng, importance);
    const int r = grow(tree, x, y, std::move(right), depth + 1, params, mtry, rng, importance);
    tree.nodes[idx].is_leaf = false;
    tree.nodes[idx].feature = best_feature;
    tree.nodes[idx].threshold = best_threshold;
    tree.nodes[idx].left = l;
    tree.nodes[idx].right = r;
    return idx;
}

}  // namespace forest_detail

inline ForestModel forest_fit(const data::ModelMatrix& mm, const std::vector<double>& y,
                              const ForestParams& params) {
    params.validate();
    const std::size_t n = mm.design.rows();
    const std::size_t p = mm.design.cols();
    if (y.size() != n) throw DomainError("forest_fit: target length mismatch");
    if (n < 2) throw DomainError("forest_fit: need at least 2 rows");
    const int mtry = params.mtry > 0 ? params.mtry
                                     : std::max(1, static_cast<int>(p) / 3);

    ForestModel m;
    m.params = params;
    m.n_features = p;
    m.trees.resize(static_cast<std::size_t>(params.n_trees));
    std::vector<std::vector<double>> tree_importance(
        static_cast<std::size_t>(params.n_trees), std::vector<double>(p, 0.0));

    parallel_for(static_cast<std::size_t>(params.n_trees), [&](std::size_t t) {
        Rng rng = make_rng(params.seed, t);
        std::vector<int> rows(n);
        for (std::size_t i = 0; i < n; ++i) rows[i] = static_cast<int>(rng() % n);
        forest_detail::grow(m.trees[t], mm.design, y, std::move(rows), 0, params, mtry, rng,
                            tree_importance[t]);
    });

    m.importances.assign(p, 0.0);
    for (const auto& imp : tree_importance)
        for (std::size_t f = 0; f < p; ++f) m.importances[f] += imp[f];
    const double total = std::accumulate(m.importances.begin(), m.importances.end(), 0.0);
    if (total > 0.0) {
        for (double& v : m.importances) v /= total;
    } else {
        // nothing split anywhere (constant target): no feature is informative
        m.importances.assign(p, 1.0 / static_cast<double>(p));
    }
    return m;
}

inline std::vector<double> forest_predict(const ForestModel& m, const data::ModelMatrix& mm) {
    if (mm.design.cols() != m.n_features) throw DomainError("forest_predict: dimension mismatch");
    std::vector<double> out(mm.design.rows(), 0.0);
    for (std::size_t i = 0; i < mm.design.rows(); ++i) {
        double s = 0.0;
        for (const auto& t : m.trees) s += t.eval(mm.design.row(i));
        out[i] = s / static_cast<double>(m.trees.size());
    }
    return out;
}

}  // namespace fairprice::model

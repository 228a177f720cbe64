// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <limits>
#include <numeric>
#include <vector>

#include "fairprice/common.hpp"
#include "fairprice/dataset.hpp"

namespace fairprice::data {

// Pairwise Gower distance over the non-protected feature columns.
// Numeric features contribute |x-y|/range (a degenerate range contributes 0,
// the feature carries no information); categorical features contribute 0/1.
class GowerContext {
public:
    explicit GowerContext(const Dataset& ds) : GowerContext(ds, ds.schema.feature_columns()) {}

    GowerContext(const Dataset& ds, const std::vector<std::string>& feature_names) {
        for (const auto& name : feature_names) {
            const Column& c = ds.column(name);
            if (c.kind == FeatureKind::Numeric) {
                const auto it = ds.numeric_ranges.find(name);
                const double span = it != ds.numeric_ranges.end() ? it->second.span() : 0.0;
                numeric_.push_back({&c.numeric, span});
            } else {
                categorical_.push_back(&c.codes);
            }
        }
        n_features_ = numeric_.size() + categorical_.size();
        if (n_features_ == 0) throw DomainError("gower: no feature columns");
        n_rows_ = ds.n_rows();
    }

    std::size_t n_rows() const { return n_rows_; }

    double distance(std::size_t i, std::size_t j) const {
        double sum = 0.0;
        for (const auto& f : numeric_) {
            if (f.span > 0.0) {
                double d = std::abs((*f.values)[i] - (*f.values)[j]) / f.span;
                sum += std::min(d, 1.0);  // test rows may fall outside training range
            }
        }
        for (const auto* codes : categorical_) sum += (*codes)[i] == (*codes)[j] ? 0.0 : 1.0;
        return sum / static_cast<double>(n_features_);
    }

    // Nearest neighbor of `i` within `candidates` (excluding i itself), ties
    // broken by the smallest row index. Candidates must be sorted ascending.
    std::pair<std::size_t, double> nearest(std::size_t i,
                                           const std::vector<std::size_t>& candidates) const {
        std::size_t best = std::numeric_limits<std::size_t>::max();
        double best_d = std::numeric_limits<double>::infinity();
        for (std::size_t j : candidates) {
            if (j == i) continue;
            const double d = distance(i, j);
            if (d < best_d) {
                best_d = d;
                best = j;
            }
        }
        if (best == std::numeric_limits<std::size_t>::max())
            throw DomainError("nearest neighbor needs at least 2 rows");
        return {best, best_d};
    }

    // k nearest candidates ordered by (distance, index); clamps k to pool size.
    std::vector<std::pair<std::size_t, double>> k_nearest(
        std::size_t i, const std::vector<std::size_t>& candidates, std::size_t k) const {
        std::vector<std::pair<std::size_t, double>> pool;
        pool.reserve(candidates.size());
        for (std::size_t j : candidates) {
            if (j == i) continue;
            pool.emplace_back(j, distance(i, j));
        }
        if (pool.empty()) throw DomainError("empty donor pool");
        k = std::min(k, pool.size());
        std::partial_sort(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(k), pool.end(),
                          [](const auto& a, const auto& b) {
                              if (a.second != b.second) return a.second < b.second;
                              return a.first < b.first;
                          });
        pool.resize(k);
        return pool;
    }

private:
    struct NumericFeature {
        const std::vector<double>* values;
        double span;
    };
    std::vector<NumericFeature> numeric_;
    std::vector<const std::vector<int>*> categorical_;
    std::size_t n_features_ = 0;
    std::size_t n_rows_ = 0;
};

inline std::vector<std::size_t> all_rows(std::size_t n) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    return idx;
}

inline double gower_distance(const Dataset& ds, std::size_t i, std::size_t j) {
    return GowerContext(ds).distance(i, j);
}

inline std::pair<std::size_t, double> nearest_neighbor(const Dataset& ds, std::size_t i) {
    if (ds.n_rows() < 2) throw DomainError("nearest neighbor needs at least 2 rows");
    GowerContext ctx(ds);
    return ctx.nearest(i, all_rows(ds.n_rows()));
}

// Nearest-neighbor pair per row restricted to `rows`; exact O(|rows|^2),
// parallel over rows.
struct NeighborPair {
    std::size_t row;
    std::size_t neighbor;
    double distance;
};

inline std::vector<NeighborPair> neighbor_pairs(const GowerContext& ctx,
                                                const std::vector<std::size_t>& rows) {
    if (rows.size() < 2) throw DomainError("nearest neighbor needs at least 2 rows");
    std::vector<NeighborPair> pairs(rows.size());
    parallel_for(rows.size(), [&](std::size_t k) {
        const auto [j, d] = ctx.nearest(rows[k], rows);
        pairs[k] = {rows[k], j, d};
    });
    return pairs;
}

}  // namespace fairprice::data

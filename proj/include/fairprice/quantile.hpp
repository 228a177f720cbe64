// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "fairprice/common.hpp"

namespace fairprice {

// Engine-wide quantile convention: plotting positions i/(m+1) over the order
// statistics, linear interpolation between them, clamped to the extremes.
// The barycenter transport and the Q0.95 / Q0.5 fairness summaries share this
// so their numbers agree by construction.
inline double quantile_sorted(const std::vector<double>& sorted, double p) {
    const std::size_t m = sorted.size();
    if (m == 0) throw DomainError("quantile of empty sample");
    if (m == 1) return sorted[0];
    const double mm = static_cast<double>(m);
    const double lo = 1.0 / (mm + 1.0);
    const double hi = mm / (mm + 1.0);
    if (p <= lo) return sorted.front();
    if (p >= hi) return sorted.back();
    const double t = p * (mm + 1.0);  // fractional 1-based rank
    const std::size_t k = static_cast<std::size_t>(t);
    const double frac = t - static_cast<double>(k);
    const double a = sorted[k - 1];
    const double b = sorted[k];
    if (std::isinf(a) || std::isinf(b)) return frac == 0.0 ? a : b;
    return a + frac * (b - a);
}

inline double quantile(std::vector<double> values, double p) {
    std::sort(values.begin(), values.end());
    return quantile_sorted(values, p);
}

inline double median(std::vector<double> values) { return quantile(std::move(values), 0.5); }

// Empirical CDF with tie-averaged plotting positions. cdf() and icdf() are
// piecewise-linear inverses of each other on the sample grid; off-grid
// queries clamp to the extreme positions/values.
class EmpiricalCdf {
public:
    EmpiricalCdf() = default;

    explicit EmpiricalCdf(std::vector<double> samples) {
        if (samples.size() < 2) throw DomainError("EmpiricalCdf needs >= 2 samples");
        std::sort(samples.begin(), samples.end());
        const double m = static_cast<double>(samples.size());
        std::size_t i = 0;
        while (i < samples.size()) {
            std::size_t j = i;
            while (j + 1 < samples.size() && samples[j + 1] == samples[i]) ++j;
            // ranks i+1..j+1 share this value; average them
            const double rank = 0.5 * static_cast<double>(i + 1 + j + 1);
            values_.push_back(samples[i]);
            positions_.push_back(rank / (m + 1.0));
            i = j + 1;
        }
    }

    double cdf(double s) const { return interpolate(values_, positions_, s); }
    double icdf(double p) const { return interpolate(positions_, values_, p); }

    const std::vector<double>& values() const { return values_; }
    const std::vector<double>& positions() const { return positions_; }

private:
    static double interpolate(const std::vector<double>& xs, const std::vector<double>& ys,
                              double x) {
        if (x <= xs.front()) return ys.front();
        if (x >= xs.back()) return ys.back();
        const auto it = std::upper_bound(xs.begin(), xs.end(), x);
        const std::size_t hi = static_cast<std::size_t>(it - xs.begin());
        const std::size_t lo = hi - 1;
        const double span = xs[hi] - xs[lo];
        const double t = span > 0.0 ? (x - xs[lo]) / span : 0.0;
        return ys[lo] + t * (ys[hi] - ys[lo]);
    }

    std::vector<double> values_;
    std::vector<double> positions_;
};

}  // namespace fairprice

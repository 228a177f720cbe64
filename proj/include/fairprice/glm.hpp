// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <string>
#include <vector>

#include <json.hpp>

#include "fairprice/common.hpp"
#include "fairprice/dataset.hpp"
#include "fairprice/linalg.hpp"

namespace fairprice::model {

enum class Family { Poisson, Gamma, Gaussian };

inline std::string to_string(Family f) {
    switch (f) {
        case Family::Poisson: return "poisson";
        case Family::Gamma: return "gamma";
        case Family::Gaussian: return "gaussian";
    }
    throw DomainError("bad family");
}

inline Family family_from_string(const std::string& s) {
    if (s == "poisson") return Family::Poisson;
    if (s == "gamma") return Family::Gamma;
    if (s == "gaussian") return Family::Gaussian;
    throw DomainError("unknown family: " + s);
}

// Poisson and Gamma use the log link; Gaussian the identity.
struct GlmModel {
    Family family = Family::Gaussian;
    std::vector<double> coefficients;  // intercept first
    bool converged = false;
    int iterations = 0;
    std::vector<std::string> column_names;  // design columns as fitted

    bool log_link() const { return family != Family::Gaussian; }
};

namespace detail {

inline double clamp_eta(double eta) { return std::min(std::max(eta, -700.0), 700.0); }

inline double inv_link(const GlmModel& m, double eta) {
    return m.log_link() ? std::exp(clamp_eta(eta)) : eta;
}

}  // namespace detail

inline std::vector<double> glm_predict(const GlmModel& m, const data::ModelMatrix& mm) {
    const std::size_t p = mm.design.cols();
    if (m.coefficients.size() != p + 1)
        throw DomainError("glm_predict: design has " + std::to_string(p) + " columns, model has " +
                          std::to_string(m.coefficients.size() - 1));
    std::vector<double> out(mm.design.rows());
    for (std::size_t i = 0; i < mm.design.rows(); ++i) {
        double eta = m.coefficients[0] + dot(mm.design.row(i), m.coefficients.data() + 1, p);
        out[i] = detail::inv_link(m, eta);
    }
    return out;
}

// Iteratively reweighted least squares. Stops when max |delta beta| < 1e-8 or
// after 100 iterations; the converged flag records which.
inline GlmModel glm_fit(const data::ModelMatrix& mm, const std::vector<double>& y, Family family,
                        const std::vector<double>& prior_weights = {}) {
    const std::size_t n = mm.design.rows();
    const std::size_t p = mm.design.cols();
    if (y.size() != n) throw DomainError("glm_fit: target length mismatch");
    std::vector<double> w(prior_weights);
    if (w.empty()) w.assign(n, 1.0);
    if (w.size() != n) throw DomainError("glm_fit: weight length mismatch");
    double wsum = 0.0, wy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (w[i] < 0.0) throw DomainError("glm_fit: negative weight");
        if (family != Family::Gaussian && y[i] < 0.0)
            throw DomainError("glm_fit: negative response under " + to_string(family));
        if (family == Family::Gamma && w[i] > 0.0 && y[i] <= 0.0)
            throw DomainError("glm_fit: Gamma requires strictly positive response");
        wsum += w[i];
        wy += w[i] * y[i];
    }
    if (wsum <= 0.0) throw DomainError("glm_fit: all weights zero");

    GlmModel m;
    m.family = family;
    m.column_names = mm.column_names;
    m.coefficients.assign(p + 1, 0.0);
    const double ybar = std::max(wy / wsum, 1e-10);
    m.coefficients[0] = m.log_link() ? std::log(ybar) : ybar;

    const auto col_name = [&](std::size_t j) {
        return j == 0 ? std::string("(intercept)") : mm.column_names[j - 1];
    };

    std::vector<double> eta(n), mu(n);
    for (int iter = 1; iter <= 100; ++iter) {
        for (std::size_t i = 0; i < n; ++i) {
            eta[i] = m.coefficients[0] + dot(mm.design.row(i), m.coefficients.data() + 1, p);
            mu[i] = detail::inv_link(m, eta[i]);
            if (m.log_link()) mu[i] = std::max(mu[i], 1e-10);
        }
        // IRLS working weights and response
        Matrix xtwx(p + 1, p + 1);
        std::vector<double> xtwz(p + 1, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            if (w[i] == 0.0) continue;
            double wi, zi;
            switch (family) {
                case Family::Gaussian:
                    wi = w[i];
                    zi = y[i];
                    break;
                case Family::Poisson:
                    wi = w[i] * mu[i];
                    zi = eta[i] + (y[i] - mu[i]) / mu[i];
                    break;
                case Family::Gamma:
                    wi = w[i];
                    zi = eta[i] + (y[i] - mu[i]) / mu[i];
                    break;
            }
            const double* xr = mm.design.row(i);
            // accumulate with the implicit leading 1 for the intercept
            xtwx(0, 0) += wi;
            xtwz[0] += wi * zi;
            for (std::size_t a = 0; a < p; ++a) {
                xtwx(a + 1, 0) += wi * xr[a];
                xtwz[a + 1] += wi * xr[a] * zi;
                for (std::size_t b = 0; b <= a; ++b) xtwx(a + 1, b + 1) += wi * xr[a] * xr[b];
            }
        }
        for (std::size_t a = 0; a < p + 1; ++a)
            for (std::size_t b = a + 1; b < p + 1; ++b) xtwx(a, b) = xtwx(b, a);

        const auto beta = cholesky_solve(xtwx, xtwz, col_name);
        double max_delta = 0.0;
        for (std::size_t j = 0; j < p + 1; ++j)
            max_delta = std::max(max_delta, std::abs(beta[j] - m.coefficients[j]));
        m.coefficients = beta;
        m.iterations = iter;
        if (max_delta < 1e-8) {
            m.converged = true;
            break;
        }
    }
    return m;
}

inline nlohmann::json to_json(const GlmModel& m) {
    return nlohmann::json{{"type", "glm"},
                          {"version", 1},
                          {"family", to_string(m.family)},
                          {"coefficients", m.coefficients},
                          {"converged", m.converged},
                          {"iterations", m.iterations},
                          {"column_names", m.column_names}};
}

inline GlmModel glm_from_json(const nlohmann::json& j) {
    GlmModel m;
    m.family = family_from_string(j.at("family"));
    m.coefficients = j.at("coefficients").get<std::vector<double>>();
    m.converged = j.at("converged").get<bool>();
    m.iterations = j.at("iterations").get<int>();
    m.column_names = j.at("column_names").get<std::vector<std::string>>();
    return m;
}

}  // namespace fairprice::model

// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "fairprice/engine.hpp"
#include "fairprice/forest.hpp"
#include "fairprice/mlp.hpp"
#include "fairprice/quantile.hpp"
#include "fairprice/scm.hpp"

namespace fairprice::fair {

enum class FairModelKind { MB, MU, MO, MDF, MBC, MSCM, MNN };

inline std::string to_string(FairModelKind k) {
    switch (k) {
        case FairModelKind::MB: return "MB";
        case FairModelKind::MU: return "MU";
        case FairModelKind::MO: return "MO";
        case FairModelKind::MDF: return "MDF";
        case FairModelKind::MBC: return "MBC";
        case FairModelKind::MSCM: return "MSCM";
        case FairModelKind::MNN: return "MNN";
    }
    throw DomainError("bad fair model kind");
}

inline FairModelKind fair_kind_from_string(const std::string& s) {
    if (s == "MB") return FairModelKind::MB;
    if (s == "MU") return FairModelKind::MU;
    if (s == "MO") return FairModelKind::MO;
    if (s == "MDF") return FairModelKind::MDF;
    if (s == "MBC") return FairModelKind::MBC;
    if (s == "MSCM") return FairModelKind::MSCM;
    if (s == "MNN") return FairModelKind::MNN;
    throw DomainError("unknown fair model kind: " + s);
}

// Optional replacement target for engine fits (frequency / severity stages).
struct TargetOverride {
    std::vector<double> y;
    std::vector<double> weights;
};

// ---------------------------------------------------------------------------
// Orthogonalization (MO preprocessing)
// ---------------------------------------------------------------------------

struct OrthogonalizedMatrix {
    data::ModelMatrix design;       // residualized X*
    std::vector<double> b0, b1;     // per-column OLS coefficients against (1, d)
};

// Column-wise OLS of the design on the sensitive indicator; each column is
// replaced by its residual, which has exactly zero sample covariance with d.
inline OrthogonalizedMatrix orthogonalize(const data::ModelMatrix& mm,
                                          const std::vector<double>& d) {
    const std::size_t n = mm.design.rows();
    const std::size_t p = mm.design.cols();
    if (d.size() != n) throw DomainError("orthogonalize: indicator length mismatch");
    double d_mean = 0.0;
    for (double v : d) d_mean += v;
    d_mean /= static_cast<double>(n);
    double d_var = 0.0;
    for (double v : d) d_var += (v - d_mean) * (v - d_mean);
    d_var /= static_cast<double>(n);
    if (d_var <= 0.0) throw DomainError("orthogonalize: degenerate variance (single group)");

    OrthogonalizedMatrix out;
    out.design = mm;
    out.b0.resize(p);
    out.b1.resize(p);
    for (std::size_t j = 0; j < p; ++j) {
        double x_mean = 0.0, cov = 0.0;
        for (std::size_t i = 0; i < n; ++i) x_mean += mm.design(i, j);
        x_mean /= static_cast<double>(n);
        for (std::size_t i = 0; i < n; ++i)
            cov += (mm.design(i, j) - x_mean) * (d[i] - d_mean);
        cov /= static_cast<double>(n);
        const double b1 = cov / d_var;
        const double b0 = x_mean - b1 * d_mean;
        out.b0[j] = b0;
        out.b1[j] = b1;
        for (std::size_t i = 0; i < n; ++i)
            out.design.design(i, j) = mm.design(i, j) - b0 - b1 * d[i];
    }
    return out;
}

// ---------------------------------------------------------------------------
// MNN training parameters
// ---------------------------------------------------------------------------

struct MnnParams {
    std::vector<int> hidden{16};
    double lambda = 1.0;
    int epochs = 150;
    int batch = 64;
    double step_size = 3e-3;
    std::uint64_t seed = 0;

    void validate() const {
        if (lambda < 0.0) throw DomainError("mnn: lambda must be >= 0");
        if (epochs < 1 || batch < 1) throw DomainError("mnn: bad training params");
    }
};

struct MnnLossPoint {
    double total = 0.0;
    double accuracy = 0.0;   // (1/n) sum (y - f_real)^2
    double fairness = 0.0;   // (1/n) sum (f_real - f_cf)^2
};

// ---------------------------------------------------------------------------
// The fitted fair model
// ---------------------------------------------------------------------------

// One serializable artifact per kind. Only MB's deployed predictor reads the
// row's sensitive attribute directly; MO and MBC read it solely to pick the
// stored training-time adjustment, and the rest ignore it entirely.
struct FairModel {
    FairModelKind kind = FairModelKind::MB;
    model::EngineModel engine;
    data::Encoder encoder;

    std::string sensitive_col;
    std::string level_a;     // "group a" level (DIR numerator group)
    std::string level_b;
    double prop_a = 0.5;     // training P(D = a)
    int d_col = -1;          // design column of the sensitive indicator (MB family)
    double d_value_for_a = 0.0;  // indicator value that encodes level_a

    std::vector<double> mo_b0, mo_b1;          // MO residualization
    std::vector<double> bary_a, bary_b;        // MBC: sorted training predictions
    model::MlpModel mlp;                       // MNN
    std::vector<double> in_mean, in_sd;        // MNN input standardization
    double y_mean = 0.0, y_sd = 1.0;           // MNN target standardization
    double lambda = 0.0;                       // MNN trade-off weight

    bool reads_sensitive() const { return kind == FairModelKind::MB; }

    std::vector<double> predict(const data::Dataset& ds) const {
        switch (kind) {
            case FairModelKind::MB: {
                return engine.predict(encoder.encode(ds));
            }
            case FairModelKind::MU:
            case FairModelKind::MSCM: {
                return engine.predict(encoder.encode(ds));
            }
            case FairModelKind::MO: {
                auto mm = encoder.encode(ds);
                residualize(mm, row_indicator(ds));
                return engine.predict(mm);
            }
            case FairModelKind::MDF: {
                const auto sa = predict_with_level(ds, true);
                const auto sb = predict_with_level(ds, false);
                std::vector<double> out(sa.size());
                for (std::size_t i = 0; i < sa.size(); ++i)
                    out[i] = prop_a * sa[i] + (1.0 - prop_a) * sb[i];
                return out;
            }
            case FairModelKind::MBC: {
                return predict_mbc(ds);
            }
            case FairModelKind::MNN: {
                return predict_mnn(ds);
            }
        }
        throw DomainError("bad fair model kind");
    }

    // mu(X, D=a) / mu(X, D=b) with the row's own D overridden (MB family).
    std::vector<double> predict_with_level(const data::Dataset& ds, bool as_group_a) const {
        if (d_col < 0) throw DomainError("predict_with_level requires an MB-style design");
        auto mm = encoder.encode(ds);
        const double v = as_group_a ? d_value_for_a : 1.0 - d_value_for_a;
        for (std::size_t i = 0; i < mm.design.rows(); ++i)
            mm.design(i, static_cast<std::size_t>(d_col)) = v;
        return engine.predict(mm);
    }

    // Residualize a freshly encoded design with the stored betas.
    void residualize(data::ModelMatrix& mm, const std::vector<double>& d) const {
        if (mo_b0.size() != mm.design.cols())
            throw DomainError("residualize: beta width mismatch");
        for (std::size_t j = 0; j < mm.design.cols(); ++j)
            for (std::size_t i = 0; i < mm.design.rows(); ++i)
                mm.design(i, j) -= mo_b0[j] + mo_b1[j] * d[i];
    }

    // Group-a indicator per row; rows with no sensitive column fall back to
    // the training proportion (expectation-neutral adjustment).
    std::vector<double> row_indicator(const data::Dataset& ds) const {
        if (ds.has_sensitive() && ds.schema.sensitive == sensitive_col) {
            const auto& s = ds.sensitive_column();
            std::vector<double> d(ds.n_rows());
            for (std::size_t i = 0; i < d.size(); ++i)
                d[i] = s.levels[static_cast<std::size_t>(s.codes[i])] == level_a ? 1.0 : 0.0;
            return d;
        }
        return std::vector<double>(ds.n_rows(), prop_a);
    }

    nlohmann::json to_json() const;
    static FairModel from_json(const nlohmann::json& j);

private:
    std::vector<double> predict_mbc(const data::Dataset& ds) const {
        const auto d = row_indicator(ds);
        const auto s_own = engine.predict(encoder.encode(ds));
        const EmpiricalCdf cdf_a(bary_a), cdf_b(bary_b);
        std::vector<double> out(s_own.size());
        for (std::size_t i = 0; i < s_own.size(); ++i) {
            const double s = s_own[i];
            if (d[i] > 0.5) {
                out[i] = prop_a * s + (1.0 - prop_a) * cdf_b.icdf(cdf_a.cdf(s));
            } else {
                out[i] = (1.0 - prop_a) * s + prop_a * cdf_a.icdf(cdf_b.cdf(s));
            }
        }
        return out;
    }

    std::vector<double> predict_mnn(const data::Dataset& ds) const {
        auto mm = encoder.encode(ds);
        const std::size_t n = mm.design.rows();
        const std::size_t p = mm.design.cols();
        std::vector<double> x(p + 1);
        std::vector<double> out(n);
        model::mlp_detail::Workspace ws;
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < p; ++j)
                x[j] = (mm.design(i, j) - in_mean[j]) / in_sd[j];
            x[p] = 1.0;
            const double fa = model::mlp_detail::forward(mlp, x.data(), 0, ws);
            x[p] = 0.0;
            const double fb = model::mlp_detail::forward(mlp, x.data(), 0, ws);
            const double z = prop_a * fa + (1.0 - prop_a) * fb;
            out[i] = std::max(y_mean + y_sd * z, 0.0);
        }
        return out;
    }
};

namespace detail {

inline void fill_sensitive_meta(FairModel& m, const data::Dataset& train) {
    if (!train.has_sensitive()) return;
    const auto& s = train.sensitive_column();
    const int a_code = train.group_a_code();
    m.sensitive_col = train.schema.sensitive;
    m.level_a = s.levels[static_cast<std::size_t>(a_code)];
    m.level_b = s.levels[static_cast<std::size_t>(1 - a_code)];
    m.prop_a = train.group_a_proportion();
}

inline const std::vector<double>& target_of(const data::Dataset& train,
                                            const TargetOverride* ov) {
    return ov ? ov->y : train.target();
}

inline std::vector<double> weights_of(const TargetOverride* ov) {
    return ov ? ov->weights : std::vector<double>{};
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Fits
// ---------------------------------------------------------------------------

// Best-estimate price: full design including the sensitive indicator.
inline FairModel fit_mb(const model::EngineConfig& cfg, const data::Dataset& train,
                        const TargetOverride* ov = nullptr) {
    if (!train.has_sensitive()) throw DomainError("fit_mb requires a sensitive column");
    FairModel m;
    m.kind = FairModelKind::MB;
    m.encoder = data::make_full_encoder(train);
    detail::fill_sensitive_meta(m, train);
    // the sensitive column contributes exactly one indicator: name=level2
    const std::string d_name = train.schema.sensitive + "=" +
                               train.sensitive_column().levels[1];
    const auto& names = m.encoder.column_names();
    m.d_col = static_cast<int>(std::find(names.begin(), names.end(), d_name) - names.begin());
    m.d_value_for_a = train.sensitive_column().levels[1] == m.level_a ? 1.0 : 0.0;
    m.engine = model::fit_engine(cfg, m.encoder.encode(train), detail::target_of(train, ov),
                                 detail::weights_of(ov));
    return m;
}

// Unawareness: the sensitive attribute never enters the design.
inline FairModel fit_mu(const model::EngineConfig& cfg, const data::Dataset& train,
                        const TargetOverride* ov = nullptr) {
    FairModel m;
    m.kind = FairModelKind::MU;
    m.encoder = data::make_feature_encoder(train);
    detail::fill_sensitive_meta(m, train);
    m.engine = model::fit_engine(cfg, m.encoder.encode(train), detail::target_of(train, ov),
                                 detail::weights_of(ov));
    return m;
}

// Orthogonal model: engine consumes residualized features.
inline FairModel fit_mo(const model::EngineConfig& cfg, const data::Dataset& train,
                        const TargetOverride* ov = nullptr) {
    if (!train.has_sensitive()) throw DomainError("fit_mo requires a sensitive column");
    FairModel m;
    m.kind = FairModelKind::MO;
    m.encoder = data::make_feature_encoder(train);
    detail::fill_sensitive_meta(m, train);
    const auto mm = m.encoder.encode(train);
    auto orth = orthogonalize(mm, train.group_a_mask());
    m.mo_b0 = orth.b0;
    m.mo_b1 = orth.b1;
    m.engine = model::fit_engine(cfg, orth.design, detail::target_of(train, ov),
                                 detail::weights_of(ov));
    return m;
}

// Discrimination-free price: group-proportion average of the MB predictions.
inline FairModel fit_mdf(const model::EngineConfig& cfg, const data::Dataset& train,
                         const TargetOverride* ov = nullptr) {
    FairModel m = fit_mb(cfg, train, ov);
    m.kind = FairModelKind::MDF;
    return m;
}

inline std::vector<double> predict_mdf(const FairModel& mb, const data::Dataset& ds) {
    const auto sa = mb.predict_with_level(ds, true);
    const auto sb = mb.predict_with_level(ds, false);
    std::vector<double> out(sa.size());
    for (std::size_t i = 0; i < sa.size(); ++i)
        out[i] = mb.prop_a * sa[i] + (1.0 - mb.prop_a) * sb[i];
    return out;
}

// Barycenter model: per-group quantile transport of the MB predictions,
// estimated on training predictions.
inline FairModel fit_mbc(const model::EngineConfig& cfg, const data::Dataset& train,
                         const TargetOverride* ov = nullptr) {
    FairModel m = fit_mb(cfg, train, ov);
    m.kind = FairModelKind::MBC;
    const auto preds = m.engine.predict(m.encoder.encode(train));
    const auto mask = train.group_a_mask();
    for (std::size_t i = 0; i < preds.size(); ++i)
        (mask[i] > 0.5 ? m.bary_a : m.bary_b).push_back(preds[i]);
    if (m.bary_a.size() < 2 || m.bary_b.size() < 2)
        throw DomainError("fit_mbc: both groups need at least 2 training rows");
    std::sort(m.bary_a.begin(), m.bary_a.end());
    std::sort(m.bary_b.begin(), m.bary_b.end());
    return m;
}

struct MscmParams {
    model::ForestParams forest;
    ScmParams scm;
};

// Synthetic-control model: engine fit on the SCM-adjusted target Y'.
inline FairModel fit_mscm(const model::EngineConfig& cfg, const data::Dataset& train,
                          const MscmParams& params = {},
                          ScmAdjustment* adjustment_out = nullptr) {
    if (!train.has_sensitive()) throw DomainError("fit_mscm requires a sensitive column");
    FairModel m;
    m.kind = FairModelKind::MSCM;
    m.encoder = data::make_feature_encoder(train);
    detail::fill_sensitive_meta(m, train);
    const Matrix scm_x = scm_feature_matrix(train, m.encoder);
    data::ModelMatrix scm_mm{scm_x, m.encoder.column_names()};
    const auto forest = model::forest_fit(scm_mm, train.target(), params.forest);
    auto adj = scm_adjust(train, m.encoder, forest.importances, params.scm);
    m.engine = model::fit_engine(cfg, m.encoder.encode(train), adj.adjusted_targets());
    if (adjustment_out) *adjustment_out = std::move(adj);
    return m;
}

// ---------------------------------------------------------------------------
// MNN: two-headed network with the composite counterfactual loss
// ---------------------------------------------------------------------------

struct MnnFit {
    FairModel model;
    std::vector<MnnLossPoint> history;  // entry 0 = pre-training loss
};

namespace detail {

// Composite loss SGD: pass the real row through head 0 and the flipped row
// through head 1; both passes back-propagate into the shared trunk.
inline std::vector<MnnLossPoint> train_mnn(model::MlpModel& mlp, const Matrix& x_real,
                                           const Matrix& x_cf, const std::vector<double>& y,
                                           double lambda, const MnnParams& params) {
    const std::size_t n = x_real.rows();
    model::mlp_detail::Workspace ws_real, ws_cf;
    const auto full_loss = [&] {
        MnnLossPoint pt;
        for (std::size_t i = 0; i < n; ++i) {
            const double fr = model::mlp_detail::forward(mlp, x_real.row(i), 0, ws_real);
            const double fc = model::mlp_detail::forward(mlp, x_cf.row(i), 1, ws_cf);
            pt.accuracy += (y[i] - fr) * (y[i] - fr);
            pt.fairness += (fr - fc) * (fr - fc);
        }
        pt.accuracy /= static_cast<double>(n);
        pt.fairness /= static_cast<double>(n);
        pt.total = pt.accuracy + lambda * pt.fairness;
        return pt;
    };

    std::vector<MnnLossPoint> history{full_loss()};
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::vector<double> grad(mlp.weights.size());
    Rng rng = make_rng(params.seed, 29);

    for (int epoch = 0; epoch < params.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        for (std::size_t start = 0; start < n; start += static_cast<std::size_t>(params.batch)) {
            const std::size_t end = std::min(n, start + static_cast<std::size_t>(params.batch));
            const double inv = 1.0 / static_cast<double>(end - start);
            std::fill(grad.begin(), grad.end(), 0.0);
            for (std::size_t k = start; k < end; ++k) {
                const std::size_t i = order[k];
                const double fr = model::mlp_detail::forward(mlp, x_real.row(i), 0, ws_real);
                const double fc = model::mlp_detail::forward(mlp, x_cf.row(i), 1, ws_cf);
                const double err = fr - y[i];
                const double gap = fr - fc;
                model::mlp_detail::backward(mlp, ws_real,
                                            (2.0 * err + 2.0 * lambda * gap) * inv, grad);
                if (lambda > 0.0)
                    model::mlp_detail::backward(mlp, ws_cf, -2.0 * lambda * gap * inv, grad);
            }
            for (std::size_t j = 0; j < mlp.weights.size(); ++j)
                mlp.weights[j] -= params.step_size * grad[j];
        }
        const auto pt = full_loss();
        if (!std::isfinite(pt.total))
            throw DivergenceError("mnn training diverged; use a smaller step size");
        history.push_back(pt);
    }
    return history;
}

}  // namespace detail

inline MnnFit fit_mnn(const data::Dataset& train, const MnnParams& params) {
    params.validate();
    if (!train.has_sensitive()) throw DomainError("fit_mnn requires a sensitive column");
    FairModel m;
    m.kind = FairModelKind::MNN;
    m.encoder = data::make_feature_encoder(train);
    detail::fill_sensitive_meta(m, train);
    m.lambda = params.lambda;

    auto mm = m.encoder.encode(train);
    const std::size_t n = mm.design.rows();
    const std::size_t p = mm.design.cols();
    m.in_mean.assign(p, 0.0);
    m.in_sd.assign(p, 1.0);
    for (std::size_t j = 0; j < p; ++j) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += mm.design(i, j);
        m.in_mean[j] = s / static_cast<double>(n);
        double v = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            v += (mm.design(i, j) - m.in_mean[j]) * (mm.design(i, j) - m.in_mean[j]);
        v /= static_cast<double>(n);
        m.in_sd[j] = v > 1e-12 ? std::sqrt(v) : 1.0;
    }
    const auto& y_raw = train.target();
    m.y_mean = mean(y_raw);
    m.y_sd = std::max(stddev(y_raw), 1e-12);
    std::vector<double> y(n);
    for (std::size_t i = 0; i < n; ++i) y[i] = (y_raw[i] - m.y_mean) / m.y_sd;

    const auto d = train.group_a_mask();
    Matrix x_real(n, p + 1), x_cf(n, p + 1);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < p; ++j) {
            const double v = (mm.design(i, j) - m.in_mean[j]) / m.in_sd[j];
            x_real(i, j) = v;
            x_cf(i, j) = v;
        }
        x_real(i, p) = d[i];
        x_cf(i, p) = 1.0 - d[i];
    }

    std::vector<int> layers{static_cast<int>(p) + 1};
    for (int h : params.hidden) layers.push_back(h);
    m.mlp = model::mlp_init(layers, 2, model::OutputActivation::Identity, params.seed);

    MnnFit fit;
    fit.history = detail::train_mnn(m.mlp, x_real, x_cf, y, params.lambda, params);
    fit.model = std::move(m);
    return fit;
}

// Counterfactual disparity of a trained MNN on a dataset: mean |f_real(x) -
// f_cf(x')| on the premium scale.
inline double mnn_disparity(const FairModel& m, const data::Dataset& ds) {
    auto mm = m.encoder.encode(ds);
    const std::size_t n = mm.design.rows();
    const std::size_t p = mm.design.cols();
    const auto d = ds.has_sensitive() ? ds.group_a_mask() : std::vector<double>(n, m.prop_a);
    model::mlp_detail::Workspace ws;
    std::vector<double> x(p + 1);
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < p; ++j) x[j] = (mm.design(i, j) - m.in_mean[j]) / m.in_sd[j];
        x[p] = d[i];
        const double fr = model::mlp_detail::forward(m.mlp, x.data(), 0, ws);
        x[p] = 1.0 - d[i];
        const double fc = model::mlp_detail::forward(m.mlp, x.data(), 1, ws);
        s += std::abs(fr - fc);
    }
    return m.y_sd * s / static_cast<double>(n);
}

// Validation MSE of the real head with the row's own sensitive indicator,
// on the premium scale.
inline double mnn_validation_mse(const FairModel& m, const data::Dataset& ds) {
    auto mm = m.encoder.encode(ds);
    const std::size_t n = mm.design.rows();
    const std::size_t p = mm.design.cols();
    const auto d = ds.group_a_mask();
    const auto& y = ds.target();
    model::mlp_detail::Workspace ws;
    std::vector<double> x(p + 1);
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < p; ++j) x[j] = (mm.design(i, j) - m.in_mean[j]) / m.in_sd[j];
        x[p] = d[i];
        const double pred = m.y_mean + m.y_sd * model::mlp_detail::forward(m.mlp, x.data(), 0, ws);
        s += (pred - y[i]) * (pred - y[i]);
    }
    return s / static_cast<double>(n);
}

// ---------------------------------------------------------------------------
// Lambda tuning (stratified 5-fold cross-validation)
// ---------------------------------------------------------------------------

struct LambdaTuning {
    double lambda_star = 0.0;
    std::vector<double> grid;
    std::vector<double> val_loss;    // mean validation MSE per lambda
    std::vector<double> disparity;   // mean counterfactual disparity per lambda
};

inline LambdaTuning tune_lambda(const data::Dataset& train, std::vector<double> grid, int folds,
                                std::uint64_t seed, MnnParams params) {
    if (grid.empty()) throw DomainError("tune_lambda: empty grid");
    if (folds < 2) throw DomainError("tune_lambda: need at least 2 folds");

    // stratified fold ids: shuffle within each sensitive group, deal round-robin
    const auto mask = train.group_a_mask();
    std::vector<int> fold_of(train.n_rows(), 0);
    for (int g = 0; g < 2; ++g) {
        std::vector<std::size_t> rows;
        for (std::size_t i = 0; i < mask.size(); ++i)
            if ((mask[i] > 0.5) == (g == 0)) rows.push_back(i);
        Rng rng = make_rng(seed, 40 + static_cast<std::uint64_t>(g));
        std::shuffle(rows.begin(), rows.end(), rng);
        for (std::size_t k = 0; k < rows.size(); ++k)
            fold_of[rows[k]] = static_cast<int>(k % static_cast<std::size_t>(folds));
    }

    LambdaTuning out;
    out.grid = grid;
    out.val_loss.assign(grid.size(), 0.0);
    out.disparity.assign(grid.size(), 0.0);
    for (std::size_t li = 0; li < grid.size(); ++li) {
        params.lambda = grid[li];
        for (int f = 0; f < folds; ++f) {
            std::vector<std::size_t> tr, va;
            for (std::size_t i = 0; i < fold_of.size(); ++i)
                (fold_of[i] == f ? va : tr).push_back(i);
            const auto fit = fit_mnn(train.subset(tr), params);
            const auto val = train.subset(va);
            out.val_loss[li] += mnn_validation_mse(fit.model, val);
            out.disparity[li] += mnn_disparity(fit.model, val);
        }
        out.val_loss[li] /= folds;
        out.disparity[li] /= folds;
    }

    const double min_loss = *std::min_element(out.val_loss.begin(), out.val_loss.end());
    const double min_disp = *std::min_element(out.disparity.begin(), out.disparity.end());
    // smallest lambda within 5% of the best validation loss whose disparity is
    // within 10% of the best disparity
    std::vector<std::size_t> candidates;
    for (std::size_t li = 0; li < grid.size(); ++li)
        if (out.val_loss[li] <= 1.05 * min_loss && out.disparity[li] <= 1.10 * min_disp + 1e-15)
            candidates.push_back(li);
    if (!candidates.empty()) {
        const auto best = *std::min_element(candidates.begin(), candidates.end(),
                                            [&](std::size_t a, std::size_t b) {
                                                return grid[a] < grid[b];
                                            });
        out.lambda_star = grid[best];
    } else {
        // no lambda satisfies both bands: take the best joint normalized score
        std::size_t best = 0;
        double best_score = std::numeric_limits<double>::infinity();
        for (std::size_t li = 0; li < grid.size(); ++li) {
            const double score = out.val_loss[li] / min_loss +
                                 out.disparity[li] / std::max(min_disp, 1e-12);
            if (score < best_score) {
                best_score = score;
                best = li;
            }
        }
        out.lambda_star = grid[best];
    }
    return out;
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

inline nlohmann::json FairModel::to_json() const {
    nlohmann::json j{{"format_version", 1},
                     {"kind", fair::to_string(kind)},
                     {"encoder", encoder.to_json()},
                     {"sensitive_col", sensitive_col},
                     {"level_a", level_a},
                     {"level_b", level_b},
                     {"prop_a", prop_a}};
    if (kind != FairModelKind::MNN) j["engine"] = engine.to_json();
    if (d_col >= 0) {
        j["d_col"] = d_col;
        j["d_value_for_a"] = d_value_for_a;
    }
    if (kind == FairModelKind::MO) {
        j["mo_b0"] = mo_b0;
        j["mo_b1"] = mo_b1;
    }
    if (kind == FairModelKind::MBC) {
        j["bary_a"] = bary_a;
        j["bary_b"] = bary_b;
    }
    if (kind == FairModelKind::MNN) {
        j["mlp"] = model::to_json(mlp);
        j["in_mean"] = in_mean;
        j["in_sd"] = in_sd;
        j["y_mean"] = y_mean;
        j["y_sd"] = y_sd;
        j["lambda"] = lambda;
    }
    return j;
}

inline FairModel FairModel::from_json(const nlohmann::json& j) {
    FairModel m;
    m.kind = fair_kind_from_string(j.at("kind"));
    m.encoder = data::Encoder::from_json(j.at("encoder"));
    m.sensitive_col = j.value("sensitive_col", std::string{});
    m.level_a = j.value("level_a", std::string{});
    m.level_b = j.value("level_b", std::string{});
    m.prop_a = j.value("prop_a", 0.5);
    if (j.contains("engine")) m.engine = model::EngineModel::from_json(j.at("engine"));
    if (j.contains("d_col")) {
        m.d_col = j.at("d_col").get<int>();
        m.d_value_for_a = j.at("d_value_for_a").get<double>();
    }
    if (m.kind == FairModelKind::MO) {
        m.mo_b0 = j.at("mo_b0").get<std::vector<double>>();
        m.mo_b1 = j.at("mo_b1").get<std::vector<double>>();
    }
    if (m.kind == FairModelKind::MBC) {
        m.bary_a = j.at("bary_a").get<std::vector<double>>();
        m.bary_b = j.at("bary_b").get<std::vector<double>>();
    }
    if (m.kind == FairModelKind::MNN) {
        m.mlp = model::mlp_from_json(j.at("mlp"));
        m.in_mean = j.at("in_mean").get<std::vector<double>>();
        m.in_sd = j.at("in_sd").get<std::vector<double>>();
        m.y_mean = j.at("y_mean").get<double>();
        m.y_sd = j.at("y_sd").get<double>();
        m.lambda = j.at("lambda").get<double>();
    }
    return m;
}

}  // namespace fairprice::fair

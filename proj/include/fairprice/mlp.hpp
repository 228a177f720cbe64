// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <vector>

#include <json.hpp>

#include "fairprice/common.hpp"
#include "fairprice/linalg.hpp"

namespace fairprice::model {

enum class OutputActivation { Identity, Softplus, Logistic };

inline std::string to_string(OutputActivation a) {
    switch (a) {
        case OutputActivation::Identity: return "identity";
        case OutputActivation::Softplus: return "softplus";
        case OutputActivation::Logistic: return "logistic";
    }
    throw DomainError("bad activation");
}

inline OutputActivation activation_from_string(const std::string& s) {
    if (s == "identity") return OutputActivation::Identity;
    if (s == "softplus") return OutputActivation::Softplus;
    if (s == "logistic") return OutputActivation::Logistic;
    throw DomainError("unknown activation: " + s);
}

inline double logistic(double z) {
    return z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
}

inline double softplus(double z) { return z > 30.0 ? z : std::log1p(std::exp(z)); }

// Feed-forward net: rectifier trunk layers shared by `head_count` scalar
// output heads. layer_sizes = {input, hidden...}; each head is one linear
// layer on the trunk output, passed through the output activation.
struct MlpModel {
    std::vector<int> layer_sizes{1};
    int head_count = 1;
    OutputActivation out_activation = OutputActivation::Identity;
    std::vector<double> weights;

    std::size_t trunk_weight_count() const {
        std::size_t c = 0;
        for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l)
            c += static_cast<std::size_t>(layer_sizes[l] + 1) *
                 static_cast<std::size_t>(layer_sizes[l + 1]);
        return c;
    }

    std::size_t weight_count() const {
        return trunk_weight_count() +
               static_cast<std::size_t>(head_count) *
                   static_cast<std::size_t>(layer_sizes.back() + 1);
    }

    void validate() const {
        if (layer_sizes.empty() || head_count < 1 || head_count > 2)
            throw DomainError("mlp: bad architecture");
        if (weights.size() != weight_count()) throw DomainError("mlp: weight vector length");
    }
};

namespace mlp_detail {

// One forward pass worth of state, reused across samples.
struct Workspace {
    std::vector<std::vector<double>> acts;  // acts[0] = input copy, then ReLU outputs
    double head_pre = 0.0;                  // head pre-activation
    int head = 0;
};

inline double activate_out(OutputActivation a, double z) {
    switch (a) {
        case OutputActivation::Identity: return z;
        case OutputActivation::Softplus: return softplus(z);
        case OutputActivation::Logistic: return logistic(z);
    }
    return z;
}

inline double activate_out_grad(OutputActivation a, double z) {
    switch (a) {
        case OutputActivation::Identity: return 1.0;
        case OutputActivation::Softplus: return logistic(z);
        case OutputActivation::Logistic: {
            const double s = logistic(z);
            return s * (1.0 - s);
        }
    }
    return 1.0;
}

inline double forward(const MlpModel& m, const double* x, int head, Workspace& ws) {
    const auto& sizes = m.layer_sizes;
    ws.acts.resize(sizes.size());
    ws.acts[0].assign(x, x + sizes[0]);
    std::size_t off = 0;
    for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
        const int fan_in = sizes[l];
        const int fan_out = sizes[l + 1];
        auto& out = ws.acts[l + 1];
        out.assign(static_cast<std::size_t>(fan_out), 0.0);
        const auto& in = ws.acts[l];
        for (int o = 0; o < fan_out; ++o) {
            const double* wrow = m.weights.data() + off +
                                 static_cast<std::size_t>(o) * static_cast<std::size_t>(fan_in);
            double z = dot(wrow, in.data(), static_cast<std::size_t>(fan_in));
            z += m.weights[off + static_cast<std::size_t>(fan_in) * static_cast<std::size_t>(fan_out) +
                           static_cast<std::size_t>(o)];
            out[static_cast<std::size_t>(o)] = z > 0.0 ? z : 0.0;  // ReLU
        }
        off += static_cast<std::size_t>(fan_in + 1) * static_cast<std::size_t>(fan_out);
    }
    const int trunk_out = sizes.back();
    const std::size_t head_off =
        off + static_cast<std::size_t>(head) * static_cast<std::size_t>(trunk_out + 1);
    double z = dot(m.weights.data() + head_off, ws.acts.back().data(),
                   static_cast<std::size_t>(trunk_out));
    z += m.weights[head_off + static_cast<std::size_t>(trunk_out)];
    ws.head_pre = z;
    ws.head = head;
    return activate_out(m.out_activation, z);
}

// Backprop from dL/d(head output); accumulates into grad.
inline void backward(const MlpModel& m, const Workspace& ws, double dout,
                     std::vector<double>& grad) {
    const auto& sizes = m.layer_sizes;
    const int trunk_out = sizes.back();
    const std::size_t trunk_w = m.trunk_weight_count();
    const std::size_t head_off =
        trunk_w + static_cast<std::size_t>(ws.head) * static_cast<std::size_t>(trunk_out + 1);

    const double dz = dout * activate_out_grad(m.out_activation, ws.head_pre);
    std::vector<double> delta(static_cast<std::size_t>(trunk_out));
    for (int i = 0; i < trunk_out; ++i) {
        grad[head_off + static_cast<std::size_t>(i)] +=
            dz * ws.acts.back()[static_cast<std::size_t>(i)];
        delta[static_cast<std::size_t>(i)] =
            dz * m.weights[head_off + static_cast<std::size_t>(i)];
    }
    grad[head_off + static_cast<std::size_t>(trunk_out)] += dz;

    // walk trunk layers backwards
    std::size_t off = trunk_w;
    for (std::size_t l = sizes.size() - 1; l-- > 0;) {
        const int fan_in = sizes[l];
        const int fan_out = sizes[l + 1];
        off -= static_cast<std::size_t>(fan_in + 1) * static_cast<std::size_t>(fan_out);
        const auto& out = ws.acts[l + 1];
        const auto& in = ws.acts[l];
        // ReLU gate
        for (int o = 0; o < fan_out; ++o)
            if (out[static_cast<std::size_t>(o)] <= 0.0) delta[static_cast<std::size_t>(o)] = 0.0;
        std::vector<double> next_delta(static_cast<std::size_t>(fan_in), 0.0);
        for (int o = 0; o < fan_out; ++o) {
            const double d = delta[static_cast<std::size_t>(o)];
            if (d == 0.0) continue;
            const std::size_t wrow =
                off + static_cast<std::size_t>(o) * static_cast<std::size_t>(fan_in);
            for (int i = 0; i < fan_in; ++i) {
                grad[wrow + static_cast<std::size_t>(i)] += d * in[static_cast<std::size_t>(i)];
                next_delta[static_cast<std::size_t>(i)] +=
                    d * m.weights[wrow + static_cast<std::size_t>(i)];
            }
            grad[off + static_cast<std::size_t>(fan_in) * static_cast<std::size_t>(fan_out) +
                 static_cast<std::size_t>(o)] += d;
        }
        delta = std::move(next_delta);
    }
}

}  // namespace mlp_detail

// Deterministic forward pass; returns one value per head.
inline std::vector<double> mlp_forward(const MlpModel& m, const double* x) {
    m.validate();
    mlp_detail::Workspace ws;
    std::vector<double> out(static_cast<std::size_t>(m.head_count));
    for (int h = 0; h < m.head_count; ++h) out[static_cast<std::size_t>(h)] =
        mlp_detail::forward(m, x, h, ws);
    return out;
}

inline MlpModel mlp_init(std::vector<int> layer_sizes, int head_count,
                         OutputActivation out_activation, std::uint64_t seed) {
    MlpModel m;
    m.layer_sizes = std::move(layer_sizes);
    m.head_count = head_count;
    m.out_activation = out_activation;
    m.weights.assign(m.weight_count(), 0.0);
    Rng rng = make_rng(seed, 17);
    std::size_t off = 0;
    const auto uni = [&](double r) {
        return (static_cast<double>(rng() >> 11) * 0x1.0p-53 * 2.0 - 1.0) * r;
    };
    for (std::size_t l = 0; l + 1 < m.layer_sizes.size(); ++l) {
        const int fan_in = m.layer_sizes[l];
        const int fan_out = m.layer_sizes[l + 1];
        const double r = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
        for (int k = 0; k < (fan_in + 1) * fan_out; ++k) m.weights[off++] = uni(r);
    }
    const int trunk_out = m.layer_sizes.back();
    const double r = std::sqrt(6.0 / static_cast<double>(trunk_out + 1));
    for (int h = 0; h < head_count; ++h)
        for (int k = 0; k < trunk_out + 1; ++k) m.weights[off++] = uni(r);
    return m;
}

struct MlpTrainParams {
    int epochs = 100;
    int batch = 32;
    double step_size = 1e-3;
    std::uint64_t seed = 0;
};

// loss(pred, target, &loss_value, &dloss_dpred)
using ScalarLoss = std::function<void(double, double, double&, double&)>;

inline void mse_loss(double pred, double target, double& loss, double& dpred) {
    const double e = pred - target;
    loss = e * e;
    dpred = 2.0 * e;
}

// Mini-batch SGD on head 0. Returns the per-epoch full-data training loss
// (entry 0 is the pre-training loss).
inline std::vector<double> mlp_train(MlpModel& m, const Matrix& x, const std::vector<double>& y,
                                     const ScalarLoss& loss_fn, const MlpTrainParams& params) {
    m.validate();
    const std::size_t n = x.rows();
    if (y.size() != n) throw DomainError("mlp_train: target length mismatch");
    if (params.batch < 1) throw DomainError("mlp_train: batch must be >= 1");

    mlp_detail::Workspace ws;
    const auto full_loss = [&] {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double li, dp;
            loss_fn(mlp_detail::forward(m, x.row(i), 0, ws), y[i], li, dp);
            s += li;
        }
        return s / static_cast<double>(n);
    };

    std::vector<double> history{full_loss()};
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::vector<double> grad(m.weights.size());
    Rng rng = make_rng(params.seed, 23);

    for (int epoch = 0; epoch < params.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        for (std::size_t start = 0; start < n; start += static_cast<std::size_t>(params.batch)) {
            const std::size_t end = std::min(n, start + static_cast<std::size_t>(params.batch));
            std::fill(grad.begin(), grad.end(), 0.0);
            for (std::size_t k = start; k < end; ++k) {
                const std::size_t i = order[k];
                double li, dp;
                const double pred = mlp_detail::forward(m, x.row(i), 0, ws);
                loss_fn(pred, y[i], li, dp);
                mlp_detail::backward(m, ws, dp / static_cast<double>(end - start), grad);
            }
            for (std::size_t j = 0; j < m.weights.size(); ++j)
                m.weights[j] -= params.step_size * grad[j];
        }
        const double l = full_loss();
        if (!std::isfinite(l))
            throw DivergenceError("mlp_train diverged; use a smaller step size");
        history.push_back(l);
    }
    return history;
}

inline nlohmann::json to_json(const MlpModel& m) {
    return nlohmann::json{{"type", "mlp"},
                          {"version", 1},
                          {"layer_sizes", m.layer_sizes},
                          {"head_count", m.head_count},
                          {"out_activation", to_string(m.out_activation)},
                          {"weights", m.weights}};
}

inline MlpModel mlp_from_json(const nlohmann::json& j) {
    MlpModel m;
    m.layer_sizes = j.at("layer_sizes").get<std::vector<int>>();
    m.head_count = j.at("head_count").get<int>();
    m.out_activation = activation_from_string(j.at("out_activation"));
    m.weights = j.at("weights").get<std::vector<double>>();
    m.validate();
    return m;
}

}  // namespace fairprice::model

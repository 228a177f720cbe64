// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "fairprice/synth.hpp"

namespace fixtures {

using fairprice::data::FeatureKind;
using fairprice::data::GeneratorConfig;

// Two numeric features independent of the group; premium g(x) + tau * 1[a].
inline GeneratorConfig independent(std::size_t n, double tau, double noise_sd = 5.0) {
    GeneratorConfig cfg;
    cfg.n = n;
    cfg.sensitive_name = "gender";
    cfg.sensitive_levels = {"F", "M"};
    cfg.proportions = {0.5, 0.5};
    GeneratorConfig::Feature x1;
    x1.kind = FeatureKind::Numeric;
    x1.num.name = "x1";
    x1.num.mean = 0.0;
    x1.num.sd = 1.0;
    GeneratorConfig::Feature x2;
    x2.kind = FeatureKind::Numeric;
    x2.num.name = "x2";
    x2.num.dist = "uniform";
    x2.num.low = 0.0;
    x2.num.high = 1.0;
    cfg.features = {x1, x2};
    cfg.intercept = 100.0;
    cfg.numeric_weights["x1"] = 10.0;
    cfg.numeric_weights["x2"] = 20.0;
    cfg.tau = tau;
    cfg.noise_sd = noise_sd;
    return cfg;
}

// x1 is a proxy: its mean shifts by `shift` for group a, and it carries
// premium weight, so D leaks through it even when D itself is dropped.
inline GeneratorConfig confounded(std::size_t n, double tau, double shift = 1.5,
                                  double noise_sd = 5.0) {
    GeneratorConfig cfg = independent(n, tau, noise_sd);
    cfg.features[0].num.group_mean_shift = shift;
    return cfg;
}

}  // namespace fixtures

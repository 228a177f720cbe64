// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "fairprice/common.hpp"
#include "fairprice/dataset.hpp"

namespace fairprice::data {

// Self-contained samplers; std::*_distribution sequences vary across standard
// libraries and these outputs must be reproducible byte-for-byte.
namespace sample {

inline double uniform01(Rng& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double uniform(Rng& rng, double lo, double hi) { return lo + (hi - lo) * uniform01(rng); }

inline double normal(Rng& rng, double mean, double sd) {
    double u1 = uniform01(rng);
    while (u1 <= 0.0) u1 = uniform01(rng);
    const double u2 = uniform01(rng);
    const double z = std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    return mean + sd * z;
}

// Knuth's method; fine for the modest rates used in fixtures.
inline int poisson(Rng& rng, double lambda) {
    const double limit = std::exp(-lambda);
    double p = 1.0;
    int k = 0;
    do {
        ++k;
        p *= uniform01(rng);
    } while (p > limit);
    return k - 1;
}

inline int categorical(Rng& rng, const std::vector<double>& probs) {
    const double u = uniform01(rng);
    double acc = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        acc += probs[i];
        if (u < acc) return static_cast<int>(i);
    }
    return static_cast<int>(probs.size()) - 1;
}

}  // namespace sample

// Generator description: group proportions, feature distributions, and a
// ground-truth premium of the form g(x) + tau * 1[D = a] plus noise.
struct GeneratorConfig {
    struct NumericFeature {
        std::string name;
        std::string dist = "normal";  // "normal" | "uniform"
        double mean = 0.0, sd = 1.0;  // normal
        double low = 0.0, high = 1.0; // uniform
        double group_mean_shift = 0.0;  // added for group-a rows (proxy knob)
    };
    struct CategoricalFeature {
        std::string name;
        std::vector<std::string> levels;
        std::vector<double> probs;
        std::map<std::string, std::vector<double>> group_probs;  // optional per-level override
    };
    struct Feature {
        FeatureKind kind;
        NumericFeature num;
        CategoricalFeature cat;
    };

    std::size_t n = 0;
    std::string target = "claim";
    std::string sensitive_name = "group";
    std::vector<std::string> sensitive_levels{"a", "b"};
    std::vector<double> proportions{0.5, 0.5};
    std::optional<std::string> level_a;
    std::vector<Feature> features;

    double intercept = 0.0;
    std::map<std::string, double> numeric_weights;
    std::map<std::string, std::map<std::string, double>> categorical_weights;
    double tau = 0.0;
    double noise_sd = 0.0;

    std::optional<std::string> count_name;
    double count_lambda = 0.0;
    std::optional<std::string> exposure_name;
    double exposure_low = 1.0, exposure_high = 1.0;

    void validate() const {
        if (n < 2) throw DomainError("generator needs n >= 2");
        if (proportions.size() != 2 || sensitive_levels.size() != 2)
            throw DomainError("generator needs exactly two sensitive levels");
        const double s = proportions[0] + proportions[1];
        if (!(proportions[0] > 0.0 && proportions[1] > 0.0 && std::abs(s - 1.0) < 1e-9))
            throw DomainError("group proportions must be positive and sum to 1");
        if (features.empty()) throw DomainError("generator needs at least one feature");
    }
};

inline GeneratorConfig generator_from_json(const nlohmann::json& j) {
    static const std::vector<std::string> known{"n",        "target",  "sensitive", "features",
                                                "premium",  "count",   "exposure",  "seed"};
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (std::find(known.begin(), known.end(), it.key()) == known.end())
            throw DomainError("unknown generator key: " + it.key());
    }
    GeneratorConfig cfg;
    cfg.n = j.at("n").get<std::size_t>();
    cfg.target = j.value("target", std::string{"claim"});
    const auto& sj = j.at("sensitive");
    cfg.sensitive_name = sj.at("name").get<std::string>();
    cfg.sensitive_levels = sj.at("levels").get<std::vector<std::string>>();
    cfg.proportions = sj.at("proportions").get<std::vector<double>>();
    if (sj.contains("level_a")) cfg.level_a = sj.at("level_a").get<std::string>();
    for (const auto& fj : j.at("features")) {
        GeneratorConfig::Feature f;
        const auto kind = fj.at("kind").get<std::string>();
        if (kind == "numeric") {
            f.kind = FeatureKind::Numeric;
            f.num.name = fj.at("name").get<std::string>();
            f.num.dist = fj.value("dist", std::string{"normal"});
            f.num.mean = fj.value("mean", 0.0);
            f.num.sd = fj.value("sd", 1.0);
            f.num.low = fj.value("low", 0.0);
            f.num.high = fj.value("high", 1.0);
            f.num.group_mean_shift = fj.value("group_mean_shift", 0.0);
        } else if (kind == "categorical") {
            f.kind = FeatureKind::Categorical;
            f.cat.name = fj.at("name").get<std::string>();
            f.cat.levels = fj.at("levels").get<std::vector<std::string>>();
            f.cat.probs = fj.at("probs").get<std::vector<double>>();
            if (fj.contains("group_probs"))
                f.cat.group_probs =
                    fj.at("group_probs").get<std::map<std::string, std::vector<double>>>();
        } else {
            throw DomainError("unknown feature kind: " + kind);
        }
        cfg.features.push_back(std::move(f));
    }
    const auto& pj = j.at("premium");
    cfg.intercept = pj.value("intercept", 0.0);
    cfg.tau = pj.value("tau", 0.0);
    cfg.noise_sd = pj.value("noise_sd", 0.0);
    if (pj.contains("weights")) {
        for (auto it = pj.at("weights").begin(); it != pj.at("weights").end(); ++it) {
            if (it.value().is_number()) {
                cfg.numeric_weights[it.key()] = it.value().get<double>();
            } else {
                cfg.categorical_weights[it.key()] =
                    it.value().get<std::map<std::string, double>>();
            }
        }
    }
    if (j.contains("count")) {
        cfg.count_name = j.at("count").at("name").get<std::string>();
        cfg.count_lambda = j.at("count").value("lambda", 0.2);
    }
    if (j.contains("exposure")) {
        cfg.exposure_name = j.at("exposure").at("name").get<std::string>();
        cfg.exposure_low = j.at("exposure").value("low", 1.0);
        cfg.exposure_high = j.at("exposure").value("high", 1.0);
    }
    cfg.validate();
    return cfg;
}

inline nlohmann::json generator_to_json(const GeneratorConfig& cfg) {
    nlohmann::json features = nlohmann::json::array();
    for (const auto& f : cfg.features) {
        if (f.kind == FeatureKind::Numeric) {
            features.push_back({{"name", f.num.name},
                                {"kind", "numeric"},
                                {"dist", f.num.dist},
                                {"mean", f.num.mean},
                                {"sd", f.num.sd},
                                {"low", f.num.low},
                                {"high", f.num.high},
                                {"group_mean_shift", f.num.group_mean_shift}});
        } else {
            nlohmann::json fj{{"name", f.cat.name},
                              {"kind", "categorical"},
                              {"levels", f.cat.levels},
                              {"probs", f.cat.probs}};
            if (!f.cat.group_probs.empty()) fj["group_probs"] = f.cat.group_probs;
            features.push_back(fj);
        }
    }
    nlohmann::json weights = nlohmann::json::object();
    for (const auto& [k, v] : cfg.numeric_weights) weights[k] = v;
    for (const auto& [k, v] : cfg.categorical_weights) weights[k] = v;
    nlohmann::json j{{"n", cfg.n},
                     {"target", cfg.target},
                     {"sensitive",
                      {{"name", cfg.sensitive_name},
                       {"levels", cfg.sensitive_levels},
                       {"proportions", cfg.proportions}}},
                     {"features", features},
                     {"premium",
                      {{"intercept", cfg.intercept},
                       {"weights", weights},
                       {"tau", cfg.tau},
                       {"noise_sd", cfg.noise_sd}}}};
    if (cfg.level_a) j["sensitive"]["level_a"] = *cfg.level_a;
    if (cfg.count_name) j["count"] = {{"name", *cfg.count_name}, {"lambda", cfg.count_lambda}};
    if (cfg.exposure_name)
        j["exposure"] = {{"name", *cfg.exposure_name},
                         {"low", cfg.exposure_low},
                         {"high", cfg.exposure_high}};
    return j;
}

// Noise-free conditional mean g(x) + tau * 1[D = a], recomputed from a
// generated dataset's feature values.
inline std::vector<double> ground_truth_premium(const GeneratorConfig& cfg, const Dataset& ds) {
    const std::size_t n = ds.n_rows();
    std::vector<double> mu(n, cfg.intercept);
    for (const auto& [name, w] : cfg.numeric_weights) {
        const auto& col = ds.column(name);
        for (std::size_t i = 0; i < n; ++i) mu[i] += w * col.numeric[i];
    }
    for (const auto& [name, level_w] : cfg.categorical_weights) {
        const auto& col = ds.column(name);
        for (std::size_t i = 0; i < n; ++i) {
            const auto it = level_w.find(col.levels[col.codes[i]]);
            if (it != level_w.end()) mu[i] += it->second;
        }
    }
    const auto mask = ds.group_a_mask();
    for (std::size_t i = 0; i < n; ++i) mu[i] += cfg.tau * mask[i];
    return mu;
}

inline Dataset synth_generate(const GeneratorConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    const std::size_t n = cfg.n;
    const std::string level_a = cfg.level_a.value_or(
        std::min(cfg.sensitive_levels[0], cfg.sensitive_levels[1]));
    const double p_a = cfg.sensitive_levels[0] == level_a ? cfg.proportions[0]
                                                          : cfg.proportions[1];

    Rng rng_group = make_rng(seed, 0);
    std::vector<int> is_a(n);
    for (std::size_t i = 0; i < n; ++i) is_a[i] = sample::uniform01(rng_group) < p_a ? 1 : 0;

    Schema schema;
    schema.sensitive = cfg.sensitive_name;
    schema.target = cfg.target;
    schema.sensitive_level_a = level_a;
    schema.columns.push_back({cfg.sensitive_name, FeatureKind::Categorical});

    std::vector<std::vector<std::string>> cells;  // per column string values
    std::vector<std::string> sens(n);
    const std::string level_b = cfg.sensitive_levels[0] == level_a ? cfg.sensitive_levels[1]
                                                                   : cfg.sensitive_levels[0];
    for (std::size_t i = 0; i < n; ++i) sens[i] = is_a[i] ? level_a : level_b;
    cells.push_back(std::move(sens));

    // feature draws, one rng substream per feature
    std::vector<std::vector<double>> numeric_values;
    std::uint64_t stream = 1;
    for (const auto& f : cfg.features) {
        Rng rng = make_rng(seed, stream++);
        std::vector<std::string> col(n);
        if (f.kind == FeatureKind::Numeric) {
            schema.columns.push_back({f.num.name, FeatureKind::Numeric});
            std::vector<double> vals(n);
            for (std::size_t i = 0; i < n; ++i) {
                double v = f.num.dist == "uniform" ? sample::uniform(rng, f.num.low, f.num.high)
                                                   : sample::normal(rng, f.num.mean, f.num.sd);
                if (is_a[i]) v += f.num.group_mean_shift;
                vals[i] = v;
                col[i] = fmt_double(v);
            }
            numeric_values.push_back(std::move(vals));
        } else {
            schema.columns.push_back({f.cat.name, FeatureKind::Categorical});
            for (std::size_t i = 0; i < n; ++i) {
                const std::string& grp = is_a[i] ? level_a : level_b;
                const auto it = f.cat.group_probs.find(grp);
                const auto& probs = it != f.cat.group_probs.end() ? it->second : f.cat.probs;
                col[i] = f.cat.levels[static_cast<std::size_t>(sample::categorical(rng, probs))];
            }
        }
        cells.push_back(std::move(col));
    }

    // ground-truth mean
    std::vector<double> mu(n, cfg.intercept);
    {
        std::size_t num_idx = 0;
        for (const auto& f : cfg.features) {
            if (f.kind == FeatureKind::Numeric) {
                const auto wi = cfg.numeric_weights.find(f.num.name);
                if (wi != cfg.numeric_weights.end())
                    for (std::size_t i = 0; i < n; ++i) mu[i] += wi->second * numeric_values[num_idx][i];
                ++num_idx;
            } else {
                const auto wi = cfg.categorical_weights.find(f.cat.name);
                if (wi != cfg.categorical_weights.end()) {
                    const auto& col = cells[&f - cfg.features.data() + 1];
                    for (std::size_t i = 0; i < n; ++i) {
                        const auto lw = wi->second.find(col[i]);
                        if (lw != wi->second.end()) mu[i] += lw->second;
                    }
                }
            }
        }
    }
    for (std::size_t i = 0; i < n; ++i)
        if (is_a[i]) mu[i] += cfg.tau;

    Rng rng_noise = make_rng(seed, stream++);
    Rng rng_count = make_rng(seed, stream++);
    Rng rng_expo = make_rng(seed, stream++);

    std::vector<std::string> counts(n), target(n), exposure(n);
    for (std::size_t i = 0; i < n; ++i) {
        double y;
        if (cfg.count_name) {
            const int k = sample::poisson(rng_count, cfg.count_lambda);
            counts[i] = std::to_string(k);
            double total = 0.0;
            for (int c = 0; c < k; ++c)
                total += std::max(mu[i] + sample::normal(rng_noise, 0.0, cfg.noise_sd), 1.0);
            y = total;
        } else {
            y = mu[i] + (cfg.noise_sd > 0.0 ? sample::normal(rng_noise, 0.0, cfg.noise_sd) : 0.0);
            if (y < 0.0) y = 0.0;  // keep the target admissible; fixtures keep this improbable
        }
        target[i] = fmt_double(y);
        if (cfg.exposure_name)
            exposure[i] = fmt_double(sample::uniform(rng_expo, cfg.exposure_low, cfg.exposure_high));
    }

    if (cfg.count_name) {
        schema.columns.push_back({*cfg.count_name, FeatureKind::Numeric});
        schema.count_target = *cfg.count_name;
        cells.push_back(std::move(counts));
    }
    if (cfg.exposure_name) {
        schema.columns.push_back({*cfg.exposure_name, FeatureKind::Numeric});
        schema.exposure = *cfg.exposure_name;
        cells.push_back(std::move(exposure));
    }
    schema.columns.push_back({cfg.target, FeatureKind::Numeric});
    cells.push_back(std::move(target));
    schema.validate();

    std::vector<std::vector<std::string>> rows(n, std::vector<std::string>(cells.size()));
    for (std::size_t c = 0; c < cells.size(); ++c)
        for (std::size_t i = 0; i < n; ++i) rows[i][c] = cells[c][i];

    Dataset ds = detail::finalize_rows(schema, rows, 0);
    ds.provenance["generator"] = generator_to_json(cfg);
    ds.provenance["seed"] = seed;
    return ds;
}

}  // namespace fairprice::data

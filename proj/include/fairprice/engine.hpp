// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "fairprice/gbt.hpp"
#include "fairprice/glm.hpp"

namespace fairprice::model {

enum class EngineKind { Glm, Gbt };

inline std::string to_string(EngineKind k) { return k == EngineKind::Glm ? "glm" : "gbt"; }

inline EngineKind engine_kind_from_string(const std::string& s) {
    if (s == "glm") return EngineKind::Glm;
    if (s == "gbt") return EngineKind::Gbt;
    throw DomainError("unknown engine: " + s);
}

// One knob for both statistical engines: the objective names the error law,
// each engine realizes it its own way (GLM family / GBT deviance loss).
struct EngineConfig {
    EngineKind kind = EngineKind::Glm;
    Family objective = Family::Gaussian;
    GbtParams gbt;

    static EngineConfig from_json(const nlohmann::json& j) {
        EngineConfig cfg;
        cfg.kind = engine_kind_from_string(j.value("kind", std::string{"glm"}));
        cfg.objective = family_from_string(j.value("objective", std::string{"gaussian"}));
        if (j.contains("gbt")) {
            const auto& g = j.at("gbt");
            cfg.gbt.n_trees = g.value("n_trees", cfg.gbt.n_trees);
            cfg.gbt.max_depth = g.value("max_depth", cfg.gbt.max_depth);
            cfg.gbt.learning_rate = g.value("learning_rate", cfg.gbt.learning_rate);
            cfg.gbt.min_leaf = g.value("min_leaf", cfg.gbt.min_leaf);
            cfg.gbt.lambda_l2 = g.value("lambda_l2", cfg.gbt.lambda_l2);
        }
        return cfg;
    }

    nlohmann::json to_json() const {
        return nlohmann::json{{"kind", model::to_string(kind)},
                              {"objective", model::to_string(objective)},
                              {"gbt",
                               {{"n_trees", gbt.n_trees},
                                {"max_depth", gbt.max_depth},
                                {"learning_rate", gbt.learning_rate},
                                {"min_leaf", gbt.min_leaf},
                                {"lambda_l2", gbt.lambda_l2}}}};
    }
};

inline GbtLoss loss_for(Family f) {
    switch (f) {
        case Family::Gaussian: return GbtLoss::SquaredError;
        case Family::Poisson: return GbtLoss::PoissonDeviance;
        case Family::Gamma: return GbtLoss::GammaDeviance;
    }
    throw DomainError("bad family");
}

// A fitted engine; immutable, serializable, engine-agnostic to callers.
struct EngineModel {
    EngineKind kind = EngineKind::Glm;
    GlmModel glm;
    GbtModel gbt;

    std::vector<double> predict(const data::ModelMatrix& mm) const {
        return kind == EngineKind::Glm ? glm_predict(glm, mm) : gbt_predict(gbt, mm);
    }

    nlohmann::json to_json() const {
        return kind == EngineKind::Glm ? model::to_json(glm) : model::to_json(gbt);
    }

    static EngineModel from_json(const nlohmann::json& j) {
        EngineModel m;
        const auto type = j.at("type").get<std::string>();
        if (type == "glm") {
            m.kind = EngineKind::Glm;
            m.glm = glm_from_json(j);
        } else if (type == "gbt") {
            m.kind = EngineKind::Gbt;
            m.gbt = gbt_from_json(j);
        } else {
            throw DomainError("unknown engine payload: " + type);
        }
        return m;
    }
};

inline EngineModel fit_engine(const EngineConfig& cfg, const data::ModelMatrix& mm,
                              const std::vector<double>& y,
                              const std::vector<double>& weights = {}) {
    EngineModel m;
    m.kind = cfg.kind;
    if (cfg.kind == EngineKind::Glm) {
        m.glm = glm_fit(mm, y, cfg.objective, weights);
    } else {
        m.gbt = gbt_fit(mm, y, loss_for(cfg.objective), cfg.gbt, weights);
    }
    return m;
}

}  // namespace fairprice::model

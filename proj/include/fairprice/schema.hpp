// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "fairprice/common.hpp"

namespace fairprice::data {

enum class FeatureKind { Numeric, Categorical };

inline std::string to_string(FeatureKind k) {
    return k == FeatureKind::Numeric ? "numeric" : "categorical";
}

inline FeatureKind feature_kind_from_string(const std::string& s) {
    if (s == "numeric") return FeatureKind::Numeric;
    if (s == "categorical") return FeatureKind::Categorical;
    throw SchemaError("unknown feature kind: " + s);
}

struct ColumnSpec {
    std::string name;
    FeatureKind kind = FeatureKind::Numeric;
};

// Column layout of a dataset. `sensitive` may be empty for plain prediction
// data; all fairness constructions require it.
struct Schema {
    std::vector<ColumnSpec> columns;
    std::string sensitive;
    std::string target;
    std::optional<std::string> count_target;
    std::optional<std::string> exposure;
    std::vector<std::string> permitted;
    // Which sensitive level plays the "group a" role in group-ratio metrics.
    // Defaults to the alphabetically first observed level when unset.
    std::optional<std::string> sensitive_level_a;

    bool has_column(const std::string& name) const {
        return std::any_of(columns.begin(), columns.end(),
                           [&](const ColumnSpec& c) { return c.name == name; });
    }

    const ColumnSpec& column(const std::string& name) const {
        for (const auto& c : columns)
            if (c.name == name) return c;
        throw SchemaError("unknown column: " + name);
    }

    // Non-protected predictor columns: everything except the sensitive
    // attribute, targets and exposure.
    std::vector<std::string> feature_columns() const {
        std::vector<std::string> out;
        for (const auto& c : columns) {
            if (c.name == sensitive || c.name == target) continue;
            if (count_target && c.name == *count_target) continue;
            if (exposure && c.name == *exposure) continue;
            out.push_back(c.name);
        }
        return out;
    }

    void validate() const {
        if (columns.empty()) throw SchemaError("schema has no columns");
        for (std::size_t i = 0; i < columns.size(); ++i)
            for (std::size_t j = i + 1; j < columns.size(); ++j)
                if (columns[i].name == columns[j].name)
                    throw SchemaError("duplicate column: " + columns[i].name);
        if (target.empty()) throw SchemaError("schema needs a target column");
        if (!has_column(target)) throw SchemaError("unknown target column: " + target);
        if (column(target).kind != FeatureKind::Numeric)
            throw SchemaError("target column must be numeric: " + target);
        if (!sensitive.empty()) {
            if (!has_column(sensitive)) throw SchemaError("unknown sensitive column: " + sensitive);
            if (column(sensitive).kind != FeatureKind::Categorical)
                throw SchemaError("sensitive column must be categorical: " + sensitive);
        }
        if (count_target && !has_column(*count_target))
            throw SchemaError("unknown count_target column: " + *count_target);
        if (exposure && !has_column(*exposure))
            throw SchemaError("unknown exposure column: " + *exposure);
        const auto features = feature_columns();
        for (const auto& p : permitted) {
            if (std::find(features.begin(), features.end(), p) == features.end())
                throw SchemaError("permitted column is not a non-protected feature: " + p);
        }
    }
};

inline nlohmann::json to_json(const Schema& s) {
    nlohmann::json cols = nlohmann::json::array();
    for (const auto& c : s.columns)
        cols.push_back({{"name", c.name}, {"kind", to_string(c.kind)}});
    nlohmann::json j{{"columns", cols}, {"sensitive", s.sensitive}, {"target", s.target}};
    if (s.count_target) j["count_target"] = *s.count_target;
    if (s.exposure) j["exposure"] = *s.exposure;
    if (!s.permitted.empty()) j["permitted"] = s.permitted;
    if (s.sensitive_level_a) j["sensitive_level_a"] = *s.sensitive_level_a;
    return j;
}

inline Schema schema_from_json(const nlohmann::json& j) {
    static const std::vector<std::string> known{
        "columns", "sensitive", "target", "count_target", "exposure", "permitted",
        "sensitive_level_a"};
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (std::find(known.begin(), known.end(), it.key()) == known.end())
            throw SchemaError("unknown schema key: " + it.key());
    }
    Schema s;
    if (!j.contains("columns")) throw SchemaError("schema missing 'columns'");
    for (const auto& c : j.at("columns")) {
        s.columns.push_back(
            {c.at("name").get<std::string>(), feature_kind_from_string(c.at("kind"))});
    }
    s.sensitive = j.value("sensitive", std::string{});
    s.target = j.value("target", std::string{});
    if (j.contains("count_target")) s.count_target = j.at("count_target").get<std::string>();
    if (j.contains("exposure")) s.exposure = j.at("exposure").get<std::string>();
    if (j.contains("permitted")) s.permitted = j.at("permitted").get<std::vector<std::string>>();
    if (j.contains("sensitive_level_a"))
        s.sensitive_level_a = j.at("sensitive_level_a").get<std::string>();
    s.validate();
    return s;
}

}  // namespace fairprice::data

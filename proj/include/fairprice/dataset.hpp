// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "fairprice/common.hpp"
#include "fairprice/csv.hpp"
#include "fairprice/linalg.hpp"
#include "fairprice/schema.hpp"

namespace fairprice::data {

struct Column {
    std::string name;
    FeatureKind kind = FeatureKind::Numeric;
    std::vector<double> numeric;         // Numeric storage
    std::vector<int> codes;              // Categorical storage, indexes into levels
    std::vector<std::string> levels;     // sorted, so codes are order-independent

    std::size_t size() const {
        return kind == FeatureKind::Numeric ? numeric.size() : codes.size();
    }
};

struct NumericRange {
    double min = 0.0;
    double max = 0.0;
    double span() const { return max - min; }
};

// Immutable after construction. Rows are fully observed (ingestion drops and
// counts incomplete rows). numeric_ranges always refer to the training split
// the dataset descends from.
class Dataset {
public:
    Schema schema;
    std::vector<Column> columns;                    // same order as schema.columns
    std::map<std::string, NumericRange> numeric_ranges;
    nlohmann::json provenance = nlohmann::json::object();
    std::size_t dropped_rows = 0;

    std::size_t n_rows() const { return columns.empty() ? 0 : columns.front().size(); }

    const Column& column(const std::string& name) const {
        for (const auto& c : columns)
            if (c.name == name) return c;
        throw SchemaError("unknown column: " + name);
    }

    Column& column(const std::string& name) {
        for (auto& c : columns)
            if (c.name == name) return c;
        throw SchemaError("unknown column: " + name);
    }

    const std::vector<double>& target() const { return column(schema.target).numeric; }

    bool has_sensitive() const { return !schema.sensitive.empty(); }

    const Column& sensitive_column() const {
        if (!has_sensitive()) throw SchemaError("dataset has no sensitive column");
        return column(schema.sensitive);
    }

    // Index of the level playing "group a" (female in the motor datasets).
    int group_a_code() const {
        const Column& s = sensitive_column();
        if (schema.sensitive_level_a) {
            const auto it = std::find(s.levels.begin(), s.levels.end(), *schema.sensitive_level_a);
            if (it == s.levels.end())
                throw SchemaError("sensitive_level_a not observed: " + *schema.sensitive_level_a);
            return static_cast<int>(it - s.levels.begin());
        }
        return 0;  // levels are sorted; first is the default "a"
    }

    // 1.0 for rows in group a, else 0.0.
    std::vector<double> group_a_mask() const {
        const Column& s = sensitive_column();
        const int a = group_a_code();
        std::vector<double> mask(s.codes.size());
        for (std::size_t i = 0; i < s.codes.size(); ++i) mask[i] = s.codes[i] == a ? 1.0 : 0.0;
        return mask;
    }

    double group_a_proportion() const {
        const auto mask = group_a_mask();
        double s = std::accumulate(mask.begin(), mask.end(), 0.0);
        return s / static_cast<double>(mask.size());
    }

    void recompute_ranges() {
        numeric_ranges.clear();
        for (const auto& c : columns) {
            if (c.kind != FeatureKind::Numeric) continue;
            NumericRange r{std::numeric_limits<double>::infinity(),
                           -std::numeric_limits<double>::infinity()};
            for (double v : c.numeric) {
                r.min = std::min(r.min, v);
                r.max = std::max(r.max, v);
            }
            numeric_ranges[c.name] = r;
        }
    }

    Dataset subset(const std::vector<std::size_t>& rows) const {
        Dataset out;
        out.schema = schema;
        out.numeric_ranges = numeric_ranges;
        out.provenance = provenance;
        for (const auto& c : columns) {
            Column nc;
            nc.name = c.name;
            nc.kind = c.kind;
            nc.levels = c.levels;
            if (c.kind == FeatureKind::Numeric) {
                nc.numeric.reserve(rows.size());
                for (auto r : rows) nc.numeric.push_back(c.numeric[r]);
            } else {
                nc.codes.reserve(rows.size());
                for (auto r : rows) nc.codes.push_back(c.codes[r]);
            }
            out.columns.push_back(std::move(nc));
        }
        return out;
    }
};

namespace detail {

// Raw string table -> typed columns. Levels are collected, sorted and coded
// so ingestion order never changes the encoding.
inline Dataset finalize_rows(const Schema& schema,
                             const std::vector<std::vector<std::string>>& rows,
                             std::size_t dropped) {
    Dataset ds;
    ds.schema = schema;
    ds.dropped_rows = dropped;
    const std::size_t n = rows.size();
    if (n < 2) throw DomainError("dataset needs at least 2 complete rows");
    for (std::size_t c = 0; c < schema.columns.size(); ++c) {
        Column col;
        col.name = schema.columns[c].name;
        col.kind = schema.columns[c].kind;
        if (col.kind == FeatureKind::Numeric) {
            col.numeric.resize(n);
            for (std::size_t i = 0; i < n; ++i) {
                double v;
                if (!csv::parse_number(rows[i][c], v))
                    throw ParseError("non-numeric token '" + rows[i][c] + "' in column '" +
                                     col.name + "' at data row " + std::to_string(i + 1));
                col.numeric[i] = v;
            }
        } else {
            std::vector<std::string> observed;
            for (std::size_t i = 0; i < n; ++i) observed.push_back(rows[i][c]);
            col.levels = observed;
            std::sort(col.levels.begin(), col.levels.end());
            col.levels.erase(std::unique(col.levels.begin(), col.levels.end()), col.levels.end());
            col.codes.resize(n);
            for (std::size_t i = 0; i < n; ++i) {
                const auto it = std::lower_bound(col.levels.begin(), col.levels.end(), observed[i]);
                col.codes[i] = static_cast<int>(it - col.levels.begin());
            }
        }
        ds.columns.push_back(std::move(col));
    }
    if (!schema.sensitive.empty()) {
        const auto& s = ds.column(schema.sensitive);
        if (s.levels.size() != 2)
            throw CardinalityError("sensitive column '" + schema.sensitive + "' has " +
                                   std::to_string(s.levels.size()) + " observed levels, need 2");
    }
    for (double v : ds.target())
        if (v < 0.0) throw DomainError("target column has negative value");
    ds.recompute_ranges();
    return ds;
}

}  // namespace detail

inline Dataset load_csv(const std::string& path, const Schema& schema) {
    schema.validate();
    csv::Reader reader(path);
    std::vector<std::string> header;
    if (!reader.next(header)) throw ParseError("empty CSV: " + path);
    // map schema columns onto header positions
    std::vector<std::size_t> pos(schema.columns.size());
    for (const auto& h : header)
        if (!schema.has_column(h)) throw SchemaError("unknown column in CSV header: " + h);
    for (std::size_t c = 0; c < schema.columns.size(); ++c) {
        const auto it = std::find(header.begin(), header.end(), schema.columns[c].name);
        if (it == header.end())
            throw SchemaError("CSV header missing column: " + schema.columns[c].name);
        pos[c] = static_cast<std::size_t>(it - header.begin());
    }
    std::vector<std::vector<std::string>> rows;
    std::size_t dropped = 0;
    std::vector<std::string> raw;
    while (reader.next(raw)) {
        if (raw.size() == 1 && raw[0].empty()) continue;  // trailing blank line
        if (raw.size() != header.size())
            throw ParseError("row with " + std::to_string(raw.size()) + " fields, expected " +
                             std::to_string(header.size()));
        std::vector<std::string> row(schema.columns.size());
        bool missing = false;
        for (std::size_t c = 0; c < schema.columns.size(); ++c) {
            row[c] = raw[pos[c]];
            if (row[c].empty()) missing = true;
        }
        if (missing) {
            ++dropped;
            continue;
        }
        rows.push_back(std::move(row));
    }
    Dataset ds = detail::finalize_rows(schema, rows, dropped);
    ds.provenance["source"] = path;
    ds.provenance["dropped_rows"] = dropped;
    return ds;
}

inline void save_csv(const Dataset& ds, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write file: " + path);
    std::vector<std::string> header;
    for (const auto& c : ds.columns) header.push_back(c.name);
    out << csv::join_row(header) << "\n";
    const std::size_t n = ds.n_rows();
    std::vector<std::string> fields(ds.columns.size());
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t c = 0; c < ds.columns.size(); ++c) {
            const auto& col = ds.columns[c];
            fields[c] = col.kind == FeatureKind::Numeric ? fmt_double(col.numeric[i])
                                                         : col.levels[col.codes[i]];
        }
        out << csv::join_row(fields) << "\n";
    }
}

// JSON sidecar with schema, ranges and provenance; written next to the CSV.
inline nlohmann::json sidecar_json(const Dataset& ds) {
    nlohmann::json ranges = nlohmann::json::object();
    for (const auto& [name, r] : ds.numeric_ranges) ranges[name] = {r.min, r.max};
    return nlohmann::json{{"schema", to_json(ds.schema)},
                          {"numeric_ranges", ranges},
                          {"provenance", ds.provenance},
                          {"dropped_rows", ds.dropped_rows},
                          {"n_rows", ds.n_rows()}};
}

// Stratified split preserving sensitive-group shares; both halves inherit the
// training half's numeric ranges.
inline std::pair<Dataset, Dataset> split(const Dataset& ds, double test_fraction,
                                         std::uint64_t seed) {
    if (!(test_fraction > 0.0 && test_fraction < 1.0))
        throw DomainError("test_fraction must lie in (0,1)");
    const std::size_t n = ds.n_rows();
    if (static_cast<double>(n) * test_fraction < 1.0)
        throw DomainError("test fraction selects no rows");

    // strata: sensitive groups when present, otherwise one stratum
    std::vector<std::vector<std::size_t>> strata;
    if (ds.has_sensitive()) {
        const auto& s = ds.sensitive_column();
        strata.resize(s.levels.size());
        for (std::size_t i = 0; i < n; ++i) strata[s.codes[i]].push_back(i);
    } else {
        strata.emplace_back(n);
        std::iota(strata[0].begin(), strata[0].end(), 0);
    }

    std::vector<std::size_t> test_idx, train_idx;
    for (std::size_t g = 0; g < strata.size(); ++g) {
        auto rows = strata[g];
        Rng rng = make_rng(seed, g);
        std::shuffle(rows.begin(), rows.end(), rng);
        const std::size_t k = static_cast<std::size_t>(
            std::llround(static_cast<double>(rows.size()) * test_fraction));
        for (std::size_t i = 0; i < rows.size(); ++i)
            (i < k ? test_idx : train_idx).push_back(rows[i]);
    }
    std::sort(test_idx.begin(), test_idx.end());
    std::sort(train_idx.begin(), train_idx.end());

    Dataset train = ds.subset(train_idx);
    Dataset test = ds.subset(test_idx);
    train.recompute_ranges();
    test.numeric_ranges = train.numeric_ranges;  // test distances use training ranges
    return {std::move(train), std::move(test)};
}

// ---------------------------------------------------------------------------
// Design-matrix encoding
// ---------------------------------------------------------------------------

struct ModelMatrix {
    Matrix design;
    std::vector<std::string> column_names;
};

// Deterministic one-hot encoder. Categorical levels are the training-observed
// set; the alphabetically first level is the dropped reference. Unseen levels
// at prediction time map to the reference (all indicator columns zero).
class Encoder {
public:
    Encoder() = default;

    // `feature_names` picks which dataset columns enter the design.
    Encoder(const Dataset& train, std::vector<std::string> feature_names)
        : features_(std::move(feature_names)) {
        for (const auto& name : features_) {
            const Column& c = train.column(name);
            Entry e;
            e.name = name;
            e.kind = c.kind;
            e.levels = c.levels;
            entries_.push_back(std::move(e));
        }
        for (const auto& e : entries_) {
            if (e.kind == FeatureKind::Numeric) {
                names_.push_back(e.name);
            } else {
                for (std::size_t l = 1; l < e.levels.size(); ++l)
                    names_.push_back(e.name + "=" + e.levels[l]);
            }
        }
        if (names_.empty()) throw DomainError("encoder produces no design columns");
    }

    std::size_t width() const { return names_.size(); }
    const std::vector<std::string>& column_names() const { return names_; }
    const std::vector<std::string>& feature_names() const { return features_; }

    ModelMatrix encode(const Dataset& ds) const {
        const std::size_t n = ds.n_rows();
        ModelMatrix mm;
        mm.design = Matrix(n, width());
        mm.column_names = names_;
        std::size_t col = 0;
        for (const auto& e : entries_) {
            const Column& c = ds.column(e.name);
            if (c.kind != e.kind) throw SchemaError("column kind changed: " + e.name);
            if (e.kind == FeatureKind::Numeric) {
                for (std::size_t i = 0; i < n; ++i) mm.design(i, col) = c.numeric[i];
                ++col;
            } else {
                for (std::size_t i = 0; i < n; ++i) {
                    const std::string& lvl = c.levels[c.codes[i]];
                    const auto it = std::find(e.levels.begin(), e.levels.end(), lvl);
                    if (it != e.levels.end()) {
                        const std::size_t k = static_cast<std::size_t>(it - e.levels.begin());
                        if (k >= 1) mm.design(i, col + k - 1) = 1.0;
                    }
                    // unseen level: leave the block at zero (reference)
                }
                col += e.levels.size() - 1;
            }
        }
        return mm;
    }

    nlohmann::json to_json() const {
        nlohmann::json entries = nlohmann::json::array();
        for (const auto& e : entries_) {
            entries.push_back({{"name", e.name},
                               {"kind", data::to_string(e.kind)},
                               {"levels", e.levels}});
        }
        return nlohmann::json{{"entries", entries}};
    }

    static Encoder from_json(const nlohmann::json& j) {
        Encoder enc;
        for (const auto& je : j.at("entries")) {
            Entry e;
            e.name = je.at("name").get<std::string>();
            e.kind = feature_kind_from_string(je.at("kind"));
            e.levels = je.at("levels").get<std::vector<std::string>>();
            enc.features_.push_back(e.name);
            enc.entries_.push_back(std::move(e));
        }
        for (const auto& e : enc.entries_) {
            if (e.kind == FeatureKind::Numeric) {
                enc.names_.push_back(e.name);
            } else {
                for (std::size_t l = 1; l < e.levels.size(); ++l)
                    enc.names_.push_back(e.name + "=" + e.levels[l]);
            }
        }
        return enc;
    }

private:
    struct Entry {
        std::string name;
        FeatureKind kind;
        std::vector<std::string> levels;
    };
    std::vector<std::string> features_;
    std::vector<Entry> entries_;
    std::vector<std::string> names_;
};

// Non-protected design (feature columns only).
inline Encoder make_feature_encoder(const Dataset& train) {
    return Encoder(train, train.schema.feature_columns());
}

// Full design including the sensitive indicator (MB only).
inline Encoder make_full_encoder(const Dataset& train) {
    auto cols = train.schema.feature_columns();
    cols.push_back(train.schema.sensitive);
    return Encoder(train, cols);
}

}  // namespace fairprice::data

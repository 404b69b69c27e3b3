#pragma once

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <map>
#include <sstream>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "depmmd/common.hpp"

namespace depmmd {

// Candidate pool and all dataset points live here: d-dimensional row vectors
// with stable string identifiers. Datasets reference rows by index.
struct EmbeddingTable {
    Index dim = 0;
    std::vector<std::string> ids;
    Matrix points;  // ids.size() x dim
    std::unordered_map<std::string, Index> index_of;

    Index rows() const { return static_cast<Index>(ids.size()); }

    Index add_row(const std::string& id, const Vector& v) {
        if (dim == 0) dim = v.size();
        if (v.size() != dim)
            throw FormatError("row '" + id + "' has dimension " + std::to_string(v.size()) +
                              ", expected " + std::to_string(dim));
        if (!v.allFinite()) throw FormatError("row '" + id + "' contains a non-finite value");
        if (index_of.count(id)) throw FormatError("duplicate row id '" + id + "'");
        const Index r = rows();
        ids.push_back(id);
        if (points.rows() <= r) points.conservativeResize(std::max<Index>(2 * r + 1, 16), dim);
        points.row(r) = v.transpose();
        index_of.emplace(id, r);
        return r;
    }

    void finalize() { points.conservativeResize(rows(), dim); }
};

// Row-id keyed attribute values, stored as raw strings. Numeric consumers
// parse on demand so "1987" can serve both as a year and as a category.
struct AttributeTable {
    std::map<std::string, std::unordered_map<std::string, std::string>> values;  // key -> id -> value

    bool has_key(const std::string& key) const { return values.count(key) != 0; }

    const std::string* find(const std::string& key, const std::string& id) const {
        auto k = values.find(key);
        if (k == values.end()) return nullptr;
        auto v = k->second.find(id);
        return v == k->second.end() ? nullptr : &v->second;
    }

    void set(const std::string& id, const std::string& key, const std::string& value) {
        values[key][id] = value;
    }
};

inline bool parse_double(const std::string& text, double& out) {
    const char* begin = text.c_str();
    char* end = nullptr;
    out = std::strtod(begin, &end);
    return end != begin && *end == '\0';
}

// The indexed family {X_t}: ordered labels, per-label row references, the
// candidate pool, and optional row attributes.
struct DatasetCollection {
    std::vector<std::string> labels;
    std::map<std::string, std::vector<Index>> members;
    std::vector<Index> candidates;
    AttributeTable attributes;

    const std::vector<Index>& dataset(const std::string& label) const {
        auto it = members.find(label);
        if (it == members.end()) throw ContractViolation("unknown dataset label '" + label + "'");
        return it->second;
    }

    void add_dataset(const std::string& label, std::vector<Index> rows) {
        if (members.count(label)) throw FormatError("duplicate dataset label '" + label + "'");
        if (rows.empty()) throw FormatError("dataset '" + label + "' is empty");
        labels.push_back(label);
        members.emplace(label, std::move(rows));
    }

    void validate(const EmbeddingTable& table) const {
        for (const auto& label : labels) {
            const auto& rows = dataset(label);
            if (rows.empty()) throw FormatError("dataset '" + label + "' is empty");
            for (Index r : rows)
                if (r < 0 || r >= table.rows())
                    throw ContractViolation("dataset '" + label + "' references missing row " +
                                            std::to_string(r));
        }
        for (Index r : candidates)
            if (r < 0 || r >= table.rows())
                throw ContractViolation("candidate list references missing row " + std::to_string(r));
    }

    // Union of all dataset rows, first occurrence order, each row once.
    std::vector<Index> pooled_rows() const {
        std::vector<Index> pool;
        std::unordered_set<Index> seen;
        for (const auto& label : labels)
            for (Index r : dataset(label))
                if (seen.insert(r).second) pool.push_back(r);
        return pool;
    }
};

struct BinningRule {
    // width > 0 bins a numeric attribute into [k*width, (k+1)*width);
    // width == 0 treats the attribute as categorical (one bin per value).
    double width = 0.0;
};

// Re-partition the rows of a collection by an attribute. Exhaustive and
// disjoint: every input row lands in exactly one output dataset.
inline DatasetCollection partition_by_attribute(const EmbeddingTable& table,
                                                const DatasetCollection& collection,
                                                const std::string& key, const BinningRule& rule) {
    if (!collection.attributes.has_key(key)) {
        std::ostringstream msg;
        msg << "attribute '" << key << "' is absent; rows:";
        int shown = 0;
        for (const auto& label : collection.labels)
            for (Index r : collection.dataset(label)) {
                if (shown++ == 20) {
                    msg << " ...";
                    break;
                }
                msg << ' ' << table.ids[static_cast<std::size_t>(r)];
            }
        throw SpecError(msg.str());
    }

    std::vector<std::string> missing;
    std::map<double, std::vector<Index>> numeric_bins;
    std::map<std::string, std::vector<Index>> categorical_bins;
    for (Index r : collection.pooled_rows()) {
        const std::string& id = table.ids[static_cast<std::size_t>(r)];
        const std::string* raw = collection.attributes.find(key, id);
        if (!raw) {
            missing.push_back(id);
            continue;
        }
        if (rule.width > 0.0) {
            double v = 0.0;
            if (!parse_double(*raw, v)) {
                missing.push_back(id);
                continue;
            }
            numeric_bins[std::floor(v / rule.width) * rule.width].push_back(r);
        } else {
            categorical_bins[*raw].push_back(r);
        }
    }
    if (!missing.empty()) {
        std::ostringstream msg;
        msg << "attribute '" << key << "' missing or non-numeric for " << missing.size() << " rows:";
        for (std::size_t i = 0; i < missing.size() && i < 20; ++i) msg << ' ' << missing[i];
        if (missing.size() > 20) msg << " ...";
        throw SpecError(msg.str());
    }

    DatasetCollection out;
    out.candidates = collection.candidates;
    out.attributes = collection.attributes;
    if (rule.width > 0.0) {
        for (auto& [lo, rows] : numeric_bins) out.add_dataset(format_double(lo), std::move(rows));
    } else {
        for (auto& [value, rows] : categorical_bins) out.add_dataset(value, std::move(rows));
    }
    return out;
}

}  // namespace depmmd

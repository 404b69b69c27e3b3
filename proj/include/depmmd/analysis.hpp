#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "depmmd/mmd.hpp"
#include "depmmd/parallel.hpp"

namespace depmmd {

struct CriticismSet {
    std::string label;
    std::vector<std::pair<std::string, double>> ranked;  // (row id, witness), descending
};

// The k dataset points the summary represents worst: largest witness values,
// ties to the lowest row position within the dataset.
inline CriticismSet criticisms(const EmbeddingTable& table, const DatasetCollection& collection,
                               const KernelModel& kernel, const std::string& label,
                               const std::vector<Index>& support_rows, const Vector& weights,
                               Index k, int threads = 0) {
    const std::vector<Index>& rows = collection.dataset(label);
    const Index n = static_cast<Index>(rows.size());
    if (k < 1) throw ContractViolation("criticism count must be >= 1");
    if (k > n)
        throw ContractViolation("criticism count " + std::to_string(k) + " exceeds dataset size " +
                                std::to_string(n));

    std::vector<double> values(static_cast<std::size_t>(n));
    parallel_for(static_cast<std::size_t>(n), threads, [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i)
            values[i] = witness(table, kernel, rows, support_rows, weights, table.points.row(rows[i]));
    });

    std::vector<Index> order(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
    std::sort(order.begin(), order.end(), [&](Index a, Index b) {
        const double va = values[static_cast<std::size_t>(a)];
        const double vb = values[static_cast<std::size_t>(b)];
        if (va != vb) return va > vb;
        return a < b;
    });

    CriticismSet out;
    out.label = label;
    for (Index r = 0; r < k; ++r) {
        const Index i = order[static_cast<std::size_t>(r)];
        out.ranked.emplace_back(table.ids[static_cast<std::size_t>(rows[static_cast<std::size_t>(i)])],
                                values[static_cast<std::size_t>(i)]);
    }
    return out;
}

inline constexpr double kWeightZeroTolerance = 1e-15;

enum class RatioFlag { finite, zero_denominator };

struct RatioEntry {
    Index position = 0;   // position within the support
    std::string id;
    double w_a = 0.0;
    double w_b = 0.0;
    double f = 0.0;       // w_b / w_a; +inf when flagged
    RatioFlag flag = RatioFlag::finite;
};

struct RatioReport {
    std::string label_a;
    std::string label_b;
    double upper = 2.0;
    double lower = 0.5;
    std::vector<RatioEntry> entries;      // support order; both-zero atoms dropped
    std::vector<Index> over_in_b;         // positions with f > upper (or w_a = 0 < w_b)
    std::vector<Index> over_in_a;         // positions with f < lower
    std::vector<Index> balanced;
};

// Per-exemplar weight ratios f_i = w_b,i / w_a,i partitioned by thresholds.
// Atoms carrying no mass in either dataset say nothing about drift and are
// dropped; mass appearing only in b is over-represented in b by convention.
inline RatioReport weight_ratio(const WeightedSupport& ws, const std::vector<std::string>& support_ids,
                                const std::string& label_a, const std::string& label_b, double upper,
                                double lower) {
    if (!(lower > 0.0) || !(upper > lower))
        throw SpecError("ratio thresholds must satisfy upper > lower > 0");
    if (support_ids.size() != static_cast<std::size_t>(ws.size()))
        throw ContractViolation("support id list does not match support size");
    const Vector& wa = ws.weights_of(label_a);
    const Vector& wb = ws.weights_of(label_b);

    RatioReport report;
    report.label_a = label_a;
    report.label_b = label_b;
    report.upper = upper;
    report.lower = lower;

    for (Index i = 0; i < ws.size(); ++i) {
        const double a = wa(i);
        const double b = wb(i);
        const bool a_zero = a <= kWeightZeroTolerance;
        const bool b_zero = b <= kWeightZeroTolerance;
        if (a_zero && b_zero) continue;

        RatioEntry entry;
        entry.position = i;
        entry.id = support_ids[static_cast<std::size_t>(i)];
        entry.w_a = a;
        entry.w_b = b;
        if (a_zero) {
            entry.f = std::numeric_limits<double>::infinity();
            entry.flag = RatioFlag::zero_denominator;
            report.over_in_b.push_back(i);
        } else {
            entry.f = b / a;
            if (entry.f > upper)
                report.over_in_b.push_back(i);
            else if (entry.f < lower)
                report.over_in_a.push_back(i);
            else
                report.balanced.push_back(i);
        }
        report.entries.push_back(std::move(entry));
    }
    return report;
}

// Sum of each dataset's weights per attribute group; every dataset row of the
// result conserves total mass.
inline std::map<std::string, std::map<std::string, double>> grouped_weights(
    const WeightedSupport& ws, const std::vector<std::string>& support_ids, const AttributeTable& attrs,
    const std::string& key) {
    if (support_ids.size() != static_cast<std::size_t>(ws.size()))
        throw ContractViolation("support id list does not match support size");
    std::vector<std::string> groups(static_cast<std::size_t>(ws.size()));
    for (Index i = 0; i < ws.size(); ++i) {
        const std::string* value = attrs.find(key, support_ids[static_cast<std::size_t>(i)]);
        if (!value)
            throw SpecError("support row '" + support_ids[static_cast<std::size_t>(i)] +
                            "' has no attribute '" + key + "'");
        groups[static_cast<std::size_t>(i)] = *value;
    }

    std::map<std::string, std::map<std::string, double>> out;
    for (const auto& [label, w] : ws.weights) {
        auto& row = out[label];
        for (Index i = 0; i < ws.size(); ++i) row[groups[static_cast<std::size_t>(i)]] += w(i);
    }
    return out;
}

struct Moments {
    double mean = 0.0;
    double sd = 0.0;
};

// Weighted first and second moments of a numeric attribute over the support:
// mean = sum w_i a_i, sd = sqrt(sum w_i (a_i - mean)^2).
inline std::map<std::string, Moments> weighted_attribute_moments(const WeightedSupport& ws,
                                                                 const std::vector<std::string>& support_ids,
                                                                 const AttributeTable& attrs,
                                                                 const std::string& key) {
    if (support_ids.size() != static_cast<std::size_t>(ws.size()))
        throw ContractViolation("support id list does not match support size");
    Vector values(ws.size());
    for (Index i = 0; i < ws.size(); ++i) {
        const std::string& id = support_ids[static_cast<std::size_t>(i)];
        const std::string* raw = attrs.find(key, id);
        if (!raw) throw SpecError("support row '" + id + "' has no attribute '" + key + "'");
        double parsed = 0.0;
        if (!parse_double(*raw, parsed))
            throw FormatError("attribute '" + key + "' of row '" + id + "' is not numeric: '" + *raw + "'");
        values(i) = parsed;
    }

    std::map<std::string, Moments> out;
    for (const auto& [label, w] : ws.weights) {
        Moments m;
        for (Index i = 0; i < ws.size(); ++i) m.mean += w(i) * values(i);
        double variance = 0.0;
        for (Index i = 0; i < ws.size(); ++i) {
            const double d = values(i) - m.mean;
            variance += w(i) * d * d;
        }
        m.sd = std::sqrt(std::max(0.0, variance));
        out[label] = m;
    }
    return out;
}

// Delimited writers. Fixed headers, 17-significant-digit values.

inline void write_criticisms_csv(std::ostream& os, const std::vector<CriticismSet>& sets) {
    os << "dataset,rank,row_id,witness\n";
    for (const auto& set : sets)
        for (std::size_t r = 0; r < set.ranked.size(); ++r)
            os << set.label << "," << (r + 1) << "," << set.ranked[r].first << ","
               << format_double(set.ranked[r].second) << "\n";
}

inline std::string ratio_flag_name(RatioFlag flag) {
    return flag == RatioFlag::finite ? "finite" : "zero_denominator";
}

inline std::string ratio_partition_name(const RatioReport& report, Index position) {
    for (Index p : report.over_in_b)
        if (p == position) return "over_in_b";
    for (Index p : report.over_in_a)
        if (p == position) return "over_in_a";
    return "balanced";
}

inline void write_ratios_csv(std::ostream& os, const std::vector<RatioReport>& reports) {
    os << "label_a,label_b,exemplar_id,w_a,w_b,f,flag,partition\n";
    for (const auto& report : reports)
        for (const auto& entry : report.entries)
            os << report.label_a << "," << report.label_b << "," << entry.id << ","
               << format_double(entry.w_a) << "," << format_double(entry.w_b) << ","
               << format_double(entry.f) << "," << ratio_flag_name(entry.flag) << ","
               << ratio_partition_name(report, entry.position) << "\n";
}

inline void write_grouped_csv(std::ostream& os,
                              const std::map<std::string, std::map<std::string, double>>& grouped,
                              const std::string& key) {
    os << "dataset,attribute,group,weight_sum\n";
    for (const auto& [label, row] : grouped)
        for (const auto& [group, sum] : row)
            os << label << "," << key << "," << group << "," << format_double(sum) << "\n";
}

inline void write_moments_csv(
    std::ostream& os,
    const std::vector<std::pair<std::string, std::map<std::string, Moments>>>& per_attribute) {
    os << "dataset,attribute,mean,sd\n";
    for (const auto& [key, moments] : per_attribute)
        for (const auto& [label, m] : moments)
            os << label << "," << key << "," << format_double(m.mean) << "," << format_double(m.sd)
               << "\n";
}

}  // namespace depmmd

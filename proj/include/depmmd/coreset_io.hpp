#pragma once

#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "depmmd/fit.hpp"

namespace depmmd {

namespace detail {

inline std::string escape_json(const std::string& s) {
    std::string out;
    out.reserve(s.size() + 2);
    for (unsigned char ch : s) {
        switch (ch) {
            case '"': out += "\\\""; break;
            case '\\': out += "\\\\"; break;
            case '\b': out += "\\b"; break;
            case '\f': out += "\\f"; break;
            case '\n': out += "\\n"; break;
            case '\r': out += "\\r"; break;
            case '\t': out += "\\t"; break;
            default:
                if (ch < 0x20) {
                    char buf[8];
                    std::snprintf(buf, sizeof(buf), "\\u%04x", ch);
                    out += buf;
                } else {
                    out += static_cast<char>(ch);
                }
        }
    }
    return out;
}

}  // namespace detail

// Emits the coreset with a fixed key order and 17-significant-digit doubles,
// so identical fits serialize to identical bytes. Timing fields are the only
// run-dependent part and can be suppressed for comparisons.
inline std::string coreset_to_json(const DependentCoreset& coreset,
                                   const std::vector<std::string>& support_ids,
                                   const std::map<std::string, Index>& counts,
                                   bool include_timing = true) {
    if (support_ids.size() != static_cast<std::size_t>(coreset.ws.size()))
        throw ContractViolation("support id list does not match support size");

    std::ostringstream os;
    const auto num = [](double v) { return format_double(v); };
    const auto str = [](const std::string& s) { return "\"" + detail::escape_json(s) + "\""; };

    os << "{\n";
    os << "  \"format\": \"depmmd-coreset\",\n";
    os << "  \"version\": " << str(kVersion) << ",\n";
    os << "  \"algorithm\": " << str(algorithm_name(coreset.algorithm)) << ",\n";
    os << "  \"epsilon_sq\": " << num(coreset.epsilon_sq) << ",\n";
    os << "  \"satisfied\": " << (coreset.satisfied ? "true" : "false") << ",\n";
    os << "  \"stop_reason\": " << str(stop_reason_name(coreset.stop_reason)) << ",\n";
    os << "  \"optimizer_nonconverged\": " << coreset.optimizer_nonconverged << ",\n";

    os << "  \"kernel\": {\n";
    os << "    \"median_subsample_cap\": " << coreset.kernel.median_subsample_cap << ",\n";
    os << "    \"median_seed\": " << coreset.kernel.median_seed << ",\n";
    os << "    \"components\": [";
    for (std::size_t i = 0; i < coreset.kernel.components.size(); ++i) {
        if (i) os << ", ";
        os << "{\"tag\": " << str(coreset.kernel.components[i].tag)
           << ", \"bandwidth\": " << num(coreset.kernel.components[i].bandwidth) << "}";
    }
    os << "]\n  },\n";

    os << "  \"support\": [";
    for (Index i = 0; i < coreset.ws.size(); ++i) {
        if (i) os << ", ";
        os << "{\"index\": " << coreset.ws.support[static_cast<std::size_t>(i)] << ", \"id\": "
           << str(support_ids[static_cast<std::size_t>(i)]) << "}";
    }
    os << "],\n";

    os << "  \"datasets\": [\n";
    bool first_ds = true;
    for (const auto& [label, w] : coreset.ws.weights) {
        if (!first_ds) os << ",\n";
        first_ds = false;
        os << "    {\"label\": " << str(label);
        auto count_it = counts.find(label);
        if (count_it != counts.end()) os << ", \"n\": " << count_it->second;
        os << ", \"mmd_sq\": " << num(coreset.mmd_sq.at(label)) << ", \"weights\": [";
        for (Index i = 0; i < w.size(); ++i) {
            if (i) os << ", ";
            os << num(w(i));
        }
        os << "]}";
    }
    os << "\n  ],\n";

    os << "  \"trace\": [\n";
    for (std::size_t it = 0; it < coreset.trace.size(); ++it) {
        const IterationRecord& rec = coreset.trace[it];
        if (it) os << ",\n";
        os << "    {\"iteration\": " << (it + 1) << ", \"candidate_index\": " << rec.candidate;
        os << ", \"beta\": {";
        bool first_b = true;
        for (const auto& [label, beta] : rec.beta) {
            if (!first_b) os << ", ";
            first_b = false;
            os << str(label) << ": " << num(beta);
        }
        os << "}, \"alpha\": {";
        first_b = true;
        for (const auto& [label, beta] : rec.beta) {
            if (!first_b) os << ", ";
            first_b = false;
            os << str(label) << ": ";
            if (beta >= 1.0)
                os << "null";
            else
                os << num(beta / (1.0 - beta));
        }
        os << "}, \"mmd_sq\": {";
        first_b = true;
        for (const auto& [label, value] : rec.mmd_sq) {
            if (!first_b) os << ", ";
            first_b = false;
            os << str(label) << ": " << num(value);
        }
        os << "}";
        if (include_timing) os << ", \"elapsed_seconds\": " << num(rec.elapsed_seconds);
        os << "}";
    }
    os << "\n  ]\n}\n";
    return os.str();
}

inline void write_coreset(const std::string& path, const DependentCoreset& coreset,
                          const std::vector<std::string>& support_ids,
                          const std::map<std::string, Index>& counts) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw ResourceError("cannot open '" + path + "' for writing");
    os << coreset_to_json(coreset, support_ids, counts, true);
    if (!os) throw ResourceError("write to '" + path + "' failed");
}

struct LoadedCoreset {
    Algorithm algorithm = Algorithm::dmmd;
    double epsilon_sq = 0.0;
    bool satisfied = false;
    std::string stop_reason;
    KernelModel kernel;
    std::vector<Index> support_indices;
    std::vector<std::string> support_ids;
    std::vector<std::string> labels;
    std::map<std::string, Vector> weights;
    std::map<std::string, double> mmd_sq;
    std::map<std::string, Index> counts;
};

inline LoadedCoreset read_coreset(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw ResourceError("cannot open coreset file '" + path + "'");
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(is);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("'" + path + "' is not valid JSON: " + e.what());
    }
    try {
        if (doc.at("format").get<std::string>() != "depmmd-coreset")
            throw FormatError("'" + path + "' is not a coreset file");
        LoadedCoreset out;
        out.algorithm = parse_algorithm(doc.at("algorithm").get<std::string>());
        out.epsilon_sq = doc.at("epsilon_sq").get<double>();
        out.satisfied = doc.at("satisfied").get<bool>();
        out.stop_reason = doc.at("stop_reason").get<std::string>();

        const auto& kernel = doc.at("kernel");
        out.kernel.median_subsample_cap = kernel.at("median_subsample_cap").get<Index>();
        out.kernel.median_seed = kernel.at("median_seed").get<std::uint64_t>();
        for (const auto& comp : kernel.at("components"))
            out.kernel.components.push_back(
                {comp.at("tag").get<std::string>(), comp.at("bandwidth").get<double>()});
        out.kernel.validate();

        for (const auto& atom : doc.at("support")) {
            out.support_indices.push_back(atom.at("index").get<Index>());
            out.support_ids.push_back(atom.at("id").get<std::string>());
        }
        for (const auto& ds : doc.at("datasets")) {
            const std::string label = ds.at("label").get<std::string>();
            out.labels.push_back(label);
            out.mmd_sq[label] = ds.at("mmd_sq").get<double>();
            if (ds.contains("n")) out.counts[label] = ds.at("n").get<Index>();
            const auto& w = ds.at("weights");
            Vector row(static_cast<Index>(w.size()));
            for (std::size_t i = 0; i < w.size(); ++i) row(static_cast<Index>(i)) = w[i].get<double>();
            if (row.size() != static_cast<Index>(out.support_ids.size()))
                throw FormatError("dataset '" + label + "' weight row does not match support size");
            out.weights[label] = std::move(row);
        }
        return out;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("coreset file '" + path + "' is missing fields: " + e.what());
    }
}

}  // namespace depmmd

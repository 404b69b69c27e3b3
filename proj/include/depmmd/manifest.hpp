#pragma once

#include <cctype>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <string>
#include <utility>
#include <vector>

#include "depmmd/data.hpp"

namespace depmmd {

namespace detail {

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::size_t start = 0;
    for (;;) {
        const auto pos = line.find(',', start);
        if (pos == std::string::npos) {
            fields.push_back(line.substr(start));
            return fields;
        }
        fields.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
}

inline std::string sanitize_filename(const std::string& name) {
    std::string out;
    for (char ch : name)
        out += (std::isalnum(static_cast<unsigned char>(ch)) || ch == '.' || ch == '-' || ch == '_')
                   ? ch
                   : '_';
    return out.empty() ? std::string("dataset") : out;
}

}  // namespace detail

// One delimited-numeric file: UTF-8, comma separated, one vector per line,
// optional leading id column. Returns the table rows the lines map to. With
// resolve_existing, a line whose id is already in the table resolves to that
// row when the vector matches bit-exactly (candidate pools normally reference
// dataset rows); a mismatching vector is still a duplicate-id error.
inline std::vector<Index> read_vector_file(const std::filesystem::path& path, bool id_column,
                                           const std::string& id_prefix, EmbeddingTable& table,
                                           bool resolve_existing = false) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open vector file '" + path.string() + "'");
    std::vector<Index> rows;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (detail::trim(line).empty()) continue;
        auto fields = detail::split_csv_line(line);
        std::string id;
        std::size_t first = 0;
        if (id_column) {
            id = detail::trim(fields[0]);
            first = 1;
            if (id.empty())
                throw FormatError(path.string() + ":" + std::to_string(lineno) + ": empty row id");
        } else {
            id = id_prefix + "#" + std::to_string(rows.size());
        }
        if (fields.size() <= first)
            throw FormatError(path.string() + ":" + std::to_string(lineno) + ": no numeric fields");
        Vector v(static_cast<Index>(fields.size() - first));
        for (std::size_t f = first; f < fields.size(); ++f) {
            double value = 0.0;
            const std::string token = detail::trim(fields[f]);
            if (!parse_double(token, value) || !std::isfinite(value))
                throw FormatError(path.string() + ":" + std::to_string(lineno) +
                                  ": invalid numeric token '" + token + "'");
            v[static_cast<Index>(f - first)] = value;
        }
        try {
            const auto existing = resolve_existing ? table.index_of.find(id) : table.index_of.end();
            if (resolve_existing && existing != table.index_of.end()) {
                const Index r = existing->second;
                bool same = v.size() == table.dim;
                for (Index c = 0; same && c < table.dim; ++c) same = v(c) == table.points(r, c);
                if (!same)
                    throw FormatError("row id '" + id +
                                      "' already names a different vector in this collection");
                rows.push_back(r);
            } else {
                rows.push_back(table.add_row(id, v));
            }
        } catch (const FormatError& e) {
            throw FormatError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    if (rows.empty()) throw FormatError("vector file '" + path.string() + "' has no rows");
    return rows;
}

inline void read_attribute_file(const std::filesystem::path& path, AttributeTable& attrs) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open attribute file '" + path.string() + "'");
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (detail::trim(line).empty()) continue;
        const auto c1 = line.find(',');
        const auto c2 = c1 == std::string::npos ? std::string::npos : line.find(',', c1 + 1);
        if (c2 == std::string::npos)
            throw FormatError(path.string() + ":" + std::to_string(lineno) +
                              ": expected 'id,key,value'");
        attrs.set(detail::trim(line.substr(0, c1)), detail::trim(line.substr(c1 + 1, c2 - c1 - 1)),
                  detail::trim(line.substr(c2 + 1)));
    }
}

struct LoadedCollection {
    EmbeddingTable table;
    DatasetCollection collection;
};

// Manifest: JSON object mapping dataset name -> vector file, with optional
// explicit candidate file (default: candidate pool is the union of datasets)
// and optional id,key,value attribute file. Paths are manifest-relative.
inline LoadedCollection load_collection(const std::filesystem::path& manifest_path) {
    std::ifstream in(manifest_path);
    if (!in) throw FormatError("cannot open manifest '" + manifest_path.string() + "'");
    nlohmann::ordered_json doc;
    try {
        doc = nlohmann::ordered_json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("manifest '" + manifest_path.string() + "': " + e.what());
    }
    if (!doc.is_object() || !doc.contains("datasets") || !doc["datasets"].is_object())
        throw FormatError("manifest '" + manifest_path.string() +
                          "' must be an object with a 'datasets' map");

    const auto base = manifest_path.has_parent_path() ? manifest_path.parent_path()
                                                      : std::filesystem::path(".");
    const bool id_column = doc.value("id_column", false);

    LoadedCollection out;
    for (const auto& [name, value] : doc["datasets"].items()) {
        if (!value.is_string())
            throw FormatError("manifest dataset '" + name + "' must map to a file path");
        auto rows = read_vector_file(base / value.get<std::string>(), id_column, name, out.table);
        out.collection.add_dataset(name, std::move(rows));
    }
    if (doc.contains("candidates")) {
        out.collection.candidates =
            read_vector_file(base / doc["candidates"].get<std::string>(), id_column, "_candidates",
                             out.table, /*resolve_existing=*/true);
    } else {
        out.collection.candidates = out.collection.pooled_rows();
    }
    if (doc.contains("attributes"))
        read_attribute_file(base / doc["attributes"].get<std::string>(),
                            out.collection.attributes);
    out.table.finalize();
    out.collection.validate(out.table);
    return out;
}

// Write a collection back out in the manifest format. Vector components are
// printed with %.17g, so reloading reproduces them bit-exactly.
inline std::filesystem::path save_collection(const std::filesystem::path& dir,
                                             const EmbeddingTable& table,
                                             const DatasetCollection& collection) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    auto write_rows = [&](const fs::path& path, const std::vector<Index>& rows) {
        std::ofstream out(path);
        if (!out) throw FormatError("cannot write '" + path.string() + "'");
        for (Index r : rows) {
            out << table.ids[static_cast<std::size_t>(r)];
            for (Index c = 0; c < table.dim; ++c) out << ',' << format_double(table.points(r, c));
            out << '\n';
        }
    };

    nlohmann::ordered_json doc;
    doc["version"] = 1;
    doc["id_column"] = true;
    doc["datasets"] = nlohmann::ordered_json::object();
    std::map<std::string, int> used_names;
    for (const auto& label : collection.labels) {
        std::string stem = detail::sanitize_filename(label);
        if (int& n = used_names[stem]; n++ > 0) stem += "_" + std::to_string(n);
        const std::string file = stem + ".csv";
        write_rows(dir / file, collection.dataset(label));
        doc["datasets"][label] = file;
    }
    write_rows(dir / "candidates.csv", collection.candidates);
    doc["candidates"] = "candidates.csv";
    if (!collection.attributes.values.empty()) {
        std::ofstream out(dir / "attributes.csv");
        for (const auto& [key, byid] : collection.attributes.values) {
            std::map<std::string, std::string> sorted(byid.begin(), byid.end());
            for (const auto& [id, value] : sorted) out << id << ',' << key << ',' << value << '\n';
        }
        doc["attributes"] = "attributes.csv";
    }
    const fs::path manifest = dir / "manifest.json";
    std::ofstream out(manifest);
    out << doc.dump(2) << '\n';
    return manifest;
}

}  // namespace depmmd

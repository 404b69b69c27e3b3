#pragma once

#include <bit>
#include <cstdint>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "depmmd/data.hpp"
#include "depmmd/kernel.hpp"
#include "depmmd/parallel.hpp"

namespace depmmd {

// Precomputed kernel quantities shared by every fit and analysis routine:
//   K        Gram matrix over the candidate rows,
//   mu[t]    mean kernel between each candidate and dataset t,
//   c[t]     mean kernel over all ordered pairs within dataset t.
struct GramCache {
    std::vector<Index> candidate_rows;
    std::vector<std::string> labels;
    KernelModel kernel;
    Matrix K;
    std::map<std::string, Vector> mu;
    std::map<std::string, double> c;
    std::map<std::string, Index> counts;

    Index size() const { return static_cast<Index>(candidate_rows.size()); }

    const Vector& mu_of(const std::string& label) const {
        auto it = mu.find(label);
        if (it == mu.end()) throw ContractViolation("no cached mean embedding for dataset '" + label + "'");
        return it->second;
    }
    double c_of(const std::string& label) const {
        auto it = c.find(label);
        if (it == c.end()) throw ContractViolation("no cached constant for dataset '" + label + "'");
        return it->second;
    }
};

inline std::uint64_t gram_cache_bytes(Index n_candidates, Index n_datasets) {
    const std::uint64_t u = static_cast<std::uint64_t>(n_candidates);
    const std::uint64_t t = static_cast<std::uint64_t>(n_datasets);
    return 8 * (u * u + t * u);
}

// Fills the cache with deterministic results for any thread count: threads own
// disjoint candidate rows, and every reduction is a fixed-order pairwise sum.
inline GramCache build_gram_cache(const EmbeddingTable& table, const DatasetCollection& collection,
                                  const KernelModel& kernel, int threads = 0,
                                  std::uint64_t memory_limit_bytes = 0) {
    kernel.validate();
    collection.validate(table);
    if (collection.candidates.empty()) throw SpecError("candidate set is empty");

    const Index n_u = static_cast<Index>(collection.candidates.size());
    const Index n_t = static_cast<Index>(collection.labels.size());
    const std::uint64_t needed = gram_cache_bytes(n_u, n_t);
    if (memory_limit_bytes > 0 && needed > memory_limit_bytes)
        throw ResourceError("gram cache needs " + std::to_string(needed) + " bytes, limit is " +
                            std::to_string(memory_limit_bytes));

    GramCache cache;
    cache.candidate_rows = collection.candidates;
    cache.labels = collection.labels;
    cache.kernel = kernel;
    cache.K.resize(n_u, n_u);

    const Matrix& pts = table.points;
    const auto& cand = cache.candidate_rows;

    parallel_for(static_cast<std::size_t>(n_u), threads, [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            const auto xi = pts.row(cand[i]);
            for (Index j = 0; j < n_u; ++j)
                cache.K(static_cast<Index>(i), j) =
                    kernel.from_squared_distance((xi - pts.row(cand[static_cast<std::size_t>(j)])).squaredNorm());
        }
    });

    for (const auto& label : collection.labels) {
        const std::vector<Index>& rows = collection.dataset(label);
        const Index n = static_cast<Index>(rows.size());
        cache.counts[label] = n;

        Vector mu_t(n_u);
        std::vector<double> terms(static_cast<std::size_t>(n));
        parallel_for(static_cast<std::size_t>(n_u), threads, [&, n](std::size_t begin, std::size_t end) {
            std::vector<double> local(static_cast<std::size_t>(n));
            for (std::size_t i = begin; i < end; ++i) {
                const auto xi = pts.row(cand[i]);
                for (Index j = 0; j < n; ++j)
                    local[static_cast<std::size_t>(j)] = kernel.from_squared_distance(
                        (xi - pts.row(rows[static_cast<std::size_t>(j)])).squaredNorm());
                mu_t(static_cast<Index>(i)) = pairwise_sum(local) / static_cast<double>(n);
            }
        });
        cache.mu[label] = std::move(mu_t);

        std::vector<double> row_sums(static_cast<std::size_t>(n));
        parallel_for(static_cast<std::size_t>(n), threads, [&, n](std::size_t begin, std::size_t end) {
            std::vector<double> local(static_cast<std::size_t>(n));
            for (std::size_t j = begin; j < end; ++j) {
                const auto xj = pts.row(rows[j]);
                for (Index l = 0; l < n; ++l)
                    local[static_cast<std::size_t>(l)] = kernel.from_squared_distance(
                        (xj - pts.row(rows[static_cast<std::size_t>(l)])).squaredNorm());
                row_sums[j] = pairwise_sum(local);
            }
        });
        cache.c[label] = pairwise_sum(row_sums) / (static_cast<double>(n) * static_cast<double>(n));
    }
    return cache;
}

namespace detail {

inline void write_u64(std::ostream& os, std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xFF);
    os.write(reinterpret_cast<const char*>(b), 8);
}

inline std::uint64_t read_u64(std::istream& is) {
    unsigned char b[8];
    is.read(reinterpret_cast<char*>(b), 8);
    if (!is) throw FormatError("gram cache file truncated");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return v;
}

inline void write_f64(std::ostream& os, double v) { write_u64(os, std::bit_cast<std::uint64_t>(v)); }
inline double read_f64(std::istream& is) { return std::bit_cast<double>(read_u64(is)); }

inline void write_str(std::ostream& os, const std::string& s) {
    write_u64(os, s.size());
    os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string read_str(std::istream& is) {
    const std::uint64_t len = read_u64(is);
    if (len > (1ull << 32)) throw FormatError("gram cache string length is implausible");
    std::string s(static_cast<std::size_t>(len), '\0');
    is.read(s.data(), static_cast<std::streamsize>(len));
    if (!is) throw FormatError("gram cache file truncated");
    return s;
}

}  // namespace detail

inline constexpr char kGramCacheMagic[] = "DMMDGC01";

// Little-endian binary layout; doubles round-trip bit for bit.
inline void save_gram_cache(const GramCache& cache, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw ResourceError("cannot open '" + path + "' for writing");
    os.write(kGramCacheMagic, 8);

    detail::write_u64(os, cache.kernel.components.size());
    for (const auto& comp : cache.kernel.components) {
        detail::write_str(os, comp.tag);
        detail::write_f64(os, comp.bandwidth);
    }
    detail::write_u64(os, static_cast<std::uint64_t>(cache.kernel.median_subsample_cap));
    detail::write_u64(os, cache.kernel.median_seed);

    const Index n_u = cache.size();
    detail::write_u64(os, static_cast<std::uint64_t>(n_u));
    for (Index r : cache.candidate_rows) detail::write_u64(os, static_cast<std::uint64_t>(r));
    for (Index i = 0; i < n_u; ++i)
        for (Index j = 0; j < n_u; ++j) detail::write_f64(os, cache.K(i, j));

    detail::write_u64(os, cache.labels.size());
    for (const auto& label : cache.labels) {
        detail::write_str(os, label);
        detail::write_u64(os, static_cast<std::uint64_t>(cache.counts.at(label)));
        detail::write_f64(os, cache.c.at(label));
        const Vector& m = cache.mu.at(label);
        for (Index i = 0; i < n_u; ++i) detail::write_f64(os, m(i));
    }
    if (!os) throw ResourceError("write to '" + path + "' failed");
}

inline GramCache load_gram_cache(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw ResourceError("cannot open '" + path + "' for reading");
    char magic[8];
    is.read(magic, 8);
    if (!is || std::string(magic, 8) != std::string(kGramCacheMagic, 8))
        throw FormatError("'" + path + "' is not a gram cache file");

    GramCache cache;
    const std::uint64_t n_comp = detail::read_u64(is);
    for (std::uint64_t i = 0; i < n_comp; ++i) {
        KernelComponent comp;
        comp.tag = detail::read_str(is);
        comp.bandwidth = detail::read_f64(is);
        cache.kernel.components.push_back(std::move(comp));
    }
    cache.kernel.median_subsample_cap = static_cast<Index>(detail::read_u64(is));
    cache.kernel.median_seed = detail::read_u64(is);

    const Index n_u = static_cast<Index>(detail::read_u64(is));
    cache.candidate_rows.resize(static_cast<std::size_t>(n_u));
    for (auto& r : cache.candidate_rows) r = static_cast<Index>(detail::read_u64(is));
    cache.K.resize(n_u, n_u);
    for (Index i = 0; i < n_u; ++i)
        for (Index j = 0; j < n_u; ++j) cache.K(i, j) = detail::read_f64(is);

    const std::uint64_t n_t = detail::read_u64(is);
    for (std::uint64_t t = 0; t < n_t; ++t) {
        const std::string label = detail::read_str(is);
        cache.labels.push_back(label);
        cache.counts[label] = static_cast<Index>(detail::read_u64(is));
        cache.c[label] = detail::read_f64(is);
        Vector m(n_u);
        for (Index i = 0; i < n_u; ++i) m(i) = detail::read_f64(is);
        cache.mu[label] = std::move(m);
    }
    cache.kernel.validate();
    return cache;
}

}  // namespace depmmd

#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "depmmd/data.hpp"
#include "depmmd/rng.hpp"

namespace depmmd {

// Additive squared-exponential kernel: mean over components of
// exp(-||x-y||^2 / (2 h^2)). One component per dataset plus one pooled
// component, each bandwidth set by the median pairwise distance heuristic.
struct KernelComponent {
    std::string tag;  // "all" or a dataset label
    double bandwidth = 0.0;
};

struct KernelModel {
    std::vector<KernelComponent> components;
    // Median-heuristic provenance, recorded in every output artifact.
    Index median_subsample_cap = 0;
    std::uint64_t median_seed = 0;

    void validate() const {
        if (components.empty()) throw SpecError("kernel has no components");
        for (const auto& c : components)
            if (!(c.bandwidth > 0.0) || !std::isfinite(c.bandwidth))
                throw SpecError("kernel component '" + c.tag + "' has invalid bandwidth " +
                                format_double(c.bandwidth));
    }

    // Kernel value from a squared Euclidean distance. Dividing the summed
    // component values by the count makes k(x,x) exactly 1.0.
    double from_squared_distance(double d2) const {
        double sum = 0.0;
        for (const auto& c : components) sum += std::exp(-d2 / (2.0 * c.bandwidth * c.bandwidth));
        return sum / static_cast<double>(components.size());
    }

    double operator()(const Eigen::Ref<const Vector>& x, const Eigen::Ref<const Vector>& y) const {
        if (x.size() != y.size())
            throw ContractViolation("kernel arguments have dimensions " +
                                    std::to_string(x.size()) + " and " + std::to_string(y.size()));
        return from_squared_distance((x - y).squaredNorm());
    }
};

// Median pairwise Euclidean distance over at most `subsample_cap` points
// (seeded subset when the input is larger; exact all-pairs median otherwise).
// Even pair counts take the midpoint of the two central order statistics.
inline double median_bandwidth(const Matrix& points, Index subsample_cap, std::uint64_t seed) {
    const Index n = points.rows();
    if (n < 2) throw SpecError("median bandwidth needs at least 2 points");
    if (subsample_cap < 2) throw SpecError("median subsample cap must be >= 2");

    std::vector<Index> keep;
    if (n > subsample_cap)
        keep = subsample_indices(n, subsample_cap, seed);
    else {
        keep.resize(static_cast<std::size_t>(n));
        for (Index i = 0; i < n; ++i) keep[static_cast<std::size_t>(i)] = i;
    }

    const std::size_t m = keep.size();
    std::vector<double> dists;
    dists.reserve(m * (m - 1) / 2);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = i + 1; j < m; ++j)
            dists.push_back((points.row(keep[i]) - points.row(keep[j])).norm());

    const std::size_t count = dists.size();
    const std::size_t mid = count / 2;
    std::nth_element(dists.begin(), dists.begin() + static_cast<std::ptrdiff_t>(mid), dists.end());
    double median = dists[mid];
    if (count % 2 == 0) {
        const double lower =
            *std::max_element(dists.begin(), dists.begin() + static_cast<std::ptrdiff_t>(mid));
        median = 0.5 * (lower + median);
    }
    if (!(median > 0.0))
        throw SpecError("median pairwise distance is 0 (all selected points identical)");
    return median;
}

inline Matrix gather_rows(const EmbeddingTable& table, const std::vector<Index>& rows) {
    Matrix out(static_cast<Index>(rows.size()), table.dim);
    for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Index>(i)) = table.points.row(rows[i]);
    return out;
}

// One component per dataset at its within-dataset median bandwidth, plus a
// pooled component over the union of all dataset rows, listed first.
inline KernelModel build_additive_kernel(const EmbeddingTable& table,
                                         const DatasetCollection& collection,
                                         Index subsample_cap = 2000, std::uint64_t seed = 0) {
    KernelModel model;
    model.median_subsample_cap = subsample_cap;
    model.median_seed = seed;
    try {
        model.components.push_back(
            {"all", median_bandwidth(gather_rows(table, collection.pooled_rows()), subsample_cap, seed)});
    } catch (const SpecError& e) {
        throw SpecError(std::string("pooled set: ") + e.what());
    }
    for (const auto& label : collection.labels) {
        try {
            model.components.push_back(
                {label,
                 median_bandwidth(gather_rows(table, collection.dataset(label)), subsample_cap, seed)});
        } catch (const SpecError& e) {
            throw SpecError("dataset '" + label + "': " + e.what());
        }
    }
    model.validate();
    return model;
}

}  // namespace depmmd

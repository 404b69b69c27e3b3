#pragma once

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "depmmd/gram.hpp"

namespace depmmd {

// Shared exemplar support with one weight row per dataset. Each row is a
// probability vector, so every dataset's summary is a measure on the same
// atoms, differing only in mass.
struct WeightedSupport {
    std::vector<Index> support;            // candidate indices, distinct
    std::map<std::string, Vector> weights; // label -> weights over `support`

    Index size() const { return static_cast<Index>(support.size()); }

    const Vector& weights_of(const std::string& label) const {
        auto it = weights.find(label);
        if (it == weights.end()) throw ContractViolation("no weight row for dataset '" + label + "'");
        return it->second;
    }

    // Empty support with empty weight rows is the legal starting state; once
    // any atom exists every row must be a probability vector.
    void validate(Index candidate_count, double sum_tolerance = 1e-9) const {
        const Index m = size();
        std::vector<Index> sorted(support);
        std::sort(sorted.begin(), sorted.end());
        if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
            throw ContractViolation("support indices are not distinct");
        for (Index s : support)
            if (s < 0 || s >= candidate_count)
                throw ContractViolation("support index " + std::to_string(s) + " outside [0, " +
                                        std::to_string(candidate_count) + ")");
        for (const auto& [label, w] : weights) {
            if (w.size() != m)
                throw ContractViolation("dataset '" + label + "' has " + std::to_string(w.size()) +
                                        " weights for a support of size " + std::to_string(m));
            double sum = 0.0;
            for (Index i = 0; i < m; ++i) {
                if (!std::isfinite(w(i)) || w(i) < 0.0)
                    throw ContractViolation("dataset '" + label + "' weight " + std::to_string(i) +
                                            " is " + format_double(w(i)));
                sum += w(i);
            }
            if (m > 0 && std::abs(sum - 1.0) > sum_tolerance)
                throw ContractViolation("dataset '" + label + "' weights sum to " + format_double(sum));
        }
    }
};

namespace detail {

inline void check_support(const GramCache& cache, const WeightedSupport& ws) {
    for (Index s : ws.support)
        if (s < 0 || s >= cache.size())
            throw ContractViolation("support index " + std::to_string(s) +
                                    " outside the candidate range [0, " + std::to_string(cache.size()) + ")");
}

}  // namespace detail

// Gathered sub-gram quantities for one dataset: everything the quadratic
// loss needs, in support order.
struct SupportView {
    Matrix K_ss;   // |S| x |S|
    Vector mu_s;   // mu_t over the support
};

inline SupportView support_view(const GramCache& cache, const std::string& label,
                                const std::vector<Index>& support) {
    const Index m = static_cast<Index>(support.size());
    SupportView view;
    view.K_ss.resize(m, m);
    view.mu_s.resize(m);
    const Vector& mu = cache.mu_of(label);
    for (Index a = 0; a < m; ++a) {
        view.mu_s(a) = mu(support[static_cast<std::size_t>(a)]);
        for (Index b = 0; b < m; ++b)
            view.K_ss(a, b) = cache.K(support[static_cast<std::size_t>(a)], support[static_cast<std::size_t>(b)]);
    }
    return view;
}

// loss_t(w) = 1/2 w'K_SS w - w'mu_t[S]. The cross term carries the weights;
// this is the unique form for which mmd_sq = c_t + 2 loss holds.
inline double loss(const GramCache& cache, const std::string& label, const WeightedSupport& ws) {
    detail::check_support(cache, ws);
    const Vector& w = ws.weights_of(label);
    if (w.size() != ws.size())
        throw ContractViolation("weight row length does not match support size");
    if (ws.size() == 0) return 0.0;
    const SupportView view = support_view(cache, label, ws.support);
    return 0.5 * w.dot(view.K_ss * w) - w.dot(view.mu_s);
}

// Values below this are treated as numerical corruption rather than roundoff.
inline constexpr double kMmdClampTolerance = 1e-9;

inline double clamp_mmd_sq(double value, const std::string& label) {
    if (value < -kMmdClampTolerance)
        throw NumericError("mmd_sq for dataset '" + label + "' is " + format_double(value) +
                           ", beyond the roundoff tolerance " + format_double(-kMmdClampTolerance));
    return value < 0.0 ? 0.0 : value;
}

inline double mmd_sq(const GramCache& cache, const std::string& label, const WeightedSupport& ws) {
    return clamp_mmd_sq(cache.c_of(label) + 2.0 * loss(cache, label, ws), label);
}

// Witness at candidate i: how much heavier dataset t is than its summary
// around u_i. Positive values mark under-represented regions.
inline double witness(const GramCache& cache, const std::string& label, Index candidate,
                      const WeightedSupport& ws) {
    detail::check_support(cache, ws);
    if (candidate < 0 || candidate >= cache.size())
        throw ContractViolation("witness query index " + std::to_string(candidate) +
                                " outside the candidate range");
    const Vector& w = ws.weights_of(label);
    double pulled = 0.0;
    for (Index j = 0; j < ws.size(); ++j)
        pulled += w(j) * cache.K(candidate, ws.support[static_cast<std::size_t>(j)]);
    return cache.mu_of(label)(candidate) - pulled;
}

// Witness at an arbitrary point, evaluated directly against the dataset rows
// and the support's table rows. `support_rows` are EmbeddingTable row
// indices, i.e. cache.candidate_rows[ws.support[j]].
inline double witness(const EmbeddingTable& table, const KernelModel& kernel,
                      const std::vector<Index>& dataset_rows, const std::vector<Index>& support_rows,
                      const Vector& weights, const Eigen::Ref<const Vector>& query) {
    if (query.size() != table.dim)
        throw ContractViolation("witness query has dimension " + std::to_string(query.size()) +
                                ", table dimension is " + std::to_string(table.dim));
    if (static_cast<Index>(support_rows.size()) != weights.size())
        throw ContractViolation("support rows and weights differ in length");
    if (dataset_rows.empty()) throw ContractViolation("witness over an empty dataset");

    const double n = static_cast<double>(dataset_rows.size());
    std::vector<double> terms(dataset_rows.size());
    for (std::size_t i = 0; i < dataset_rows.size(); ++i)
        terms[i] = kernel.from_squared_distance(
                       (query.transpose() - table.points.row(dataset_rows[i])).squaredNorm()) /
                   n;
    const double data_term = pairwise_sum(terms);

    std::vector<double> pulled(support_rows.size());
    for (std::size_t j = 0; j < support_rows.size(); ++j)
        pulled[j] = weights(static_cast<Index>(j)) *
                    kernel.from_squared_distance(
                        (query.transpose() - table.points.row(support_rows[j])).squaredNorm());
    return data_term - (pulled.empty() ? 0.0 : pairwise_sum(pulled));
}

}  // namespace depmmd

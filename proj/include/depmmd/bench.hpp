#pragma once

#include <limits>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include "depmmd/fit.hpp"

namespace depmmd {

struct BenchRecord {
    std::string algorithm;
    Index m = 0;               // exemplar count after the iteration
    std::string label;
    double mmd_sq = 0.0;
    double seconds = 0.0;      // cumulative selection time, cache excluded
};

struct BenchResult {
    std::vector<BenchRecord> records;
    std::map<std::string, std::string> errors;  // algorithm name -> message
};

// MMD-vs-m and time-vs-m curves. Every algorithm consumes the same cache, so
// timing covers selection logic only; a discarded one-exemplar run warms the
// code paths before each timed run. The threshold is dropped to the smallest
// positive double so the fit runs out its exemplar budget.
inline BenchResult run_curves(const GramCache& cache, const std::vector<Algorithm>& algorithms,
                              Index max_m, double max_seconds, const OptimizerConfig& optimizer = {},
                              int threads = 0) {
    if (max_m < 1) throw SpecError("max_m must be >= 1");
    BenchResult out;
    for (const Algorithm algorithm : algorithms) {
        FitConfig config;
        config.algorithm = algorithm;
        config.epsilon_sq = std::numeric_limits<double>::denorm_min();
        config.max_exemplars = max_m;
        config.max_seconds = max_seconds;
        config.optimizer = optimizer;
        config.threads = threads;
        try {
            FitConfig warm = config;
            warm.max_exemplars = 1;
            warm.max_seconds = std::numeric_limits<double>::infinity();
            (void)fit(cache, warm);

            const DependentCoreset coreset = fit(cache, config);
            for (std::size_t it = 0; it < coreset.trace.size(); ++it)
                for (const auto& label : cache.labels)
                    out.records.push_back({algorithm_name(algorithm), static_cast<Index>(it + 1), label,
                                           coreset.trace[it].mmd_sq.at(label),
                                           coreset.trace[it].elapsed_seconds});
        } catch (const Error& e) {
            out.errors[algorithm_name(algorithm)] = e.what();
        }
    }
    return out;
}

struct SizeRecord {
    std::string algorithm;
    double epsilon_sq = 0.0;
    Index size = 0;
    bool satisfied = false;
    std::string stop_reason;   // binding budget when not satisfied
};

struct SizeResult {
    std::vector<SizeRecord> records;
    std::map<std::string, std::string> errors;  // "algorithm@eps2" -> message
};

// Coreset size needed to satisfy each threshold, or the budget that bound
// first. Thresholds run largest-first so the cheap cells come out early.
inline SizeResult size_to_threshold(const GramCache& cache, const std::vector<Algorithm>& algorithms,
                                    std::vector<double> thresholds, Index max_m, double max_seconds,
                                    const OptimizerConfig& optimizer = {}, int threads = 0) {
    for (double eps : thresholds)
        if (!(eps > 0.0)) throw SpecError("thresholds must be positive");
    std::sort(thresholds.begin(), thresholds.end(), std::greater<double>());

    SizeResult out;
    for (const Algorithm algorithm : algorithms) {
        for (double eps : thresholds) {
            FitConfig config;
            config.algorithm = algorithm;
            config.epsilon_sq = eps;
            config.max_exemplars = max_m;
            config.max_seconds = max_seconds;
            config.optimizer = optimizer;
            config.threads = threads;
            try {
                const DependentCoreset coreset = fit(cache, config);
                out.records.push_back({algorithm_name(algorithm), eps, coreset.ws.size(),
                                       coreset.satisfied, stop_reason_name(coreset.stop_reason)});
            } catch (const Error& e) {
                out.errors[algorithm_name(algorithm) + "@" + format_double(eps)] = e.what();
            }
        }
    }
    return out;
}

inline void write_curves_csv(std::ostream& os, const std::vector<BenchRecord>& records) {
    os << "algorithm,m,dataset,mmd_sq,seconds\n";
    for (const auto& r : records)
        os << r.algorithm << "," << r.m << "," << r.label << "," << format_double(r.mmd_sq) << ","
           << format_double(r.seconds) << "\n";
}

inline void write_sizes_csv(std::ostream& os, const std::vector<SizeRecord>& records) {
    os << "algorithm,eps2,size,satisfied,stop_reason\n";
    for (const auto& r : records)
        os << r.algorithm << "," << format_double(r.epsilon_sq) << "," << r.size << ","
           << (r.satisfied ? "true" : "false") << "," << r.stop_reason << "\n";
}

}  // namespace depmmd

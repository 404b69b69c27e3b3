#pragma once

#include <chrono>
#include <cmath>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "depmmd/mmd.hpp"
#include "depmmd/parallel.hpp"
#include "depmmd/simplex.hpp"

namespace depmmd {

enum class Algorithm { dmmd, dmmd_opt, protodash };

inline std::string algorithm_name(Algorithm a) {
    switch (a) {
        case Algorithm::dmmd: return "dmmd";
        case Algorithm::dmmd_opt: return "dmmd-opt";
        case Algorithm::protodash: return "protodash";
    }
    throw ContractViolation("unhandled algorithm value");
}

inline Algorithm parse_algorithm(const std::string& name) {
    if (name == "dmmd") return Algorithm::dmmd;
    if (name == "dmmd-opt") return Algorithm::dmmd_opt;
    if (name == "protodash") return Algorithm::protodash;
    throw SpecError("unknown algorithm '" + name + "' (choices: dmmd, dmmd-opt, protodash)");
}

enum class StopReason { threshold_met, max_exemplars, max_seconds, candidates_exhausted };

inline std::string stop_reason_name(StopReason r) {
    switch (r) {
        case StopReason::threshold_met: return "threshold_met";
        case StopReason::max_exemplars: return "max_exemplars";
        case StopReason::max_seconds: return "max_seconds";
        case StopReason::candidates_exhausted: return "candidates_exhausted";
    }
    throw ContractViolation("unhandled stop reason value");
}

// Raised when every remaining candidate's embedding coincides with the
// current mean embedding for every unsatisfied dataset, so no mixing
// weight can change any loss.
class StallError : public Error {
  public:
    using Error::Error;
};

struct OptimizerConfig {
    Index max_iterations = 500;
    double gradient_tolerance = 1e-8;
};

struct FitConfig {
    double epsilon_sq = 0.01;
    Index max_exemplars = 1;
    double max_seconds = 3600.0;
    Algorithm algorithm = Algorithm::dmmd;
    OptimizerConfig optimizer;
    int threads = 0;

    void validate() const {
        if (!(epsilon_sq > 0.0)) throw SpecError("epsilon_sq must be > 0");
        if (max_exemplars < 1) throw SpecError("max_exemplars must be >= 1");
        if (!(max_seconds > 0.0)) throw SpecError("max_seconds must be > 0");
    }
};

// Outcome of the closed-form line search over mixes (1-beta) Q + beta delta_u.
struct MixResult {
    double beta = 0.0;
    double projected_loss = 0.0;
    bool degenerate = false;
};

inline constexpr double kMixDenominatorFloor = 1e-14;
inline constexpr double kBetaCeiling = 1.0 - 1e-9;

// A = w'K_SS w, b = sum_i w_i k(u_i, u*), m = mu_t[u*], p = w'mu_t[S],
// kss = k(u*, u*). The minimizer of the mixed loss over beta follows from
// setting its beta derivative to zero; the denominator is the squared RKHS
// distance between the current mean embedding and the candidate feature.
inline MixResult mix_from_terms(double A, double b, double m, double p, double kss) {
    MixResult out;
    const double current_loss = 0.5 * A - p;
    const double denominator = A - 2.0 * b + kss;
    if (denominator < kMixDenominatorFloor) {
        out.beta = 0.0;
        out.projected_loss = current_loss;
        out.degenerate = true;
        return out;
    }
    double beta = (A - b + m - p) / denominator;
    beta = std::clamp(beta, 0.0, kBetaCeiling);
    const double one_minus = 1.0 - beta;
    out.beta = beta;
    out.projected_loss = 0.5 * (one_minus * one_minus * A + 2.0 * beta * one_minus * b + beta * beta * kss) -
                         (one_minus * p + beta * m);
    return out;
}

inline MixResult optimal_mix(const GramCache& cache, const std::string& label, const WeightedSupport& ws,
                             Index candidate) {
    if (candidate < 0 || candidate >= cache.size())
        throw ContractViolation("candidate index " + std::to_string(candidate) +
                                " outside the candidate range");
    const Vector& w = ws.weights_of(label);
    const Index m_s = ws.size();
    if (w.size() != m_s) throw ContractViolation("weight row length does not match support size");

    const Vector& mu = cache.mu_of(label);
    double A = 0.0, b = 0.0, p = 0.0;
    for (Index i = 0; i < m_s; ++i) {
        const Index si = ws.support[static_cast<std::size_t>(i)];
        b += w(i) * cache.K(si, candidate);
        p += w(i) * mu(si);
        for (Index j = 0; j < m_s; ++j)
            A += w(i) * w(j) * cache.K(si, ws.support[static_cast<std::size_t>(j)]);
    }
    return mix_from_terms(A, b, mu(candidate), p, cache.K(candidate, candidate));
}

// Per-iteration snapshot. beta holds the mixing weight actually applied to
// each dataset this step (the added atom's post-optimization weight for
// protodash); mmd_sq is measured after all weight updates of the step.
struct IterationRecord {
    Index candidate = -1;
    std::map<std::string, double> beta;
    std::map<std::string, double> mmd_sq;
    double elapsed_seconds = 0.0;
};

struct DependentCoreset {
    Algorithm algorithm = Algorithm::dmmd;
    double epsilon_sq = 0.0;
    WeightedSupport ws;
    std::map<std::string, double> mmd_sq;
    std::vector<IterationRecord> trace;
    bool satisfied = false;
    StopReason stop_reason = StopReason::threshold_met;
    KernelModel kernel;
    Index optimizer_nonconverged = 0;
};

namespace detail {

struct DatasetState {
    std::string label;
    double A = 0.0;        // w'K_SS w
    double p = 0.0;        // w'mu_t[S]
    Vector kw;             // K[:, S] w over all candidates
    double current_loss = 0.0;
};

inline void refresh_state(const GramCache& cache, const WeightedSupport& ws, DatasetState& state) {
    const Vector& w = ws.weights_of(state.label);
    const Vector& mu = cache.mu_of(state.label);
    const Index m = ws.size();
    state.kw = Vector::Zero(cache.size());
    double A = 0.0, p = 0.0;
    for (Index j = 0; j < m; ++j) {
        const Index sj = ws.support[static_cast<std::size_t>(j)];
        state.kw += w(j) * cache.K.col(sj);
        p += w(j) * mu(sj);
    }
    for (Index i = 0; i < m; ++i)
        A += w(i) * state.kw(ws.support[static_cast<std::size_t>(i)]);
    state.A = A;
    state.p = p;
    state.current_loss = 0.5 * A - p;
}

struct StepChoice {
    Index candidate = -1;
    std::map<std::string, MixResult> mixes;
};

// Scores every unchosen candidate by its projected summed loss over the
// unsatisfied datasets. The scan is chunked across workers with disjoint
// writes; the argmin runs sequentially in index order so ties always fall
// to the lowest candidate index regardless of thread count.
inline StepChoice greedy_step(const GramCache& cache, const WeightedSupport& ws,
                              const std::vector<DatasetState>& states,
                              const std::vector<std::string>& active,
                              const std::vector<char>& in_support, int threads) {
    const Index n_u = cache.size();
    const bool first = ws.size() == 0;

    std::vector<double> scores(static_cast<std::size_t>(n_u),
                               std::numeric_limits<double>::infinity());
    std::vector<char> all_degenerate(static_cast<std::size_t>(n_u), 0);

    std::vector<const DatasetState*> active_states;
    for (const auto& label : active) {
        const DatasetState* found = nullptr;
        for (const auto& s : states)
            if (s.label == label) found = &s;
        if (!found) throw ContractViolation("no state for dataset '" + label + "'");
        active_states.push_back(found);
    }

    parallel_for(static_cast<std::size_t>(n_u), threads, [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            if (in_support[i]) continue;
            const Index ci = static_cast<Index>(i);
            double score = 0.0;
            bool degenerate_everywhere = true;
            for (const DatasetState* st : active_states) {
                if (first) {
                    score += 0.5 * cache.K(ci, ci) - cache.mu_of(st->label)(ci);
                    degenerate_everywhere = false;
                } else {
                    const MixResult mix = mix_from_terms(st->A, st->kw(ci), cache.mu_of(st->label)(ci),
                                                         st->p, cache.K(ci, ci));
                    score += mix.projected_loss;
                    if (!mix.degenerate) degenerate_everywhere = false;
                }
            }
            scores[i] = score;
            all_degenerate[i] = degenerate_everywhere ? 1 : 0;
        }
    });

    Index chosen = -1;
    double best = std::numeric_limits<double>::infinity();
    bool any_usable = false;
    for (Index i = 0; i < n_u; ++i) {
        if (in_support[static_cast<std::size_t>(i)]) continue;
        if (!all_degenerate[static_cast<std::size_t>(i)]) any_usable = true;
        if (scores[static_cast<std::size_t>(i)] < best) {
            best = scores[static_cast<std::size_t>(i)];
            chosen = i;
        }
    }
    if (chosen < 0) throw ContractViolation("greedy step called with no unchosen candidates");
    if (!any_usable)
        throw StallError("greedy selection stalled: every remaining candidate coincides with the "
                         "current mean embedding for all " + std::to_string(active.size()) +
                         " unsatisfied datasets (support size " + std::to_string(ws.size()) + ")");

    StepChoice choice;
    choice.candidate = chosen;
    for (const auto& s : states) {
        if (first) {
            MixResult mix;
            mix.beta = 1.0;
            mix.projected_loss = 0.5 * cache.K(chosen, chosen) - cache.mu_of(s.label)(chosen);
            choice.mixes[s.label] = mix;
        } else {
            choice.mixes[s.label] =
                mix_from_terms(s.A, s.kw(chosen), cache.mu_of(s.label)(chosen), s.p, cache.K(chosen, chosen));
        }
    }
    return choice;
}

}  // namespace detail

struct ReoptimizeResult {
    Vector weights;
    double loss = 0.0;
    bool converged = false;
};

// Full simplex-constrained re-fit of one dataset's weights on a fixed
// support, warm-started from `initial`. Never returns weights scoring
// worse than a feasible start.
inline ReoptimizeResult reoptimize_weights(const GramCache& cache, const std::string& label,
                                           const std::vector<Index>& support, const Vector& initial,
                                           const OptimizerConfig& config = {}) {
    if (support.empty()) throw ContractViolation("cannot reoptimize weights on an empty support");
    const SupportView view = support_view(cache, label, support);
    const SimplexResult res = minimize_on_simplex(view.K_ss, view.mu_s, initial,
                                                  config.max_iterations, config.gradient_tolerance);
    return {res.weights, res.loss, res.converged};
}

namespace detail {

inline std::vector<std::string> unsatisfied(const std::map<std::string, double>& mmd,
                                            const std::vector<std::string>& labels, double eps_sq) {
    std::vector<std::string> active;
    for (const auto& label : labels)
        if (mmd.at(label) > eps_sq) active.push_back(label);
    return active;
}

inline DependentCoreset fit_greedy_family(const GramCache& cache, const FitConfig& config) {
    config.validate();
    const auto start_time = std::chrono::steady_clock::now();
    const auto elapsed = [&start_time] {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_time).count();
    };

    const bool reopt = config.algorithm == Algorithm::dmmd_opt;
    const Index n_u = cache.size();

    DependentCoreset result;
    result.algorithm = config.algorithm;
    result.epsilon_sq = config.epsilon_sq;
    result.kernel = cache.kernel;

    std::vector<detail::DatasetState> states;
    for (const auto& label : cache.labels) {
        result.ws.weights[label] = Vector(0);
        detail::DatasetState st;
        st.label = label;
        states.push_back(std::move(st));
        result.mmd_sq[label] = clamp_mmd_sq(cache.c_of(label), label);
    }
    for (auto& st : states) detail::refresh_state(cache, result.ws, st);

    std::vector<char> in_support(static_cast<std::size_t>(n_u), 0);
    Index chosen_count = 0;

    while (true) {
        const std::vector<std::string> active =
            detail::unsatisfied(result.mmd_sq, cache.labels, config.epsilon_sq);
        if (active.empty()) {
            result.satisfied = true;
            result.stop_reason = StopReason::threshold_met;
            break;
        }
        if (result.ws.size() >= config.max_exemplars) {
            result.stop_reason = StopReason::max_exemplars;
            break;
        }
        if (elapsed() >= config.max_seconds) {
            result.stop_reason = StopReason::max_seconds;
            break;
        }
        if (chosen_count >= n_u) {
            result.stop_reason = StopReason::candidates_exhausted;
            break;
        }

        const detail::StepChoice choice =
            detail::greedy_step(cache, result.ws, states, active, in_support, config.threads);

        result.ws.support.push_back(choice.candidate);
        in_support[static_cast<std::size_t>(choice.candidate)] = 1;
        ++chosen_count;

        IterationRecord record;
        record.candidate = choice.candidate;
        for (const auto& label : cache.labels) {
            Vector& w = result.ws.weights[label];
            const double beta = choice.mixes.at(label).beta;
            Vector next(w.size() + 1);
            next.head(w.size()) = (1.0 - beta) * w;
            next(w.size()) = beta;
            w = std::move(next);
            record.beta[label] = beta;
        }

        if (reopt) {
            for (const auto& label : cache.labels) {
                const ReoptimizeResult rr = reoptimize_weights(cache, label, result.ws.support,
                                                               result.ws.weights[label], config.optimizer);
                if (!rr.converged) ++result.optimizer_nonconverged;
                result.ws.weights[label] = rr.weights;
            }
        }

        for (auto& st : states) {
            detail::refresh_state(cache, result.ws, st);
            const double value = clamp_mmd_sq(cache.c_of(st.label) + 2.0 * st.current_loss, st.label);
            result.mmd_sq[st.label] = value;
            record.mmd_sq[st.label] = value;
        }
        record.elapsed_seconds = elapsed();
        result.trace.push_back(std::move(record));
    }
    return result;
}

inline DependentCoreset fit_protodash_family(const GramCache& cache, const FitConfig& config) {
    config.validate();
    const auto start_time = std::chrono::steady_clock::now();
    const auto elapsed = [&start_time] {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_time).count();
    };

    const Index n_u = cache.size();

    DependentCoreset result;
    result.algorithm = Algorithm::protodash;
    result.epsilon_sq = config.epsilon_sq;
    result.kernel = cache.kernel;

    std::vector<detail::DatasetState> states;
    for (const auto& label : cache.labels) {
        result.ws.weights[label] = Vector(0);
        detail::DatasetState st;
        st.label = label;
        states.push_back(std::move(st));
        result.mmd_sq[label] = clamp_mmd_sq(cache.c_of(label), label);
    }
    for (auto& st : states) detail::refresh_state(cache, result.ws, st);

    std::vector<char> in_support(static_cast<std::size_t>(n_u), 0);

    while (true) {
        const std::vector<std::string> active =
            detail::unsatisfied(result.mmd_sq, cache.labels, config.epsilon_sq);
        if (active.empty()) {
            result.satisfied = true;
            result.stop_reason = StopReason::threshold_met;
            break;
        }
        if (result.ws.size() >= config.max_exemplars) {
            result.stop_reason = StopReason::max_exemplars;
            break;
        }
        if (elapsed() >= config.max_seconds) {
            result.stop_reason = StopReason::max_seconds;
            break;
        }
        if (result.ws.size() >= n_u) {
            result.stop_reason = StopReason::candidates_exhausted;
            break;
        }

        // Steepest loss gradient summed over the unsatisfied datasets:
        // grad_i = sum_t (kw_t[i] - mu_t[i]), lowest wins. With no atoms yet
        // this reduces to the largest pooled mean similarity.
        std::vector<const detail::DatasetState*> active_states;
        for (const auto& label : active)
            for (const auto& s : states)
                if (s.label == label) active_states.push_back(&s);

        std::vector<double> scores(static_cast<std::size_t>(n_u),
                                   std::numeric_limits<double>::infinity());
        parallel_for(static_cast<std::size_t>(n_u), config.threads,
                     [&](std::size_t begin, std::size_t end) {
                         for (std::size_t i = begin; i < end; ++i) {
                             if (in_support[i]) continue;
                             const Index ci = static_cast<Index>(i);
                             double g = 0.0;
                             for (const detail::DatasetState* st : active_states)
                                 g += st->kw(ci) - cache.mu_of(st->label)(ci);
                             scores[i] = g;
                         }
                     });

        Index chosen = -1;
        double best = std::numeric_limits<double>::infinity();
        for (Index i = 0; i < n_u; ++i) {
            if (in_support[static_cast<std::size_t>(i)]) continue;
            if (scores[static_cast<std::size_t>(i)] < best) {
                best = scores[static_cast<std::size_t>(i)];
                chosen = i;
            }
        }
        if (chosen < 0) throw ContractViolation("no unchosen candidate in protodash step");

        result.ws.support.push_back(chosen);
        in_support[static_cast<std::size_t>(chosen)] = 1;

        IterationRecord record;
        record.candidate = chosen;
        for (const auto& label : cache.labels) {
            Vector& w = result.ws.weights[label];
            Vector start(w.size() + 1);
            start.head(w.size()) = w;
            start(w.size()) = 0.0;
            const ReoptimizeResult rr =
                reoptimize_weights(cache, label, result.ws.support, start, config.optimizer);
            if (!rr.converged) ++result.optimizer_nonconverged;
            result.ws.weights[label] = rr.weights;
            record.beta[label] = rr.weights(rr.weights.size() - 1);
        }

        for (auto& st : states) {
            detail::refresh_state(cache, result.ws, st);
            const double value = clamp_mmd_sq(cache.c_of(st.label) + 2.0 * st.current_loss, st.label);
            result.mmd_sq[st.label] = value;
            record.mmd_sq[st.label] = value;
        }
        record.elapsed_seconds = elapsed();
        result.trace.push_back(std::move(record));
    }
    return result;
}

}  // namespace detail

inline DependentCoreset fit_dmmd(const GramCache& cache, FitConfig config) {
    config.algorithm = Algorithm::dmmd;
    return detail::fit_greedy_family(cache, config);
}

inline DependentCoreset fit_dmmd_opt(const GramCache& cache, FitConfig config) {
    config.algorithm = Algorithm::dmmd_opt;
    return detail::fit_greedy_family(cache, config);
}

inline DependentCoreset fit_protodash_dep(const GramCache& cache, FitConfig config) {
    config.algorithm = Algorithm::protodash;
    return detail::fit_protodash_family(cache, config);
}

inline DependentCoreset fit(const GramCache& cache, const FitConfig& config) {
    switch (config.algorithm) {
        case Algorithm::dmmd: return fit_dmmd(cache, config);
        case Algorithm::dmmd_opt: return fit_dmmd_opt(cache, config);
        case Algorithm::protodash: return fit_protodash_dep(cache, config);
    }
    throw ContractViolation("unhandled algorithm value");
}

}  // namespace depmmd

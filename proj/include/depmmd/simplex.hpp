#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "depmmd/common.hpp"

namespace depmmd {

// Euclidean projection onto the probability simplex (sort-and-threshold).
inline Vector project_to_simplex(const Vector& v) {
    const Index m = v.size();
    if (m == 0) throw ContractViolation("cannot project an empty vector onto the simplex");
    std::vector<double> u(v.data(), v.data() + m);
    std::sort(u.begin(), u.end(), std::greater<double>());
    double running = 0.0;
    double tau = 0.0;
    Index rho = 0;
    for (Index i = 0; i < m; ++i) {
        running += u[static_cast<std::size_t>(i)];
        const double candidate = (running - 1.0) / static_cast<double>(i + 1);
        if (u[static_cast<std::size_t>(i)] - candidate > 0.0) {
            tau = candidate;
            rho = i + 1;
        }
    }
    (void)rho;
    Vector out(m);
    for (Index i = 0; i < m; ++i) out(i) = std::max(0.0, v(i) - tau);
    return out;
}

struct SimplexResult {
    Vector weights;
    double loss = 0.0;
    bool converged = false;
    Index iterations = 0;
};

namespace detail {

inline double quadratic_loss(const Matrix& K, const Vector& mu, const Vector& w) {
    return 0.5 * w.dot(K * w) - w.dot(mu);
}

// Equality-constrained solve on the face F = {i : keep[i]}: stationarity of
// 1/2 w'Kw - w'mu with sum(w_F) = 1, zeros elsewhere. Returns false when the
// bordered system is singular or produces non-finite entries.
inline bool face_solve(const Matrix& K, const Vector& mu, const std::vector<bool>& keep, Vector& out) {
    const Index m = K.rows();
    std::vector<Index> face;
    for (Index i = 0; i < m; ++i)
        if (keep[static_cast<std::size_t>(i)]) face.push_back(i);
    const Index f = static_cast<Index>(face.size());
    if (f == 0) return false;

    Matrix sys(f + 1, f + 1);
    Vector rhs(f + 1);
    for (Index a = 0; a < f; ++a) {
        for (Index b = 0; b < f; ++b)
            sys(a, b) = K(face[static_cast<std::size_t>(a)], face[static_cast<std::size_t>(b)]);
        sys(a, f) = 1.0;
        sys(f, a) = 1.0;
        rhs(a) = mu(face[static_cast<std::size_t>(a)]);
    }
    sys(f, f) = 0.0;
    rhs(f) = 1.0;

    Eigen::FullPivLU<Matrix> lu(sys);
    if (!lu.isInvertible()) return false;
    const Vector sol = lu.solve(rhs);
    if (!sol.allFinite()) return false;

    out = Vector::Zero(m);
    for (Index a = 0; a < f; ++a) out(face[static_cast<std::size_t>(a)]) = sol(a);
    return true;
}

}  // namespace detail

// Minimize 1/2 w'Kw - w'mu over the probability simplex. Accelerated
// projected gradient with function-value restarts does the descent; an
// active-set stationarity solve then sharpens the identified face to
// machine precision. The reported iterate is the best one seen, so the
// result never scores worse than a feasible starting point.
inline SimplexResult minimize_on_simplex(const Matrix& K, const Vector& mu, const Vector& start,
                                         Index max_iterations = 500, double gradient_tolerance = 1e-8) {
    const Index m = K.rows();
    if (K.cols() != m || mu.size() != m || start.size() != m)
        throw ContractViolation("simplex solver inputs have mismatched sizes");
    if (max_iterations < 1) throw SpecError("optimizer iteration cap must be >= 1");

    SimplexResult result;
    if (m == 1) {
        result.weights = Vector::Ones(1);
        result.loss = detail::quadratic_loss(K, mu, result.weights);
        result.converged = true;
        return result;
    }

    double lipschitz = K.cwiseAbs().rowwise().sum().maxCoeff();
    if (!(lipschitz > 0.0)) lipschitz = 1.0;
    const double step = 1.0 / lipschitz;

    Vector w = project_to_simplex(start);
    Vector y = w;
    Vector w_prev = w;
    double momentum = 1.0;

    double best_loss = detail::quadratic_loss(K, mu, w);
    Vector best_w = w;
    double loss_prev = best_loss;

    Index iter = 0;
    for (; iter < max_iterations; ++iter) {
        const Vector grad_y = K * y - mu;
        w = project_to_simplex(y - step * grad_y);
        const double loss_w = detail::quadratic_loss(K, mu, w);

        if (loss_w < best_loss) {
            best_loss = loss_w;
            best_w = w;
        }

        const Vector grad_w = K * w - mu;
        const Vector mapped = w - project_to_simplex(w - step * grad_w);
        if (mapped.lpNorm<Eigen::Infinity>() * lipschitz <= gradient_tolerance) {
            result.converged = true;
            ++iter;
            break;
        }

        if (loss_w > loss_prev) {
            momentum = 1.0;
            y = w;
        } else {
            const double momentum_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * momentum * momentum));
            y = w + ((momentum - 1.0) / momentum_next) * (w - w_prev);
            momentum = momentum_next;
        }
        loss_prev = loss_w;
        w_prev = w;
    }
    result.iterations = iter;

    // Face polish: solve the stationarity system on the support suggested by
    // the first-order iterate, growing or shrinking the face when the
    // Karush-Kuhn-Tucker conditions point elsewhere.
    std::vector<bool> keep(static_cast<std::size_t>(m));
    for (Index i = 0; i < m; ++i) keep[static_cast<std::size_t>(i)] = best_w(i) > 1e-12;
    const Index max_face_rounds = 4 * m;
    for (Index round = 0; round < max_face_rounds; ++round) {
        Vector polished;
        if (!detail::face_solve(K, mu, keep, polished)) break;

        Index most_negative = -1;
        double lowest = -1e-12;
        for (Index i = 0; i < m; ++i)
            if (keep[static_cast<std::size_t>(i)] && polished(i) < lowest) {
                lowest = polished(i);
                most_negative = i;
            }
        if (most_negative >= 0) {
            keep[static_cast<std::size_t>(most_negative)] = false;
            continue;
        }

        for (Index i = 0; i < m; ++i) polished(i) = std::max(0.0, polished(i));
        const double total = polished.sum();
        if (!(total > 0.0)) break;
        polished /= total;
        const double polished_loss = detail::quadratic_loss(K, mu, polished);
        if (polished_loss < best_loss) {
            best_loss = polished_loss;
            best_w = polished;
        }

        // Off-face entries whose multiplier condition fails want in.
        const Vector grad = K * polished - mu;
        double nu = 0.0;
        Index on_face = 0;
        for (Index i = 0; i < m; ++i)
            if (polished(i) > 0.0) {
                nu += grad(i);
                ++on_face;
            }
        nu /= static_cast<double>(std::max<Index>(on_face, 1));
        Index most_violated = -1;
        double worst = -1e-12;
        for (Index i = 0; i < m; ++i)
            if (!(polished(i) > 0.0) && grad(i) - nu < worst) {
                worst = grad(i) - nu;
                most_violated = i;
            }
        if (most_violated < 0) break;
        keep[static_cast<std::size_t>(most_violated)] = true;
        for (Index i = 0; i < m; ++i)
            if (polished(i) > 0.0) keep[static_cast<std::size_t>(i)] = true;
    }

    result.weights = best_w;
    result.loss = best_loss;
    return result;
}

}  // namespace depmmd

#include "morphdict/sparsity.hpp"

#include <cmath>
#include <string>

#include "morphdict/errors.hpp"

namespace morphdict {

double hoyer_sigma(const Eigen::VectorXd& v) {
    const auto p = v.size();
    if (p < 2) throw ArgumentError("hoyer_sigma: vector length must be >= 2");
    double l2 = v.norm();
    if (l2 == 0.0) throw NumericError("hoyer_sigma: undefined for the zero vector");
    double sqrtp = std::sqrt(double(p));
    return (sqrtp - v.lpNorm<1>() / l2) / (sqrtp - 1.0);
}

Eigen::VectorXd project_sparseness(const Eigen::VectorXd& v, SparsityTarget target) {
    const Eigen::Index n = v.size();
    if (n < 2) throw ArgumentError("project_sparseness: vector length must be >= 2");
    if (!(target.sigma > 0.0) || target.sigma > 1.0)
        throw ArgumentError("project_sparseness: sigma target must lie in (0,1]");
    const double l2 = v.norm();
    if (l2 == 0.0 || v.maxCoeff() <= 0.0)
        throw ArgumentError("project_sparseness: input needs at least one positive entry");

    const double sqrtn = std::sqrt(double(n));
    // Invert the sparsity formula at fixed L2 to get the target L1.
    const double l1 = l2 * (sqrtn - target.sigma * (sqrtn - 1.0));

    constexpr int kMaxIter = 200;
    constexpr double kTol = 1e-8;

    Eigen::VectorXd s = v;
    std::vector<bool> zeroed(n, false);
    Eigen::Index active = n;
    s.array() += (l1 - s.sum()) / double(n);

    for (int iter = 0; iter < kMaxIter; ++iter) {
        if (active == 0)
            throw NumericError("project_sparseness: all coordinates zeroed");

        // Midpoint of the active simplex slice.
        Eigen::VectorXd m = Eigen::VectorXd::Zero(n);
        const double mid = l1 / double(active);
        for (Eigen::Index i = 0; i < n; ++i)
            if (!zeroed[i]) m[i] = mid;

        Eigen::VectorXd w = s - m;
        double a = w.squaredNorm();
        if (a <= 1e-24 * l2 * l2) {
            // s sits on the midpoint: pick the sum-preserving direction that
            // grows the lowest active index, so ties resolve deterministically.
            w.setZero();
            for (Eigen::Index i = 0; i < n; ++i) {
                if (zeroed[i]) continue;
                w[i] = -1.0 / double(active);
            }
            for (Eigen::Index i = 0; i < n; ++i) {
                if (!zeroed[i]) {
                    w[i] += 1.0;
                    break;
                }
            }
            a = w.squaredNorm();
        }

        // Step to the L2 sphere along w (stays on the L1 hyperplane).
        const double b = 2.0 * m.dot(w);
        const double c = m.squaredNorm() - l2 * l2;
        double disc = b * b - 4.0 * a * c;
        if (disc < 0.0) disc = 0.0;
        const double alpha = (-b + std::sqrt(disc)) / (2.0 * a);
        s = m + alpha * w;

        const double neg = s.minCoeff();
        if (neg >= 0.0) return s;
        if (neg >= -kTol * l2) {
            s = s.cwiseMax(0.0);
            s *= l2 / s.norm();
            return s;
        }

        for (Eigen::Index i = 0; i < n; ++i) {
            if (!zeroed[i] && s[i] < 0.0) {
                zeroed[i] = true;
                --active;
                s[i] = 0.0;
            }
        }
        if (active == 0)
            throw NumericError("project_sparseness: all coordinates zeroed");
        const double shift = (s.sum() - l1) / double(active);
        for (Eigen::Index i = 0; i < n; ++i)
            if (!zeroed[i]) s[i] -= shift;
    }
    throw NumericError("project_sparseness: no convergence after " +
                       std::to_string(kMaxIter) + " iterations (n=" + std::to_string(n) +
                       ", sigma=" + std::to_string(target.sigma) + ")");
}

} // namespace morphdict

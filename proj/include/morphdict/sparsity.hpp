#ifndef MORPHDICT_SPARSITY_HPP
#define MORPHDICT_SPARSITY_HPP

#include <Eigen/Core>

namespace morphdict {

/// Sparsity degree in [0,1]; 1 = one-hot, 0 = constant magnitude.
struct SparsityTarget {
    double sigma = 0.0;
};

/// Hoyer sparsity of a vector of length p >= 2:
///   (sqrt(p) - |v|_1 / |v|_2) / (sqrt(p) - 1).
/// Throws ArgumentError for p < 2 and NumericError for the zero vector.
double hoyer_sigma(const Eigen::VectorXd& v);

/// Closest (Euclidean) non-negative vector to v with the same L2 norm
/// and hoyer_sigma equal to target.sigma.
///
/// The target L1 norm is derived from the fixed L2 norm by inverting the
/// sparsity formula; the iteration then alternates between the L1
/// hyperplane and the L2 sphere, zeroing negative coordinates as they
/// appear. Symmetric ties resolve toward the lowest active index.
/// Throws NumericError if not converged after 200 iterations.
Eigen::VectorXd project_sparseness(const Eigen::VectorXd& v, SparsityTarget target);

} // namespace morphdict

#endif // MORPHDICT_SPARSITY_HPP

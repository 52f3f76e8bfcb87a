#ifndef MORPHDICT_NMF_HPP
#define MORPHDICT_NMF_HPP

#include <Eigen/Core>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "morphdict/morphology.hpp"
#include "morphdict/sparsity.hpp"

namespace morphdict {

struct NmfConfig {
    int k = 100;
    std::optional<SparsityTarget> s_h; // sparsity of each column of H
    std::optional<SparsityTarget> s_w; // sparsity of each row of W
    int max_iter = 500;
    double tol = 1e-5; // relative objective-decrease stopping threshold
    uint64_t seed = 0;
};

/// Result of factorize: X (MxN) ~ H (Mxk) * W (kxN), both non-negative.
struct Factorization {
    Eigen::MatrixXd H;
    Eigen::MatrixXd W;
    std::vector<double> objective_trace; // ||X - HW||_F^2 per accepted iterate
    bool degenerate = false;             // set when X was all zeros

    double final_objective() const {
        return objective_trace.empty() ? 0.0 : objective_trace.back();
    }
};

/// Alternating sparse NMF. Factors with a sparsity target take an additive
/// gradient step (with step halving until the objective does not increase)
/// followed by a sparseness projection of each constrained column/row;
/// unconstrained factors take the standard multiplicative update. The
/// recorded objective trace never increases.
Factorization factorize(const Eigen::MatrixXd& X, const NmfConfig& cfg);

struct OfflineEncoding {
    Eigen::MatrixXd H;      // one encoding per row
    bool converged = true;  // false when any sample hit max_iter
};

/// Per-sample projected-gradient minimization of ||x - hW||^2 over h >= 0
/// against a fixed dictionary, with an optional sparseness target applied
/// to each encoding vector.
OfflineEncoding encode_offline(const Eigen::MatrixXd& X, const Eigen::MatrixXd& W,
                               std::optional<SparsityTarget> s_h = std::nullopt,
                               int max_iter = 500, double tol = 1e-8);

/// Minimum-norm least-squares encoding h = x W^+. May be negative; this is
/// the constraint-releasing fallback and not part-based.
Eigen::MatrixXd encode_pseudoinverse(const Eigen::MatrixXd& X, const Eigen::MatrixXd& W);

/// x_hat_i = sum_j H(i,j) W(j,:), unclipped.
Eigen::MatrixXd reconstruct(const Eigen::MatrixXd& H, const Eigen::MatrixXd& W);

/// Flat binary container, magic "MDIC": little-endian u32 header
/// (version, M, N, k), then H then W as little-endian f64, row-major.
void save_factorization(const Factorization& f, const std::string& path);
Factorization load_factorization(const std::string& path);

/// View the rows of W as dictionary atoms of the given image shape.
Dictionary dictionary_from_rows(const Eigen::MatrixXd& W, int height, int width);

} // namespace morphdict

#endif // MORPHDICT_NMF_HPP

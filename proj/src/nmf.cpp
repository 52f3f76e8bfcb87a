#include "morphdict/nmf.hpp"

#include <Eigen/QR>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "morphdict/errors.hpp"
#include "morphdict/rng.hpp"

namespace morphdict {

namespace {

constexpr double kMulGuard = 1e-12; // denominator guard in multiplicative updates

double objective(const Eigen::MatrixXd& X, const Eigen::MatrixXd& H, const Eigen::MatrixXd& W) {
    return (X - H * W).squaredNorm();
}

// Project a possibly-negative vector onto the sparseness constraint set.
// The gradient step can push a whole column below zero; flipping signs
// keeps the magnitude information and restores the projection's domain.
Eigen::VectorXd project_guarded(Eigen::VectorXd v, SparsityTarget target) {
    if (v.maxCoeff() <= 0.0) {
        v = v.cwiseAbs();
        if (v.maxCoeff() <= 0.0) v.setConstant(1.0 / std::sqrt(double(v.size())));
    }
    return project_sparseness(v, target);
}

void project_h_columns(Eigen::MatrixXd& H, SparsityTarget target) {
    for (Eigen::Index j = 0; j < H.cols(); ++j) H.col(j) = project_guarded(H.col(j), target);
}

void project_w_rows(Eigen::MatrixXd& W, SparsityTarget target) {
    for (Eigen::Index i = 0; i < W.rows(); ++i)
        W.row(i) = project_guarded(W.row(i).transpose(), target).transpose();
}

} // namespace

Factorization factorize(const Eigen::MatrixXd& X, const NmfConfig& cfg) {
    const Eigen::Index M = X.rows(), N = X.cols();
    if (M < 1 || N < 1) throw ArgumentError("factorize: empty data matrix");
    if (cfg.k < 1) throw ArgumentError("factorize: k must be >= 1");
    if (cfg.max_iter < 1) throw ArgumentError("factorize: max_iter must be >= 1");
    if (!(cfg.tol > 0)) throw ArgumentError("factorize: tol must be > 0");
    if (X.minCoeff() < 0.0) throw ArgumentError("factorize: data matrix has negative entries");

    Factorization f;
    if (X.maxCoeff() == 0.0) {
        f.H = Eigen::MatrixXd::Zero(M, cfg.k);
        f.W = Eigen::MatrixXd::Zero(cfg.k, N);
        f.objective_trace.push_back(0.0);
        f.degenerate = true;
        return f;
    }

    std::mt19937_64 gen(cfg.seed);
    f.H.resize(M, cfg.k);
    f.W.resize(cfg.k, N);
    for (Eigen::Index i = 0; i < M; ++i)
        for (Eigen::Index j = 0; j < cfg.k; ++j) f.H(i, j) = uniform01(gen);
    for (Eigen::Index i = 0; i < cfg.k; ++i)
        for (Eigen::Index j = 0; j < N; ++j) f.W(i, j) = uniform01(gen);
    if (cfg.s_h) project_h_columns(f.H, *cfg.s_h);
    if (cfg.s_w) project_w_rows(f.W, *cfg.s_w);

    double obj = objective(X, f.H, f.W);
    f.objective_trace.push_back(obj);

    double step_h = 1.0, step_w = 1.0;
    constexpr double kStepFloor = 1e-100;

    for (int iter = 0; iter < cfg.max_iter; ++iter) {
        // --- H update ---
        if (cfg.s_h) {
            const Eigen::MatrixXd grad = (f.H * f.W - X) * f.W.transpose();
            while (step_h > kStepFloor) {
                Eigen::MatrixXd trial = f.H - step_h * grad;
                project_h_columns(trial, *cfg.s_h);
                const double trial_obj = objective(X, trial, f.W);
                if (trial_obj <= obj) {
                    f.H = std::move(trial);
                    obj = trial_obj;
                    step_h *= 1.2;
                    break;
                }
                step_h /= 2.0;
            }
        } else {
            // Multiplicative update; kept only if it does not increase the
            // objective, so the recorded trace is monotone even in floats.
            const Eigen::MatrixXd numer = X * f.W.transpose();
            const Eigen::MatrixXd denom = f.H * (f.W * f.W.transpose());
            Eigen::MatrixXd trial =
                f.H.cwiseProduct(numer.cwiseQuotient(denom.array().max(kMulGuard).matrix()));
            const double trial_obj = objective(X, trial, f.W);
            if (trial_obj <= obj) {
                f.H = std::move(trial);
                obj = trial_obj;
            }
        }

        // --- W update ---
        if (cfg.s_w) {
            const Eigen::MatrixXd grad = f.H.transpose() * (f.H * f.W - X);
            while (step_w > kStepFloor) {
                Eigen::MatrixXd trial = f.W - step_w * grad;
                project_w_rows(trial, *cfg.s_w);
                const double trial_obj = objective(X, f.H, trial);
                if (trial_obj <= obj) {
                    f.W = std::move(trial);
                    obj = trial_obj;
                    step_w *= 1.2;
                    break;
                }
                step_w /= 2.0;
            }
        } else {
            const Eigen::MatrixXd numer = f.H.transpose() * X;
            const Eigen::MatrixXd denom = (f.H.transpose() * f.H) * f.W;
            Eigen::MatrixXd trial =
                f.W.cwiseProduct(numer.cwiseQuotient(denom.array().max(kMulGuard).matrix()));
            const double trial_obj = objective(X, f.H, trial);
            if (trial_obj <= obj) {
                f.W = std::move(trial);
                obj = trial_obj;
            }
        }

        const double prev = f.objective_trace.back();
        f.objective_trace.push_back(obj);
        const double rel_decrease = (prev - obj) / std::max(prev, 1e-300);
        if (rel_decrease < cfg.tol && iter > 0) break;
    }
    return f;
}

OfflineEncoding encode_offline(const Eigen::MatrixXd& X, const Eigen::MatrixXd& W,
                               std::optional<SparsityTarget> s_h, int max_iter, double tol) {
    if (X.cols() != W.cols())
        throw ArgumentError("encode_offline: image length does not match dictionary");
    if (W.minCoeff() < 0.0) throw ArgumentError("encode_offline: dictionary must be non-negative");

    const Eigen::Index M = X.rows(), k = W.rows();
    // The objective per sample is quadratic in h; work with the k x k Gram.
    const Eigen::MatrixXd G = W * W.transpose();
    const Eigen::MatrixXd XWt = X * W.transpose();

    OfflineEncoding out;
    out.H.resize(M, k);

    for (Eigen::Index i = 0; i < M; ++i) {
        const double xx = X.row(i).squaredNorm();
        Eigen::VectorXd h = Eigen::VectorXd::Zero(k);
        const Eigen::VectorXd xw = XWt.row(i).transpose();
        auto obj_of = [&](const Eigen::VectorXd& v) {
            return xx - 2.0 * v.dot(xw) + v.dot(G * v);
        };
        double obj = xx; // h = 0
        if (xx == 0.0) {
            out.H.row(i).setZero();
            continue;
        }

        double step = 1.0 / std::max(G.norm(), 1e-12);
        bool sample_converged = false;
        for (int it = 0; it < max_iter; ++it) {
            const Eigen::VectorXd grad = 2.0 * (G * h - xw);
            bool accepted = false;
            while (step > 1e-100) {
                Eigen::VectorXd trial = (h - step * grad).cwiseMax(0.0);
                if (s_h) trial = project_guarded(trial, *s_h);
                const double trial_obj = obj_of(trial);
                if (trial_obj <= obj) {
                    h = std::move(trial);
                    const double rel = (obj - trial_obj) / std::max(obj, 1e-300);
                    obj = trial_obj;
                    step *= 1.2;
                    accepted = true;
                    if (rel < tol) sample_converged = true;
                    break;
                }
                step /= 2.0;
            }
            if (!accepted) sample_converged = true; // step floor: local minimum
            if (sample_converged) break;
        }
        if (!sample_converged) out.converged = false;
        out.H.row(i) = h.transpose();
    }
    return out;
}

Eigen::MatrixXd encode_pseudoinverse(const Eigen::MatrixXd& X, const Eigen::MatrixXd& W) {
    if (X.cols() != W.cols())
        throw ArgumentError("encode_pseudoinverse: image length does not match dictionary");
    // Minimum-norm least squares: H^T = (W^T)^+ X^T.
    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(W.transpose());
    return cod.solve(X.transpose()).transpose();
}

Eigen::MatrixXd reconstruct(const Eigen::MatrixXd& H, const Eigen::MatrixXd& W) {
    if (H.cols() != W.rows()) throw ArgumentError("reconstruct: H columns != W rows");
    return H * W;
}

namespace {

void write_u32(std::ostream& out, uint32_t v) {
    uint8_t b[4] = {uint8_t(v), uint8_t(v >> 8), uint8_t(v >> 16), uint8_t(v >> 24)};
    out.write(reinterpret_cast<char*>(b), 4);
}

uint32_t read_u32(std::istream& in) {
    uint8_t b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    if (!in) throw FormatError("container truncated");
    return uint32_t(b[0]) | (uint32_t(b[1]) << 8) | (uint32_t(b[2]) << 16) | (uint32_t(b[3]) << 24);
}

void write_f64_row_major(std::ostream& out, const Eigen::MatrixXd& m) {
    // Serialized row-major regardless of in-memory layout.
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            double v = m(i, j);
            out.write(reinterpret_cast<const char*>(&v), sizeof(double));
        }
}

void read_f64_row_major(std::istream& in, Eigen::MatrixXd& m) {
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            double v;
            in.read(reinterpret_cast<char*>(&v), sizeof(double));
            if (!in) throw FormatError("container truncated");
            m(i, j) = v;
        }
}

} // namespace

void save_factorization(const Factorization& f, const std::string& path) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw IoError("cannot write " + tmp);
        out.write("MDIC", 4);
        write_u32(out, 1); // version
        write_u32(out, uint32_t(f.H.rows()));
        write_u32(out, uint32_t(f.W.cols()));
        write_u32(out, uint32_t(f.W.rows()));
        write_f64_row_major(out, f.H);
        write_f64_row_major(out, f.W);
        if (!out) throw IoError("short write: " + tmp);
    }
    std::filesystem::rename(tmp, path);
}

Factorization load_factorization(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::string(magic, 4) != "MDIC")
        throw FormatError(path + ": not a factorization container (bad magic)");
    const uint32_t version = read_u32(in);
    if (version != 1) throw FormatError(path + ": unsupported container version");
    const uint32_t M = read_u32(in), N = read_u32(in), k = read_u32(in);
    Factorization f;
    f.H.resize(M, k);
    f.W.resize(k, N);
    read_f64_row_major(in, f.H);
    read_f64_row_major(in, f.W);
    return f;
}

Dictionary dictionary_from_rows(const Eigen::MatrixXd& W, int height, int width) {
    if (W.cols() != Eigen::Index(height) * width)
        throw ArgumentError("dictionary_from_rows: row length != height*width");
    Dictionary d;
    d.height = height;
    d.width = width;
    d.atoms.reserve(W.rows());
    for (Eigen::Index i = 0; i < W.rows(); ++i) {
        GrayImage img(height, width);
        for (Eigen::Index j = 0; j < W.cols(); ++j) img.pixels[j] = W(i, j);
        d.atoms.push_back(std::move(img));
    }
    return d;
}

} // namespace morphdict

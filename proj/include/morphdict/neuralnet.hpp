#ifndef MORPHDICT_NEURALNET_HPP
#define MORPHDICT_NEURALNET_HPP

// Minimal differentiable-computation engine: exactly the layers, loss
// plumbing and optimizer the asymmetric auto-encoder needs, with
// hand-written reverse-mode gradients and a finite-difference checker.
// Everything is templated on the scalar type (float or double).

#include <Eigen/Core>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "morphdict/errors.hpp"
#include "morphdict/rng.hpp"

namespace morphdict {

template <typename S>
struct Tensor {
    std::vector<Eigen::Index> shape;
    std::vector<S> data; // row-major

    Tensor() = default;
    explicit Tensor(std::vector<Eigen::Index> shp) : shape(std::move(shp)) {
        data.assign(static_cast<size_t>(count(shape)), S(0));
    }

    static Eigen::Index count(const std::vector<Eigen::Index>& shp) {
        Eigen::Index n = 1;
        for (auto d : shp) n *= d;
        return n;
    }
    Eigen::Index size() const { return static_cast<Eigen::Index>(data.size()); }
    Eigen::Index rows() const { return shape.empty() ? 0 : shape[0]; }
    Eigen::Index cols() const { return shape.empty() ? 0 : size() / shape[0]; }

    using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    using MatMap = Eigen::Map<Mat>;
    using ConstMatMap = Eigen::Map<const Mat>;

    /// View as (shape[0]) x (rest) row-major matrix.
    MatMap mat() { return MatMap(data.data(), rows(), cols()); }
    ConstMatMap mat() const { return ConstMatMap(data.data(), rows(), cols()); }

    std::string shape_str() const {
        std::string s = "(";
        for (size_t i = 0; i < shape.size(); ++i)
            s += (i ? "," : "") + std::to_string(shape[i]);
        return s + ")";
    }
};

template <typename S>
struct Param {
    std::string name;
    Tensor<S>* value = nullptr;
    Tensor<S>* grad = nullptr;
};

// ---------------------------------------------------------------------------
// Layers

template <typename S>
class Layer {
public:
    virtual ~Layer() = default;
    virtual std::string kind() const = 0;
    virtual Tensor<S> forward(const Tensor<S>& in, bool training) = 0;
    virtual Tensor<S> backward(const Tensor<S>& dout) = 0;
    virtual std::vector<Param<S>> params() { return {}; }
    virtual std::vector<Param<S>> buffers() { return {}; } // saved, not optimized
    virtual void clear_cache() { cached_ = false; }

protected:
    void require_cache() const {
        if (!cached_) throw StateError(kind() + ": backward without a cached training forward");
    }
    bool cached_ = false;
};

/// 2D cross-correlation (no kernel flip), explicit stride and symmetric
/// zero padding. Input (B, C, H, W) -> output (B, OC, OH, OW).
template <typename S>
class Conv2d : public Layer<S> {
public:
    Conv2d(int in_ch, int out_ch, int kernel, int stride, int pad)
        : in_ch_(in_ch), out_ch_(out_ch), k_(kernel), stride_(stride), pad_(pad) {
        kernel_ = Tensor<S>({out_ch, Eigen::Index(in_ch) * kernel * kernel});
        bias_ = Tensor<S>({out_ch});
        kernel_grad_ = Tensor<S>(kernel_.shape);
        bias_grad_ = Tensor<S>(bias_.shape);
    }

    std::string kind() const override { return "conv2d"; }

    Tensor<S> forward(const Tensor<S>& in, bool training) override {
        if (in.shape.size() != 4 || in.shape[1] != in_ch_)
            throw ArgumentError("conv2d: expected (B," + std::to_string(in_ch_) +
                                ",H,W) input, got " + in.shape_str());
        const Eigen::Index B = in.shape[0], H = in.shape[2], W = in.shape[3];
        const Eigen::Index OH = (H + 2 * pad_ - k_) / stride_ + 1;
        const Eigen::Index OW = (W + 2 * pad_ - k_) / stride_ + 1;
        if (OH < 1 || OW < 1)
            throw ArgumentError("conv2d: input " + in.shape_str() + " too small for kernel");

        im2col(in, B, H, W, OH, OW);

        // (B*OH*OW, CKK) x (CKK, OC)
        typename Tensor<S>::ConstMatMap colmap(cols_.data(), B * OH * OW,
                                               Eigen::Index(in_ch_) * k_ * k_);
        typename Tensor<S>::Mat y = colmap * kernel_.mat().transpose();
        for (Eigen::Index oc = 0; oc < out_ch_; ++oc) y.col(oc).array() += bias_.data[oc];

        Tensor<S> out({B, out_ch_, OH, OW});
        // y rows run (b, oy, ox); transpose each sample block to channel-major.
        for (Eigen::Index b = 0; b < B; ++b) {
            typename Tensor<S>::MatMap dst(out.data.data() + b * out_ch_ * OH * OW, out_ch_,
                                           OH * OW);
            dst = y.middleRows(b * OH * OW, OH * OW).transpose();
        }

        if (training) {
            in_shape_ = in.shape;
            oh_ = OH;
            ow_ = OW;
            this->cached_ = true;
        }
        return out;
    }

    Tensor<S> backward(const Tensor<S>& dout) override {
        this->require_cache();
        const Eigen::Index B = in_shape_[0], H = in_shape_[2], W = in_shape_[3];
        const Eigen::Index OH = oh_, OW = ow_;
        const Eigen::Index CKK = Eigen::Index(in_ch_) * k_ * k_;

        typename Tensor<S>::Mat dy(B * OH * OW, out_ch_);
        for (Eigen::Index b = 0; b < B; ++b) {
            typename Tensor<S>::ConstMatMap src(dout.data.data() + b * out_ch_ * OH * OW,
                                                out_ch_, OH * OW);
            dy.middleRows(b * OH * OW, OH * OW) = src.transpose();
        }

        typename Tensor<S>::ConstMatMap colmap(cols_.data(), B * OH * OW, CKK);
        kernel_grad_.mat() += dy.transpose() * colmap;
        for (Eigen::Index oc = 0; oc < out_ch_; ++oc) bias_grad_.data[oc] += dy.col(oc).sum();

        typename Tensor<S>::Mat dcols = dy * kernel_.mat();
        Tensor<S> din(in_shape_);
        col2im(dcols, din, B, H, W, OH, OW);
        this->cached_ = false;
        return din;
    }

    std::vector<Param<S>> params() override {
        return {{"kernel", &kernel_, &kernel_grad_}, {"bias", &bias_, &bias_grad_}};
    }

    Tensor<S>& kernel() { return kernel_; }
    Tensor<S>& bias() { return bias_; }
    int in_channels() const { return int(in_ch_); }
    int out_channels() const { return int(out_ch_); }
    int kernel_size() const { return k_; }
    int stride() const { return stride_; }
    int padding() const { return pad_; }

private:
    void im2col(const Tensor<S>& in, Eigen::Index B, Eigen::Index H, Eigen::Index W,
                Eigen::Index OH, Eigen::Index OW) {
        const Eigen::Index CKK = Eigen::Index(in_ch_) * k_ * k_;
        cols_.assign(size_t(B * OH * OW * CKK), S(0));
        for (Eigen::Index b = 0; b < B; ++b) {
            const S* src = in.data.data() + b * in_ch_ * H * W;
            for (Eigen::Index oy = 0; oy < OH; ++oy) {
                for (Eigen::Index ox = 0; ox < OW; ++ox) {
                    S* dst = cols_.data() + ((b * OH + oy) * OW + ox) * CKK;
                    for (Eigen::Index c = 0; c < in_ch_; ++c) {
                        for (int ky = 0; ky < k_; ++ky) {
                            const Eigen::Index iy = oy * stride_ - pad_ + ky;
                            if (iy < 0 || iy >= H) continue;
                            for (int kx = 0; kx < k_; ++kx) {
                                const Eigen::Index ix = ox * stride_ - pad_ + kx;
                                if (ix < 0 || ix >= W) continue;
                                dst[(c * k_ + ky) * k_ + kx] = src[(c * H + iy) * W + ix];
                            }
                        }
                    }
                }
            }
        }
    }

    void col2im(const typename Tensor<S>::Mat& dcols, Tensor<S>& din, Eigen::Index B,
                Eigen::Index H, Eigen::Index W, Eigen::Index OH, Eigen::Index OW) {
        const Eigen::Index CKK = Eigen::Index(in_ch_) * k_ * k_;
        for (Eigen::Index b = 0; b < B; ++b) {
            S* dst = din.data.data() + b * in_ch_ * H * W;
            for (Eigen::Index oy = 0; oy < OH; ++oy) {
                for (Eigen::Index ox = 0; ox < OW; ++ox) {
                    const S* src = dcols.data() + ((b * OH + oy) * OW + ox) * CKK;
                    for (Eigen::Index c = 0; c < in_ch_; ++c) {
                        for (int ky = 0; ky < k_; ++ky) {
                            const Eigen::Index iy = oy * stride_ - pad_ + ky;
                            if (iy < 0 || iy >= H) continue;
                            for (int kx = 0; kx < k_; ++kx) {
                                const Eigen::Index ix = ox * stride_ - pad_ + kx;
                                if (ix < 0 || ix >= W) continue;
                                dst[(c * H + iy) * W + ix] += src[(c * k_ + ky) * k_ + kx];
                            }
                        }
                    }
                }
            }
        }
    }

    Eigen::Index in_ch_, out_ch_;
    int k_, stride_, pad_;
    Tensor<S> kernel_, bias_, kernel_grad_, bias_grad_;
    std::vector<S> cols_;
    std::vector<Eigen::Index> in_shape_;
    Eigen::Index oh_ = 0, ow_ = 0;
};

/// Fully connected y = xW + b. Input (B, in) -> (B, out).
template <typename S>
class Dense : public Layer<S> {
public:
    Dense(Eigen::Index in_dim, Eigen::Index out_dim) : in_dim_(in_dim), out_dim_(out_dim) {
        weight_ = Tensor<S>({in_dim, out_dim});
        bias_ = Tensor<S>({out_dim});
        weight_grad_ = Tensor<S>(weight_.shape);
        bias_grad_ = Tensor<S>(bias_.shape);
    }

    std::string kind() const override { return "dense"; }

    Tensor<S> forward(const Tensor<S>& in, bool training) override {
        if (in.shape.size() != 2 || in.shape[1] != in_dim_)
            throw ArgumentError("dense: expected (B," + std::to_string(in_dim_) +
                                ") input, got " + in.shape_str());
        Tensor<S> out({in.shape[0], out_dim_});
        out.mat().noalias() = in.mat() * weight_.mat();
        out.mat().rowwise() +=
            Eigen::Map<const Eigen::Matrix<S, 1, Eigen::Dynamic>>(bias_.data.data(), out_dim_);
        if (training) {
            input_ = in;
            this->cached_ = true;
        }
        return out;
    }

    Tensor<S> backward(const Tensor<S>& dout) override {
        this->require_cache();
        weight_grad_.mat().noalias() += input_.mat().transpose() * dout.mat();
        Eigen::Map<Eigen::Matrix<S, 1, Eigen::Dynamic>>(bias_grad_.data.data(), out_dim_) +=
            dout.mat().colwise().sum();
        Tensor<S> din(input_.shape);
        din.mat().noalias() = dout.mat() * weight_.mat().transpose();
        this->cached_ = false;
        return din;
    }

    std::vector<Param<S>> params() override {
        return {{"weight", &weight_, &weight_grad_}, {"bias", &bias_, &bias_grad_}};
    }

    Tensor<S>& weight() { return weight_; }
    Tensor<S>& bias() { return bias_; }
    Eigen::Index in_dim() const { return in_dim_; }
    Eigen::Index out_dim() const { return out_dim_; }

private:
    Eigen::Index in_dim_, out_dim_;
    Tensor<S> weight_, bias_, weight_grad_, bias_grad_;
    Tensor<S> input_;
};

/// Batch normalization. On (B,C,H,W) input the statistics pool over
/// B,H,W per channel; on (B,D) input they pool over B per feature.
/// Training mode uses batch statistics (biased variance), inference mode
/// the running averages.
template <typename S>
class BatchNorm : public Layer<S> {
public:
    explicit BatchNorm(Eigen::Index channels, double eps = 1e-5, double momentum = 0.9)
        : channels_(channels), eps_(S(eps)), momentum_(S(momentum)) {
        gamma_ = Tensor<S>({channels});
        beta_ = Tensor<S>({channels});
        running_mean_ = Tensor<S>({channels});
        running_var_ = Tensor<S>({channels});
        gamma_grad_ = Tensor<S>({channels});
        beta_grad_ = Tensor<S>({channels});
        std::fill(gamma_.data.begin(), gamma_.data.end(), S(1));
        std::fill(running_var_.data.begin(), running_var_.data.end(), S(1));
    }

    std::string kind() const override { return "batchnorm"; }

    Tensor<S> forward(const Tensor<S>& in, bool training) override {
        const Eigen::Index C = check_shape(in);
        const Eigen::Index m = in.size() / C; // pooled sample count per channel
        Tensor<S> out(in.shape);

        if (training) {
            mean_.assign(C, S(0));
            var_.assign(C, S(0));
            for_each_channel(in, [&](Eigen::Index c, const S* x, Eigen::Index n, Eigen::Index) {
                for (Eigen::Index i = 0; i < n; ++i) mean_[c] += x[i];
            });
            for (Eigen::Index c = 0; c < C; ++c) mean_[c] /= S(m);
            for_each_channel(in, [&](Eigen::Index c, const S* x, Eigen::Index n, Eigen::Index) {
                for (Eigen::Index i = 0; i < n; ++i) {
                    const S d = x[i] - mean_[c];
                    var_[c] += d * d;
                }
            });
            for (Eigen::Index c = 0; c < C; ++c) var_[c] /= S(m);

            inv_std_.resize(C);
            for (Eigen::Index c = 0; c < C; ++c)
                inv_std_[c] = S(1) / std::sqrt(var_[c] + eps_);

            xhat_ = Tensor<S>(in.shape);
            apply_norm(in, out, mean_.data(), inv_std_.data(), &xhat_);

            for (Eigen::Index c = 0; c < C; ++c) {
                running_mean_.data[c] = momentum_ * running_mean_.data[c] + (S(1) - momentum_) * mean_[c];
                running_var_.data[c] = momentum_ * running_var_.data[c] + (S(1) - momentum_) * var_[c];
            }
            in_shape_ = in.shape;
            this->cached_ = true;
        } else {
            std::vector<S> inv(C);
            for (Eigen::Index c = 0; c < C; ++c)
                inv[c] = S(1) / std::sqrt(running_var_.data[c] + eps_);
            apply_norm(in, out, running_mean_.data.data(), inv.data(), nullptr);
        }
        return out;
    }

    Tensor<S> backward(const Tensor<S>& dout) override {
        this->require_cache();
        const Eigen::Index C = channels_;
        const Eigen::Index m = dout.size() / C;

        std::vector<S> sum_dy(C, S(0)), sum_dy_xhat(C, S(0));
        for_each_channel_pair(dout, xhat_,
                              [&](Eigen::Index c, const S* dy, const S* xh, Eigen::Index n) {
                                  for (Eigen::Index i = 0; i < n; ++i) {
                                      sum_dy[c] += dy[i];
                                      sum_dy_xhat[c] += dy[i] * xh[i];
                                  }
                              });
        for (Eigen::Index c = 0; c < C; ++c) {
            gamma_grad_.data[c] += sum_dy_xhat[c];
            beta_grad_.data[c] += sum_dy[c];
        }

        Tensor<S> din(in_shape_);
        for_each_channel_triple(
            dout, xhat_, din, [&](Eigen::Index c, const S* dy, const S* xh, S* dx, Eigen::Index n) {
                const S g = gamma_.data[c], is = inv_std_[c];
                const S k1 = sum_dy[c] / S(m), k2 = sum_dy_xhat[c] / S(m);
                for (Eigen::Index i = 0; i < n; ++i)
                    dx[i] = g * is * (dy[i] - k1 - xh[i] * k2);
            });
        this->cached_ = false;
        return din;
    }

    std::vector<Param<S>> params() override {
        return {{"gamma", &gamma_, &gamma_grad_}, {"beta", &beta_, &beta_grad_}};
    }
    std::vector<Param<S>> buffers() override {
        return {{"running_mean", &running_mean_, nullptr}, {"running_var", &running_var_, nullptr}};
    }

    Eigen::Index channels() const { return channels_; }
    double eps() const { return double(eps_); }
    double momentum() const { return double(momentum_); }

private:
    Eigen::Index check_shape(const Tensor<S>& in) const {
        const bool ok = (in.shape.size() == 4 && in.shape[1] == channels_) ||
                        (in.shape.size() == 2 && in.shape[1] == channels_);
        if (!ok)
            throw ArgumentError("batchnorm: expected (B," + std::to_string(channels_) +
                                ",...) input, got " + in.shape_str());
        return channels_;
    }

    // Iterate contiguous per-channel runs: (b,c)->HW block for 4D, single
    // strided column for 2D (handled as length-1 runs).
    template <typename F>
    void for_each_channel(const Tensor<S>& t, F f) const {
        if (t.shape.size() == 4) {
            const Eigen::Index B = t.shape[0], C = t.shape[1], HW = t.shape[2] * t.shape[3];
            for (Eigen::Index b = 0; b < B; ++b)
                for (Eigen::Index c = 0; c < C; ++c)
                    f(c, t.data.data() + (b * C + c) * HW, HW, b);
        } else {
            const Eigen::Index B = t.shape[0], C = t.shape[1];
            for (Eigen::Index b = 0; b < B; ++b)
                for (Eigen::Index c = 0; c < C; ++c) f(c, t.data.data() + b * C + c, 1, b);
        }
    }
    template <typename F>
    void for_each_channel_pair(const Tensor<S>& a, const Tensor<S>& b, F f) const {
        if (a.shape.size() == 4) {
            const Eigen::Index B = a.shape[0], C = a.shape[1], HW = a.shape[2] * a.shape[3];
            for (Eigen::Index i = 0; i < B; ++i)
                for (Eigen::Index c = 0; c < C; ++c)
                    f(c, a.data.data() + (i * C + c) * HW, b.data.data() + (i * C + c) * HW, HW);
        } else {
            const Eigen::Index B = a.shape[0], C = a.shape[1];
            for (Eigen::Index i = 0; i < B; ++i)
                for (Eigen::Index c = 0; c < C; ++c)
                    f(c, a.data.data() + i * C + c, b.data.data() + i * C + c, 1);
        }
    }
    template <typename F>
    void for_each_channel_triple(const Tensor<S>& a, const Tensor<S>& b, Tensor<S>& out, F f) const {
        if (a.shape.size() == 4) {
            const Eigen::Index B = a.shape[0], C = a.shape[1], HW = a.shape[2] * a.shape[3];
            for (Eigen::Index i = 0; i < B; ++i)
                for (Eigen::Index c = 0; c < C; ++c)
                    f(c, a.data.data() + (i * C + c) * HW, b.data.data() + (i * C + c) * HW,
                      out.data.data() + (i * C + c) * HW, HW);
        } else {
            const Eigen::Index B = a.shape[0], C = a.shape[1];
            for (Eigen::Index i = 0; i < B; ++i)
                for (Eigen::Index c = 0; c < C; ++c)
                    f(c, a.data.data() + i * C + c, b.data.data() + i * C + c,
                      out.data.data() + i * C + c, 1);
        }
    }

    void apply_norm(const Tensor<S>& in, Tensor<S>& out, const S* mean, const S* inv_std,
                    Tensor<S>* xhat) {
        if (in.shape.size() == 4) {
            const Eigen::Index B = in.shape[0], C = in.shape[1], HW = in.shape[2] * in.shape[3];
            for (Eigen::Index b = 0; b < B; ++b)
                for (Eigen::Index c = 0; c < C; ++c) {
                    const S* x = in.data.data() + (b * C + c) * HW;
                    S* y = out.data.data() + (b * C + c) * HW;
                    S* xh = xhat ? xhat->data.data() + (b * C + c) * HW : nullptr;
                    const S mu = mean[c], is = inv_std[c], g = gamma_.data[c], bt = beta_.data[c];
                    for (Eigen::Index i = 0; i < HW; ++i) {
                        const S h = (x[i] - mu) * is;
                        if (xh) xh[i] = h;
                        y[i] = g * h + bt;
                    }
                }
        } else {
            const Eigen::Index B = in.shape[0], C = in.shape[1];
            for (Eigen::Index b = 0; b < B; ++b)
                for (Eigen::Index c = 0; c < C; ++c) {
                    const S h = (in.data[b * C + c] - mean[c]) * inv_std[c];
                    if (xhat) xhat->data[b * C + c] = h;
                    out.data[b * C + c] = gamma_.data[c] * h + beta_.data[c];
                }
        }
    }

    Eigen::Index channels_;
    S eps_, momentum_;
    Tensor<S> gamma_, beta_, running_mean_, running_var_, gamma_grad_, beta_grad_;
    std::vector<S> mean_, var_, inv_std_;
    Tensor<S> xhat_;
    std::vector<Eigen::Index> in_shape_;
};

/// y = x for x > 0, alpha * x otherwise. Slope 1 is the identity,
/// slope 0 is ReLU.
template <typename S>
class LeakyRelu : public Layer<S> {
public:
    explicit LeakyRelu(double alpha) : alpha_(S(alpha)) {}

    std::string kind() const override { return "leaky_relu"; }

    Tensor<S> forward(const Tensor<S>& in, bool training) override {
        Tensor<S> out(in.shape);
        for (Eigen::Index i = 0; i < in.size(); ++i)
            out.data[i] = in.data[i] > S(0) ? in.data[i] : alpha_ * in.data[i];
        if (training) {
            input_ = in;
            this->cached_ = true;
        }
        return out;
    }

    Tensor<S> backward(const Tensor<S>& dout) override {
        this->require_cache();
        Tensor<S> din(input_.shape);
        for (Eigen::Index i = 0; i < din.size(); ++i)
            din.data[i] = dout.data[i] * (input_.data[i] > S(0) ? S(1) : alpha_);
        this->cached_ = false;
        return din;
    }

    double alpha() const { return double(alpha_); }

private:
    S alpha_;
    Tensor<S> input_;
};

template <typename S>
class Sigmoid : public Layer<S> {
public:
    std::string kind() const override { return "sigmoid"; }

    Tensor<S> forward(const Tensor<S>& in, bool training) override {
        Tensor<S> out(in.shape);
        for (Eigen::Index i = 0; i < in.size(); ++i)
            out.data[i] = S(1) / (S(1) + std::exp(-in.data[i]));
        if (training) {
            output_ = out;
            this->cached_ = true;
        }
        return out;
    }

    Tensor<S> backward(const Tensor<S>& dout) override {
        this->require_cache();
        Tensor<S> din(output_.shape);
        for (Eigen::Index i = 0; i < din.size(); ++i) {
            const S y = output_.data[i];
            din.data[i] = dout.data[i] * y * (S(1) - y);
        }
        this->cached_ = false;
        return din;
    }

private:
    Tensor<S> output_;
};

/// (B, ...) -> (B, prod of rest).
template <typename S>
class Flatten : public Layer<S> {
public:
    std::string kind() const override { return "flatten"; }

    Tensor<S> forward(const Tensor<S>& in, bool training) override {
        if (in.shape.empty()) throw ArgumentError("flatten: rank-0 input");
        Tensor<S> out = in;
        out.shape = {in.shape[0], in.cols()};
        if (training) {
            in_shape_ = in.shape;
            this->cached_ = true;
        }
        return out;
    }

    Tensor<S> backward(const Tensor<S>& dout) override {
        this->require_cache();
        Tensor<S> din = dout;
        din.shape = in_shape_;
        this->cached_ = false;
        return din;
    }

private:
    std::vector<Eigen::Index> in_shape_;
};

// ---------------------------------------------------------------------------
// Network

enum class Mode { training, inference };

template <typename S>
class NeuralNet {
public:
    NeuralNet() = default;
    NeuralNet(NeuralNet&&) noexcept = default;
    NeuralNet& operator=(NeuralNet&&) noexcept = default;

    template <typename L, typename... Args>
    L& add(Args&&... args) {
        auto layer = std::make_unique<L>(std::forward<Args>(args)...);
        L& ref = *layer;
        layers_.push_back(std::move(layer));
        return ref;
    }
    void add_layer(std::unique_ptr<Layer<S>> layer) { layers_.push_back(std::move(layer)); }

    /// Hand over ownership of all layers (leaves the net empty).
    std::vector<std::unique_ptr<Layer<S>>> release_layers() {
        has_cache_ = false;
        return std::move(layers_);
    }

    size_t size() const { return layers_.size(); }
    Layer<S>& layer(size_t i) { return *layers_[i]; }
    const Layer<S>& layer(size_t i) const { return *layers_[i]; }

    void set_mode(Mode m) { mode_ = m; }
    Mode mode() const { return mode_; }

    Tensor<S> forward(Tensor<S> x) {
        const bool training = mode_ == Mode::training;
        for (size_t i = 0; i < layers_.size(); ++i) {
            try {
                x = layers_[i]->forward(x, training);
            } catch (const ArgumentError& e) {
                throw ArgumentError("layer " + std::to_string(i) + ": " + e.what());
            }
        }
        if (training) has_cache_ = true;
        return x;
    }

    Tensor<S> backward(Tensor<S> dout) {
        if (!has_cache_) throw StateError("backward: no cached training-mode forward");
        for (size_t i = layers_.size(); i-- > 0;) dout = layers_[i]->backward(dout);
        has_cache_ = false;
        return dout;
    }

    std::vector<Param<S>> params() {
        std::vector<Param<S>> out;
        for (size_t i = 0; i < layers_.size(); ++i)
            for (auto& p : layers_[i]->params()) {
                p.name = "layer" + std::to_string(i) + "." + p.name;
                out.push_back(p);
            }
        return out;
    }

    void zero_grads() {
        for (auto& p : params())
            if (p.grad) std::fill(p.grad->data.begin(), p.grad->data.end(), S(0));
    }

private:
    std::vector<std::unique_ptr<Layer<S>>> layers_;
    Mode mode_ = Mode::inference;
    bool has_cache_ = false;
};

// ---------------------------------------------------------------------------
// Adam

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

template <typename S>
class AdamState {
public:
    explicit AdamState(AdamConfig cfg = {}) : cfg_(cfg) {}

    const AdamConfig& config() const { return cfg_; }
    int64_t step_count() const { return t_; }

    /// Bias-corrected moment update of every parameter in place.
    void step(const std::vector<Param<S>>& params) {
        if (m_.empty()) {
            for (const auto& p : params) {
                m_.emplace_back(p.value->data.size(), S(0));
                v_.emplace_back(p.value->data.size(), S(0));
            }
        }
        if (m_.size() != params.size())
            throw ArgumentError("adam_step: parameter list changed size");
        ++t_;
        const S lr = S(cfg_.lr), b1 = S(cfg_.beta1), b2 = S(cfg_.beta2), eps = S(cfg_.eps);
        const S c1 = S(1) / (S(1) - S(std::pow(cfg_.beta1, double(t_))));
        const S c2 = S(1) / (S(1) - S(std::pow(cfg_.beta2, double(t_))));
        for (size_t pi = 0; pi < params.size(); ++pi) {
            auto& val = params[pi].value->data;
            const auto& grad = params[pi].grad->data;
            if (m_[pi].size() != val.size())
                throw ArgumentError("adam_step: parameter shape changed");
            auto& m = m_[pi];
            auto& v = v_[pi];
            for (size_t i = 0; i < val.size(); ++i) {
                const S g = grad[i];
                m[i] = b1 * m[i] + (S(1) - b1) * g;
                v[i] = b2 * v[i] + (S(1) - b2) * g * g;
                val[i] -= lr * (m[i] * c1) / (std::sqrt(v[i] * c2) + eps);
            }
        }
    }

private:
    AdamConfig cfg_;
    int64_t t_ = 0;
    std::vector<std::vector<S>> m_, v_;
};

// ---------------------------------------------------------------------------
// Finite-difference checking

/// Compare analytic gradients (already accumulated in params[i].grad)
/// against central differences of eval_loss, which must re-run the full
/// forward pipeline under the current parameter values. Returns the
/// worst relative error, with a noise floor on the denominator so that
/// near-zero gradients are not judged at pure round-off scale.
/// inject_fault corrupts the largest analytic gradient entry by +10%
/// (checker-sensitivity testing).
template <typename S>
double finite_difference_check(const std::vector<Param<S>>& params,
                               const std::function<double()>& eval_loss, double eps,
                               bool inject_fault = false) {
    std::vector<std::vector<double>> analytic;
    double gmax = 0.0;
    for (const auto& p : params) {
        std::vector<double> g(p.grad->data.begin(), p.grad->data.end());
        for (double v : g) gmax = std::max(gmax, std::abs(v));
        analytic.push_back(std::move(g));
    }
    if (inject_fault) {
        size_t bp = 0, bi = 0;
        double best = -1.0;
        for (size_t pi = 0; pi < analytic.size(); ++pi)
            for (size_t i = 0; i < analytic[pi].size(); ++i)
                if (std::abs(analytic[pi][i]) > best) {
                    best = std::abs(analytic[pi][i]);
                    bp = pi;
                    bi = i;
                }
        analytic[bp][bi] *= 1.1;
    }

    const double floor =
        (sizeof(S) == 4 ? 5e-2 : 1e-4) * (1.0 + gmax); // FD noise floor per precision
    double worst = 0.0;
    for (size_t pi = 0; pi < params.size(); ++pi) {
        auto& val = params[pi].value->data;
        for (size_t i = 0; i < val.size(); ++i) {
            const S saved = val[i];
            val[i] = saved + S(eps);
            const double lp = eval_loss();
            val[i] = saved - S(eps);
            const double lm = eval_loss();
            val[i] = saved;
            const double fd = (lp - lm) / (2.0 * eps);
            const double a = analytic[pi][i];
            const double rel = std::abs(a - fd) / std::max({std::abs(a), std::abs(fd), floor});
            worst = std::max(worst, rel);
        }
    }
    return worst;
}

/// Scalar readout for standalone network checks: a fixed seeded weighted
/// sum of the outputs (catches permutation and sign errors that a plain
/// sum would miss).
template <typename S>
Tensor<S> weighted_sum_coeffs(const std::vector<Eigen::Index>& out_shape, uint64_t seed = 17) {
    Tensor<S> w(out_shape);
    std::mt19937_64 gen(seed);
    for (auto& v : w.data) v = S(uniform_sym(gen));
    return w;
}

/// Gradient check of a bare network under the weighted-sum readout:
/// runs a training-mode forward/backward for the analytic gradients,
/// then central differences with the given eps.
template <typename S>
double grad_check(NeuralNet<S>& net, const Tensor<S>& input, double eps,
                  bool inject_fault = false) {
    net.set_mode(Mode::training);
    Tensor<S> out = net.forward(input);
    const Tensor<S> w = weighted_sum_coeffs<S>(out.shape);

    net.zero_grads();
    Tensor<S> dout = w;
    net.backward(dout);

    auto eval = [&]() {
        Tensor<S> o = net.forward(input);
        double acc = 0.0;
        for (Eigen::Index i = 0; i < o.size(); ++i)
            acc += double(o.data[i]) * double(w.data[i]);
        return acc;
    };
    return finite_difference_check<S>(net.params(), eval, eps, inject_fault);
}

// ---------------------------------------------------------------------------
// Checkpoint container ("MNET"): little-endian u32 header
// (version, in_ch, in_h, in_w, layer count), a manifest entry per layer,
// then every parameter and buffer as little-endian f64 in declaration
// order. Layer kinds: 0 conv2d, 1 dense, 2 batchnorm, 3 leaky_relu,
// 4 sigmoid, 5 flatten.

namespace net_io {

void write_u32(std::ostream& out, uint32_t v);
uint32_t read_u32(std::istream& in);
void write_f64(std::ostream& out, double v);
double read_f64(std::istream& in);

} // namespace net_io

template <typename S>
void save_net_layers(const std::vector<Layer<S>*>& layers,
                     const std::array<Eigen::Index, 3>& input_chw, const std::string& path);

template <typename S>
void save_net(NeuralNet<S>& net, const std::array<Eigen::Index, 3>& input_chw,
              const std::string& path);

template <typename S>
NeuralNet<S> load_net(const std::string& path, std::array<Eigen::Index, 3>* input_chw = nullptr);

} // namespace morphdict

#include "morphdict/neuralnet_io.hpp"

#endif // MORPHDICT_NEURALNET_HPP

#ifndef MORPHDICT_ASYMAE_HPP
#define MORPHDICT_ASYMAE_HPP

// Asymmetric auto-encoder: deep convolutional encoder, shallow linear
// decoder with non-negative weights, trained against a mean-per-pixel
// MSE plus a KL activation-sparsity penalty. The decoder weights are
// clamped onto the positive orthant after every optimizer step, so
// their non-negativity is exact rather than approximate.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

#include "morphdict/dataset.hpp"
#include "morphdict/image.hpp"
#include "morphdict/morphology.hpp"
#include "morphdict/neuralnet.hpp"

namespace morphdict {

struct AsymAeConfig {
    int k = 100;          // latent size
    double p = 0.05;      // sparsity objective of the KL penalty
    double beta = 0.001;  // penalty weight (0.0005 for Fashion-MNIST)
    double alpha_lrelu = 0.1;
    int epochs = 50;
    Eigen::Index batch_size = 100;
    double lr = 1e-3;
    uint64_t seed = 0;
    // Encoder widths; the defaults are the 28x28 architecture, the tiny
    // gradient-check variant shrinks them.
    int conv1_channels = 64;
    int conv2_channels = 128;
    int dense_units = 1024;
    // Early stop: no relative train-loss improvement of at least
    // `early_stop_rel` over `early_stop_patience` epochs. Patience 0
    // disables and runs every epoch.
    int early_stop_patience = 5;
    double early_stop_rel = 0.001;

    void validate() const {
        if (k < 1) throw ArgumentError("asymae: k must be >= 1");
        if (!(p > 0.0 && p < 1.0)) throw ArgumentError("asymae: p must lie in (0,1)");
        if (beta < 0.0) throw ArgumentError("asymae: beta must be >= 0");
        if (epochs < 1) throw ArgumentError("asymae: epochs must be >= 1");
        if (batch_size < 1) throw ArgumentError("asymae: batch_size must be >= 1");
    }

    /// Small variant for finite-difference checks (O(P) forwards).
    static AsymAeConfig tiny() {
        AsymAeConfig cfg;
        cfg.k = 4;
        cfg.conv1_channels = 8;
        cfg.conv2_channels = 16;
        cfg.dense_units = 32;
        cfg.batch_size = 2;
        return cfg;
    }
};

template <typename S>
struct AsymAeModel {
    NeuralNet<S> encoder; // ends in sigmoid over k units
    NeuralNet<S> decoder; // dense k->N (non-negative weights) + leaky_relu
    int input_h = 0;
    int input_w = 0;
    int k = 0;
    double alpha_lrelu = 0.1;
    Dense<S>* decoder_dense = nullptr; // owned by `decoder`

    Eigen::Index pixel_count() const { return Eigen::Index(input_h) * input_w; }

    double min_decoder_weight() const {
        const auto& w = decoder_dense->weight().data;
        return double(*std::min_element(w.begin(), w.end()));
    }

    void project_decoder_weights() {
        for (S& v : decoder_dense->weight().data) v = std::max(v, S(0));
    }
};

namespace asymae_detail {

template <typename S>
void glorot_init(Tensor<S>& t, Eigen::Index fan_in, Eigen::Index fan_out, std::mt19937_64& gen) {
    const double limit = std::sqrt(6.0 / double(fan_in + fan_out));
    for (S& v : t.data) v = S(uniform_sym(gen) * limit);
}

} // namespace asymae_detail

/// Encoder: [conv 4x4/2 + lrelu] -> [conv 4x4/2 + batchnorm + lrelu] ->
/// flatten -> [dense + batchnorm + lrelu] -> [dense k + sigmoid].
/// Decoder: dense N with non-negative weights + lrelu. All parameters
/// seeded from cfg.seed; decoder weights start as |uniform| * 0.05.
template <typename S>
AsymAeModel<S> build_model(const AsymAeConfig& cfg, int height, int width) {
    cfg.validate();
    if (height < 8 || width < 8 || height % 4 != 0 || width % 4 != 0)
        throw ArgumentError("asymae: image dims must be multiples of 4 and at least 8x8 "
                            "for the two stride-2 convolutions");

    AsymAeModel<S> model;
    model.input_h = height;
    model.input_w = width;
    model.k = cfg.k;
    model.alpha_lrelu = cfg.alpha_lrelu;

    const int c1 = cfg.conv1_channels, c2 = cfg.conv2_channels;
    const Eigen::Index flat = Eigen::Index(height / 4) * (width / 4) * c2;
    const Eigen::Index n_pixels = Eigen::Index(height) * width;

    auto& conv1 = model.encoder.template add<Conv2d<S>>(1, c1, 4, 2, 1);
    model.encoder.template add<LeakyRelu<S>>(cfg.alpha_lrelu);
    auto& conv2 = model.encoder.template add<Conv2d<S>>(c1, c2, 4, 2, 1);
    model.encoder.template add<BatchNorm<S>>(c2);
    model.encoder.template add<LeakyRelu<S>>(cfg.alpha_lrelu);
    model.encoder.template add<Flatten<S>>();
    auto& dense1 = model.encoder.template add<Dense<S>>(flat, cfg.dense_units);
    model.encoder.template add<BatchNorm<S>>(cfg.dense_units);
    model.encoder.template add<LeakyRelu<S>>(cfg.alpha_lrelu);
    auto& dense2 = model.encoder.template add<Dense<S>>(cfg.dense_units, cfg.k);
    model.encoder.template add<Sigmoid<S>>();

    auto& dec = model.decoder.template add<Dense<S>>(cfg.k, n_pixels);
    model.decoder.template add<LeakyRelu<S>>(cfg.alpha_lrelu);
    model.decoder_dense = &dec;

    std::mt19937_64 gen(cfg.seed);
    asymae_detail::glorot_init(conv1.kernel(), 16, Eigen::Index(c1) * 16, gen);
    asymae_detail::glorot_init(conv2.kernel(), Eigen::Index(c1) * 16, Eigen::Index(c2) * 16, gen);
    asymae_detail::glorot_init(dense1.weight(), flat, cfg.dense_units, gen);
    asymae_detail::glorot_init(dense2.weight(), cfg.dense_units, cfg.k, gen);
    for (S& v : dec.weight().data) v = S(std::abs(uniform_sym(gen)) * 0.05);
    model.project_decoder_weights();

    model.encoder.set_mode(Mode::inference);
    model.decoder.set_mode(Mode::inference);
    return model;
}

// ---------------------------------------------------------------------------
// Loss

/// KL(p || t_j) summed over latent units, with t_j the mean activation of
/// unit j across the batch, clamped to [1e-6, 1-1e-6].
template <typename S>
double sparsity_penalty(const Tensor<S>& codes, double p) {
    const Eigen::Index B = codes.rows(), k = codes.cols();
    double pen = 0.0;
    for (Eigen::Index j = 0; j < k; ++j) {
        double t = 0.0;
        for (Eigen::Index i = 0; i < B; ++i) t += double(codes.data[i * k + j]);
        t = std::clamp(t / double(B), 1e-6, 1.0 - 1e-6);
        pen += p * std::log(p / t) + (1.0 - p) * std::log((1.0 - p) / (1.0 - t));
    }
    return pen;
}

/// d(sparsity_penalty)/d(codes); zero wherever the clamp is active.
template <typename S>
Tensor<S> sparsity_penalty_grad(const Tensor<S>& codes, double p) {
    const Eigen::Index B = codes.rows(), k = codes.cols();
    Tensor<S> grad(codes.shape);
    for (Eigen::Index j = 0; j < k; ++j) {
        double t = 0.0;
        for (Eigen::Index i = 0; i < B; ++i) t += double(codes.data[i * k + j]);
        t /= double(B);
        if (t <= 1e-6 || t >= 1.0 - 1e-6) continue;
        const double d = (-p / t + (1.0 - p) / (1.0 - t)) / double(B);
        for (Eigen::Index i = 0; i < B; ++i) grad.data[i * k + j] = S(d);
    }
    return grad;
}

struct LossParts {
    double total = 0.0;
    double mse = 0.0;
    double penalty = 0.0;
};

/// Mean-per-pixel MSE between reconstruction and target plus
/// beta * sparsity_penalty(codes).
template <typename S>
LossParts compute_loss(const Tensor<S>& reconstruction, const Tensor<S>& target,
                       const Tensor<S>& codes, double p, double beta) {
    if (reconstruction.shape != target.shape)
        throw ArgumentError("loss: reconstruction/target shape mismatch");
    LossParts parts;
    double sq = 0.0;
    for (Eigen::Index i = 0; i < target.size(); ++i) {
        const double d = double(reconstruction.data[i]) - double(target.data[i]);
        sq += d * d;
    }
    parts.mse = sq / double(target.size());
    parts.penalty = sparsity_penalty(codes, p);
    parts.total = parts.mse + beta * parts.penalty;
    return parts;
}

// ---------------------------------------------------------------------------
// Training

struct EpochStats {
    double total = 0.0;
    double mse = 0.0;
    double penalty = 0.0;
};

struct StepInfo {
    int epoch = 0;
    Eigen::Index step = 0;
    LossParts loss;
    double min_decoder_weight = 0.0; // after the projection
};

struct TrainTrace {
    std::vector<EpochStats> epochs;
    double min_decoder_weight_ever = 0.0;
    int64_t steps = 0;
};

/// CSV: epoch,total,mse,penalty (one row per epoch).
inline std::string trace_to_csv(const TrainTrace& trace) {
    std::string out = "epoch,total,mse,penalty\n";
    char buf[128];
    for (size_t e = 0; e < trace.epochs.size(); ++e) {
        std::snprintf(buf, sizeof(buf), "%zu,%.6g,%.6g,%.6g\n", e + 1, trace.epochs[e].total,
                      trace.epochs[e].mse, trace.epochs[e].penalty);
        out += buf;
    }
    return out;
}

namespace asymae_detail {

template <typename S>
Tensor<S> batch_input(const ImageSet& set, const std::vector<Eigen::Index>& idx) {
    Tensor<S> t({Eigen::Index(idx.size()), 1, set.height(), set.width()});
    const auto& X = set.data();
    const Eigen::Index n = X.cols();
    for (size_t b = 0; b < idx.size(); ++b)
        for (Eigen::Index j = 0; j < n; ++j) t.data[b * n + j] = S(X(idx[b], j));
    return t;
}

template <typename S>
Tensor<S> batch_target(const ImageSet& set, const std::vector<Eigen::Index>& idx) {
    Tensor<S> t({Eigen::Index(idx.size()), set.pixels_per_image()});
    const auto& X = set.data();
    for (size_t b = 0; b < idx.size(); ++b)
        for (Eigen::Index j = 0; j < X.cols(); ++j) t.data[b * X.cols() + j] = S(X(idx[b], j));
    return t;
}

inline uint64_t epoch_seed(uint64_t seed, int epoch) {
    return seed ^ (0x9e3779b97f4a7c15ULL * uint64_t(epoch + 1));
}

} // namespace asymae_detail

/// Mini-batch Adam training. Per step: forward, backward (MSE plus the
/// KL penalty routed into the encoder), optimizer update, then the
/// element-wise clamp of the decoder weights onto the positive orthant.
/// Throws NumericError on a non-finite loss.
template <typename S>
TrainTrace train(AsymAeModel<S>& model, const ImageSet& set, const AsymAeConfig& cfg,
                 const std::function<void(const StepInfo&)>& on_step = nullptr) {
    cfg.validate();
    if (set.count() == 0) throw ArgumentError("train: empty image set");
    if (set.height() != model.input_h || set.width() != model.input_w)
        throw ArgumentError("train: image dims do not match the model");

    AdamConfig adam_cfg;
    adam_cfg.lr = cfg.lr;
    AdamState<S> adam(adam_cfg);

    std::vector<Param<S>> params = model.encoder.params();
    for (auto& p : model.decoder.params()) params.push_back(p);

    const Eigen::Index n_pixels = set.pixels_per_image();
    TrainTrace trace;
    trace.min_decoder_weight_ever = model.min_decoder_weight();

    model.encoder.set_mode(Mode::training);
    model.decoder.set_mode(Mode::training);

    double best = std::numeric_limits<double>::infinity();
    int stale_epochs = 0;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const BatchPlan plan =
            make_batches(set, cfg.batch_size, asymae_detail::epoch_seed(cfg.seed, epoch));
        EpochStats stats;
        for (Eigen::Index b = 0; b < plan.batch_count(); ++b) {
            const auto idx = plan.batch(b);
            const Eigen::Index B = Eigen::Index(idx.size());
            Tensor<S> input = asymae_detail::batch_input<S>(set, idx);
            Tensor<S> target = asymae_detail::batch_target<S>(set, idx);

            Tensor<S> codes = model.encoder.forward(input);
            Tensor<S> xhat = model.decoder.forward(codes);
            const LossParts loss = compute_loss(xhat, target, codes, cfg.p, cfg.beta);
            if (!std::isfinite(loss.total))
                throw NumericError("train: loss is not finite at epoch " +
                                   std::to_string(epoch + 1) + " (learning rate too high?)");

            model.encoder.zero_grads();
            model.decoder.zero_grads();

            Tensor<S> dxhat(xhat.shape);
            const S scale = S(2.0 / double(B * n_pixels));
            for (Eigen::Index i = 0; i < dxhat.size(); ++i)
                dxhat.data[i] = scale * (xhat.data[i] - target.data[i]);

            Tensor<S> dcodes = model.decoder.backward(dxhat);
            if (cfg.beta > 0.0) {
                const Tensor<S> dpen = sparsity_penalty_grad(codes, cfg.p);
                for (Eigen::Index i = 0; i < dcodes.size(); ++i)
                    dcodes.data[i] += S(cfg.beta) * dpen.data[i];
            }
            model.encoder.backward(dcodes);

            adam.step(params);
            model.project_decoder_weights();
            const double min_w = model.min_decoder_weight();
            if (min_w < 0.0)
                throw NumericError("train: decoder weight below zero after projection");
            trace.min_decoder_weight_ever = std::min(trace.min_decoder_weight_ever, min_w);
            ++trace.steps;

            stats.total += loss.total;
            stats.mse += loss.mse;
            stats.penalty += loss.penalty;
            if (on_step) on_step({epoch, b, loss, min_w});
        }
        const double nb = double(plan.batch_count());
        stats.total /= nb;
        stats.mse /= nb;
        stats.penalty /= nb;
        trace.epochs.push_back(stats);

        if (cfg.early_stop_patience > 0) {
            if (stats.total < best * (1.0 - cfg.early_stop_rel)) {
                best = stats.total;
                stale_epochs = 0;
            } else if (++stale_epochs >= cfg.early_stop_patience) {
                break;
            }
        }
    }

    model.encoder.set_mode(Mode::inference);
    model.decoder.set_mode(Mode::inference);
    return trace;
}

// ---------------------------------------------------------------------------
// Inference

/// Inference-mode encodings, one row per image, always reported in double.
template <typename S>
Eigen::MatrixXd encode(AsymAeModel<S>& model, const ImageSet& set,
                       Eigen::Index chunk_size = 256) {
    const Mode saved_enc = model.encoder.mode();
    model.encoder.set_mode(Mode::inference);
    Eigen::MatrixXd H(set.count(), model.k);
    std::vector<Eigen::Index> idx;
    for (Eigen::Index start = 0; start < set.count(); start += chunk_size) {
        const Eigen::Index len = std::min(chunk_size, set.count() - start);
        idx.resize(len);
        for (Eigen::Index i = 0; i < len; ++i) idx[i] = start + i;
        Tensor<S> input = asymae_detail::batch_input<S>(set, idx);
        Tensor<S> codes = model.encoder.forward(input);
        for (Eigen::Index i = 0; i < len; ++i)
            for (int j = 0; j < model.k; ++j)
                H(start + i, j) = double(codes.data[i * model.k + j]);
    }
    model.encoder.set_mode(saved_enc);
    return H;
}

/// leaky_relu(b + h W), unclipped: one reconstruction row per encoding row.
template <typename S>
Eigen::MatrixXd decode(const AsymAeModel<S>& model, const Eigen::MatrixXd& H) {
    if (H.cols() != model.k) throw ArgumentError("decode: encoding length != k");
    const auto& wt = model.decoder_dense->weight();
    const auto& bt = model.decoder_dense->bias();
    Eigen::MatrixXd W(model.k, model.pixel_count());
    for (int i = 0; i < model.k; ++i)
        for (Eigen::Index j = 0; j < model.pixel_count(); ++j)
            W(i, j) = double(wt.data[i * model.pixel_count() + j]);
    Eigen::VectorXd bias(model.pixel_count());
    for (Eigen::Index j = 0; j < model.pixel_count(); ++j) bias[j] = double(bt.data[j]);

    Eigen::MatrixXd out = H * W;
    out.rowwise() += bias.transpose();
    const double a = model.alpha_lrelu;
    return out.unaryExpr([a](double v) { return v > 0.0 ? v : a * v; });
}

/// The decoder weight rows as dictionary atoms (non-negative by the
/// training invariant).
template <typename S>
Dictionary atoms(const AsymAeModel<S>& model) {
    const auto& wt = model.decoder_dense->weight();
    Dictionary d;
    d.height = model.input_h;
    d.width = model.input_w;
    d.atoms.reserve(model.k);
    for (int i = 0; i < model.k; ++i) {
        GrayImage img(model.input_h, model.input_w);
        for (Eigen::Index j = 0; j < model.pixel_count(); ++j)
            img.pixels[j] = double(wt.data[i * model.pixel_count() + j]);
        d.atoms.push_back(std::move(img));
    }
    return d;
}

// ---------------------------------------------------------------------------
// Checkpoints: a single MNET container holding the encoder layers
// followed by the decoder layers. The boundary is recovered on load at
// the (unique) sigmoid layer that ends the encoder.

template <typename S>
void save_asymae(AsymAeModel<S>& model, const std::string& path) {
    std::vector<Layer<S>*> layers;
    for (size_t i = 0; i < model.encoder.size(); ++i) layers.push_back(&model.encoder.layer(i));
    for (size_t i = 0; i < model.decoder.size(); ++i) layers.push_back(&model.decoder.layer(i));
    save_net_layers<S>(layers, {1, model.input_h, model.input_w}, path);
}

template <typename S>
AsymAeModel<S> load_asymae(const std::string& path) {
    std::array<Eigen::Index, 3> chw{};
    NeuralNet<S> all = load_net<S>(path, &chw);
    auto layers = all.release_layers();

    size_t split = 0;
    for (size_t i = 0; i < layers.size(); ++i)
        if (dynamic_cast<Sigmoid<S>*>(layers[i].get())) split = i + 1;
    if (split == 0 || split >= layers.size())
        throw FormatError(path + ": container does not hold an encoder/decoder pair");

    AsymAeModel<S> model;
    model.input_h = int(chw[1]);
    model.input_w = int(chw[2]);
    for (size_t i = 0; i < layers.size(); ++i) {
        if (i < split)
            model.encoder.add_layer(std::move(layers[i]));
        else
            model.decoder.add_layer(std::move(layers[i]));
    }
    auto* dec = dynamic_cast<Dense<S>*>(&model.decoder.layer(0));
    if (!dec) throw FormatError(path + ": decoder does not start with a dense layer");
    model.decoder_dense = dec;
    model.k = int(dec->in_dim());
    if (auto* lr = dynamic_cast<LeakyRelu<S>*>(&model.decoder.layer(model.decoder.size() - 1)))
        model.alpha_lrelu = lr->alpha();
    model.encoder.set_mode(Mode::inference);
    model.decoder.set_mode(Mode::inference);
    return model;
}

// ---------------------------------------------------------------------------
// Full-model gradient check (through the penalty term).

/// Analytic gradients of MSE + beta*KL on one batch, compared against
/// central differences over every encoder and decoder parameter.
template <typename S>
double asymae_grad_check(AsymAeModel<S>& model, const Tensor<S>& input, const Tensor<S>& target,
                         double p, double beta, double eps, bool inject_fault = false) {
    model.encoder.set_mode(Mode::training);
    model.decoder.set_mode(Mode::training);

    const Eigen::Index B = input.shape[0];
    const Eigen::Index n_pixels = target.cols();

    auto run_loss = [&]() {
        Tensor<S> codes = model.encoder.forward(input);
        Tensor<S> xhat = model.decoder.forward(codes);
        return compute_loss(xhat, target, codes, p, beta);
    };

    Tensor<S> codes = model.encoder.forward(input);
    Tensor<S> xhat = model.decoder.forward(codes);
    model.encoder.zero_grads();
    model.decoder.zero_grads();
    Tensor<S> dxhat(xhat.shape);
    const S scale = S(2.0 / double(B * n_pixels));
    for (Eigen::Index i = 0; i < dxhat.size(); ++i)
        dxhat.data[i] = scale * (xhat.data[i] - target.data[i]);
    Tensor<S> dcodes = model.decoder.backward(dxhat);
    if (beta > 0.0) {
        const Tensor<S> dpen = sparsity_penalty_grad(codes, p);
        for (Eigen::Index i = 0; i < dcodes.size(); ++i)
            dcodes.data[i] += S(beta) * dpen.data[i];
    }
    model.encoder.backward(dcodes);

    std::vector<Param<S>> params = model.encoder.params();
    for (auto& pr : model.decoder.params()) params.push_back(pr);

    const double worst = finite_difference_check<S>(
        params, [&]() { return run_loss().total; }, eps, inject_fault);

    model.encoder.set_mode(Mode::inference);
    model.decoder.set_mode(Mode::inference);
    return worst;
}

} // namespace morphdict

#endif // MORPHDICT_ASYMAE_HPP

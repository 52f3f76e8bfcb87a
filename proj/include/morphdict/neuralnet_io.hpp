#ifndef MORPHDICT_NEURALNET_IO_HPP
#define MORPHDICT_NEURALNET_IO_HPP

// MNET container read/write. Included at the end of neuralnet.hpp.

#include <array>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>

namespace morphdict {

namespace net_io {

inline void write_u32(std::ostream& out, uint32_t v) {
    uint8_t b[4] = {uint8_t(v), uint8_t(v >> 8), uint8_t(v >> 16), uint8_t(v >> 24)};
    out.write(reinterpret_cast<char*>(b), 4);
}

inline uint32_t read_u32(std::istream& in) {
    uint8_t b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    if (!in) throw FormatError("MNET container truncated");
    return uint32_t(b[0]) | (uint32_t(b[1]) << 8) | (uint32_t(b[2]) << 16) | (uint32_t(b[3]) << 24);
}

inline void write_f64(std::ostream& out, double v) {
    static_assert(sizeof(double) == 8);
    out.write(reinterpret_cast<const char*>(&v), 8);
}

inline double read_f64(std::istream& in) {
    double v;
    in.read(reinterpret_cast<char*>(&v), 8);
    if (!in) throw FormatError("MNET container truncated");
    return v;
}

enum LayerKind : uint32_t {
    kConv2d = 0,
    kDense = 1,
    kBatchNorm = 2,
    kLeakyRelu = 3,
    kSigmoid = 4,
    kFlatten = 5,
};

template <typename S>
void write_manifest_entry(std::ostream& out, const Layer<S>& layer) {
    if (auto* c = dynamic_cast<const Conv2d<S>*>(&layer)) {
        write_u32(out, kConv2d);
        write_u32(out, uint32_t(c->in_channels()));
        write_u32(out, uint32_t(c->out_channels()));
        write_u32(out, uint32_t(c->kernel_size()));
        write_u32(out, uint32_t(c->stride()));
        write_u32(out, uint32_t(c->padding()));
    } else if (auto* d = dynamic_cast<const Dense<S>*>(&layer)) {
        write_u32(out, kDense);
        write_u32(out, uint32_t(d->in_dim()));
        write_u32(out, uint32_t(d->out_dim()));
    } else if (auto* b = dynamic_cast<const BatchNorm<S>*>(&layer)) {
        write_u32(out, kBatchNorm);
        write_u32(out, uint32_t(b->channels()));
        write_f64(out, b->eps());
        write_f64(out, b->momentum());
    } else if (auto* l = dynamic_cast<const LeakyRelu<S>*>(&layer)) {
        write_u32(out, kLeakyRelu);
        write_f64(out, l->alpha());
    } else if (dynamic_cast<const Sigmoid<S>*>(&layer)) {
        write_u32(out, kSigmoid);
    } else if (dynamic_cast<const Flatten<S>*>(&layer)) {
        write_u32(out, kFlatten);
    } else {
        throw ArgumentError("save_net: unknown layer kind " + layer.kind());
    }
}

template <typename S>
std::unique_ptr<Layer<S>> read_manifest_entry(std::istream& in) {
    switch (read_u32(in)) {
        case kConv2d: {
            const uint32_t ic = read_u32(in), oc = read_u32(in), k = read_u32(in),
                           s = read_u32(in), p = read_u32(in);
            return std::make_unique<Conv2d<S>>(int(ic), int(oc), int(k), int(s), int(p));
        }
        case kDense: {
            const uint32_t id = read_u32(in), od = read_u32(in);
            return std::make_unique<Dense<S>>(Eigen::Index(id), Eigen::Index(od));
        }
        case kBatchNorm: {
            const uint32_t c = read_u32(in);
            const double eps = read_f64(in), momentum = read_f64(in);
            return std::make_unique<BatchNorm<S>>(Eigen::Index(c), eps, momentum);
        }
        case kLeakyRelu:
            return std::make_unique<LeakyRelu<S>>(read_f64(in));
        case kSigmoid:
            return std::make_unique<Sigmoid<S>>();
        case kFlatten:
            return std::make_unique<Flatten<S>>();
        default:
            throw FormatError("MNET container: unknown layer kind");
    }
}

} // namespace net_io

template <typename S>
void save_net_layers(const std::vector<Layer<S>*>& layers,
                     const std::array<Eigen::Index, 3>& input_chw, const std::string& path) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw IoError("cannot write " + tmp);
        out.write("MNET", 4);
        net_io::write_u32(out, 1); // version
        net_io::write_u32(out, uint32_t(input_chw[0]));
        net_io::write_u32(out, uint32_t(input_chw[1]));
        net_io::write_u32(out, uint32_t(input_chw[2]));
        net_io::write_u32(out, uint32_t(layers.size()));
        for (const auto* layer : layers) net_io::write_manifest_entry<S>(out, *layer);
        for (auto* layer : layers) {
            for (const auto& p : layer->params())
                for (S v : p.value->data) net_io::write_f64(out, double(v));
            for (const auto& p : layer->buffers())
                for (S v : p.value->data) net_io::write_f64(out, double(v));
        }
        if (!out) throw IoError("short write: " + tmp);
    }
    std::filesystem::rename(tmp, path);
}

template <typename S>
void save_net(NeuralNet<S>& net, const std::array<Eigen::Index, 3>& input_chw,
              const std::string& path) {
    std::vector<Layer<S>*> layers;
    for (size_t i = 0; i < net.size(); ++i) layers.push_back(&net.layer(i));
    save_net_layers<S>(layers, input_chw, path);
}

template <typename S>
NeuralNet<S> load_net(const std::string& path, std::array<Eigen::Index, 3>* input_chw) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, "MNET", 4) != 0)
        throw FormatError(path + ": not a network container (bad magic)");
    if (net_io::read_u32(in) != 1) throw FormatError(path + ": unsupported container version");
    std::array<Eigen::Index, 3> chw;
    chw[0] = net_io::read_u32(in);
    chw[1] = net_io::read_u32(in);
    chw[2] = net_io::read_u32(in);
    if (input_chw) *input_chw = chw;
    const uint32_t n = net_io::read_u32(in);
    NeuralNet<S> net;
    for (uint32_t i = 0; i < n; ++i) net.add_layer(net_io::read_manifest_entry<S>(in));
    for (size_t i = 0; i < net.size(); ++i) {
        for (const auto& p : net.layer(i).params())
            for (S& v : p.value->data) v = S(net_io::read_f64(in));
        for (const auto& p : net.layer(i).buffers())
            for (S& v : p.value->data) v = S(net_io::read_f64(in));
    }
    return net;
}

} // namespace morphdict

#endif // MORPHDICT_NEURALNET_IO_HPP

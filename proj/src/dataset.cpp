#include "morphdict/dataset.hpp"

#include <zlib.h>

#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>

#include "morphdict/errors.hpp"

namespace morphdict {

namespace {

constexpr uint32_t kImageMagic = 2051;
constexpr uint32_t kLabelMagic = 2049;

bool is_gzip(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    unsigned char sig[2] = {0, 0};
    in.read(reinterpret_cast<char*>(sig), 2);
    return in.gcount() == 2 && sig[0] == 0x1f && sig[1] == 0x8b;
}

// Whole file into memory, decompressing if it carries the gzip signature.
std::vector<uint8_t> read_file(const std::string& path) {
    if (!std::filesystem::exists(path)) throw IoError("no such file: " + path);
    if (is_gzip(path)) {
        gzFile gz = gzopen(path.c_str(), "rb");
        if (!gz) throw IoError("cannot open " + path);
        std::vector<uint8_t> out;
        uint8_t buf[1 << 16];
        int n;
        while ((n = gzread(gz, buf, sizeof(buf))) > 0) out.insert(out.end(), buf, buf + n);
        bool bad = n < 0;
        gzclose(gz);
        if (bad) throw FormatError("gzip decompression failed: " + path);
        return out;
    }
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

uint32_t read_be32(const std::vector<uint8_t>& buf, size_t off) {
    if (off + 4 > buf.size()) throw FormatError("IDX header truncated");
    return (uint32_t(buf[off]) << 24) | (uint32_t(buf[off + 1]) << 16) |
           (uint32_t(buf[off + 2]) << 8) | uint32_t(buf[off + 3]);
}

void write_be32(std::ostream& out, uint32_t v) {
    uint8_t b[4] = {uint8_t(v >> 24), uint8_t(v >> 16), uint8_t(v >> 8), uint8_t(v)};
    out.write(reinterpret_cast<char*>(b), 4);
}

} // namespace

ImageSet load_idx_images(const std::string& path) {
    auto buf = read_file(path);
    uint32_t magic = read_be32(buf, 0);
    if (magic != kImageMagic)
        throw FormatError(path + ": expected image magic 2051, got " + std::to_string(magic));
    uint32_t count = read_be32(buf, 4);
    uint32_t rows = read_be32(buf, 8);
    uint32_t cols = read_be32(buf, 12);
    size_t need = 16 + size_t(count) * rows * cols;
    if (buf.size() < need)
        throw FormatError(path + ": truncated payload (" + std::to_string(buf.size()) +
                          " bytes, need " + std::to_string(need) + ")");

    Eigen::MatrixXd data(count, size_t(rows) * cols);
    const uint8_t* p = buf.data() + 16;
    for (uint32_t i = 0; i < count; ++i)
        for (uint32_t j = 0; j < rows * cols; ++j)
            data(i, j) = double(p[size_t(i) * rows * cols + j]) / 255.0;

    std::string name = std::filesystem::path(path).filename().string();
    return ImageSet(name, int(rows), int(cols), std::move(data));
}

std::vector<uint8_t> load_idx_labels(const std::string& path) {
    auto buf = read_file(path);
    uint32_t magic = read_be32(buf, 0);
    if (magic != kLabelMagic)
        throw FormatError(path + ": expected label magic 2049, got " + std::to_string(magic));
    uint32_t count = read_be32(buf, 4);
    if (buf.size() < 8 + count)
        throw FormatError(path + ": truncated label payload");
    return {buf.begin() + 8, buf.begin() + 8 + count};
}

void save_idx_images(const ImageSet& set, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path);
    write_be32(out, kImageMagic);
    write_be32(out, uint32_t(set.count()));
    write_be32(out, uint32_t(set.height()));
    write_be32(out, uint32_t(set.width()));
    const auto& data = set.data();
    std::vector<uint8_t> row(data.cols());
    for (Eigen::Index i = 0; i < data.rows(); ++i) {
        for (Eigen::Index j = 0; j < data.cols(); ++j)
            row[j] = uint8_t(std::lround(data(i, j) * 255.0));
        out.write(reinterpret_cast<char*>(row.data()), row.size());
    }
    if (!out) throw IoError("short write: " + path);
}

void save_idx_labels(const std::vector<uint8_t>& labels, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path);
    write_be32(out, kLabelMagic);
    write_be32(out, uint32_t(labels.size()));
    out.write(reinterpret_cast<const char*>(labels.data()), labels.size());
    if (!out) throw IoError("short write: " + path);
}

std::vector<Eigen::Index> BatchPlan::batch(Eigen::Index b) const {
    if (b < 0 || b >= batch_count()) throw ArgumentError("batch index out of range");
    auto first = order.begin() + b * batch_size;
    auto last = order.begin() + std::min<size_t>(order.size(), (b + 1) * batch_size);
    return {first, last};
}

BatchPlan make_batches(const ImageSet& set, Eigen::Index batch_size, uint64_t seed) {
    if (batch_size < 1) throw ArgumentError("batch_size must be >= 1");
    BatchPlan plan;
    plan.batch_size = batch_size;
    plan.seed = seed;
    plan.order.resize(set.count());
    for (Eigen::Index i = 0; i < set.count(); ++i) plan.order[i] = i;
    // Hand-rolled Fisher-Yates: std::shuffle's draws are implementation
    // defined, and batch orders must match across platforms.
    std::mt19937_64 gen(seed);
    for (Eigen::Index i = set.count() - 1; i > 0; --i) {
        Eigen::Index j = Eigen::Index(gen() % uint64_t(i + 1));
        std::swap(plan.order[i], plan.order[j]);
    }
    return plan;
}

} // namespace morphdict

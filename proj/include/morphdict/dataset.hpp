#ifndef MORPHDICT_DATASET_HPP
#define MORPHDICT_DATASET_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "morphdict/image.hpp"

namespace morphdict {

/// Deterministic shuffled batching over an ImageSet.
/// `order` is a permutation of 0..M-1 fully determined by `seed`
/// (Fisher-Yates driven by mt19937_64, see make_batches).
struct BatchPlan {
    Eigen::Index batch_size = 0;
    uint64_t seed = 0;
    std::vector<Eigen::Index> order;

    Eigen::Index batch_count() const {
        if (order.empty()) return 0;
        return (static_cast<Eigen::Index>(order.size()) + batch_size - 1) / batch_size;
    }
    /// Indices of batch b; the final batch may be short.
    std::vector<Eigen::Index> batch(Eigen::Index b) const;
};

/// Load an IDX image file (magic 2051). Gzip-compressed files are
/// decompressed transparently. Raw bytes are divided by 255.
ImageSet load_idx_images(const std::string& path);

/// Load an IDX label file (magic 2049).
std::vector<uint8_t> load_idx_labels(const std::string& path);

/// Write images back to uncompressed IDX bytes (values rounded to 0..255).
void save_idx_images(const ImageSet& set, const std::string& path);

/// Write labels to uncompressed IDX bytes.
void save_idx_labels(const std::vector<uint8_t>& labels, const std::string& path);

BatchPlan make_batches(const ImageSet& set, Eigen::Index batch_size, uint64_t seed);

} // namespace morphdict

#endif // MORPHDICT_DATASET_HPP

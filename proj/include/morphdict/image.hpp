#ifndef MORPHDICT_IMAGE_HPP
#define MORPHDICT_IMAGE_HPP

#include <Eigen/Core>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "morphdict/errors.hpp"

namespace morphdict {

/// A single gray-scale image with row-major intensities in [0,1].
struct GrayImage {
    int height = 0;
    int width = 0;
    std::vector<double> pixels; // row-major, height*width entries

    GrayImage() = default;
    GrayImage(int h, int w, double fill = 0.0)
        : height(h), width(w), pixels(static_cast<size_t>(h) * w, fill) {}

    double& at(int row, int col) { return pixels[static_cast<size_t>(row) * width + col]; }
    double at(int row, int col) const { return pixels[static_cast<size_t>(row) * width + col]; }
    size_t size() const { return pixels.size(); }
};

/// An ordered collection of same-sized images, matrix-backed: row i of
/// `data` is image i flattened row-major. Immutable after load.
class ImageSet {
public:
    ImageSet() = default;
    ImageSet(std::string name, int height, int width, Eigen::MatrixXd data)
        : name_(std::move(name)), height_(height), width_(width), data_(std::move(data)) {
        if (data_.cols() != static_cast<Eigen::Index>(height_) * width_)
            throw ArgumentError("ImageSet: data columns do not match height*width");
    }

    const std::string& name() const { return name_; }
    int height() const { return height_; }
    int width() const { return width_; }
    Eigen::Index count() const { return data_.rows(); }
    Eigen::Index pixels_per_image() const { return data_.cols(); }

    const Eigen::MatrixXd& data() const { return data_; }

    GrayImage image(Eigen::Index i) const {
        GrayImage img(height_, width_);
        Eigen::Map<Eigen::RowVectorXd>(img.pixels.data(), data_.cols()) = data_.row(i);
        return img;
    }

    bool has_labels() const { return labels_.has_value(); }
    const std::vector<uint8_t>& labels() const {
        if (!labels_) throw StateError("ImageSet: no labels attached");
        return *labels_;
    }

    void attach_labels(std::vector<uint8_t> labels) {
        if (static_cast<Eigen::Index>(labels.size()) != data_.rows())
            throw ArgumentError("label count " + std::to_string(labels.size()) +
                                " does not match image count " + std::to_string(data_.rows()));
        labels_ = std::move(labels);
    }

    /// First n images (and their labels), unshuffled.
    ImageSet head(Eigen::Index n) const {
        if (n < 0 || n > count()) throw ArgumentError("head: n out of range");
        ImageSet out(name_, height_, width_, data_.topRows(n));
        if (labels_) out.attach_labels({labels_->begin(), labels_->begin() + n});
        return out;
    }

private:
    std::string name_;
    int height_ = 0;
    int width_ = 0;
    Eigen::MatrixXd data_;
    std::optional<std::vector<uint8_t>> labels_;
};

} // namespace morphdict

#endif // MORPHDICT_IMAGE_HPP

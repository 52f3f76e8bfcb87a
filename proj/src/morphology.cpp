#include "morphdict/morphology.hpp"

#include <algorithm>
#include <cmath>

#include "morphdict/errors.hpp"

namespace morphdict {

StructuringElement disk_se(double radius) {
    if (radius < 0) throw ArgumentError("disk_se: radius must be >= 0");
    StructuringElement se;
    int r = static_cast<int>(std::floor(radius));
    double r2 = radius * radius;
    for (int dy = -r; dy <= r; ++dy)
        for (int dx = -r; dx <= r; ++dx)
            if (double(dy) * dy + double(dx) * dx <= r2) se.offsets.emplace_back(dy, dx);
    return se;
}

GrayImage dilate(const GrayImage& img, const StructuringElement& se) {
    GrayImage out(img.height, img.width);
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            double best = 0.0; // border value: bottom of the lattice
            for (auto& [dy, dx] : se.offsets) {
                int sy = y - dy, sx = x - dx;
                if (sy < 0 || sy >= img.height || sx < 0 || sx >= img.width) continue;
                best = std::max(best, img.at(sy, sx));
            }
            out.at(y, x) = best;
        }
    }
    return out;
}

GrayImage erode(const GrayImage& img, const StructuringElement& se) {
    GrayImage out(img.height, img.width);
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            double best = 1.0; // border value: top of the lattice
            for (auto& [dy, dx] : se.offsets) {
                int sy = y + dy, sx = x + dx;
                if (sy < 0 || sy >= img.height || sx < 0 || sx >= img.width) continue;
                best = std::min(best, img.at(sy, sx));
            }
            out.at(y, x) = best;
        }
    }
    return out;
}

GrayImage open(const GrayImage& img, const StructuringElement& se) {
    return dilate(erode(img, se), se);
}

Dictionary dilate_dictionary(const Dictionary& dict, const StructuringElement& se) {
    Dictionary out;
    out.height = dict.height;
    out.width = dict.width;
    out.atoms.reserve(dict.atoms.size());
    for (const auto& atom : dict.atoms) out.atoms.push_back(dilate(atom, se));
    return out;
}

GrayImage part_based_apply(const Encoding& h, const Dictionary& processed_dict) {
    if (static_cast<int>(h.values.size()) != processed_dict.k())
        throw ArgumentError("part_based_apply: encoding length " +
                            std::to_string(h.values.size()) + " != dictionary size " +
                            std::to_string(processed_dict.k()));
    GrayImage out(processed_dict.height, processed_dict.width);
    for (size_t j = 0; j < h.values.size(); ++j) {
        const auto& atom = processed_dict.atoms[j];
        double hj = h.values[j];
        for (size_t p = 0; p < out.pixels.size(); ++p) out.pixels[p] += hj * atom.pixels[p];
    }
    return out;
}

} // namespace morphdict

#ifndef MORPHDICT_MORPHOLOGY_HPP
#define MORPHDICT_MORPHOLOGY_HPP

#include <utility>
#include <vector>

#include "morphdict/image.hpp"

namespace morphdict {

/// Flat structuring element: a set of (dy,dx) offsets around the origin.
/// Every constructor used here includes (0,0), which makes dilation
/// extensive and erosion anti-extensive.
struct StructuringElement {
    std::vector<std::pair<int, int>> offsets;

    bool contains_origin() const {
        for (auto& [dy, dx] : offsets)
            if (dy == 0 && dx == 0) return true;
        return false;
    }
};

/// k non-negative atom images of shared dimensions.
struct Dictionary {
    int height = 0;
    int width = 0;
    std::vector<GrayImage> atoms;

    int k() const { return static_cast<int>(atoms.size()); }
};

/// Non-negative latent coefficient vector (length k).
struct Encoding {
    std::vector<double> values;
};

/// Euclidean disk on the integer grid: {(dy,dx) : dy^2+dx^2 <= r^2}.
/// Radius 1 is the 5-pixel cross.
StructuringElement disk_se(double radius);

/// out(p) = max over o in se of img(p-o); out-of-bounds reads as 0.
GrayImage dilate(const GrayImage& img, const StructuringElement& se);

/// out(p) = min over o in se of img(p+o); out-of-bounds reads as 1,
/// the top of the [0,1] lattice, so (dilate, erode) stay an adjunction
/// on the finite grid.
GrayImage erode(const GrayImage& img, const StructuringElement& se);

/// dilate(erode(img, se), se).
GrayImage open(const GrayImage& img, const StructuringElement& se);

/// Apply dilate to every atom.
Dictionary dilate_dictionary(const Dictionary& dict, const StructuringElement& se);

/// Sum_j h_j * atom_j of a processed dictionary, unclipped.
GrayImage part_based_apply(const Encoding& h, const Dictionary& processed_dict);

} // namespace morphdict

#endif // MORPHDICT_MORPHOLOGY_HPP

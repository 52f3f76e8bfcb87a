#include <doctest.h>

#include <random>

#include "morphdict/errors.hpp"
#include "morphdict/morphology.hpp"
#include "morphdict/rng.hpp"

using namespace morphdict;

namespace {

// Reference operators with the opposite traversal (scatter over source
// pixels instead of gather over the structuring element), so agreement
// is not just running the same loop twice.
GrayImage ref_dilate(const GrayImage& img, const StructuringElement& se) {
    GrayImage out(img.height, img.width, 0.0);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x)
            for (auto& [dy, dx] : se.offsets) {
                const int ty = y + dy, tx = x + dx;
                if (ty < 0 || ty >= img.height || tx < 0 || tx >= img.width) continue;
                out.at(ty, tx) = std::max(out.at(ty, tx), img.at(y, x));
            }
    return out;
}

GrayImage ref_erode(const GrayImage& img, const StructuringElement& se) {
    GrayImage out(img.height, img.width, 1.0);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x)
            for (auto& [dy, dx] : se.offsets) {
                const int ty = y - dy, tx = x - dx;
                if (ty < 0 || ty >= img.height || tx < 0 || tx >= img.width) continue;
                out.at(ty, tx) = std::min(out.at(ty, tx), img.at(y, x));
            }
    return out;
}

GrayImage random_image(int h, int w, std::mt19937_64& gen) {
    GrayImage img(h, w);
    for (double& p : img.pixels) p = uniform01(gen);
    return img;
}

bool images_equal(const GrayImage& a, const GrayImage& b, double tol = 0.0) {
    if (a.height != b.height || a.width != b.width) return false;
    for (size_t i = 0; i < a.pixels.size(); ++i)
        if (std::abs(a.pixels[i] - b.pixels[i]) > tol) return false;
    return true;
}

bool leq(const GrayImage& a, const GrayImage& b) {
    for (size_t i = 0; i < a.pixels.size(); ++i)
        if (a.pixels[i] > b.pixels[i]) return false;
    return true;
}

} // namespace

TEST_CASE("disk_se enumerates the Euclidean ball") {
    CHECK(disk_se(0).offsets.size() == 1);
    CHECK(disk_se(0).contains_origin());

    auto cross = disk_se(1);
    CHECK(cross.offsets.size() == 5); // {(0,0),(+-1,0),(0,+-1)}
    for (auto& [dy, dx] : cross.offsets) CHECK(dy * dy + dx * dx <= 1);

    CHECK(disk_se(1.5).offsets.size() == 9); // full 3x3 square: dy^2+dx^2 <= 2.25
    CHECK(disk_se(2).offsets.size() == 13);

    CHECK_THROWS_AS(disk_se(-1), ArgumentError);
}

TEST_CASE("dilate: border, identity and cross stamping") {
    const auto se = disk_se(1);

    GrayImage zero(3, 3);
    CHECK(images_equal(dilate(zero, se), zero));

    GrayImage dot(3, 3);
    dot.at(1, 1) = 0.8;
    GrayImage dilated = dilate(dot, se);
    GrayImage expected(3, 3);
    expected.at(1, 1) = expected.at(0, 1) = expected.at(2, 1) = expected.at(1, 0) =
        expected.at(1, 2) = 0.8;
    CHECK(images_equal(dilated, expected));

    std::mt19937_64 gen(7);
    GrayImage img = random_image(5, 4, gen);
    CHECK(images_equal(dilate(img, disk_se(0)), img));
}

TEST_CASE("erode: top element, adjoint of the cross example, identity") {
    const auto se = disk_se(1);

    GrayImage ones(4, 4, 1.0);
    CHECK(images_equal(erode(ones, se), ones));

    GrayImage dot(3, 3);
    dot.at(1, 1) = 0.8;
    GrayImage eroded_back = erode(dilate(dot, se), se);
    GrayImage expected(3, 3);
    expected.at(1, 1) = 0.8;
    CHECK(images_equal(eroded_back, expected));

    std::mt19937_64 gen(8);
    GrayImage img = random_image(4, 5, gen);
    CHECK(images_equal(erode(img, disk_se(0)), img));
}

TEST_CASE("open: isolated pixel removed, constants fixed, idempotent") {
    const auto se = disk_se(1);

    GrayImage dot(5, 5);
    dot.at(2, 2) = 1.0;
    GrayImage opened = open(dot, se);
    for (double p : opened.pixels) CHECK(p == 0.0);

    GrayImage flat(4, 4, 0.37);
    CHECK(images_equal(open(flat, se), flat));

    std::mt19937_64 gen(9);
    for (int trial = 0; trial < 20; ++trial) {
        GrayImage img = random_image(8, 8, gen);
        GrayImage once = open(img, se);
        CHECK(images_equal(open(once, se), once));
    }
}

TEST_CASE("dilate_dictionary applies dilate atom-wise") {
    const auto se = disk_se(1);

    Dictionary zero_dict;
    zero_dict.height = zero_dict.width = 4;
    zero_dict.atoms.push_back(GrayImage(4, 4));
    auto out = dilate_dictionary(zero_dict, se);
    CHECK(out.k() == 1);
    for (double p : out.atoms[0].pixels) CHECK(p == 0.0);

    std::mt19937_64 gen(10);
    Dictionary dict;
    dict.height = dict.width = 6;
    dict.atoms.push_back(random_image(6, 6, gen));
    dict.atoms.push_back(random_image(6, 6, gen));

    auto same = dilate_dictionary(dict, disk_se(0));
    for (int j = 0; j < 2; ++j) CHECK(images_equal(same.atoms[j], dict.atoms[j]));

    auto dilated = dilate_dictionary(dict, se);
    for (int j = 0; j < 2; ++j) CHECK(images_equal(dilated.atoms[j], dilate(dict.atoms[j], se)));
}

TEST_CASE("part_based_apply combines processed atoms") {
    const auto se = disk_se(1);
    Dictionary dict;
    dict.height = dict.width = 8;
    GrayImage a(8, 8), b(8, 8);
    a.at(1, 1) = 0.9;
    a.at(1, 2) = 0.4;
    b.at(6, 6) = 0.7;
    dict.atoms = {a, b};
    const Dictionary dilated = dilate_dictionary(dict, se);

    Encoding zeros{{0.0, 0.0}};
    GrayImage out = part_based_apply(zeros, dilated);
    for (double p : out.pixels) CHECK(p == 0.0);

    Encoding one_hot{{1.0, 0.0}};
    CHECK(images_equal(part_based_apply(one_hot, dilated), dilate(a, se)));

    // Disjoint supports separated by more than 2*radius: the part-based
    // approximation equals the true dilation of the combined image.
    Encoding h{{0.5, 0.7}};
    GrayImage combined(8, 8);
    for (size_t p = 0; p < combined.pixels.size(); ++p)
        combined.pixels[p] = 0.5 * a.pixels[p] + 0.7 * b.pixels[p];
    GrayImage direct = dilate(combined, se);
    GrayImage approx = part_based_apply(h, dilated);
    CHECK(images_equal(approx, direct, 1e-6));

    Encoding wrong{{1.0}};
    CHECK_THROWS_AS(part_based_apply(wrong, dilated), ArgumentError);
}

TEST_CASE("oracle equivalence: gather matches scatter reference bit-exact") {
    std::mt19937_64 gen(2024);
    for (double radius : {0.0, 1.0, 1.5, 2.0}) {
        const auto se = disk_se(radius);
        for (int trial = 0; trial < 50; ++trial) {
            GrayImage img = random_image(16, 16, gen);
            CHECK(images_equal(dilate(img, se), ref_dilate(img, se)));
            CHECK(images_equal(erode(img, se), ref_erode(img, se)));
        }
    }
}

TEST_CASE("adjunction and lattice properties") {
    std::mt19937_64 gen(31337);
    const auto se = disk_se(1.5);
    for (int trial = 0; trial < 100; ++trial) {
        GrayImage x = random_image(9, 9, gen);
        GrayImage y = random_image(9, 9, gen);

        // delta(x) <= y  <=>  x <= eps(y)
        CHECK(leq(dilate(x, se), y) == leq(x, erode(y, se)));

        CHECK(leq(x, dilate(x, se)));
        CHECK(leq(erode(x, se), x));

        GrayImage sup(9, 9);
        for (size_t i = 0; i < sup.pixels.size(); ++i)
            sup.pixels[i] = std::max(x.pixels[i], y.pixels[i]);
        GrayImage lhs = dilate(sup, se);
        GrayImage dx = dilate(x, se), dy = dilate(y, se);
        GrayImage rhs(9, 9);
        for (size_t i = 0; i < rhs.pixels.size(); ++i)
            rhs.pixels[i] = std::max(dx.pixels[i], dy.pixels[i]);
        CHECK(images_equal(lhs, rhs));
    }
}

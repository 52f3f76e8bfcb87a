// Acceptance suite: runs every exit criterion at its stated tolerance
// and prints one PASS/FAIL line per criterion. Returns the number of
// failed criteria. The MNIST-backed criteria read IDX files from
// MORPHDICT_DATA_DIR; the CLI-backed ones run the binary named by
// MORPHDICT_CLI_BIN.

#include <sys/wait.h>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "morphdict/asymae.hpp"
#include "morphdict/dataset.hpp"
#include "morphdict/evaluation.hpp"
#include "morphdict/morphology.hpp"
#include "morphdict/nmf.hpp"
#include "morphdict/rng.hpp"
#include "morphdict/sparsity.hpp"

using namespace morphdict;
namespace fs = std::filesystem;
using clock_type = std::chrono::steady_clock;

namespace {

int g_failures = 0;

void report(int id, const std::string& name, bool pass, const std::string& detail,
            double seconds) {
    std::printf("[%s] criterion %2d: %-38s %s (%.1fs)\n", pass ? "PASS" : "FAIL", id, name.c_str(),
                detail.c_str(), seconds);
    std::fflush(stdout);
    if (!pass) ++g_failures;
}

void run_criterion(int id, const std::string& name, const std::function<std::string()>& body) {
    const auto t0 = clock_type::now();
    bool pass = true;
    std::string detail;
    try {
        detail = body();
    } catch (const std::exception& e) {
        pass = false;
        detail = std::string("exception: ") + e.what();
    }
    if (detail.rfind("FAIL:", 0) == 0) pass = false;
    report(id, name, pass, detail, std::chrono::duration<double>(clock_type::now() - t0).count());
}

std::string data_file(const std::string& name) {
    const char* dir = std::getenv("MORPHDICT_DATA_DIR");
    if (!dir || !*dir)
        throw IoError("MORPHDICT_DATA_DIR is not set; cannot locate " + name);
    for (const std::string suffix : {"", ".gz"}) {
        const fs::path p = fs::path(dir) / (name + suffix);
        if (fs::exists(p)) return p.string();
    }
    throw IoError(name + " not found under " + dir);
}

std::string cli_bin() {
    const char* bin = std::getenv("MORPHDICT_CLI_BIN");
    if (!bin || !*bin) throw IoError("MORPHDICT_CLI_BIN is not set");
    return bin;
}

int run_cli(const std::string& args) {
    const std::string cmd = cli_bin() + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw IoError("cannot read " + p.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

GrayImage random_image(int h, int w, std::mt19937_64& gen) {
    GrayImage img(h, w);
    for (double& p : img.pixels) p = uniform01(gen);
    return img;
}

// Scatter-traversal references (independent of the gather implementations).
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

bool bit_equal(const GrayImage& a, const GrayImage& b) { return a.pixels == b.pixels; }

std::string fmt(double v) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.4g", v);
    return buf;
}

// --- criteria --------------------------------------------------------------

std::string criterion1_morphology_oracle() {
    std::mt19937_64 gen(1001);
    for (double radius : {0.0, 1.0, 1.5, 2.0}) {
        const auto se = disk_se(radius);
        for (int trial = 0; trial < 200; ++trial) {
            const GrayImage img = random_image(16, 16, gen);
            if (!bit_equal(dilate(img, se), ref_dilate(img, se)))
                return "FAIL: dilate mismatch at radius " + fmt(radius);
            const GrayImage er = erode(img, se);
            if (!bit_equal(er, ref_erode(img, se)))
                return "FAIL: erode mismatch at radius " + fmt(radius);
            if (!bit_equal(open(img, se), ref_dilate(ref_erode(img, se), se)))
                return "FAIL: open mismatch at radius " + fmt(radius);
        }
    }
    return "800 images x 4 radii, bit-exact";
}

std::string criterion2_adjunction_lattice() {
    std::mt19937_64 gen(1002);
    const auto se = disk_se(1.5);
    for (int trial = 0; trial < 100; ++trial) {
        const GrayImage x = random_image(12, 12, gen);
        const GrayImage y = random_image(12, 12, gen);
        const GrayImage dx = dilate(x, se), ey = erode(y, se);
        bool lhs = true, rhs = true;
        for (size_t i = 0; i < x.pixels.size(); ++i) {
            lhs = lhs && dx.pixels[i] <= y.pixels[i];
            rhs = rhs && x.pixels[i] <= ey.pixels[i];
        }
        if (lhs != rhs) return "FAIL: adjunction equivalence broke";

        const GrayImage ex = erode(x, se);
        for (size_t i = 0; i < x.pixels.size(); ++i) {
            if (dx.pixels[i] < x.pixels[i]) return "FAIL: dilation not extensive";
            if (ex.pixels[i] > x.pixels[i]) return "FAIL: erosion not anti-extensive";
        }

        GrayImage sup(12, 12);
        for (size_t i = 0; i < sup.pixels.size(); ++i)
            sup.pixels[i] = std::max(x.pixels[i], y.pixels[i]);
        const GrayImage dsup = dilate(sup, se);
        const GrayImage dy = dilate(y, se);
        for (size_t i = 0; i < sup.pixels.size(); ++i)
            if (dsup.pixels[i] != std::max(dx.pixels[i], dy.pixels[i]))
                return "FAIL: dilation does not commute with supremum";
    }
    return "100 pairs, exact";
}

std::string criterion3_disjoint_commutation() {
    const auto se = disk_se(1);
    Dictionary dict;
    dict.height = dict.width = 16;
    std::mt19937_64 gen(1003);
    // Four compact atoms placed so the dilated supports stay disjoint.
    const int centers[4][2] = {{2, 2}, {2, 12}, {12, 2}, {12, 12}};
    for (auto& c : centers) {
        GrayImage atom(16, 16);
        for (int dy = 0; dy < 2; ++dy)
            for (int dx = 0; dx < 2; ++dx)
                atom.at(c[0] + dy, c[1] + dx) = 0.3 + 0.7 * uniform01(gen);
        dict.atoms.push_back(atom);
    }

    Eigen::MatrixXd H(8, 4);
    for (int i = 0; i < 8; ++i)
        for (int j = 0; j < 4; ++j) H(i, j) = uniform01(gen);
    Eigen::MatrixXd X(8, 256);
    for (int i = 0; i < 8; ++i)
        for (int p = 0; p < 256; ++p) {
            double acc = 0.0;
            for (int j = 0; j < 4; ++j) acc += H(i, j) * dict.atoms[j].pixels[p];
            X(i, p) = acc;
        }

    const double err = dilation_approx_error(X, H, dict, se);
    if (err > 1e-12) return "FAIL: error " + fmt(err) + " above 1e-12";
    return "error " + fmt(err) + " <= 1e-12";
}

std::string criterion4_hoyer() {
    // Fixture values whose norms are exactly representable, so the
    // mathematical extremes land on exactly 1 and exactly 0.
    Eigen::VectorXd one_hot(6);
    one_hot << 0, 0, 2.0, 0, 0, 0;
    if (hoyer_sigma(one_hot) != 1.0) return "FAIL: one-hot sigma != 1";
    Eigen::VectorXd constant(4);
    constant.setConstant(0.5); // L1 = 2 and L2 = 1 exactly
    if (hoyer_sigma(constant) != 0.0) return "FAIL: constant sigma != 0";

    std::mt19937_64 gen(1004);
    double worst_sigma = 0.0, worst_l2 = 0.0;
    for (int trial = 0; trial < 1000; ++trial) {
        const int n = 2 + int(gen() % 255);
        Eigen::VectorXd v(n);
        for (int i = 0; i < n; ++i) v[i] = uniform01(gen);
        const double target = 0.05 + 0.9 * uniform01(gen);
        const double l2 = v.norm();
        const Eigen::VectorXd out = project_sparseness(v, {target});
        if (out.minCoeff() < 0.0) return "FAIL: negative projection output";
        worst_sigma = std::max(worst_sigma, std::abs(hoyer_sigma(out) - target));
        worst_l2 = std::max(worst_l2, std::abs(out.norm() - l2) / l2);
    }
    if (worst_sigma > 1e-6) return "FAIL: sigma error " + fmt(worst_sigma);
    if (worst_l2 > 1e-9) return "FAIL: L2 drift " + fmt(worst_l2);
    return "1000 vectors: sigma err " + fmt(worst_sigma) + ", L2 drift " + fmt(worst_l2);
}

std::string criterion5_sparse_nmf() {
    const ImageSet test = load_idx_images(data_file("t10k-images-idx3-ubyte"));
    NmfConfig cfg;
    cfg.k = 100;
    cfg.s_h = SparsityTarget{0.6};
    cfg.max_iter = 500;
    cfg.tol = 1e-5;
    cfg.seed = 42;
    const Factorization f = factorize(test.data(), cfg);

    for (size_t i = 1; i < f.objective_trace.size(); ++i)
        if (f.objective_trace[i] > f.objective_trace[i - 1] + 1e-10)
            return "FAIL: objective trace increased at step " + std::to_string(i);

    const double rec = reconstruction_error(test.data(), clip01(reconstruct(f.H, f.W)));
    const double sparsity = mean_code_sparsity(f.H);
    const Dictionary dict = dictionary_from_rows(f.W, test.height(), test.width());
    const double dil = dilation_approx_error(test.data(), f.H, dict, disk_se(1));

    std::string detail = "rec " + fmt(rec) + " (<=0.015), sigma " + fmt(sparsity) +
                         " (>=0.55), dil " + fmt(dil) + " (<=0.030), " +
                         std::to_string(f.objective_trace.size() - 1) + " iters";
    if (rec > 0.015 || sparsity < 0.55 || dil > 0.030) return "FAIL: " + detail;
    return detail;
}

std::string criterion6_grad_check_cli() {
    if (run_cli("grad-check --precision 64") != 0) return "FAIL: 64-bit grad-check";
    if (run_cli("grad-check --precision 32") != 0) return "FAIL: 32-bit grad-check";
    if (run_cli("grad-check --inject-fault") == 0)
        return "FAIL: checker accepted a corrupted gradient";
    return "64-bit <=1e-5, 32-bit <=1e-3, fault detected";
}

std::string criterion7_nonnegativity() {
    const ImageSet train_set = load_idx_images(data_file("train-images-idx3-ubyte")).head(1000);
    AsymAeConfig cfg;
    cfg.epochs = 3;
    cfg.seed = 7;
    cfg.early_stop_patience = 0;
    AsymAeModel<double> model = build_model<double>(cfg, train_set.height(), train_set.width());

    int64_t steps = 0;
    double min_seen = 0.0;
    train(model, train_set, cfg, [&](const StepInfo& info) {
        ++steps;
        min_seen = std::min(min_seen, info.min_decoder_weight);
        if (info.min_decoder_weight < 0.0)
            throw NumericError("negative decoder weight at step " + std::to_string(steps));
    });
    if (min_seen < 0.0) return "FAIL: min weight " + fmt(min_seen);
    return std::to_string(steps) + " steps, min decoder weight " + fmt(min_seen) + " >= 0";
}

std::string criterion8_asymae_desk_scale() {
    const ImageSet train_set = load_idx_images(data_file("train-images-idx3-ubyte")).head(10000);
    const ImageSet test = load_idx_images(data_file("t10k-images-idx3-ubyte"));

    AsymAeConfig cfg;
    cfg.k = 100;
    cfg.p = 0.05;
    cfg.beta = 0.001;
    cfg.epochs = 30;
    cfg.seed = 8;
    cfg.early_stop_patience = 0; // run the full 30-epoch budget
    AsymAeModel<double> model = build_model<double>(cfg, train_set.height(), train_set.width());
    const TrainTrace trace = train(model, train_set, cfg);
    if (trace.min_decoder_weight_ever < 0.0) return "FAIL: negative decoder weight";

    const Eigen::MatrixXd H = encode(model, test);
    const double rec = reconstruction_error(test.data(), clip01(decode(model, H)));
    const double sparsity = mean_code_sparsity(H);

    std::string detail = "rec " + fmt(rec) + " (<=0.015), code sigma " + fmt(sparsity) +
                         " (>=0.35), " + std::to_string(trace.epochs.size()) + " epochs";
    if (rec > 0.015 || sparsity < 0.35) return "FAIL: " + detail;
    return detail;
}

std::string criterion9_metric_definitions() {
    std::mt19937_64 gen(1009);
    double worst = 0.0;
    for (int rep = 0; rep < 5; ++rep) {
        Eigen::MatrixXd X(10, 64), Xhat(10, 64), H(10, 6);
        for (int i = 0; i < 10; ++i) {
            for (int j = 0; j < 64; ++j) {
                X(i, j) = uniform01(gen);
                Xhat(i, j) = 2.0 * uniform_sym(gen);
            }
            for (int j = 0; j < 6; ++j) H(i, j) = uniform01(gen);
        }

        double mse = 0.0;
        for (int i = 0; i < 10; ++i)
            for (int j = 0; j < 64; ++j) {
                const double c = std::min(1.0, std::max(0.0, Xhat(i, j)));
                mse += (X(i, j) - c) * (X(i, j) - c);
            }
        mse /= 640.0;
        worst = std::max(worst, std::abs(reconstruction_error(X, clip01(Xhat)) - mse));

        double sig = 0.0;
        for (int i = 0; i < 10; ++i) {
            double l1 = 0.0, l2 = 0.0;
            for (int j = 0; j < 6; ++j) {
                l1 += std::abs(H(i, j));
                l2 += H(i, j) * H(i, j);
            }
            sig += (std::sqrt(6.0) - l1 / std::sqrt(l2)) / (std::sqrt(6.0) - 1.0);
        }
        sig /= 10.0;
        worst = std::max(worst, std::abs(mean_code_sparsity(H) - sig));

        // dilation metric against a fully independent scalar pipeline
        Dictionary dict;
        dict.height = dict.width = 8;
        for (int a = 0; a < 6; ++a) {
            GrayImage atom(8, 8);
            for (double& p : atom.pixels) p = uniform01(gen) * 0.4;
            dict.atoms.push_back(atom);
        }
        const auto se = disk_se(1);
        double dil = 0.0;
        for (int i = 0; i < 10; ++i) {
            GrayImage img(8, 8);
            for (int p = 0; p < 64; ++p) img.pixels[p] = X(i, p);
            const GrayImage dimg = ref_dilate(img, se);
            for (int p = 0; p < 64; ++p) {
                double acc = 0.0;
                for (int a = 0; a < 6; ++a)
                    acc += H(i, a) * ref_dilate(dict.atoms[a], se).pixels[p];
                acc = std::min(1.0, std::max(0.0, acc));
                dil += (acc - dimg.pixels[p]) * (acc - dimg.pixels[p]);
            }
        }
        dil /= 640.0;
        worst = std::max(worst, std::abs(dilation_approx_error(X, H, dict, se) - dil));
    }
    if (worst > 1e-12) return "FAIL: worst deviation " + fmt(worst);
    return "worst deviation " + fmt(worst) + " <= 1e-12";
}

std::string criterion10_reproducibility() {
    const fs::path base = fs::temp_directory_path() / "morphdict_acceptance_repro";
    fs::remove_all(base);
    fs::create_directories(base);
    const std::string test_images = data_file("t10k-images-idx3-ubyte");
    const std::string train_images = data_file("train-images-idx3-ubyte");

    const std::string nmf_args = "train-nmf --seed 7 --k 10 --s-h 0.6 --max-iter 40"
                                 " --limit-test 500 --dataset mnist --test-images " +
                                 test_images;
    const std::string ae_args = "train-asymae --seed 7 --k 8 --epochs 2 --batch-size 50"
                                " --conv1-channels 8 --conv2-channels 16 --dense-units 64"
                                " --limit-train 200 --limit-test 200 --dataset mnist"
                                " --train-images " +
                                train_images + " --test-images " + test_images;

    for (const char* run : {"a", "b"}) {
        if (run_cli(nmf_args + " --out " + (base / ("nmf_" + std::string(run))).string()) != 0)
            return "FAIL: train-nmf run " + std::string(run);
        if (run_cli(ae_args + " --out " + (base / ("ae_" + std::string(run))).string()) != 0)
            return "FAIL: train-asymae run " + std::string(run);
    }

    const std::string nmf_a = read_file(base / "nmf_a" / "reports" / "nmf_mnist.csv");
    const std::string nmf_b = read_file(base / "nmf_b" / "reports" / "nmf_mnist.csv");
    if (nmf_a != nmf_b) return "FAIL: NMF reports differ between runs";
    const std::string ae_a = read_file(base / "ae_a" / "reports" / "asymae_mnist.csv");
    const std::string ae_b = read_file(base / "ae_b" / "reports" / "asymae_mnist.csv");
    if (ae_a != ae_b) return "FAIL: AsymAE reports differ between runs";
    fs::remove_all(base);
    return "NMF and AsymAE reports byte-identical";
}

} // namespace

int main(int argc, char** argv) {
    // Optional arguments select individual criteria by number.
    std::vector<int> selected;
    for (int i = 1; i < argc; ++i) selected.push_back(std::atoi(argv[i]));
    auto wanted = [&](int id) {
        return selected.empty() ||
               std::find(selected.begin(), selected.end(), id) != selected.end();
    };

    std::printf("morphdict acceptance suite\n");
    struct Entry {
        int id;
        const char* name;
        std::function<std::string()> body;
    };
    const std::vector<Entry> entries = {
        {1, "morphology oracle equivalence", criterion1_morphology_oracle},
        {2, "adjunction and lattice properties", criterion2_adjunction_lattice},
        {3, "disjoint-support commutation", criterion3_disjoint_commutation},
        {4, "Hoyer measure and projection", criterion4_hoyer},
        {5, "sparse NMF desk scale (MNIST)", criterion5_sparse_nmf},
        {6, "grad-check CLI at both precisions", criterion6_grad_check_cli},
        {7, "AsymAE strict non-negativity", criterion7_nonnegativity},
        {8, "AsymAE desk-scale training (MNIST)", criterion8_asymae_desk_scale},
        {9, "metric definitions vs oracles", criterion9_metric_definitions},
        {10, "byte-identical reports", criterion10_reproducibility},
    };
    for (const auto& e : entries)
        if (wanted(e.id)) run_criterion(e.id, e.name, e.body);

    if (g_failures == 0)
        std::printf("all criteria passed\n");
    else
        std::printf("%d criterion(s) failed\n", g_failures);
    return g_failures;
}

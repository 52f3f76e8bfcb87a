// morphdict: learn part-based dictionary representations (sparse NMF
// offline, asymmetric auto-encoder online) and evaluate part-based
// approximations of flat morphological operators.
//
// Exit codes: 0 ok, 1 usage/arguments, 2 file or container problems,
// 3 numerical failure.

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "morphdict/asymae.hpp"
#include "morphdict/dataset.hpp"
#include "morphdict/errors.hpp"
#include "morphdict/evaluation.hpp"
#include "morphdict/morphology.hpp"
#include "morphdict/nmf.hpp"

namespace fs = std::filesystem;
using namespace morphdict;

namespace {

struct CommonOpts {
    std::string out_dir = "out";
    uint64_t seed = 0;
    bool seed_given = false;
    int precision = 64;
    double radius = 1.0;
    int workers = 1;
    std::string dataset = "mnist";
    std::string train_images, train_labels, test_images, test_labels;
    Eigen::Index limit_train = 0; // 0 = all
    Eigen::Index limit_test = 0;
};

// Flat key=value config support: the file's keys are the long option
// names of the invoked subcommand without the leading dashes. Lines are
// expanded into option tokens before parsing; keys the command line
// already carries are dropped, so flags override the file.
std::vector<std::string> expand_config_args(std::vector<std::string> args) {
    std::string path;
    for (size_t i = 0; i < args.size(); ++i) {
        if (args[i] == "--config" && i + 1 < args.size()) {
            path = args[i + 1];
            break;
        }
        if (args[i].rfind("--config=", 0) == 0) {
            path = args[i].substr(9);
            break;
        }
    }
    if (path.empty()) return args;
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file " + path);

    auto trim = [](std::string s) {
        const auto a = s.find_first_not_of(" \t\r");
        const auto b = s.find_last_not_of(" \t\r");
        return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
    };
    auto has_key = [&](const std::string& flag) {
        for (const auto& a : args)
            if (a == flag || a.rfind(flag + "=", 0) == 0) return true;
        return false;
    };

    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ArgumentError(path + ":" + std::to_string(lineno) + ": expected key=value");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty())
            throw ArgumentError(path + ":" + std::to_string(lineno) + ": empty key");
        if (key == "config") continue;
        const std::string flag = "--" + key;
        if (has_key(flag)) continue;
        args.push_back(value.empty() ? flag : flag + "=" + value);
    }
    return args;
}

void add_common(CLI::App* cmd, CommonOpts& o, bool needs_seed) {
    static std::string config_dummy;
    cmd->add_option("--config", config_dummy,
                    "Flat key=value config file (keys are option names without dashes; "
                    "command-line flags override)");
    cmd->add_option("--out", o.out_dir, "Output directory (artifacts/, reports/, montages/, trace/)")
        ->capture_default_str();
    auto* seed_opt = cmd->add_option("--seed", o.seed, "PRNG seed");
    if (needs_seed) seed_opt->required();
    seed_opt->each([&o](const std::string&) { o.seed_given = true; });
    cmd->add_option("--precision", o.precision, "Float width for neural models (32 or 64)")
        ->check(CLI::IsMember({32, 64}))
        ->capture_default_str();
    cmd->add_option("--radius", o.radius, "Disk structuring-element radius")
        ->check(CLI::NonNegativeNumber)
        ->capture_default_str();
    cmd->add_option("--workers", o.workers, "Worker threads for per-image evaluation")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    cmd->add_option("--dataset", o.dataset, "Dataset label used in reports")
        ->capture_default_str();
    cmd->add_option("--train-images", o.train_images, "IDX image file (training split)");
    cmd->add_option("--train-labels", o.train_labels, "IDX label file (training split)");
    cmd->add_option("--test-images", o.test_images, "IDX image file (test split)");
    cmd->add_option("--test-labels", o.test_labels, "IDX label file (test split)");
    cmd->add_option("--limit-train", o.limit_train, "Use only the first N training images");
    cmd->add_option("--limit-test", o.limit_test, "Use only the first N test images");
}

std::string resolve_data_file(const std::string& explicit_path, const std::string& std_name) {
    if (!explicit_path.empty()) {
        if (!fs::exists(explicit_path)) throw IoError("no such file: " + explicit_path);
        return explicit_path;
    }
    const char* dir = std::getenv("MORPHDICT_DATA_DIR");
    if (dir) {
        for (const std::string suffix : {"", ".gz"}) {
            fs::path p = fs::path(dir) / (std_name + suffix);
            if (fs::exists(p)) return p.string();
        }
    }
    throw IoError("cannot locate " + std_name +
                  ": pass the path explicitly or set MORPHDICT_DATA_DIR");
}

ImageSet load_split(const std::string& explicit_path, const std::string& std_name,
                    Eigen::Index limit) {
    ImageSet set = load_idx_images(resolve_data_file(explicit_path, std_name));
    if (limit > 0 && limit < set.count()) return set.head(limit);
    return set;
}

void ensure_layout(const std::string& out_dir) {
    for (const char* sub : {"artifacts", "reports", "montages", "trace"})
        fs::create_directories(fs::path(out_dir) / sub);
}

void write_file_atomic(const fs::path& path, const std::string& content) {
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw IoError("cannot write " + tmp.string());
        out << content;
        if (!out) throw IoError("short write: " + tmp.string());
    }
    fs::rename(tmp, path);
}

MetricsReport evaluate_metrics(const std::string& model_name, const std::string& dataset_name,
                               const Eigen::MatrixXd& X, const Eigen::MatrixXd& H,
                               const Eigen::MatrixXd& reconstruction_raw, const Dictionary& dict,
                               double radius, int workers) {
    MetricsReport r;
    r.model = model_name;
    r.dataset = dataset_name;
    r.k = dict.k();
    r.reconstruction_error = reconstruction_error(X, clip01(reconstruction_raw));
    // The Hoyer measure is undefined for length-1 encodings; a one-atom
    // code has a unique non-zero coefficient, which is its sigma=1 case.
    r.mean_code_sparsity = dict.k() >= 2 ? mean_code_sparsity(H) : 1.0;
    r.dilation_approx_error = dilation_approx_error(X, H, dict, disk_se(radius), workers);
    return r;
}

void emit_and_store(const MetricsReport& r, const std::string& out_dir, const std::string& stem) {
    const std::string csv = emit_report({r});
    write_file_atomic(fs::path(out_dir) / "reports" / (stem + ".csv"), csv);
    std::cout << csv;
}

// --- train-nmf -------------------------------------------------------------

struct NmfOpts {
    int k = 100;
    double s_h = 0.6;  // negative = no constraint
    double s_w = -1.0; // unset by default: no constraint on atoms
    int max_iter = 500;
    double tol = 1e-5;
    std::string split = "test";
};

int cmd_train_nmf(const CommonOpts& common, const NmfOpts& opt) {
    ensure_layout(common.out_dir);
    const bool use_test = opt.split == "test";
    ImageSet set = use_test
                       ? load_split(common.test_images, "t10k-images-idx3-ubyte", common.limit_test)
                       : load_split(common.train_images, "train-images-idx3-ubyte",
                                    common.limit_train);

    NmfConfig cfg;
    cfg.k = opt.k;
    if (opt.s_h >= 0) cfg.s_h = SparsityTarget{opt.s_h};
    if (opt.s_w >= 0) cfg.s_w = SparsityTarget{opt.s_w};
    cfg.max_iter = opt.max_iter;
    cfg.tol = opt.tol;
    cfg.seed = common.seed;

    std::cerr << "train-nmf: M=" << set.count() << " N=" << set.pixels_per_image()
              << " k=" << cfg.k << "\n";
    Factorization f = factorize(set.data(), cfg);
    std::cerr << "train-nmf: " << f.objective_trace.size() - 1 << " iterations, objective "
              << f.final_objective() << "\n";

    const fs::path artifact = fs::path(common.out_dir) / "artifacts" / ("nmf_" + common.dataset + ".mdic");
    save_factorization(f, artifact.string());

    const Dictionary dict = dictionary_from_rows(f.W, set.height(), set.width());
    const MetricsReport r = evaluate_metrics("sparse-nmf", common.dataset, set.data(), f.H,
                                             reconstruct(f.H, f.W), dict, common.radius,
                                             common.workers);
    emit_and_store(r, common.out_dir, "nmf_" + common.dataset);
    return 0;
}

// --- train-asymae ----------------------------------------------------------

struct AsymOpts {
    AsymAeConfig cfg;
};

template <typename S>
TrainTrace train_model_and_log(AsymAeModel<S>& model, const ImageSet& set,
                               const AsymAeConfig& cfg);

template <typename S>
int run_train_asymae(const CommonOpts& common, AsymAeConfig cfg) {
    ensure_layout(common.out_dir);
    ImageSet train =
        load_split(common.train_images, "train-images-idx3-ubyte", common.limit_train);
    ImageSet test = load_split(common.test_images, "t10k-images-idx3-ubyte", common.limit_test);
    cfg.seed = common.seed;

    AsymAeModel<S> model = build_model<S>(cfg, train.height(), train.width());
    std::cerr << "train-asymae: M=" << train.count() << " k=" << cfg.k << " epochs=" << cfg.epochs
              << " precision=" << (sizeof(S) * 8) << "\n";
    const TrainTrace trace = train_model_and_log(model, train, cfg);

    const fs::path artifact =
        fs::path(common.out_dir) / "artifacts" / ("asymae_" + common.dataset + ".mnet");
    save_asymae(model, artifact.string());
    write_file_atomic(fs::path(common.out_dir) / "trace" / ("asymae_" + common.dataset + "_trace.csv"),
                      trace_to_csv(trace));

    const Eigen::MatrixXd H = encode(model, test);
    const MetricsReport r = evaluate_metrics("asymae", common.dataset, test.data(), H,
                                             decode(model, H), atoms(model), common.radius,
                                             common.workers);
    emit_and_store(r, common.out_dir, "asymae_" + common.dataset);
    return 0;
}

template <typename S>
TrainTrace train_model_and_log(AsymAeModel<S>& model, const ImageSet& set,
                               const AsymAeConfig& cfg) {
    int last_logged = -1;
    TrainTrace trace = train<S>(model, set, cfg, [&](const StepInfo& info) {
        if (info.epoch != last_logged && info.step == 0 && info.epoch % 5 == 0) {
            last_logged = info.epoch;
            std::cerr << "  epoch " << info.epoch + 1 << " loss " << info.loss.total << "\n";
        }
    });
    std::cerr << "train-asymae: " << trace.epochs.size() << " epochs, final loss "
              << trace.epochs.back().total << ", min decoder weight "
              << trace.min_decoder_weight_ever << "\n";
    return trace;
}

// --- artifact loading ------------------------------------------------------

enum class ArtifactKind { nmf, asymae };

ArtifactKind sniff_artifact(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    char magic[4] = {};
    in.read(magic, 4);
    const std::string m(magic, 4);
    if (m == "MDIC") return ArtifactKind::nmf;
    if (m == "MNET") return ArtifactKind::asymae;
    throw FormatError(path + ": unknown container magic");
}

/// Codes and dictionary for an evaluation split, from either container.
struct LoadedModel {
    std::string name;
    Eigen::MatrixXd H;
    Eigen::MatrixXd reconstruction; // unclipped
    Dictionary dict;
};

struct EvalOpts {
    std::string artifact;
    bool reencode = false;
    double s_h = -1.0; // sparsity target when re-encoding
    std::string model_name;
    std::string split = "test";
};

template <typename S>
LoadedModel load_asymae_model(const std::string& path, const ImageSet& set) {
    AsymAeModel<S> model = load_asymae<S>(path);
    if (model.input_h != set.height() || model.input_w != set.width())
        throw ArgumentError("artifact expects " + std::to_string(model.input_h) + "x" +
                            std::to_string(model.input_w) + " images");
    LoadedModel out;
    out.name = "asymae";
    out.H = encode(model, set);
    out.reconstruction = decode(model, out.H);
    out.dict = atoms(model);
    return out;
}

LoadedModel load_model_for(const ImageSet& set, const EvalOpts& opt, int precision) {
    switch (sniff_artifact(opt.artifact)) {
        case ArtifactKind::asymae:
            return precision == 32 ? load_asymae_model<float>(opt.artifact, set)
                                   : load_asymae_model<double>(opt.artifact, set);
        case ArtifactKind::nmf:
        default: {
            Factorization f = load_factorization(opt.artifact);
            if (f.W.cols() != set.pixels_per_image())
                throw ArgumentError("artifact dictionary does not match image size");
            LoadedModel out;
            out.name = "sparse-nmf";
            if (!opt.reencode) {
                if (f.H.rows() != set.count())
                    throw ArgumentError(
                        "stored encodings cover " + std::to_string(f.H.rows()) +
                        " images but the split has " + std::to_string(set.count()) +
                        "; pass --reencode to encode this split against the dictionary");
                out.H = f.H;
            } else {
                std::optional<SparsityTarget> t;
                if (opt.s_h >= 0) t = SparsityTarget{opt.s_h};
                OfflineEncoding enc = encode_offline(set.data(), f.W, t);
                if (!enc.converged)
                    std::cerr << "eval: warning: offline encoding hit the iteration cap for "
                                 "some samples\n";
                out.H = std::move(enc.H);
            }
            out.reconstruction = reconstruct(out.H, f.W);
            out.dict = dictionary_from_rows(f.W, set.height(), set.width());
            return out;
        }
    }
}

int cmd_eval(const CommonOpts& common, const EvalOpts& opt) {
    ensure_layout(common.out_dir);
    ImageSet set = opt.split == "test"
                       ? load_split(common.test_images, "t10k-images-idx3-ubyte", common.limit_test)
                       : load_split(common.train_images, "train-images-idx3-ubyte",
                                    common.limit_train);
    LoadedModel m = load_model_for(set, opt, common.precision);
    const std::string name = opt.model_name.empty() ? m.name : opt.model_name;
    const MetricsReport r =
        evaluate_metrics(name, common.dataset, set.data(), m.H, m.reconstruction, m.dict,
                         common.radius, common.workers);
    emit_and_store(r, common.out_dir, "eval_" + name + "_" + common.dataset);
    return 0;
}

// --- export-atoms ----------------------------------------------------------

struct ExportOpts {
    std::string artifact;
    int cols = 10;
    bool raw = false;
};

int cmd_export_atoms(const CommonOpts& common, const ExportOpts& opt) {
    ensure_layout(common.out_dir);
    Dictionary dict;
    switch (sniff_artifact(opt.artifact)) {
        case ArtifactKind::asymae: {
            if (common.precision == 32) {
                AsymAeModel<float> model = load_asymae<float>(opt.artifact);
                dict = atoms(model);
            } else {
                AsymAeModel<double> model = load_asymae<double>(opt.artifact);
                dict = atoms(model);
            }
            break;
        }
        case ArtifactKind::nmf: {
            Factorization f = load_factorization(opt.artifact);
            const int n = int(f.W.cols());
            int h = int(std::lround(std::sqrt(double(n))));
            if (h * (n / h) != n) h = 1;
            dict = dictionary_from_rows(f.W, h, n / h);
            break;
        }
    }
    const fs::path path = fs::path(common.out_dir) / "montages" /
                          (fs::path(opt.artifact).stem().string() + "_atoms.pgm");
    write_montage(dict.atoms, opt.cols, path.string(), !opt.raw);
    std::cout << path.string() << "\n";
    return 0;
}

// --- approx-dilate ---------------------------------------------------------

struct ApproxOpts {
    std::string artifact;
    std::vector<Eigen::Index> indices;
    EvalOpts eval; // reencode / s_h plumbing for NMF artifacts
};

int cmd_approx_dilate(const CommonOpts& common, const ApproxOpts& opt) {
    ensure_layout(common.out_dir);
    if (opt.indices.empty()) throw ArgumentError("approx-dilate: no image indices given");
    ImageSet set = load_split(common.test_images, "t10k-images-idx3-ubyte", common.limit_test);
    for (auto i : opt.indices)
        if (i < 0 || i >= set.count())
            throw ArgumentError("approx-dilate: index " + std::to_string(i) + " out of range");

    EvalOpts eopt = opt.eval;
    eopt.artifact = opt.artifact;
    LoadedModel m = load_model_for(set, eopt, common.precision);

    const StructuringElement se = disk_se(common.radius);
    const Dictionary dilated = dilate_dictionary(m.dict, se);

    std::vector<GrayImage> tiles;
    for (auto i : opt.indices) {
        GrayImage input = set.image(i);
        Encoding h;
        h.values.assign(m.H.row(i).begin(), m.H.row(i).end());
        tiles.push_back(input);
        tiles.push_back(dilate(input, se));
        tiles.push_back(clip01(part_based_apply(h, dilated)));
    }
    const fs::path path = fs::path(common.out_dir) / "montages" /
                          (fs::path(opt.artifact).stem().string() + "_dilation.pgm");
    write_montage(tiles, 3, path.string(), false);
    std::cout << path.string() << "\n";
    return 0;
}

// --- grad-check ------------------------------------------------------------

struct GradCheckOpts {
    double eps = 0.0;       // 0 = per-precision default
    double threshold = 0.0; // 0 = per-precision default
    double p = 0.05;
    double beta = 0.01;
    int batch = 2;
    int dims = 8;
    bool inject_fault = false;
};

template <typename S>
int run_grad_check(const CommonOpts& common, const GradCheckOpts& opt) {
    const bool is32 = sizeof(S) == 4;
    const double eps = opt.eps > 0 ? opt.eps : (is32 ? 1e-3 : 1e-6);
    const double threshold = opt.threshold > 0 ? opt.threshold : (is32 ? 1e-3 : 1e-5);

    AsymAeConfig cfg = AsymAeConfig::tiny();
    cfg.p = opt.p;
    cfg.beta = opt.beta;
    cfg.seed = common.seed_given ? common.seed : 42;
    AsymAeModel<S> model = build_model<S>(cfg, opt.dims, opt.dims);

    std::mt19937_64 gen(cfg.seed + 1);
    Tensor<S> input({opt.batch, 1, opt.dims, opt.dims});
    for (S& v : input.data) v = S(uniform01(gen));
    Tensor<S> target({opt.batch, Eigen::Index(opt.dims) * opt.dims});
    for (S& v : target.data) v = S(uniform01(gen));

    const double worst =
        asymae_grad_check(model, input, target, cfg.p, cfg.beta, eps, opt.inject_fault);
    const bool pass = worst <= threshold;
    std::cout << "grad-check: precision=" << (is32 ? 32 : 64) << " worst relative error " << worst
              << " (threshold " << threshold << "): " << (pass ? "PASS" : "FAIL") << "\n";
    return pass ? 0 : 3;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Part-based dictionary representations and morphological approximation"};
    app.require_subcommand(1);

    CommonOpts common;

    auto* nmf_cmd = app.add_subcommand("train-nmf", "Run sparse NMF on a split and evaluate it");
    NmfOpts nmf_opt;
    add_common(nmf_cmd, common, true);
    nmf_cmd->add_option("--k", nmf_opt.k, "Latent dimension")->capture_default_str();
    nmf_cmd->add_option("--s-h", nmf_opt.s_h, "Sparsity target for encoding columns (negative disables)")
        ->capture_default_str();
    nmf_cmd->add_option("--s-w", nmf_opt.s_w, "Sparsity target for atom rows (negative disables)")
        ->capture_default_str();
    nmf_cmd->add_option("--max-iter", nmf_opt.max_iter, "Iteration cap")->capture_default_str();
    nmf_cmd->add_option("--tol", nmf_opt.tol, "Relative objective-decrease stop threshold")
        ->capture_default_str();
    nmf_cmd->add_option("--split", nmf_opt.split, "Split to factorize: test or train")
        ->check(CLI::IsMember({"test", "train"}))
        ->capture_default_str();

    auto* ae_cmd = app.add_subcommand("train-asymae", "Train the asymmetric auto-encoder");
    AsymOpts ae_opt;
    add_common(ae_cmd, common, true);
    ae_cmd->add_option("--k", ae_opt.cfg.k, "Latent size")->capture_default_str();
    ae_cmd->add_option("--p", ae_opt.cfg.p, "Sparsity objective")->capture_default_str();
    ae_cmd->add_option("--beta", ae_opt.cfg.beta, "Sparsity penalty weight")->capture_default_str();
    ae_cmd->add_option("--alpha", ae_opt.cfg.alpha_lrelu, "Leaky-ReLU slope")->capture_default_str();
    ae_cmd->add_option("--epochs", ae_opt.cfg.epochs, "Epoch budget")->capture_default_str();
    ae_cmd->add_option("--batch-size", ae_opt.cfg.batch_size)->capture_default_str();
    ae_cmd->add_option("--lr", ae_opt.cfg.lr, "Adam learning rate")->capture_default_str();
    ae_cmd->add_option("--patience", ae_opt.cfg.early_stop_patience,
                       "Early-stop patience in epochs (0 disables)")
        ->capture_default_str();
    ae_cmd->add_option("--conv1-channels", ae_opt.cfg.conv1_channels)->capture_default_str();
    ae_cmd->add_option("--conv2-channels", ae_opt.cfg.conv2_channels)->capture_default_str();
    ae_cmd->add_option("--dense-units", ae_opt.cfg.dense_units)->capture_default_str();

    auto* eval_cmd = app.add_subcommand("eval", "Evaluate a saved artifact on a split");
    EvalOpts eval_opt;
    add_common(eval_cmd, common, false);
    eval_cmd->add_option("--artifact", eval_opt.artifact, "Saved .mdic or .mnet container")
        ->required();
    eval_cmd->add_flag("--reencode", eval_opt.reencode,
                       "Re-encode the split against the stored dictionary (NMF artifacts)");
    eval_cmd->add_option("--s-h", eval_opt.s_h, "Sparsity target when re-encoding (negative disables)")
        ->capture_default_str();
    eval_cmd->add_option("--model-name", eval_opt.model_name, "Override the model column");
    eval_cmd->add_option("--split", eval_opt.split, "Split to evaluate: test or train")
        ->check(CLI::IsMember({"test", "train"}))
        ->capture_default_str();

    auto* atoms_cmd = app.add_subcommand("export-atoms", "Write the atom montage as PGM");
    ExportOpts export_opt;
    add_common(atoms_cmd, common, false);
    atoms_cmd->add_option("--artifact", export_opt.artifact)->required();
    atoms_cmd->add_option("--cols", export_opt.cols, "Grid columns")->capture_default_str();
    atoms_cmd->add_flag("--raw", export_opt.raw, "Disable per-tile display normalization");

    auto* approx_cmd = app.add_subcommand(
        "approx-dilate", "Write input / dilation / part-based approximation triptychs");
    ApproxOpts approx_opt;
    add_common(approx_cmd, common, false);
    approx_cmd->add_option("--artifact", approx_opt.artifact)->required();
    approx_cmd->add_option("--indices", approx_opt.indices, "Test-image indices")
        ->delimiter(',');
    approx_cmd->add_flag("--reencode", approx_opt.eval.reencode);
    approx_cmd->add_option("--s-h", approx_opt.eval.s_h)->capture_default_str();

    auto* gc_cmd = app.add_subcommand("grad-check",
                                      "Finite-difference check of the tiny auto-encoder");
    GradCheckOpts gc_opt;
    add_common(gc_cmd, common, false);
    gc_cmd->add_option("--eps", gc_opt.eps, "FD step (default 1e-6 at 64-bit, 1e-3 at 32-bit)");
    gc_cmd->add_option("--threshold", gc_opt.threshold,
                       "Pass threshold (default 1e-5 at 64-bit, 1e-3 at 32-bit)");
    gc_cmd->add_option("--p", gc_opt.p)->capture_default_str();
    gc_cmd->add_option("--beta", gc_opt.beta)->capture_default_str();
    gc_cmd->add_option("--batch", gc_opt.batch)->capture_default_str();
    gc_cmd->add_option("--dims", gc_opt.dims)->capture_default_str();
    gc_cmd->add_flag("--inject-fault", gc_opt.inject_fault,
                     "Corrupt one gradient entry to exercise the checker");

    try {
        std::vector<std::string> args;
        for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
        args = expand_config_args(std::move(args));
        std::vector<const char*> cargs = {argv[0]};
        for (const auto& a : args) cargs.push_back(a.c_str());
        app.parse(int(cargs.size()), cargs.data());
        if (nmf_cmd->parsed()) return cmd_train_nmf(common, nmf_opt);
        if (ae_cmd->parsed())
            return common.precision == 32 ? run_train_asymae<float>(common, ae_opt.cfg)
                                          : run_train_asymae<double>(common, ae_opt.cfg);
        if (eval_cmd->parsed()) return cmd_eval(common, eval_opt);
        if (atoms_cmd->parsed()) return cmd_export_atoms(common, export_opt);
        if (approx_cmd->parsed()) return cmd_approx_dilate(common, approx_opt);
        if (gc_cmd->parsed())
            return common.precision == 32 ? run_grad_check<float>(common, gc_opt)
                                          : run_grad_check<double>(common, gc_opt);
        return 1;
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    } catch (const ArgumentError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const NumericError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
}

#include "morphdict/evaluation.hpp"

#include <cmath>
#include <cstdio>
#include <thread>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "morphdict/errors.hpp"
#include "morphdict/sparsity.hpp"

namespace morphdict {

Eigen::MatrixXd clip01(const Eigen::MatrixXd& images) {
    return images.array().max(0.0).min(1.0).matrix();
}

GrayImage clip01(const GrayImage& img) {
    GrayImage out = img;
    for (double& p : out.pixels) p = std::min(1.0, std::max(0.0, p));
    return out;
}

double reconstruction_error(const Eigen::MatrixXd& X, const Eigen::MatrixXd& X_hat) {
    if (X.rows() != X_hat.rows() || X.cols() != X_hat.cols())
        throw ArgumentError("reconstruction_error: shape mismatch");
    return (X - X_hat).squaredNorm() / double(X.rows() * X.cols());
}

double mean_code_sparsity(const Eigen::MatrixXd& H, int* skipped) {
    int zero_rows = 0;
    double sum = 0.0;
    for (Eigen::Index i = 0; i < H.rows(); ++i) {
        if (H.row(i).norm() == 0.0) {
            ++zero_rows;
            continue;
        }
        sum += hoyer_sigma(H.row(i).transpose());
    }
    if (skipped) *skipped = zero_rows;
    const Eigen::Index counted = H.rows() - zero_rows;
    if (counted == 0) throw NumericError("mean_code_sparsity: all encoding rows are zero");
    return sum / double(counted);
}

double dilation_approx_error(const Eigen::MatrixXd& X, const Eigen::MatrixXd& H,
                             const Dictionary& dict, const StructuringElement& se, int workers) {
    if (X.rows() != H.rows()) throw ArgumentError("dilation_approx_error: X/H row mismatch");
    if (H.cols() != dict.k()) throw ArgumentError("dilation_approx_error: H/dictionary mismatch");
    if (X.cols() != Eigen::Index(dict.height) * dict.width)
        throw ArgumentError("dilation_approx_error: image size does not match dictionary");
    if (workers < 1) throw ArgumentError("dilation_approx_error: workers must be >= 1");

    // D_B(x_i) = sum_j h_ij dilate(w_j) for every image at once.
    const Dictionary dilated = dilate_dictionary(dict, se);
    Eigen::MatrixXd Wd(dict.k(), X.cols());
    for (int j = 0; j < dict.k(); ++j)
        for (Eigen::Index p = 0; p < X.cols(); ++p) Wd(j, p) = dilated.atoms[j].pixels[p];
    const Eigen::MatrixXd D = clip01(H * Wd);

    std::vector<double> per_image(X.rows());
    auto compute_range = [&](Eigen::Index begin, Eigen::Index end) {
        GrayImage img(dict.height, dict.width);
        for (Eigen::Index i = begin; i < end; ++i) {
            Eigen::Map<Eigen::RowVectorXd>(img.pixels.data(), X.cols()) = X.row(i);
            const GrayImage dil = dilate(img, se);
            double acc = 0.0;
            for (Eigen::Index p = 0; p < X.cols(); ++p) {
                const double d = D(i, p) - dil.pixels[p];
                acc += d * d;
            }
            per_image[i] = acc;
        }
    };

    const int n_threads = int(std::min<Eigen::Index>(workers, X.rows()));
    if (n_threads <= 1) {
        compute_range(0, X.rows());
    } else {
        std::vector<std::thread> pool;
        const Eigen::Index chunk = (X.rows() + n_threads - 1) / n_threads;
        for (int t = 0; t < n_threads; ++t) {
            const Eigen::Index begin = t * chunk;
            const Eigen::Index end = std::min(X.rows(), begin + chunk);
            if (begin < end) pool.emplace_back(compute_range, begin, end);
        }
        for (auto& th : pool) th.join();
    }

    double sum = 0.0; // sequential reduction by index: worker-count independent
    for (double v : per_image) sum += v;
    return sum / double(X.rows() * X.cols());
}

namespace {

std::string format_g6(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

} // namespace

std::string emit_report(const std::vector<MetricsReport>& reports) {
    std::string out = "model,dataset,k,rec_error,code_sparsity,dilation_error\n";
    for (const auto& r : reports) {
        out += r.model + "," + r.dataset + "," + std::to_string(r.k) + "," +
               format_g6(r.reconstruction_error) + "," + format_g6(r.mean_code_sparsity) + "," +
               format_g6(r.dilation_approx_error) + "\n";
    }
    return out;
}

std::vector<MetricsReport> parse_report(const std::string& csv) {
    std::istringstream in(csv);
    std::string line;
    if (!std::getline(in, line) || line != "model,dataset,k,rec_error,code_sparsity,dilation_error")
        throw FormatError("parse_report: bad header");
    std::vector<MetricsReport> out;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string field;
        MetricsReport r;
        std::getline(ls, r.model, ',');
        std::getline(ls, r.dataset, ',');
        std::getline(ls, field, ',');
        r.k = std::stoi(field);
        std::getline(ls, field, ',');
        r.reconstruction_error = std::stod(field);
        std::getline(ls, field, ',');
        r.mean_code_sparsity = std::stod(field);
        if (!std::getline(ls, field, ',')) throw FormatError("parse_report: short row");
        r.dilation_approx_error = std::stod(field);
        out.push_back(std::move(r));
    }
    return out;
}

void write_montage(const std::vector<GrayImage>& images, int cols, const std::string& path,
                   bool normalize_tiles) {
    if (images.empty()) throw ArgumentError("write_montage: no images");
    if (cols < 1) throw ArgumentError("write_montage: cols must be >= 1");
    const int h = images[0].height, w = images[0].width;
    for (const auto& img : images)
        if (img.height != h || img.width != w)
            throw ArgumentError("write_montage: images must share dimensions");

    const int n = int(images.size());
    const int grid_cols = std::min(cols, n);
    const int grid_rows = (n + grid_cols - 1) / grid_cols;
    const int out_w = grid_cols * w + (grid_cols - 1);
    const int out_h = grid_rows * h + (grid_rows - 1);

    std::vector<uint8_t> canvas(size_t(out_w) * out_h, 128); // separators mid-gray

    for (int idx = 0; idx < n; ++idx) {
        const int gr = idx / grid_cols, gc = idx % grid_cols;
        const int oy = gr * (h + 1), ox = gc * (w + 1);
        const auto& img = images[idx];
        double lo = img.pixels[0], hi = img.pixels[0];
        for (double p : img.pixels) {
            lo = std::min(lo, p);
            hi = std::max(hi, p);
        }
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                double v = img.at(y, x);
                if (normalize_tiles)
                    v = (hi > lo) ? (v - lo) / (hi - lo) : 0.5; // constant tile: mid-gray
                else
                    v = std::min(1.0, std::max(0.0, v));
                canvas[size_t(oy + y) * out_w + ox + x] = uint8_t(std::lround(v * 255.0));
            }
    }

    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw IoError("cannot write " + tmp);
        out << "P5\n" << out_w << " " << out_h << "\n255\n";
        out.write(reinterpret_cast<const char*>(canvas.data()), canvas.size());
        if (!out) throw IoError("short write: " + tmp);
    }
    std::filesystem::rename(tmp, path);
}

} // namespace morphdict

#ifndef MORPHDICT_EVALUATION_HPP
#define MORPHDICT_EVALUATION_HPP

#include <Eigen/Core>
#include <string>
#include <vector>

#include "morphdict/morphology.hpp"

namespace morphdict {

/// One comparison-table row: the three evaluation measures for a
/// (model, dataset) pair. The timestamp is bookkeeping only and is not
/// part of the CSV row (reports must be byte-reproducible).
struct MetricsReport {
    std::string model;
    std::string dataset;
    int k = 0;
    double reconstruction_error = 0.0;
    double mean_code_sparsity = 0.0;
    double dilation_approx_error = 0.0;
    std::string timestamp;
};

/// Element-wise clamp to [0,1].
Eigen::MatrixXd clip01(const Eigen::MatrixXd& images);
GrayImage clip01(const GrayImage& img);

/// Pixel-wise mean squared error (1/MN) sum (x - x_hat)^2.
double reconstruction_error(const Eigen::MatrixXd& X, const Eigen::MatrixXd& X_hat);

/// Mean Hoyer sparsity over encoding rows. Zero rows are skipped and
/// counted in *skipped when given; throws NumericError if every row is zero.
double mean_code_sparsity(const Eigen::MatrixXd& H, int* skipped = nullptr);

/// Mean squared error between the clipped part-based dilation
/// approximation and the true dilation, over all images and pixels.
/// workers > 1 dilates images in parallel; the per-image partial sums
/// are reduced sequentially by index either way, so the result does not
/// depend on the worker count.
double dilation_approx_error(const Eigen::MatrixXd& X, const Eigen::MatrixXd& H,
                             const Dictionary& dict, const StructuringElement& se,
                             int workers = 1);

/// CSV with fixed header model,dataset,k,rec_error,code_sparsity,dilation_error
/// and values at 6 significant digits.
std::string emit_report(const std::vector<MetricsReport>& reports);

/// Parse emit_report output back (used to check the round trip).
std::vector<MetricsReport> parse_report(const std::string& csv);

/// Row-major tile grid with 1-pixel mid-gray separators, written as
/// binary PGM (P5, maxval 255). Each tile is min-max normalized for
/// display unless normalize_tiles is false (then clipped to [0,1]).
void write_montage(const std::vector<GrayImage>& images, int cols, const std::string& path,
                   bool normalize_tiles = true);

} // namespace morphdict

#endif // MORPHDICT_EVALUATION_HPP

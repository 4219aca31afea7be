#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "cinexai/cav.hpp"
#include "cinexai/model.hpp"
#include "cinexai/types.hpp"

namespace cinexai::interp {

/// Unit direction in per-frame latent space.
struct LatentDirection {
  Eigen::VectorXd direction;
  std::string name;
  std::string method = "latent_mean_cav";
  double accuracy = 0.0;
};

/// CAV fit on time-averaged latent means of the two concept sets.
LatentDirection latent_concept_direction(const model::Model& model, std::span<const SegSequence> positives,
                                         std::span<const SegSequence> negatives, const std::string& concept_name,
                                         const cav::FitConfig& config = {});

struct InterpolationStep {
  double alpha = 0.0;
  SegSequence decoded;
  double logit = 0.0;
};

struct InterpolationResult {
  std::uint32_t subject_id = 0;
  std::vector<InterpolationStep> steps;
};

/// Shifts every frame's latent mean by alpha * direction, decodes the
/// argmax labels, and classifies the shifted means.
InterpolationResult interpolate_decode(const model::Model& model, const SegSequence& seq,
                                       const Eigen::VectorXd& direction, std::span<const double> alphas);

struct PcaResult {
  Eigen::VectorXd mean;
  /// Unit principal axes as columns, by descending eigenvalue.
  Eigen::MatrixXd axes;
  Eigen::VectorXd eigenvalues;
  /// One row per input vector.
  Eigen::MatrixXd projections;
  std::vector<std::size_t> iterations;
};

struct PcaConfig {
  double tolerance = 1e-10;
  std::size_t max_iterations = 10000;
};

/// Sample-covariance PCA by power iteration with deflation. Each axis is
/// signed so its largest-magnitude entry is positive. Throws ParameterError
/// with fewer than components + 1 vectors.
PcaResult pca_project(std::span<const Eigen::VectorXd> vectors, std::size_t components, const PcaConfig& config = {});

/// Time-averaged per-frame latent means (one column per frame in `mus`).
Eigen::VectorXd time_averaged_latent(const Eigen::MatrixXd& mus);

/// d logit / d mu_t averaged over frames, projected onto `axes`.
Eigen::VectorXd gradient_arrow(const model::Model& model, const Eigen::MatrixXd& mus, const Eigen::MatrixXd& axes);

/// Binary PGM of a frame, slices stacked vertically, labels scaled by 85.
void write_pgm(const std::filesystem::path& path, const LabelFrame& frame);

/// Writes one PGM per step and frame plus `manifest.csv`
/// (`alpha,frame,logit,file`) into `dir`.
void write_interpolation(const std::filesystem::path& dir, const InterpolationResult& result);

struct PcaRow {
  std::uint32_t subject_id = 0;
  double pc1 = 0.0;
  double pc2 = 0.0;
  double grad1 = 0.0;
  double grad2 = 0.0;
  int label = -1;
};

/// `subject_id,pc1,pc2,grad1,grad2,label`
std::string format_pca_csv(std::span<const PcaRow> rows);
/// Scatter of the first two components with gradient arrows, colored by label.
std::string format_pca_svg(std::span<const PcaRow> rows);

}  // namespace cinexai::interp

#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cinexai/model.hpp"
#include "cinexai/types.hpp"

namespace cinexai::cav {

enum class BiomarkerField { ef, per, pfr, pafr, lvt, rv_offset };
/// `low`: the k smallest values are concept-positive; `high`: the k largest.
enum class Polarity { low, high };

struct ConceptSpec {
  std::string name;
  BiomarkerField field = BiomarkerField::ef;
  Polarity polarity = Polarity::low;
  std::size_t k = 100;

  void validate() const;
  /// low_ef, low_per, low_pfr, low_pafr, high_lvt, or rv_offset (placebo).
  static ConceptSpec named(std::string_view name, std::size_t k);
};

/// The five clinical concepts, in report order.
std::vector<ConceptSpec> default_concepts(std::size_t k);
inline constexpr std::string_view kPlaceboConcept = "rv_offset";

double field_value(const BiomarkerSet& markers, BiomarkerField field);

struct PoolEntry {
  std::uint32_t subject_id = 0;
  BiomarkerSet markers;
};

struct ConceptSets {
  std::vector<std::uint32_t> positives;
  std::vector<std::uint32_t> negatives;
};

/// The first and last k of the pool ordered by concept strength (ties by
/// ascending subject id), so the sets never overlap. Throws DataError if the
/// pool holds fewer than 2k entries.
ConceptSets select_concept_sets(std::span<const PoolEntry> pool, const ConceptSpec& spec);

/// Where activations are read: the designated classifier layer, the
/// frame-major concatenation of per-frame latent means (T*d), or their
/// time average (d).
enum class Layer { cav, latent, latent_mean };
std::string_view layer_name(Layer layer);
Layer parse_layer(std::string_view name);
std::size_t layer_width(const model::Model& model, Layer layer);

struct ActivationRecord {
  std::uint32_t subject_id = 0;
  Layer layer = Layer::cav;
  Eigen::VectorXd z;
};

/// Inference-mode activations (encoder means, no sampling).
ActivationRecord record_activation(const model::Model& model, const SegSequence& seq, Layer layer);
std::vector<ActivationRecord> record_activations(const model::Model& model, std::span<const SegSequence> subjects,
                                                 Layer layer);

struct FitConfig {
  double l2 = 1e-3;
  double gradient_tolerance = 1e-6;
  std::size_t max_iterations = 100000;
};

struct ConceptVector {
  std::string name;
  Layer layer = Layer::cav;
  Eigen::VectorXd direction;
  /// Accuracy on the held-out fifth (every fifth entry of each set).
  double accuracy = 0.0;
  std::size_t iterations = 0;
};

/// L2-regularized logistic regression by full-batch gradient descent with
/// step 1/L. The unit normal points toward the positives. Swapping the two
/// sets negates the result exactly. Throws DegenerateError when no
/// separating direction exists (e.g. identical sets).
ConceptVector train_cav(std::span<const Eigen::VectorXd> positives, std::span<const Eigen::VectorXd> negatives,
                        const FitConfig& config = {});

/// d logit / d activations at `layer`, inference mode.
Eigen::VectorXd logit_gradient(const model::Model& model, const SegSequence& seq, Layer layer);

/// Directional derivative of the class logit along the concept vector.
double sensitivity(const model::Model& model, const SegSequence& seq, const ConceptVector& cv);

struct SensitivityReport {
  std::vector<std::uint32_t> subject_ids;
  std::vector<double> dots;
  /// Share of strictly positive dot products.
  double fraction_positive = 0.0;
  double mean = 0.0;
};

SensitivityReport aggregate_sensitivity(const model::Model& model, std::span<const SegSequence> subjects,
                                        const ConceptVector& cv);

/// `concept,layer,dim,accuracy` header, then per vector one row followed by
/// `dim` component lines.
void write_cavs(const std::filesystem::path& path, std::span<const ConceptVector> cavs);
std::vector<ConceptVector> read_cavs(const std::filesystem::path& path);

/// `subject_id,dot` rows, then a `fraction_positive,mean` summary.
std::string format_report(const SensitivityReport& report);

}  // namespace cinexai::cav

#pragma once

#include <span>

#include "cinexai/types.hpp"

namespace cinexai::metrics {

/// Dice over foreground classes {1, 2, 3}, averaged over the classes present
/// in either frame, then over frames. A frame pair with no foreground at all
/// scores 1. Throws ParameterError on shape or length mismatch.
double dice(std::span<const LabelFrame> a, std::span<const LabelFrame> b);

/// Mann-Whitney AUC: P(score+ > score-) + 0.5 P(tie). Throws MetricError
/// unless both classes are present and every score is a number.
double auc(std::span<const double> scores, std::span<const int> labels);

}  // namespace cinexai::metrics

#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "cinexai/types.hpp"

namespace cinexai::biomarkers {

/// LV blood-pool volume per frame in summed pixel-area units (each slice
/// weighted 1). `dt` is the frame interval as a fraction of the cycle.
struct VolumeCurve {
  std::vector<double> values;
  double dt = 0.0;

  std::size_t size() const { return values.size(); }
};

struct CycleLandmarks {
  std::size_t ed_frame = 0;
  std::size_t es_frame = 0;
  /// Onset of the atrial contribution on the filling limb, if detected.
  std::optional<std::size_t> ac_frame;
};

struct Rates {
  double per = 0.0;
  double pfr = 0.0;
  double pafr = 0.0;
};

struct SmoothingConfig {
  int window = 11;
  int order = 3;

  /// window = min(11, largest odd <= T/2), order = min(3, window - 1).
  static SmoothingConfig defaults_for(std::size_t frames);
};

struct MeasureConfig {
  std::optional<SmoothingConfig> smoothing;
  /// Angle of the first wall segment, degrees counterclockwise from the x-axis.
  double segment_anchor_deg = 0.0;
};

VolumeCurve lv_volume_curve(const SegSequence& seq);

/// Central-point least-squares polynomial smoothing weights (Gram polynomial
/// form). Throws ParameterError for even windows or order >= window.
std::vector<double> savgol_coefficients(int window, int order);

/// Cyclic convolution with savgol_coefficients.
VolumeCurve savgol_smooth(const VolumeCurve& curve, int window, int order);

/// ED = argmax, ES = argmin (earliest on ties); AC = first negative-to-positive
/// change of the second difference on the filling limb after the peak
/// filling rate. Throws LandmarkError on a constant curve.
CycleLandmarks detect_landmarks(const VolumeCurve& smoothed);

/// Peak rates from cyclic central differences, in volume units per cycle.
Rates compute_rates(const VolumeCurve& smoothed, const CycleLandmarks& landmarks);

double ejection_fraction(const VolumeCurve& smoothed, const CycleLandmarks& landmarks);

/// Population variance of fractional thickening over six 60-degree segments
/// per slice, measured by 1-degree ray casting from the ED blood-pool centroid.
double wall_thickening_variance(const SegSequence& seq, const CycleLandmarks& landmarks,
                                double anchor_deg = 0.0);

/// False when |v[0] - v[T-1]| / v[ed] exceeds 10%.
bool qc_volume_closure(const VolumeCurve& curve);
inline constexpr double kClosureTolerance = 0.10;

/// Mean vertical offset (rows) of the RV centroid relative to the LV blood
/// pool centroid; 0 when no RV is present.
double rv_offset_marker(const SegSequence& seq);

/// Full measurement: curve, QC, smoothing, landmarks, EF, rates, LVT.
BiomarkerSet measure(const SegSequence& seq, const MeasureConfig& config = {});

}  // namespace cinexai::biomarkers

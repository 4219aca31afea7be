#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "cinexai/rng.hpp"
#include "cinexai/types.hpp"

namespace cinexai::phantom {

/// Regional contraction deficit. Angles are degrees, counterclockwise as
/// displayed, zero along the image x-axis.
struct HypoArc {
  double start_deg = 0.0;
  double extent_deg = 0.0;
  double severity = 0.0;

  bool contains(double angle_deg) const;
};

/// Generative parameters of one synthetic subject.
///
/// Cycle timing is expressed in fractions of the cycle: ejection runs over
/// [0, es_fraction], rapid filling follows, then a flat diastasis of
/// `diastasis_fraction`, then an atrial kick over the final
/// `atrial_duration` that returns the volume to its end-diastolic value.
struct PhantomParams {
  double base_radius = 8.0;
  double myo_thickness = 2.5;
  double ef_target = 0.6;
  double es_fraction = 0.35;
  double diastasis_fraction = 0.1;
  double a_wave_fraction = 0.2;
  double atrial_duration = 0.25;
  HypoArc hypo{};
  double rv_offset = 0.0;
  std::array<double, 3> slice_scales{1.0, 0.88, 0.74};
  std::uint64_t seed = 0;

  /// Throws ParameterError on out-of-range fractions or a non-positive
  /// rapid-filling duration.
  void validate() const;
};

/// Analytic normalized LV volume over one cycle, v(0) = v(1) = 1.
class VolumeProfile {
 public:
  /// The end-systolic phase is snapped to the nearest of `frames` samples so
  /// the sampled minimum equals 1 - ef_target exactly.
  VolumeProfile(const PhantomParams& params, int frames);

  /// Value at cycle phase s in [0, 1].
  double value(double s) const;
  /// dv/ds in normalized volume per cycle.
  double derivative(double s) const;

  double es_phase() const { return es_; }
  double rapid_end_phase() const { return es_ + rapid_; }
  double atrial_start_phase() const { return 1.0 - atrial_; }
  int es_frame() const { return es_frame_; }
  int frames() const { return frames_; }

  /// Peak |dv/ds| in each phase (normalized volume per cycle).
  double peak_ejection_rate() const;
  double peak_filling_rate() const;
  double peak_atrial_rate() const;

  /// v(t / frames) for t = 0 .. frames-1.
  std::vector<double> sample() const;

 private:
  double ef_;
  double es_;
  double rapid_;
  double diastasis_;
  double atrial_;
  double a_wave_;
  int frames_;
  int es_frame_;
};

/// Samples the analytic profile at T frames. Requires T >= 8.
std::vector<double> synthesize_volume_profile(const PhantomParams& params, int frames);

struct Point {
  double x = 0.0;
  double y = 0.0;
};

/// Right-ventricle crescent: disc of `radius` about `center`, minus the
/// disc of `exclusion_radius` about the LV center. Absent when radius <= 0.
struct RvSpec {
  Point center{};
  double radius = 0.0;
  double exclusion_radius = 0.0;
};

using RadialFunction = std::function<double(double angle_deg)>;

/// Renders one slice plane. Pixel (col, row) has center (col + 0.5, row + 0.5);
/// its angle is measured counterclockwise as displayed.
void rasterize_slice(const RadialFunction& radius_by_angle, const RadialFunction& thickness_by_angle,
                     const RvSpec& rv, Point center, int width, int height,
                     std::span<std::uint8_t> plane);

/// Single-slice frame with constant myocardial thickness.
LabelFrame rasterize_frame(const RadialFunction& radius_by_angle, double myo_thickness,
                           const RvSpec& rv, Point center, int width, int height);

struct Subject {
  SegSequence sequence;
  BiomarkerSet truth;
};

/// Renders a full cycle. Blood-pool radius follows sqrt(v(t)); the
/// hypokinetic arc keeps (1 - severity) of the normal excursion and the
/// remaining wall compensates so the pool area still tracks v(t). The
/// myocardium conserves area along every ray.
Subject generate_subject(const PhantomParams& params, int frames, FrameShape shape,
                         std::uint32_t subject_id = 0,
                         DiseaseLabel label = DiseaseLabel::unknown);

/// Default geometry (radii, LV center, RV placement) for a frame size.
struct Geometry {
  double scale = 1.0;
  Point lv_center{};
};
Geometry default_geometry(FrameShape shape);

/// Parameter shifts applied to diseased subjects.
struct DiseaseEffect {
  double ef_shift = 0.15;
  double a_wave_shift = 0.15;
  double severity_min = 0.5;
  double severity_max = 0.9;
  double arc_min_deg = 90.0;
  double arc_max_deg = 150.0;
};

struct CohortConfig {
  std::size_t n = 0;
  double prevalence = 0.25;
  DiseaseEffect disease{};
  std::uint64_t seed = 7;
  int frames = 20;
  FrameShape shape{};
  /// Worker threads for rendering; results do not depend on it.
  unsigned threads = 0;
  /// Subject ids are first_id, first_id + 1, ...
  std::uint32_t first_id = 0;
};

struct Cohort {
  std::vector<Subject> subjects;
  std::vector<PhantomParams> params;
};

/// Healthy-range parameters jittered from `rng`, scaled to `shape`.
PhantomParams sample_healthy_params(Rng& rng, FrameShape shape);
void apply_disease(PhantomParams& params, const DiseaseEffect& effect, Rng& rng);

/// Half-width of the healthy ejection-fraction jitter around its center.
inline constexpr double kEfJitter = 0.075;
inline constexpr double kHealthyEfCenter = 0.625;

Cohort generate_cohort(const CohortConfig& config);

}  // namespace cinexai::phantom

#include "cinexai/biomarkers.hpp"

#include <algorithm>
#include <array>
#include <limits>
#include <cmath>
#include <numbers>
#include <string>

#include "cinexai/errors.hpp"

namespace cinexai::biomarkers {

namespace {

std::size_t wrap(std::ptrdiff_t i, std::size_t n) {
  const auto m = static_cast<std::ptrdiff_t>(n);
  return static_cast<std::size_t>(((i % m) + m) % m);
}

// Visits indices from `first` to `last` inclusive, stepping forward cyclically.
template <typename Fn>
void for_cyclic(std::size_t first, std::size_t last, std::size_t n, Fn&& fn) {
  for (std::size_t i = first;; i = (i + 1) % n) {
    fn(i);
    if (i == last) break;
  }
}

double central_difference(const std::vector<double>& v, std::size_t t) {
  const std::size_t n = v.size();
  return 0.5 * (v[wrap(static_cast<std::ptrdiff_t>(t) + 1, n)] - v[wrap(static_cast<std::ptrdiff_t>(t) - 1, n)]);
}

double second_difference(const std::vector<double>& v, std::size_t t) {
  const std::size_t n = v.size();
  return v[wrap(static_cast<std::ptrdiff_t>(t) + 1, n)] - 2.0 * v[t] + v[wrap(static_cast<std::ptrdiff_t>(t) - 1, n)];
}

// Falling factorial a (a-1) ... (a-b+1).
double falling_factorial(int a, int b) {
  double out = 1.0;
  for (int j = a - b + 1; j <= a; ++j) out *= j;
  return out;
}

// Gram polynomial of degree k on the 2m+1 points -m..m, evaluated at i.
double gram_polynomial(int i, int m, int k) {
  double prev = 0.0;
  double curr = 1.0;
  for (int j = 1; j <= k; ++j) {
    const double next = (4.0 * j - 2.0) / (j * (2.0 * m - j + 1.0)) * i * curr -
                        ((j - 1.0) * (2.0 * m + j)) / (j * (2.0 * m - j + 1.0)) * prev;
    prev = curr;
    curr = next;
  }
  return curr;
}

}  // namespace

SmoothingConfig SmoothingConfig::defaults_for(std::size_t frames) {
  int largest_odd = static_cast<int>(frames / 2);
  if (largest_odd % 2 == 0) --largest_odd;
  const int window = std::max(1, std::min(11, largest_odd));
  return SmoothingConfig{window, std::min(3, window - 1)};
}

VolumeCurve lv_volume_curve(const SegSequence& seq) {
  if (seq.frames.empty()) throw ParameterError("empty sequence");
  VolumeCurve curve;
  curve.dt = 1.0 / static_cast<double>(seq.frames.size());
  curve.values.reserve(seq.frames.size());
  for (std::size_t t = 0; t < seq.frames.size(); ++t) {
    const auto pixels = seq.frames[t].count(kBloodPool);
    if (pixels == 0) throw DegenerateError("frame " + std::to_string(t) + " has no blood-pool pixels");
    curve.values.push_back(static_cast<double>(pixels));
  }
  return curve;
}

std::vector<double> savgol_coefficients(int window, int order) {
  if (window < 1 || window % 2 == 0) throw ParameterError("Savitzky-Golay window must be odd and positive");
  if (order < 0 || order >= window) throw ParameterError("Savitzky-Golay order must satisfy 0 <= order < window");
  const int m = window / 2;
  std::vector<double> weights(static_cast<std::size_t>(window));
  for (int i = -m; i <= m; ++i) {
    double w = 0.0;
    for (int k = 0; k <= order; ++k) {
      w += (2.0 * k + 1.0) * falling_factorial(2 * m, k) / falling_factorial(2 * m + k + 1, k + 1) *
           gram_polynomial(i, m, k) * gram_polynomial(0, m, k);
    }
    weights[static_cast<std::size_t>(i + m)] = w;
  }
  return weights;
}

VolumeCurve savgol_smooth(const VolumeCurve& curve, int window, int order) {
  if (curve.size() < static_cast<std::size_t>(std::max(window, 1)))
    throw ParameterError("curve shorter than the smoothing window");
  const auto weights = savgol_coefficients(window, order);
  const int m = window / 2;
  const std::size_t n = curve.size();
  VolumeCurve out{std::vector<double>(n, 0.0), curve.dt};
  for (std::size_t t = 0; t < n; ++t) {
    double acc = 0.0;
    for (int j = -m; j <= m; ++j)
      acc += weights[static_cast<std::size_t>(j + m)] * curve.values[wrap(static_cast<std::ptrdiff_t>(t) + j, n)];
    out.values[t] = acc;
  }
  return out;
}

CycleLandmarks detect_landmarks(const VolumeCurve& smoothed) {
  const auto& v = smoothed.values;
  if (v.size() < 3) throw LandmarkError("curve too short for landmark detection");
  const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  if (*hi - *lo <= 0.0) throw LandmarkError("constant volume curve has no cycle landmarks");

  CycleLandmarks lm;
  lm.ed_frame = static_cast<std::size_t>(std::distance(v.begin(), hi));
  lm.es_frame = static_cast<std::size_t>(std::distance(v.begin(), lo));
  const std::size_t n = v.size();

  // Interior of the filling limb: (es, ed) cyclically.
  const std::size_t first = (lm.es_frame + 1) % n;
  if (first == lm.ed_frame) return lm;
  const std::size_t last = wrap(static_cast<std::ptrdiff_t>(lm.ed_frame) - 1, n);

  std::size_t peak = first;
  double peak_rate = -std::numeric_limits<double>::infinity();
  for_cyclic(first, last, n, [&](std::size_t t) {
    const double g = central_difference(v, t);
    if (g > peak_rate) {
      peak_rate = g;
      peak = t;
    }
  });

  const double zero_tol = 1e-9 * (*hi - *lo);
  int previous_sign = 0;
  if (peak == last) return lm;
  for_cyclic((peak + 1) % n, last, n, [&](std::size_t t) {
    if (lm.ac_frame) return;
    const double d2 = second_difference(v, t);
    const int sign = d2 > zero_tol ? 1 : (d2 < -zero_tol ? -1 : 0);
    if (sign == 0) return;
    if (previous_sign < 0 && sign > 0) lm.ac_frame = t;
    previous_sign = sign;
  });
  return lm;
}

Rates compute_rates(const VolumeCurve& smoothed, const CycleLandmarks& lm) {
  const auto& v = smoothed.values;
  const std::size_t n = v.size();
  if (lm.ed_frame >= n || lm.es_frame >= n || lm.ed_frame == lm.es_frame)
    throw LandmarkError("invalid cycle landmarks");
  const double per_cycle = static_cast<double>(n);
  Rates r;
  for_cyclic(lm.ed_frame, lm.es_frame, n,
             [&](std::size_t t) { r.per = std::max(r.per, -central_difference(v, t) * per_cycle); });

  const std::size_t fill_first = (lm.es_frame + 1) % n;
  if (fill_first == lm.ed_frame) return r;
  const std::size_t before_ed = wrap(static_cast<std::ptrdiff_t>(lm.ed_frame) - 1, n);
  const std::size_t rapid_last = lm.ac_frame.value_or(before_ed);
  for_cyclic(fill_first, rapid_last, n,
             [&](std::size_t t) { r.pfr = std::max(r.pfr, central_difference(v, t) * per_cycle); });
  if (lm.ac_frame && *lm.ac_frame != before_ed) {
    for_cyclic((*lm.ac_frame + 1) % n, before_ed, n,
               [&](std::size_t t) { r.pafr = std::max(r.pafr, central_difference(v, t) * per_cycle); });
  }
  return r;
}

double ejection_fraction(const VolumeCurve& smoothed, const CycleLandmarks& lm) {
  const double v_ed = smoothed.values.at(lm.ed_frame);
  const double v_es = smoothed.values.at(lm.es_frame);
  if (v_ed <= 0.0) throw DegenerateError("end-diastolic volume is zero");
  return (v_ed - v_es) / v_ed;
}

namespace {

struct Centroid {
  double x = 0.0;
  double y = 0.0;
  bool valid = false;
};

Centroid label_centroid(const LabelFrame& frame, int slice, std::uint8_t label) {
  double sx = 0.0;
  double sy = 0.0;
  std::size_t count = 0;
  for (int row = 0; row < frame.shape.height; ++row) {
    for (int col = 0; col < frame.shape.width; ++col) {
      if (frame.at(slice, row, col) != label) continue;
      sx += col + 0.5;
      sy += row + 0.5;
      ++count;
    }
  }
  if (count == 0) return {};
  return {sx / static_cast<double>(count), sy / static_cast<double>(count), true};
}

constexpr double kRayStep = 0.02;

// Radial extent of myocardium along one ray, or a negative value if the ray
// never meets myocardium.
double ray_thickness(const LabelFrame& frame, int slice, Centroid c, double angle_deg) {
  const double rad = angle_deg * std::numbers::pi / 180.0;
  const double dx = std::cos(rad);
  const double dy = -std::sin(rad);
  double first = -1.0;
  double last = -1.0;
  for (double r = 0.0;; r += kRayStep) {
    const double x = c.x + r * dx;
    const double y = c.y + r * dy;
    if (x < 0.0 || y < 0.0 || x >= frame.shape.width || y >= frame.shape.height) break;
    if (frame.at(slice, static_cast<int>(y), static_cast<int>(x)) == kMyocardium) {
      if (first < 0.0) first = r;
      last = r;
    }
  }
  return first < 0.0 ? -1.0 : last - first + kRayStep;
}

// Mean ray thickness per 60-degree segment; negative where no ray hit.
std::array<double, 6> segment_thickness(const LabelFrame& frame, int slice, Centroid c, double anchor_deg) {
  std::array<double, 6> out{};
  for (int seg = 0; seg < 6; ++seg) {
    double sum = 0.0;
    int hits = 0;
    for (int k = 0; k < 60; ++k) {
      const double th = ray_thickness(frame, slice, c, anchor_deg + seg * 60 + k);
      if (th < 0.0) continue;
      sum += th;
      ++hits;
    }
    out[static_cast<std::size_t>(seg)] = hits > 0 ? sum / hits : -1.0;
  }
  return out;
}

}  // namespace

double wall_thickening_variance(const SegSequence& seq, const CycleLandmarks& lm, double anchor_deg) {
  const auto& ed = seq.frames.at(lm.ed_frame);
  const auto& es = seq.frames.at(lm.es_frame);
  std::vector<double> thickening;
  for (int s = 0; s < ed.shape.slices; ++s) {
    const Centroid c = label_centroid(ed, s, kBloodPool);
    if (!c.valid) continue;
    const auto th_ed = segment_thickness(ed, s, c, anchor_deg);
    const auto th_es = segment_thickness(es, s, c, anchor_deg);
    for (std::size_t seg = 0; seg < 6; ++seg) {
      if (th_ed[seg] <= 0.0 || th_es[seg] <= 0.0) continue;
      thickening.push_back((th_es[seg] - th_ed[seg]) / th_ed[seg]);
    }
  }
  if (thickening.empty()) throw DegenerateError("no wall segment contains myocardium");
  double mean = 0.0;
  for (double f : thickening) mean += f;
  mean /= static_cast<double>(thickening.size());
  double var = 0.0;
  for (double f : thickening) var += (f - mean) * (f - mean);
  return var / static_cast<double>(thickening.size());
}

bool qc_volume_closure(const VolumeCurve& curve) {
  if (curve.values.empty()) throw ParameterError("empty volume curve");
  const double v_ed = *std::max_element(curve.values.begin(), curve.values.end());
  if (v_ed <= 0.0) return false;
  return std::abs(curve.values.front() - curve.values.back()) / v_ed <= kClosureTolerance;
}

double rv_offset_marker(const SegSequence& seq) {
  double sum = 0.0;
  std::size_t count = 0;
  for (const auto& frame : seq.frames) {
    for (int s = 0; s < frame.shape.slices; ++s) {
      const Centroid lv = label_centroid(frame, s, kBloodPool);
      const Centroid rv = label_centroid(frame, s, kRightVentricle);
      if (!lv.valid || !rv.valid) continue;
      sum += rv.y - lv.y;
      ++count;
    }
  }
  return count == 0 ? 0.0 : sum / static_cast<double>(count);
}

BiomarkerSet measure(const SegSequence& seq, const MeasureConfig& config) {
  const VolumeCurve raw = lv_volume_curve(seq);
  const SmoothingConfig sg = config.smoothing.value_or(SmoothingConfig::defaults_for(raw.size()));
  const VolumeCurve smooth = savgol_smooth(raw, sg.window, sg.order);
  const CycleLandmarks lm = detect_landmarks(smooth);
  const Rates rates = compute_rates(smooth, lm);

  BiomarkerSet out;
  out.qc_pass = qc_volume_closure(raw);
  out.ef = ejection_fraction(smooth, lm);
  out.per = rates.per;
  out.pfr = rates.pfr;
  out.pafr = rates.pafr;
  out.lvt = wall_thickening_variance(seq, lm, config.segment_anchor_deg);
  out.rv_offset = rv_offset_marker(seq);
  return out;
}

}  // namespace cinexai::biomarkers

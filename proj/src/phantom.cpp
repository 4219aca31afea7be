#include "cinexai/phantom.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numbers>
#include <string>
#include <thread>

#include "cinexai/errors.hpp"

namespace cinexai {

std::size_t LabelFrame::count(std::uint8_t label) const {
  return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), label));
}

void SegSequence::validate() const {
  if (frames.size() < 3) throw ParameterError("sequence needs at least 3 frames");
  const FrameShape s = frames.front().shape;
  for (const auto& f : frames) {
    if (f.shape != s || f.labels.size() != s.voxels())
      throw ParameterError("frames of a sequence must share one shape");
  }
}

}  // namespace cinexai

namespace cinexai::phantom {

namespace {

constexpr double kPi = std::numbers::pi;

double wrap_degrees(double a) {
  a = std::fmod(a, 360.0);
  return a < 0.0 ? a + 360.0 : a;
}

// Half-cosine ramp from 0 to 1 over [0, 1] and its derivative.
double ramp(double u) { return 0.5 * (1.0 - std::cos(kPi * u)); }
double ramp_slope(double u) { return 0.5 * kPi * std::sin(kPi * u); }

void require(bool ok, const char* what) {
  if (!ok) throw ParameterError(what);
}

// Solves (1-f) x^2 + f (s + (1-s) x)^2 = v for the normal-wall radius ratio x.
double compensated_ratio(double volume, double arc_fraction, double severity) {
  const double f = arc_fraction;
  const double s = severity;
  if (f <= 0.0 || s <= 0.0) return std::sqrt(volume);
  const double a = (1.0 - f) + f * (1.0 - s) * (1.0 - s);
  const double b = 2.0 * f * s * (1.0 - s);
  const double c = f * s * s - volume;
  const double disc = b * b - 4.0 * a * c;
  if (disc < 0.0) throw ParameterError("hypokinetic arc too severe for the requested ejection fraction");
  const double x = (-b + std::sqrt(disc)) / (2.0 * a);
  if (x <= 0.1) throw ParameterError("hypokinetic arc too severe for the requested ejection fraction");
  return x;
}

double outer_radius(double inner, double inner_ed, double outer_ed) {
  return std::sqrt(inner * inner + outer_ed * outer_ed - inner_ed * inner_ed);
}

}  // namespace

bool HypoArc::contains(double angle_deg) const {
  if (severity <= 0.0 || extent_deg <= 0.0) return false;
  return wrap_degrees(angle_deg - start_deg) < extent_deg;
}

void PhantomParams::validate() const {
  require(base_radius > 0.0, "base_radius must be positive");
  require(myo_thickness >= 0.0, "myo_thickness must be non-negative");
  require(ef_target > 0.0 && ef_target < 1.0, "ef_target must lie in (0, 1)");
  require(es_fraction > 0.0 && es_fraction < 1.0, "es_fraction must lie in (0, 1)");
  require(diastasis_fraction >= 0.0 && diastasis_fraction < 1.0, "diastasis_fraction must lie in [0, 1)");
  require(a_wave_fraction >= 0.0 && a_wave_fraction < 1.0, "a_wave_fraction must lie in [0, 1)");
  require(atrial_duration > 0.0 && atrial_duration < 1.0, "atrial_duration must lie in (0, 1)");
  require(hypo.severity >= 0.0 && hypo.severity <= 1.0, "hypokinesia severity must lie in [0, 1]");
  require(hypo.extent_deg >= 0.0 && hypo.extent_deg < 360.0, "hypokinetic arc must be shorter than 360 degrees");
  for (double s : slice_scales) require(s > 0.0, "slice scales must be positive");
  require(1.0 - es_fraction - diastasis_fraction - atrial_duration > 0.0,
          "cycle phases leave no room for rapid filling");
}

VolumeProfile::VolumeProfile(const PhantomParams& params, int frames) : frames_(frames) {
  params.validate();
  require(frames >= 8, "volume profile needs at least 8 frames");
  es_frame_ = std::clamp(static_cast<int>(std::lround(params.es_fraction * frames)), 1, frames - 2);
  ef_ = params.ef_target;
  es_ = static_cast<double>(es_frame_) / frames;
  diastasis_ = params.diastasis_fraction;
  atrial_ = params.atrial_duration;
  a_wave_ = params.a_wave_fraction;
  rapid_ = 1.0 - es_ - diastasis_ - atrial_;
  require(rapid_ > 0.0, "cycle phases leave no room for rapid filling");
}

double VolumeProfile::value(double s) const {
  if (s <= es_) return 1.0 - ef_ * ramp(s / es_);
  if (s <= es_ + rapid_) return 1.0 - ef_ + (1.0 - a_wave_) * ef_ * ramp((s - es_) / rapid_);
  const double atrial_start = 1.0 - atrial_;
  if (s <= atrial_start) return 1.0 - a_wave_ * ef_;
  return 1.0 - a_wave_ * ef_ + a_wave_ * ef_ * ramp((std::min(s, 1.0) - atrial_start) / atrial_);
}

double VolumeProfile::derivative(double s) const {
  if (s <= es_) return -ef_ * ramp_slope(s / es_) / es_;
  if (s <= es_ + rapid_) return (1.0 - a_wave_) * ef_ * ramp_slope((s - es_) / rapid_) / rapid_;
  const double atrial_start = 1.0 - atrial_;
  if (s <= atrial_start) return 0.0;
  return a_wave_ * ef_ * ramp_slope((std::min(s, 1.0) - atrial_start) / atrial_) / atrial_;
}

double VolumeProfile::peak_ejection_rate() const { return ef_ * 0.5 * kPi / es_; }
double VolumeProfile::peak_filling_rate() const { return (1.0 - a_wave_) * ef_ * 0.5 * kPi / rapid_; }
double VolumeProfile::peak_atrial_rate() const { return a_wave_ * ef_ * 0.5 * kPi / atrial_; }

std::vector<double> VolumeProfile::sample() const {
  std::vector<double> v(static_cast<std::size_t>(frames_));
  for (int t = 0; t < frames_; ++t) v[static_cast<std::size_t>(t)] = value(static_cast<double>(t) / frames_);
  return v;
}

std::vector<double> synthesize_volume_profile(const PhantomParams& params, int frames) {
  return VolumeProfile(params, frames).sample();
}

void rasterize_slice(const RadialFunction& radius_by_angle, const RadialFunction& thickness_by_angle,
                     const RvSpec& rv, Point center, int width, int height,
                     std::span<std::uint8_t> plane) {
  require(width > 0 && height > 0, "frame dimensions must be positive");
  require(plane.size() == static_cast<std::size_t>(width) * height, "plane size does not match dimensions");
  double extent = 0.0;
  for (int deg = 0; deg < 360; ++deg) {
    const double r = radius_by_angle(deg);
    const double th = thickness_by_angle(deg);
    require(r > 0.0 && th >= 0.0, "radii must be positive");
    extent = std::max(extent, r + th);
  }
  require(center.x - extent >= 0.0 && center.x + extent <= width && center.y - extent >= 0.0 &&
              center.y + extent <= height,
          "LV geometry exceeds the frame");

  for (int row = 0; row < height; ++row) {
    for (int col = 0; col < width; ++col) {
      const double dx = col + 0.5 - center.x;
      const double dy = row + 0.5 - center.y;
      const double dist = std::hypot(dx, dy);
      const double angle = wrap_degrees(std::atan2(-dy, dx) * 180.0 / kPi);
      const double r = radius_by_angle(angle);
      std::uint8_t label = kBackground;
      if (dist < r) {
        label = kBloodPool;
      } else if (dist < r + thickness_by_angle(angle)) {
        label = kMyocardium;
      } else if (rv.radius > 0.0 && dist >= rv.exclusion_radius &&
                 std::hypot(col + 0.5 - rv.center.x, row + 0.5 - rv.center.y) < rv.radius) {
        label = kRightVentricle;
      }
      plane[static_cast<std::size_t>(row) * width + col] = label;
    }
  }
}

LabelFrame rasterize_frame(const RadialFunction& radius_by_angle, double myo_thickness, const RvSpec& rv,
                           Point center, int width, int height) {
  LabelFrame frame(FrameShape{width, height, 1});
  rasterize_slice(radius_by_angle, [myo_thickness](double) { return myo_thickness; }, rv, center, width,
                  height, frame.plane(0));
  return frame;
}

Geometry default_geometry(FrameShape shape) {
  const double scale = std::min(shape.width, shape.height) / 32.0;
  return Geometry{scale, Point{0.6 * shape.width, 0.5 * shape.height}};
}

namespace {

struct SliceState {
  double r_ed = 0.0;
  double outer_ed = 0.0;
  double rv_radius = 0.0;
};

// Thickness along each of 360 rays at cycle volume v, per slice.
double segment_thickness(const PhantomParams& p, const SliceState& s, double volume, int first_deg) {
  const double arc_fraction = p.hypo.severity > 0.0 ? p.hypo.extent_deg / 360.0 : 0.0;
  const double x = compensated_ratio(volume, arc_fraction, p.hypo.severity);
  const double r_normal = x * s.r_ed;
  const double r_hypo = s.r_ed - (1.0 - p.hypo.severity) * (s.r_ed - r_normal);
  double sum = 0.0;
  for (int k = 0; k < 60; ++k) {
    const double r = p.hypo.contains(first_deg + k) ? r_hypo : r_normal;
    sum += outer_radius(r, s.r_ed, s.outer_ed) - r;
  }
  return sum / 60.0;
}

}  // namespace

Subject generate_subject(const PhantomParams& params, int frames, FrameShape shape, std::uint32_t subject_id,
                         DiseaseLabel label) {
  const VolumeProfile profile(params, frames);
  require(shape.slices >= 1 && shape.slices <= 3, "phantom supports 1 to 3 slices");
  const Geometry geometry = default_geometry(shape);

  Rng rng(params.seed);
  const Point lv_center{geometry.lv_center.x + rng.uniform(-0.5, 0.5),
                        geometry.lv_center.y + rng.uniform(-0.5, 0.5)};
  const double arc_fraction = params.hypo.severity > 0.0 ? params.hypo.extent_deg / 360.0 : 0.0;

  std::vector<SliceState> slices(static_cast<std::size_t>(shape.slices));
  for (int s = 0; s < shape.slices; ++s) {
    auto& st = slices[static_cast<std::size_t>(s)];
    st.r_ed = params.base_radius * params.slice_scales[static_cast<std::size_t>(s)];
    st.outer_ed = st.r_ed + params.myo_thickness;
    st.rv_radius = 5.0 * geometry.scale * params.slice_scales[static_cast<std::size_t>(s)];
    require(lv_center.x - st.outer_ed >= 0.0 && lv_center.x + st.outer_ed <= shape.width &&
                lv_center.y - st.outer_ed >= 0.0 && lv_center.y + st.outer_ed <= shape.height,
            "LV geometry exceeds the frame");
  }

  Subject out;
  out.sequence.subject_id = subject_id;
  out.sequence.label = label;
  out.sequence.frames.reserve(static_cast<std::size_t>(frames));
  for (int t = 0; t < frames; ++t) {
    const double v = profile.value(static_cast<double>(t) / frames);
    const double x = compensated_ratio(v, arc_fraction, params.hypo.severity);
    LabelFrame frame(shape);
    for (int s = 0; s < shape.slices; ++s) {
      const auto& st = slices[static_cast<std::size_t>(s)];
      const double r_normal = x * st.r_ed;
      const double r_hypo = st.r_ed - (1.0 - params.hypo.severity) * (st.r_ed - r_normal);
      auto radius = [&](double a) { return params.hypo.contains(a) ? r_hypo : r_normal; };
      auto thickness = [&](double a) {
        const double r = radius(a);
        return outer_radius(r, st.r_ed, st.outer_ed) - r;
      };
      const double exclusion = st.outer_ed + 1.0;
      const double rv_radius = st.rv_radius * (0.9 + 0.1 * v);
      RvSpec rv{Point{lv_center.x - exclusion - 0.2 * st.rv_radius, lv_center.y + params.rv_offset},
                rv_radius, exclusion};
      rasterize_slice(radius, thickness, rv, lv_center, shape.width, shape.height, frame.plane(s));
    }
    out.sequence.frames.push_back(std::move(frame));
  }

  double v_ed = 0.0;
  for (const auto& st : slices) v_ed += kPi * st.r_ed * st.r_ed;
  out.truth.ef = params.ef_target;
  out.truth.per = v_ed * profile.peak_ejection_rate();
  out.truth.pfr = v_ed * profile.peak_filling_rate();
  out.truth.pafr = params.a_wave_fraction > 0.0 ? v_ed * profile.peak_atrial_rate() : 0.0;
  out.truth.rv_offset = params.rv_offset;
  out.truth.qc_pass = true;

  const double v_es = profile.value(profile.es_phase());
  std::vector<double> thickening;
  for (const auto& st : slices) {
    for (int seg = 0; seg < 6; ++seg) {
      const double ed = segment_thickness(params, st, 1.0, seg * 60);
      const double es = segment_thickness(params, st, v_es, seg * 60);
      thickening.push_back((es - ed) / ed);
    }
  }
  double mean = 0.0;
  for (double f : thickening) mean += f;
  mean /= static_cast<double>(thickening.size());
  double var = 0.0;
  for (double f : thickening) var += (f - mean) * (f - mean);
  out.truth.lvt = var / static_cast<double>(thickening.size());
  return out;
}

PhantomParams sample_healthy_params(Rng& rng, FrameShape shape) {
  const double k = default_geometry(shape).scale;
  PhantomParams p;
  p.base_radius = 8.0 * k * rng.uniform(0.92, 1.08);
  p.myo_thickness = 2.5 * k * rng.uniform(0.9, 1.1);
  p.ef_target = rng.uniform(kHealthyEfCenter - kEfJitter, kHealthyEfCenter + kEfJitter);
  p.es_fraction = rng.uniform(0.32, 0.38);
  p.diastasis_fraction = rng.uniform(0.08, 0.14);
  p.a_wave_fraction = rng.uniform(0.15, 0.25);
  p.atrial_duration = 0.25;
  p.hypo = HypoArc{rng.uniform(0.0, 360.0), 0.0, 0.0};
  p.rv_offset = rng.uniform(-2.0 * k, 2.0 * k);
  p.seed = rng.next();
  return p;
}

void apply_disease(PhantomParams& params, const DiseaseEffect& effect, Rng& rng) {
  params.ef_target -= effect.ef_shift;
  params.a_wave_fraction += effect.a_wave_shift;
  params.hypo.extent_deg = rng.uniform(effect.arc_min_deg, effect.arc_max_deg);
  params.hypo.severity = rng.uniform(effect.severity_min, effect.severity_max);
}

Cohort generate_cohort(const CohortConfig& config) {
  require(config.n > 0, "cohort must contain at least one subject");
  require(config.prevalence >= 0.0 && config.prevalence <= 1.0, "prevalence must lie in [0, 1]");

  const auto n_diseased =
      static_cast<std::size_t>(std::ceil(config.prevalence * static_cast<double>(config.n) - 1e-9));
  std::vector<std::size_t> order(config.n);
  for (std::size_t i = 0; i < config.n; ++i) order[i] = i;
  Rng assign(derive_seed(config.seed, Stream::disease_assignment));
  for (std::size_t i = config.n - 1; i > 0; --i) {
    const auto j = static_cast<std::size_t>(assign.uniform_int(0, static_cast<std::int64_t>(i)));
    std::swap(order[i], order[j]);
  }
  std::vector<bool> diseased(config.n, false);
  for (std::size_t i = 0; i < n_diseased; ++i) diseased[order[i]] = true;

  Cohort cohort;
  cohort.subjects.resize(config.n);
  cohort.params.resize(config.n);

  auto build = [&](std::size_t i) {
    Rng rng(derive_seed(config.seed, Stream::phantom, i));
    PhantomParams p = sample_healthy_params(rng, config.shape);
    if (diseased[i]) apply_disease(p, config.disease, rng);
    cohort.params[i] = p;
    cohort.subjects[i] =
        generate_subject(p, config.frames, config.shape, config.first_id + static_cast<std::uint32_t>(i),
                         diseased[i] ? DiseaseLabel::diseased : DiseaseLabel::healthy);
  };

  unsigned threads = config.threads == 0 ? std::max(1u, std::thread::hardware_concurrency()) : config.threads;
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, config.n));
  if (threads <= 1) {
    for (std::size_t i = 0; i < config.n; ++i) build(i);
    return cohort;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::atomic<bool> failed{false};
  {
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < threads; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < config.n && !failed; i = next++) {
          try {
            build(i);
          } catch (...) {
            if (!failed.exchange(true)) failure = std::current_exception();
          }
        }
      });
    }
  }
  if (failure) std::rethrow_exception(failure);
  return cohort;
}

}  // namespace cinexai::phantom

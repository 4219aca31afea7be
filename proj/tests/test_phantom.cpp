#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "cinexai/errors.hpp"
#include "cinexai/phantom.hpp"

using namespace cinexai;
using namespace cinexai::phantom;

namespace {

std::size_t pool_pixels(const LabelFrame& f) { return f.count(kBloodPool); }

// Second-difference sign change on the filling limb of the analytic curve.
int analytic_inflection(const std::vector<double>& v, int es) {
  const int T = static_cast<int>(v.size());
  auto at = [&](int t) { return v[static_cast<std::size_t>(((t % T) + T) % T)]; };
  int peak = es;
  double best = -1.0;
  for (int t = es + 1; t < T; ++t) {
    const double rate = at(t + 1) - at(t - 1);
    if (rate > best) {
      best = rate;
      peak = t;
    }
  }
  // Flat stretches have an exactly zero second difference; compare against
  // the last nonzero sign.
  int previous = 0;
  for (int t = peak + 1; t < T - 1; ++t) {
    const double d2 = at(t + 1) - 2 * at(t) + at(t - 1);
    const int sign = d2 > 1e-12 ? 1 : d2 < -1e-12 ? -1 : 0;
    if (sign == 0) continue;
    if (previous < 0 && sign > 0) return t;
    previous = sign;
  }
  return -1;
}

}  // namespace

TEST_CASE("volume profile hits ED and ES values exactly") {
  PhantomParams p;
  p.ef_target = 0.6;
  const auto v = synthesize_volume_profile(p, 50);
  REQUIRE(v.size() == 50);
  CHECK(v[0] == 1.0);
  const auto min_it = std::min_element(v.begin(), v.end());
  CHECK(*min_it == doctest::Approx(0.4).epsilon(1e-12));
  CHECK(std::abs(static_cast<int>(min_it - v.begin()) - 0.35 * 50) <= 1.0);
  for (double x : v) {
    CHECK(x >= 0.4 - 1e-12);
    CHECK(x <= 1.0 + 1e-12);
  }
}

TEST_CASE("volume profile phases are monotone and cyclic") {
  PhantomParams p;
  const VolumeProfile prof(p, 50);
  CHECK(prof.value(1.0) == doctest::Approx(prof.value(0.0)).epsilon(1e-15));
  for (double s = 0.001; s < prof.es_phase(); s += 0.001) CHECK(prof.derivative(s) < 0.0);
  for (double s = prof.es_phase() + 0.001; s < prof.rapid_end_phase(); s += 0.001) CHECK(prof.derivative(s) > 0.0);
  for (double s = prof.atrial_start_phase() + 0.001; s < 1.0; s += 0.001) CHECK(prof.derivative(s) > 0.0);
}

TEST_CASE("no atrial kick gives a non-decreasing filling limb") {
  PhantomParams p;
  p.a_wave_fraction = 0.0;
  const VolumeProfile prof(p, 50);
  const auto v = prof.sample();
  for (int t = prof.es_frame(); t + 1 < 50; ++t) CHECK(v[static_cast<std::size_t>(t + 1)] >= v[static_cast<std::size_t>(t)]);
}

TEST_CASE("filling limb has one interior inflection between rapid filling and atrial kick") {
  PhantomParams p;
  p.ef_target = 0.5;
  p.es_fraction = 0.3;
  p.a_wave_fraction = 0.2;
  const VolumeProfile prof(p, 50);
  const auto v = prof.sample();
  const int ac = analytic_inflection(v, prof.es_frame());
  REQUIRE(ac > 0);
  CHECK(ac / 50.0 >= prof.rapid_end_phase() - 0.04);
  CHECK(ac / 50.0 <= prof.atrial_start_phase() + 0.04);
}

TEST_CASE("profile rejects invalid parameters") {
  PhantomParams p;
  p.ef_target = 1.2;
  CHECK_THROWS_AS(synthesize_volume_profile(p, 20), ParameterError);
  p = {};
  p.es_fraction = 0.8;
  CHECK_THROWS_AS(synthesize_volume_profile(p, 20), ParameterError);
  p = {};
  p.hypo.severity = 1.5;
  CHECK_THROWS_AS(p.validate(), ParameterError);
  CHECK_THROWS_AS(synthesize_volume_profile(PhantomParams{}, 7), ParameterError);
}

TEST_CASE("rasterized disc area is close to the analytic area") {
  const auto f = rasterize_frame([](double) { return 10.0; }, 2.0, RvSpec{}, Point{32, 32}, 64, 64);
  const double area = std::numbers::pi * 100.0;
  CHECK(std::abs(static_cast<double>(pool_pixels(f)) - area) / area < 0.05);
  const double ring = std::numbers::pi * (144.0 - 100.0);
  CHECK(std::abs(static_cast<double>(f.count(kMyocardium)) - ring) / ring < 0.1);
}

TEST_CASE("zero myocardial thickness leaves no myocardium") {
  const auto f = rasterize_frame([](double) { return 9.0; }, 0.0, RvSpec{}, Point{20, 20}, 40, 40);
  CHECK(f.count(kMyocardium) == 0);
  CHECK(f.count(kBloodPool) > 0);
}

TEST_CASE("rotating the radius function by 90 degrees rotates the frame") {
  auto radius = [](double deg) { return 9.0 + 1.5 * std::cos(deg * std::numbers::pi / 90.0 + 0.3); };
  auto turned = [&](double deg) { return radius(deg - 90.0); };
  const auto a = rasterize_frame(radius, 2.5, RvSpec{}, Point{20, 20}, 40, 40);
  const auto b = rasterize_frame(turned, 2.5, RvSpec{}, Point{20, 20}, 40, 40);
  // Counterclockwise quarter-turn as displayed about the frame center.
  LabelFrame r(a.shape);
  for (int row = 0; row < 40; ++row)
    for (int col = 0; col < 40; ++col) r.at(0, 39 - col, row) = a.at(0, row, col);
  std::size_t differing = 0;
  for (std::size_t i = 0; i < r.labels.size(); ++i) differing += r.labels[i] != b.labels[i];
  // Only pixels whose center lies on a boundary to rounding precision may differ.
  CHECK(differing <= 2);
}

TEST_CASE("geometry outside the frame is rejected") {
  CHECK_THROWS_AS(rasterize_frame([](double) { return 15.0; }, 3.0, RvSpec{}, Point{16, 16}, 32, 32), ParameterError);
}

TEST_CASE("label masks partition the frame and RV never overlaps LV") {
  PhantomParams p;
  p.hypo = {30.0, 120.0, 0.7};
  p.rv_offset = 1.5;
  const auto subject = generate_subject(p, 20, FrameShape{32, 32, 1});
  for (const auto& f : subject.sequence.frames) {
    std::size_t total = 0;
    for (int k = 0; k < kLabelCount; ++k) total += f.count(static_cast<std::uint8_t>(k));
    CHECK(total == f.labels.size());
    CHECK(f.count(kRightVentricle) > 0);
    CHECK(f.count(kMyocardium) > 0);
  }
}

TEST_CASE("blood pool is 4-connected in every slice") {
  PhantomParams p;
  p.hypo = {200.0, 140.0, 0.9};
  const auto s = generate_subject(p, 20, FrameShape{80, 80, 3});
  for (const auto& f : s.sequence.frames) {
    for (int sl = 0; sl < 3; ++sl) {
      std::vector<int> seen(f.shape.plane_size(), 0);
      std::vector<std::pair<int, int>> stack;
      std::size_t pool = 0;
      for (int row = 0; row < 80; ++row)
        for (int col = 0; col < 80; ++col)
          if (f.at(sl, row, col) == kBloodPool) {
            ++pool;
            if (stack.empty() && std::all_of(seen.begin(), seen.end(), [](int x) { return x == 0; }))
              stack.emplace_back(row, col);
          }
      std::size_t reached = 0;
      while (!stack.empty()) {
        auto [row, col] = stack.back();
        stack.pop_back();
        if (row < 0 || col < 0 || row >= 80 || col >= 80) continue;
        auto& mark = seen[static_cast<std::size_t>(row * 80 + col)];
        if (mark || f.at(sl, row, col) != kBloodPool) continue;
        mark = 1;
        ++reached;
        stack.insert(stack.end(), {{row + 1, col}, {row - 1, col}, {row, col + 1}, {row, col - 1}});
      }
      CHECK(reached == pool);
    }
  }
}

TEST_CASE("pixel-counted EF and area track the profile") {
  for (double ef : {0.45, 0.6}) {
    PhantomParams p;
    p.ef_target = ef;
    const auto s = generate_subject(p, 50, FrameShape{80, 80, 3}, 1);
    std::vector<double> vol;
    for (const auto& f : s.sequence.frames) vol.push_back(static_cast<double>(pool_pixels(f)));
    const double vmax = *std::max_element(vol.begin(), vol.end());
    const double vmin = *std::min_element(vol.begin(), vol.end());
    CHECK(std::abs((vmax - vmin) / vmax - ef) < 0.03);
    CHECK(vol.front() == vmax);
    CHECK(std::abs(vol.front() - vol.back()) / vmax <= 0.03);
    double analytic = 0.0;
    for (double scale : p.slice_scales) analytic += std::numbers::pi * std::pow(p.base_radius * scale, 2);
    CHECK(std::abs(vol.front() - analytic) / analytic < 0.05);
  }
}

TEST_CASE("ground truth without hypokinesia has zero LVT") {
  PhantomParams p;
  const auto s = generate_subject(p, 20, FrameShape{});
  CHECK(s.truth.lvt == 0.0);
  CHECK(s.truth.ef == p.ef_target);
  p.hypo = {0.0, 120.0, 0.8};
  CHECK(generate_subject(p, 20, FrameShape{}).truth.lvt > 0.0);
}

TEST_CASE("diseased shift lowers the analytic filling rate") {
  PhantomParams healthy;
  PhantomParams diseased = healthy;
  Rng rng(4);
  apply_disease(diseased, DiseaseEffect{}, rng);
  const auto h = generate_subject(healthy, 20, FrameShape{});
  const auto d = generate_subject(diseased, 20, FrameShape{});
  CHECK(d.truth.pfr < h.truth.pfr);
  CHECK(d.truth.ef < h.truth.ef);
}

TEST_CASE("subject generation is deterministic") {
  PhantomParams p;
  p.seed = 99;
  CHECK(generate_subject(p, 20, FrameShape{}).sequence.frames == generate_subject(p, 20, FrameShape{}).sequence.frames);
}

TEST_CASE("cohort labels, counts and thread independence") {
  CohortConfig c;
  c.n = 10;
  c.prevalence = 0.5;
  c.threads = 1;
  const auto a = generate_cohort(c);
  REQUIRE(a.subjects.size() == 10);
  CHECK(std::count_if(a.subjects.begin(), a.subjects.end(),
                      [](const Subject& s) { return s.sequence.label == DiseaseLabel::diseased; }) == 5);
  c.threads = 3;
  const auto b = generate_cohort(c);
  for (std::size_t i = 0; i < 10; ++i) {
    CHECK(a.subjects[i].sequence.frames == b.subjects[i].sequence.frames);
    CHECK(a.subjects[i].sequence.label == b.subjects[i].sequence.label);
  }
  c.n = 0;
  CHECK_THROWS_AS(generate_cohort(c), ParameterError);
  c.n = 5;
  c.prevalence = 1.5;
  CHECK_THROWS_AS(generate_cohort(c), ParameterError);
}

TEST_CASE("prevalence zero keeps every EF in the healthy range") {
  CohortConfig c;
  c.n = 40;
  c.prevalence = 0.0;
  for (const auto& s : generate_cohort(c).subjects) {
    CHECK(s.sequence.label == DiseaseLabel::healthy);
    CHECK(s.truth.ef >= kHealthyEfCenter - kEfJitter);
    CHECK(s.truth.ef <= kHealthyEfCenter + kEfJitter);
  }
}

TEST_CASE("diseased mean EF sits below healthy by at least the shift minus jitter") {
  CohortConfig c;
  c.n = 200;
  const auto cohort = generate_cohort(c);
  double sum[2] = {0, 0};
  int count[2] = {0, 0};
  for (const auto& s : cohort.subjects) {
    const int k = s.sequence.label == DiseaseLabel::diseased ? 1 : 0;
    sum[k] += s.truth.ef;
    ++count[k];
  }
  CHECK(count[1] == 50);
  const double gap = sum[0] / count[0] - sum[1] / count[1];
  CHECK(gap >= DiseaseEffect{}.ef_shift - kEfJitter);
}

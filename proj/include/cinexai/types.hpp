#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace cinexai {

/// Per-pixel class identifiers of a cardiac label map.
enum Label : std::uint8_t {
  kBackground = 0,
  kBloodPool = 1,
  kMyocardium = 2,
  kRightVentricle = 3,
};
inline constexpr int kLabelCount = 4;

enum class DiseaseLabel : std::uint8_t { healthy = 0, diseased = 1, unknown = 255 };

struct FrameShape {
  int width = 32;
  int height = 32;
  int slices = 1;

  std::size_t plane_size() const { return static_cast<std::size_t>(width) * height; }
  std::size_t voxels() const { return plane_size() * static_cast<std::size_t>(slices); }
  friend bool operator==(const FrameShape&, const FrameShape&) = default;
};

/// One time point: `slices` label planes stored slice-major, row-major.
struct LabelFrame {
  FrameShape shape;
  std::vector<std::uint8_t> labels;

  LabelFrame() = default;
  explicit LabelFrame(FrameShape s) : shape(s), labels(s.voxels(), kBackground) {}

  std::uint8_t& at(int slice, int row, int col) { return labels[index(slice, row, col)]; }
  std::uint8_t at(int slice, int row, int col) const { return labels[index(slice, row, col)]; }

  std::span<std::uint8_t> plane(int slice) {
    return {labels.data() + static_cast<std::size_t>(slice) * shape.plane_size(), shape.plane_size()};
  }
  std::span<const std::uint8_t> plane(int slice) const {
    return {labels.data() + static_cast<std::size_t>(slice) * shape.plane_size(), shape.plane_size()};
  }

  std::size_t count(std::uint8_t label) const;

  friend bool operator==(const LabelFrame&, const LabelFrame&) = default;

 private:
  std::size_t index(int slice, int row, int col) const {
    return (static_cast<std::size_t>(slice) * shape.height + row) * shape.width + col;
  }
};

/// A subject's label maps over one cardiac cycle, frame 0 first.
struct SegSequence {
  std::uint32_t subject_id = 0;
  std::vector<LabelFrame> frames;
  DiseaseLabel label = DiseaseLabel::unknown;

  std::size_t length() const { return frames.size(); }
  FrameShape shape() const { return frames.empty() ? FrameShape{} : frames.front().shape; }
  /// Throws ParameterError unless all frames share one shape and T >= 3.
  void validate() const;
};

/// Clinical biomarkers of one subject. Rates are volume units per cycle.
struct BiomarkerSet {
  double ef = 0.0;
  double per = 0.0;
  double pfr = 0.0;
  double pafr = 0.0;
  double lvt = 0.0;
  bool qc_pass = true;
  /// Vertical RV-to-LV centroid displacement in pixels; carries no disease
  /// signal and serves as the placebo concept.
  double rv_offset = 0.0;
};

}  // namespace cinexai

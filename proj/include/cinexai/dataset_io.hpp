#pragma once

#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

#include "cinexai/types.hpp"

namespace cinexai::io {

/// A set of equally shaped subjects, as stored in a CSQ1 file.
struct Dataset {
  FrameShape shape{};
  int frames = 0;
  std::vector<SegSequence> subjects;
};

/// CSQ1 layout (little-endian): "CSQ1", u8 version=1, u16 width, u16 height,
/// u8 slices, u8 n_labels, u16 T, u32 n_subjects; per subject u32 id,
/// u8 label (0, 1, 255), then T*slices*height*width label bytes.
void write_csq1(std::ostream& out, std::span<const SegSequence> subjects);
void write_csq1(const std::filesystem::path& path, std::span<const SegSequence> subjects);
Dataset read_csq1(std::istream& in);
Dataset read_csq1(const std::filesystem::path& path);

struct TruthRow {
  std::uint32_t subject_id = 0;
  BiomarkerSet truth;
  DiseaseLabel label = DiseaseLabel::unknown;
};

/// `subject_id,ef,per,pfr,pafr,lvt,label`
void write_truth_csv(const std::filesystem::path& path, std::span<const TruthRow> rows);

}  // namespace cinexai::io

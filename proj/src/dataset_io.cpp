#include "cinexai/dataset_io.hpp"

#include <fstream>
#include <limits>
#include <sstream>
#include <string>

#include "cinexai/binary.hpp"
#include "cinexai/errors.hpp"
#include "cinexai/text_io.hpp"

namespace cinexai::io {

namespace {

constexpr char kMagic[4] = {'C', 'S', 'Q', '1'};
constexpr std::uint8_t kVersion = 1;

}  // namespace

void write_csq1(std::ostream& out, std::span<const SegSequence> subjects) {
  if (subjects.empty()) throw DataError("refusing to write an empty dataset");
  const FrameShape shape = subjects.front().shape();
  const std::size_t frames = subjects.front().length();
  if (shape.width > 0xFFFF || shape.height > 0xFFFF || shape.slices > 0xFF || frames > 0xFFFF)
    throw ParameterError("dataset dimensions exceed the CSQ1 header fields");
  for (const auto& s : subjects) {
    s.validate();
    if (s.shape() != shape || s.length() != frames) throw DataError("subjects of a dataset must share shape and T");
  }
  out.write(kMagic, 4);
  put_le<std::uint8_t>(out, kVersion);
  put_le<std::uint16_t>(out, static_cast<std::uint16_t>(shape.width));
  put_le<std::uint16_t>(out, static_cast<std::uint16_t>(shape.height));
  put_le<std::uint8_t>(out, static_cast<std::uint8_t>(shape.slices));
  put_le<std::uint8_t>(out, static_cast<std::uint8_t>(kLabelCount));
  put_le<std::uint16_t>(out, static_cast<std::uint16_t>(frames));
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(subjects.size()));
  for (const auto& s : subjects) {
    put_le<std::uint32_t>(out, s.subject_id);
    put_le<std::uint8_t>(out, static_cast<std::uint8_t>(s.label));
    for (const auto& f : s.frames)
      out.write(reinterpret_cast<const char*>(f.labels.data()), static_cast<std::streamsize>(f.labels.size()));
  }
  if (!out) throw DataError("failed writing CSQ1 stream");
}

void write_csq1(const std::filesystem::path& path, std::span<const SegSequence> subjects) {
  std::ostringstream buffer(std::ios::binary);
  write_csq1(buffer, subjects);
  write_text_file(path, buffer.str());
}

Dataset read_csq1(std::istream& in) {
  char magic[4];
  if (!in.read(magic, 4) || std::string_view(magic, 4) != std::string_view(kMagic, 4))
    throw DataError("not a CSQ1 dataset");
  if (get_le<std::uint8_t>(in) != kVersion) throw DataError("unsupported CSQ1 version");
  Dataset ds;
  ds.shape.width = get_le<std::uint16_t>(in);
  ds.shape.height = get_le<std::uint16_t>(in);
  ds.shape.slices = get_le<std::uint8_t>(in);
  const int n_labels = get_le<std::uint8_t>(in);
  ds.frames = get_le<std::uint16_t>(in);
  const std::uint32_t n = get_le<std::uint32_t>(in);
  if (n_labels != kLabelCount) throw DataError("CSQ1 label count must be 4");
  if (ds.shape.width == 0 || ds.shape.height == 0 || ds.shape.slices == 0 || ds.frames < 3)
    throw DataError("CSQ1 header has degenerate dimensions");
  ds.subjects.reserve(n);
  for (std::uint32_t i = 0; i < n; ++i) {
    SegSequence s;
    s.subject_id = get_le<std::uint32_t>(in);
    const auto label = get_le<std::uint8_t>(in);
    if (label != 0 && label != 1 && label != 255) throw DataError("CSQ1 subject label must be 0, 1 or 255");
    s.label = static_cast<DiseaseLabel>(label);
    s.frames.reserve(static_cast<std::size_t>(ds.frames));
    for (int t = 0; t < ds.frames; ++t) {
      LabelFrame f(ds.shape);
      if (!in.read(reinterpret_cast<char*>(f.labels.data()), static_cast<std::streamsize>(f.labels.size())))
        throw DataError("CSQ1 stream truncated");
      for (auto v : f.labels)
        if (v >= kLabelCount) throw DataError("CSQ1 frame holds an invalid label");
      s.frames.push_back(std::move(f));
    }
    ds.subjects.push_back(std::move(s));
  }
  if (in.peek() != std::char_traits<char>::eof()) throw DataError("trailing bytes after CSQ1 payload");
  return ds;
}

Dataset read_csq1(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open dataset " + path.string());
  return read_csq1(in);
}

void write_truth_csv(const std::filesystem::path& path, std::span<const TruthRow> rows) {
  std::string out = "subject_id,ef,per,pfr,pafr,lvt,label\n";
  for (const auto& r : rows) {
    out += std::to_string(r.subject_id) + ',' + format_double(r.truth.ef) + ',' + format_double(r.truth.per) +
           ',' + format_double(r.truth.pfr) + ',' + format_double(r.truth.pafr) + ',' +
           format_double(r.truth.lvt) + ',' + std::to_string(static_cast<int>(r.label)) + '\n';
  }
  write_text_file(path, out);
}

}  // namespace cinexai::io

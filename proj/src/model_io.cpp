#include "cinexai/model_io.hpp"

#include <fstream>
#include <sstream>

#include "cinexai/binary.hpp"
#include "cinexai/errors.hpp"
#include "cinexai/text_io.hpp"

namespace cinexai::io {

namespace {

constexpr char kMagic[4] = {'C', 'M', 'D', 'L'};
constexpr std::uint8_t kVersion = 1;

struct RawLayer {
  std::size_t rows = 0;
  std::size_t cols = 0;
};

// Rebuilds the stack layout from layer shapes and the footer.
model::Architecture infer_architecture(const std::vector<RawLayer>& layers, std::size_t cav_index,
                                       std::size_t latent, std::size_t frames) {
  if (layers.empty()) throw DataError("model file has no layers");
  model::Architecture arch;
  arch.latent_dim = latent;
  arch.frames = frames;
  arch.encoder_hidden.clear();
  arch.decoder_hidden.clear();
  arch.head_hidden.clear();
  arch.post_hidden.clear();

  const std::size_t input = layers[0].cols;
  if (input % kLabelCount != 0) throw DataError("model input width is not a multiple of the label count");
  arch.input_voxels = input / kLabelCount;

  std::size_t i = 0;
  auto chain_ok = [&](std::size_t k) { return k == 0 || layers[k].cols == layers[k - 1].rows; };
  // Encoder ends at the first layer emitting 2d outputs that feeds a d-input layer.
  for (;; ++i) {
    if (i >= layers.size() || !chain_ok(i)) throw DataError("cannot locate encoder output layer");
    if (layers[i].rows == 2 * latent && i + 1 < layers.size() && layers[i + 1].cols == latent) break;
    arch.encoder_hidden.push_back(layers[i].rows);
  }
  ++i;
  // Decoder ends at the layer emitting one logit per voxel and label.
  for (;; ++i) {
    if (i >= layers.size() || (i > 0 && layers[i].cols != (arch.decoder_hidden.empty() ? latent : arch.decoder_hidden.back())))
      throw DataError("cannot locate decoder output layer");
    if (layers[i].rows == input) break;
    arch.decoder_hidden.push_back(layers[i].rows);
  }
  ++i;
  // Head layers consume d (or the previous head width) until the next layer
  // consumes T times the current width.
  std::size_t width = latent;
  while (i < layers.size() && layers[i].cols != frames * width) {
    if (layers[i].cols != width) throw DataError("per-frame head layers do not chain");
    arch.head_hidden.push_back(layers[i].rows);
    width = layers[i].rows;
    ++i;
  }
  const std::size_t post_first = i;
  for (; i < layers.size(); ++i) {
    if (i > post_first && layers[i].cols != layers[i - 1].rows) throw DataError("classifier layers do not chain");
    if (i + 1 < layers.size()) arch.post_hidden.push_back(layers[i].rows);
  }
  if (post_first >= layers.size() || layers.back().rows != 1) throw DataError("classifier must end in one logit");
  if (cav_index < post_first || cav_index + 1 >= layers.size()) throw DataError("CAV layer index out of range");
  arch.cav_position = cav_index - post_first;
  arch.validate();
  return arch;
}

}  // namespace

void write_cmdl(std::ostream& out, const model::Model& model) {
  const auto& layers = model.layers();
  out.write(kMagic, 4);
  put_le<std::uint8_t>(out, kVersion);
  put_le<std::uint16_t>(out, static_cast<std::uint16_t>(layers.size()));
  for (const auto& layer : layers) {
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(layer.weight.rows()));
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(layer.weight.cols()));
    for (Eigen::Index r = 0; r < layer.weight.rows(); ++r)
      for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) put_le<double>(out, layer.weight(r, c));
    for (Eigen::Index r = 0; r < layer.bias.size(); ++r) put_le<double>(out, layer.bias(r));
  }
  const auto& arch = model.architecture();
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(model.cav_layer_index()));
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(arch.latent_dim));
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(arch.frames));
  if (!out) throw DataError("failed writing CMDL stream");
}

void write_cmdl(const std::filesystem::path& path, const model::Model& model) {
  std::ostringstream buffer(std::ios::binary);
  write_cmdl(buffer, model);
  write_text_file(path, buffer.str());
}

model::Model read_cmdl(std::istream& in) {
  char magic[4];
  if (!in.read(magic, 4) || std::string_view(magic, 4) != std::string_view(kMagic, 4))
    throw DataError("not a CMDL model file");
  if (get_le<std::uint8_t>(in) != kVersion) throw DataError("unsupported CMDL version");
  const std::size_t count = get_le<std::uint16_t>(in);
  std::vector<RawLayer> shapes(count);
  std::vector<model::DenseLayer> layers(count);
  for (std::size_t i = 0; i < count; ++i) {
    const auto rows = get_le<std::uint32_t>(in);
    const auto cols = get_le<std::uint32_t>(in);
    if (rows == 0 || cols == 0) throw DataError("CMDL layer with zero extent");
    shapes[i] = {rows, cols};
    auto& layer = layers[i];
    layer.weight.resize(rows, cols);
    layer.bias.resize(rows);
    for (Eigen::Index r = 0; r < layer.weight.rows(); ++r)
      for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) layer.weight(r, c) = get_le<double>(in);
    for (Eigen::Index r = 0; r < layer.bias.size(); ++r) layer.bias(r) = get_le<double>(in);
  }
  const std::size_t cav_index = get_le<std::uint32_t>(in);
  const std::size_t latent = get_le<std::uint32_t>(in);
  const std::size_t frames = get_le<std::uint32_t>(in);
  if (in.peek() != std::char_traits<char>::eof()) throw DataError("trailing bytes after CMDL payload");

  model::Model m(infer_architecture(shapes, cav_index, latent, frames));
  if (m.layers().size() != count) throw DataError("CMDL layer count does not match inferred architecture");
  for (std::size_t i = 0; i < count; ++i) {
    if (m.layers()[i].weight.rows() != layers[i].weight.rows() || m.layers()[i].weight.cols() != layers[i].weight.cols())
      throw DataError("CMDL layer shapes inconsistent");
    m.layers()[i] = std::move(layers[i]);
  }
  return m;
}

model::Model read_cmdl(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open model " + path.string());
  return read_cmdl(in);
}

}  // namespace cinexai::io

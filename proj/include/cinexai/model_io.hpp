#pragma once

#include <filesystem>
#include <iosfwd>

#include "cinexai/model.hpp"

namespace cinexai::io {

/// CMDL layout (little-endian): "CMDL", u8 version=1, u16 layer count; per
/// layer u32 rows, u32 cols, rows*cols f64 weights row-major, rows f64
/// biases; footer u32 CAV-layer index, u32 latent dim, u32 T.
///
/// Layers are stored encoder, decoder, per-frame head, post-concatenation.
/// Stack boundaries are recovered from the shapes on load.
void write_cmdl(std::ostream& out, const model::Model& model);
void write_cmdl(const std::filesystem::path& path, const model::Model& model);
model::Model read_cmdl(std::istream& in);
model::Model read_cmdl(const std::filesystem::path& path);

}  // namespace cinexai::io

#include "cinexai/interp.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "cinexai/errors.hpp"
#include "cinexai/rng.hpp"
#include "cinexai/text_io.hpp"

namespace cinexai::interp {

using Eigen::MatrixXd;
using Eigen::VectorXd;

VectorXd time_averaged_latent(const MatrixXd& mus) { return mus.rowwise().mean(); }

LatentDirection latent_concept_direction(const model::Model& model, std::span<const SegSequence> positives,
                                         std::span<const SegSequence> negatives, const std::string& concept_name,
                                         const cav::FitConfig& config) {
  auto averaged = [&](std::span<const SegSequence> seqs) {
    std::vector<VectorXd> out;
    out.reserve(seqs.size());
    for (const auto& r : cav::record_activations(model, seqs, cav::Layer::latent_mean)) out.push_back(r.z);
    return out;
  };
  const auto pos = averaged(positives);
  const auto neg = averaged(negatives);
  auto cv = cav::train_cav(pos, neg, config);
  LatentDirection dir;
  dir.direction = std::move(cv.direction);
  dir.name = concept_name;
  dir.accuracy = cv.accuracy;
  return dir;
}

InterpolationResult interpolate_decode(const model::Model& model, const SegSequence& seq, const VectorXd& direction,
                                       std::span<const double> alphas) {
  if (alphas.empty()) throw ParameterError("at least one interpolation step is required");
  const auto& arch = model.architecture();
  if (static_cast<std::size_t>(direction.size()) != arch.latent_dim) {
    throw ConfigurationError("latent direction has dimension " + std::to_string(direction.size()) + ", model has " +
                             std::to_string(arch.latent_dim));
  }
  if (seq.length() != arch.frames || seq.shape().voxels() != arch.input_voxels) {
    throw ConfigurationError("subject does not match the model's input shape");
  }
  const MatrixXd mus = model::encode_sequence(model, seq).mus;
  InterpolationResult result;
  result.subject_id = seq.subject_id;
  for (double alpha : alphas) {
    const MatrixXd shifted = mus.colwise() + alpha * direction;
    InterpolationStep step;
    step.alpha = alpha;
    step.decoded = model::decode_sequence(model, shifted, seq.shape());
    step.decoded.subject_id = seq.subject_id;
    step.decoded.label = seq.label;
    step.logit = model::classify(model, shifted).logit;
    result.steps.push_back(std::move(step));
  }
  return result;
}

PcaResult pca_project(std::span<const VectorXd> vectors, std::size_t components, const PcaConfig& config) {
  if (components == 0) throw ParameterError("PCA needs at least one component");
  if (vectors.size() < components + 1) {
    throw ParameterError("PCA with " + std::to_string(components) + " components needs at least " +
                         std::to_string(components + 1) + " vectors");
  }
  const Eigen::Index dim = vectors.front().size();
  if (static_cast<std::size_t>(dim) < components) throw ParameterError("more components than dimensions");
  MatrixXd data(dim, static_cast<Eigen::Index>(vectors.size()));
  for (std::size_t i = 0; i < vectors.size(); ++i) {
    if (vectors[i].size() != dim) throw ParameterError("PCA inputs differ in dimension");
    data.col(static_cast<Eigen::Index>(i)) = vectors[i];
  }
  PcaResult r;
  r.mean = data.rowwise().mean();
  const MatrixXd centered = data.colwise() - r.mean;
  MatrixXd cov = centered * centered.transpose() / static_cast<double>(vectors.size() - 1);

  const auto k = static_cast<Eigen::Index>(components);
  r.axes = MatrixXd::Zero(dim, k);
  r.eigenvalues = VectorXd::Zero(k);
  Rng rng(0x9e3779b97f4a7c15ULL);
  auto orthogonalize = [&](VectorXd& v, Eigen::Index done) {
    for (Eigen::Index j = 0; j < done; ++j) v -= r.axes.col(j).dot(v) * r.axes.col(j);
  };
  for (Eigen::Index c = 0; c < k; ++c) {
    VectorXd v(dim);
    for (Eigen::Index i = 0; i < dim; ++i) v[i] = rng.normal();
    orthogonalize(v, c);
    v.normalize();
    std::size_t iter = 0;
    for (; iter < config.max_iterations; ++iter) {
      VectorXd next = cov * v;
      orthogonalize(next, c);
      const double norm = next.norm();
      // Remaining spectrum is zero: any orthogonal unit vector is an axis.
      if (norm <= 1e-300) break;
      next /= norm;
      const double change = (next - v).norm();
      v = std::move(next);
      if (change < config.tolerance) break;
    }
    r.iterations.push_back(iter);
    Eigen::Index largest = 0;
    v.cwiseAbs().maxCoeff(&largest);
    if (v[largest] < 0.0) v = -v;
    const double lambda = std::max(0.0, v.dot(cov * v));
    r.axes.col(c) = v;
    r.eigenvalues[c] = lambda;
    cov -= lambda * v * v.transpose();
  }
  r.projections = centered.transpose() * r.axes;
  return r;
}

VectorXd gradient_arrow(const model::Model& model, const MatrixXd& mus, const MatrixXd& axes) {
  const VectorXd g = model::logit_gradient_latents(model, mus).rowwise().mean();
  if (g.size() != axes.rows()) throw ConfigurationError("PCA axes do not match the latent dimension");
  return axes.transpose() * g;
}

void write_pgm(const std::filesystem::path& path, const LabelFrame& frame) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open " + path.string() + " for writing");
  const int h = frame.shape.height * frame.shape.slices;
  out << "P5\n" << frame.shape.width << ' ' << h << "\n255\n";
  for (auto label : frame.labels) out.put(static_cast<char>(label * 85));
  if (!out) throw DataError("failed writing " + path.string());
}

void write_interpolation(const std::filesystem::path& dir, const InterpolationResult& result) {
  std::filesystem::create_directories(dir);
  std::string manifest = "alpha,frame,logit,file\n";
  for (std::size_t s = 0; s < result.steps.size(); ++s) {
    const auto& step = result.steps[s];
    for (std::size_t t = 0; t < step.decoded.frames.size(); ++t) {
      char name[64];
      std::snprintf(name, sizeof name, "s%u_step%02zu_t%02zu.pgm", result.subject_id, s, t);
      write_pgm(dir / name, step.decoded.frames[t]);
      manifest += io::format_double(step.alpha) + ',' + std::to_string(t) + ',' + io::format_double(step.logit) +
                  ',' + name + '\n';
    }
  }
  io::write_text_file(dir / "manifest.csv", manifest);
}

std::string format_pca_csv(std::span<const PcaRow> rows) {
  std::string out = "subject_id,pc1,pc2,grad1,grad2,label\n";
  for (const auto& r : rows) {
    out += std::to_string(r.subject_id) + ',' + io::format_double(r.pc1) + ',' + io::format_double(r.pc2) + ',' +
           io::format_double(r.grad1) + ',' + io::format_double(r.grad2) + ',' + std::to_string(r.label) + '\n';
  }
  return out;
}

std::string format_pca_svg(std::span<const PcaRow> rows) {
  constexpr double kSize = 480.0;
  constexpr double kMargin = 30.0;
  double lo_x = 0.0, hi_x = 1.0, lo_y = 0.0, hi_y = 1.0;
  if (!rows.empty()) {
    lo_x = hi_x = rows.front().pc1;
    lo_y = hi_y = rows.front().pc2;
    for (const auto& r : rows) {
      lo_x = std::min(lo_x, r.pc1);
      hi_x = std::max(hi_x, r.pc1);
      lo_y = std::min(lo_y, r.pc2);
      hi_y = std::max(hi_y, r.pc2);
    }
  }
  const double span = std::max({hi_x - lo_x, hi_y - lo_y, 1e-12});
  const double scale = (kSize - 2 * kMargin) / span;
  double max_grad = 0.0;
  for (const auto& r : rows) max_grad = std::max(max_grad, std::hypot(r.grad1, r.grad2));
  const double arrow_scale = max_grad > 0.0 ? 20.0 / max_grad : 0.0;
  auto fmt = [](double v) { return io::format_double(v, 6); };

  std::string out = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"480\" height=\"480\" viewBox=\"0 0 480 480\">\n";
  out += "<rect width=\"480\" height=\"480\" fill=\"white\"/>\n";
  for (const auto& r : rows) {
    const double x = kMargin + (r.pc1 - lo_x) * scale;
    const double y = kSize - kMargin - (r.pc2 - lo_y) * scale;
    const char* color = r.label == 1 ? "#c0392b" : r.label == 0 ? "#2c7fb8" : "#777777";
    out += "<line x1=\"" + fmt(x) + "\" y1=\"" + fmt(y) + "\" x2=\"" + fmt(x + r.grad1 * arrow_scale) + "\" y2=\"" +
           fmt(y - r.grad2 * arrow_scale) + "\" stroke=\"" + color + "\" stroke-width=\"1\"/>\n";
    out += "<circle cx=\"" + fmt(x) + "\" cy=\"" + fmt(y) + "\" r=\"3\" fill=\"" + color + "\"/>\n";
  }
  out += "<text x=\"240\" y=\"475\" text-anchor=\"middle\" font-size=\"12\">PC1</text>\n";
  out += "<text x=\"10\" y=\"240\" font-size=\"12\" transform=\"rotate(-90 10 240)\">PC2</text>\n";
  out += "</svg>\n";
  return out;
}

}  // namespace cinexai::interp

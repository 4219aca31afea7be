#include "cinexai/cav.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "cinexai/errors.hpp"
#include "cinexai/text_io.hpp"

namespace cinexai::cav {

using Eigen::MatrixXd;
using Eigen::VectorXd;

void ConceptSpec::validate() const {
  if (k < 2) throw ParameterError("concept set size k must be at least 2");
  if (name.empty()) throw ParameterError("concept name is empty");
}

ConceptSpec ConceptSpec::named(std::string_view name, std::size_t k) {
  struct Entry {
    std::string_view name;
    BiomarkerField field;
    Polarity polarity;
  };
  static constexpr Entry kTable[] = {
      {"low_ef", BiomarkerField::ef, Polarity::low},       {"low_per", BiomarkerField::per, Polarity::low},
      {"low_pfr", BiomarkerField::pfr, Polarity::low},     {"low_pafr", BiomarkerField::pafr, Polarity::low},
      {"high_lvt", BiomarkerField::lvt, Polarity::high},   {"rv_offset", BiomarkerField::rv_offset, Polarity::high},
  };
  for (const auto& e : kTable) {
    if (e.name == name) {
      ConceptSpec spec{std::string(name), e.field, e.polarity, k};
      spec.validate();
      return spec;
    }
  }
  throw ParameterError("unknown concept: " + std::string(name));
}

std::vector<ConceptSpec> default_concepts(std::size_t k) {
  std::vector<ConceptSpec> out;
  for (auto name : {"low_ef", "low_per", "low_pfr", "low_pafr", "high_lvt"}) out.push_back(ConceptSpec::named(name, k));
  return out;
}

double field_value(const BiomarkerSet& m, BiomarkerField field) {
  switch (field) {
    case BiomarkerField::ef: return m.ef;
    case BiomarkerField::per: return m.per;
    case BiomarkerField::pfr: return m.pfr;
    case BiomarkerField::pafr: return m.pafr;
    case BiomarkerField::lvt: return m.lvt;
    case BiomarkerField::rv_offset: return m.rv_offset;
  }
  throw ParameterError("unknown biomarker field");
}

ConceptSets select_concept_sets(std::span<const PoolEntry> pool, const ConceptSpec& spec) {
  spec.validate();
  if (pool.size() < 2 * spec.k) {
    throw DataError("concept pool of " + std::to_string(pool.size()) + " subjects is smaller than 2k = " +
                    std::to_string(2 * spec.k));
  }
  std::vector<std::pair<double, std::uint32_t>> entries;
  entries.reserve(pool.size());
  for (const auto& e : pool) {
    const double v = field_value(e.markers, spec.field);
    if (!std::isfinite(v)) throw DataError("non-finite biomarker for subject " + std::to_string(e.subject_id));
    entries.emplace_back(v, e.subject_id);
  }
  const bool low = spec.polarity == Polarity::low;
  std::sort(entries.begin(), entries.end(), [low](const auto& a, const auto& b) {
    if (a.first != b.first) return low ? a.first < b.first : a.first > b.first;
    return a.second < b.second;
  });
  ConceptSets sets;
  for (std::size_t i = 0; i < spec.k; ++i) sets.positives.push_back(entries[i].second);
  for (std::size_t i = entries.size() - spec.k; i < entries.size(); ++i) sets.negatives.push_back(entries[i].second);
  return sets;
}

std::string_view layer_name(Layer layer) {
  switch (layer) {
    case Layer::cav: return "cav";
    case Layer::latent: return "latent";
    case Layer::latent_mean: return "latent_mean";
  }
  return "cav";
}

Layer parse_layer(std::string_view name) {
  if (name == "cav") return Layer::cav;
  if (name == "latent") return Layer::latent;
  if (name == "latent_mean") return Layer::latent_mean;
  throw ParameterError("unknown layer: " + std::string(name));
}

std::size_t layer_width(const model::Model& model, Layer layer) {
  const auto& arch = model.architecture();
  switch (layer) {
    case Layer::cav: return arch.cav_width();
    case Layer::latent: return arch.latent_dim * arch.frames;
    case Layer::latent_mean: return arch.latent_dim;
  }
  return 0;
}

namespace {

void check_sequence(const model::Model& model, const SegSequence& seq) {
  const auto& arch = model.architecture();
  if (seq.length() != arch.frames || seq.shape().voxels() != arch.input_voxels) {
    throw ConfigurationError("subject " + std::to_string(seq.subject_id) + " does not match the model's input shape");
  }
}

}  // namespace

ActivationRecord record_activation(const model::Model& model, const SegSequence& seq, Layer layer) {
  check_sequence(model, seq);
  const MatrixXd mus = model::encode_sequence(model, seq).mus;
  ActivationRecord rec{seq.subject_id, layer, {}};
  switch (layer) {
    case Layer::cav: rec.z = model::classify(model, mus).cav_activations; break;
    case Layer::latent: rec.z = mus.reshaped(); break;
    case Layer::latent_mean: rec.z = mus.rowwise().mean(); break;
  }
  return rec;
}

std::vector<ActivationRecord> record_activations(const model::Model& model, std::span<const SegSequence> subjects,
                                                 Layer layer) {
  std::vector<ActivationRecord> out;
  out.reserve(subjects.size());
  for (const auto& s : subjects) out.push_back(record_activation(model, s, layer));
  return out;
}

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

MatrixXd stack_rows(std::span<const VectorXd> vectors, Eigen::Index dim) {
  MatrixXd m(static_cast<Eigen::Index>(vectors.size()), dim);
  for (std::size_t i = 0; i < vectors.size(); ++i) {
    if (vectors[i].size() != dim) throw ParameterError("activation vectors differ in dimension");
    m.row(static_cast<Eigen::Index>(i)) = vectors[i].transpose();
  }
  return m;
}

struct Split {
  MatrixXd fit;
  MatrixXd held_out;
};

// Every fifth row is held out once the set is large enough to spare it.
Split split_rows(const MatrixXd& rows, bool hold_out) {
  if (!hold_out) return {rows, rows};
  std::vector<Eigen::Index> fit_idx;
  std::vector<Eigen::Index> held_idx;
  for (Eigen::Index i = 0; i < rows.rows(); ++i) (i % 5 == 4 ? held_idx : fit_idx).push_back(i);
  return {rows(fit_idx, Eigen::all), rows(held_idx, Eigen::all)};
}

}  // namespace

ConceptVector train_cav(std::span<const VectorXd> positives, std::span<const VectorXd> negatives,
                        const FitConfig& config) {
  if (positives.empty() || negatives.empty()) throw ParameterError("concept sets must be nonempty");
  if (config.l2 < 0.0 || config.gradient_tolerance <= 0.0) throw ParameterError("invalid CAV fit configuration");
  const Eigen::Index dim = positives.front().size();
  if (dim == 0) throw ParameterError("activation vectors are empty");
  const MatrixXd pos_all = stack_rows(positives, dim);
  const MatrixXd neg_all = stack_rows(negatives, dim);
  const bool hold_out = pos_all.rows() >= 5 && neg_all.rows() >= 5;
  const Split pos = split_rows(pos_all, hold_out);
  const Split neg = split_rows(neg_all, hold_out);

  // Centering leaves the unpenalized-bias optimum unchanged and improves
  // conditioning. Both sets enter every reduction symmetrically so that
  // exchanging them flips every sign exactly.
  const double n = static_cast<double>(pos.fit.rows() + neg.fit.rows());
  const VectorXd mean = (pos.fit.colwise().sum() + neg.fit.colwise().sum()).transpose() / n;
  const MatrixXd xp = pos.fit.rowwise() - mean.transpose();
  const MatrixXd xn = neg.fit.rowwise() - mean.transpose();

  auto augmented_gram = [&](const MatrixXd& x) {
    MatrixXd g(dim + 1, dim + 1);
    g.topLeftCorner(dim, dim) = x.transpose() * x;
    g.topRightCorner(dim, 1) = x.colwise().sum().transpose();
    g.bottomLeftCorner(1, dim) = x.colwise().sum();
    g(dim, dim) = static_cast<double>(x.rows());
    return g;
  };
  const MatrixXd gram = (augmented_gram(xp) + augmented_gram(xn)) / n;
  const double lipschitz =
      0.25 * Eigen::SelfAdjointEigenSolver<MatrixXd>(gram, Eigen::EigenvaluesOnly).eigenvalues().maxCoeff() +
      config.l2;
  const double step = 1.0 / lipschitz;

  VectorXd w = VectorXd::Zero(dim);
  double b = 0.0;
  std::size_t iter = 0;
  for (; iter < config.max_iterations; ++iter) {
    // d/ds of -log sigmoid(+s) is -sigmoid(-s); of -log sigmoid(-s) is sigmoid(s).
    const VectorXd rp = (-((xp * w).array() + b)).unaryExpr([](double s) { return -sigmoid(s); }).matrix();
    const VectorXd rn = ((xn * w).array() + b).unaryExpr([](double s) { return sigmoid(s); }).matrix();
    const VectorXd gw = (xp.transpose() * rp + xn.transpose() * rn) / n + config.l2 * w;
    const double gb = (rp.sum() + rn.sum()) / n;
    if (std::sqrt(gw.squaredNorm() + gb * gb) < config.gradient_tolerance) break;
    w -= step * gw;
    b -= step * gb;
  }

  const double norm = w.norm();
  if (!(norm > 1e-12)) throw DegenerateError("concept sets are not linearly distinguishable");
  VectorXd direction = w / norm;
  const double pos_mean = (pos.fit * direction).mean();
  const double neg_mean = (neg.fit * direction).mean();
  if (pos_mean < neg_mean) direction = -direction;

  // Held-out scores use the fitted affine classifier in uncentered coordinates.
  const double offset = b - w.dot(mean);
  const Eigen::ArrayXd sp = (pos.held_out * w).array() + offset;
  const Eigen::ArrayXd sn = (neg.held_out * w).array() + offset;
  const double correct = static_cast<double>((sp > 0.0).count() + (sn < 0.0).count());
  ConceptVector cv;
  cv.direction = std::move(direction);
  cv.accuracy = correct / static_cast<double>(sp.size() + sn.size());
  cv.iterations = iter;
  return cv;
}

VectorXd logit_gradient(const model::Model& model, const SegSequence& seq, Layer layer) {
  check_sequence(model, seq);
  const MatrixXd mus = model::encode_sequence(model, seq).mus;
  switch (layer) {
    case Layer::cav: return model::logit_gradient_cav(model, mus);
    case Layer::latent: return model::logit_gradient_latents(model, mus).reshaped();
    // Shifting the time average shifts every frame by the same amount.
    case Layer::latent_mean: return model::logit_gradient_latents(model, mus).rowwise().sum();
  }
  return {};
}

double sensitivity(const model::Model& model, const SegSequence& seq, const ConceptVector& cv) {
  if (static_cast<std::size_t>(cv.direction.size()) != layer_width(model, cv.layer)) {
    throw ConfigurationError("concept vector '" + cv.name + "' does not match the model's " +
                             std::string(layer_name(cv.layer)) + " layer");
  }
  return logit_gradient(model, seq, cv.layer).dot(cv.direction);
}

SensitivityReport aggregate_sensitivity(const model::Model& model, std::span<const SegSequence> subjects,
                                        const ConceptVector& cv) {
  if (subjects.empty()) throw DataError("sensitivity needs at least one subject");
  SensitivityReport r;
  std::size_t positive = 0;
  double sum = 0.0;
  for (const auto& s : subjects) {
    const double dot = sensitivity(model, s, cv);
    r.subject_ids.push_back(s.subject_id);
    r.dots.push_back(dot);
    if (dot > 0.0) ++positive;
    sum += dot;
  }
  r.fraction_positive = static_cast<double>(positive) / static_cast<double>(subjects.size());
  r.mean = sum / static_cast<double>(subjects.size());
  return r;
}

void write_cavs(const std::filesystem::path& path, std::span<const ConceptVector> cavs) {
  std::string out = "concept,layer,dim,accuracy\n";
  for (const auto& cv : cavs) {
    out += cv.name + ',' + std::string(layer_name(cv.layer)) + ',' + std::to_string(cv.direction.size()) + ',' +
           io::format_double(cv.accuracy) + '\n';
    for (Eigen::Index i = 0; i < cv.direction.size(); ++i) out += io::format_double(cv.direction[i]) + '\n';
  }
  io::write_text_file(path, out);
}

std::vector<ConceptVector> read_cavs(const std::filesystem::path& path) {
  std::istringstream in(io::read_text_file(path));
  std::string line;
  if (!std::getline(in, line) || line != "concept,layer,dim,accuracy") {
    throw DataError(path.string() + ": missing CAV header");
  }
  std::vector<ConceptVector> out;
  try {
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const auto fields = io::split(line, ',');
      if (fields.size() != 4) throw DataError(path.string() + ": malformed CAV row: " + line);
      ConceptVector cv;
      cv.name = fields[0];
      cv.layer = parse_layer(fields[1]);
      const auto dim = std::stoul(fields[2]);
      cv.accuracy = std::stod(fields[3]);
      cv.direction.resize(static_cast<Eigen::Index>(dim));
      for (std::size_t i = 0; i < dim; ++i) {
        if (!std::getline(in, line)) throw DataError(path.string() + ": truncated CAV '" + cv.name + "'");
        cv.direction[static_cast<Eigen::Index>(i)] = std::stod(line);
      }
      out.push_back(std::move(cv));
    }
  } catch (const std::logic_error&) {
    throw DataError(path.string() + ": malformed CAV file");
  }
  return out;
}

std::string format_report(const SensitivityReport& report) {
  std::string out = "subject_id,dot\n";
  for (std::size_t i = 0; i < report.dots.size(); ++i) {
    out += std::to_string(report.subject_ids[i]) + ',' + io::format_double(report.dots[i]) + '\n';
  }
  out += "fraction_positive,mean\n";
  out += io::format_double(report.fraction_positive) + ',' + io::format_double(report.mean) + '\n';
  return out;
}

}  // namespace cinexai::cav

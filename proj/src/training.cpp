#include "cinexai/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "cinexai/errors.hpp"
#include "cinexai/text_io.hpp"

namespace cinexai::training {

void TrainConfig::validate() const {
  if (beta < 0.0) throw ParameterError("beta must be non-negative");
  if (lr_stage1 <= 0.0 || lr_stage2 <= 0.0) throw ParameterError("learning rates must be positive");
  if (batch_size == 0) throw ParameterError("batch size must be positive");
  if (max_shift < 0) throw ParameterError("max_shift must be non-negative");
}

LabelFrame shift_frame(const LabelFrame& frame, int dx, int dy) {
  LabelFrame out(frame.shape);
  const int w = frame.shape.width;
  const int h = frame.shape.height;
  for (int s = 0; s < frame.shape.slices; ++s) {
    for (int row = 0; row < h; ++row) {
      const int src_row = row - dy;
      if (src_row < 0 || src_row >= h) continue;
      for (int col = 0; col < w; ++col) {
        const int src_col = col - dx;
        if (src_col < 0 || src_col >= w) continue;
        out.at(s, row, col) = frame.at(s, src_row, src_col);
      }
    }
  }
  return out;
}

SegSequence augment_shift(const SegSequence& seq, Rng& rng, int max_shift) {
  if (max_shift < 0) throw ParameterError("max_shift must be non-negative");
  if (max_shift == 0) return seq;
  const int dx = static_cast<int>(rng.uniform_int(-max_shift, max_shift));
  const int dy = static_cast<int>(rng.uniform_int(-max_shift, max_shift));
  SegSequence out;
  out.subject_id = seq.subject_id;
  out.label = seq.label;
  out.frames.reserve(seq.frames.size());
  for (const auto& f : seq.frames) out.frames.push_back(shift_frame(f, dx, dy));
  return out;
}

namespace {

void shuffle(std::vector<std::size_t>& order, Rng& rng) {
  for (std::size_t i = order.size(); i-- > 1;) {
    const auto j = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(i)));
    std::swap(order[i], order[j]);
  }
}

void sgd_step(model::Model& m, const model::Gradients& g, double lr, std::size_t first, std::size_t last) {
  auto& layers = m.layers();
  for (std::size_t i = first; i < last; ++i) {
    layers[i].weight -= lr * g[i].weight;
    layers[i].bias -= lr * g[i].bias;
  }
}

}  // namespace

model::Model train_two_stage(std::span<const SegSequence> dataset, const model::Architecture& arch,
                             const TrainConfig& config, std::vector<LogRow>* log, const EpochCallback& on_epoch) {
  config.validate();
  if (dataset.empty()) throw DataError("training set is empty");
  model::Model m = model::Model::initialize(arch, derive_seed(config.seed, Stream::init));

  std::vector<std::size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::uint64_t step = 0;
  model::Gradients grads;

  for (int stage = 1; stage <= 2; ++stage) {
    const std::size_t epochs = stage == 1 ? config.epochs_stage1 : config.epochs_stage2;
    const model::LossWeights weights{config.beta, stage == 1 ? 0.0 : 1.0};
    const double lr = stage == 1 ? config.lr_stage1 : config.lr_stage2;
    // Stage 1 leaves the classifier frozen.
    const std::size_t trainable_end = stage == 1 ? m.head_begin() : m.layers().size();
    if (stage == 2 && epochs > 0) {
      for (const auto& s : dataset)
        if (s.label == DiseaseLabel::unknown) throw DataError("stage 2 needs labeled subjects");
    }

    for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
      Rng order_rng(derive_seed(config.seed, Stream::shuffle, static_cast<std::uint64_t>(stage) * 1000003 + epoch));
      shuffle(order, order_rng);
      LogRow row{epoch, stage};
      double seen = 0.0;
      for (std::size_t start = 0; start < order.size(); start += config.batch_size, ++step) {
        const std::size_t end = std::min(order.size(), start + config.batch_size);
        Rng aug_rng(derive_seed(config.seed, Stream::augment, step));
        Rng noise_rng(derive_seed(config.seed, Stream::noise, step));
        std::vector<SegSequence> batch;
        batch.reserve(end - start);
        for (std::size_t k = start; k < end; ++k) {
          SegSequence s = augment_shift(dataset[order[k]], aug_rng, config.max_shift);
          if (stage == 1) s.label = DiseaseLabel::unknown;
          batch.push_back(std::move(s));
        }
        const auto noise = model::draw_noise(m, batch.size(), noise_rng);
        const auto loss = model::gradients(m, batch, weights, noise, grads);
        sgd_step(m, grads, lr, 0, trainable_end);

        const double n = static_cast<double>(batch.size());
        row.recon += loss.recon * n;
        row.kl += loss.kl * n;
        row.classification += loss.classification * n;
        row.total += loss.total * n;
        seen += n;
      }
      row.recon /= seen;
      row.kl /= seen;
      row.classification /= seen;
      row.total /= seen;
      if (log) log->push_back(row);
      if (on_epoch) on_epoch(row);
    }
  }
  return m;
}

Split stratified_split(std::span<const SegSequence> subjects, std::size_t test_count, std::uint64_t seed) {
  if (test_count >= subjects.size()) throw ParameterError("test split must leave training subjects");
  std::vector<std::size_t> diseased;
  std::vector<std::size_t> healthy;
  for (std::size_t i = 0; i < subjects.size(); ++i) {
    (subjects[i].label == DiseaseLabel::diseased ? diseased : healthy).push_back(i);
  }
  const auto test_diseased = static_cast<std::size_t>(std::llround(
      static_cast<double>(test_count) * static_cast<double>(diseased.size()) / static_cast<double>(subjects.size())));
  const std::size_t test_healthy = test_count - test_diseased;
  if (test_diseased > diseased.size() || test_healthy > healthy.size()) {
    throw DataError("cohort too small for a stratified split");
  }
  Rng rng(derive_seed(seed, Stream::split));
  shuffle(diseased, rng);
  shuffle(healthy, rng);
  Split split;
  split.test.assign(diseased.begin(), diseased.begin() + static_cast<std::ptrdiff_t>(test_diseased));
  split.test.insert(split.test.end(), healthy.begin(), healthy.begin() + static_cast<std::ptrdiff_t>(test_healthy));
  split.train.assign(diseased.begin() + static_cast<std::ptrdiff_t>(test_diseased), diseased.end());
  split.train.insert(split.train.end(), healthy.begin() + static_cast<std::ptrdiff_t>(test_healthy), healthy.end());
  std::sort(split.test.begin(), split.test.end());
  std::sort(split.train.begin(), split.train.end());
  return split;
}

std::string format_log(std::span<const LogRow> rows) {
  std::string out = "epoch,stage,recon,kl,class,total\n";
  for (const auto& r : rows) {
    out += std::to_string(r.epoch) + ',' + std::to_string(r.stage) + ',' + io::format_double(r.recon) + ',' +
           io::format_double(r.kl) + ',' + io::format_double(r.classification) + ',' + io::format_double(r.total) +
           '\n';
  }
  return out;
}

}  // namespace cinexai::training

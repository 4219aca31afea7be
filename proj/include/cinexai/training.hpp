#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "cinexai/model.hpp"
#include "cinexai/rng.hpp"

namespace cinexai::training {

struct TrainConfig {
  double beta = 0.2;
  double lr_stage1 = 3e-4;
  double lr_stage2 = 3e-4;
  std::size_t epochs_stage1 = 60;
  std::size_t epochs_stage2 = 40;
  std::size_t batch_size = 8;
  int max_shift = 2;
  std::uint64_t seed = 7;

  void validate() const;
};

/// Epoch means of the loss terms; one row per epoch and stage.
struct LogRow {
  std::size_t epoch = 0;
  int stage = 1;
  double recon = 0.0;
  double kl = 0.0;
  double classification = 0.0;
  double total = 0.0;
};

/// Shifts every slice by (dx, dy) pixels; vacated pixels become background.
LabelFrame shift_frame(const LabelFrame& frame, int dx, int dy);

/// Draws one integer shift per axis uniformly from [-max_shift, max_shift]
/// and applies it to all frames of the subject.
SegSequence augment_shift(const SegSequence& seq, Rng& rng, int max_shift);

using EpochCallback = std::function<void(const LogRow&)>;

/// Two-stage SGD: stage 1 with gamma = 0 updates encoder and decoder only and
/// never reads labels; stage 2 with gamma = 1 updates every layer. Fully
/// determined by `config.seed`.
model::Model train_two_stage(std::span<const SegSequence> dataset, const model::Architecture& arch,
                             const TrainConfig& config, std::vector<LogRow>* log = nullptr,
                             const EpochCallback& on_epoch = {});

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

/// Holds out `test_count` subjects with the cohort's class proportions
/// (diseased count rounded to nearest). Indices come back ascending.
Split stratified_split(std::span<const SegSequence> subjects, std::size_t test_count, std::uint64_t seed);

/// `epoch,stage,recon,kl,class,total`
std::string format_log(std::span<const LogRow> rows);

}  // namespace cinexai::training

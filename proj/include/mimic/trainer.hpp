#pragma once

// Two-stage training: masked-image pre-training of encoder + decoder, then
// fine-tuning of encoder + heads with cross-entropy and a contrastive term.
// Training runs in single precision.

#include "mimic/backbone.hpp"
#include "mimic/checkpoint.hpp"
#include "mimic/core.hpp"
#include "mimic/losses.hpp"
#include "mimic/masking.hpp"
#include "mimic/mixing.hpp"
#include "mimic/random.hpp"

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace mimic {

enum class Stage { pretrain, finetune };
/// Fine-tuning contrastive term. All modes see the same (possibly mixed)
/// batch and differ only in positive selection: sscl takes the sibling view,
/// scl the views sharing a pre-mix class, mscl candidates within the label
/// distance threshold. none trains with cross-entropy alone.
enum class ContrastiveMode { none, sscl, scl, mscl };

std::string to_string(Stage stage);
std::string to_string(ContrastiveMode mode);
Stage parse_stage(const std::string& s);
ContrastiveMode parse_contrastive_mode(const std::string& s);

struct OptimizerConfig {
  double lr = 1e-4;
  double weight_decay = 5e-4;
  /// Fine-tuning only: layer ℓ of L trains at lr·layer_decay^(L−ℓ).
  double layer_decay = 0.65;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double warmup_epochs = 1.0;

  void validate() const;
};

struct TrainConfig {
  Stage stage = Stage::finetune;
  int epochs = 50;
  int batch_size = 64;
  OptimizerConfig optimizer;
  double mask_ratio = 0.75;
  ReconstructionOptions reconstruction;
  MixPolicy mix;
  LossConfig loss;
  AugmentConfig augment;
  ContrastiveMode contrastive = ContrastiveMode::mscl;
  bool balanced_sampling = true;
  std::uint64_t seed = 0;
  /// Backbone and head choices; num_classes is taken from the dataset.
  ModelConfig model;

  void validate() const;
};

/// Cosine decay to zero after a linear warmup. `step` counts from 0.
double scheduled_lr(double base_lr, Index step, Index warmup_steps, Index total_steps);

/// Adam moments with decoupled weight decay and per-layer learning rates.
class AdamW {
 public:
  AdamW(std::vector<Parameter<float>*> params, const OptimizerConfig& cfg, int num_layers, bool layer_decay);

  /// Multiplier applied to the base lr for parameters at `layer`.
  double lr_scale(int layer) const;
  void step(double base_lr);
  Index steps_taken() const { return t_; }
  std::span<Parameter<float>* const> parameters() const { return params_; }

 private:
  std::vector<Parameter<float>*> params_;
  std::vector<Matrix<float>> m_;
  std::vector<Matrix<float>> v_;
  OptimizerConfig cfg_;
  int num_layers_;
  bool layer_decay_;
  Index t_ = 0;
};

double gradient_norm(std::span<Parameter<float>* const> params);

/// Indices drawn with replacement, each sample weighted by 1/|its class|.
/// The stream has one entry per dataset sample.
std::vector<std::size_t> balanced_sampler(const Dataset& data, RandomSource& rng);

struct EpochRecord {
  int epoch = 0;
  Stage stage = Stage::finetune;
  double loss_total = 0.0;
  double loss_ce = 0.0;
  double loss_contrastive = 0.0;
  double loss_recon = 0.0;
  double train_acc = 0.0;
  double eval_acc = -1.0;  // −1 when no evaluation set was given
  Index skipped_anchor_count = 0;
  double wall_time = 0.0;  // seconds since the run started
};

/// One row per epoch. Columns: epoch, stage, loss_total, loss_ce, loss_mscl,
/// loss_recon, train_acc, eval_acc, skipped_anchor_count, wall_time.
class RunReport {
 public:
  static const std::vector<std::string>& columns();

  void append(const EpochRecord& record);
  const std::vector<EpochRecord>& records() const { return records_; }
  bool empty() const { return records_.empty(); }
  const EpochRecord& back() const { return records_.back(); }

  void write_csv(std::ostream& os, bool include_wall_time = true) const;
  std::string to_csv(bool include_wall_time = true) const;
  void save(const std::string& path) const;

 private:
  std::vector<EpochRecord> records_;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

struct TrainResult {
  Model<float> model;
  RunReport report;
};

/// Encoder + decoder trained to reconstruct masked patches of `corpus`.
TrainResult pretrain(const Dataset& corpus, const TrainConfig& cfg, RandomSource& rng,
                     const EpochCallback& on_epoch = {});

/// Encoder initialized from `init` when given (heads always start fresh),
/// otherwise from scratch. `eval`, when given, is scored after every epoch.
TrainResult finetune(const Dataset& train, const Checkpoint* init, const TrainConfig& cfg, RandomSource& rng,
                     const Dataset* eval = nullptr, const EpochCallback& on_epoch = {});

struct Evaluation {
  double accuracy = 0.0;
  Index correct = 0;
  Index total = 0;
  std::vector<double> per_class;  // 0 for classes absent from the set
  Eigen::MatrixXi confusion;      // rows: true class, cols: predicted
};

Evaluation evaluate(Model<float>& model, const Dataset& data, int batch_size = 256);

/// Pooled representations r, one row per sample, in dataset order.
Matrix<float> embed(Model<float>& model, const Dataset& data, int batch_size = 256);

Checkpoint make_checkpoint(const Model<float>& model, const TrainConfig& cfg, int epoch);

/// Model built from the checkpoint's recorded configuration and weights.
Model<float> model_from_checkpoint(const Checkpoint& ckpt);

}  // namespace mimic

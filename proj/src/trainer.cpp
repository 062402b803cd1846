#include "mimic/trainer.hpp"

#include "mimic/config.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <ostream>
#include <sstream>

namespace mimic {

std::string to_string(Stage stage) { return stage == Stage::pretrain ? "pretrain" : "finetune"; }

std::string to_string(ContrastiveMode mode) {
  switch (mode) {
    case ContrastiveMode::none: return "none";
    case ContrastiveMode::sscl: return "sscl";
    case ContrastiveMode::scl: return "scl";
    case ContrastiveMode::mscl: return "mscl";
  }
  return "mscl";
}

Stage parse_stage(const std::string& s) {
  if (s == "pretrain") return Stage::pretrain;
  if (s == "finetune") return Stage::finetune;
  throw ConfigError("unknown stage '" + s + "' (expected pretrain or finetune)");
}

ContrastiveMode parse_contrastive_mode(const std::string& s) {
  if (s == "none") return ContrastiveMode::none;
  if (s == "sscl") return ContrastiveMode::sscl;
  if (s == "scl") return ContrastiveMode::scl;
  if (s == "mscl") return ContrastiveMode::mscl;
  throw ConfigError("unknown contrastive mode '" + s + "' (expected none, sscl, scl, or mscl)");
}

void OptimizerConfig::validate() const {
  if (!(lr > 0.0)) throw ConfigError("optimizer.lr must be > 0");
  if (!(weight_decay >= 0.0)) throw ConfigError("optimizer.weight_decay must be >= 0");
  if (!(layer_decay > 0.0 && layer_decay <= 1.0)) throw ConfigError("optimizer.layer_decay must lie in (0, 1]");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw ConfigError("optimizer betas must lie in [0, 1)");
  }
  if (!(eps > 0.0)) throw ConfigError("optimizer.eps must be > 0");
  if (!(warmup_epochs >= 0.0)) throw ConfigError("optimizer.warmup_epochs must be >= 0");
}

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (batch_size < 2) throw ConfigError("batch_size must be >= 2");
  optimizer.validate();
  if (!(mask_ratio > 0.0 && mask_ratio < 1.0)) throw ConfigError("mask_ratio must lie in (0, 1)");
  mix.validate();
  loss.validate();
  augment.validate();
  model.encoder.validate();
  model.decoder.validate();
  if (model.projection_dim < 1) throw ConfigError("model.projection_dim must be >= 1");
}

double scheduled_lr(double base_lr, Index step, Index warmup_steps, Index total_steps) {
  expects(total_steps > 0 && step >= 0, "scheduled_lr: bad step range");
  if (step < warmup_steps) return base_lr * static_cast<double>(step + 1) / static_cast<double>(warmup_steps);
  const Index decay_steps = total_steps - warmup_steps;
  if (decay_steps <= 0) return base_lr;
  const double progress = std::min(1.0, static_cast<double>(step - warmup_steps) / static_cast<double>(decay_steps));
  return base_lr * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

AdamW::AdamW(std::vector<Parameter<float>*> params, const OptimizerConfig& cfg, int num_layers, bool layer_decay)
    : params_(std::move(params)), cfg_(cfg), num_layers_(num_layers), layer_decay_(layer_decay) {
  cfg.validate();
  for (Parameter<float>* p : params_) {
    m_.push_back(Matrix<float>::Zero(p->value.rows(), p->value.cols()));
    v_.push_back(Matrix<float>::Zero(p->value.rows(), p->value.cols()));
  }
}

double AdamW::lr_scale(int layer) const {
  if (!layer_decay_) return 1.0;
  return std::pow(cfg_.layer_decay, num_layers_ - layer);
}

void AdamW::step(double base_lr) {
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  const float b1 = static_cast<float>(cfg_.beta1);
  const float b2 = static_cast<float>(cfg_.beta2);
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Parameter<float>& p = *params_[i];
    const double lr = base_lr * lr_scale(p.layer);
    m_[i] = b1 * m_[i] + (1.0f - b1) * p.grad;
    v_[i] = b2 * v_[i] + (1.0f - b2) * p.grad.cwiseAbs2();
    if (p.decay && cfg_.weight_decay > 0.0) p.value *= static_cast<float>(1.0 - lr * cfg_.weight_decay);
    const float step_size = static_cast<float>(lr / bc1);
    const float denom_scale = static_cast<float>(1.0 / std::sqrt(bc2));
    const float eps = static_cast<float>(cfg_.eps);
    p.value.array() -= step_size * m_[i].array() / (v_[i].array().sqrt() * denom_scale + eps);
  }
}

double gradient_norm(std::span<Parameter<float>* const> params) {
  double sq = 0.0;
  for (const Parameter<float>* p : params) sq += p->grad.template cast<double>().squaredNorm();
  return std::sqrt(sq);
}

std::vector<std::size_t> balanced_sampler(const Dataset& data, RandomSource& rng) {
  expects(!data.empty(), "balanced_sampler: empty dataset");
  std::vector<std::vector<std::size_t>> by_class(static_cast<std::size_t>(data.num_classes()));
  const std::vector<int> cls = data.classes();
  for (std::size_t i = 0; i < cls.size(); ++i) by_class[static_cast<std::size_t>(cls[i])].push_back(i);
  for (std::size_t k = 0; k < by_class.size(); ++k) {
    if (by_class[k].empty()) {
      throw ConfigError("balanced sampling: class " + std::to_string(k) + " (" + data.class_names[k] + ") has no samples");
    }
  }
  // Weight ∝ 1/|class| makes every class equally likely; within a class, uniform.
  std::vector<std::size_t> out(data.size());
  for (std::size_t& idx : out) {
    const auto& members = by_class[static_cast<std::size_t>(rng.uniform_int(by_class.size()))];
    idx = members[static_cast<std::size_t>(rng.uniform_int(members.size()))];
  }
  return out;
}

const std::vector<std::string>& RunReport::columns() {
  static const std::vector<std::string> cols = {"epoch",     "stage",    "loss_total", "loss_ce",
                                                "loss_mscl", "loss_recon", "train_acc", "eval_acc",
                                                "skipped_anchor_count", "wall_time"};
  return cols;
}

void RunReport::append(const EpochRecord& r) {
  if (!records_.empty() && r.epoch != records_.back().epoch + 1) {
    throw ValidationError("run report: epoch " + std::to_string(r.epoch) + " does not follow " +
                          std::to_string(records_.back().epoch));
  }
  for (double v : {r.loss_total, r.loss_ce, r.loss_contrastive, r.loss_recon, r.train_acc, r.eval_acc, r.wall_time}) {
    if (!std::isfinite(v)) throw ValidationError("run report: non-finite value at epoch " + std::to_string(r.epoch));
  }
  records_.push_back(r);
}

void RunReport::write_csv(std::ostream& os, bool include_wall_time) const {
  const auto& cols = columns();
  const std::size_t n = include_wall_time ? cols.size() : cols.size() - 1;
  for (std::size_t i = 0; i < n; ++i) os << (i ? "," : "") << cols[i];
  os << '\n';
  std::ostringstream line;
  for (const EpochRecord& r : records_) {
    line.str("");
    line << std::setprecision(9) << r.epoch << ',' << to_string(r.stage) << ',' << r.loss_total << ',' << r.loss_ce
         << ',' << r.loss_contrastive << ',' << r.loss_recon << ',' << r.train_acc << ',' << r.eval_acc << ','
         << r.skipped_anchor_count;
    if (include_wall_time) line << ',' << std::setprecision(4) << r.wall_time;
    os << line.str() << '\n';
  }
}

std::string RunReport::to_csv(bool include_wall_time) const {
  std::ostringstream os;
  write_csv(os, include_wall_time);
  return os.str();
}

void RunReport::save(const std::string& path) const {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("cannot open " + path + " for writing");
  write_csv(os);
  if (!os) throw IoError("failed writing " + path);
}

namespace {

using Clock = std::chrono::steady_clock;

bool is_encoder(const Parameter<float>& p) { return p.name.rfind("encoder.", 0) == 0; }
bool is_decoder(const Parameter<float>& p) { return p.name.rfind("decoder.", 0) == 0; }
bool is_projection(const Parameter<float>& p) { return p.name.rfind("projection.", 0) == 0; }

std::vector<Parameter<float>*> collect(Model<float>& model, const std::function<bool(const Parameter<float>&)>& keep) {
  std::vector<Parameter<float>*> out;
  model.visit([&](Parameter<float>& p) {
    if (keep(p)) out.push_back(&p);
  });
  return out;
}

std::vector<Image> images_of(std::span<const LabeledSample> samples) {
  std::vector<Image> out;
  out.reserve(samples.size());
  for (const LabeledSample& s : samples) out.push_back(s.image);
  return out;
}

void check_image_shape(const Dataset& data, const EncoderConfig& enc, const std::string& what) {
  expects(!data.empty(), what + ": dataset is empty");
  const Image& img = data.samples.front().image;
  if (img.height() != enc.image_size || img.width() != enc.image_size || img.channels() != enc.channels) {
    throw ConfigError(what + ": images are " + std::to_string(img.height()) + "x" + std::to_string(img.width()) + "x" +
                      std::to_string(img.channels()) + " but the encoder expects " + std::to_string(enc.image_size) +
                      "x" + std::to_string(enc.image_size) + "x" + std::to_string(enc.channels));
  }
}

std::string fault_context(Index step, double lr, double last_grad_norm) {
  std::ostringstream os;
  os << " [step " << step << ", lr " << lr << ", previous-step grad norm " << last_grad_norm << "]";
  return os.str();
}

int argmax_row(const Matrix<float>& m, Index r) {
  Index best = 0;
  m.row(r).maxCoeff(&best);
  return static_cast<int>(best);
}

struct EpochAccumulator {
  double total = 0, ce = 0, contrastive = 0, recon = 0;
  double weight = 0;
  Index correct = 0, seen = 0, skipped = 0;

  void add(double w, double t, double c, double con, double rec) {
    weight += w;
    total += w * t;
    ce += w * c;
    contrastive += w * con;
    recon += w * rec;
  }
  EpochRecord finish(int epoch, Stage stage) const {
    EpochRecord r;
    r.epoch = epoch;
    r.stage = stage;
    r.loss_total = total / weight;
    r.loss_ce = ce / weight;
    r.loss_contrastive = contrastive / weight;
    r.loss_recon = recon / weight;
    r.train_acc = seen > 0 ? static_cast<double>(correct) / static_cast<double>(seen) : 0.0;
    r.skipped_anchor_count = skipped;
    return r;
  }
};

}  // namespace

TrainResult pretrain(const Dataset& corpus, const TrainConfig& cfg_in, RandomSource& rng, const EpochCallback& on_epoch) {
  expects(cfg_in.stage == Stage::pretrain, "pretrain: config stage must be pretrain");
  expects(!corpus.empty(), "pretrain: corpus is empty");
  TrainConfig cfg = cfg_in;
  cfg.model.num_classes = std::max(2, corpus.num_classes());
  cfg.validate();
  check_image_shape(corpus, cfg.model.encoder, "pretrain");

  RandomSource init_rng = rng.split();
  RandomSource order_rng = rng.split();
  RandomSource augment_rng = rng.split();
  RandomSource mask_rng = rng.split();

  TrainResult result{Model<float>(cfg.model, init_rng), {}};
  Model<float>& model = result.model;
  auto params = collect(model, [](const Parameter<float>& p) { return is_encoder(p) || is_decoder(p); });
  AdamW opt(params, cfg.optimizer, model.head_layer(), false);

  const Index n = static_cast<Index>(corpus.size());
  const Index batch = std::min<Index>(cfg.batch_size, n);
  const Index steps_per_epoch = (n + batch - 1) / batch;
  const Index total_steps = steps_per_epoch * cfg.epochs;
  const Index warmup = std::llround(cfg.optimizer.warmup_epochs * static_cast<double>(steps_per_epoch));
  const Index num_patches = cfg.model.encoder.num_patches();
  const int patch = cfg.model.encoder.patch_size;
  const auto start = Clock::now();
  double last_grad_norm = 0.0;

  std::vector<std::size_t> order(corpus.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    order_rng.shuffle(order);
    EpochAccumulator acc;
    for (Index s = 0; s < steps_per_epoch; ++s) {
      const Index step = opt.steps_taken();
      const double lr = scheduled_lr(cfg.optimizer.lr, step, warmup, total_steps);
      const Index lo = s * batch;
      const Index hi = std::min(n, lo + batch);
      std::vector<Image> images;
      std::vector<MaskPlan> plans;
      for (Index i = lo; i < hi; ++i) {
        images.push_back(augment_image(corpus.samples[order[static_cast<std::size_t>(i)]].image, cfg.augment, augment_rng));
        plans.push_back(sample_mask(num_patches, cfg.mask_ratio, mask_rng));
      }
      const Index b = hi - lo;
      try {
        model.zero_grad();
        const Matrix<float> target = stack_patches<float>(images, patch);
        const auto enc = encode(model, std::span<const Image>(images), plans);
        const Matrix<float> pred = model.decoder.forward(enc.tokens, plans);
        double loss = 0.0;
        Matrix<float> dpred(pred.rows(), pred.cols());
        for (Index k = 0; k < b; ++k) {
          const auto r = reconstruction_loss_with_grad<float>(pred.middleRows(k * num_patches, num_patches),
                                                              target.middleRows(k * num_patches, num_patches),
                                                              plans[static_cast<std::size_t>(k)], cfg.reconstruction);
          loss += static_cast<double>(r.value) / static_cast<double>(b);
          dpred.middleRows(k * num_patches, num_patches) = r.grad / static_cast<float>(b);
        }
        if (!std::isfinite(loss)) throw NumericFault("non-finite reconstruction loss");
        model.encoder.backward(model.decoder.backward(dpred));
        last_grad_norm = gradient_norm(params);
        if (!std::isfinite(last_grad_norm)) throw NumericFault("non-finite gradient");
        opt.step(lr);
        acc.add(static_cast<double>(b), loss, 0.0, 0.0, loss);
      } catch (const NumericFault& e) {
        throw NumericFault(std::string("pretrain: ") + e.what() + fault_context(step, lr, last_grad_norm), e.layer);
      }
    }
    EpochRecord rec = acc.finish(epoch, Stage::pretrain);
    rec.wall_time = std::chrono::duration<double>(Clock::now() - start).count();
    result.report.append(rec);
    if (on_epoch) on_epoch(rec);
  }
  return result;
}

TrainResult finetune(const Dataset& train, const Checkpoint* init, const TrainConfig& cfg_in, RandomSource& rng,
                     const Dataset* eval, const EpochCallback& on_epoch) {
  expects(cfg_in.stage == Stage::finetune, "finetune: config stage must be finetune");
  expects(!train.empty(), "finetune: training set is empty");
  TrainConfig cfg = cfg_in;
  cfg.model.num_classes = train.num_classes();
  cfg.validate();
  check_image_shape(train, cfg.model.encoder, "finetune");
  if (eval != nullptr && eval->num_classes() != train.num_classes()) {
    throw ConfigError("finetune: evaluation set has " + std::to_string(eval->num_classes()) + " classes, training set " +
                      std::to_string(train.num_classes()));
  }

  RandomSource init_rng = rng.split();
  RandomSource order_rng = rng.split();
  RandomSource augment_rng = rng.split();
  RandomSource mix_rng = rng.split();

  TrainResult result{Model<float>(cfg.model, init_rng), {}};
  Model<float>& model = result.model;
  if (init != nullptr) restore_tensors(model, *init, is_encoder);

  const bool use_contrastive = cfg.contrastive != ContrastiveMode::none;
  auto params = collect(model, [&](const Parameter<float>& p) {
    return !p.droppable && (use_contrastive || !is_projection(p));
  });
  AdamW opt(params, cfg.optimizer, model.head_layer(), true);

  const Index n = static_cast<Index>(train.size());
  const Index batch = std::min<Index>(cfg.batch_size, n);
  // A trailing batch of one input cannot form two-view pairs with a partner; it is dropped.
  const Index steps_per_epoch = n / batch + (n % batch >= 2 ? 1 : 0);
  expects(steps_per_epoch > 0, "finetune: need at least 2 training samples");
  const Index total_steps = steps_per_epoch * cfg.epochs;
  const Index warmup = std::llround(cfg.optimizer.warmup_epochs * static_cast<double>(steps_per_epoch));
  const auto start = Clock::now();
  double last_grad_norm = 0.0;

  std::vector<std::size_t> order(train.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    if (cfg.balanced_sampling) {
      order = balanced_sampler(train, order_rng);
    } else {
      order_rng.shuffle(order);
    }
    EpochAccumulator acc;
    for (Index s = 0; s < steps_per_epoch; ++s) {
      const Index step = opt.steps_taken();
      const double lr = scheduled_lr(cfg.optimizer.lr, step, warmup, total_steps);
      const Index lo = s * batch;
      const Index hi = std::min(n, lo + batch);
      std::vector<LabeledSample> inputs;
      for (Index i = lo; i < hi; ++i) inputs.push_back(train.samples[order[static_cast<std::size_t>(i)]]);
      const MultiviewBatch views = augment_two_views(inputs, cfg.augment, augment_rng);
      const MultiviewBatch mixed = mix_multiview(views, cfg.mix, mix_rng);
      const std::vector<SoftLabel> labels = mixed.labels();
      const std::vector<Image> images = images_of(mixed.samples);
      const Index m = static_cast<Index>(images.size());
      try {
        model.zero_grad();
        const auto enc = encode(model, std::span<const Image>(images));
        const Matrix<float> logits = model.classifier.forward(enc.embeddings.reps);
        const Matrix<float> targets = label_matrix<float>(labels);
        const LossValue<float> ce = cross_entropy<float>(logits, targets);
        double contrastive = 0.0;
        Matrix<float> dreps = model.classifier.backward(ce.grad);
        if (use_contrastive) {
          const ProjectionBatch<float> proj = model.projection.forward(enc.embeddings.reps);
          ContrastiveLoss<float> con;
          switch (cfg.contrastive) {
            case ContrastiveMode::mscl:
              con = mscl_loss<float>(proj.z, build_pair_mask(mixed, cfg.loss.threshold), cfg.loss.temperature);
              break;
            case ContrastiveMode::scl:
              // Same-class positives use each view's one-hot label from before mixing.
              con = scl_loss<float>(proj.z, views.labels(), cfg.loss.temperature);
              break;
            case ContrastiveMode::sscl: {
              std::vector<std::size_t> view_of;
              for (const Provenance& p : mixed.provenance) view_of.push_back(p.view_of);
              con = sscl_loss<float>(proj.z, view_of, cfg.loss.temperature);
              break;
            }
            case ContrastiveMode::none: break;
          }
          contrastive = con.value;
          acc.skipped += con.skipped_anchors;
          const Matrix<float> dz = static_cast<float>(cfg.loss.loss_weight) * con.grad;
          dreps += model.projection.backward(dz);
        }
        const double total = static_cast<double>(ce.value) + cfg.loss.loss_weight * contrastive;
        if (!std::isfinite(total)) throw NumericFault("non-finite fine-tuning loss");
        model.encoder.backward(pool_head_backward(enc.tokens, cfg.model.pool, dreps));
        last_grad_norm = gradient_norm(params);
        if (!std::isfinite(last_grad_norm)) throw NumericFault("non-finite gradient");
        opt.step(lr);
        acc.add(static_cast<double>(m), total, ce.value, contrastive, 0.0);
        for (Index r = 0; r < m; ++r) acc.correct += argmax_row(logits, r) == labels[static_cast<std::size_t>(r)].argmax();
        acc.seen += m;
      } catch (const NumericFault& e) {
        throw NumericFault(std::string("finetune: ") + e.what() + fault_context(step, lr, last_grad_norm), e.layer);
      }
    }
    EpochRecord rec = acc.finish(epoch, Stage::finetune);
    if (eval != nullptr) rec.eval_acc = evaluate(model, *eval).accuracy;
    rec.wall_time = std::chrono::duration<double>(Clock::now() - start).count();
    result.report.append(rec);
    if (on_epoch) on_epoch(rec);
  }
  return result;
}

Evaluation evaluate(Model<float>& model, const Dataset& data, int batch_size) {
  expects(batch_size >= 1, "evaluate: batch_size must be >= 1");
  const int k = model.config().num_classes;
  if (data.num_classes() != k) {
    throw ConfigError("evaluate: model head has " + std::to_string(k) + " classes but the dataset has " +
                      std::to_string(data.num_classes()));
  }
  Evaluation out;
  out.confusion = Eigen::MatrixXi::Zero(k, k);
  const Index n = static_cast<Index>(data.size());
  for (Index lo = 0; lo < n; lo += batch_size) {
    const Index hi = std::min<Index>(n, lo + batch_size);
    const std::vector<Image> images =
        images_of(std::span<const LabeledSample>(data.samples).subspan(static_cast<std::size_t>(lo),
                                                                        static_cast<std::size_t>(hi - lo)));
    const auto enc = encode(model, std::span<const Image>(images));
    const Matrix<float> logits = classify(model.classifier, enc.embeddings);
    for (Index r = 0; r < hi - lo; ++r) {
      const int truth = data.samples[static_cast<std::size_t>(lo + r)].label.argmax();
      ++out.confusion(truth, argmax_row(logits, r));
    }
  }
  out.total = n;
  out.correct = out.confusion.trace();
  out.accuracy = n > 0 ? static_cast<double>(out.correct) / static_cast<double>(n) : 0.0;
  out.per_class.assign(static_cast<std::size_t>(k), 0.0);
  for (int c = 0; c < k; ++c) {
    const int row = out.confusion.row(c).sum();
    if (row > 0) out.per_class[static_cast<std::size_t>(c)] = static_cast<double>(out.confusion(c, c)) / row;
  }
  return out;
}

Matrix<float> embed(Model<float>& model, const Dataset& data, int batch_size) {
  expects(batch_size >= 1, "embed: batch_size must be >= 1");
  const Index n = static_cast<Index>(data.size());
  Matrix<float> out(n, model.config().encoder.embed_dim);
  for (Index lo = 0; lo < n; lo += batch_size) {
    const Index hi = std::min<Index>(n, lo + batch_size);
    const std::vector<Image> images =
        images_of(std::span<const LabeledSample>(data.samples).subspan(static_cast<std::size_t>(lo),
                                                                        static_cast<std::size_t>(hi - lo)));
    out.middleRows(lo, hi - lo) = encode(model, std::span<const Image>(images)).embeddings.reps;
  }
  return out;
}

Checkpoint make_checkpoint(const Model<float>& model, const TrainConfig& cfg, int epoch) {
  Checkpoint ckpt;
  TrainConfig recorded = cfg;
  recorded.model = model.config();
  ckpt.metadata = {{"format_version", kCheckpointFormatVersion},
                   {"stage", to_string(cfg.stage)},
                   {"epoch", epoch},
                   {"seed", cfg.seed},
                   {"config", to_json(recorded)}};
  ckpt.tensors = capture_tensors(model);
  return ckpt;
}

Model<float> model_from_checkpoint(const Checkpoint& ckpt) {
  if (!ckpt.metadata.contains("config") || !ckpt.metadata["config"].contains("model")) {
    throw LoadError("checkpoint metadata has no model configuration");
  }
  ModelConfig mc;
  try {
    mc = model_config_from_json(ckpt.metadata["config"]["model"]);
  } catch (const ConfigError& e) {
    throw LoadError(std::string("checkpoint metadata: ") + e.what());
  }
  RandomSource rng(0);
  Model<float> model(mc, rng);
  restore_tensors(model, ckpt, [&](const Parameter<float>& p) { return !p.droppable || ckpt.find(p.name) != nullptr; });
  return model;
}

}  // namespace mimic

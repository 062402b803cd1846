#pragma once

// Desk-scale ViT encoder, masked-autoencoder decoder, and the projection and
// classification heads used at fine-tuning time.

#include "mimic/core.hpp"
#include "mimic/masking.hpp"
#include "mimic/nn.hpp"
#include "mimic/random.hpp"

#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace mimic {

struct EncoderConfig {
  int image_size = 32;
  int channels = 1;
  int patch_size = 4;
  int embed_dim = 64;
  int depth = 4;
  int num_heads = 4;
  double mlp_ratio = 4.0;
  bool use_class_token = false;

  int grid() const { return image_size / patch_size; }
  int num_patches() const { return grid() * grid(); }
  int patch_dim() const { return patch_size * patch_size * channels; }
  void validate() const;
};

struct DecoderConfig {
  int embed_dim = 32;
  int depth = 2;
  int num_heads = 4;
  double mlp_ratio = 4.0;

  void validate() const;
};

enum class PoolMode { gap, class_token };
enum class ProjectionKind { none, linear, dense };

struct ModelConfig {
  EncoderConfig encoder;
  DecoderConfig decoder;
  PoolMode pool = PoolMode::gap;
  ProjectionKind projection = ProjectionKind::dense;
  int projection_dim = 128;
  int num_classes = 7;

  void validate() const;
};

std::string to_string(PoolMode mode);
std::string to_string(ProjectionKind kind);
PoolMode parse_pool_mode(const std::string& s);
ProjectionKind parse_projection_kind(const std::string& s);

/// Encoder output: one token per row, `seq_len` rows per sample.
template <typename Scalar>
struct TokenBatch {
  Matrix<Scalar> tokens;
  Index batch = 0;
  Index seq_len = 0;
  bool has_class_token = false;

  Index patch_tokens() const { return seq_len - (has_class_token ? 1 : 0); }
};

template <typename Scalar>
struct EmbeddingBatch {
  Matrix<Scalar> reps;  // batch × embed_dim
};

template <typename Scalar>
struct ProjectionBatch {
  Matrix<Scalar> z;  // batch × proj_dim, unit rows
  Index guarded_rows = 0;  // rows whose norm fell under the 1e-12 guard
};

/// Stacks the patches of every image: (B·D) × patch_dim.
template <typename Scalar>
Matrix<Scalar> stack_patches(std::span<const Image> images, int patch_size) {
  expects(!images.empty(), "stack_patches: empty image batch");
  Matrix<Scalar> out;
  Index rows_per = 0;
  for (std::size_t i = 0; i < images.size(); ++i) {
    const PatchGrid<float> grid = patchify(images[i], patch_size);
    if (i == 0) {
      rows_per = grid.num_patches();
      out.resize(rows_per * static_cast<Index>(images.size()), grid.patch_length());
    }
    expects(grid.num_patches() == rows_per && grid.patch_length() == out.cols(),
            "stack_patches: images in a batch must share one shape");
    out.middleRows(static_cast<Index>(i) * rows_per, rows_per) = grid.patches.template cast<Scalar>();
  }
  return out;
}

/// Fixed 2-D sine-cosine positional table, one row per grid cell in
/// row-major order. Half the channels encode the row, half the column.
template <typename Scalar>
Matrix<Scalar> sincos_pos_embed(int grid, Index dim) {
  expects(dim % 4 == 0, "positional embedding: embed_dim must be divisible by 4");
  const Index quarter = dim / 4;
  Matrix<Scalar> out(static_cast<Index>(grid) * grid, dim);
  for (int r = 0; r < grid; ++r) {
    for (int c = 0; c < grid; ++c) {
      const Index row = static_cast<Index>(r) * grid + c;
      for (Index i = 0; i < quarter; ++i) {
        const double omega = std::pow(10000.0, -static_cast<double>(i) / static_cast<double>(quarter));
        out(row, i) = static_cast<Scalar>(std::sin(r * omega));
        out(row, quarter + i) = static_cast<Scalar>(std::cos(r * omega));
        out(row, 2 * quarter + i) = static_cast<Scalar>(std::sin(c * omega));
        out(row, 3 * quarter + i) = static_cast<Scalar>(std::cos(c * omega));
      }
    }
  }
  return out;
}

template <typename Scalar>
class Encoder {
 public:
  Encoder() = default;
  Encoder(const EncoderConfig& cfg, RandomSource& rng) : cfg_(cfg) {
    cfg.validate();
    const Index d = cfg.embed_dim;
    patch_embed = Linear<Scalar>("encoder.patch_embed", cfg.patch_dim(), d, 0, rng, true, WeightInit::xavier_uniform);
    pos_embed = sincos_pos_embed<Scalar>(cfg.grid(), d);
    if (cfg.use_class_token) {
      class_token = Parameter<Scalar>("encoder.class_token", 1, d, 0, false);
      class_token.fill_truncated_normal(rng, 0.02);
    }
    for (int i = 0; i < cfg.depth; ++i) {
      blocks.emplace_back("encoder.blocks." + std::to_string(i), d, cfg.num_heads, cfg.mlp_ratio, i + 1, rng);
    }
    norm = LayerNorm<Scalar>("encoder.norm", d, cfg.depth + 1);
  }

  const EncoderConfig& config() const { return cfg_; }

  /// `patches` holds `batch` stacked patch grids. With `plans`, only the
  /// visible patches of each sample enter the transformer.
  TokenBatch<Scalar> forward(const Matrix<Scalar>& patches, Index batch,
                             std::span<const MaskPlan> plans = {}) {
    const Index num_patches = cfg_.num_patches();
    expects(batch > 0 && patches.rows() == batch * num_patches && patches.cols() == cfg_.patch_dim(),
            "encode: patch matrix does not match the encoder configuration");
    expects(plans.empty() || static_cast<Index>(plans.size()) == batch, "encode: need one mask plan per sample");

    positions_.clear();
    if (plans.empty()) {
      for (Index b = 0; b < batch; ++b)
        for (Index p = 0; p < num_patches; ++p) positions_.push_back(p);
    } else {
      const std::size_t visible = plans[0].visible().size();
      for (const MaskPlan& plan : plans) {
        expects(plan.num_patches == num_patches, "encode: mask plan has the wrong patch count");
        const auto vis = plan.visible();
        expects(vis.size() == visible, "encode: every mask plan in a batch must keep the same count");
        positions_.insert(positions_.end(), vis.begin(), vis.end());
      }
    }
    const Index kept = static_cast<Index>(positions_.size()) / batch;

    // Pixels are standardized as (x − 0.5) / 0.25 so patch content and the
    // unit-scale positional table enter the first block at similar magnitudes.
    Matrix<Scalar> selected(static_cast<Index>(positions_.size()), patches.cols());
    for (Index b = 0; b < batch; ++b)
      for (Index j = 0; j < kept; ++j)
        selected.row(b * kept + j) = patches.row(b * num_patches + positions_[b * kept + j]);
    selected = (selected.array() - Scalar(0.5)) * Scalar(4);

    Matrix<Scalar> x = patch_embed.forward(selected);
    for (Index r = 0; r < x.rows(); ++r) x.row(r) += pos_embed.row(positions_[r]);

    TokenBatch<Scalar> out;
    out.batch = batch;
    out.has_class_token = cfg_.use_class_token;
    out.seq_len = kept + (cfg_.use_class_token ? 1 : 0);
    if (cfg_.use_class_token) {
      Matrix<Scalar> with_cls(batch * out.seq_len, x.cols());
      for (Index b = 0; b < batch; ++b) {
        with_cls.row(b * out.seq_len) = class_token.value.row(0);
        with_cls.middleRows(b * out.seq_len + 1, kept) = x.middleRows(b * kept, kept);
      }
      x = std::move(with_cls);
    }
    for (std::size_t i = 0; i < blocks.size(); ++i) {
      x = blocks[i].forward(x, out.seq_len);
      if (!x.allFinite()) {
        throw NumericFault("encoder block " + std::to_string(i) + " produced non-finite activations",
                           static_cast<int>(i) + 1);
      }
    }
    out.tokens = norm.forward(x);
    return out;
  }

  void backward(const Matrix<Scalar>& dtokens) {
    Matrix<Scalar> dx = norm.backward(dtokens);
    for (auto it = blocks.rbegin(); it != blocks.rend(); ++it) dx = it->backward(dx);
    const Index rows = static_cast<Index>(positions_.size());
    if (cfg_.use_class_token) {
      const Index batch = dx.rows() - rows;
      const Index kept = rows / batch;
      Matrix<Scalar> dpatch(rows, dx.cols());
      for (Index b = 0; b < batch; ++b) {
        class_token.grad.row(0) += dx.row(b * (kept + 1));
        dpatch.middleRows(b * kept, kept) = dx.middleRows(b * (kept + 1) + 1, kept);
      }
      dx = std::move(dpatch);
    }
    patch_embed.backward(dx);
  }

  template <typename F>
  void visit(F&& f) { visit_all(*this, f); }
  template <typename F>
  void visit(F&& f) const { visit_all(*this, f); }

  Linear<Scalar> patch_embed;
  Matrix<Scalar> pos_embed;  // fixed, not trained
  Parameter<Scalar> class_token;
  std::vector<TransformerBlock<Scalar>> blocks;
  LayerNorm<Scalar> norm;

 private:
  template <typename Self, typename F>
  static void visit_all(Self& self, F& f) {
    self.patch_embed.visit(f);
    if (self.cfg_.use_class_token) f(self.class_token);
    for (auto& block : self.blocks) block.visit(f);
    self.norm.visit(f);
  }

  EncoderConfig cfg_;
  std::vector<Index> positions_;
};

/// Pooled representation per sample: mean of the patch tokens (gap) or the
/// class token alone.
template <typename Scalar>
EmbeddingBatch<Scalar> pool_head(const TokenBatch<Scalar>& tokens, PoolMode mode) {
  EmbeddingBatch<Scalar> out;
  out.reps.resize(tokens.batch, tokens.tokens.cols());
  if (mode == PoolMode::class_token) {
    if (!tokens.has_class_token) throw ConfigError("pool_head: class-token pooling requested but the sequence has none");
    for (Index b = 0; b < tokens.batch; ++b) out.reps.row(b) = tokens.tokens.row(b * tokens.seq_len);
    return out;
  }
  const Index first = tokens.has_class_token ? 1 : 0;
  const Index n = tokens.patch_tokens();
  for (Index b = 0; b < tokens.batch; ++b) {
    out.reps.row(b) = tokens.tokens.middleRows(b * tokens.seq_len + first, n).colwise().sum() / static_cast<Scalar>(n);
  }
  return out;
}

template <typename Scalar>
Matrix<Scalar> pool_head_backward(const TokenBatch<Scalar>& tokens, PoolMode mode, const Matrix<Scalar>& dreps) {
  Matrix<Scalar> dtokens = Matrix<Scalar>::Zero(tokens.tokens.rows(), tokens.tokens.cols());
  if (mode == PoolMode::class_token) {
    for (Index b = 0; b < tokens.batch; ++b) dtokens.row(b * tokens.seq_len) = dreps.row(b);
    return dtokens;
  }
  const Index first = tokens.has_class_token ? 1 : 0;
  const Index n = tokens.patch_tokens();
  for (Index b = 0; b < tokens.batch; ++b) {
    dtokens.middleRows(b * tokens.seq_len + first, n).rowwise() = dreps.row(b) / static_cast<Scalar>(n);
  }
  return dtokens;
}

/// Lightweight transformer that reconstructs every patch from the visible
/// encoder tokens plus a shared mask token at the masked positions.
template <typename Scalar>
class Decoder {
 public:
  Decoder() = default;
  Decoder(const EncoderConfig& enc, const DecoderConfig& cfg, RandomSource& rng) : enc_(enc), cfg_(cfg) {
    cfg.validate();
    const int layer = enc.depth + 1;
    const Index d = cfg.embed_dim;
    embed = Linear<Scalar>("decoder.embed", enc.embed_dim, d, layer, rng);
    mask_token = Parameter<Scalar>("decoder.mask_token", 1, d, layer, false);
    mask_token.fill_truncated_normal(rng, 0.02);
    pos_embed = sincos_pos_embed<Scalar>(enc.grid(), d);
    for (int i = 0; i < cfg.depth; ++i) {
      blocks.emplace_back("decoder.blocks." + std::to_string(i), d, cfg.num_heads, cfg.mlp_ratio, layer, rng);
    }
    norm = LayerNorm<Scalar>("decoder.norm", d, layer);
    head = Linear<Scalar>("decoder.head", d, enc.patch_dim(), layer, rng);
    visit([](Parameter<Scalar>& p) { p.droppable = true; });
  }

  /// Returns predicted patches, (B·D) × patch_dim.
  Matrix<Scalar> forward(const TokenBatch<Scalar>& encoded, std::span<const MaskPlan> plans) {
    const Index num_patches = enc_.num_patches();
    const Index batch = encoded.batch;
    expects(static_cast<Index>(plans.size()) == batch, "decode: need one mask plan per sample");
    const Index kept = encoded.patch_tokens();
    const Index first = encoded.has_class_token ? 1 : 0;
    batch_ = batch;
    kept_ = kept;
    enc_seq_len_ = encoded.seq_len;
    has_class_token_ = encoded.has_class_token;

    Matrix<Scalar> visible(batch * kept, encoded.tokens.cols());
    for (Index b = 0; b < batch; ++b)
      visible.middleRows(b * kept, kept) = encoded.tokens.middleRows(b * encoded.seq_len + first, kept);
    const Matrix<Scalar> embedded = embed.forward(visible);

    visible_slots_.assign(static_cast<std::size_t>(batch * kept), 0);
    masked_slots_.clear();
    Matrix<Scalar> x(batch * num_patches, cfg_.embed_dim);
    for (Index b = 0; b < batch; ++b) {
      const MaskPlan& plan = plans[static_cast<std::size_t>(b)];
      expects(plan.num_patches == num_patches, "decode: mask plan has the wrong patch count");
      const auto vis = plan.visible();
      expects(static_cast<Index>(vis.size()) == kept, "decode: mask plan does not match the encoder token count");
      for (Index j = 0; j < kept; ++j) {
        const Index slot = b * num_patches + vis[static_cast<std::size_t>(j)];
        visible_slots_[static_cast<std::size_t>(b * kept + j)] = slot;
        x.row(slot) = embedded.row(b * kept + j);
      }
      for (Index m : plan.masked) {
        masked_slots_.push_back(b * num_patches + m);
        x.row(b * num_patches + m) = mask_token.value.row(0);
      }
      x.middleRows(b * num_patches, num_patches) += pos_embed;
    }
    for (auto& block : blocks) x = block.forward(x, num_patches);
    if (!x.allFinite()) throw NumericFault("decoder produced non-finite activations", enc_.depth + 1);
    return head.forward(norm.forward(x));
  }

  /// Returns the gradient w.r.t. the encoder tokens it was given.
  Matrix<Scalar> backward(const Matrix<Scalar>& dpred) {
    Matrix<Scalar> dx = norm.backward(head.backward(dpred));
    for (auto it = blocks.rbegin(); it != blocks.rend(); ++it) dx = it->backward(dx);
    for (Index slot : masked_slots_) mask_token.grad.row(0) += dx.row(slot);
    Matrix<Scalar> dembedded(batch_ * kept_, dx.cols());
    for (std::size_t i = 0; i < visible_slots_.size(); ++i) dembedded.row(static_cast<Index>(i)) = dx.row(visible_slots_[i]);
    const Matrix<Scalar> dvisible = embed.backward(dembedded);
    const Index first = has_class_token_ ? 1 : 0;
    Matrix<Scalar> dtokens = Matrix<Scalar>::Zero(batch_ * enc_seq_len_, dvisible.cols());
    for (Index b = 0; b < batch_; ++b)
      dtokens.middleRows(b * enc_seq_len_ + first, kept_) = dvisible.middleRows(b * kept_, kept_);
    return dtokens;
  }

  template <typename F>
  void visit(F&& f) { visit_all(*this, f); }
  template <typename F>
  void visit(F&& f) const { visit_all(*this, f); }

  Linear<Scalar> embed;
  Parameter<Scalar> mask_token;
  Matrix<Scalar> pos_embed;  // fixed, not trained
  std::vector<TransformerBlock<Scalar>> blocks;
  LayerNorm<Scalar> norm;
  Linear<Scalar> head;

 private:
  template <typename Self, typename F>
  static void visit_all(Self& self, F& f) {
    self.embed.visit(f);
    f(self.mask_token);
    for (auto& block : self.blocks) block.visit(f);
    self.norm.visit(f);
    self.head.visit(f);
  }

  EncoderConfig enc_;
  DecoderConfig cfg_;
  Index batch_ = 0;
  Index kept_ = 0;
  Index enc_seq_len_ = 0;
  bool has_class_token_ = false;
  std::vector<Index> visible_slots_;
  std::vector<Index> masked_slots_;
};

/// Row-wise L2 normalization; rows with norm under 1e-12 are divided by the
/// guard instead and counted.
template <typename Scalar>
ProjectionBatch<Scalar> l2_normalize_rows(const Matrix<Scalar>& y, Vector<Scalar>* norms_out = nullptr) {
  constexpr Scalar kGuard = Scalar(1e-12);
  ProjectionBatch<Scalar> out;
  out.z.resize(y.rows(), y.cols());
  Vector<Scalar> norms(y.rows());
  for (Index r = 0; r < y.rows(); ++r) {
    Scalar n = y.row(r).norm();
    if (n < kGuard) {
      n = kGuard;
      ++out.guarded_rows;
    }
    norms[r] = n;
    out.z.row(r) = y.row(r) / n;
  }
  if (norms_out) *norms_out = std::move(norms);
  return out;
}

template <typename Scalar>
class ProjectionHead {
 public:
  ProjectionHead() = default;
  ProjectionHead(ProjectionKind kind, Index embed_dim, Index proj_dim, int layer, RandomSource& rng) : kind_(kind) {
    if (kind == ProjectionKind::linear) {
      first = Linear<Scalar>("projection.fc1", embed_dim, proj_dim, layer, rng);
    } else if (kind == ProjectionKind::dense) {
      first = Linear<Scalar>("projection.fc1", embed_dim, embed_dim, layer, rng);
      second = Linear<Scalar>("projection.fc2", embed_dim, proj_dim, layer, rng);
    }
  }

  ProjectionKind kind() const { return kind_; }

  ProjectionBatch<Scalar> forward(const Matrix<Scalar>& reps) {
    Matrix<Scalar> y;
    switch (kind_) {
      case ProjectionKind::none:
        y = reps;
        break;
      case ProjectionKind::linear:
        expects(reps.cols() == first.weight.value.rows(), "project: representation width does not match the head");
        y = first.forward(reps);
        break;
      case ProjectionKind::dense:
        expects(reps.cols() == first.weight.value.rows(), "project: representation width does not match the head");
        hidden_ = first.forward(reps);
        y = second.forward(hidden_.cwiseMax(Scalar(0)));
        break;
    }
    ProjectionBatch<Scalar> out = l2_normalize_rows<Scalar>(y, &norms_);
    z_ = out.z;
    return out;
  }

  Matrix<Scalar> backward(const Matrix<Scalar>& dz) {
    // z = y/‖y‖  ⇒  dy = (dz − z·(z⋅dz)) / ‖y‖
    const Vector<Scalar> dots = (dz.array() * z_.array()).rowwise().sum();
    const Matrix<Scalar> dy = (dz - (z_.array().colwise() * dots.array()).matrix()).array().colwise() / norms_.array();
    switch (kind_) {
      case ProjectionKind::none:
        return dy;
      case ProjectionKind::linear:
        return first.backward(dy);
      case ProjectionKind::dense: {
        const Matrix<Scalar> dh = second.backward(dy);
        const Matrix<Scalar> dpre = (hidden_.array() > Scalar(0)).select(dh, Scalar(0));
        return first.backward(dpre);
      }
    }
    return dy;
  }

  template <typename F>
  void visit(F&& f) { visit_all(*this, f); }
  template <typename F>
  void visit(F&& f) const { visit_all(*this, f); }

  Linear<Scalar> first;
  Linear<Scalar> second;

 private:
  template <typename Self, typename F>
  static void visit_all(Self& self, F& f) {
    if (self.kind_ != ProjectionKind::none) self.first.visit(f);
    if (self.kind_ == ProjectionKind::dense) self.second.visit(f);
  }

  ProjectionKind kind_ = ProjectionKind::dense;
  Matrix<Scalar> hidden_;
  Matrix<Scalar> z_;
  Vector<Scalar> norms_;
};

/// Linear classification head; logits only, softmax lives in the loss.
template <typename Scalar>
class Classifier {
 public:
  Classifier() = default;
  Classifier(Index embed_dim, Index num_classes, int layer, RandomSource& rng)
      : fc("classifier", embed_dim, num_classes, layer, rng) {}

  Matrix<Scalar> forward(const Matrix<Scalar>& reps) {
    expects(reps.cols() == fc.weight.value.rows(), "classify: representation width does not match the head");
    return fc.forward(reps);
  }
  Matrix<Scalar> backward(const Matrix<Scalar>& dlogits) { return fc.backward(dlogits); }

  template <typename F>
  void visit(F&& f) { fc.visit(f); }
  template <typename F>
  void visit(F&& f) const { fc.visit(f); }

  Linear<Scalar> fc;
};

template <typename Scalar>
class Model {
 public:
  Model() = default;
  Model(const ModelConfig& cfg, RandomSource& rng) : config_(cfg) {
    cfg.validate();
    const int head_layer = cfg.encoder.depth + 1;
    encoder = Encoder<Scalar>(cfg.encoder, rng);
    decoder = Decoder<Scalar>(cfg.encoder, cfg.decoder, rng);
    const Index proj_dim = cfg.projection == ProjectionKind::none ? cfg.encoder.embed_dim : cfg.projection_dim;
    projection = ProjectionHead<Scalar>(cfg.projection, cfg.encoder.embed_dim, proj_dim, head_layer, rng);
    classifier = Classifier<Scalar>(cfg.encoder.embed_dim, cfg.num_classes, head_layer, rng);
  }

  const ModelConfig& config() const { return config_; }
  /// Index of the head layer; encoder blocks are 1..depth, embeddings 0.
  int head_layer() const { return config_.encoder.depth + 1; }

  template <typename F>
  void visit(F&& f) {
    encoder.visit(f);
    decoder.visit(f);
    projection.visit(f);
    classifier.visit(f);
  }
  template <typename F>
  void visit(F&& f) const {
    encoder.visit(f);
    decoder.visit(f);
    projection.visit(f);
    classifier.visit(f);
  }

  void zero_grad() {
    visit([](Parameter<Scalar>& p) { p.zero_grad(); });
  }

  Index parameter_count() const {
    Index n = 0;
    visit([&](const Parameter<Scalar>& p) { n += p.value.size(); });
    return n;
  }

  Encoder<Scalar> encoder;
  Decoder<Scalar> decoder;
  ProjectionHead<Scalar> projection;
  Classifier<Scalar> classifier;

 private:
  ModelConfig config_;
};

template <typename Scalar>
struct Encoded {
  TokenBatch<Scalar> tokens;
  EmbeddingBatch<Scalar> embeddings;
};

/// Patchifies, encodes, and pools a batch of images.
template <typename Scalar>
Encoded<Scalar> encode(Model<Scalar>& model, std::span<const Image> images, std::span<const MaskPlan> plans = {}) {
  const EncoderConfig& cfg = model.config().encoder;
  for (const Image& img : images) {
    if (img.height() != cfg.image_size || img.width() != cfg.image_size || img.channels() != cfg.channels) {
      throw ContractViolation("encode: image is " + std::to_string(img.height()) + "x" + std::to_string(img.width()) +
                              "x" + std::to_string(img.channels()) + ", encoder expects " +
                              std::to_string(cfg.image_size) + "x" + std::to_string(cfg.image_size) + "x" +
                              std::to_string(cfg.channels));
    }
  }
  Encoded<Scalar> out;
  out.tokens = model.encoder.forward(stack_patches<Scalar>(images, cfg.patch_size),
                                     static_cast<Index>(images.size()), plans);
  out.embeddings = pool_head(out.tokens, model.config().pool);
  return out;
}

template <typename Scalar>
ProjectionBatch<Scalar> project(ProjectionHead<Scalar>& head, const EmbeddingBatch<Scalar>& reps) {
  return head.forward(reps.reps);
}

template <typename Scalar>
Matrix<Scalar> classify(Classifier<Scalar>& head, const EmbeddingBatch<Scalar>& reps) {
  return head.forward(reps.reps);
}

/// Reconstructs all patches of every sample from the visible tokens.
template <typename Scalar>
PatchGrid<Scalar> decode_sample(const Matrix<Scalar>& predictions, const EncoderConfig& cfg, Index sample) {
  PatchGrid<Scalar> grid;
  grid.grid_rows = grid.grid_cols = cfg.grid();
  grid.patch_size = cfg.patch_size;
  grid.channels = cfg.channels;
  grid.patches = predictions.middleRows(sample * cfg.num_patches(), cfg.num_patches());
  return grid;
}

}  // namespace mimic

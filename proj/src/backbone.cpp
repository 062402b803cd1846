#include "mimic/backbone.hpp"

namespace mimic {

void EncoderConfig::validate() const {
  if (image_size <= 0 || patch_size <= 0 || channels <= 0) throw ConfigError("encoder: sizes must be positive");
  if (image_size % patch_size != 0) {
    throw ConfigError("encoder: image_size " + std::to_string(image_size) + " is not divisible by patch_size " +
                      std::to_string(patch_size));
  }
  if (embed_dim <= 0 || num_heads <= 0 || embed_dim % num_heads != 0) {
    throw ConfigError("encoder: embed_dim must be a positive multiple of num_heads");
  }
  if (embed_dim % 4 != 0) throw ConfigError("encoder: embed_dim must be divisible by 4 (2-D sin-cos positions)");
  if (depth < 1) throw ConfigError("encoder: depth must be >= 1");
  if (!(mlp_ratio > 0.0)) throw ConfigError("encoder: mlp_ratio must be positive");
}

void DecoderConfig::validate() const {
  if (embed_dim <= 0 || num_heads <= 0 || embed_dim % num_heads != 0) {
    throw ConfigError("decoder: embed_dim must be a positive multiple of num_heads");
  }
  if (embed_dim % 4 != 0) throw ConfigError("decoder: embed_dim must be divisible by 4 (2-D sin-cos positions)");
  if (depth < 0) throw ConfigError("decoder: depth must be >= 0");
  if (!(mlp_ratio > 0.0)) throw ConfigError("decoder: mlp_ratio must be positive");
}

void ModelConfig::validate() const {
  encoder.validate();
  decoder.validate();
  if (num_classes < 2) throw ConfigError("model: num_classes must be >= 2");
  if (projection != ProjectionKind::none && projection_dim < 1) throw ConfigError("model: projection_dim must be >= 1");
  if (pool == PoolMode::class_token && !encoder.use_class_token) {
    throw ConfigError("model: class_token pooling requires use_class_token");
  }
}

std::string to_string(PoolMode mode) { return mode == PoolMode::gap ? "gap" : "class_token"; }

std::string to_string(ProjectionKind kind) {
  switch (kind) {
    case ProjectionKind::none: return "none";
    case ProjectionKind::linear: return "linear";
    case ProjectionKind::dense: return "dense";
  }
  return "dense";
}

PoolMode parse_pool_mode(const std::string& s) {
  if (s == "gap") return PoolMode::gap;
  if (s == "class_token") return PoolMode::class_token;
  throw ConfigError("unknown pool mode '" + s + "' (expected gap or class_token)");
}

ProjectionKind parse_projection_kind(const std::string& s) {
  if (s == "none") return ProjectionKind::none;
  if (s == "linear") return ProjectionKind::linear;
  if (s == "dense") return ProjectionKind::dense;
  throw ConfigError("unknown projection head '" + s + "' (expected none, linear or dense)");
}

}  // namespace mimic

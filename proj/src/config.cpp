#include "mimic/config.hpp"

#include <fstream>
#include <set>

namespace mimic {
namespace {

using nlohmann::json;

class Reader {
 public:
  Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j.is_object()) throw ConfigError("config: " + where() + " must be an object");
  }

  template <typename T>
  void get(const char* key, T& out) {
    if (!j_.contains(key)) return;
    seen_.insert(key);
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception& e) {
      throw ConfigError("config: " + path_ + key + ": " + e.what());
    }
  }

  template <typename Enum, typename Parse>
  void get_enum(const char* key, Enum& out, Parse parse) {
    std::string s;
    if (!j_.contains(key)) return;
    get(key, s);
    out = parse(s);
  }

  const json* child(const char* key) {
    if (!j_.contains(key)) return nullptr;
    seen_.insert(key);
    return &j_.at(key);
  }

  std::string child_path(const char* key) const { return path_ + key + "."; }

  void finish() const {
    for (const auto& item : j_.items()) {
      if (!seen_.contains(item.key())) throw ConfigError("config: unknown key '" + path_ + item.key() + "'");
    }
  }

 private:
  std::string where() const { return path_.empty() ? "top level" : path_.substr(0, path_.size() - 1); }

  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

json to_json(const EncoderConfig& c) {
  return {{"image_size", c.image_size}, {"channels", c.channels},   {"patch_size", c.patch_size},
          {"embed_dim", c.embed_dim},   {"depth", c.depth},         {"num_heads", c.num_heads},
          {"mlp_ratio", c.mlp_ratio},   {"use_class_token", c.use_class_token}};
}

json to_json(const DecoderConfig& c) {
  return {{"embed_dim", c.embed_dim}, {"depth", c.depth}, {"num_heads", c.num_heads}, {"mlp_ratio", c.mlp_ratio}};
}

void read(const json& j, const std::string& path, EncoderConfig& c) {
  Reader r(j, path);
  r.get("image_size", c.image_size);
  r.get("channels", c.channels);
  r.get("patch_size", c.patch_size);
  r.get("embed_dim", c.embed_dim);
  r.get("depth", c.depth);
  r.get("num_heads", c.num_heads);
  r.get("mlp_ratio", c.mlp_ratio);
  r.get("use_class_token", c.use_class_token);
  r.finish();
}

void read(const json& j, const std::string& path, DecoderConfig& c) {
  Reader r(j, path);
  r.get("embed_dim", c.embed_dim);
  r.get("depth", c.depth);
  r.get("num_heads", c.num_heads);
  r.get("mlp_ratio", c.mlp_ratio);
  r.finish();
}

void read(const json& j, const std::string& path, ModelConfig& c) {
  Reader r(j, path);
  if (const json* e = r.child("encoder")) read(*e, r.child_path("encoder"), c.encoder);
  if (const json* d = r.child("decoder")) read(*d, r.child_path("decoder"), c.decoder);
  r.get_enum("pool", c.pool, parse_pool_mode);
  r.get_enum("projection", c.projection, parse_projection_kind);
  r.get("projection_dim", c.projection_dim);
  r.get("num_classes", c.num_classes);
  r.finish();
}

}  // namespace

json to_json(const ModelConfig& c) {
  return {{"encoder", to_json(c.encoder)},
          {"decoder", to_json(c.decoder)},
          {"pool", to_string(c.pool)},
          {"projection", to_string(c.projection)},
          {"projection_dim", c.projection_dim},
          {"num_classes", c.num_classes}};
}

json to_json(const TrainConfig& c) {
  const OptimizerConfig& o = c.optimizer;
  const AugmentConfig& a = c.augment;
  return {{"stage", to_string(c.stage)},
          {"epochs", c.epochs},
          {"batch_size", c.batch_size},
          {"optimizer",
           {{"lr", o.lr},
            {"weight_decay", o.weight_decay},
            {"layer_decay", o.layer_decay},
            {"beta1", o.beta1},
            {"beta2", o.beta2},
            {"eps", o.eps},
            {"warmup_epochs", o.warmup_epochs}}},
          {"mask_ratio", c.mask_ratio},
          {"reconstruction",
           {{"normalize_targets", c.reconstruction.normalize_targets}, {"all_patches", c.reconstruction.all_patches}}},
          {"mix",
           {{"alpha", c.mix.alpha}, {"beta", c.mix.beta}, {"mode", to_string(c.mix.mode)}, {"enabled", c.mix.enabled}}},
          {"loss",
           {{"temperature", c.loss.temperature}, {"loss_weight", c.loss.loss_weight}, {"threshold", c.loss.threshold}}},
          {"augment",
           {{"enabled", a.enabled},
            {"scale_min", a.scale_min},
            {"scale_max", a.scale_max},
            {"ratio_min", a.ratio_min},
            {"ratio_max", a.ratio_max},
            {"flip_prob", a.flip_prob},
            {"color_jitter", a.color_jitter}}},
          {"contrastive", to_string(c.contrastive)},
          {"balanced_sampling", c.balanced_sampling},
          {"seed", c.seed},
          {"model", to_json(c.model)}};
}

ModelConfig model_config_from_json(const json& j, ModelConfig base) {
  read(j, "", base);
  return base;
}

TrainConfig train_config_from_json(const json& j, TrainConfig c) {
  Reader r(j, "");
  r.get_enum("stage", c.stage, parse_stage);
  r.get("epochs", c.epochs);
  r.get("batch_size", c.batch_size);
  if (const json* o = r.child("optimizer")) {
    Reader ro(*o, "optimizer.");
    ro.get("lr", c.optimizer.lr);
    ro.get("weight_decay", c.optimizer.weight_decay);
    ro.get("layer_decay", c.optimizer.layer_decay);
    ro.get("beta1", c.optimizer.beta1);
    ro.get("beta2", c.optimizer.beta2);
    ro.get("eps", c.optimizer.eps);
    ro.get("warmup_epochs", c.optimizer.warmup_epochs);
    ro.finish();
  }
  r.get("mask_ratio", c.mask_ratio);
  if (const json* rec = r.child("reconstruction")) {
    Reader rr(*rec, "reconstruction.");
    rr.get("normalize_targets", c.reconstruction.normalize_targets);
    rr.get("all_patches", c.reconstruction.all_patches);
    rr.finish();
  }
  if (const json* m = r.child("mix")) {
    Reader rm(*m, "mix.");
    rm.get("alpha", c.mix.alpha);
    rm.get("beta", c.mix.beta);
    rm.get_enum("mode", c.mix.mode, parse_mix_mode);
    rm.get("enabled", c.mix.enabled);
    rm.finish();
  }
  if (const json* l = r.child("loss")) {
    Reader rl(*l, "loss.");
    rl.get("temperature", c.loss.temperature);
    rl.get("loss_weight", c.loss.loss_weight);
    rl.get("threshold", c.loss.threshold);
    rl.finish();
  }
  if (const json* a = r.child("augment")) {
    Reader ra(*a, "augment.");
    ra.get("enabled", c.augment.enabled);
    ra.get("scale_min", c.augment.scale_min);
    ra.get("scale_max", c.augment.scale_max);
    ra.get("ratio_min", c.augment.ratio_min);
    ra.get("ratio_max", c.augment.ratio_max);
    ra.get("flip_prob", c.augment.flip_prob);
    ra.get("color_jitter", c.augment.color_jitter);
    ra.finish();
  }
  r.get_enum("contrastive", c.contrastive, parse_contrastive_mode);
  r.get("balanced_sampling", c.balanced_sampling);
  r.get("seed", c.seed);
  if (const json* m = r.child("model")) read(*m, "model.", c.model);
  r.finish();
  return c;
}

void DataConfig::validate() const {
  if (train_manifest.empty()) synthetic.validate();
  if (corpus_manifest.empty() && corpus_size < 1) throw ConfigError("data.corpus_size must be >= 1");
}

json to_json(const DataConfig& c) {
  const SyntheticSpec& s = c.synthetic;
  return {{"train_manifest", c.train_manifest},
          {"test_manifest", c.test_manifest},
          {"corpus_manifest", c.corpus_manifest},
          {"synthetic",
           {{"num_classes", s.num_classes},
            {"samples_per_class", s.samples_per_class},
            {"signature_seed", s.signature_seed},
            {"difficulty", s.difficulty},
            {"test_fraction", s.test_fraction},
            {"test_per_class", s.test_per_class}}},
          {"corpus_size", c.corpus_size},
          {"seed", c.seed},
          {"init", c.init},
          {"checkpoint", c.checkpoint}};
}

json to_json(const RunConfig& c) {
  json j = to_json(c.train);
  j["data"] = to_json(c.data);
  return j;
}

DataConfig data_config_from_json(const json& j, DataConfig c) {
  Reader r(j, "data.");
  r.get("train_manifest", c.train_manifest);
  r.get("test_manifest", c.test_manifest);
  r.get("corpus_manifest", c.corpus_manifest);
  if (const json* s = r.child("synthetic")) {
    Reader rs(*s, "data.synthetic.");
    rs.get("num_classes", c.synthetic.num_classes);
    rs.get("samples_per_class", c.synthetic.samples_per_class);
    rs.get("signature_seed", c.synthetic.signature_seed);
    rs.get("difficulty", c.synthetic.difficulty);
    rs.get("test_fraction", c.synthetic.test_fraction);
    rs.get("test_per_class", c.synthetic.test_per_class);
    rs.finish();
  }
  r.get("corpus_size", c.corpus_size);
  r.get("seed", c.seed);
  r.get("init", c.init);
  r.get("checkpoint", c.checkpoint);
  r.finish();
  return c;
}

RunConfig run_config_from_json(const json& j, RunConfig c) {
  if (!j.is_object()) throw ConfigError("config: top level must be an object");
  json rest = j;
  if (rest.contains("data")) {
    c.data = data_config_from_json(rest.at("data"), c.data);
    rest.erase("data");
  }
  c.train = train_config_from_json(rest, c.train);
  return c;
}

json read_json_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config file " + path);
  try {
    return json::parse(is, nullptr, true, true);
  } catch (const json::parse_error& e) {
    throw ConfigError("config file " + path + " is not valid JSON: " + e.what());
  }
}

}  // namespace mimic

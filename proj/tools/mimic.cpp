// Command-line front end: pre-training, fine-tuning, evaluation, gradient
// checks, synthetic data, embedding export, and hyper-parameter sweeps.
//
// Exit codes: 0 success, 1 runtime error, 2 usage or configuration error.

#include "mimic/checkpoint.hpp"
#include "mimic/config.hpp"
#include "mimic/data.hpp"
#include "mimic/gradcheck.hpp"
#include "mimic/trainer.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>

namespace fs = std::filesystem;
using nlohmann::json;

namespace mimic {
namespace {

constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

struct GlobalOptions {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out = "mimic_out";
  bool quiet = false;
};

struct Loaded {
  Dataset train;
  Dataset test;  // may be empty
};

RunConfig load_run_config(const GlobalOptions& g, Stage stage) {
  RunConfig rc;
  rc.train.stage = stage;
  if (!g.config_path.empty()) rc = run_config_from_json(read_json_file(g.config_path), rc);
  rc.train.stage = stage;
  if (g.seed) rc.train.seed = *g.seed;
  rc.train.validate();
  rc.data.validate();
  return rc;
}

void ensure_out_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory " + dir + ": " + ec.message());
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot write " + path.string());
  os << text;
  if (!os) throw IoError("write failed for " + path.string());
}

SyntheticSpec synthetic_spec(const DataConfig& data, const EncoderConfig& enc) {
  SyntheticSpec spec = data.synthetic;
  spec.image_size = enc.image_size;
  spec.channels = enc.channels;
  return spec;
}

/// Labeled train/test sets from manifests, or the synthetic task.
Loaded load_labeled(const DataConfig& data, const EncoderConfig& enc) {
  Loaded out;
  if (!data.train_manifest.empty()) {
    out.train = load_dataset(ingest(data.train_manifest), enc.image_size, enc.channels);
    if (!data.test_manifest.empty())
      out.test = load_dataset(ingest(data.test_manifest), enc.image_size, enc.channels);
    return out;
  }
  RandomSource root(data.seed);
  RandomSource task_rng = root.split();
  SyntheticSplit split = synthesize(synthetic_spec(data, enc), task_rng);
  out.train = std::move(split.train);
  out.test = std::move(split.test);
  return out;
}

/// Test split only; manifests win over the synthetic task.
Dataset load_test(const DataConfig& data, const EncoderConfig& enc) {
  if (!data.test_manifest.empty()) return load_dataset(ingest(data.test_manifest), enc.image_size, enc.channels);
  if (!data.train_manifest.empty()) throw ConfigError("data.test_manifest is required when data.train_manifest is set");
  return load_labeled(data, enc).test;
}

Dataset load_corpus(const DataConfig& data, const EncoderConfig& enc) {
  if (!data.corpus_manifest.empty()) return load_dataset(ingest(data.corpus_manifest), enc.image_size, enc.channels);
  RandomSource root(data.seed);
  root.split();  // the labeled task's stream
  RandomSource corpus_rng = root.split();
  return synthesize_corpus(data.corpus_size, enc.image_size, enc.channels, corpus_rng);
}

EpochCallback progress(const GlobalOptions& g, int epochs) {
  if (g.quiet) return {};
  return [epochs](const EpochRecord& r) {
    std::cerr << to_string(r.stage) << " epoch " << r.epoch << "/" << epochs << std::fixed << std::setprecision(4)
              << "  loss " << r.loss_total;
    if (r.stage == Stage::finetune) {
      std::cerr << "  ce " << r.loss_ce << "  con " << r.loss_contrastive << "  train_acc " << r.train_acc;
      if (r.eval_acc >= 0.0) std::cerr << "  eval_acc " << r.eval_acc;
    }
    std::cerr << std::setprecision(1) << "  " << r.wall_time << "s" << std::defaultfloat << '\n';
  };
}

json evaluation_json(const Evaluation& e, const Dataset& data) {
  json confusion = json::array();
  for (Index r = 0; r < e.confusion.rows(); ++r) {
    json row = json::array();
    for (Index c = 0; c < e.confusion.cols(); ++c) row.push_back(e.confusion(r, c));
    confusion.push_back(row);
  }
  return {{"accuracy", e.accuracy},   {"correct", e.correct},     {"total", e.total},
          {"per_class", e.per_class}, {"confusion", confusion}, {"class_names", data.class_names}};
}

std::optional<Checkpoint> load_init(const std::string& path) {
  if (path.empty()) return std::nullopt;
  return Checkpoint::load(path);
}

int cmd_pretrain(const GlobalOptions& g) {
  const RunConfig rc = load_run_config(g, Stage::pretrain);
  ensure_out_dir(g.out);
  const Dataset corpus = load_corpus(rc.data, rc.train.model.encoder);
  RandomSource rng(rc.train.seed);
  TrainResult res = pretrain(corpus, rc.train, rng, progress(g, rc.train.epochs));
  const fs::path out(g.out);
  res.report.save((out / "report.csv").string());
  make_checkpoint(res.model, rc.train, rc.train.epochs).save((out / "pretrain.ckpt").string());
  write_text(out / "config.json", to_json(rc).dump(2) + "\n");
  std::cout << "pretrain: final recon loss " << res.report.back().loss_recon << ", checkpoint "
            << (out / "pretrain.ckpt").string() << '\n';
  return 0;
}

int cmd_finetune(const GlobalOptions& g, const std::string& init_flag) {
  RunConfig rc = load_run_config(g, Stage::finetune);
  if (!init_flag.empty()) rc.data.init = init_flag;
  ensure_out_dir(g.out);
  const Loaded data = load_labeled(rc.data, rc.train.model.encoder);
  const std::optional<Checkpoint> init = load_init(rc.data.init);
  RandomSource rng(rc.train.seed);
  TrainResult res = finetune(data.train, init ? &*init : nullptr, rc.train, rng, data.test.empty() ? nullptr : &data.test,
                             progress(g, rc.train.epochs));
  const fs::path out(g.out);
  res.report.save((out / "report.csv").string());
  make_checkpoint(res.model, rc.train, rc.train.epochs).save((out / "finetune.ckpt").string());
  write_text(out / "config.json", to_json(rc).dump(2) + "\n");
  if (!data.test.empty()) {
    const Evaluation e = evaluate(res.model, data.test);
    write_text(out / "eval.json", evaluation_json(e, data.test).dump(2) + "\n");
    std::cout << "finetune: test accuracy " << e.accuracy << " (" << e.correct << "/" << e.total << ")\n";
  } else {
    std::cout << "finetune: final train accuracy " << res.report.back().train_acc << '\n';
  }
  return 0;
}

int cmd_eval(const GlobalOptions& g, const std::string& ckpt_flag) {
  RunConfig rc = load_run_config(g, Stage::finetune);
  if (!ckpt_flag.empty()) rc.data.checkpoint = ckpt_flag;
  if (rc.data.checkpoint.empty()) throw ConfigError("eval needs --checkpoint or data.checkpoint");
  const Checkpoint ckpt = Checkpoint::load(rc.data.checkpoint);
  Model<float> model = model_from_checkpoint(ckpt);
  const Dataset test = load_test(rc.data, model.config().encoder);
  const Evaluation e = evaluate(model, test);
  ensure_out_dir(g.out);
  write_text(fs::path(g.out) / "eval.json", evaluation_json(e, test).dump(2) + "\n");
  std::cout << "eval: accuracy " << e.accuracy << " (" << e.correct << "/" << e.total << ")\n";
  for (std::size_t k = 0; k < e.per_class.size(); ++k)
    std::cout << "  " << test.class_names[k] << ": " << e.per_class[k] << '\n';
  return 0;
}

int cmd_gradcheck(const GlobalOptions& g, GradCheckOptions opts) {
  if (g.seed) opts.seed = *g.seed;
  const std::vector<GradCheckCase> cases = run_gradient_checks(opts);
  json report = json::array();
  bool all = true;
  for (const GradCheckCase& c : cases) {
    std::cout << (c.pass ? "PASS " : "FAIL ") << std::left << std::setw(28) << c.name << " max rel err "
              << std::scientific << std::setprecision(3) << c.max_rel_error << std::defaultfloat << '\n';
    report.push_back({{"name", c.name}, {"max_rel_error", c.max_rel_error}, {"pass", c.pass}});
    all = all && c.pass;
  }
  ensure_out_dir(g.out);
  write_text(fs::path(g.out) / "gradcheck.json",
             json{{"points", opts.points}, {"step", opts.step}, {"tolerance", opts.tolerance}, {"cases", report}}.dump(2) +
                 "\n");
  if (!all) {
    std::cerr << "gradcheck: at least one case exceeded the tolerance\n";
    return kExitRuntime;
  }
  return 0;
}

int cmd_synth_data(const GlobalOptions& g, bool with_corpus) {
  RunConfig rc;
  if (!g.config_path.empty()) rc = run_config_from_json(read_json_file(g.config_path), rc);
  if (g.seed) rc.data.seed = *g.seed;
  rc.data.validate();
  const EncoderConfig& enc = rc.train.model.encoder;
  ensure_out_dir(g.out);
  RandomSource root(rc.data.seed);
  RandomSource task_rng = root.split();
  generate_synthetic(synthetic_spec(rc.data, enc), g.out, task_rng);
  if (with_corpus) {
    RandomSource corpus_rng = root.split();
    write_dataset(synthesize_corpus(rc.data.corpus_size, enc.image_size, enc.channels, corpus_rng),
                  (fs::path(g.out) / "corpus").string(), "corpus");
  }
  std::cout << "synth-data: wrote " << g.out << '\n';
  return 0;
}

int cmd_export(const GlobalOptions& g, const std::string& ckpt_flag) {
  RunConfig rc = load_run_config(g, Stage::finetune);
  if (!ckpt_flag.empty()) rc.data.checkpoint = ckpt_flag;
  if (rc.data.checkpoint.empty()) throw ConfigError("export-embeddings needs --checkpoint or data.checkpoint");
  const Checkpoint ckpt = Checkpoint::load(rc.data.checkpoint);
  Model<float> model = model_from_checkpoint(ckpt);
  const Dataset test = load_test(rc.data, model.config().encoder);
  const Matrix<float> reps = embed(model, test);
  ensure_out_dir(g.out);
  const std::string path = (fs::path(g.out) / "embeddings.csv").string();
  write_embeddings_csv(path, test, reps);
  std::cout << "export-embeddings: " << reps.rows() << " rows x " << reps.cols() << " dims -> " << path << '\n';
  return 0;
}

struct SweepAxes {
  std::vector<double> temperature{0.05, 0.07, 0.1, 0.2};
  std::vector<double> loss_weight{0.01, 0.1, 0.5, 1.0};
  std::vector<int> projection_dim{64, 128, 256, 512};
  std::vector<int> batch_size{16, 32, 64, 128};
  bool one_at_a_time = false;
};

struct SweepCell {
  double temperature;
  double loss_weight;
  int projection_dim;
  int batch_size;

  std::string name() const {
    std::ostringstream os;
    os << "tau" << temperature << "_w" << loss_weight << "_proj" << projection_dim << "_b" << batch_size;
    return os.str();
  }
};

/// Full Cartesian grid, or (one_at_a_time) each axis varied around the base
/// config with the other three held at their configured values.
std::vector<SweepCell> sweep_cells(const SweepAxes& axes, const TrainConfig& base) {
  std::vector<SweepCell> cells;
  const SweepCell b{base.loss.temperature, base.loss.loss_weight, base.model.projection_dim, base.batch_size};
  if (axes.one_at_a_time) {
    for (double t : axes.temperature) cells.push_back({t, b.loss_weight, b.projection_dim, b.batch_size});
    for (double w : axes.loss_weight) cells.push_back({b.temperature, w, b.projection_dim, b.batch_size});
    for (int p : axes.projection_dim) cells.push_back({b.temperature, b.loss_weight, p, b.batch_size});
    for (int bs : axes.batch_size) cells.push_back({b.temperature, b.loss_weight, b.projection_dim, bs});
    return cells;
  }
  for (double t : axes.temperature)
    for (double w : axes.loss_weight)
      for (int p : axes.projection_dim)
        for (int bs : axes.batch_size) cells.push_back({t, w, p, bs});
  return cells;
}

int cmd_sweep(const GlobalOptions& g, const SweepAxes& axes, const std::string& init_flag) {
  RunConfig rc = load_run_config(g, Stage::finetune);
  if (!init_flag.empty()) rc.data.init = init_flag;
  ensure_out_dir(g.out);
  const Loaded data = load_labeled(rc.data, rc.train.model.encoder);
  const std::optional<Checkpoint> init = load_init(rc.data.init);
  const std::vector<SweepCell> cells = sweep_cells(axes, rc.train);
  std::ostringstream summary;
  summary << "cell,temperature,loss_weight,projection_dim,batch_size,loss_total,loss_ce,loss_mscl,train_acc,eval_acc,"
             "skipped_anchor_count\n";
  summary << std::setprecision(9);
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const SweepCell& cell = cells[i];
    TrainConfig cfg = rc.train;
    cfg.loss.temperature = cell.temperature;
    cfg.loss.loss_weight = cell.loss_weight;
    cfg.model.projection_dim = cell.projection_dim;
    cfg.batch_size = cell.batch_size;
    cfg.validate();
    if (!g.quiet) std::cerr << "sweep cell " << i + 1 << "/" << cells.size() << " " << cell.name() << '\n';
    // Every cell starts from the same seed so cells differ only in their settings.
    RandomSource rng(cfg.seed);
    TrainResult res = finetune(data.train, init ? &*init : nullptr, cfg, rng, data.test.empty() ? nullptr : &data.test,
                               progress(g, cfg.epochs));
    const fs::path dir = fs::path(g.out) / "cells" / cell.name();
    ensure_out_dir(dir.string());
    res.report.save((dir / "report.csv").string());
    const EpochRecord& last = res.report.back();
    summary << cell.name() << ',' << cell.temperature << ',' << cell.loss_weight << ',' << cell.projection_dim << ','
            << cell.batch_size << ',' << last.loss_total << ',' << last.loss_ce << ',' << last.loss_contrastive << ','
            << last.train_acc << ',' << last.eval_acc << ',' << last.skipped_anchor_count << '\n';
  }
  write_text(fs::path(g.out) / "summary.csv", summary.str());
  write_text(fs::path(g.out) / "config.json", to_json(rc).dump(2) + "\n");
  std::cout << "sweep: " << cells.size() << " cells -> " << (fs::path(g.out) / "summary.csv").string() << '\n';
  return 0;
}

int run(int argc, char** argv) {
  CLI::App app{"mimic: masked-image pre-training and mix-supervised contrastive fine-tuning"};
  app.require_subcommand(1);
  app.fallthrough();
  GlobalOptions g;
  std::uint64_t seed = 0;
  app.add_option("--config", g.config_path,
                 "JSON run config: TrainConfig keys at top level plus a \"data\" section (see README)")
      ->check(CLI::ExistingFile);
  CLI::Option* seed_opt = app.add_option("--seed", seed, "Overrides the config seed (training; data seed for synth-data)");
  app.add_option("--out", g.out, "Output directory")->capture_default_str();
  app.add_flag("--quiet", g.quiet, "Suppress per-epoch progress on stderr");

  CLI::App* pre = app.add_subcommand("pretrain", "Masked-image pre-training; writes pretrain.ckpt and report.csv");

  std::string init;
  CLI::App* ft = app.add_subcommand("finetune", "Fine-tuning with cross-entropy plus the configured contrastive term");
  ft->add_option("--init", init, "Pre-trained checkpoint (overrides data.init); omit to train from scratch");

  std::string ckpt;
  CLI::App* ev = app.add_subcommand("eval", "Accuracy, per-class accuracy and confusion matrix on the test split");
  ev->add_option("--checkpoint", ckpt, "Fine-tuned checkpoint (overrides data.checkpoint)");

  GradCheckOptions gc;
  CLI::App* grad = app.add_subcommand("gradcheck", "Finite-difference gradient checks in double precision");
  grad->add_option("--points", gc.points, "Random parameter points per case")->capture_default_str()->check(CLI::PositiveNumber);
  grad->add_option("--step", gc.step, "Central-difference step h")->capture_default_str()->check(CLI::PositiveNumber);
  grad->add_option("--tolerance", gc.tolerance, "Maximum relative error")->capture_default_str()->check(CLI::PositiveNumber);

  bool with_corpus = false;
  CLI::App* synth = app.add_subcommand("synth-data", "Writes the synthetic labeled task as PNGs with train.csv/test.csv");
  synth->add_flag("--corpus", with_corpus, "Also write the unlabeled pre-training corpus under <out>/corpus");

  std::string export_ckpt;
  CLI::App* exp = app.add_subcommand("export-embeddings", "Pooled test-set representations to embeddings.csv");
  exp->add_option("--checkpoint", export_ckpt, "Checkpoint (overrides data.checkpoint)");

  SweepAxes axes;
  std::string sweep_init;
  CLI::App* sw = app.add_subcommand("sweep", "Fine-tuning grid over temperature, loss weight, projection dim, batch size");
  sw->add_option("--temperature", axes.temperature, "Temperature values")->capture_default_str()->delimiter(',');
  sw->add_option("--loss-weight", axes.loss_weight, "Contrastive loss weights")->capture_default_str()->delimiter(',');
  sw->add_option("--projection-dim", axes.projection_dim, "Projection dimensions")->capture_default_str()->delimiter(',');
  sw->add_option("--batch-size", axes.batch_size, "Batch sizes")->capture_default_str()->delimiter(',');
  sw->add_flag("--one-at-a-time", axes.one_at_a_time, "Vary one axis at a time around the config instead of the full grid");
  sw->add_option("--init", sweep_init, "Pre-trained checkpoint (overrides data.init)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }
  if (seed_opt->count() > 0) g.seed = seed;

  try {
    if (pre->parsed()) return cmd_pretrain(g);
    if (ft->parsed()) return cmd_finetune(g, init);
    if (ev->parsed()) return cmd_eval(g, ckpt);
    if (grad->parsed()) return cmd_gradcheck(g, gc);
    if (synth->parsed()) return cmd_synth_data(g, with_corpus);
    if (exp->parsed()) return cmd_export(g, export_ckpt);
    if (sw->parsed()) return cmd_sweep(g, axes, sweep_init);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitUsage;
}

}  // namespace
}  // namespace mimic

int main(int argc, char** argv) { return mimic::run(argc, argv); }

// Acceptance run: one PASS/FAIL line per criterion. Exit status is 0 only
// when every criterion that ran passed.
#include "mimic/backbone.hpp"
#include "mimic/data.hpp"
#include "mimic/gradcheck.hpp"
#include "mimic/losses.hpp"
#include "mimic/mixing.hpp"
#include "mimic/oracle.hpp"
#include "mimic/trainer.hpp"

#include <CLI11.hpp>

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <vector>

using namespace mimic;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Verdict {
  int id = 0;
  bool pass = false;
  std::string detail;
};

std::vector<Verdict> verdicts;

void report(int id, bool pass, const std::string& detail) {
  verdicts.push_back({id, pass, detail});
  std::cout << "criterion " << id << ": " << (pass ? "PASS" : "FAIL") << "  " << detail << std::endl;
}

std::string fmt(double v, int precision = 4) {
  std::ostringstream os;
  os << std::setprecision(precision) << v;
  return os.str();
}

Matrix<double> unit_rows(Index n, Index d, RandomSource& rng) {
  Matrix<double> z(n, d);
  for (Index i = 0; i < n; ++i) {
    for (Index k = 0; k < d; ++k) z(i, k) = rng.normal();
    z.row(i).normalize();
  }
  return z;
}

std::vector<std::vector<double>> rows_of(const Matrix<double>& m) {
  std::vector<std::vector<double>> out(static_cast<std::size_t>(m.rows()));
  for (Index i = 0; i < m.rows(); ++i)
    for (Index k = 0; k < m.cols(); ++k) out[static_cast<std::size_t>(i)].push_back(m(i, k));
  return out;
}

/// TV distance computed from raw probabilities, independent of label_distance.
double tv(const SoftLabel& a, const SoftLabel& b) {
  double s = 0.0;
  for (int k = 0; k < a.num_classes(); ++k) s += std::abs(a[k] - b[k]);
  return 0.5 * s;
}

/// B inputs with random one-hot labels over K classes and random small images.
std::vector<LabeledSample> random_inputs(std::size_t b, int k, RandomSource& rng) {
  std::vector<LabeledSample> out;
  for (std::size_t i = 0; i < b; ++i) {
    Image img(6, 6, 1);
    for (float& v : img.data()) v = static_cast<float>(rng.uniform());
    out.push_back({img, SoftLabel::one_hot(static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(k))), k),
                   std::to_string(i)});
  }
  return out;
}

// ---------------------------------------------------------------------------

void criterion_oracle_equivalence() {
  const auto t0 = Clock::now();
  RandomSource rng(101);
  constexpr double kTol = 1e-6;
  constexpr double tau = 0.07;
  double worst = 0.0;
  int cases = 0;
  const auto compare = [&](double fast, const Matrix<double>& z, const std::vector<std::vector<std::size_t>>& pos) {
    const double ref = oracle::oracle_contrastive(rows_of(z), pos, tau);
    worst = std::max(worst, oracle::relative_error(fast, ref));
  };
  while (cases < 1000) {
    const Index n = 2 * (2 + static_cast<Index>(rng.uniform_int(3)));  // 4, 6, 8
    const Matrix<double> z = unit_rows(n, 5, rng);
    const auto un = static_cast<std::size_t>(n);

    std::vector<std::size_t> view_of(un);
    std::vector<std::vector<std::size_t>> sib(un);
    for (std::size_t i = 0; i < un; ++i) {
      view_of[i] = i / 2;
      sib[i] = {i ^ 1u};
    }
    compare(sscl_loss<double>(z, view_of, tau).value, z, sib);

    std::vector<SoftLabel> hard;
    std::vector<int> cls;
    for (std::size_t i = 0; i < un; ++i) {
      cls.push_back(static_cast<int>(rng.uniform_int(3)));
      hard.push_back(SoftLabel::one_hot(cls.back(), 3));
    }
    std::vector<std::vector<std::size_t>> same(un);
    bool any = false;
    for (std::size_t i = 0; i < un; ++i)
      for (std::size_t j = 0; j < un; ++j)
        if (i != j && cls[i] == cls[j]) {
          same[i].push_back(j);
          any = true;
        }
    if (any) compare(scl_loss<double>(z, hard, tau).value, z, same);

    std::vector<SoftLabel> mixed;
    for (std::size_t i = 0; i < un; ++i) {
      const int a = static_cast<int>(rng.uniform_int(3));
      const int b = static_cast<int>(rng.uniform_int(3));
      mixed.push_back(SoftLabel::mix(SoftLabel::one_hot(a, 3), SoftLabel::one_hot(b, 3), rng.beta(2.0, 2.0)));
    }
    std::vector<std::vector<std::size_t>> near(un);
    any = false;
    for (std::size_t i = 0; i < un; ++i)
      for (std::size_t j = 0; j < un; ++j)
        if (i != j && tv(mixed[i], mixed[j]) <= 0.5) {
          near[i].push_back(j);
          any = true;
        }
    if (!any) continue;
    compare(mscl_loss<double>(z, build_pair_mask(mixed, 0.5), tau).value, z, near);
    ++cases;
  }
  const double secs = seconds_since(t0);
  report(1, worst <= kTol && secs < 60.0,
         "1000 batches, max rel err " + fmt(worst, 3) + " (<= 1e-6), " + fmt(secs, 3) + " s (< 60 s)");
}

void criterion_reduction_chain() {
  RandomSource rng(202);
  constexpr double kTol = 1e-7;
  double worst_mscl = 0.0, worst_scl = 0.0;
  for (int c = 0; c < 200; ++c) {
    // Mixing disabled: the mask of an unmixed multiview batch equals same-class pairing.
    const std::size_t b = 2 + rng.uniform_int(4);
    const MultiviewBatch views = augment_two_views(random_inputs(b, 3, rng), AugmentConfig{}, rng);
    MixPolicy off;
    off.enabled = false;
    const MultiviewBatch batch = mix_multiview(views, off, rng);
    const Matrix<double> z = unit_rows(static_cast<Index>(batch.size()), 6, rng);
    const std::vector<SoftLabel> labels = batch.labels();
    const double m = mscl_loss<double>(z, build_pair_mask(batch, 0.5), 0.07).value;
    const double s = scl_loss<double>(z, labels, 0.07).value;
    worst_mscl = std::max(worst_mscl, std::abs(m - s));
  }
  for (int c = 0; c < 200; ++c) {
    // Every class exactly twice: same-class pairs are exactly the sibling pairs.
    const Index n = 2 * (2 + static_cast<Index>(rng.uniform_int(5)));
    std::vector<int> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.uniform_int(i)]);
    std::vector<SoftLabel> labels(order.size());
    std::vector<std::size_t> view_of(order.size());
    for (std::size_t i = 0; i < order.size(); ++i) {
      labels[i] = SoftLabel::one_hot(order[i] / 2, static_cast<int>(n / 2));
      view_of[i] = static_cast<std::size_t>(order[i] / 2);
    }
    const Matrix<double> z = unit_rows(n, 6, rng);
    worst_scl = std::max(worst_scl, std::abs(scl_loss<double>(z, labels, 0.1).value -
                                             sscl_loss<double>(z, view_of, 0.1).value));
  }
  report(2, worst_mscl <= kTol && worst_scl <= kTol,
         "|mscl-scl| " + fmt(worst_mscl, 3) + ", |scl-sscl| " + fmt(worst_scl, 3) + " over 200+200 (<= 1e-7)");
}

void criterion_gradients() {
  const auto t0 = Clock::now();
  GradCheckOptions opts;
  opts.points = 20;
  opts.step = 1e-5;
  opts.tolerance = 1e-4;
  const std::vector<GradCheckCase> cases = run_gradient_checks(opts);
  const double secs = seconds_since(t0);
  bool pass = secs < 300.0;
  double worst = 0.0;
  std::set<std::string> seen;
  std::string names;
  for (const GradCheckCase& c : cases) {
    pass = pass && c.pass && static_cast<int>(c.reports.size()) >= 20;
    worst = std::max(worst, c.max_rel_error);
    seen.insert(c.name);
    names += (names.empty() ? "" : ",") + c.name;
  }
  for (const char* required : {"cross_entropy", "mscl_loss", "reconstruction_loss"}) pass = pass && seen.count(required);
  pass = pass && std::any_of(seen.begin(), seen.end(), [](const std::string& n) { return n.rfind("end_to_end", 0) == 0; });
  report(3, pass,
         "max rel err " + fmt(worst, 3) + " (<= 1e-4, h=1e-5, 20 points) over [" + names + "], " + fmt(secs, 3) +
             " s (< 300 s)");
}

void criterion_pair_mask() {
  RandomSource rng(404);
  MixPolicy policy;  // Beta(2,2), mixup/cutmix at random
  long mismatches = 0, entries = 0;
  for (int c = 0; c < 500; ++c) {
    const std::size_t b = 2 + rng.uniform_int(7);
    const MultiviewBatch views = augment_two_views(random_inputs(b, 4, rng), AugmentConfig{}, rng);
    const MultiviewBatch batch = mix_multiview(views, policy, rng);
    const PairMask mask = build_pair_mask(batch, 0.5);
    const Index n = static_cast<Index>(batch.size());
    for (Index i = 0; i < n; ++i)
      for (Index j = 0; j < n; ++j) {
        const Relation expected = i == j ? Relation::self
                                  : tv(batch.samples[static_cast<std::size_t>(i)].label,
                                       batch.samples[static_cast<std::size_t>(j)].label) <= 0.5
                                      ? Relation::positive
                                      : Relation::negative;
        mismatches += mask(i, j) != expected;
        ++entries;
      }
  }
  // Directed instances: identical labels (distance 0), and mixes straddling t.
  const SoftLabel a = SoftLabel::one_hot(0, 3), b = SoftLabel::one_hot(1, 3);
  const auto relation = [](const SoftLabel& x, const SoftLabel& y) {
    const std::vector<SoftLabel> pair{x, y};
    return build_pair_mask(pair, 0.5)(0, 1);
  };
  const bool case1 = relation(a, a) == Relation::positive && relation(SoftLabel::mix(a, b, 0.3), SoftLabel::mix(a, b, 0.3)) ==
                                                                 Relation::positive;
  const bool case2 = relation(SoftLabel::mix(a, b, 0.51), a) == Relation::positive &&
                     relation(SoftLabel::mix(a, b, 0.5), a) == Relation::positive;
  const bool case3 = relation(SoftLabel::mix(a, b, 0.49), a) == Relation::negative && relation(a, b) == Relation::negative;
  report(4, mismatches == 0 && case1 && case2 && case3,
         std::to_string(mismatches) + " mismatches in " + std::to_string(entries) +
             " entries over 500 batches; directed cases 1/2/3: " + (case1 ? "ok" : "bad") + "/" + (case2 ? "ok" : "bad") +
             "/" + (case3 ? "ok" : "bad"));
}

// ---------------------------------------------------------------------------
// Desk-scale experiment shared by criteria 5, 6 and 8.

ModelConfig desk_model() {
  ModelConfig m;
  m.encoder.depth = 4;
  m.encoder.embed_dim = 64;
  m.encoder.patch_size = 8;
  m.encoder.mlp_ratio = 2.0;
  return m;
}

TrainConfig desk_pretrain_config() {
  TrainConfig c;
  c.stage = Stage::pretrain;
  c.epochs = 20;
  c.batch_size = 64;
  c.optimizer.lr = 2e-3;
  c.mix.enabled = false;
  c.model = desk_model();
  return c;
}

TrainConfig desk_finetune_config(ContrastiveMode mode) {
  TrainConfig c;
  c.stage = Stage::finetune;
  c.epochs = 30;
  c.batch_size = 64;
  c.optimizer.lr = 3e-4;
  c.contrastive = mode;
  c.loss.loss_weight = 0.1;
  c.loss.threshold = 0.5;
  c.loss.temperature = 0.07;
  c.model = desk_model();
  return c;
}

double mean(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size()); }

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

std::string list(const std::vector<double>& v) {
  std::string s;
  for (double x : v) s += (s.empty() ? "" : " ") + fmt(100.0 * x, 4);
  return s;
}

void desk_experiments(bool verbose) {
  const auto t0 = Clock::now();
  SyntheticSpec spec;
  spec.num_classes = 7;
  spec.samples_per_class = 370;
  spec.test_per_class = 70;
  spec.image_size = 32;
  spec.difficulty = 0.5;
  RandomSource data_rng(1);
  const SyntheticSplit split = synthesize(spec, data_rng);

  RandomSource corpus_rng(3);
  const Dataset corpus = synthesize_corpus(5000, 32, 1, corpus_rng);
  RandomSource pre_rng(5);
  const TrainResult pre = pretrain(corpus, desk_pretrain_config(), pre_rng, [&](const EpochRecord& e) {
    if (verbose) std::cerr << "  pretrain epoch " << e.epoch << " recon " << e.loss_recon << '\n';
  });
  const Checkpoint ckpt = make_checkpoint(pre.model, desk_pretrain_config(), 20);

  const auto run_arm = [&](ContrastiveMode mode, const Checkpoint* init) {
    std::vector<double> acc;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      RandomSource rng(seed);
      TrainResult r = finetune(split.train, init, desk_finetune_config(mode), rng);
      acc.push_back(evaluate(r.model, split.test).accuracy);
      if (verbose)
        std::cerr << "  " << to_string(mode) << (init ? "" : " scratch") << " seed " << seed << " acc " << acc.back()
                  << " (" << fmt(seconds_since(t0), 4) << " s)\n";
    }
    return acc;
  };
  const std::vector<double> a = run_arm(ContrastiveMode::none, &ckpt);
  const std::vector<double> b = run_arm(ContrastiveMode::scl, &ckpt);
  const std::vector<double> c = run_arm(ContrastiveMode::mscl, &ckpt);
  const double secs = seconds_since(t0);

  const bool mean_ok = mean(c) >= mean(a);
  const bool median_ok = median(c) >= median(b) - 0.005;
  const double floor = std::min({*std::min_element(a.begin(), a.end()), *std::min_element(b.begin(), b.end()),
                                 *std::min_element(c.begin(), c.end())});
  const bool floor_ok = mean(a) >= 0.70 && mean(b) >= 0.70 && mean(c) >= 0.70;
  const bool time_ok = secs <= 1800.0;
  std::ostringstream d5;
  d5 << "acc% (a) CE [" << list(a) << "] (b) CE+SCL [" << list(b) << "] (c) CE+MSCL [" << list(c) << "]; "
     << "mean(c) " << fmt(100 * mean(c)) << " >= mean(a) " << fmt(100 * mean(a)) << (mean_ok ? " ok" : " NO") << "; "
     << "median(c) " << fmt(100 * median(c)) << " >= median(b)-0.5 " << fmt(100 * median(b) - 0.5)
     << (median_ok ? " ok" : " NO") << "; all arms >= 70 (lowest run " << fmt(100 * floor) << ")"
     << (floor_ok ? " ok" : " NO") << "; " << fmt(secs / 60.0, 3) << " min (<= 30)" << (time_ok ? " ok" : " NO");
  report(5, mean_ok && median_ok && floor_ok && time_ok, d5.str());

  const std::vector<double> scratch = run_arm(ContrastiveMode::mscl, nullptr);
  const double gain = 100.0 * (mean(c) - mean(scratch));
  report(6, gain >= 2.0,
         "CE+MSCL pretrained mean " + fmt(100 * mean(c)) + " vs scratch [" + list(scratch) + "] mean " +
             fmt(100 * mean(scratch)) + ": gain " + fmt(gain, 3) + " points (>= 2)");

  const auto& recs = pre.report.records();
  const double first = recs.front().loss_recon, last = recs.back().loss_recon;
  report(8, recs.size() == 20 && last < 0.5 * first,
         "reconstruction loss epoch 1 " + fmt(first) + ", epoch 20 " + fmt(last) + " (ratio " + fmt(last / first, 3) +
             " < 0.5)");
}

// ---------------------------------------------------------------------------

int run_cli(const std::string& cli, const std::string& args, const fs::path& log) {
  const std::string cmd = "\"" + cli + "\" " + args + " > \"" + log.string() + "\" 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

/// CSV text with the wall_time column removed.
std::string strip_wall_time(const fs::path& path) {
  std::ifstream is(path);
  std::string line, out;
  int drop = -1;
  bool header = true;
  while (std::getline(is, line)) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) cells.push_back(cell);
    if (header) {
      for (std::size_t i = 0; i < cells.size(); ++i)
        if (cells[i] == "wall_time") drop = static_cast<int>(i);
      header = false;
    }
    for (std::size_t i = 0; i < cells.size(); ++i)
      if (static_cast<int>(i) != drop) out += cells[i] + ",";
    out += "\n";
  }
  return out;
}

void criterion_determinism(const std::string& cli, const fs::path& work) {
  const fs::path dir = work / "determinism";
  fs::remove_all(dir);
  fs::create_directories(dir);
  std::ofstream(dir / "tiny.json") << R"({
  "epochs": 2,
  "batch_size": 8,
  "model": {
    "encoder": {"image_size": 16, "patch_size": 4, "embed_dim": 16, "depth": 1, "num_heads": 2, "mlp_ratio": 2},
    "decoder": {"embed_dim": 16, "depth": 1, "num_heads": 2, "mlp_ratio": 2},
    "projection_dim": 8
  },
  "data": {"synthetic": {"num_classes": 3, "samples_per_class": 12, "test_per_class": 3}, "corpus_size": 32}
})";
  const std::string base = "--quiet --seed 17 --config \"" + (dir / "tiny.json").string() + "\"";
  bool ok = true;
  int compared = 0;
  std::string failed;
  for (const char* run : {"r1", "r2"}) {
    const fs::path r = dir / run;
    ok &= run_cli(cli, base + " --out \"" + (r / "pre").string() + "\" pretrain", dir / "log.txt") == 0;
    ok &= run_cli(cli, base + " --out \"" + (r / "ft").string() + "\" finetune --init \"" +
                           (dir / "r1" / "pre" / "pretrain.ckpt").string() + "\"",
                  dir / "log.txt") == 0;
    ok &= run_cli(cli, base + " --out \"" + (r / "sw").string() + "\" sweep --temperature 0.1,0.3 --loss-weight 0.1",
                  dir / "log.txt") == 0;
  }
  if (!ok) failed = "a CLI run exited non-zero (see " + (dir / "log.txt").string() + ")";
  for (const auto& entry : fs::recursive_directory_iterator(dir / "r1")) {
    const std::string name = entry.path().filename().string();
    if (!entry.is_regular_file() || (name != "report.csv" && name != "summary.csv")) continue;
    const fs::path twin = dir / "r2" / fs::relative(entry.path(), dir / "r1");
    if (!fs::exists(twin) || strip_wall_time(entry.path()) != strip_wall_time(twin)) {
      ok = false;
      failed += " differs: " + fs::relative(entry.path(), dir / "r1").string();
    }
    ++compared;
  }
  ok = ok && compared >= 4;
  report(7, ok,
         std::to_string(compared) + " report CSVs from pretrain/finetune/sweep runs byte-equal without wall_time" +
             (failed.empty() ? "" : "; " + failed));
}

// ---------------------------------------------------------------------------

void criterion_structural() {
  RandomSource rng(909);
  constexpr int kCases = 1000;
  int simplex = 0, unit = 0, pairmask = 0, provenance = 0;
  for (int c = 0; c < kCases; ++c) {
    // SoftLabel: mixes of simplex points stay on the simplex; bad vectors are rejected.
    const int k = 2 + static_cast<int>(rng.uniform_int(8));
    std::vector<double> p(static_cast<std::size_t>(k)), q(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) {
      p[i] = -std::log(1.0 - rng.uniform());
      q[i] = -std::log(1.0 - rng.uniform());
    }
    const double sp = std::accumulate(p.begin(), p.end(), 0.0), sq = std::accumulate(q.begin(), q.end(), 0.0);
    for (std::size_t i = 0; i < p.size(); ++i) {
      p[i] /= sp;
      q[i] /= sq;
    }
    const SoftLabel m = SoftLabel::mix(validate_soft_label(p), validate_soft_label(q), rng.uniform());
    bool ok = std::abs(m.probs().sum() - 1.0) <= kLabelTolerance && m.probs().minCoeff() >= 0.0;
    std::vector<double> bad = p;
    bad[0] += 0.01;
    try {
      (void)validate_soft_label(bad);
      ok = false;
    } catch (const ValidationError&) {
    }
    bad = p;
    bad[0] = -bad[0] - 1e-3;
    try {
      (void)validate_soft_label(bad);
      ok = false;
    } catch (const ValidationError&) {
    }
    simplex += ok;

    // ProjectionBatch: every row unit-norm unless guarded.
    Matrix<double> y(1 + static_cast<Index>(rng.uniform_int(10)), 1 + static_cast<Index>(rng.uniform_int(16)));
    for (Index i = 0; i < y.size(); ++i) y.data()[i] = rng.normal(0.0, std::pow(10.0, rng.uniform(-6.0, 3.0)));
    if (rng.bernoulli(0.2)) y.row(0).setZero();
    const ProjectionBatch<double> pb = l2_normalize_rows<double>(y);
    bool unit_ok = true;
    Index guarded = 0;
    for (Index i = 0; i < pb.z.rows(); ++i) {
      const double norm = pb.z.row(i).norm();
      if (norm == 0.0)
        ++guarded;
      else
        unit_ok = unit_ok && std::abs(norm - 1.0) <= 1e-12;
    }
    unit += unit_ok && guarded == pb.guarded_rows;

    // PairMask + MultiviewBatch on an augmented, mixed batch.
    const std::size_t b = 2 + rng.uniform_int(6);
    MixPolicy policy;
    policy.enabled = rng.bernoulli(0.8);
    policy.mode = static_cast<MixMode>(rng.uniform_int(3));
    const MultiviewBatch batch = mix_multiview(augment_two_views(random_inputs(b, 5, rng), AugmentConfig{}, rng), policy, rng);
    const PairMask mask = build_pair_mask(batch, rng.uniform());
    bool mask_ok = mask.size() == static_cast<Index>(batch.size());
    for (Index i = 0; i < mask.size(); ++i)
      for (Index j = 0; j < mask.size(); ++j) {
        mask_ok = mask_ok && ((i == j) == (mask(i, j) == Relation::self));
        mask_ok = mask_ok && mask(i, j) == mask(j, i);
      }
    pairmask += mask_ok;

    bool prov_ok = batch.size() == 2 * b && batch.provenance.size() == batch.size() && batch.input_count == b;
    try {
      check_invariants(batch);
    } catch (const ValidationError&) {
      prov_ok = false;
    }
    for (std::size_t i = 0; i < batch.size() && prov_ok; ++i) {
      const Provenance& pr = batch.provenance[i];
      prov_ok = pr.view_of == i / 2 && (reconstruct_label(batch, i).probs() - batch.samples[i].label.probs()).cwiseAbs().maxCoeff() <= 1e-12 &&
                pr.mix_partner.has_value() == policy.enabled && (!pr.mix_partner || *pr.mix_partner != i);
    }
    provenance += prov_ok;
  }
  report(9, simplex == kCases && unit == kCases && pairmask == kCases && provenance == kCases,
         "passing cases of 1000: SoftLabel simplex " + std::to_string(simplex) + ", ProjectionBatch unit norm " +
             std::to_string(unit) + ", PairMask diagonal/self " + std::to_string(pairmask) +
             ", MultiviewBatch provenance " + std::to_string(provenance));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria 1-9"};
  std::string cli;
  std::string work = "acceptance-work";
  std::vector<int> only;
  bool verbose = false;
  app.add_option("--cli", cli, "Path to the mimic executable")->required();
  app.add_option("--work", work, "Scratch directory");
  app.add_option("--only", only, "Run only these criteria")->delimiter(',');
  app.add_flag("-v,--verbose", verbose, "Progress on stderr");
  CLI11_PARSE(app, argc, argv);
  fs::create_directories(work);

  const auto want = [&](std::initializer_list<int> ids) {
    if (only.empty()) return true;
    return std::any_of(ids.begin(), ids.end(), [&](int id) { return std::count(only.begin(), only.end(), id) > 0; });
  };
  try {
    if (want({1})) criterion_oracle_equivalence();
    if (want({2})) criterion_reduction_chain();
    if (want({3})) criterion_gradients();
    if (want({4})) criterion_pair_mask();
    if (want({7})) criterion_determinism(cli, work);
    if (want({9})) criterion_structural();
    if (want({5, 6, 8})) desk_experiments(verbose);
  } catch (const std::exception& e) {
    std::cout << "acceptance aborted: " << e.what() << std::endl;
    return 1;
  }

  int failed = 0;
  std::sort(verdicts.begin(), verdicts.end(), [](const Verdict& x, const Verdict& y) { return x.id < y.id; });
  std::cout << "\nsummary:";
  for (const Verdict& v : verdicts) {
    std::cout << ' ' << v.id << '=' << (v.pass ? "PASS" : "FAIL");
    failed += !v.pass;
  }
  std::cout << '\n';
  return failed == 0 ? 0 : 1;
}

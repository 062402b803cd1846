#include "mimic/gradcheck.hpp"

#include "mimic/losses.hpp"
#include "mimic/masking.hpp"
#include "mimic/mixing.hpp"
#include "mimic/params.hpp"

#include <algorithm>
#include <functional>

namespace mimic {

namespace {

using Mat = Matrix<double>;

Mat random_matrix(Index rows, Index cols, double stddev, RandomSource& rng) {
  Mat m(rows, cols);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = rng.normal(0.0, stddev);
  return m;
}

std::vector<SoftLabel> random_mixed_labels(Index n, int classes, RandomSource& rng) {
  std::vector<SoftLabel> out;
  for (Index i = 0; i < n; ++i) {
    const auto a = SoftLabel::one_hot(static_cast<int>(rng.uniform_int(classes)), classes);
    const auto b = SoftLabel::one_hot(static_cast<int>(rng.uniform_int(classes)), classes);
    out.push_back(SoftLabel::mix(a, b, rng.beta(2.0, 2.0)));
  }
  return out;
}

std::vector<double> to_vector(const Mat& m) { return {m.data(), m.data() + m.size()}; }

Mat from_vector(const std::vector<double>& v, Index rows, Index cols) {
  return Eigen::Map<const Mat>(v.data(), rows, cols);
}

Image random_image(const EncoderConfig& cfg, RandomSource& rng) {
  Image img(cfg.image_size, cfg.image_size, cfg.channels);
  for (float& v : img.data()) v = static_cast<float>(rng.uniform());
  return img;
}

/// Moves every parameter to a random point around its initialization so the
/// check is not confined to the small-weight regime of the initializer.
void perturb(std::span<Parameter<double>* const> params, RandomSource& rng) {
  for (Parameter<double>* p : params)
    for (Index i = 0; i < p->value.size(); ++i) p->value.data()[i] += rng.normal(0.0, 0.2);
}

oracle::GradCheckReport check_model(Model<double>& model, std::span<Parameter<double>* const> params,
                                    const std::function<double(bool)>& loss, const GradCheckOptions& opts) {
  model.zero_grad();
  loss(true);
  const std::vector<double> analytic = flatten_grads<double>(params);
  const std::vector<double> theta = flatten_values<double>(params);
  auto f = [&](const std::vector<double>& x) {
    assign_values<double>(params, x);
    return loss(false);
  };
  oracle::GradCheckReport report =
      oracle::check_gradient(f, theta, analytic, opts.step, opts.tolerance, parameter_groups<double>(params));
  assign_values<double>(params, theta);
  return report;
}

void finish(GradCheckCase& c) {
  c.max_rel_error = 0.0;
  c.pass = !c.reports.empty();
  for (const auto& r : c.reports) {
    c.max_rel_error = std::max(c.max_rel_error, r.max_rel_error);
    c.pass = c.pass && r.pass;
  }
}

}  // namespace

ModelConfig gradcheck_model_config() {
  ModelConfig cfg;
  cfg.encoder = {.image_size = 12, .channels = 2, .patch_size = 4, .embed_dim = 8, .depth = 2, .num_heads = 2,
                 .mlp_ratio = 2.0, .use_class_token = false};
  cfg.decoder = {.embed_dim = 8, .depth = 1, .num_heads = 2, .mlp_ratio = 2.0};
  cfg.pool = PoolMode::gap;
  cfg.projection = ProjectionKind::dense;
  cfg.projection_dim = 6;
  cfg.num_classes = 3;
  return cfg;
}

std::vector<GradCheckCase> run_gradient_checks(const GradCheckOptions& opts) {
  RandomSource rng(opts.seed);
  std::vector<GradCheckCase> cases;
  const LossConfig loss_cfg;

  {
    GradCheckCase c{.name = "cross_entropy", .reports = {}};
    for (int pt = 0; pt < opts.points; ++pt) {
      const Mat logits = random_matrix(6, 5, 2.0, rng);
      const Mat targets = label_matrix<double>(random_mixed_labels(6, 5, rng));
      const auto analytic = cross_entropy<double>(logits, targets).grad;
      auto f = [&](const std::vector<double>& x) { return cross_entropy<double>(from_vector(x, 6, 5), targets).value; };
      c.reports.push_back(oracle::check_gradient(f, to_vector(logits), to_vector(analytic), opts.step, opts.tolerance));
    }
    finish(c);
    cases.push_back(std::move(c));
  }

  {
    GradCheckCase c{.name = "mscl_loss", .reports = {}};
    for (int pt = 0; pt < opts.points; ++pt) {
      Mat z = random_matrix(8, 6, 1.0, rng);
      z.rowwise().normalize();
      const PairMask mask = build_pair_mask(random_mixed_labels(8, 3, rng), loss_cfg.threshold);
      const auto analytic = mscl_loss<double>(z, mask, loss_cfg.temperature).grad;
      auto f = [&](const std::vector<double>& x) {
        return mscl_loss<double>(from_vector(x, 8, 6), mask, loss_cfg.temperature).value;
      };
      c.reports.push_back(oracle::check_gradient(f, to_vector(z), to_vector(analytic), opts.step, opts.tolerance));
    }
    finish(c);
    cases.push_back(std::move(c));
  }

  {
    GradCheckCase c{.name = "reconstruction_loss", .reports = {}};
    for (int pt = 0; pt < opts.points; ++pt) {
      const Mat pred = random_matrix(16, 12, 1.0, rng);
      const Mat target = random_matrix(16, 12, 1.0, rng);
      const MaskPlan plan = sample_mask(16, 0.75, rng);
      const auto analytic = reconstruction_loss_with_grad<double>(pred, target, plan).grad;
      auto f = [&](const std::vector<double>& x) {
        return reconstruction_loss_with_grad<double>(from_vector(x, 16, 12), target, plan).value;
      };
      c.reports.push_back(oracle::check_gradient(f, to_vector(pred), to_vector(analytic), opts.step, opts.tolerance));
    }
    finish(c);
    cases.push_back(std::move(c));
  }

  const ModelConfig model_cfg = gradcheck_model_config();
  const Index batch = 4;
  auto starts_with = [](const std::string& s, const std::string& prefix) { return s.rfind(prefix, 0) == 0; };

  {
    GradCheckCase c{.name = "classify", .reports = {}};
    for (int pt = 0; pt < opts.points; ++pt) {
      RandomSource init = rng.split();
      Model<double> model(model_cfg, init);
      auto params = select_parameters<double>(model, [&](const Parameter<double>& p) { return starts_with(p.name, "classifier"); });
      perturb(params, rng);
      const Mat reps = random_matrix(batch, model_cfg.encoder.embed_dim, 1.0, rng);
      const Mat targets = label_matrix<double>(random_mixed_labels(batch, model_cfg.num_classes, rng));
      auto loss = [&](bool backward) {
        const Mat logits = classify(model.classifier, EmbeddingBatch<double>{reps});
        const auto ce = cross_entropy<double>(logits, targets);
        if (backward) model.classifier.backward(ce.grad);
        return ce.value;
      };
      c.reports.push_back(check_model(model, params, loss, opts));
    }
    finish(c);
    cases.push_back(std::move(c));
  }

  {
    GradCheckCase c{.name = "project_dense", .reports = {}};
    for (int pt = 0; pt < opts.points; ++pt) {
      RandomSource init = rng.split();
      Model<double> model(model_cfg, init);
      auto params = select_parameters<double>(model, [&](const Parameter<double>& p) { return starts_with(p.name, "projection"); });
      perturb(params, rng);
      const Mat reps = random_matrix(2 * batch, model_cfg.encoder.embed_dim, 1.0, rng);
      const PairMask mask = build_pair_mask(random_mixed_labels(2 * batch, 3, rng), loss_cfg.threshold);
      auto loss = [&](bool backward) {
        const auto z = project(model.projection, EmbeddingBatch<double>{reps});
        const auto con = mscl_loss<double>(z.z, mask, loss_cfg.temperature);
        if (backward) model.projection.backward(con.grad);
        return con.value;
      };
      c.reports.push_back(check_model(model, params, loss, opts));
    }
    finish(c);
    cases.push_back(std::move(c));
  }

  {
    GradCheckCase c{.name = "encoder", .reports = {}};
    for (int pt = 0; pt < opts.points; ++pt) {
      RandomSource init = rng.split();
      Model<double> model(model_cfg, init);
      auto params = select_parameters<double>(model, [&](const Parameter<double>& p) { return starts_with(p.name, "encoder"); });
      perturb(params, rng);
      std::vector<Image> images;
      for (Index b = 0; b < batch; ++b) images.push_back(random_image(model_cfg.encoder, rng));
      const Mat weights = random_matrix(batch, model_cfg.encoder.embed_dim, 1.0, rng);
      auto loss = [&](bool backward) {
        const auto enc = encode(model, std::span<const Image>(images));
        const double value = (enc.embeddings.reps.array() * weights.array()).mean();
        if (backward) {
          const Mat dreps = weights / static_cast<double>(weights.size());
          model.encoder.backward(pool_head_backward(enc.tokens, model_cfg.pool, dreps));
        }
        return value;
      };
      c.reports.push_back(check_model(model, params, loss, opts));
    }
    finish(c);
    cases.push_back(std::move(c));
  }

  {
    GradCheckCase c{.name = "end_to_end_pretrain", .reports = {}};
    for (int pt = 0; pt < opts.points; ++pt) {
      RandomSource init = rng.split();
      Model<double> model(model_cfg, init);
      auto params = select_parameters<double>(model, [&](const Parameter<double>& p) {
        return starts_with(p.name, "encoder") || starts_with(p.name, "decoder");
      });
      perturb(params, rng);
      std::vector<Image> images;
      std::vector<MaskPlan> plans;
      for (Index b = 0; b < batch; ++b) {
        images.push_back(random_image(model_cfg.encoder, rng));
        plans.push_back(sample_mask(model_cfg.encoder.num_patches(), 0.5, rng));
      }
      const Mat target = stack_patches<double>(images, model_cfg.encoder.patch_size);
      const Index per = model_cfg.encoder.num_patches();
      auto loss = [&](bool backward) {
        const auto enc = encode(model, std::span<const Image>(images), plans);
        const Mat pred = model.decoder.forward(enc.tokens, plans);
        double value = 0.0;
        Mat dpred(pred.rows(), pred.cols());
        for (Index b = 0; b < batch; ++b) {
          const auto r = reconstruction_loss_with_grad<double>(pred.middleRows(b * per, per),
                                                               target.middleRows(b * per, per), plans[b]);
          value += r.value / static_cast<double>(batch);
          dpred.middleRows(b * per, per) = r.grad / static_cast<double>(batch);
        }
        if (backward) model.encoder.backward(model.decoder.backward(dpred));
        return value;
      };
      c.reports.push_back(check_model(model, params, loss, opts));
    }
    finish(c);
    cases.push_back(std::move(c));
  }

  {
    GradCheckCase c{.name = "end_to_end_finetune", .reports = {}};
    for (int pt = 0; pt < opts.points; ++pt) {
      RandomSource init = rng.split();
      Model<double> model(model_cfg, init);
      auto params = select_parameters<double>(model, [&](const Parameter<double>& p) { return !p.droppable; });
      perturb(params, rng);
      std::vector<Image> images;
      for (Index b = 0; b < 2 * batch; ++b) images.push_back(random_image(model_cfg.encoder, rng));
      const auto labels = random_mixed_labels(2 * batch, model_cfg.num_classes, rng);
      const Mat targets = label_matrix<double>(labels);
      const PairMask mask = build_pair_mask(labels, loss_cfg.threshold);
      auto loss = [&](bool backward) {
        const auto enc = encode(model, std::span<const Image>(images));
        const Mat logits = classify(model.classifier, enc.embeddings);
        const auto z = project(model.projection, enc.embeddings);
        const auto total = total_finetune_loss<double>(logits, targets, z.z, mask, loss_cfg);
        if (backward) {
          const Mat dreps = model.classifier.backward(total.dlogits) + model.projection.backward(total.dz);
          model.encoder.backward(pool_head_backward(enc.tokens, model_cfg.pool, dreps));
        }
        return total.total;
      };
      c.reports.push_back(check_model(model, params, loss, opts));
    }
    finish(c);
    cases.push_back(std::move(c));
  }

  return cases;
}

}  // namespace mimic

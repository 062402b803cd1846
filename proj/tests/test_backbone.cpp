#include "mimic/backbone.hpp"
#include "mimic/gradcheck.hpp"
#include "mimic/oracle.hpp"
#include "mimic/params.hpp"
#include "support.hpp"

#include <doctest.h>

#include <vector>

using namespace mimic;

namespace {

ModelConfig tiny_config() {
  ModelConfig c;
  c.encoder.image_size = 8;
  c.encoder.patch_size = 2;
  c.encoder.embed_dim = 8;
  c.encoder.depth = 2;
  c.encoder.num_heads = 2;
  c.encoder.mlp_ratio = 2.0;
  c.decoder.embed_dim = 8;
  c.decoder.depth = 1;
  c.decoder.num_heads = 2;
  c.projection_dim = 4;
  c.num_classes = 3;
  return c;
}

std::vector<Image> random_images(int n, int size, int channels, RandomSource& rng) {
  std::vector<Image> out;
  for (int i = 0; i < n; ++i) out.push_back(test::random_image(size, size, channels, rng));
  return out;
}

}  // namespace

TEST_CASE("desk-scale encoder shapes") {
  RandomSource rng(1);
  ModelConfig cfg;  // 32×32×1, P=4, dim 64, no class token
  Model<float> model(cfg, rng);
  const std::vector<Image> images = random_images(2, 32, 1, rng);
  const Encoded<float> enc = encode(model, std::span<const Image>(images));
  CHECK(enc.tokens.batch == 2);
  CHECK(enc.tokens.seq_len == 64);
  CHECK(enc.tokens.tokens.rows() == 2 * 64);
  CHECK(enc.tokens.tokens.cols() == 64);
  CHECK(enc.embeddings.reps.rows() == 2);
  CHECK(enc.embeddings.reps.cols() == 64);
  CHECK(enc.embeddings.reps.allFinite());

  const Encoded<float> again = encode(model, std::span<const Image>(images));
  CHECK(again.tokens.tokens == enc.tokens.tokens);
  CHECK(again.embeddings.reps == enc.embeddings.reps);

  const std::vector<Image> wrong = random_images(1, 16, 1, rng);
  CHECK_THROWS_AS(encode(model, std::span<const Image>(wrong)), ContractViolation);
}

TEST_CASE("visible-only encoding keeps the unmasked tokens") {
  RandomSource rng(2);
  ModelConfig cfg;
  Model<float> model(cfg, rng);
  const std::vector<Image> images = random_images(3, 32, 1, rng);
  std::vector<MaskPlan> plans;
  for (int i = 0; i < 3; ++i) plans.push_back(sample_mask(64, 0.75, rng));
  const Encoded<float> enc = encode(model, std::span<const Image>(images), std::span<const MaskPlan>(plans));
  CHECK(enc.tokens.seq_len == 16);

  const Matrix<float> pred = model.decoder.forward(enc.tokens, plans);
  CHECK(pred.rows() == 3 * 64);
  CHECK(pred.cols() == 16);
  const PatchGrid<float> grid = decode_sample(pred, cfg.encoder, 1);
  CHECK(grid.num_patches() == 64);
  CHECK(grid.patch_length() == 16);
  CHECK(model.decoder.forward(enc.tokens, plans) == pred);
}

TEST_CASE("class token sequences and pooling modes") {
  RandomSource rng(3);
  ModelConfig cfg = tiny_config();
  cfg.encoder.use_class_token = true;
  cfg.pool = PoolMode::class_token;
  Model<float> model(cfg, rng);
  const std::vector<Image> images = random_images(2, 8, 1, rng);
  const Encoded<float> enc = encode(model, std::span<const Image>(images));
  CHECK(enc.tokens.seq_len == 17);
  CHECK(enc.embeddings.reps.row(1) == enc.tokens.tokens.row(17));

  ModelConfig no_cls = tiny_config();
  Model<float> plain(no_cls, rng);
  const Encoded<float> e2 = encode(plain, std::span<const Image>(images));
  CHECK_THROWS_AS(pool_head(e2.tokens, PoolMode::class_token), ConfigError);
}

TEST_CASE("gap pooling examples and loop oracle") {
  TokenBatch<double> t;
  t.batch = 2;
  t.seq_len = 3;
  t.tokens = Matrix<double>(6, 2);
  t.tokens << 1, 2, 1, 2, 1, 2, 5, 5, 5, 5, 5, 5;
  const EmbeddingBatch<double> e = pool_head(t, PoolMode::gap);
  CHECK(e.reps(0, 0) == 1.0);
  CHECK(e.reps(0, 1) == 2.0);
  CHECK(e.reps(1, 0) == 5.0);

  TokenBatch<double> single;
  single.batch = 1;
  single.seq_len = 1;
  single.tokens = Matrix<double>(1, 3);
  single.tokens << 0.1, -0.2, 0.3;
  CHECK(pool_head(single, PoolMode::gap).reps == single.tokens);

  RandomSource rng(4);
  for (int trial = 0; trial < 1000; ++trial) {
    TokenBatch<double> r;
    r.batch = 1 + static_cast<Index>(rng.uniform_int(4));
    r.seq_len = 1 + static_cast<Index>(rng.uniform_int(9));
    r.has_class_token = rng.bernoulli(0.5) && r.seq_len > 1;
    r.tokens = test::random_matrix(r.batch * r.seq_len, 5, rng);
    const EmbeddingBatch<double> fast = pool_head(r, PoolMode::gap);
    const Index first = r.has_class_token ? 1 : 0;
    for (Index b = 0; b < r.batch; ++b)
      for (Index c = 0; c < 5; ++c) {
        double sum = 0.0;
        for (Index s = first; s < r.seq_len; ++s) sum += r.tokens(b * r.seq_len + s, c);
        REQUIRE(std::abs(fast.reps(b, c) - sum / static_cast<double>(r.seq_len - first)) <= 1e-10);
      }
  }
}

TEST_CASE("projection head variants") {
  RandomSource rng(5);
  ProjectionHead<double> none(ProjectionKind::none, 2, 2, 1, rng);
  Matrix<double> rep(1, 2);
  rep << 3, 4;
  const ProjectionBatch<double> z = none.forward(rep);
  CHECK(z.z(0, 0) == doctest::Approx(0.6));
  CHECK(z.z(0, 1) == doctest::Approx(0.8));

  ProjectionHead<double> linear(ProjectionKind::linear, 2, 2, 1, rng);
  linear.first.weight.value = Matrix<double>::Identity(2, 2);
  linear.first.bias.value.setZero();
  Matrix<double> unit(1, 2);
  unit << 0.6, 0.8;
  CHECK((linear.forward(unit).z - unit).cwiseAbs().maxCoeff() < 1e-15);

  ProjectionHead<double> zero(ProjectionKind::none, 2, 2, 1, rng);
  const ProjectionBatch<double> guarded = zero.forward(Matrix<double>::Zero(1, 2));
  CHECK(guarded.guarded_rows == 1);
  CHECK(guarded.z.allFinite());
}

TEST_CASE("projections have unit rows and cosines in [-1, 1]") {
  RandomSource rng(6);
  for (int trial = 0; trial < 1000; ++trial) {
    const auto kind = static_cast<ProjectionKind>(rng.uniform_int(3));
    const Index d = 2 + static_cast<Index>(rng.uniform_int(8));
    const Index p = 2 + static_cast<Index>(rng.uniform_int(8));
    ProjectionHead<double> head(kind, d, kind == ProjectionKind::none ? d : p, 1, rng);
    const Index n = 2 + static_cast<Index>(rng.uniform_int(8));
    const Matrix<double> reps = 3.0 * test::random_matrix(n, d, rng);
    const ProjectionBatch<double> z = head.forward(reps);
    // A dense head can switch every ReLU off and emit a zero row; only those are guarded.
    Index zero_rows = 0;
    for (Index i = 0; i < n; ++i) {
      if (z.z.row(i).isZero(0.0)) {
        ++zero_rows;
      } else {
        REQUIRE(std::abs(z.z.row(i).norm() - 1.0) <= 1e-6);
      }
    }
    REQUIRE(z.guarded_rows == zero_rows);
    if (kind != ProjectionKind::dense) REQUIRE(zero_rows == 0);
    const Matrix<double> cos = z.z * z.z.transpose();
    REQUIRE(cos.maxCoeff() <= 1.0 + 1e-12);
    REQUIRE(cos.minCoeff() >= -1.0 - 1e-12);
  }
}

TEST_CASE("classifier examples") {
  RandomSource rng(7);
  Classifier<double> head(3, 3, 1, rng);
  head.fc.weight.value.setZero();
  head.fc.bias.value.setZero();
  const Matrix<double> reps = test::random_matrix(4, 3, rng);
  CHECK(head.forward(reps).isZero(0.0));
  head.fc.weight.value = Matrix<double>::Identity(3, 3);
  CHECK(head.forward(reps) == reps);
  CHECK_THROWS_AS(head.forward(test::random_matrix(4, 5, rng)), ContractViolation);
}

TEST_CASE("doubling logits keeps every argmax") {
  RandomSource rng(8);
  for (int trial = 0; trial < 1000; ++trial) {
    const Matrix<double> logits = test::random_matrix(4, 7, rng);
    const Matrix<double> doubled = 2.0 * logits;
    for (Index i = 0; i < 4; ++i) {
      Index a = 0, b = 0;
      logits.row(i).maxCoeff(&a);
      doubled.row(i).maxCoeff(&b);
      REQUIRE(a == b);
    }
  }
}

TEST_CASE("encoder is permutation-equivariant once positions are zeroed") {
  RandomSource rng(9);
  const ModelConfig cfg = tiny_config();
  Model<double> model(cfg, rng);
  model.encoder.pos_embed.setZero();
  for (int trial = 0; trial < 20; ++trial) {
    const Image img = test::random_image(8, 8, 1, rng);
    const std::vector<Image> one = {img};
    const Matrix<double> patches = stack_patches<double>(std::span<const Image>(one), 2);
    std::vector<Index> perm(16);
    for (Index i = 0; i < 16; ++i) perm[static_cast<std::size_t>(i)] = i;
    rng.shuffle(perm);
    Matrix<double> permuted(16, patches.cols());
    for (Index i = 0; i < 16; ++i) permuted.row(i) = patches.row(perm[static_cast<std::size_t>(i)]);
    const Matrix<double> out = model.encoder.forward(patches, 1).tokens;
    const Matrix<double> out_perm = model.encoder.forward(permuted, 1).tokens;
    for (Index i = 0; i < 16; ++i)
      REQUIRE((out_perm.row(i) - out.row(perm[static_cast<std::size_t>(i)])).cwiseAbs().maxCoeff() <= 1e-12);
  }
}

TEST_CASE("positional table rows are distinct and bounded") {
  const Matrix<double> pe = sincos_pos_embed<double>(4, 16);
  CHECK(pe.rows() == 16);
  CHECK(pe.cols() == 16);
  CHECK(pe.cwiseAbs().maxCoeff() <= 1.0);
  for (Index i = 0; i < 16; ++i)
    for (Index j = i + 1; j < 16; ++j) CHECK((pe.row(i) - pe.row(j)).norm() > 1e-3);
}

TEST_CASE("configuration validation") {
  EncoderConfig e;
  e.embed_dim = 66;  // not divisible by 4 heads
  CHECK_THROWS_AS(e.validate(), ConfigError);
  e = {};
  e.image_size = 30;
  CHECK_THROWS_AS(e.validate(), ConfigError);
  e = {};
  e.embed_dim = 6;
  e.num_heads = 2;  // divisible by heads but not by 4 (positional table)
  CHECK_THROWS_AS(e.validate(), ConfigError);
  CHECK_THROWS_AS(parse_pool_mode("max"), ConfigError);
  CHECK(parse_projection_kind("dense") == ProjectionKind::dense);
}

TEST_CASE("encoder gradient matches central differences") {
  RandomSource rng(10);
  const ModelConfig cfg = tiny_config();
  Model<double> model(cfg, rng);
  const std::vector<Image> images = random_images(2, 8, 1, rng);
  const Matrix<double> patches = stack_patches<double>(std::span<const Image>(images), 2);
  auto params = select_parameters<double>(model.encoder, [](const Parameter<double>&) { return true; });
  const auto theta = flatten_values<double>(params);
  // A fixed random functional of the tokens; a plain mean would be flat after the final norm.
  const Matrix<double> probe = test::random_matrix(2 * 16, 8, rng);
  const auto f = [&](const std::vector<double>& x) {
    assign_values<double>(params, x);
    return (model.encoder.forward(patches, 2).tokens.array() * probe.array()).sum();
  };
  assign_values<double>(params, theta);
  model.zero_grad();
  const TokenBatch<double> out = model.encoder.forward(patches, 2);
  model.encoder.backward(probe);
  const auto analytic = flatten_grads<double>(params);
  const oracle::GradCheckReport report =
      oracle::check_gradient(f, theta, analytic, 1e-5, 1e-4, parameter_groups<double>(params));
  CHECK(report.pass);
  CHECK(report.max_rel_error <= 1e-4);
}

TEST_CASE("model parameter bookkeeping") {
  RandomSource rng(11);
  Model<float> model(tiny_config(), rng);
  CHECK(model.parameter_count() > 0);
  int decoder = 0, droppable = 0;
  model.visit([&](const Parameter<float>& p) {
    decoder += p.name.rfind("decoder.", 0) == 0;
    droppable += p.droppable;
    if (p.name.rfind("encoder.blocks.1", 0) == 0) CHECK(p.layer == 2);
    if (p.name.rfind("classifier", 0) == 0) CHECK(p.layer == model.head_layer());
  });
  CHECK(decoder == droppable);
  CHECK(decoder > 0);
}

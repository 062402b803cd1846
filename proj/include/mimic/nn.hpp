#pragma once

// Transformer building blocks with hand-written backward passes.
//
// Activations are row-major in the "one token per row" sense: a batch of B
// sequences of length N is a (B·N) × dim matrix, sample-major. Every layer
// caches what its backward pass needs during forward, so a layer instance
// serves one forward/backward pair at a time.

#include "mimic/core.hpp"
#include "mimic/random.hpp"

#include <unsupported/Eigen/SpecialFunctions>

#include <cmath>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

namespace mimic {

template <typename Scalar>
struct Parameter {
  std::string name;
  Matrix<Scalar> value;
  Matrix<Scalar> grad;
  int layer = 0;          // depth index used by layer-wise lr decay
  bool decay = true;      // false for biases, norm gains, embeddings, tokens
  bool droppable = false; // decoder weights, unused after pre-training

  Parameter() = default;
  Parameter(std::string name_, Index rows, Index cols, int layer_, bool decay_)
      : name(std::move(name_)),
        value(Matrix<Scalar>::Zero(rows, cols)),
        grad(Matrix<Scalar>::Zero(rows, cols)),
        layer(layer_),
        decay(decay_) {}

  void zero_grad() { grad.setZero(value.rows(), value.cols()); }
  void fill_truncated_normal(RandomSource& rng, double stddev) {
    for (Index i = 0; i < value.size(); ++i) value.data()[i] = static_cast<Scalar>(rng.truncated_normal(stddev));
  }
  /// U(−a, a) with a = sqrt(6 / (rows + cols)).
  void fill_xavier_uniform(RandomSource& rng) {
    const double a = std::sqrt(6.0 / static_cast<double>(value.rows() + value.cols()));
    for (Index i = 0; i < value.size(); ++i) value.data()[i] = static_cast<Scalar>(rng.uniform(-a, a));
  }
};

/// Adds a row vector to every row.
template <typename Scalar>
void add_row_bias(Matrix<Scalar>& y, const Matrix<Scalar>& bias) {
  y.rowwise() += bias.row(0);
}

enum class WeightInit { truncated_normal, xavier_uniform };

template <typename Scalar>
class Linear {
 public:
  Linear() = default;
  Linear(const std::string& name, Index in, Index out, int layer, RandomSource& rng, bool with_bias = true,
         WeightInit init = WeightInit::truncated_normal)
      : weight(name + ".weight", in, out, layer, true), with_bias_(with_bias) {
    if (with_bias) bias = Parameter<Scalar>(name + ".bias", 1, out, layer, false);
    if (init == WeightInit::xavier_uniform) {
      weight.fill_xavier_uniform(rng);
    } else {
      weight.fill_truncated_normal(rng, 0.02);
    }
  }

  Matrix<Scalar> forward(const Matrix<Scalar>& x) {
    input_ = x;
    Matrix<Scalar> y(x.rows(), weight.value.cols());
    y.noalias() = x * weight.value;
    if (with_bias_) add_row_bias(y, bias.value);
    return y;
  }

  Matrix<Scalar> backward(const Matrix<Scalar>& dy) {
    weight.grad.noalias() += input_.transpose() * dy;
    if (with_bias_) bias.grad += dy.colwise().sum();
    Matrix<Scalar> dx(dy.rows(), weight.value.rows());
    dx.noalias() = dy * weight.value.transpose();
    return dx;
  }

  template <typename F>
  void visit(F&& f) {
    f(weight);
    if (with_bias_) f(bias);
  }
  template <typename F>
  void visit(F&& f) const {
    f(weight);
    if (with_bias_) f(bias);
  }

  Parameter<Scalar> weight;
  Parameter<Scalar> bias;

 private:
  bool with_bias_ = true;
  Matrix<Scalar> input_;
};

template <typename Scalar>
class LayerNorm {
 public:
  LayerNorm() = default;
  LayerNorm(const std::string& name, Index dim, int layer)
      : gain(name + ".weight", 1, dim, layer, false), shift(name + ".bias", 1, dim, layer, false) {
    gain.value.setOnes();
  }

  Matrix<Scalar> forward(const Matrix<Scalar>& x) {
    const Vector<Scalar> mean = x.rowwise().mean();
    normalized_ = x.colwise() - mean;
    inv_std_ = (normalized_.array().square().rowwise().mean() + Scalar(kEps)).rsqrt();
    normalized_ = normalized_.array().colwise() * inv_std_.array();
    Matrix<Scalar> y = normalized_.array().rowwise() * gain.value.row(0).array();
    add_row_bias(y, shift.value);
    return y;
  }

  Matrix<Scalar> backward(const Matrix<Scalar>& dy) {
    gain.grad += (dy.array() * normalized_.array()).colwise().sum().matrix();
    shift.grad += dy.colwise().sum();
    const Matrix<Scalar> dxhat = dy.array().rowwise() * gain.value.row(0).array();
    const Vector<Scalar> mean_d = dxhat.rowwise().mean();
    const Vector<Scalar> mean_dx = (dxhat.array() * normalized_.array()).rowwise().mean();
    Matrix<Scalar> dx = (dxhat.colwise() - mean_d).array() - normalized_.array().colwise() * mean_dx.array();
    return dx.array().colwise() * inv_std_.array();
  }

  template <typename F>
  void visit(F&& f) { f(gain); f(shift); }
  template <typename F>
  void visit(F&& f) const { f(gain); f(shift); }

  Parameter<Scalar> gain;
  Parameter<Scalar> shift;

 private:
  static constexpr double kEps = 1e-6;
  Matrix<Scalar> normalized_;
  Vector<Scalar> inv_std_;
};

template <typename Scalar>
Matrix<Scalar> gelu(const Matrix<Scalar>& x) {
  const auto a = x.array();
  return (Scalar(0.5) * a * (Scalar(1) + (a * Scalar(std::numbers::sqrt2 / 2)).erf())).matrix();
}

template <typename Scalar>
Matrix<Scalar> gelu_derivative(const Matrix<Scalar>& x) {
  const auto a = x.array();
  const auto cdf = Scalar(0.5) * (Scalar(1) + (a * Scalar(std::numbers::sqrt2 / 2)).erf());
  const auto pdf = (Scalar(-0.5) * a.square()).exp() * Scalar(0.5 * std::numbers::inv_sqrtpi * std::numbers::sqrt2);
  return (cdf + a * pdf).matrix();
}

template <typename Scalar>
class Mlp {
 public:
  Mlp() = default;
  Mlp(const std::string& name, Index dim, Index hidden, int layer, RandomSource& rng)
      : fc1(name + ".fc1", dim, hidden, layer, rng), fc2(name + ".fc2", hidden, dim, layer, rng) {}

  Matrix<Scalar> forward(const Matrix<Scalar>& x) {
    pre_ = fc1.forward(x);
    return fc2.forward(gelu(pre_));
  }

  Matrix<Scalar> backward(const Matrix<Scalar>& dy) {
    const Matrix<Scalar> dh = fc2.backward(dy);
    const Matrix<Scalar> dpre = dh.cwiseProduct(gelu_derivative(pre_));
    return fc1.backward(dpre);
  }

  template <typename F>
  void visit(F&& f) { fc1.visit(f); fc2.visit(f); }
  template <typename F>
  void visit(F&& f) const { fc1.visit(f); fc2.visit(f); }

  Linear<Scalar> fc1;
  Linear<Scalar> fc2;

 private:
  Matrix<Scalar> pre_;
};

/// Row-wise softmax in place, max-subtracted.
template <typename Scalar>
void softmax_rows(Matrix<Scalar>& s) {
  const Vector<Scalar> m = s.rowwise().maxCoeff();
  s = (s.colwise() - m).array().exp();
  const Vector<Scalar> inv = s.rowwise().sum().cwiseInverse();
  s = s.array().colwise() * inv.array();
}

/// Multi-head self-attention applied independently to each sequence. The
/// fused qkv projection carries query and value biases only; a key bias adds
/// the same constant to every score in a row and never reaches the output.
/// Per-head products are tiny, so they use lazy (coefficient-based) products.
template <typename Scalar>
class Attention {
 public:
  Attention() = default;
  Attention(const std::string& name, Index dim, int heads, int layer, RandomSource& rng)
      : qkv(name + ".qkv", dim, 3 * dim, layer, rng, false),
        q_bias(name + ".q_bias", 1, dim, layer, false),
        v_bias(name + ".v_bias", 1, dim, layer, false),
        proj(name + ".proj", dim, dim, layer, rng),
        heads_(heads) {
    expects(heads > 0 && dim % heads == 0, "attention: dim must be divisible by the head count");
  }

  Matrix<Scalar> forward(const Matrix<Scalar>& x, Index seq_len) {
    const Index dim = x.cols();
    const Index head_dim = dim / heads_;
    const Index batch = x.rows() / seq_len;
    const Scalar scale = Scalar(1) / std::sqrt(static_cast<Scalar>(head_dim));
    seq_len_ = seq_len;
    qkv_ = qkv.forward(x);
    qkv_.leftCols(dim).rowwise() += q_bias.value.row(0);
    qkv_.rightCols(dim).rowwise() += v_bias.value.row(0);
    probs_.resize(static_cast<std::size_t>(batch * heads_));
    Matrix<Scalar> context(x.rows(), dim);
    for (Index b = 0; b < batch; ++b) {
      for (Index h = 0; h < heads_; ++h) {
        const auto q = qkv_.block(b * seq_len, h * head_dim, seq_len, head_dim);
        const auto k = qkv_.block(b * seq_len, dim + h * head_dim, seq_len, head_dim);
        const auto v = qkv_.block(b * seq_len, 2 * dim + h * head_dim, seq_len, head_dim);
        Matrix<Scalar>& p = probs_[static_cast<std::size_t>(b * heads_ + h)];
        p.noalias() = scale * q.lazyProduct(k.transpose());
        softmax_rows(p);
        context.block(b * seq_len, h * head_dim, seq_len, head_dim).noalias() = p.lazyProduct(v);
      }
    }
    return proj.forward(context);
  }

  Matrix<Scalar> backward(const Matrix<Scalar>& dy) {
    const Matrix<Scalar> dcontext = proj.backward(dy);
    const Index dim = dcontext.cols();
    const Index head_dim = dim / heads_;
    const Index batch = dcontext.rows() / seq_len_;
    const Scalar scale = Scalar(1) / std::sqrt(static_cast<Scalar>(head_dim));
    const Index n = seq_len_;
    Matrix<Scalar> dqkv(dcontext.rows(), 3 * dim);
    Matrix<Scalar> dp(n, n);
    for (Index b = 0; b < batch; ++b) {
      for (Index h = 0; h < heads_; ++h) {
        const auto q = qkv_.block(b * n, h * head_dim, n, head_dim);
        const auto k = qkv_.block(b * n, dim + h * head_dim, n, head_dim);
        const auto v = qkv_.block(b * n, 2 * dim + h * head_dim, n, head_dim);
        const auto dout = dcontext.block(b * n, h * head_dim, n, head_dim);
        const Matrix<Scalar>& p = probs_[static_cast<std::size_t>(b * heads_ + h)];
        dqkv.block(b * n, 2 * dim + h * head_dim, n, head_dim).noalias() = p.transpose().lazyProduct(dout);
        dp.noalias() = dout.lazyProduct(v.transpose());
        // softmax backward: dS = P ⊙ (dP − rowsum(dP ⊙ P))
        const Vector<Scalar> row_dot = (dp.array() * p.array()).rowwise().sum();
        dp = p.array() * (dp.colwise() - row_dot).array();
        dqkv.block(b * n, h * head_dim, n, head_dim).noalias() = scale * dp.lazyProduct(k);
        dqkv.block(b * n, dim + h * head_dim, n, head_dim).noalias() = scale * dp.transpose().lazyProduct(q);
      }
    }
    q_bias.grad += dqkv.leftCols(dim).colwise().sum();
    v_bias.grad += dqkv.rightCols(dim).colwise().sum();
    return qkv.backward(dqkv);
  }

  template <typename F>
  void visit(F&& f) { qkv.visit(f); f(q_bias); f(v_bias); proj.visit(f); }
  template <typename F>
  void visit(F&& f) const { qkv.visit(f); f(q_bias); f(v_bias); proj.visit(f); }

  Linear<Scalar> qkv;
  Parameter<Scalar> q_bias;
  Parameter<Scalar> v_bias;
  Linear<Scalar> proj;

 private:
  int heads_ = 1;
  Index seq_len_ = 0;
  Matrix<Scalar> qkv_;
  std::vector<Matrix<Scalar>> probs_;
};

/// Pre-norm transformer block: x + Attn(LN(x)), then h + MLP(LN(h)).
template <typename Scalar>
class TransformerBlock {
 public:
  TransformerBlock() = default;
  TransformerBlock(const std::string& name, Index dim, int heads, double mlp_ratio, int layer, RandomSource& rng)
      : norm1(name + ".norm1", dim, layer),
        attn(name + ".attn", dim, heads, layer, rng),
        norm2(name + ".norm2", dim, layer),
        mlp(name + ".mlp", dim, static_cast<Index>(std::lround(mlp_ratio * static_cast<double>(dim))), layer, rng) {}

  Matrix<Scalar> forward(const Matrix<Scalar>& x, Index seq_len) {
    Matrix<Scalar> h = x + attn.forward(norm1.forward(x), seq_len);
    return h + mlp.forward(norm2.forward(h));
  }

  Matrix<Scalar> backward(const Matrix<Scalar>& dy) {
    const Matrix<Scalar> dh = dy + norm2.backward(mlp.backward(dy));
    return dh + norm1.backward(attn.backward(dh));
  }

  template <typename F>
  void visit(F&& f) { norm1.visit(f); attn.visit(f); norm2.visit(f); mlp.visit(f); }
  template <typename F>
  void visit(F&& f) const { norm1.visit(f); attn.visit(f); norm2.visit(f); mlp.visit(f); }

  LayerNorm<Scalar> norm1;
  Attention<Scalar> attn;
  LayerNorm<Scalar> norm2;
  Mlp<Scalar> mlp;
};

}  // namespace mimic

#pragma once
// Compact transformer encoder trained from scratch.
//
// Pre-LN blocks: x += Attn(LN1(x)); x += FFN(LN2(x)); output = LNf(x).
// Inputs are the sum of token, position and segment embeddings. Attention is
// bidirectional and unmasked: one call encodes one sequence, so there is no
// padding. The scalar type is a template parameter so gradient checks can run
// in double while training and checkpoints use float.

#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "rci/errors.hpp"
#include "rci/random.hpp"
#include "rci/tokenizer.hpp"

namespace rci {

template <typename T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using RowVec = Eigen::Matrix<T, 1, Eigen::Dynamic>;

struct EncoderConfig {
  TokenizerConfig tokenizer;
  int d_model = 128;
  int n_layers = 2;
  int n_heads = 4;
  int d_ff = 256;
  int max_len = 256;
  std::uint64_t seed = 0;
  // Projection weights start at N(0, 1/fan_in) when set, N(0, 0.02^2)
  // otherwise. Embeddings always use 0.02. Not stored in checkpoints.
  bool fan_in_init = true;
  // Start each layer with wk = wq so identical tokens attend to each other.
  bool tie_qk_init = true;
  // Position and segment embedding init std; token embeddings use 0.02.
  double pos_seg_init_std = 0.006;

  // Throws ValidationError.
  void validate() const;
  bool operator==(const EncoderConfig&) const = default;
};

inline void EncoderConfig::validate() const {
  if (tokenizer.bucket_count < 2) throw ValidationError("bucket_count must be >= 2", "bucket_count");
  if (d_model <= 0 || n_layers <= 0 || n_heads <= 0 || d_ff <= 0 || max_len <= 2) {
    throw ValidationError("encoder dimensions must be positive", "encoder");
  }
  if (d_model % n_heads != 0) {
    throw ValidationError("d_model " + std::to_string(d_model) + " not divisible by n_heads " +
                              std::to_string(n_heads),
                          "n_heads");
  }
}

template <typename T>
struct LayerParams {
  Mat<T> ln1_g, ln1_b;
  Mat<T> wq, bq, wk, bk, wv, bv, wo, bo;
  Mat<T> ln2_g, ln2_b;
  Mat<T> w1, b1, w2, b2;
};

// Parameter tensors. Vectors are stored as 1 x n matrices.
template <typename T>
struct EncoderParams {
  Mat<T> tok_emb, pos_emb, seg_emb;
  std::vector<LayerParams<T>> layers;
  Mat<T> lnf_g, lnf_b;

  // fn(name, family, tensor, is_vector) in declaration (= checkpoint) order.
  // `family` groups the same tensor across layers.
  template <typename Self, typename Fn>
  static void visit(Self& p, Fn&& fn) {
    fn("tok_emb", "tok_emb", p.tok_emb, false);
    fn("pos_emb", "pos_emb", p.pos_emb, false);
    fn("seg_emb", "seg_emb", p.seg_emb, false);
    for (std::size_t l = 0; l < p.layers.size(); ++l) {
      auto& L = p.layers[l];
      const std::string pre = "layer" + std::to_string(l) + ".";
      fn(pre + "ln1_g", "ln1_g", L.ln1_g, true);
      fn(pre + "ln1_b", "ln1_b", L.ln1_b, true);
      fn(pre + "wq", "wq", L.wq, false);
      fn(pre + "bq", "bq", L.bq, true);
      fn(pre + "wk", "wk", L.wk, false);
      fn(pre + "bk", "bk", L.bk, true);
      fn(pre + "wv", "wv", L.wv, false);
      fn(pre + "bv", "bv", L.bv, true);
      fn(pre + "wo", "wo", L.wo, false);
      fn(pre + "bo", "bo", L.bo, true);
      fn(pre + "ln2_g", "ln2_g", L.ln2_g, true);
      fn(pre + "ln2_b", "ln2_b", L.ln2_b, true);
      fn(pre + "w1", "w1", L.w1, false);
      fn(pre + "b1", "b1", L.b1, true);
      fn(pre + "w2", "w2", L.w2, false);
      fn(pre + "b2", "b2", L.b2, true);
    }
    fn("lnf_g", "lnf_g", p.lnf_g, true);
    fn("lnf_b", "lnf_b", p.lnf_b, true);
  }
  template <typename Fn>
  void for_each(Fn&& fn) { visit(*this, fn); }
  template <typename Fn>
  void for_each(Fn&& fn) const { visit(*this, fn); }

  // Zero tensors with the shapes of `config`.
  static EncoderParams zeros(const EncoderConfig& config);
  void set_zero() {
    for_each([](const std::string&, const char*, Mat<T>& m, bool) { m.setZero(); });
  }
  template <typename U>
  EncoderParams<U> cast() const;
};

template <typename T>
EncoderParams<T> EncoderParams<T>::zeros(const EncoderConfig& c) {
  const int d = c.d_model;
  EncoderParams p;
  p.tok_emb = Mat<T>::Zero(c.tokenizer.vocab_size(), d);
  p.pos_emb = Mat<T>::Zero(c.max_len, d);
  p.seg_emb = Mat<T>::Zero(2, d);
  p.layers.resize(c.n_layers);
  for (auto& L : p.layers) {
    L.ln1_g = Mat<T>::Zero(1, d);
    L.ln1_b = Mat<T>::Zero(1, d);
    for (Mat<T>* w : {&L.wq, &L.wk, &L.wv, &L.wo}) *w = Mat<T>::Zero(d, d);
    for (Mat<T>* b : {&L.bq, &L.bk, &L.bv, &L.bo}) *b = Mat<T>::Zero(1, d);
    L.ln2_g = Mat<T>::Zero(1, d);
    L.ln2_b = Mat<T>::Zero(1, d);
    L.w1 = Mat<T>::Zero(d, c.d_ff);
    L.b1 = Mat<T>::Zero(1, c.d_ff);
    L.w2 = Mat<T>::Zero(c.d_ff, d);
    L.b2 = Mat<T>::Zero(1, d);
  }
  p.lnf_g = Mat<T>::Zero(1, d);
  p.lnf_b = Mat<T>::Zero(1, d);
  return p;
}

template <typename T>
template <typename U>
EncoderParams<U> EncoderParams<T>::cast() const {
  EncoderParams<U> out;
  out.tok_emb = tok_emb.template cast<U>();
  out.pos_emb = pos_emb.template cast<U>();
  out.seg_emb = seg_emb.template cast<U>();
  out.layers.resize(layers.size());
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const auto& a = layers[l];
    auto& b = out.layers[l];
    b.ln1_g = a.ln1_g.template cast<U>();
    b.ln1_b = a.ln1_b.template cast<U>();
    b.wq = a.wq.template cast<U>();
    b.bq = a.bq.template cast<U>();
    b.wk = a.wk.template cast<U>();
    b.bk = a.bk.template cast<U>();
    b.wv = a.wv.template cast<U>();
    b.bv = a.bv.template cast<U>();
    b.wo = a.wo.template cast<U>();
    b.bo = a.bo.template cast<U>();
    b.ln2_g = a.ln2_g.template cast<U>();
    b.ln2_b = a.ln2_b.template cast<U>();
    b.w1 = a.w1.template cast<U>();
    b.b1 = a.b1.template cast<U>();
    b.w2 = a.w2.template cast<U>();
    b.b2 = a.b2.template cast<U>();
  }
  out.lnf_g = lnf_g.template cast<U>();
  out.lnf_b = lnf_b.template cast<U>();
  return out;
}

// Activations saved by forward() for backward().
template <typename T>
struct EncoderTape {
  struct Layer {
    Mat<T> x_in;
    Mat<T> ln1_hat;
    RowVec<T> ln1_rstd;
    Mat<T> a, q, k, v;
    std::vector<Mat<T>> probs;  // per head, L x L
    Mat<T> ctx;
    Mat<T> ln2_hat;
    RowVec<T> ln2_rstd;
    Mat<T> b, h1, g;
  };
  std::vector<int> ids;
  std::vector<int> segments;
  std::vector<Layer> layers;
  Mat<T> lnf_hat;
  RowVec<T> lnf_rstd;
};

namespace detail {

inline thread_local std::uint64_t forward_calls = 0;

inline constexpr double kLayerNormEps = 1e-5;

template <typename T>
void layer_norm(const Mat<T>& x, const Mat<T>& g, const Mat<T>& b, Mat<T>& y, Mat<T>& hat,
                RowVec<T>& rstd) {
  const Eigen::Index L = x.rows();
  const T inv_d = T(1) / static_cast<T>(x.cols());
  hat.resize(x.rows(), x.cols());
  rstd.resize(L);
  for (Eigen::Index i = 0; i < L; ++i) {
    const T mu = x.row(i).sum() * inv_d;
    const auto centered = (x.row(i).array() - mu).matrix();
    const T var = centered.squaredNorm() * inv_d;
    rstd(i) = T(1) / std::sqrt(var + static_cast<T>(kLayerNormEps));
    hat.row(i) = centered * rstd(i);
  }
  y = (hat.array().rowwise() * g.row(0).array()).rowwise() + b.row(0).array();
}

template <typename T>
Mat<T> layer_norm_backward(const Mat<T>& dy, const Mat<T>& hat, const RowVec<T>& rstd,
                           const Mat<T>& g, Mat<T>& dg, Mat<T>& db) {
  dg.row(0) += (dy.array() * hat.array()).colwise().sum().matrix();
  db.row(0) += dy.colwise().sum();
  const Mat<T> dhat = dy.array().rowwise() * g.row(0).array();
  const T inv_d = T(1) / static_cast<T>(dy.cols());
  Mat<T> dx(dy.rows(), dy.cols());
  for (Eigen::Index i = 0; i < dy.rows(); ++i) {
    const T mean_dhat = dhat.row(i).sum() * inv_d;
    const T mean_dhat_hat = dhat.row(i).dot(hat.row(i)) * inv_d;
    dx.row(i) = ((dhat.row(i).array() - mean_dhat - hat.row(i).array() * mean_dhat_hat) *
                 rstd(i))
                    .matrix();
  }
  return dx;
}

inline constexpr double kGeluC = 0.7978845608028654;  // sqrt(2/pi)

template <typename T>
T gelu(T x) {
  const T u = static_cast<T>(kGeluC) * (x + T(0.044715) * x * x * x);
  return T(0.5) * x * (T(1) + std::tanh(u));
}

template <typename T>
T gelu_grad(T x) {
  const T u = static_cast<T>(kGeluC) * (x + T(0.044715) * x * x * x);
  const T t = std::tanh(u);
  const T du = static_cast<T>(kGeluC) * (T(1) + T(3) * T(0.044715) * x * x);
  return T(0.5) * (T(1) + t) + T(0.5) * x * (T(1) - t * t) * du;
}

template <typename T>
void softmax_rows(Mat<T>& s) {
  for (Eigen::Index i = 0; i < s.rows(); ++i) {
    const T mx = s.row(i).maxCoeff();
    s.row(i) = (s.row(i).array() - mx).exp().matrix();
    s.row(i) /= s.row(i).sum();
  }
}

}  // namespace detail

// Number of Encoder::forward calls made on the current thread.
inline std::uint64_t encoder_forward_calls() noexcept { return detail::forward_calls; }

template <typename T>
class Encoder {
 public:
  Encoder() = default;
  // Seeded N(0, 0.02) weights, zero biases, unit layer-norm gains.
  explicit Encoder(const EncoderConfig& config);
  Encoder(const EncoderConfig& config, EncoderParams<T> params)
      : config_(config), params_(std::move(params)) {
    config_.validate();
  }

  const EncoderConfig& config() const noexcept { return config_; }
  int d_model() const noexcept { return config_.d_model; }
  const EncoderParams<T>& params() const noexcept { return params_; }
  EncoderParams<T>& mutable_params() noexcept { return params_; }

  // Hidden states, L x d_model. Row 0 is the CLS summary when the input
  // starts with the CLS marker. Throws ValidationError for an empty or
  // overlong input or misaligned segments.
  Mat<T> forward(std::span<const int> ids, std::span<const int> segments,
                 EncoderTape<T>* tape = nullptr) const;

  // Accumulates parameter gradients for the upstream gradient `d_hidden`.
  void backward(const EncoderTape<T>& tape, const Mat<T>& d_hidden,
                EncoderParams<T>& grads) const;

  template <typename U>
  Encoder<U> cast() const {
    return Encoder<U>(config_, params_.template cast<U>());
  }

  bool all_finite() const;

 private:
  EncoderConfig config_;
  EncoderParams<T> params_;
};

template <typename T>
Encoder<T>::Encoder(const EncoderConfig& config) : config_(config) {
  config_.validate();
  params_ = EncoderParams<T>::zeros(config_);
  Rng rng(config_.seed);
  auto gaussian = [&](Mat<T>& m, double sd) {
    for (Eigen::Index i = 0; i < m.size(); ++i) {
      m.data()[i] = static_cast<T>(sd * standard_normal(rng));
    }
  };
  gaussian(params_.tok_emb, 0.02);
  gaussian(params_.pos_emb, config_.pos_seg_init_std);
  gaussian(params_.seg_emb, config_.pos_seg_init_std);
  for (auto& L : params_.layers) {
    L.ln1_g.setOnes();
    L.ln2_g.setOnes();
    for (Mat<T>* w : {&L.wq, &L.wk, &L.wv, &L.wo, &L.w1, &L.w2}) {
      gaussian(*w, config_.fan_in_init ? 1.0 / std::sqrt(static_cast<double>(w->rows())) : 0.02);
    }
    if (config_.tie_qk_init) L.wk = L.wq;
  }
  params_.lnf_g.setOnes();
}

template <typename T>
bool Encoder<T>::all_finite() const {
  bool ok = true;
  params_.for_each([&](const std::string&, const char*, const Mat<T>& m, bool) {
    ok = ok && m.allFinite();
  });
  return ok;
}

template <typename T>
Mat<T> Encoder<T>::forward(std::span<const int> ids, std::span<const int> segments,
                           EncoderTape<T>* tape) const {
  const int L = static_cast<int>(ids.size());
  if (L == 0) throw ValidationError("cannot encode an empty sequence", "tokens");
  if (L > config_.max_len) {
    throw ValidationError("sequence of " + std::to_string(L) + " tokens exceeds max_len " +
                              std::to_string(config_.max_len),
                          "tokens");
  }
  if (segments.size() != ids.size()) {
    throw ValidationError("segments not aligned with tokens", "segments");
  }
  ++detail::forward_calls;
  const int d = config_.d_model;
  const int H = config_.n_heads;
  const int dh = d / H;
  const T scale = T(1) / std::sqrt(static_cast<T>(dh));
  const int vocab = config_.tokenizer.vocab_size();

  Mat<T> x(L, d);
  for (int i = 0; i < L; ++i) {
    if (ids[i] < 0 || ids[i] >= vocab) {
      throw ValidationError("token id " + std::to_string(ids[i]) + " outside vocabulary", "tokens");
    }
    if (segments[i] != 0 && segments[i] != 1) {
      throw ValidationError("segment labels must be 0 or 1", "segments");
    }
    x.row(i) = params_.tok_emb.row(ids[i]) + params_.pos_emb.row(i) +
               params_.seg_emb.row(segments[i]);
  }
  if (tape) {
    tape->ids.assign(ids.begin(), ids.end());
    tape->segments.assign(segments.begin(), segments.end());
    tape->layers.assign(params_.layers.size(), {});
  }

  Mat<T> hat, a, b;
  RowVec<T> rstd;
  for (std::size_t l = 0; l < params_.layers.size(); ++l) {
    const auto& P = params_.layers[l];
    typename EncoderTape<T>::Layer* rec = tape ? &tape->layers[l] : nullptr;
    if (rec) rec->x_in = x;

    detail::layer_norm(x, P.ln1_g, P.ln1_b, a, hat, rstd);
    Mat<T> q = (a * P.wq).rowwise() + P.bq.row(0);
    Mat<T> k = (a * P.wk).rowwise() + P.bk.row(0);
    Mat<T> v = (a * P.wv).rowwise() + P.bv.row(0);
    Mat<T> ctx(L, d);
    if (rec) rec->probs.resize(H);
    for (int h = 0; h < H; ++h) {
      Mat<T> s = (q.middleCols(h * dh, dh) * k.middleCols(h * dh, dh).transpose()) * scale;
      detail::softmax_rows(s);
      ctx.middleCols(h * dh, dh) = s * v.middleCols(h * dh, dh);
      if (rec) rec->probs[h] = std::move(s);
    }
    x += (ctx * P.wo).rowwise() + P.bo.row(0);
    if (rec) {
      rec->ln1_hat = hat;
      rec->ln1_rstd = rstd;
      rec->a = a;
      rec->q = std::move(q);
      rec->k = std::move(k);
      rec->v = std::move(v);
      rec->ctx = std::move(ctx);
    }

    detail::layer_norm(x, P.ln2_g, P.ln2_b, b, hat, rstd);
    Mat<T> h1 = (b * P.w1).rowwise() + P.b1.row(0);
    Mat<T> g = h1.unaryExpr([](T z) { return detail::gelu(z); });
    x += (g * P.w2).rowwise() + P.b2.row(0);
    if (rec) {
      rec->ln2_hat = hat;
      rec->ln2_rstd = rstd;
      rec->b = b;
      rec->h1 = std::move(h1);
      rec->g = std::move(g);
    }
  }
  Mat<T> out;
  detail::layer_norm(x, params_.lnf_g, params_.lnf_b, out, hat, rstd);
  if (tape) {
    tape->lnf_hat = std::move(hat);
    tape->lnf_rstd = std::move(rstd);
  }
  return out;
}

template <typename T>
void Encoder<T>::backward(const EncoderTape<T>& tape, const Mat<T>& d_hidden,
                          EncoderParams<T>& grads) const {
  const int L = static_cast<int>(tape.ids.size());
  const int d = config_.d_model;
  const int H = config_.n_heads;
  const int dh = d / H;
  const T scale = T(1) / std::sqrt(static_cast<T>(dh));

  Mat<T> dx = detail::layer_norm_backward(d_hidden, tape.lnf_hat, tape.lnf_rstd, params_.lnf_g,
                                          grads.lnf_g, grads.lnf_b);
  for (int l = static_cast<int>(params_.layers.size()) - 1; l >= 0; --l) {
    const auto& P = params_.layers[l];
    auto& G = grads.layers[l];
    const auto& rec = tape.layers[l];

    // Feed-forward sublayer.
    G.w2.noalias() += rec.g.transpose() * dx;
    G.b2.row(0) += dx.colwise().sum();
    Mat<T> dh1 = dx * P.w2.transpose();
    for (Eigen::Index i = 0; i < dh1.size(); ++i) {
      dh1.data()[i] *= detail::gelu_grad(rec.h1.data()[i]);
    }
    G.w1.noalias() += rec.b.transpose() * dh1;
    G.b1.row(0) += dh1.colwise().sum();
    const Mat<T> db = dh1 * P.w1.transpose();
    dx += detail::layer_norm_backward(db, rec.ln2_hat, rec.ln2_rstd, P.ln2_g, G.ln2_g, G.ln2_b);

    // Attention sublayer.
    G.wo.noalias() += rec.ctx.transpose() * dx;
    G.bo.row(0) += dx.colwise().sum();
    const Mat<T> dctx = dx * P.wo.transpose();
    Mat<T> dq(L, d), dk(L, d), dv(L, d);
    for (int h = 0; h < H; ++h) {
      const Mat<T>& p = rec.probs[h];
      const auto dout = dctx.middleCols(h * dh, dh);
      const Mat<T> dp = dout * rec.v.middleCols(h * dh, dh).transpose();
      dv.middleCols(h * dh, dh).noalias() = p.transpose() * dout;
      Mat<T> ds = p.array() * dp.array();
      const Eigen::Matrix<T, Eigen::Dynamic, 1> row_dot = ds.rowwise().sum();
      ds -= (p.array().colwise() * row_dot.array()).matrix();
      ds *= scale;
      dq.middleCols(h * dh, dh).noalias() = ds * rec.k.middleCols(h * dh, dh);
      dk.middleCols(h * dh, dh).noalias() = ds.transpose() * rec.q.middleCols(h * dh, dh);
    }
    G.wq.noalias() += rec.a.transpose() * dq;
    G.wk.noalias() += rec.a.transpose() * dk;
    G.wv.noalias() += rec.a.transpose() * dv;
    G.bq.row(0) += dq.colwise().sum();
    G.bk.row(0) += dk.colwise().sum();
    G.bv.row(0) += dv.colwise().sum();
    Mat<T> da = dq * P.wq.transpose();
    da.noalias() += dk * P.wk.transpose();
    da.noalias() += dv * P.wv.transpose();
    dx += detail::layer_norm_backward(da, rec.ln1_hat, rec.ln1_rstd, P.ln1_g, G.ln1_g, G.ln1_b);
  }
  for (int i = 0; i < L; ++i) {
    grads.tok_emb.row(tape.ids[i]) += dx.row(i);
    grads.pos_emb.row(i) += dx.row(i);
    grads.seg_emb.row(tape.segments[i]) += dx.row(i);
  }
}

using EncoderModel = Encoder<float>;

// Checkpoint I/O. Layout: magic "RCI1", version byte, config block of
// little-endian integers, then each tensor in declaration order as
// (rank u32, dims u32..., float32 data).
inline constexpr std::uint8_t kEncoderFormatVersion = 1;

void write_encoder(std::vector<std::uint8_t>& out, const EncoderModel& model);
// Reads an encoder at `pos`, advancing it. Throws FormatError.
EncoderModel read_encoder(std::span<const std::uint8_t> bytes, std::size_t& pos);

void save_encoder(const EncoderModel& model, const std::string& path);
EncoderModel load_encoder(const std::string& path);
// Additionally requires the stored configuration to equal `expected`.
EncoderModel load_encoder(const std::string& path, const EncoderConfig& expected);

}  // namespace rci

// SPDX-License-Identifier: Apache-2.0
//
// Differentiable network: shared convolutional embedder over log-mel patches,
// modality fusion by concatenation, GRU over the sample sequence, a logistic
// disease head per step, and a gradient-reversal language head on the final
// hidden state. Backprop is analytic throughout; traces cache exactly what the
// backward pass needs.
#ifndef LONGTRACK_MODEL_HPP
#define LONGTRACK_MODEL_HPP

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "longtrack/common.hpp"

namespace longtrack {

using Eigen::MatrixXd;
using Eigen::VectorXd;

struct ModelConfig {
  int patch_frames = 96;
  int n_mels = 64;
  int conv1_channels = 8;
  int conv2_channels = 16;
  int embed_dim = 128;
  int hidden_dim = 64;
  int n_languages = 8;
  double lambda_rev = 1.0;
  double w_lang = 0.1;
  bool language_head = true;

  int fused_dim() const { return 3 * embed_dim; }

  void validate() const {
    LT_REQUIRE(patch_frames >= 10 && n_mels >= 10,
               "ModelConfig: patch must be at least 10x10 for two conv/pool stages");
    LT_REQUIRE(conv1_channels >= 1 && conv2_channels >= 1, "ModelConfig: bad channel counts");
    LT_REQUIRE(embed_dim >= 1 && hidden_dim >= 1, "ModelConfig: bad embed/hidden dims");
    LT_REQUIRE(n_languages >= 2, "ModelConfig: n_languages < 2");
    LT_REQUIRE(lambda_rev >= 0.0 && w_lang >= 0.0, "ModelConfig: negative loss weights");
  }

  bool same_shape(const ModelConfig& o) const {
    return patch_frames == o.patch_frames && n_mels == o.n_mels &&
           conv1_channels == o.conv1_channels && conv2_channels == o.conv2_channels &&
           embed_dim == o.embed_dim && hidden_dim == o.hidden_dim &&
           n_languages == o.n_languages && language_head == o.language_head;
  }
};

// Spatial bookkeeping for the two valid-padding conv (3x3) + 2x2 max-pool
// stages.
struct EmbedderDims {
  int oh1, ow1, ph1, pw1;
  int oh2, ow2, ph2, pw2;
  int flat_dim;

  explicit EmbedderDims(const ModelConfig& c) {
    oh1 = c.patch_frames - 2;
    ow1 = c.n_mels - 2;
    ph1 = oh1 / 2;
    pw1 = ow1 / 2;
    oh2 = ph1 - 2;
    ow2 = pw1 - 2;
    ph2 = oh2 / 2;
    pw2 = ow2 / 2;
    LT_REQUIRE(ph2 >= 1 && pw2 >= 1, "EmbedderDims: patch too small");
    flat_dim = ph2 * pw2 * c.conv2_channels;
  }
};

struct ConvEmbedderParams {
  MatrixXd conv1_w;  // 9 x c1
  VectorXd conv1_b;  // c1
  MatrixXd conv2_w;  // 9*c1 x c2
  VectorXd conv2_b;  // c2
  MatrixXd dense_w;  // embed_dim x flat_dim
  VectorXd dense_b;  // embed_dim
};

struct GruParams {
  MatrixXd w_z, u_z;  // H x in, H x H
  VectorXd b_z;
  MatrixXd w_r, u_r;
  VectorXd b_r;
  MatrixXd w_h, u_h;
  VectorXd b_h;
};

struct HeadParams {
  VectorXd disease_w;  // H
  VectorXd disease_b;  // 1
  MatrixXd lang_w;     // L x H (0x0 when the language head is disabled)
  VectorXd lang_b;     // L
};

struct ModelTensors {
  ConvEmbedderParams embedder;
  GruParams gru;
  HeadParams heads;
};

// Fixed tensor order shared by the optimizer, the checkpoint format, and the
// gradient checks.
#define LONGTRACK_MODEL_TENSOR_LIST(X) \
  X(embedder.conv1_w)                  \
  X(embedder.conv1_b)                  \
  X(embedder.conv2_w)                  \
  X(embedder.conv2_b)                  \
  X(embedder.dense_w)                  \
  X(embedder.dense_b)                  \
  X(gru.w_z)                           \
  X(gru.u_z)                           \
  X(gru.b_z)                           \
  X(gru.w_r)                           \
  X(gru.u_r)                           \
  X(gru.b_r)                           \
  X(gru.w_h)                           \
  X(gru.u_h)                           \
  X(gru.b_h)                           \
  X(heads.disease_w)                   \
  X(heads.disease_b)                   \
  X(heads.lang_w)                      \
  X(heads.lang_b)

template <typename Tensors, typename Fn>
void for_each_tensor(Tensors& t, Fn&& fn) {
#define LONGTRACK_VISIT(member) fn(#member, t.member);
  LONGTRACK_MODEL_TENSOR_LIST(LONGTRACK_VISIT)
#undef LONGTRACK_VISIT
}

inline ModelTensors make_zero_tensors(const ModelConfig& c) {
  c.validate();
  const EmbedderDims d(c);
  ModelTensors t;
  t.embedder.conv1_w = MatrixXd::Zero(9, c.conv1_channels);
  t.embedder.conv1_b = VectorXd::Zero(c.conv1_channels);
  t.embedder.conv2_w = MatrixXd::Zero(9 * c.conv1_channels, c.conv2_channels);
  t.embedder.conv2_b = VectorXd::Zero(c.conv2_channels);
  t.embedder.dense_w = MatrixXd::Zero(c.embed_dim, d.flat_dim);
  t.embedder.dense_b = VectorXd::Zero(c.embed_dim);
  const int in = c.fused_dim(), h = c.hidden_dim;
  t.gru.w_z = MatrixXd::Zero(h, in);
  t.gru.u_z = MatrixXd::Zero(h, h);
  t.gru.b_z = VectorXd::Zero(h);
  t.gru.w_r = MatrixXd::Zero(h, in);
  t.gru.u_r = MatrixXd::Zero(h, h);
  t.gru.b_r = VectorXd::Zero(h);
  t.gru.w_h = MatrixXd::Zero(h, in);
  t.gru.u_h = MatrixXd::Zero(h, h);
  t.gru.b_h = VectorXd::Zero(h);
  t.heads.disease_w = VectorXd::Zero(h);
  t.heads.disease_b = VectorXd::Zero(1);
  if (c.language_head) {
    t.heads.lang_w = MatrixXd::Zero(c.n_languages, h);
    t.heads.lang_b = VectorXd::Zero(c.n_languages);
  } else {
    t.heads.lang_w = MatrixXd::Zero(0, 0);
    t.heads.lang_b = VectorXd::Zero(0);
  }
  return t;
}

struct ModelParams {
  ModelConfig config;
  ModelTensors tensors;
};

// Glorot-uniform weights, zero biases, deterministic from seed. Draw order
// follows the tensor list.
inline ModelParams init_params(const ModelConfig& config, std::uint64_t seed) {
  ModelParams p{config, make_zero_tensors(config)};
  Rng rng(mix_seed(seed, 0x1417));
  for_each_tensor(p.tensors, [&](const char* name, auto& tensor) {
    const std::string n(name);
    const bool is_bias = n.size() >= 2 && n.compare(n.size() - 2, 2, "_b") == 0;
    if (is_bias || tensor.size() == 0) return;
    const double fan_in = static_cast<double>(tensor.cols());
    const double fan_out = static_cast<double>(tensor.rows());
    const double bound = std::sqrt(6.0 / (fan_in + fan_out));
    for (Eigen::Index i = 0; i < tensor.size(); ++i)
      tensor.data()[i] = rng.uniform(-bound, bound);
  });
  return p;
}

// ---------------------------------------------------------------------------
// Convolutional embedder
// ---------------------------------------------------------------------------

namespace conv_detail {

// Feature maps are (positions x channels) with position index i*w + j.
// im2col column index is c*9 + (di*3 + dj).
inline MatrixXd im2col3x3(const MatrixXd& features, int h, int w) {
  const int channels = static_cast<int>(features.cols());
  const int oh = h - 2, ow = w - 2;
  MatrixXd col(oh * ow, 9 * channels);
  for (int c = 0; c < channels; ++c) {
    for (int di = 0; di < 3; ++di) {
      for (int dj = 0; dj < 3; ++dj) {
        const int tap = c * 9 + di * 3 + dj;
        for (int oi = 0; oi < oh; ++oi) {
          const int src_row = (oi + di) * w + dj;
          for (int oj = 0; oj < ow; ++oj)
            col(oi * ow + oj, tap) = features(src_row + oj, c);
        }
      }
    }
  }
  return col;
}

inline MatrixXd col2im3x3(const MatrixXd& d_col, int h, int w, int channels) {
  const int oh = h - 2, ow = w - 2;
  MatrixXd d_features = MatrixXd::Zero(h * w, channels);
  for (int c = 0; c < channels; ++c) {
    for (int di = 0; di < 3; ++di) {
      for (int dj = 0; dj < 3; ++dj) {
        const int tap = c * 9 + di * 3 + dj;
        for (int oi = 0; oi < oh; ++oi) {
          const int dst_row = (oi + di) * w + dj;
          for (int oj = 0; oj < ow; ++oj)
            d_features(dst_row + oj, c) += d_col(oi * ow + oj, tap);
        }
      }
    }
  }
  return d_features;
}

// 2x2 max pool, stride 2, trailing row/column dropped when odd. Ties resolve
// to the first element in scan order so backprop is deterministic.
inline void maxpool2x2(const MatrixXd& features, int h, int w, MatrixXd& pooled,
                       Eigen::MatrixXi& argmax) {
  const int channels = static_cast<int>(features.cols());
  const int ph = h / 2, pw = w / 2;
  pooled.resize(ph * pw, channels);
  argmax.resize(ph * pw, channels);
  for (int c = 0; c < channels; ++c) {
    for (int i = 0; i < ph; ++i) {
      for (int j = 0; j < pw; ++j) {
        int best_idx = (2 * i) * w + 2 * j;
        double best = features(best_idx, c);
        const int cand[3] = {(2 * i) * w + 2 * j + 1, (2 * i + 1) * w + 2 * j,
                             (2 * i + 1) * w + 2 * j + 1};
        for (int idx : cand) {
          if (features(idx, c) > best) {
            best = features(idx, c);
            best_idx = idx;
          }
        }
        pooled(i * pw + j, c) = best;
        argmax(i * pw + j, c) = best_idx;
      }
    }
  }
}

inline MatrixXd unpool2x2(const MatrixXd& d_pooled, const Eigen::MatrixXi& argmax, int h, int w,
                          int channels) {
  MatrixXd d_features = MatrixXd::Zero(h * w, channels);
  for (int c = 0; c < channels; ++c)
    for (Eigen::Index p = 0; p < d_pooled.rows(); ++p)
      d_features(argmax(p, c), c) += d_pooled(p, c);
  return d_features;
}

}  // namespace conv_detail

struct PatchTrace {
  MatrixXd input;       // patch as (F*M x 1) position vector
  MatrixXd act1;        // post-ReLU conv1, (oh1*ow1 x c1)
  Eigen::MatrixXi arg1;
  MatrixXd pool1;       // (ph1*pw1 x c1)
  MatrixXd act2;
  Eigen::MatrixXi arg2;
  VectorXd flat;        // pool2 flattened channel-major
};

struct EmbedTrace {
  std::vector<PatchTrace> patches;
};

struct EmbedResult {
  VectorXd embedding;
  EmbedTrace trace;
};

// Per-recording embedding: each patch runs through the conv stack and a dense
// projection; the recording embedding is the mean over patches.
inline EmbedResult embed_recording(const std::vector<MatrixXd>& patches,
                                   const ConvEmbedderParams& e, const ModelConfig& c) {
  using namespace conv_detail;
  LT_REQUIRE(!patches.empty(), "embed_recording: no patches");
  const EmbedderDims d(c);
  EmbedResult out;
  out.embedding = VectorXd::Zero(c.embed_dim);
  out.trace.patches.reserve(patches.size());

  for (const MatrixXd& patch : patches) {
    if (patch.rows() != c.patch_frames || patch.cols() != c.n_mels)
      fail(ErrorKind::DimensionMismatch, "embed_recording: bad patch shape");
    PatchTrace t;
    t.input.resize(c.patch_frames * c.n_mels, 1);
    for (int f = 0; f < c.patch_frames; ++f)
      for (int m = 0; m < c.n_mels; ++m) t.input(f * c.n_mels + m, 0) = patch(f, m);

    MatrixXd col1 = im2col3x3(t.input, c.patch_frames, c.n_mels);
    t.act1 = ((col1 * e.conv1_w).rowwise() + e.conv1_b.transpose()).cwiseMax(0.0);
    maxpool2x2(t.act1, d.oh1, d.ow1, t.pool1, t.arg1);

    MatrixXd col2 = im2col3x3(t.pool1, d.ph1, d.pw1);
    t.act2 = ((col2 * e.conv2_w).rowwise() + e.conv2_b.transpose()).cwiseMax(0.0);
    MatrixXd pool2;
    conv_detail::maxpool2x2(t.act2, d.oh2, d.ow2, pool2, t.arg2);
    t.flat = Eigen::Map<const VectorXd>(pool2.data(), pool2.size());

    out.embedding.noalias() += e.dense_w * t.flat + e.dense_b;
    out.trace.patches.push_back(std::move(t));
  }
  out.embedding /= static_cast<double>(patches.size());
  return out;
}

// Accumulates embedder parameter gradients for one recording. Patches are
// data, so no input gradient is produced.
inline void embed_backward(const EmbedTrace& trace, const VectorXd& d_embedding,
                           const ConvEmbedderParams& e, const ModelConfig& c,
                           ConvEmbedderParams& grads) {
  using namespace conv_detail;
  LT_REQUIRE(!trace.patches.empty(), "embed_backward: empty trace");
  if (d_embedding.size() != c.embed_dim)
    fail(ErrorKind::TraceMismatch, "embed_backward: gradient size mismatch");
  const EmbedderDims d(c);
  const VectorXd d_patch_emb = d_embedding / static_cast<double>(trace.patches.size());

  for (const PatchTrace& t : trace.patches) {
    if (t.flat.size() != d.flat_dim)
      fail(ErrorKind::TraceMismatch, "embed_backward: trace does not match params");
    grads.dense_w.noalias() += d_patch_emb * t.flat.transpose();
    grads.dense_b.noalias() += d_patch_emb;
    VectorXd d_flat = e.dense_w.transpose() * d_patch_emb;

    Eigen::Map<const MatrixXd> d_pool2(d_flat.data(), d.ph2 * d.pw2, c.conv2_channels);
    MatrixXd d_act2 = unpool2x2(d_pool2, t.arg2, d.oh2, d.ow2, c.conv2_channels);
    d_act2.array() *= (t.act2.array() > 0.0).cast<double>();

    MatrixXd col2 = im2col3x3(t.pool1, d.ph1, d.pw1);
    grads.conv2_w.noalias() += col2.transpose() * d_act2;
    grads.conv2_b.noalias() += d_act2.colwise().sum().transpose();
    MatrixXd d_col2 = d_act2 * e.conv2_w.transpose();
    MatrixXd d_pool1 = col2im3x3(d_col2, d.ph1, d.pw1, c.conv1_channels);

    MatrixXd d_act1 = unpool2x2(d_pool1, t.arg1, d.oh1, d.ow1, c.conv1_channels);
    d_act1.array() *= (t.act1.array() > 0.0).cast<double>();

    MatrixXd col1 = im2col3x3(t.input, c.patch_frames, c.n_mels);
    grads.conv1_w.noalias() += col1.transpose() * d_act1;
    grads.conv1_b.noalias() += d_act1.colwise().sum().transpose();
  }
}

// Concatenation in fixed order: breath, cough, voice.
inline VectorXd fuse_modalities(const VectorXd& e_breath, const VectorXd& e_cough,
                                const VectorXd& e_voice) {
  if (e_breath.size() != e_cough.size() || e_cough.size() != e_voice.size())
    fail(ErrorKind::DimensionMismatch, "fuse_modalities: embedding sizes differ");
  const Eigen::Index n = e_breath.size();
  VectorXd fused(3 * n);
  fused.segment(0, n) = e_breath;
  fused.segment(n, n) = e_cough;
  fused.segment(2 * n, n) = e_voice;
  return fused;
}

// ---------------------------------------------------------------------------
// GRU, heads, loss
// ---------------------------------------------------------------------------

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

struct GruStepTrace {
  VectorXd z, r, hc;
};

// z = sigma(W_z x + U_z h + b_z), r likewise, hc = tanh(W_h x + U_h (r.h) + b_h),
// h_t = (1 - z).h_prev + z.hc
inline VectorXd gru_step(const VectorXd& x, const VectorXd& h_prev, const GruParams& g,
                         GruStepTrace* trace = nullptr) {
  if (x.size() != g.w_z.cols() || h_prev.size() != g.u_z.cols())
    fail(ErrorKind::DimensionMismatch, "gru_step: input/hidden size mismatch");
  VectorXd z = (g.w_z * x + g.u_z * h_prev + g.b_z).unaryExpr([](double v) { return sigmoid(v); });
  VectorXd r = (g.w_r * x + g.u_r * h_prev + g.b_r).unaryExpr([](double v) { return sigmoid(v); });
  VectorXd hc = (g.w_h * x + g.u_h * (r.cwiseProduct(h_prev)) + g.b_h)
                    .unaryExpr([](double v) { return std::tanh(v); });
  VectorXd h = (VectorXd::Ones(z.size()) - z).cwiseProduct(h_prev) + z.cwiseProduct(hc);
  if (trace) {
    trace->z = std::move(z);
    trace->r = std::move(r);
    trace->hc = std::move(hc);
  }
  return h;
}

// Identity forward / negated-and-scaled backward; the reversal layer feeding
// the language head.
inline VectorXd grad_reverse_forward(const VectorXd& v) { return v; }
inline VectorXd grad_reverse_backward(const VectorXd& upstream, double lambda_rev) {
  LT_REQUIRE(lambda_rev >= 0.0, "grad_reverse: lambda must be non-negative");
  return -lambda_rev * upstream;
}

struct ForwardTrace {
  std::vector<VectorXd> x;   // T inputs
  std::vector<VectorXd> h;   // T+1 states, h[0] = 0
  std::vector<GruStepTrace> gates;
  VectorXd probs;            // T
  VectorXd lang_logits;      // L (size 0 without language head)
};

struct WindowForward {
  VectorXd probs;
  VectorXd lang_logits;
  ForwardTrace trace;
};

inline VectorXd softmax(const VectorXd& logits) {
  VectorXd shifted = logits.array() - logits.maxCoeff();
  VectorXd e = shifted.array().exp();
  return e / e.sum();
}

// Runs the GRU over a (possibly variable-length) sequence of fused vectors.
// Emits a disease probability per step; language logits come from the final
// state through the reversal layer.
inline WindowForward forward_window(const std::vector<VectorXd>& fused, const ModelParams& p) {
  LT_REQUIRE(!fused.empty(), "forward_window: empty sequence");
  const int T = static_cast<int>(fused.size());
  WindowForward out;
  out.trace.x = fused;
  out.trace.h.resize(T + 1);
  out.trace.gates.resize(T);
  out.trace.h[0] = VectorXd::Zero(p.config.hidden_dim);
  out.probs.resize(T);
  for (int t = 0; t < T; ++t) {
    out.trace.h[t + 1] = gru_step(fused[t], out.trace.h[t], p.tensors.gru, &out.trace.gates[t]);
    const double logit =
        p.tensors.heads.disease_w.dot(out.trace.h[t + 1]) + p.tensors.heads.disease_b(0);
    out.probs(t) = sigmoid(logit);
  }
  if (p.config.language_head) {
    const VectorXd reversed = grad_reverse_forward(out.trace.h[T]);
    out.lang_logits = p.tensors.heads.lang_w * reversed + p.tensors.heads.lang_b;
  } else {
    out.lang_logits = VectorXd::Zero(0);
  }
  out.trace.probs = out.probs;
  out.trace.lang_logits = out.lang_logits;
  return out;
}

struct LossResult {
  double total = 0.0;
  double disease_bce = 0.0;
  double language_ce = 0.0;
  VectorXd d_probs;    // dL/dp_t
  VectorXd d_logits;   // dL/dlogits (language head input side, pre-reversal)
};

// L = mean_t BCE(p_t, y_t) + w_lang * CE(softmax(logits), language).
// Probabilities are clamped away from {0,1} in both the value and gradient.
inline LossResult window_loss(const VectorXd& probs, const std::vector<int>& labels,
                              const VectorXd& lang_logits, int language_label, double w_lang) {
  const int T = static_cast<int>(probs.size());
  LT_REQUIRE(T > 0 && static_cast<int>(labels.size()) == T,
             "window_loss: probs/labels length mismatch");
  constexpr double kEps = 1e-12;
  LossResult out;
  out.d_probs = VectorXd::Zero(T);
  for (int t = 0; t < T; ++t) {
    LT_REQUIRE(labels[t] == 0 || labels[t] == 1, "window_loss: labels must be 0/1");
    const double p = std::clamp(probs(t), kEps, 1.0 - kEps);
    const double y = static_cast<double>(labels[t]);
    out.disease_bce += -(y * std::log(p) + (1.0 - y) * std::log(1.0 - p));
    out.d_probs(t) = (-y / p + (1.0 - y) / (1.0 - p)) / T;
  }
  out.disease_bce /= T;

  if (lang_logits.size() > 0 && w_lang > 0.0) {
    LT_REQUIRE(language_label >= 0 && language_label < lang_logits.size(),
               "window_loss: language label out of range");
    const VectorXd sm = softmax(lang_logits);
    out.language_ce = -std::log(std::max(sm(language_label), kEps));
    out.d_logits = w_lang * sm;
    out.d_logits(language_label) -= w_lang;
  } else {
    out.d_logits = VectorXd::Zero(lang_logits.size());
  }
  out.total = out.disease_bce + w_lang * out.language_ce;
  return out;
}

// Exact backprop through heads and GRU. Language-path gradients pass the
// reversal layer (scaled by -lambda_rev) before entering the shared state;
// the language head's own parameters receive unreversed gradients.
// Returns dL/dx_t for the embedder chain.
inline std::vector<VectorXd> backward_window(const ForwardTrace& trace, const VectorXd& d_probs,
                                             const VectorXd& d_logits, const ModelParams& p,
                                             ModelTensors& grads) {
  const int T = static_cast<int>(trace.x.size());
  if (T == 0 || static_cast<int>(trace.h.size()) != T + 1 ||
      static_cast<int>(trace.gates.size()) != T || d_probs.size() != T)
    fail(ErrorKind::TraceMismatch, "backward_window: trace shape mismatch");
  const int H = p.config.hidden_dim;
  if (trace.h[0].size() != H || trace.x[0].size() != p.config.fused_dim())
    fail(ErrorKind::TraceMismatch, "backward_window: trace does not match params");
  const GruParams& g = p.tensors.gru;
  const HeadParams& heads = p.tensors.heads;

  std::vector<VectorXd> d_x(T);
  VectorXd dh = VectorXd::Zero(H);

  if (p.config.language_head && d_logits.size() > 0) {
    if (d_logits.size() != heads.lang_w.rows())
      fail(ErrorKind::TraceMismatch, "backward_window: language gradient size mismatch");
    grads.heads.lang_w.noalias() += d_logits * trace.h[T].transpose();
    grads.heads.lang_b.noalias() += d_logits;
    dh += grad_reverse_backward(heads.lang_w.transpose() * d_logits, p.config.lambda_rev);
  }

  for (int t = T - 1; t >= 0; --t) {
    // disease head at step t
    const double pt = trace.probs(t);
    const double da = d_probs(t) * pt * (1.0 - pt);
    grads.heads.disease_w.noalias() += da * trace.h[t + 1];
    grads.heads.disease_b(0) += da;
    dh.noalias() += da * heads.disease_w;

    const GruStepTrace& gt = trace.gates[t];
    const VectorXd& h_prev = trace.h[t];
    const VectorXd& x = trace.x[t];

    const VectorXd d_hc = dh.cwiseProduct(gt.z);
    const VectorXd d_z = dh.cwiseProduct(gt.hc - h_prev);
    VectorXd d_h_prev = dh.cwiseProduct(VectorXd::Ones(H) - gt.z);

    const VectorXd da_h =
        d_hc.cwiseProduct((VectorXd::Ones(H) - gt.hc.cwiseProduct(gt.hc)));
    grads.gru.w_h.noalias() += da_h * x.transpose();
    grads.gru.u_h.noalias() += da_h * (gt.r.cwiseProduct(h_prev)).transpose();
    grads.gru.b_h.noalias() += da_h;
    const VectorXd d_rh = g.u_h.transpose() * da_h;
    const VectorXd d_r = d_rh.cwiseProduct(h_prev);
    d_h_prev.noalias() += d_rh.cwiseProduct(gt.r);

    const VectorXd da_z =
        d_z.cwiseProduct(gt.z.cwiseProduct(VectorXd::Ones(H) - gt.z));
    grads.gru.w_z.noalias() += da_z * x.transpose();
    grads.gru.u_z.noalias() += da_z * h_prev.transpose();
    grads.gru.b_z.noalias() += da_z;
    d_h_prev.noalias() += g.u_z.transpose() * da_z;

    const VectorXd da_r =
        d_r.cwiseProduct(gt.r.cwiseProduct(VectorXd::Ones(H) - gt.r));
    grads.gru.w_r.noalias() += da_r * x.transpose();
    grads.gru.u_r.noalias() += da_r * h_prev.transpose();
    grads.gru.b_r.noalias() += da_r;
    d_h_prev.noalias() += g.u_r.transpose() * da_r;

    d_x[t] = g.w_z.transpose() * da_z + g.w_r.transpose() * da_r + g.w_h.transpose() * da_h;
    dh = std::move(d_h_prev);
  }
  return d_x;
}

// ---------------------------------------------------------------------------
// Adam
// ---------------------------------------------------------------------------

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  ModelTensors m, v;
  std::int64_t step = 0;
};

inline AdamState make_adam_state(const ModelConfig& c) {
  return AdamState{make_zero_tensors(c), make_zero_tensors(c), 0};
}

namespace adam_detail {

template <typename T>
void update_tensor(T& param, const T& grad, T& m, T& v, const AdamConfig& cfg, double bc1,
                   double bc2) {
  LT_REQUIRE(param.rows() == grad.rows() && param.cols() == grad.cols(),
             "adam_update: gradient shape mismatch");
  for (Eigen::Index i = 0; i < param.size(); ++i) {
    const double gi = grad.data()[i];
    double& mi = m.data()[i];
    double& vi = v.data()[i];
    mi = cfg.beta1 * mi + (1.0 - cfg.beta1) * gi;
    vi = cfg.beta2 * vi + (1.0 - cfg.beta2) * gi * gi;
    param.data()[i] -= cfg.lr * (mi / bc1) / (std::sqrt(vi / bc2) + cfg.eps);
  }
}

}  // namespace adam_detail

// Standard bias-corrected Adam step over every tensor, in declared order.
inline void adam_update(ModelParams& params, const ModelTensors& grads, AdamState& state,
                        const AdamConfig& cfg = {}) {
  state.step += 1;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
#define LONGTRACK_ADAM(member)                                                            \
  adam_detail::update_tensor(params.tensors.member, grads.member, state.m.member,         \
                             state.v.member, cfg, bc1, bc2);
  LONGTRACK_MODEL_TENSOR_LIST(LONGTRACK_ADAM)
#undef LONGTRACK_ADAM
}

}  // namespace longtrack

#endif  // LONGTRACK_MODEL_HPP

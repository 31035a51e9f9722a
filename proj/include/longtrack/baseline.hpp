// SPDX-License-Identifier: Apache-2.0
//
// Non-sequential benchmark models: the same convolutional embedder and fusion
// as the sequential model, with a single logistic head on either the final
// day's fused vector ("single") or the elementwise mean of the window's fused
// vectors ("average").
#ifndef LONGTRACK_BASELINE_HPP
#define LONGTRACK_BASELINE_HPP

#include <vector>

#include "longtrack/model.hpp"

namespace longtrack {

enum class ModelKind : std::uint32_t { sequential = 0, baseline_single = 1, baseline_average = 2 };

inline const char* to_string(ModelKind k) {
  switch (k) {
    case ModelKind::sequential: return "sequential";
    case ModelKind::baseline_single: return "single";
    case ModelKind::baseline_average: return "average";
  }
  return "unknown";
}

struct BaselineTensors {
  ConvEmbedderParams embedder;
  VectorXd head_w;  // fused_dim
  VectorXd head_b;  // 1
};

#define LONGTRACK_BASELINE_TENSOR_LIST(X) \
  X(embedder.conv1_w)                     \
  X(embedder.conv1_b)                     \
  X(embedder.conv2_w)                     \
  X(embedder.conv2_b)                     \
  X(embedder.dense_w)                     \
  X(embedder.dense_b)                     \
  X(head_w)                               \
  X(head_b)

template <typename Tensors, typename Fn>
void for_each_baseline_tensor(Tensors& t, Fn&& fn) {
#define LONGTRACK_VISIT(member) fn(#member, t.member);
  LONGTRACK_BASELINE_TENSOR_LIST(LONGTRACK_VISIT)
#undef LONGTRACK_VISIT
}

inline BaselineTensors make_zero_baseline_tensors(const ModelConfig& c) {
  c.validate();
  const ModelTensors full = make_zero_tensors(c);
  BaselineTensors t;
  t.embedder = full.embedder;
  t.head_w = VectorXd::Zero(c.fused_dim());
  t.head_b = VectorXd::Zero(1);
  return t;
}

struct BaselineParams {
  ModelConfig config;
  ModelKind kind = ModelKind::baseline_single;
  BaselineTensors tensors;
};

inline BaselineParams init_baseline_params(const ModelConfig& config, ModelKind kind,
                                           std::uint64_t seed) {
  LT_REQUIRE(kind != ModelKind::sequential, "init_baseline_params: not a baseline kind");
  BaselineParams p{config, kind, make_zero_baseline_tensors(config)};
  Rng rng(mix_seed(seed, 0xba5eULL + static_cast<std::uint64_t>(kind)));
  for_each_baseline_tensor(p.tensors, [&](const char* name, auto& tensor) {
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

// "single": score from the final day's fused vector alone.
inline double baseline_single_score(const std::vector<VectorXd>& fused, const BaselineParams& p) {
  LT_REQUIRE(!fused.empty(), "baseline_single: empty window");
  return sigmoid(p.tensors.head_w.dot(fused.back()) + p.tensors.head_b(0));
}

// "average": score from the elementwise mean of the window's fused vectors.
inline double baseline_average_score(const std::vector<VectorXd>& fused, const BaselineParams& p) {
  LT_REQUIRE(!fused.empty(), "baseline_average: empty window");
  VectorXd mean = VectorXd::Zero(fused.front().size());
  for (const auto& f : fused) mean += f;
  mean /= static_cast<double>(fused.size());
  return sigmoid(p.tensors.head_w.dot(mean) + p.tensors.head_b(0));
}

inline double baseline_score(const std::vector<VectorXd>& fused, const BaselineParams& p) {
  return p.kind == ModelKind::baseline_single ? baseline_single_score(fused, p)
                                              : baseline_average_score(fused, p);
}

struct BaselineAdamState {
  BaselineTensors m, v;
  std::int64_t step = 0;
};

inline BaselineAdamState make_baseline_adam_state(const ModelConfig& c) {
  return BaselineAdamState{make_zero_baseline_tensors(c), make_zero_baseline_tensors(c), 0};
}

inline void adam_update(BaselineParams& params, const BaselineTensors& grads,
                        BaselineAdamState& state, const AdamConfig& cfg = {}) {
  state.step += 1;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
#define LONGTRACK_ADAM(member)                                                     \
  adam_detail::update_tensor(params.tensors.member, grads.member, state.m.member,  \
                             state.v.member, cfg, bc1, bc2);
  LONGTRACK_BASELINE_TENSOR_LIST(LONGTRACK_ADAM)
#undef LONGTRACK_ADAM
}

}  // namespace longtrack

#endif  // LONGTRACK_BASELINE_HPP

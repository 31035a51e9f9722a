// SPDX-License-Identifier: Apache-2.0
//
// Versioned binary checkpoint: magic "LTRK", format version, model kind,
// dimensions header, then the parameter and optimizer-state arrays as 64-bit
// little-endian doubles in declared tensor order (params, Adam m, Adam v).
#ifndef LONGTRACK_CHECKPOINT_HPP
#define LONGTRACK_CHECKPOINT_HPP

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "longtrack/baseline.hpp"
#include "longtrack/model.hpp"

namespace longtrack {

constexpr std::uint32_t kCheckpointVersion = 1;

namespace ckpt_detail {

inline void put_u32(std::vector<unsigned char>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<unsigned char>((v >> (8 * i)) & 0xff));
}

inline void put_u64(std::vector<unsigned char>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<unsigned char>((v >> (8 * i)) & 0xff));
}

inline void put_f64(std::vector<unsigned char>& out, double v) {
  put_u64(out, std::bit_cast<std::uint64_t>(v));
}

class Reader {
 public:
  Reader(const unsigned char* data, std::size_t size, std::string path)
      : data_(data), size_(size), path_(std::move(path)) {}

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(data_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }

  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(data_[pos_ + i]) << (8 * i);
    pos_ += 8;
    return v;
  }

  double f64() { return std::bit_cast<double>(u64()); }

  void bytes(void* dst, std::size_t n) {
    need(n);
    std::memcpy(dst, data_ + pos_, n);
    pos_ += n;
  }

  bool at_end() const { return pos_ == size_; }

 private:
  void need(std::size_t n) {
    if (pos_ + n > size_)
      fail(ErrorKind::CorruptCheckpoint, "truncated checkpoint " + path_);
  }
  const unsigned char* data_;
  std::size_t size_, pos_ = 0;
  std::string path_;
};

template <typename T>
void put_tensor(std::vector<unsigned char>& out, const T& tensor) {
  for (Eigen::Index i = 0; i < tensor.size(); ++i) put_f64(out, tensor.data()[i]);
}

template <typename T>
void read_tensor(Reader& r, T& tensor) {
  for (Eigen::Index i = 0; i < tensor.size(); ++i) tensor.data()[i] = r.f64();
}

inline void put_config(std::vector<unsigned char>& out, const ModelConfig& c) {
  put_u32(out, static_cast<std::uint32_t>(c.patch_frames));
  put_u32(out, static_cast<std::uint32_t>(c.n_mels));
  put_u32(out, static_cast<std::uint32_t>(c.conv1_channels));
  put_u32(out, static_cast<std::uint32_t>(c.conv2_channels));
  put_u32(out, static_cast<std::uint32_t>(c.embed_dim));
  put_u32(out, static_cast<std::uint32_t>(c.hidden_dim));
  put_u32(out, static_cast<std::uint32_t>(c.n_languages));
  put_u32(out, c.language_head ? 1u : 0u);
  put_f64(out, c.lambda_rev);
  put_f64(out, c.w_lang);
}

inline ModelConfig read_config(Reader& r) {
  ModelConfig c;
  c.patch_frames = static_cast<int>(r.u32());
  c.n_mels = static_cast<int>(r.u32());
  c.conv1_channels = static_cast<int>(r.u32());
  c.conv2_channels = static_cast<int>(r.u32());
  c.embed_dim = static_cast<int>(r.u32());
  c.hidden_dim = static_cast<int>(r.u32());
  c.n_languages = static_cast<int>(r.u32());
  c.language_head = r.u32() != 0;
  c.lambda_rev = r.f64();
  c.w_lang = r.f64();
  return c;
}

inline std::vector<unsigned char> slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::IoFailure, "cannot open checkpoint " + path);
  return std::vector<unsigned char>((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
}

inline void spill(const std::string& path, const std::vector<unsigned char>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::IoFailure, "cannot write checkpoint " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(ErrorKind::IoFailure, "short write to " + path);
}

}  // namespace ckpt_detail

inline void save_checkpoint(const std::string& path, const ModelParams& params,
                            const AdamState& adam) {
  using namespace ckpt_detail;
  std::vector<unsigned char> out;
  out.insert(out.end(), {'L', 'T', 'R', 'K'});
  put_u32(out, kCheckpointVersion);
  put_u32(out, static_cast<std::uint32_t>(ModelKind::sequential));
  put_config(out, params.config);
  put_u64(out, static_cast<std::uint64_t>(adam.step));
#define LONGTRACK_PUT(member) put_tensor(out, params.tensors.member);
  LONGTRACK_MODEL_TENSOR_LIST(LONGTRACK_PUT)
#undef LONGTRACK_PUT
#define LONGTRACK_PUT(member) put_tensor(out, adam.m.member);
  LONGTRACK_MODEL_TENSOR_LIST(LONGTRACK_PUT)
#undef LONGTRACK_PUT
#define LONGTRACK_PUT(member) put_tensor(out, adam.v.member);
  LONGTRACK_MODEL_TENSOR_LIST(LONGTRACK_PUT)
#undef LONGTRACK_PUT
  spill(path, out);
}

inline void save_checkpoint(const std::string& path, const BaselineParams& params,
                            const BaselineAdamState& adam) {
  using namespace ckpt_detail;
  std::vector<unsigned char> out;
  out.insert(out.end(), {'L', 'T', 'R', 'K'});
  put_u32(out, kCheckpointVersion);
  put_u32(out, static_cast<std::uint32_t>(params.kind));
  put_config(out, params.config);
  put_u64(out, static_cast<std::uint64_t>(adam.step));
#define LONGTRACK_PUT(member) put_tensor(out, params.tensors.member);
  LONGTRACK_BASELINE_TENSOR_LIST(LONGTRACK_PUT)
#undef LONGTRACK_PUT
#define LONGTRACK_PUT(member) put_tensor(out, adam.m.member);
  LONGTRACK_BASELINE_TENSOR_LIST(LONGTRACK_PUT)
#undef LONGTRACK_PUT
#define LONGTRACK_PUT(member) put_tensor(out, adam.v.member);
  LONGTRACK_BASELINE_TENSOR_LIST(LONGTRACK_PUT)
#undef LONGTRACK_PUT
  spill(path, out);
}

namespace ckpt_detail {

inline Reader open_checkpoint(const std::vector<unsigned char>& bytes, const std::string& path,
                              ModelKind* kind_out, ModelConfig* config_out) {
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "LTRK", 4) != 0)
    fail(ErrorKind::CorruptCheckpoint, "bad magic in " + path);
  Reader r(bytes.data(), bytes.size(), path);
  std::uint32_t magic_skip[1];
  r.bytes(magic_skip, 4);
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion)
    fail(ErrorKind::CorruptCheckpoint, "unsupported checkpoint version in " + path);
  const std::uint32_t kind = r.u32();
  if (kind > 2) fail(ErrorKind::CorruptCheckpoint, "bad model kind in " + path);
  *kind_out = static_cast<ModelKind>(kind);
  *config_out = read_config(r);
  try {
    config_out->validate();
  } catch (const Error&) {
    fail(ErrorKind::CorruptCheckpoint, "bad dimensions header in " + path);
  }
  return r;
}

}  // namespace ckpt_detail

inline ModelKind peek_checkpoint_kind(const std::string& path) {
  const auto bytes = ckpt_detail::slurp(path);
  ModelKind kind;
  ModelConfig config;
  ckpt_detail::open_checkpoint(bytes, path, &kind, &config);
  return kind;
}

struct SequentialCheckpoint {
  ModelParams params;
  AdamState adam;
};

struct BaselineCheckpoint {
  BaselineParams params;
  BaselineAdamState adam;
};

// Loads a sequential-model checkpoint. When `expected` is given, a dimension
// mismatch is a CorruptCheckpoint error.
inline SequentialCheckpoint load_checkpoint(const std::string& path,
                                            const std::optional<ModelConfig>& expected = {}) {
  using namespace ckpt_detail;
  const auto bytes = slurp(path);
  ModelKind kind;
  ModelConfig config;
  Reader r = open_checkpoint(bytes, path, &kind, &config);
  if (kind != ModelKind::sequential)
    fail(ErrorKind::CorruptCheckpoint, "expected a sequential checkpoint: " + path);
  if (expected && !expected->same_shape(config))
    fail(ErrorKind::CorruptCheckpoint, "dimension mismatch vs expected config in " + path);
  SequentialCheckpoint out{{config, make_zero_tensors(config)}, make_adam_state(config)};
  out.adam.step = static_cast<std::int64_t>(r.u64());
#define LONGTRACK_GET(member) read_tensor(r, out.params.tensors.member);
  LONGTRACK_MODEL_TENSOR_LIST(LONGTRACK_GET)
#undef LONGTRACK_GET
#define LONGTRACK_GET(member) read_tensor(r, out.adam.m.member);
  LONGTRACK_MODEL_TENSOR_LIST(LONGTRACK_GET)
#undef LONGTRACK_GET
#define LONGTRACK_GET(member) read_tensor(r, out.adam.v.member);
  LONGTRACK_MODEL_TENSOR_LIST(LONGTRACK_GET)
#undef LONGTRACK_GET
  if (!r.at_end()) fail(ErrorKind::CorruptCheckpoint, "trailing bytes in " + path);
  return out;
}

inline BaselineCheckpoint load_baseline_checkpoint(const std::string& path,
                                                   const std::optional<ModelConfig>& expected = {}) {
  using namespace ckpt_detail;
  const auto bytes = slurp(path);
  ModelKind kind;
  ModelConfig config;
  Reader r = open_checkpoint(bytes, path, &kind, &config);
  if (kind == ModelKind::sequential)
    fail(ErrorKind::CorruptCheckpoint, "expected a baseline checkpoint: " + path);
  if (expected && !expected->same_shape(config))
    fail(ErrorKind::CorruptCheckpoint, "dimension mismatch vs expected config in " + path);
  BaselineCheckpoint out{{config, kind, make_zero_baseline_tensors(config)},
                         make_baseline_adam_state(config)};
  out.adam.step = static_cast<std::int64_t>(r.u64());
#define LONGTRACK_GET(member) read_tensor(r, out.params.tensors.member);
  LONGTRACK_BASELINE_TENSOR_LIST(LONGTRACK_GET)
#undef LONGTRACK_GET
#define LONGTRACK_GET(member) read_tensor(r, out.adam.m.member);
  LONGTRACK_BASELINE_TENSOR_LIST(LONGTRACK_GET)
#undef LONGTRACK_GET
#define LONGTRACK_GET(member) read_tensor(r, out.adam.v.member);
  LONGTRACK_BASELINE_TENSOR_LIST(LONGTRACK_GET)
#undef LONGTRACK_GET
  if (!r.at_end()) fail(ErrorKind::CorruptCheckpoint, "trailing bytes in " + path);
  return out;
}

}  // namespace longtrack

#endif  // LONGTRACK_CHECKPOINT_HPP

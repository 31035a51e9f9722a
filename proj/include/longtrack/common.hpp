// SPDX-License-Identifier: Apache-2.0
#ifndef LONGTRACK_COMMON_HPP
#define LONGTRACK_COMMON_HPP

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

namespace longtrack {

enum class ErrorKind {
  MalformedWav,
  UnsupportedEncoding,
  EmptyAfterTrim,
  DegenerateSignal,
  TooShort,
  ManifestParse,
  MissingAudio,
  InsufficientParticipants,
  DimensionMismatch,
  TraceMismatch,
  CorruptCheckpoint,
  EmptyPartition,
  SingleClass,
  ConstantInput,
  RankDeficient,
  WindowEmpty,
  NoHistory,
  TooFewSamples,
  IoFailure,
  ConfigError,
  Internal,
};

inline const char* error_kind_name(ErrorKind k) {
  switch (k) {
    case ErrorKind::MalformedWav: return "MalformedWav";
    case ErrorKind::UnsupportedEncoding: return "UnsupportedEncoding";
    case ErrorKind::EmptyAfterTrim: return "EmptyAfterTrim";
    case ErrorKind::DegenerateSignal: return "DegenerateSignal";
    case ErrorKind::TooShort: return "TooShort";
    case ErrorKind::ManifestParse: return "ManifestParse";
    case ErrorKind::MissingAudio: return "MissingAudio";
    case ErrorKind::InsufficientParticipants: return "InsufficientParticipants";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::TraceMismatch: return "TraceMismatch";
    case ErrorKind::CorruptCheckpoint: return "CorruptCheckpoint";
    case ErrorKind::EmptyPartition: return "EmptyPartition";
    case ErrorKind::SingleClass: return "SingleClass";
    case ErrorKind::ConstantInput: return "ConstantInput";
    case ErrorKind::RankDeficient: return "RankDeficient";
    case ErrorKind::WindowEmpty: return "WindowEmpty";
    case ErrorKind::NoHistory: return "NoHistory";
    case ErrorKind::TooFewSamples: return "TooFewSamples";
    case ErrorKind::IoFailure: return "IoFailure";
    case ErrorKind::ConfigError: return "ConfigError";
    case ErrorKind::Internal: return "Internal";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(error_kind_name(kind)) + ": " + message), kind_(kind) {}
  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

// Internal invariant check; failures map to the CLI's "internal" exit code.
#define LT_REQUIRE(cond, message)                                  \
  do {                                                             \
    if (!(cond)) ::longtrack::fail(::longtrack::ErrorKind::Internal, (message)); \
  } while (0)

// splitmix64, used to derive independent seed streams.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Deterministic RNG wrapper. All value transforms are explicit so streams are
// reproducible across standard library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed ? seed : 0x6a09e667f3bcc909ULL) {
    // warm up past short seed correlations
    for (int i = 0; i < 4; ++i) next_u64();
  }

  std::uint64_t next_u64() {
    // xorshift* over splitmix-initialized state via mt19937_64 would also do;
    // keep a single well-known generator: splitmix64 sequence.
    state_ += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // uniform in [0, 1)
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // standard normal via Box-Muller (cached second value)
  double gauss() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    double u2 = uniform();
    if (u1 < 1e-300) u1 = 1e-300;
    double mag = std::sqrt(-2.0 * std::log(u1));
    spare_ = mag * std::sin(2.0 * M_PI * u2);
    have_spare_ = true;
    return mag * std::cos(2.0 * M_PI * u2);
  }

  // integer in [0, n)
  std::size_t bounded(std::size_t n) {
    LT_REQUIRE(n > 0, "Rng::bounded needs n > 0");
    return static_cast<std::size_t>(next_u64() % n);
  }

  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::size_t j = bounded(i);
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  std::uint64_t state_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

// Runs fn(i) for i in [0, n) over a fixed block partition. Results must not
// depend on scheduling: callers write to disjoint, index-addressed slots.
template <typename Fn>
void parallel_for(std::size_t n, int threads, Fn&& fn) {
  if (n == 0) return;
  unsigned hw = std::thread::hardware_concurrency();
  std::size_t t = threads > 0 ? static_cast<std::size_t>(threads) : (hw ? hw : 1);
  if (t > n) t = n;
  if (t <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(t);
  std::vector<std::exception_ptr> errors(t);
  for (std::size_t w = 0; w < t; ++w) {
    pool.emplace_back([&, w] {
      std::size_t lo = n * w / t;
      std::size_t hi = n * (w + 1) / t;
      try {
        for (std::size_t i = lo; i < hi; ++i) fn(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

inline double db_to_amplitude(double db) { return std::pow(10.0, db / 20.0); }

inline double amplitude_to_db(double amp) {
  return amp > 0.0 ? 20.0 * std::log10(amp) : -std::numeric_limits<double>::infinity();
}

}  // namespace longtrack

#endif  // LONGTRACK_COMMON_HPP

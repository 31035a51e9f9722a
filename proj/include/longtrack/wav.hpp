// SPDX-License-Identifier: Apache-2.0
#ifndef LONGTRACK_WAV_HPP
#define LONGTRACK_WAV_HPP

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "longtrack/audio.hpp"
#include "longtrack/common.hpp"

namespace longtrack {

namespace wav_detail {

inline std::uint32_t read_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

inline std::uint16_t read_u16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

inline void put_u32(std::vector<unsigned char>& out, std::uint32_t v) {
  out.push_back(v & 0xff);
  out.push_back((v >> 8) & 0xff);
  out.push_back((v >> 16) & 0xff);
  out.push_back((v >> 24) & 0xff);
}

inline void put_u16(std::vector<unsigned char>& out, std::uint16_t v) {
  out.push_back(v & 0xff);
  out.push_back((v >> 8) & 0xff);
}

}  // namespace wav_detail

// Reads a RIFF WAV file: PCM 8/16/24-bit or IEEE float32. Channels are kept
// separate for to_mono.
inline MultiChannelClip load_wav(const std::string& path) {
  using namespace wav_detail;
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::MissingAudio, "cannot open " + path);
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  if (bytes.size() < 44 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0)
    fail(ErrorKind::MalformedWav, "bad RIFF header in " + path);

  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t sample_rate = 0;
  bool have_fmt = false;
  std::size_t data_off = 0, data_len = 0;
  bool have_data = false;

  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const unsigned char* p = bytes.data() + pos;
    std::uint32_t chunk_len = read_u32(p + 4);
    const std::size_t body = pos + 8;
    if (std::memcmp(p, "fmt ", 4) == 0) {
      if (chunk_len < 16 || body + 16 > bytes.size())
        fail(ErrorKind::MalformedWav, "truncated fmt chunk in " + path);
      format = read_u16(bytes.data() + body);
      channels = read_u16(bytes.data() + body + 2);
      sample_rate = read_u32(bytes.data() + body + 4);
      bits = read_u16(bytes.data() + body + 14);
      have_fmt = true;
    } else if (std::memcmp(p, "data", 4) == 0) {
      data_off = body;
      data_len = chunk_len;
      have_data = true;
    }
    pos = body + chunk_len + (chunk_len & 1);  // chunks are word-aligned
  }

  if (!have_fmt || !have_data) fail(ErrorKind::MalformedWav, "missing fmt/data chunk in " + path);
  if (channels == 0 || sample_rate == 0) fail(ErrorKind::MalformedWav, "bad fmt fields in " + path);
  if (data_off + data_len > bytes.size())
    fail(ErrorKind::MalformedWav, "truncated data chunk in " + path);

  bool float_fmt;
  if (format == 1 && (bits == 8 || bits == 16 || bits == 24)) {
    float_fmt = false;
  } else if (format == 3 && bits == 32) {
    float_fmt = true;
  } else {
    fail(ErrorKind::UnsupportedEncoding,
         "format " + std::to_string(format) + "/" + std::to_string(bits) + " bits in " + path);
  }

  const std::size_t bytes_per_sample = bits / 8;
  const std::size_t frame_size = bytes_per_sample * channels;
  const std::size_t n_frames = data_len / frame_size;
  if (n_frames == 0) fail(ErrorKind::MalformedWav, "empty data chunk in " + path);

  MultiChannelClip clip;
  clip.sample_rate = static_cast<int>(sample_rate);
  clip.channels.assign(channels, std::vector<double>(n_frames));
  const unsigned char* d = bytes.data() + data_off;
  for (std::size_t f = 0; f < n_frames; ++f) {
    for (std::uint16_t c = 0; c < channels; ++c) {
      const unsigned char* s = d + f * frame_size + c * bytes_per_sample;
      double v;
      if (float_fmt) {
        float fv;
        std::memcpy(&fv, s, 4);
        v = std::clamp(static_cast<double>(fv), -1.0, 1.0);
      } else if (bits == 8) {
        v = (static_cast<int>(s[0]) - 128) / 128.0;
      } else if (bits == 16) {
        std::int16_t iv = static_cast<std::int16_t>(s[0] | (s[1] << 8));
        v = iv / 32768.0;
      } else {  // 24
        std::int32_t iv = s[0] | (s[1] << 8) | (s[2] << 16);
        if (iv & 0x800000) iv |= ~0xFFFFFF;  // sign extend
        v = iv / 8388608.0;
      }
      clip.channels[c][f] = v;
    }
  }
  return clip;
}

// Writes mono 16-bit PCM. Samples are clamped to [-1, 1] and quantized with
// round-half-away-from-zero, so a load_wav round trip stays within one
// quantization step (1/32768).
inline void write_wav(const std::string& path, const AudioClip& clip) {
  using namespace wav_detail;
  LT_REQUIRE(!clip.samples.empty(), "write_wav: empty clip");
  std::vector<unsigned char> out;
  out.reserve(44 + clip.samples.size() * 2);
  const std::uint32_t data_len = static_cast<std::uint32_t>(clip.samples.size() * 2);
  out.insert(out.end(), {'R', 'I', 'F', 'F'});
  put_u32(out, 36 + data_len);
  out.insert(out.end(), {'W', 'A', 'V', 'E'});
  out.insert(out.end(), {'f', 'm', 't', ' '});
  put_u32(out, 16);
  put_u16(out, 1);  // PCM
  put_u16(out, 1);  // mono
  put_u32(out, static_cast<std::uint32_t>(clip.sample_rate));
  put_u32(out, static_cast<std::uint32_t>(clip.sample_rate) * 2);
  put_u16(out, 2);
  put_u16(out, 16);
  out.insert(out.end(), {'d', 'a', 't', 'a'});
  put_u32(out, data_len);
  for (double s : clip.samples) {
    long q = std::lround(std::clamp(s, -1.0, 1.0) * 32768.0);
    q = std::clamp(q, -32768L, 32767L);
    put_u16(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(q)));
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) fail(ErrorKind::IoFailure, "cannot write " + path);
  f.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
  if (!f) fail(ErrorKind::IoFailure, "short write to " + path);
}

}  // namespace longtrack

#endif  // LONGTRACK_WAV_HPP

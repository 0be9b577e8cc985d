// Copyright 2026 The hrtfdiff Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "hrtfdiff/wav.h"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>

#include "hrtfdiff/common.h"

namespace hrtfdiff {

namespace {

std::uint32_t ReadU32(const std::vector<char>& b, std::size_t pos) {
  std::uint32_t v;
  std::memcpy(&v, b.data() + pos, 4);
  return v;
}

std::uint16_t ReadU16(const std::vector<char>& b, std::size_t pos) {
  std::uint16_t v;
  std::memcpy(&v, b.data() + pos, 2);
  return v;
}

template <typename T>
void Put(std::ofstream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

}  // namespace

WavData ReadWav(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("io_error", "cannot open WAV file: " + path);
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)),
                          std::istreambuf_iterator<char>());
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    throw Error("bad_wav", "not a RIFF/WAVE file: " + path);
  }
  std::size_t pos = 12;
  int format = 0, num_channels = 0, bits = 0, sample_rate = 0;
  const char* data = nullptr;
  std::size_t data_size = 0;
  while (pos + 8 <= bytes.size()) {
    const std::uint32_t chunk_size = ReadU32(bytes, pos + 4);
    const std::size_t body = pos + 8;
    if (body + chunk_size > bytes.size()) break;
    if (std::memcmp(bytes.data() + pos, "fmt ", 4) == 0) {
      format = ReadU16(bytes, body);
      num_channels = ReadU16(bytes, body + 2);
      sample_rate = static_cast<int>(ReadU32(bytes, body + 4));
      bits = ReadU16(bytes, body + 14);
      if (format == 0xFFFE && chunk_size >= 26) format = ReadU16(bytes, body + 24);
    } else if (std::memcmp(bytes.data() + pos, "data", 4) == 0) {
      data = bytes.data() + body;
      data_size = chunk_size;
    }
    pos = body + chunk_size + (chunk_size & 1);
  }
  if (num_channels <= 0 || data == nullptr) {
    throw Error("bad_wav", "WAV file lacks fmt or data chunk: " + path);
  }
  const int bytes_per_sample = bits / 8;
  const std::size_t frames = data_size / (bytes_per_sample * num_channels);
  WavData wav;
  wav.sample_rate = sample_rate;
  wav.channels.assign(num_channels, std::vector<double>(frames));
  for (std::size_t n = 0; n < frames; ++n) {
    for (int c = 0; c < num_channels; ++c) {
      const char* p = data + (n * num_channels + c) * bytes_per_sample;
      double v = 0.0;
      if (format == 3 && bits == 32) {
        float f;
        std::memcpy(&f, p, 4);
        v = f;
      } else if (format == 3 && bits == 64) {
        std::memcpy(&v, p, 8);
      } else if (format == 1 && bits == 16) {
        std::int16_t s;
        std::memcpy(&s, p, 2);
        v = s / 32768.0;
      } else if (format == 1 && bits == 24) {
        std::int32_t s = (static_cast<unsigned char>(p[0])) |
                         (static_cast<unsigned char>(p[1]) << 8) |
                         (static_cast<signed char>(p[2]) * 65536);
        v = s / 8388608.0;
      } else if (format == 1 && bits == 32) {
        std::int32_t s;
        std::memcpy(&s, p, 4);
        v = s / 2147483648.0;
      } else {
        throw Error("bad_wav", "unsupported WAV sample format in " + path);
      }
      wav.channels[c][n] = v;
    }
  }
  return wav;
}

void WriteWav(const std::string& path, const WavData& data) {
  if (data.channels.empty()) throw Error("bad_wav", "no channels to write");
  const std::size_t frames = data.channels[0].size();
  for (const auto& ch : data.channels) {
    if (ch.size() != frames) throw Error("bad_wav", "ragged channels");
  }
  const std::uint16_t num_channels = static_cast<std::uint16_t>(data.channels.size());
  const std::uint32_t data_bytes =
      static_cast<std::uint32_t>(frames * num_channels * 4);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("io_error", "cannot write WAV file: " + path);
  out.write("RIFF", 4);
  Put<std::uint32_t>(out, 36 + data_bytes);
  out.write("WAVE", 4);
  out.write("fmt ", 4);
  Put<std::uint32_t>(out, 16);
  Put<std::uint16_t>(out, 3);
  Put<std::uint16_t>(out, num_channels);
  Put<std::uint32_t>(out, static_cast<std::uint32_t>(data.sample_rate));
  Put<std::uint32_t>(out, static_cast<std::uint32_t>(data.sample_rate) * num_channels * 4);
  Put<std::uint16_t>(out, static_cast<std::uint16_t>(num_channels * 4));
  Put<std::uint16_t>(out, 32);
  out.write("data", 4);
  Put<std::uint32_t>(out, data_bytes);
  for (std::size_t n = 0; n < frames; ++n) {
    for (const auto& ch : data.channels) Put<float>(out, static_cast<float>(ch[n]));
  }
  if (!out) throw Error("io_error", "failed writing WAV file: " + path);
}

}  // namespace hrtfdiff

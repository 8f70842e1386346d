// Copyright 2026 The EGRM Authors. All Rights Reserved.
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

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "egrm/model.h"

namespace egrm {

namespace {

constexpr char kMagic[4] = {'E', 'G', 'R', 'M'};
constexpr std::uint32_t kFormatVersion = 1;
// magic + version + cell u8 + enc u32 + dec u32 + residual u8 + embed u32 +
// hidden u32 + attention u8 + vocab u32
constexpr std::size_t kHeaderBytes = 4 + 4 + 1 + 4 + 4 + 1 + 4 + 4 + 1 + 4;

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::uint8_t u8() {
    need(1);
    return bytes_[pos_++];
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t{bytes_[pos_++]} << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t{bytes_[pos_++]} << (8 * i);
    return v;
  }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > bytes_.size()) throw Error("parameter file truncated");
  }
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> serialize_params(const Parameters& params) {
  const ModelConfig& c = params.config();
  std::vector<std::uint8_t> out;
  out.reserve(kHeaderBytes + params.size() * 8);
  out.insert(out.end(), std::begin(kMagic), std::end(kMagic));
  put_u32(out, kFormatVersion);
  out.push_back(static_cast<std::uint8_t>(c.cell));
  put_u32(out, c.encoder_layers);
  put_u32(out, c.decoder_layers);
  out.push_back(c.residual ? 1 : 0);
  put_u32(out, c.embed_dim);
  put_u32(out, c.hidden_dim);
  out.push_back(static_cast<std::uint8_t>(c.attention));
  put_u32(out, c.vocab_size);
  for (double v : params.values()) put_u64(out, std::bit_cast<std::uint64_t>(v));
  return out;
}

Parameters deserialize_params(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0)
    throw Error("not a parameter file (bad magic bytes)");
  Reader r(bytes.subspan(4));
  const std::uint32_t version = r.u32();
  if (version != kFormatVersion)
    throw Error("unsupported parameter file version " + std::to_string(version));
  ModelConfig c;
  const std::uint8_t cell = r.u8();
  c.encoder_layers = r.u32();
  c.decoder_layers = r.u32();
  const std::uint8_t residual = r.u8();
  c.embed_dim = r.u32();
  c.hidden_dim = r.u32();
  const std::uint8_t attention = r.u8();
  c.vocab_size = r.u32();
  if (cell > 1 || attention > 1 || residual > 1)
    throw Error("parameter file header has invalid enum values");
  c.cell = static_cast<CellType>(cell);
  c.attention = static_cast<AttentionKind>(attention);
  c.residual = residual != 0;
  c.validate();

  Parameters params(c);
  if (r.remaining() != params.size() * 8)
    throw Error("parameter payload has " + std::to_string(r.remaining()) +
                " bytes; header dimensions require " +
                std::to_string(params.size() * 8));
  for (double& v : params.values()) v = std::bit_cast<double>(r.u64());
  return params;
}

void save_params(const Parameters& params, const std::string& path) {
  const auto bytes = serialize_params(params);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("failed writing " + path);
}

Parameters load_params(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  try {
    return deserialize_params(bytes);
  } catch (const Error& e) {
    throw Error(path + ": " + e.what());
  }
}

std::string params_tag(const Parameters& params) {
  std::uint64_t h = 1469598103934665603ULL;
  for (std::uint8_t b : serialize_params(params)) {
    h ^= b;
    h *= 1099511628211ULL;
  }
  static const char* digits = "0123456789abcdef";
  std::string tag(16, '0');
  for (int i = 15; i >= 0; --i, h >>= 4) tag[i] = digits[h & 0xF];
  return tag;
}

}  // namespace egrm

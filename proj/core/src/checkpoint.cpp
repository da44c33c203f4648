// Copyright 2026 The PackSense Authors. All rights reserved.
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

#include "packsense/checkpoint.hpp"

#include <bit>
#include <cstring>

namespace packsense::checkpoint {

namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

class Writer {
 public:
  void raw(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    out_.insert(out_.end(), b, b + n);
  }
  void u32(std::uint32_t v) { raw(&v, 4); }
  void u64(std::uint64_t v) { raw(&v, 8); }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    raw(s.data(), s.size());
  }
  void tensor(const std::string& name, const encoder::Mat<float>& m) {
    str(name);
    u32(2);
    u64(static_cast<std::uint64_t>(m.rows()));
    u64(static_cast<std::uint64_t>(m.cols()));
    const Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm = m;
    raw(rm.data(), static_cast<std::size_t>(rm.size()) * sizeof(float));
  }
  Bytes take() { return std::move(out_); }

 private:
  Bytes out_;
};

class Reader {
 public:
  explicit Reader(ByteView b) : b_(b) {}
  void raw(void* p, std::size_t n) {
    if (n > b_.size() - pos_) throw Error(ErrorKind::CorruptMetadata, "checkpoint truncated");
    std::memcpy(p, b_.data() + pos_, n);
    pos_ += n;
  }
  std::uint32_t u32() {
    std::uint32_t v;
    raw(&v, 4);
    return v;
  }
  std::uint64_t u64() {
    std::uint64_t v;
    raw(&v, 8);
    return v;
  }
  std::string str() {
    const auto n = u32();
    if (n > b_.size() - pos_) throw Error(ErrorKind::CorruptMetadata, "checkpoint string too long");
    std::string s(n, '\0');
    raw(s.data(), n);
    return s;
  }
  encoder::Mat<float> tensor_body() {
    if (u32() != 2) throw Error(ErrorKind::CorruptMetadata, "only rank-2 tensors are supported");
    const auto rows = u64(), cols = u64();
    if (rows != 0 && cols > (b_.size() - pos_) / sizeof(float) / rows) {
      throw Error(ErrorKind::CorruptMetadata, "tensor larger than checkpoint");
    }
    Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm(static_cast<Eigen::Index>(rows),
                                                                              static_cast<Eigen::Index>(cols));
    raw(rm.data(), rows * cols * sizeof(float));
    return rm;
  }
  bool done() const { return pos_ == b_.size(); }

 private:
  ByteView b_;
  std::size_t pos_ = 0;
};

}  // namespace

Bytes serialize(const Checkpoint& ckpt) {
  Writer w;
  w.raw(kMagic, 4);
  w.u32(kVersion);
  auto meta = ckpt.config.to_json();
  meta["head_trained"] = ckpt.params.head_trained;
  w.str(meta.dump());
  w.str(ckpt.vocab_hash);
  std::uint32_t count = static_cast<std::uint32_t>(ckpt.extra.size());
  ckpt.params.visit([&](const std::string&, const encoder::Mat<float>&) { ++count; });
  w.u32(count);
  ckpt.params.visit([&](const std::string& name, const encoder::Mat<float>& m) { w.tensor(name, m); });
  for (const auto& [name, m] : ckpt.extra) w.tensor(name, m);
  return w.take();
}

Checkpoint deserialize(ByteView bytes, const std::string& expected_vocab_hash) {
  Reader r(bytes);
  char magic[4];
  r.raw(magic, 4);
  if (std::memcmp(magic, kMagic, 4) != 0) throw Error(ErrorKind::CorruptMetadata, "not a checkpoint (bad magic)");
  if (const auto v = r.u32(); v != kVersion) {
    throw Error(ErrorKind::CorruptMetadata, "unsupported checkpoint version " + std::to_string(v));
  }
  Checkpoint ck;
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(r.str());
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::CorruptMetadata, e.what());
  }
  ck.config = encoder::ModelConfig::from_json(meta);
  ck.vocab_hash = r.str();
  if (!expected_vocab_hash.empty() && ck.vocab_hash != expected_vocab_hash) {
    throw Error(ErrorKind::CheckpointMismatch, "vocabulary hash differs from the running vocabulary");
  }
  ck.params = encoder::zero_params<float>(ck.config);
  ck.params.head_trained = meta.value("head_trained", false);
  std::map<std::string, encoder::Mat<float>*> slots;
  ck.params.visit([&](const std::string& name, encoder::Mat<float>& m) { slots[name] = &m; });
  const auto count = r.u32();
  std::size_t filled = 0;
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto name = r.str();
    auto m = r.tensor_body();
    auto it = slots.find(name);
    if (it == slots.end()) {
      ck.extra[name] = std::move(m);
      continue;
    }
    if (m.rows() != it->second->rows() || m.cols() != it->second->cols()) {
      throw Error(ErrorKind::CorruptMetadata, "tensor '" + name + "' has the wrong shape");
    }
    *it->second = std::move(m);
    ++filled;
  }
  if (filled != slots.size()) throw Error(ErrorKind::CorruptMetadata, "checkpoint is missing model tensors");
  if (!r.done()) throw Error(ErrorKind::CorruptMetadata, "trailing bytes after checkpoint");
  return ck;
}

void save(const std::string& path, const Checkpoint& ckpt) { write_file(path, serialize(ckpt)); }

Checkpoint load(const std::string& path, const std::string& expected_vocab_hash) {
  const auto bytes = read_file(path);
  return deserialize(bytes, expected_vocab_hash);
}

std::string hash(const Checkpoint& ckpt) { return to_hex(sha256(serialize(ckpt))); }

}  // namespace packsense::checkpoint

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

#include "packsense/lowentropy.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace packsense::lowentropy {

namespace {

constexpr std::string_view kBase64 = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
constexpr std::string_view kBase32 = "ABCDEFGHIJKLMNOPQRSTUVWXYZ234567";

// Packs the input MSB-first into groups of `bits`, zero-filling the last group.
Bytes encode_groups(ByteView in, ByteView alphabet, int bits) {
  Bytes out;
  out.reserve((in.size() * 8 + bits - 1) / bits);
  std::uint32_t acc = 0;
  int have = 0;
  const std::uint32_t mask = (1u << bits) - 1;
  for (auto b : in) {
    acc = (acc << 8) | b;
    have += 8;
    while (have >= bits) {
      have -= bits;
      out.push_back(alphabet[(acc >> have) & mask]);
    }
  }
  if (have > 0) out.push_back(alphabet[(acc << (bits - have)) & mask]);
  return out;
}

Bytes decode_groups(ByteView in, ByteView alphabet, int bits, std::size_t original_length) {
  std::array<int, 256> rev;
  rev.fill(-1);
  for (std::size_t i = 0; i < alphabet.size(); ++i) rev[alphabet[i]] = static_cast<int>(i);
  if ((original_length * 8 + bits - 1) / bits != in.size()) {
    throw Error(ErrorKind::CorruptMetadata, "encoded length does not match original length");
  }
  Bytes out;
  out.reserve(original_length);
  std::uint32_t acc = 0;
  int have = 0;
  for (auto c : in) {
    const int v = rev[c];
    if (v < 0) throw Error(ErrorKind::CorruptMetadata, "symbol outside alphabet");
    acc = (acc << bits) | static_cast<std::uint32_t>(v);
    have += bits;
    if (have >= 8) {
      have -= 8;
      if (out.size() < original_length) out.push_back(static_cast<std::uint8_t>(acc >> have));
    }
  }
  return out;
}

Bytes alphabet_bytes(const TransformSpec& spec) {
  switch (spec.alphabet) {
    case Alphabet::Base64: return Bytes(kBase64.begin(), kBase64.end());
    case Alphabet::Base32: return Bytes(kBase32.begin(), kBase32.end());
    case Alphabet::Custom: return spec.custom_alphabet;
  }
  return {};
}

int alphabet_bits(Alphabet a) { return a == Alphabet::Base32 ? 5 : 6; }

// Block permutation restricted to a shorter tail: keep the entries < t in order.
std::vector<std::uint32_t> induced_permutation(const std::vector<std::uint32_t>& perm, std::size_t t) {
  std::vector<std::uint32_t> out;
  out.reserve(t);
  for (auto p : perm) {
    if (p < t) out.push_back(p);
  }
  return out;
}

template <typename Enum, std::size_t N>
Enum enum_from(std::string_view name, const std::array<std::string_view, N>& names, ErrorKind kind) {
  for (std::size_t i = 0; i < N; ++i) {
    if (names[i] == name) return static_cast<Enum>(i);
  }
  throw Error(kind, "unknown name '" + std::string(name) + "'");
}

constexpr std::array<std::string_view, 3> kGranularityNames = {"file", "section", "window"};
constexpr std::array<std::string_view, 5> kSchemeNames = {"BytePadding", "Encoding", "MonoSub", "Transposition",
                                                          "PolySub"};
constexpr std::array<std::string_view, 3> kPadNames = {"append", "prepend", "inject"};
constexpr std::array<std::string_view, 3> kAlphabetNames = {"base64", "base32", "custom"};

}  // namespace

std::array<std::uint64_t, 256> histogram(ByteView bytes) {
  std::array<std::uint64_t, 256> h{};
  for (auto b : bytes) ++h[b];
  return h;
}

double entropy_from_histogram(const std::array<std::uint64_t, 256>& h) {
  const std::uint64_t n = std::accumulate(h.begin(), h.end(), std::uint64_t{0});
  if (n == 0) throw Error(ErrorKind::EmptyInput, "entropy of an empty buffer");
  const double total = static_cast<double>(n);
  // Summing in count order makes the result depend only on the multiset of
  // counts, so relabelling byte values cannot change a single bit.
  auto counts = h;
  std::sort(counts.begin(), counts.end());
  double e = 0.0;
  for (auto c : counts) {
    if (c == 0) continue;
    const double p = static_cast<double>(c) / total;
    e -= p * std::log2(p);
  }
  return std::clamp(e + 0.0, 0.0, 8.0);
}

double shannon_entropy(ByteView bytes) {
  if (bytes.empty()) throw Error(ErrorKind::EmptyInput, "entropy of an empty buffer");
  return entropy_from_histogram(histogram(bytes));
}

std::string_view to_string(Granularity g) { return kGranularityNames[static_cast<std::size_t>(g)]; }
Granularity granularity_from_string(std::string_view name) {
  return enum_from<Granularity>(name, kGranularityNames, ErrorKind::InvalidSpec);
}
std::string_view to_string(Scheme s) { return kSchemeNames[static_cast<std::size_t>(s)]; }
Scheme scheme_from_string(std::string_view name) {
  return enum_from<Scheme>(name, kSchemeNames, ErrorKind::InvalidSpec);
}

EntropyProfile entropy_profile(const binimage::BinaryImage& image, Granularity granularity, std::size_t window_size,
                               std::size_t tail_floor) {
  if (window_size == 0) throw Error(ErrorKind::InvalidSpec, "window size must be positive");
  EntropyProfile p;
  p.granularity = granularity;
  p.window_size = window_size;
  const auto sections = binimage::iter_sections(image);
  for (const auto& s : sections) {
    if (!s.bytes.empty()) ++p.section_count;
  }
  switch (granularity) {
    case Granularity::File: {
      std::array<std::uint64_t, 256> h{};
      std::uint64_t n = 0;
      for (const auto& s : sections) {
        for (auto b : s.bytes) ++h[b];
        n += s.bytes.size();
      }
      if (n > 0) p.values.push_back({Extent{"", 0, image.total_size()}, entropy_from_histogram(h)});
      break;
    }
    case Granularity::Section:
      for (const auto& s : sections) {
        if (s.bytes.empty()) continue;
        p.values.push_back({Extent{s.name, s.file_offset, s.bytes.size()}, shannon_entropy(s.bytes)});
      }
      break;
    case Granularity::Window:
      for (const auto& s : sections) {
        for (std::size_t off = 0; off < s.bytes.size(); off += window_size) {
          const std::size_t len = std::min(window_size, s.bytes.size() - off);
          if (len < window_size && len < tail_floor) break;
          p.values.push_back({Extent{s.name, s.file_offset + off, len}, shannon_entropy(s.bytes.subspan(off, len))});
        }
      }
      break;
  }
  return p;
}

EntropyVerdict entropy_detect(const EntropyProfile& profile, const DetectOptions& options) {
  EntropyVerdict v;
  v.covered = !profile.values.empty();
  for (const auto& e : profile.values) {
    v.max_entropy = std::max(v.max_entropy, e.entropy);
    if (e.entropy >= options.threshold) v.evidence.push_back(e);
  }
  if (profile.granularity == Granularity::Section && options.section_fraction_rule) {
    const double denom = static_cast<double>(std::max<std::size_t>(profile.values.size(), 1));
    v.packed = static_cast<double>(v.evidence.size()) / denom > options.section_fraction;
  } else {
    v.packed = !v.evidence.empty();
  }
  return v;
}

void TransformSpec::validate() const {
  switch (scheme) {
    case Scheme::BytePadding:
      if (pad_position != PadPosition::Inject && inject_offset != 0) {
        throw Error(ErrorKind::InvalidSpec, "inject offset only applies to injected padding");
      }
      break;
    case Scheme::Encoding:
      if (alphabet == Alphabet::Custom) {
        if (custom_alphabet.size() != 64) throw Error(ErrorKind::InvalidSpec, "custom alphabet needs 64 symbols");
        std::array<bool, 256> seen{};
        for (auto c : custom_alphabet) {
          if (seen[c]) throw Error(ErrorKind::InvalidSpec, "custom alphabet symbols must be distinct");
          seen[c] = true;
        }
      }
      break;
    case Scheme::MonoSub: {
      std::array<bool, 256> seen{};
      for (auto c : substitution) {
        if (seen[c]) throw Error(ErrorKind::InvalidSpec, "substitution is not a bijection");
        seen[c] = true;
      }
      break;
    }
    case Scheme::Transposition: {
      if (block_size == 0 || permutation.size() != block_size) {
        throw Error(ErrorKind::InvalidSpec, "permutation length must equal block size");
      }
      std::vector<bool> seen(block_size, false);
      for (auto p : permutation) {
        if (p >= block_size || seen[p]) throw Error(ErrorKind::InvalidSpec, "block permutation is not a bijection");
        seen[p] = true;
      }
      break;
    }
    case Scheme::PolySub:
      if (key.empty()) throw Error(ErrorKind::InvalidSpec, "polyalphabetic key must be non-empty");
      break;
  }
}

TransformSpec make_padding(std::uint8_t pad_byte, std::size_t amount, PadPosition position, std::size_t inject_offset) {
  TransformSpec s;
  s.scheme = Scheme::BytePadding;
  s.pad_byte = pad_byte;
  s.pad_amount = amount;
  s.pad_position = position;
  s.inject_offset = inject_offset;
  return s;
}

TransformSpec make_encoding(Alphabet alphabet, std::uint64_t seed) {
  TransformSpec s;
  s.scheme = Scheme::Encoding;
  s.alphabet = alphabet;
  if (alphabet == Alphabet::Custom) {
    Rng rng(seed);
    Bytes all(256);
    std::iota(all.begin(), all.end(), 0);
    rng.shuffle(std::span<std::uint8_t>(all));
    s.custom_alphabet.assign(all.begin(), all.begin() + 64);
    s.seed = seed;
  }
  return s;
}

TransformSpec make_monosub(std::uint64_t seed) {
  TransformSpec s;
  s.scheme = Scheme::MonoSub;
  std::iota(s.substitution.begin(), s.substitution.end(), 0);
  Rng rng(seed);
  rng.shuffle(std::span<std::uint8_t>(s.substitution));
  s.seed = seed;
  return s;
}

TransformSpec make_transposition(std::uint64_t seed, std::size_t block_size) {
  TransformSpec s;
  s.scheme = Scheme::Transposition;
  s.block_size = block_size;
  s.permutation.resize(block_size);
  std::iota(s.permutation.begin(), s.permutation.end(), 0u);
  Rng rng(seed);
  rng.shuffle(std::span<std::uint32_t>(s.permutation));
  s.seed = seed;
  return s;
}

TransformSpec make_polysub(std::uint64_t seed, std::size_t key_length) {
  TransformSpec s;
  s.scheme = Scheme::PolySub;
  Rng rng(seed);
  s.key.resize(key_length);
  for (auto& k : s.key) k = rng.byte();
  s.seed = seed;
  return s;
}

nlohmann::json spec_to_json(const TransformSpec& spec) {
  nlohmann::json j;
  j["scheme"] = to_string(spec.scheme);
  if (spec.seed) j["seed"] = *spec.seed;
  switch (spec.scheme) {
    case Scheme::BytePadding:
      j["pad_byte"] = spec.pad_byte;
      j["pad_amount"] = spec.pad_amount;
      j["pad_position"] = kPadNames[static_cast<std::size_t>(spec.pad_position)];
      j["inject_offset"] = spec.inject_offset;
      break;
    case Scheme::Encoding:
      j["alphabet"] = kAlphabetNames[static_cast<std::size_t>(spec.alphabet)];
      if (spec.alphabet == Alphabet::Custom) j["custom_alphabet"] = spec.custom_alphabet;
      break;
    case Scheme::MonoSub:
      j["substitution"] = spec.substitution;
      break;
    case Scheme::Transposition:
      j["block_size"] = spec.block_size;
      j["permutation"] = spec.permutation;
      break;
    case Scheme::PolySub:
      j["key"] = spec.key;
      break;
  }
  return j;
}

TransformSpec spec_from_json(const nlohmann::json& j) {
  try {
    TransformSpec s;
    s.scheme = enum_from<Scheme>(j.at("scheme").get<std::string>(), kSchemeNames, ErrorKind::CorruptMetadata);
    if (j.contains("seed")) s.seed = j.at("seed").get<std::uint64_t>();
    switch (s.scheme) {
      case Scheme::BytePadding:
        s.pad_byte = j.at("pad_byte").get<std::uint8_t>();
        s.pad_amount = j.at("pad_amount").get<std::size_t>();
        s.pad_position = enum_from<PadPosition>(j.at("pad_position").get<std::string>(), kPadNames,
                                                ErrorKind::CorruptMetadata);
        s.inject_offset = j.at("inject_offset").get<std::size_t>();
        break;
      case Scheme::Encoding:
        s.alphabet = enum_from<Alphabet>(j.at("alphabet").get<std::string>(), kAlphabetNames,
                                         ErrorKind::CorruptMetadata);
        if (s.alphabet == Alphabet::Custom) s.custom_alphabet = j.at("custom_alphabet").get<Bytes>();
        break;
      case Scheme::MonoSub: {
        const auto v = j.at("substitution").get<std::vector<int>>();
        if (v.size() != 256) throw Error(ErrorKind::CorruptMetadata, "substitution must have 256 entries");
        for (std::size_t i = 0; i < 256; ++i) {
          if (v[i] < 0 || v[i] > 255) throw Error(ErrorKind::CorruptMetadata, "substitution entry out of range");
          s.substitution[i] = static_cast<std::uint8_t>(v[i]);
        }
        break;
      }
      case Scheme::Transposition:
        s.block_size = j.at("block_size").get<std::size_t>();
        s.permutation = j.at("permutation").get<std::vector<std::uint32_t>>();
        break;
      case Scheme::PolySub:
        s.key = j.at("key").get<Bytes>();
        break;
    }
    s.validate();
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::CorruptMetadata, e.what());
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::CorruptMetadata) throw;
    throw Error(ErrorKind::CorruptMetadata, e.what());
  }
}

TransformResult transform(ByteView input, const TransformSpec& spec) {
  spec.validate();
  TransformResult r;
  Bytes& out = r.output;
  switch (spec.scheme) {
    case Scheme::BytePadding: {
      std::size_t at = input.size();
      if (spec.pad_position == PadPosition::Prepend) at = 0;
      if (spec.pad_position == PadPosition::Inject) {
        if (spec.inject_offset > input.size()) throw Error(ErrorKind::InvalidSpec, "inject offset past end of input");
        at = spec.inject_offset;
      }
      out.reserve(input.size() + spec.pad_amount);
      out.insert(out.end(), input.begin(), input.begin() + static_cast<std::ptrdiff_t>(at));
      out.insert(out.end(), spec.pad_amount, spec.pad_byte);
      out.insert(out.end(), input.begin() + static_cast<std::ptrdiff_t>(at), input.end());
      break;
    }
    case Scheme::Encoding: {
      const Bytes alpha = alphabet_bytes(spec);
      out = encode_groups(input, alpha, alphabet_bits(spec.alphabet));
      break;
    }
    case Scheme::MonoSub:
      out.resize(input.size());
      for (std::size_t i = 0; i < input.size(); ++i) out[i] = spec.substitution[input[i]];
      break;
    case Scheme::Transposition: {
      out.resize(input.size());
      const std::size_t bs = spec.block_size;
      for (std::size_t base = 0; base < input.size(); base += bs) {
        const std::size_t len = std::min(bs, input.size() - base);
        const auto perm = len == bs ? spec.permutation : induced_permutation(spec.permutation, len);
        for (std::size_t i = 0; i < len; ++i) out[base + i] = input[base + perm[i]];
      }
      break;
    }
    case Scheme::PolySub:
      out.resize(input.size());
      for (std::size_t i = 0; i < input.size(); ++i) {
        out[i] = static_cast<std::uint8_t>(input[i] + spec.key[i % spec.key.size()]);
      }
      break;
  }
  r.metadata = {{"spec", spec_to_json(spec)}, {"original_length", input.size()}};
  return r;
}

Bytes invert_transform(ByteView output, const nlohmann::json& metadata) {
  TransformSpec spec;
  std::size_t n = 0;
  try {
    spec = spec_from_json(metadata.at("spec"));
    n = metadata.at("original_length").get<std::size_t>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::CorruptMetadata, e.what());
  }
  Bytes in;
  switch (spec.scheme) {
    case Scheme::BytePadding: {
      if (output.size() != n + spec.pad_amount) throw Error(ErrorKind::CorruptMetadata, "padded length mismatch");
      std::size_t at = n;
      if (spec.pad_position == PadPosition::Prepend) at = 0;
      if (spec.pad_position == PadPosition::Inject) at = spec.inject_offset;
      if (at > n) throw Error(ErrorKind::CorruptMetadata, "inject offset past end of input");
      for (std::size_t i = at; i < at + spec.pad_amount; ++i) {
        if (output[i] != spec.pad_byte) throw Error(ErrorKind::CorruptMetadata, "padding bytes do not match");
      }
      in.insert(in.end(), output.begin(), output.begin() + static_cast<std::ptrdiff_t>(at));
      in.insert(in.end(), output.begin() + static_cast<std::ptrdiff_t>(at + spec.pad_amount), output.end());
      break;
    }
    case Scheme::Encoding:
      in = decode_groups(output, alphabet_bytes(spec), alphabet_bits(spec.alphabet), n);
      break;
    case Scheme::MonoSub: {
      if (output.size() != n) throw Error(ErrorKind::CorruptMetadata, "length mismatch");
      std::array<std::uint8_t, 256> inv{};
      for (int v = 0; v < 256; ++v) inv[spec.substitution[static_cast<std::size_t>(v)]] = static_cast<std::uint8_t>(v);
      in.resize(n);
      for (std::size_t i = 0; i < n; ++i) in[i] = inv[output[i]];
      break;
    }
    case Scheme::Transposition: {
      if (output.size() != n) throw Error(ErrorKind::CorruptMetadata, "length mismatch");
      in.resize(n);
      const std::size_t bs = spec.block_size;
      for (std::size_t base = 0; base < n; base += bs) {
        const std::size_t len = std::min(bs, n - base);
        const auto perm = len == bs ? spec.permutation : induced_permutation(spec.permutation, len);
        for (std::size_t i = 0; i < len; ++i) in[base + perm[i]] = output[base + i];
      }
      break;
    }
    case Scheme::PolySub:
      if (output.size() != n) throw Error(ErrorKind::CorruptMetadata, "length mismatch");
      in.resize(n);
      for (std::size_t i = 0; i < n; ++i) in[i] = static_cast<std::uint8_t>(output[i] - spec.key[i % spec.key.size()]);
      break;
  }
  return in;
}

std::size_t padding_needed(ByteView input, std::uint8_t pad_byte, double target, std::size_t max_amount) {
  if (input.empty()) throw Error(ErrorKind::EmptyInput, "padding an empty buffer");
  auto h = histogram(input);
  // H = log2(N) - (1/N) * sum c*log2(c); only the pad byte's term changes.
  auto term = [](double c) { return c > 0 ? c * std::log2(c) : 0.0; };
  double rest = 0.0;
  for (int v = 0; v < 256; ++v) {
    if (v != pad_byte) rest += term(static_cast<double>(h[static_cast<std::size_t>(v)]));
  }
  const double base = static_cast<double>(input.size());
  const double c0 = static_cast<double>(h[pad_byte]);
  for (std::size_t k = 0; k <= max_amount; ++k) {
    const double n = base + static_cast<double>(k);
    const double e = std::log2(n) - (rest + term(c0 + static_cast<double>(k))) / n;
    if (e < target) {
      // Confirm with the exact histogram formula to guard against drift.
      auto hk = h;
      hk[pad_byte] += k;
      if (entropy_from_histogram(hk) < target) return k;
    }
  }
  throw Error(ErrorKind::InvalidSpec, "target entropy not reachable within the padding budget");
}

}  // namespace packsense::lowentropy

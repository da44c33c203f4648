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

#include "packsense/corpus.hpp"

#include <algorithm>
#include <array>
#include <filesystem>
#include <fstream>
#include <cstring>
#include <map>
#include <set>
#include <stdexcept>

#include "packsense/binimage.hpp"
#include "packsense/codegen.hpp"
#include "packsense/disasm.hpp"

namespace packsense::corpus {

namespace detail {
const std::vector<std::pair<std::string_view, ByteView>>& embedded_fixtures();
}

const std::vector<std::pair<std::string_view, ByteView>>& compiled_fixtures() { return detail::embedded_fixtures(); }

namespace {

template <typename E, std::size_t N>
E parse_enum(std::string_view s, const std::array<std::string_view, N>& names, const char* what) {
  for (std::size_t i = 0; i < N; ++i) {
    if (names[i] == s) return static_cast<E>(i);
  }
  throw Error(ErrorKind::InvalidRecipe, std::string("unknown ") + what + " '" + std::string(s) + "'");
}

constexpr std::array<std::string_view, 3> kRoleNames = {"Pretrain", "Finetune", "Test"};
constexpr std::array<std::string_view, 2> kProgramNames = {"NonPacked", "Packed"};
constexpr std::array<std::string_view, 2> kRealNames = {"CompiledFixture", "DecodeSubsetSampler"};
constexpr std::array<std::string_view, 3> kNativeNames = {"Strings", "Tables", "ZeroPad"};
constexpr std::array<std::string_view, 6> kPackedNames = {"RandomBytes", "MonoSub", "PolySub",
                                                          "Transposition", "Encoding", "Padding"};
constexpr std::array<std::string_view, 2> kContainerNames = {"Raw", "Pe"};

bool is_train(Role r) { return r != Role::Test; }

template <typename T>
const T& pick(Rng& rng, const std::vector<T>& v) {
  return v[rng.uniform(v.size())];
}

// ---------------------------------------------------------------------------
// Segment content

struct Placement {
  std::uint64_t va = 0;
  std::uint64_t image_lo = 0, image_hi = 0;  // valid virtual range of the file
  std::uint64_t data_lo = 0, data_hi = 0;    // a native-data segment, if any
};

// Instruction start offsets of each embedded fixture, computed once.
const std::vector<std::vector<std::size_t>>& fixture_starts() {
  static const auto starts = [] {
    std::vector<std::vector<std::size_t>> out;
    for (const auto& [name, bytes] : compiled_fixtures()) {
      std::vector<std::size_t> s;
      for (const auto& u : disasm::sweep_bytes(bytes, binimage::Bitness::x86_32)) {
        if (u.kind == disasm::UnitKind::Instruction) s.push_back(u.offset);
      }
      s.push_back(bytes.size());
      out.push_back(std::move(s));
    }
    return out;
  }();
  return starts;
}

// Consecutive instruction-aligned slices of the compiled fixtures; a slice
// never ends inside an instruction and the last few bytes are int3.
Bytes fixture_code(Rng& rng, std::size_t len) {
  const auto& fx = compiled_fixtures();
  const auto& starts = fixture_starts();
  Bytes out;
  out.reserve(len);
  while (out.size() < len) {
    const std::size_t f = rng.uniform(fx.size());
    const auto& s = starts[f];
    const auto bytes = fx[f].second;
    std::size_t i = rng.uniform(s.size() - 1);
    const std::size_t begin = s[i];
    std::size_t end = begin;
    while (i + 1 < s.size() && s[i + 1] - begin <= len - out.size()) end = s[++i];
    if (end == begin) break;
    out.insert(out.end(), bytes.begin() + static_cast<std::ptrdiff_t>(begin),
               bytes.begin() + static_cast<std::ptrdiff_t>(end));
  }
  out.resize(len, 0xCC);
  return out;
}

Bytes real_code(Rng& rng, RealSource src, std::size_t len, const Placement& at) {
  if (src == RealSource::CompiledFixture) return fixture_code(rng, len);
  codegen::CodegenOptions opt;
  opt.base_va = at.va;
  opt.data_lo = at.data_hi > at.data_lo ? at.data_lo : at.image_lo;
  opt.data_hi = at.data_hi > at.data_lo ? at.data_hi : at.image_hi;
  return codegen::generate_code(rng, len, opt);
}

constexpr std::array<std::string_view, 48> kWords = {
    "error",    "file",      "open",       "close",     "read",      "write",    "failed",  "invalid",
    "memory",   "buffer",    "size",       "config",    "user",      "system",   "path",    "value",
    "%s",       "%d",        "0x%08x",     "\\n",       "kernel32.dll", "user32.dll", "GetProcAddress",
    "LoadLibraryA", "VirtualAlloc", "ExitProcess", "CreateFileW", "RegOpenKeyExA", "MessageBoxA", "Software",
    "Microsoft", "Windows",  "version",    "copyright", "license",   "usage:",   "options", "--help",
    "warning",  "not found", "access denied", "timeout", "connection", "server",  "update",  "data"};

void put_string(Bytes& out, std::string_view s, bool wide) {
  for (char c : s) {
    out.push_back(static_cast<std::uint8_t>(c));
    if (wide) out.push_back(0);
  }
  out.push_back(0);
  if (wide) out.push_back(0);
}

Bytes strings_data(Rng& rng, std::size_t len) {
  Bytes out;
  while (out.size() < len) {
    std::string s;
    const std::size_t words = 1 + rng.uniform(6);
    for (std::size_t w = 0; w < words; ++w) {
      if (w) s += rng.uniform(4) ? " " : ": ";
      s += kWords[rng.uniform(kWords.size())];
    }
    if (rng.uniform(3) == 0) s[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(s[0])));
    put_string(out, s, rng.uniform(4) == 0);
    while (out.size() % 4 != 0) out.push_back(0);
  }
  out.resize(len);
  return out;
}

void put32(Bytes& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

Bytes tables_data(Rng& rng, std::size_t len, const Placement& at) {
  Bytes out;
  static constexpr std::array<double, 8> kConstants = {1.0, 0.5, 2.0, 3.141592653589793, 1e-6, 100.0, 0.25, 65536.0};
  while (out.size() < len) {
    const std::size_t n = 4 + rng.uniform(28);
    switch (rng.uniform(6)) {
      case 0:  // pointer or jump table
        for (std::size_t i = 0; i < n; ++i) {
          put32(out, static_cast<std::uint32_t>((at.image_lo + rng.uniform(at.image_hi - at.image_lo)) & ~0x3ull));
        }
        break;
      case 1:  // small integers
        for (std::size_t i = 0; i < n; ++i) put32(out, static_cast<std::uint32_t>(rng.uniform(256)));
        break;
      case 2: {  // int16 array
        for (std::size_t i = 0; i < 2 * n; ++i) {
          const auto v = static_cast<std::uint16_t>(rng.uniform(2000));
          out.push_back(static_cast<std::uint8_t>(v));
          out.push_back(static_cast<std::uint8_t>(v >> 8));
        }
        break;
      }
      case 3: {  // ascending offsets
        std::uint32_t v = static_cast<std::uint32_t>(rng.uniform(64));
        for (std::size_t i = 0; i < n; ++i) {
          put32(out, v);
          v += static_cast<std::uint32_t>(4 + 4 * rng.uniform(8));
        }
        break;
      }
      case 4:  // double constants
        for (std::size_t i = 0; i < n / 2 + 1; ++i) {
          const double d = kConstants[rng.uniform(kConstants.size())];
          std::uint64_t bits;
          std::memcpy(&bits, &d, 8);
          put32(out, static_cast<std::uint32_t>(bits));
          put32(out, static_cast<std::uint32_t>(bits >> 32));
        }
        break;
      default:  // byte flags
        for (std::size_t i = 0; i < 4 * n; ++i) out.push_back(static_cast<std::uint8_t>(rng.uniform(4) ? 0 : 1u << rng.uniform(8)));
        break;
    }
  }
  out.resize(len);
  return out;
}

Bytes random_bytes(Rng& rng, std::size_t len) {
  Bytes out(len);
  for (auto& b : out) b = rng.byte();
  return out;
}

struct Payload {
  Bytes bytes;
  std::string source;
  std::optional<nlohmann::json> transform;
};

Payload packed_data(Rng& rng, PackedSource src, std::size_t len, const Placement& at,
                    const std::vector<RealSource>& real_sources, std::uint64_t seed) {
  Payload p;
  p.source = std::string(to_string(src));
  auto apply = [&](const Bytes& input, const lowentropy::TransformSpec& spec) {
    auto r = lowentropy::transform(input, spec);
    if (r.output.size() != len) throw std::logic_error("transform produced an unexpected length");
    p.bytes = std::move(r.output);
    p.transform = lowentropy::spec_to_json(spec);
  };
  switch (src) {
    case PackedSource::RandomBytes:
      p.bytes = random_bytes(rng, len);
      break;
    case PackedSource::MonoSub:
      apply(real_code(rng, pick(rng, real_sources), len, at), lowentropy::make_monosub(seed));
      break;
    case PackedSource::PolySub:
      apply(real_code(rng, pick(rng, real_sources), len, at), lowentropy::make_polysub(seed, 4 + 4 * rng.uniform(4)));
      break;
    case PackedSource::Transposition:
      apply(real_code(rng, pick(rng, real_sources), len, at),
            lowentropy::make_transposition(seed, std::size_t{64} << rng.uniform(3)));
      break;
    case PackedSource::Encoding: {
      const auto alphabet = static_cast<lowentropy::Alphabet>(rng.uniform(3));
      // Lengths are multiples of 8, so the unpadded encodings come out exact.
      const std::size_t in = alphabet == lowentropy::Alphabet::Base32 ? len / 8 * 5 : len / 4 * 3;
      apply(random_bytes(rng, in), lowentropy::make_encoding(alphabet, seed));
      break;
    }
    case PackedSource::Padding: {
      static constexpr std::array<std::uint8_t, 4> kPad = {0xFF, 0x41, 0xAA, 0x3F};
      const std::size_t amount = len / 4 + rng.uniform(len / 4);
      const std::size_t body = len - amount;
      auto spec = lowentropy::make_padding(kPad[rng.uniform(kPad.size())], amount, lowentropy::PadPosition::Inject,
                                           rng.uniform(body + 1));
      spec.seed = seed;
      apply(random_bytes(rng, body), spec);
      break;
    }
  }
  return p;
}

std::string section_name(RegionLabel kind, std::map<std::string, int>& used) {
  std::string base = kind == RegionLabel::Instruction ? ".text" : kind == RegionLabel::NativeData ? ".rdata" : ".data";
  const int n = used[base]++;
  return n == 0 ? base : base + std::to_string(n);
}

std::uint32_t characteristics(RegionLabel kind) {
  switch (kind) {
    case RegionLabel::Instruction: return 0x60000020;
    case RegionLabel::NativeData: return 0x40000040;
    case RegionLabel::PackedData: return 0xE0000060;
  }
  return 0;
}

std::size_t draw_length(Rng& rng, const SegmentPlan& s) {
  const std::size_t steps = (s.max_length - s.min_length) / kSegmentQuantum;
  return s.min_length + kSegmentQuantum * rng.uniform(steps + 1);
}

}  // namespace

std::string_view to_string(Role r) { return kRoleNames[static_cast<std::size_t>(r)]; }
std::string_view to_string(ProgramLabel p) { return kProgramNames[static_cast<std::size_t>(p)]; }
std::string_view to_string(RealSource s) { return kRealNames[static_cast<std::size_t>(s)]; }
std::string_view to_string(NativeSource s) { return kNativeNames[static_cast<std::size_t>(s)]; }
std::string_view to_string(PackedSource s) { return kPackedNames[static_cast<std::size_t>(s)]; }
Role role_from_string(std::string_view s) { return parse_enum<Role>(s, kRoleNames, "role"); }
RealSource real_source_from_string(std::string_view s) { return parse_enum<RealSource>(s, kRealNames, "real source"); }
NativeSource native_source_from_string(std::string_view s) {
  return parse_enum<NativeSource>(s, kNativeNames, "native source");
}
PackedSource packed_source_from_string(std::string_view s) {
  return parse_enum<PackedSource>(s, kPackedNames, "packed source");
}

void SyntheticRecipe::validate() const {
  auto bad = [&](const std::string& m) { throw Error(ErrorKind::InvalidRecipe, "recipe '" + name + "': " + m); };
  if (layout.empty()) bad("empty layout");
  if (containers.empty()) bad("no container");
  for (const auto& s : layout) {
    if (s.min_length == 0 || s.min_length > s.max_length) bad("segment length range is empty");
    if (s.min_length % kSegmentQuantum || s.max_length % kSegmentQuantum) bad("segment lengths must be multiples of 0x200");
    if (s.kind == RegionLabel::Instruction && real_sources.empty()) bad("no real-code source");
    if (s.kind == RegionLabel::NativeData && native_sources.empty()) bad("no native-data source");
    if (s.kind == RegionLabel::PackedData && packed_sources.empty()) bad("no packed-data source");
    if (s.kind == RegionLabel::PackedData && real_sources.empty()) bad("transform sources need a real-code source");
  }
  if (entropy_ceiling && !(*entropy_ceiling > 0.0 && *entropy_ceiling <= 8.0)) bad("entropy ceiling outside (0, 8]");
}

nlohmann::json SyntheticRecipe::to_json() const {
  nlohmann::json j;
  j["name"] = name;
  for (auto s : real_sources) j["real_sources"].push_back(to_string(s));
  for (auto s : native_sources) j["native_sources"].push_back(to_string(s));
  for (auto s : packed_sources) j["packed_sources"].push_back(to_string(s));
  for (const auto& s : layout) {
    j["layout"].push_back({{"kind", to_string(s.kind)}, {"min_length", s.min_length}, {"max_length", s.max_length}});
  }
  j["shuffle_layout"] = shuffle_layout;
  for (auto c : containers) j["containers"].push_back(kContainerNames[static_cast<std::size_t>(c)]);
  if (entropy_ceiling) j["entropy_ceiling"] = *entropy_ceiling;
  return j;
}

SyntheticRecipe SyntheticRecipe::from_json(const nlohmann::json& j) {
  try {
    SyntheticRecipe r;
    r.name = j.at("name").get<std::string>();
    auto list = [&](const char* key, auto parse, auto& out) {
      if (!j.contains(key)) return;
      out.clear();
      for (const auto& v : j.at(key)) out.push_back(parse(v.template get<std::string>()));
    };
    list("real_sources", real_source_from_string, r.real_sources);
    list("native_sources", native_source_from_string, r.native_sources);
    list("packed_sources", packed_source_from_string, r.packed_sources);
    list("containers", [](const std::string& s) { return parse_enum<Container>(s, kContainerNames, "container"); },
         r.containers);
    for (const auto& s : j.at("layout")) {
      SegmentPlan p;
      try {
        p.kind = region_label_from_string(s.at("kind").get<std::string>());
      } catch (const Error& e) {
        throw Error(ErrorKind::InvalidRecipe, e.what());
      }
      p.min_length = s.at("min_length").get<std::size_t>();
      p.max_length = s.value("max_length", p.min_length);
      r.layout.push_back(p);
    }
    r.shuffle_layout = j.value("shuffle_layout", false);
    if (j.contains("entropy_ceiling")) r.entropy_ceiling = j.at("entropy_ceiling").get<double>();
    r.validate();
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::InvalidRecipe, e.what());
  }
}

GeneratedFile generate_file(const SyntheticRecipe& recipe, std::uint64_t seed) {
  recipe.validate();
  Rng rng(seed);
  std::vector<SegmentPlan> plan = recipe.layout;
  if (recipe.shuffle_layout && plan.size() > 2) rng.shuffle(std::span<SegmentPlan>(plan).subspan(1));
  std::vector<RegionLabel> kinds;
  std::vector<std::size_t> lengths;
  for (const auto& s : plan) {
    kinds.push_back(s.kind);
    lengths.push_back(draw_length(rng, s));
  }
  const Container container = pick(rng, recipe.containers);

  // Contents are generated per segment from derived seeds so that appending a
  // padding segment later does not disturb earlier ones.
  std::vector<Payload> payloads(kinds.size());
  auto place = [&](const std::vector<std::size_t>& lens) {
    std::vector<std::uint64_t> va(lens.size()), off(lens.size());
    if (container == Container::Raw) {
      std::uint64_t o = 0;
      for (std::size_t i = 0; i < lens.size(); ++i) {
        off[i] = o;
        va[i] = binimage::kRawImageBase + o;
        o += lens[i];
      }
    } else {
      std::vector<binimage::PeSectionSpec> specs(lens.size());
      for (std::size_t i = 0; i < lens.size(); ++i) specs[i].data.assign(lens[i], 0);
      const auto pe = binimage::write_pe32(specs, static_cast<std::uint32_t>(binimage::kRawImageBase));
      for (std::size_t i = 0; i < lens.size(); ++i) {
        off[i] = pe.layout[i].file_offset;
        va[i] = binimage::kRawImageBase + pe.layout[i].rva;
      }
    }
    return std::pair{va, off};
  };
  auto [va, off] = place(lengths);
  Placement base;
  base.image_lo = binimage::kRawImageBase;
  base.image_hi = va.back() + lengths.back();
  for (std::size_t i = 0; i < kinds.size(); ++i) {
    if (kinds[i] == RegionLabel::NativeData) {
      base.data_lo = va[i];
      base.data_hi = va[i] + lengths[i];
      break;
    }
  }
  for (std::size_t i = 0; i < kinds.size(); ++i) {
    Rng seg(derive_seed(seed, 0x5E6, i));
    Placement at = base;
    at.va = va[i];
    auto& p = payloads[i];
    switch (kinds[i]) {
      case RegionLabel::Instruction: {
        const auto src = pick(seg, recipe.real_sources);
        p.source = std::string(to_string(src));
        p.bytes = real_code(seg, src, lengths[i], at);
        break;
      }
      case RegionLabel::NativeData: {
        const auto src = pick(seg, recipe.native_sources);
        p.source = std::string(to_string(src));
        p.bytes = src == NativeSource::Strings  ? strings_data(seg, lengths[i])
                  : src == NativeSource::Tables ? tables_data(seg, lengths[i], at)
                                                : Bytes(lengths[i], 0);
        break;
      }
      case RegionLabel::PackedData:
        p = packed_data(seg, pick(seg, recipe.packed_sources), lengths[i], at, recipe.real_sources,
                        derive_seed(seed, 0x7A5, i));
        break;
    }
  }

  if (recipe.entropy_ceiling) {
    Bytes all;
    for (const auto& p : payloads) all.insert(all.end(), p.bytes.begin(), p.bytes.end());
    if (lowentropy::shannon_entropy(all) >= *recipe.entropy_ceiling) {
      std::size_t need = lowentropy::padding_needed(all, 0x00, *recipe.entropy_ceiling);
      need = (need + kSegmentQuantum - 1) / kSegmentQuantum * kSegmentQuantum;
      kinds.push_back(RegionLabel::NativeData);
      lengths.push_back(need);
      payloads.push_back({Bytes(need, 0), std::string(to_string(NativeSource::ZeroPad)), std::nullopt});
      std::tie(va, off) = place(lengths);
    }
  }

  GeneratedFile out;
  auto& e = out.entry;
  e.recipe = recipe.name;
  e.seed = seed;
  std::map<std::string, int> used;
  std::vector<std::string> names;
  for (auto k : kinds) names.push_back(container == Container::Raw ? "raw" : section_name(k, used));
  if (container == Container::Raw) {
    for (const auto& p : payloads) out.bytes.insert(out.bytes.end(), p.bytes.begin(), p.bytes.end());
  } else {
    std::vector<binimage::PeSectionSpec> specs(kinds.size());
    for (std::size_t i = 0; i < kinds.size(); ++i) {
      specs[i].name = names[i];
      specs[i].data = payloads[i].bytes;
      specs[i].characteristics = characteristics(kinds[i]);
    }
    out.bytes = binimage::write_pe32(specs, static_cast<std::uint32_t>(binimage::kRawImageBase)).bytes;
  }
  for (std::size_t i = 0; i < kinds.size(); ++i) {
    Region r;
    r.section = names[i];
    r.start = off[i];
    r.end = off[i] + lengths[i];
    r.label = kinds[i];
    r.source = payloads[i].source;
    r.transform = payloads[i].transform;
    if (kinds[i] == RegionLabel::PackedData) r.seed = derive_seed(seed, 0x7A5, i);
    if (r.transform && !e.transform) e.transform = r.transform;
    if (kinds[i] == RegionLabel::PackedData) e.program_label = ProgramLabel::Packed;
    e.regions.push_back(std::move(r));
  }
  e.sha256 = to_hex(sha256(out.bytes));
  return out;
}

CorpusManifest generate_corpus(const std::vector<CorpusPart>& parts, std::uint64_t seed, const std::string& root) {
  struct Job {
    std::size_t part, index;
  };
  std::vector<Job> jobs;
  for (std::size_t p = 0; p < parts.size(); ++p) {
    parts[p].recipe.validate();
    for (std::size_t i = 0; i < parts[p].count; ++i) jobs.push_back({p, i});
  }
  if (jobs.empty()) throw Error(ErrorKind::InvalidRecipe, "corpus plan has no files");
  namespace fs = std::filesystem;
  for (auto r : {Role::Pretrain, Role::Finetune, Role::Test}) {
    std::string dir(to_string(r));
    std::transform(dir.begin(), dir.end(), dir.begin(), [](unsigned char c) { return std::tolower(c); });
    fs::create_directories(fs::path(root) / dir);
  }
  CorpusManifest manifest;
  manifest.entries.resize(jobs.size());
  parallel_for(jobs.size(), [&](std::size_t j) {
    const auto& part = parts[jobs[j].part];
    auto file = generate_file(part.recipe, derive_seed(seed, 0xC0A9 + jobs[j].part, jobs[j].index));
    std::string dir(to_string(part.role));
    std::transform(dir.begin(), dir.end(), dir.begin(), [](unsigned char c) { return std::tolower(c); });
    char name[64];
    std::snprintf(name, sizeof name, "p%02zu-%05zu.bin", jobs[j].part, jobs[j].index);
    file.entry.path = dir + "/" + name;
    file.entry.role = part.role;
    write_file((fs::path(root) / file.entry.path).string(), file.bytes);
    manifest.entries[j] = std::move(file.entry);
  });
  write_manifest((fs::path(root) / "manifest.jsonl").string(), manifest);
  return manifest;
}

nlohmann::json ManifestEntry::to_json() const {
  nlohmann::json j;
  j["path"] = path;
  j["sha256"] = sha256;
  j["role"] = to_string(role);
  j["program_label"] = to_string(program_label);
  j["recipe"] = recipe;
  j["seed"] = seed;
  if (parent_sha256) j["parent_sha256"] = *parent_sha256;
  if (transform) j["transform"] = *transform;
  j["regions"] = nlohmann::json::array();
  for (const auto& r : regions) {
    nlohmann::json o{{"section", r.section}, {"start", r.start}, {"end", r.end},
                     {"label", to_string(r.label)}, {"source", r.source}};
    if (r.seed) o["seed"] = *r.seed;
    if (r.transform) o["transform"] = *r.transform;
    j["regions"].push_back(std::move(o));
  }
  return j;
}

ManifestEntry ManifestEntry::from_json(const nlohmann::json& j) {
  try {
    ManifestEntry e;
    e.path = j.at("path").get<std::string>();
    e.sha256 = j.at("sha256").get<std::string>();
    e.role = parse_enum<Role>(j.at("role").get<std::string>(), kRoleNames, "role");
    e.program_label = parse_enum<ProgramLabel>(j.at("program_label").get<std::string>(), kProgramNames, "label");
    e.recipe = j.value("recipe", "");
    e.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("parent_sha256")) e.parent_sha256 = j.at("parent_sha256").get<std::string>();
    if (j.contains("transform")) e.transform = j.at("transform");
    for (const auto& o : j.at("regions")) {
      Region r;
      r.section = o.at("section").get<std::string>();
      r.start = o.at("start").get<std::uint64_t>();
      r.end = o.at("end").get<std::uint64_t>();
      r.label = region_label_from_string(o.at("label").get<std::string>());
      r.source = o.value("source", "");
      if (o.contains("seed")) r.seed = o.at("seed").get<std::uint64_t>();
      if (o.contains("transform")) r.transform = o.at("transform");
      e.regions.push_back(std::move(r));
    }
    return e;
  } catch (const nlohmann::json::exception& ex) {
    throw Error(ErrorKind::CorruptMetadata, std::string("manifest entry: ") + ex.what());
  } catch (const Error& ex) {
    throw Error(ErrorKind::CorruptMetadata, std::string("manifest entry: ") + ex.what());
  }
}

void write_manifest(const std::string& path, const CorpusManifest& manifest) {
  std::string text = nlohmann::json{{"schema_version", kManifestSchemaVersion}, {"kind", "packsense-manifest"}}.dump();
  text += '\n';
  for (const auto& e : manifest.entries) {
    text += e.to_json().dump();
    text += '\n';
  }
  write_file(path, ByteView(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

CorpusManifest read_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open manifest " + path);
  CorpusManifest m;
  std::string line;
  bool header = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorKind::CorruptMetadata, std::string("manifest line: ") + e.what());
    }
    if (!header) {
      header = true;
      if (j.value("kind", "") != "packsense-manifest") throw Error(ErrorKind::CorruptMetadata, "missing manifest header");
      if (j.value("schema_version", "") != kManifestSchemaVersion) {
        throw Error(ErrorKind::CorruptMetadata, "unsupported manifest schema version");
      }
      continue;
    }
    m.entries.push_back(ManifestEntry::from_json(j));
  }
  if (!header) throw Error(ErrorKind::CorruptMetadata, "empty manifest");
  return m;
}

std::vector<Violation> split_check(const CorpusManifest& manifest) {
  std::vector<Violation> out;
  std::map<std::string, std::vector<const ManifestEntry*>> by_sha;
  std::map<std::uint64_t, std::vector<const ManifestEntry*>> by_seed;
  for (const auto& e : manifest.entries) {
    by_sha[e.sha256].push_back(&e);
    by_seed[e.seed].push_back(&e);
  }
  for (const auto& [sha, es] : by_sha) {
    std::set<Role> roles;
    for (auto* e : es) roles.insert(e->role);
    if (roles.size() < 2) continue;
    Violation v{"sha256", "content " + sha + " appears in more than one role", {}};
    for (auto* e : es) v.paths.push_back(e->path);
    out.push_back(std::move(v));
  }
  for (const auto& e : manifest.entries) {
    if (!e.parent_sha256) continue;
    const auto it = by_sha.find(*e.parent_sha256);
    if (it == by_sha.end()) continue;
    for (auto* parent : it->second) {
      if (is_train(parent->role) == is_train(e.role)) continue;
      out.push_back({"lineage",
                     "derived file in " + std::string(to_string(e.role)) + " has its parent in " +
                         std::string(to_string(parent->role)),
                     {e.path, parent->path}});
    }
  }
  for (const auto& [seed, es] : by_seed) {
    bool train = false, test = false;
    for (auto* e : es) (is_train(e->role) ? train : test) = true;
    if (!(train && test)) continue;
    Violation v{"lineage", "generator seed " + std::to_string(seed) + " appears in both train and test roles", {}};
    for (auto* e : es) v.paths.push_back(e->path);
    out.push_back(std::move(v));
  }
  return out;
}

std::optional<RegionLabel> label_for_extent(const ManifestEntry& entry, std::uint64_t start, std::uint64_t end) {
  std::array<std::uint64_t, kRegionLabelCount> bytes{};
  for (const auto& r : entry.regions) {
    const auto lo = std::max(start, r.start), hi = std::min(end, r.end);
    if (lo < hi) bytes[static_cast<std::size_t>(r.label)] += hi - lo;
  }
  std::size_t best = kRegionLabelCount;
  for (std::size_t i = 0; i < kRegionLabelCount; ++i) {
    if (bytes[i] > 0 && (best == kRegionLabelCount || bytes[i] >= bytes[best])) best = i;
  }
  if (best == kRegionLabelCount) return std::nullopt;
  return static_cast<RegionLabel>(best);
}

}  // namespace packsense::corpus

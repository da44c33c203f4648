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

#include "cli.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>

#include "packsense/checkpoint.hpp"
#include "packsense/corpus.hpp"
#include "packsense/lowentropy.hpp"
#include "packsense/pipeline.hpp"

namespace packsense::cli {

namespace {

constexpr const char* kOutputSchemaVersion = "1.0";

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::map<std::string, std::string> read_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot read config file " + path);
  std::map<std::string, std::string> cfg;
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    ++n;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw UsageError(path + ":" + std::to_string(n) + ": expected key=value");
    auto trim = [](std::string s) {
      const auto a = s.find_first_not_of(" \t\r");
      const auto b = s.find_last_not_of(" \t\r");
      return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
    };
    cfg[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return cfg;
}

// Options of the chosen subcommand that were not given as flags are filled
// from the config file; keys that match no option of any subcommand are
// rejected.
void apply_config(CLI::App& app, CLI::App& sub, const std::map<std::string, std::string>& cfg) {
  std::set<std::string> known;
  for (auto* s : app.get_subcommands({})) {
    for (auto* o : s->get_options()) known.insert(o->get_single_name());
  }
  for (const auto& [key, value] : cfg) {
    if (!known.count(key)) throw UsageError("unknown config key '" + key + "'");
  }
  for (auto* o : sub.get_options()) {
    const auto it = cfg.find(o->get_single_name());
    if (it == cfg.end() || o->count() > 0 || o->get_single_name() == "help") continue;
    o->add_result(it->second);
    o->run_callback();
  }
}

nlohmann::json resolved_options(CLI::App& sub) {
  nlohmann::json j = nlohmann::json::object();
  j["command"] = sub.get_name();
  for (auto* o : sub.get_options()) {
    const auto& name = o->get_single_name();
    if (name == "help" || name == "config") continue;
    if (o->count() > 0) {
      const auto& r = o->results();
      j[name] = r.size() == 1 ? nlohmann::json(r.front()) : nlohmann::json(r);
    } else {
      j[name] = o->get_default_str();
    }
  }
  return j;
}

void log_chain(std::ostream& err, std::uint64_t seed, const nlohmann::json& resolved, const std::string& ckpt_hash) {
  err << "packsense: seed=" << seed << " config_hash=" << to_hex(sha256(resolved.dump()))
      << " vocab_hash=" << normalizer::default_vocabulary().hash()
      << " checkpoint_hash=" << (ckpt_hash.empty() ? "none" : ckpt_hash) << "\n";
}

std::string hex_of(ByteView b) { return to_hex(sha256(b)); }

void require(bool ok, const std::string& what) {
  if (!ok) throw UsageError(what);
}

void write_json(std::ostream& out, const nlohmann::json& j) { out << j.dump(2) << "\n"; }

std::string fixed(double v, int digits = 4) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(digits) << v;
  return s.str();
}

std::string default_root(const std::string& manifest, const std::string& root) {
  if (!root.empty()) return root;
  return std::filesystem::path(manifest).parent_path().string();
}

lowentropy::Alphabet parse_alphabet(const std::string& s) {
  if (s == "base64") return lowentropy::Alphabet::Base64;
  if (s == "base32") return lowentropy::Alphabet::Base32;
  if (s == "custom") return lowentropy::Alphabet::Custom;
  throw UsageError("unknown alphabet '" + s + "'");
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Packing-aware executable analysis toolkit", "packsense"};
  app.require_subcommand(1, 1);
  app.option_defaults()->always_capture_default();
  std::string config_path;

  // Shared settings.
  std::uint64_t seed = 1;
  std::string format = "json";
  const std::set<std::string> formats = {"json", "table"};

  // gen-corpus
  auto* gen = app.add_subcommand("gen-corpus", "Generate a labelled synthetic corpus and its manifest");
  std::string gen_out, gen_preset = "desk";
  std::size_t gen_pretrain = 150, gen_finetune = 350, gen_test = 200;
  gen->add_option("--out", gen_out, "Corpus root directory");
  gen->add_option("--preset", gen_preset, "Recipe preset")->check(CLI::IsMember({"desk", "low-entropy"}));
  gen->add_option("--pretrain", gen_pretrain, "Pretrain files");
  gen->add_option("--finetune", gen_finetune, "Finetune files");
  gen->add_option("--test", gen_test, "Test files");
  gen->add_option("--seed", seed, "Root seed");

  // pretrain
  auto* pre = app.add_subcommand("pretrain", "Pre-train the encoder with masked language modelling");
  std::string manifest, root, model_out, model_in;
  encoder::ModelConfig mc;
  encoder::TrainHyper hyper;
  hyper.lr = 5e-4;
  hyper.max_windows_per_epoch = 600;
  pre->add_option("--manifest", manifest, "Corpus manifest (JSONL)");
  pre->add_option("--root", root, "Corpus root (default: manifest directory)");
  pre->add_option("--out", model_out, "Output checkpoint");
  pre->add_option("--layers", mc.layers, "Encoder layers");
  pre->add_option("--heads", mc.heads, "Attention heads");
  pre->add_option("--d-model", mc.d_model, "Model width");
  pre->add_option("--d-ffn", mc.d_ffn, "Feed-forward width");
  pre->add_option("--dropout", mc.dropout, "Dropout rate");
  pre->add_option("--epochs", hyper.epochs, "Epochs");
  pre->add_option("--lr", hyper.lr, "Peak learning rate");
  pre->add_option("--batch", hyper.batch, "Batch size");
  pre->add_option("--max-windows", hyper.max_windows_per_epoch, "Windows drawn per epoch (0 = all)");
  pre->add_option("--seed", seed, "Root seed");

  // finetune
  auto* fin = app.add_subcommand("finetune", "Fine-tune the region classifier and fit the program classifier");
  pipeline::FinetuneOptions fo;
  fo.hyper.lr = 5e-4;
  fo.hyper.max_windows_per_epoch = 1500;
  fo.knn_files = 200;
  fin->add_option("--model", model_in, "Pre-trained checkpoint");
  fin->add_option("--manifest", manifest, "Corpus manifest (JSONL)");
  fin->add_option("--root", root, "Corpus root (default: manifest directory)");
  fin->add_option("--out", model_out, "Output checkpoint");
  fin->add_option("--epochs", fo.hyper.epochs, "Epochs");
  fin->add_option("--lr", fo.hyper.lr, "Peak learning rate");
  fin->add_option("--batch", fo.hyper.batch, "Batch size");
  fin->add_option("--max-windows", fo.hyper.max_windows_per_epoch, "Windows drawn per epoch (0 = all)");
  fin->add_option("--knn-k", fo.knn_k, "Neighbours for the program classifier");
  fin->add_option("--knn-files", fo.knn_files, "Finetune files used to fit the program classifier (0 = all)");
  fin->add_option("--seed", seed, "Root seed");

  // scan
  auto* scan = app.add_subcommand("scan", "Classify the instruction windows of an executable");
  std::string input;
  scan->add_option("--model", model_in, "Fine-tuned checkpoint");
  scan->add_option("--input", input, "File to scan");
  scan->add_option("--format", format, "Output format")->check(CLI::IsMember(formats));

  // entropy-scan
  auto* ent = app.add_subcommand("entropy-scan", "Entropy profile and threshold verdict");
  std::string granularity = "file";
  double threshold = lowentropy::kThresholdStandard;
  std::size_t window = lowentropy::kDefaultWindow;
  bool fraction_rule = false;
  ent->add_option("--input", input, "File to scan");
  ent->add_option("--granularity", granularity, "file, section or window")
      ->check(CLI::IsMember({"file", "section", "window"}));
  ent->add_option("--threshold", threshold, "Entropy threshold in bits per byte")->check(CLI::Range(0.0, 8.0));
  ent->add_option("--window", window, "Window size in bytes")->check(CLI::PositiveNumber);
  ent->add_flag("--section-fraction", fraction_rule, "Section granularity: packed when over 20% of sections qualify");
  ent->add_option("--format", format, "Output format")->check(CLI::IsMember(formats));

  // gen-adversarial
  auto* adv = app.add_subcommand("gen-adversarial", "Apply a low-entropy transform to a file");
  std::string adv_out, scheme = "MonoSub", alphabet = "base64", role = "Test";
  std::size_t block = 256, key_length = 16, pad_amount = 0;
  int pad_byte = 0xFF;
  double pad_target = 0.0;
  adv->add_option("--input", input, "Source file");
  adv->add_option("--out", adv_out, "Output file");
  adv->add_option("--scheme", scheme, "Transform")
      ->check(CLI::IsMember({"BytePadding", "Encoding", "MonoSub", "Transposition", "PolySub"}));
  adv->add_option("--alphabet", alphabet, "Encoding alphabet")->check(CLI::IsMember({"base64", "base32", "custom"}));
  adv->add_option("--block", block, "Transposition block size")->check(CLI::PositiveNumber);
  adv->add_option("--key-length", key_length, "PolySub key length")->check(CLI::PositiveNumber);
  adv->add_option("--pad-byte", pad_byte, "BytePadding byte value")->check(CLI::Range(0, 255));
  adv->add_option("--pad-amount", pad_amount, "BytePadding length");
  adv->add_option("--pad-target", pad_target, "BytePadding: pad until entropy is below this")->check(CLI::Range(0.0, 8.0));
  adv->add_option("--manifest", manifest, "Append a derived entry to this manifest");
  adv->add_option("--role", role, "Role of the derived entry")->check(CLI::IsMember({"Pretrain", "Finetune", "Test"}));
  adv->add_option("--seed", seed, "Root seed");

  // eval
  auto* ev = app.add_subcommand("eval", "Score a checkpoint on the Test files of a manifest");
  std::string eval_out;
  ev->add_option("--model", model_in, "Fine-tuned checkpoint");
  ev->add_option("--manifest", manifest, "Corpus manifest (JSONL)");
  ev->add_option("--root", root, "Corpus root (default: manifest directory)");
  ev->add_option("--out", eval_out, "Also write the metrics JSON here");
  ev->add_option("--format", format, "Output format")->check(CLI::IsMember(formats));

  for (auto* s : app.get_subcommands({})) s->add_option("--config", config_path, "Flat key=value config file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }
  CLI::App* sub = app.get_subcommands().front();

  try {
    if (!config_path.empty()) apply_config(app, *sub, read_config(config_path));
    const auto resolved = resolved_options(*sub);
    const std::string name = sub->get_name();
    const auto& vocab = normalizer::default_vocabulary();
    auto log = [&](const std::string& line) { err << "packsense: " << line << "\n"; };

    if (name == "gen-corpus") {
      require(!gen_out.empty(), "gen-corpus needs --out");
      log_chain(err, seed, resolved, "");
      const auto plan = gen_preset == "desk" ? pipeline::desk_plan(gen_pretrain, gen_finetune, gen_test)
                                             : pipeline::low_entropy_plan(gen_test);
      const auto m = corpus::generate_corpus(plan, seed, gen_out);
      const auto violations = corpus::split_check(m);
      nlohmann::json v = nlohmann::json::array();
      for (const auto& x : violations) v.push_back({{"rule", x.rule}, {"message", x.message}, {"paths", x.paths}});
      write_json(out, {{"schema_version", kOutputSchemaVersion},
                       {"manifest", (std::filesystem::path(gen_out) / "manifest.jsonl").string()},
                       {"files", m.entries.size()},
                       {"violations", v}});
      return violations.empty() ? 0 : 1;
    }

    if (name == "pretrain") {
      require(!manifest.empty() && !model_out.empty(), "pretrain needs --manifest and --out");
      hyper.seed = seed;
      const auto m = corpus::read_manifest(manifest);
      log_chain(err, seed, resolved, "");
      const auto ck = pipeline::pretrain_stage(m, default_root(manifest, root), mc, hyper, log);
      checkpoint::save(model_out, ck);
      log_chain(err, seed, resolved, checkpoint::hash(ck));
      return 0;
    }

    if (name == "finetune") {
      require(!model_in.empty() && !manifest.empty() && !model_out.empty(),
              "finetune needs --model, --manifest and --out");
      fo.hyper.seed = seed;
      const auto pre_ck = checkpoint::load(model_in, vocab.hash());
      log_chain(err, seed, resolved, checkpoint::hash(pre_ck));
      const auto m = corpus::read_manifest(manifest);
      const auto ck = pipeline::finetune_stage(pre_ck, m, default_root(manifest, root), fo, log);
      checkpoint::save(model_out, ck);
      log_chain(err, seed, resolved, checkpoint::hash(ck));
      return 0;
    }

    if (name == "scan") {
      require(!model_in.empty() && !input.empty(), "scan needs --model and --input");
      const auto ck = checkpoint::load(model_in, vocab.hash());
      log_chain(err, 0, resolved, checkpoint::hash(ck));
      const auto bytes = read_file(input);
      const auto digest = hex_of(bytes);
      const auto image = binimage::load_image(bytes);
      const auto result = pipeline::scan_image(ck, image);
      if (format == "json") {
        write_json(out, detect::make_report(input, digest, result.verdicts, result.program));
      } else {
        out << input << "  sha256 " << digest << "\n";
        for (const auto& v : result.verdicts) {
          out << std::setw(10) << v.section << "  [" << v.byte_start << ", " << v.byte_end << ")  "
              << std::setw(11) << to_string(v.label) << "  " << fixed(v.probs[0]) << " " << fixed(v.probs[1]) << " "
              << fixed(v.probs[2]) << "\n";
        }
        if (result.program) {
          out << "program: " << detect::to_string(result.program->decision) << " (votes "
              << result.program->votes[0] << "/" << result.program->votes[1] << ", packed fraction "
              << fixed(result.program->packed_fraction) << ")\n";
        } else {
          out << "program: no windows\n";
        }
      }
      return 0;
    }

    if (name == "entropy-scan") {
      require(!input.empty(), "entropy-scan needs --input");
      log_chain(err, 0, resolved, "");
      const auto bytes = read_file(input);
      const auto digest = hex_of(bytes);
      const auto image = binimage::load_image(bytes);
      const auto g = lowentropy::granularity_from_string(granularity);
      const auto profile = lowentropy::entropy_profile(image, g, window);
      lowentropy::DetectOptions opt;
      opt.threshold = threshold;
      opt.section_fraction_rule = fraction_rule;
      const auto verdict = lowentropy::entropy_detect(profile, opt);
      auto value_json = [](const lowentropy::EntropyValue& v) {
        return nlohmann::json{{"section", v.extent.section},
                              {"offset", v.extent.offset},
                              {"length", v.extent.length},
                              {"entropy", v.entropy}};
      };
      if (format == "json") {
        nlohmann::json values = nlohmann::json::array(), evidence = nlohmann::json::array();
        for (const auto& v : profile.values) values.push_back(value_json(v));
        for (const auto& v : verdict.evidence) evidence.push_back(value_json(v));
        write_json(out, {{"schema_version", kOutputSchemaVersion},
                         {"file", input},
                         {"sha256", digest},
                         {"granularity", std::string(lowentropy::to_string(g))},
                         {"threshold", threshold},
                         {"window", window},
                         {"values", values},
                         {"verdict",
                          {{"packed", verdict.packed},
                           {"covered", verdict.covered},
                           {"max_entropy", verdict.max_entropy},
                           {"evidence", evidence}}}});
      } else {
        for (const auto& v : profile.values) {
          out << std::setw(10) << v.extent.section << "  offset " << v.extent.offset << "  length " << v.extent.length
              << "  entropy " << fixed(v.entropy) << "\n";
        }
        out << "verdict: " << (verdict.packed ? "packed" : "not packed") << " (max " << fixed(verdict.max_entropy)
            << ", threshold " << fixed(threshold, 2) << ")\n";
      }
      return 0;
    }

    if (name == "gen-adversarial") {
      require(!input.empty() && !adv_out.empty(), "gen-adversarial needs --input and --out");
      log_chain(err, seed, resolved, "");
      const auto bytes = read_file(input);
      const auto s = lowentropy::scheme_from_string(scheme);
      const auto tseed = derive_seed(seed, 0xAD5);
      lowentropy::TransformSpec spec;
      switch (s) {
        case lowentropy::Scheme::MonoSub: spec = lowentropy::make_monosub(tseed); break;
        case lowentropy::Scheme::Transposition: spec = lowentropy::make_transposition(tseed, block); break;
        case lowentropy::Scheme::PolySub: spec = lowentropy::make_polysub(tseed, key_length); break;
        case lowentropy::Scheme::Encoding: spec = lowentropy::make_encoding(parse_alphabet(alphabet), tseed); break;
        case lowentropy::Scheme::BytePadding: {
          std::size_t amount = pad_amount;
          if (pad_target > 0.0) amount = lowentropy::padding_needed(bytes, static_cast<std::uint8_t>(pad_byte), pad_target);
          require(amount > 0 || pad_target > 0.0, "BytePadding needs --pad-amount or --pad-target");
          spec = lowentropy::make_padding(static_cast<std::uint8_t>(pad_byte), amount);
          spec.seed = tseed;
          break;
        }
      }
      const auto result = lowentropy::transform(bytes, spec);
      write_file(adv_out, result.output);
      const auto in_sha = hex_of(bytes), out_sha = hex_of(result.output);
      if (!manifest.empty()) {
        auto m = corpus::read_manifest(manifest);
        corpus::ManifestEntry e;
        const auto root_dir = std::filesystem::path(manifest).parent_path();
        e.path = std::filesystem::relative(std::filesystem::absolute(adv_out), std::filesystem::absolute(root_dir))
                     .generic_string();
        e.sha256 = out_sha;
        e.role = corpus::role_from_string(role);
        e.program_label = corpus::ProgramLabel::Packed;
        e.recipe = "gen-adversarial";
        e.seed = tseed;
        e.parent_sha256 = in_sha;
        for (const auto& p : m.entries) {
          if (p.sha256 == in_sha) e.seed = p.seed;  // inherit the parent's lineage
        }
        e.transform = lowentropy::spec_to_json(spec);
        corpus::Region r;
        r.section = "raw";
        r.start = 0;
        r.end = result.output.size();
        r.label = RegionLabel::PackedData;
        r.source = std::string(lowentropy::to_string(s));
        r.seed = tseed;
        r.transform = e.transform;
        e.regions.push_back(r);
        m.entries.push_back(e);
        corpus::write_manifest(manifest, m);
      }
      write_json(out, {{"schema_version", kOutputSchemaVersion},
                       {"input", input},
                       {"output", adv_out},
                       {"input_sha256", in_sha},
                       {"output_sha256", out_sha},
                       {"entropy_before", bytes.empty() ? 0.0 : lowentropy::shannon_entropy(bytes)},
                       {"entropy_after", result.output.empty() ? 0.0 : lowentropy::shannon_entropy(result.output)},
                       {"metadata", result.metadata}});
      return 0;
    }

    if (name == "eval") {
      require(!model_in.empty() && !manifest.empty(), "eval needs --model and --manifest");
      const auto ck = checkpoint::load(model_in, vocab.hash());
      const auto hash = checkpoint::hash(ck);
      log_chain(err, 0, resolved, hash);
      const auto m = corpus::read_manifest(manifest);
      const auto result = pipeline::evaluate_stage(ck, m, default_root(manifest, root), log);
      const nlohmann::json j = {
          {"schema_version", kOutputSchemaVersion}, {"checkpoint_hash", hash}, {"metrics", result.metrics}};
      if (!eval_out.empty()) {
        const auto text = j.dump(2) + "\n";
        write_file(eval_out, ByteView(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
      }
      if (format == "json") {
        write_json(out, j);
      } else {
        const auto& mt = result.metrics;
        out << "test files          " << mt["test_files"] << "\n"
            << "windows             " << mt["windows"] << "\n"
            << "task A F1           " << fixed(mt["task_a"]["f1"].get<double>()) << "\n"
            << "task B F1           " << fixed(mt["task_b"]["f1"].get<double>()) << "\n"
            << "program accuracy    " << fixed(mt["program_knn"]["accuracy"].get<double>()) << "\n"
            << "entropy recall      " << fixed(mt["entropy_file_7"]["recall"].get<double>()) << "\n"
            << "low-entropy recall  model " << fixed(mt["low_entropy"]["model_recall"].get<double>()) << ", entropy "
            << fixed(mt["low_entropy"]["entropy_recall"].get<double>()) << "\n";
      }
      return 0;
    }
  } catch (const UsageError& e) {
    err << "packsense: " << e.what() << "\n" << sub->help();
    return 2;
  } catch (const Error& e) {
    err << "packsense: error (" << to_string(e.kind()) << "): " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "packsense: error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

}  // namespace packsense::cli

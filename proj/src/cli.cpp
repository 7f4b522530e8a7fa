/*
 * Copyright 2026 The topicmap Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "topicmap/cli.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "topicmap/aggregate.hpp"
#include "topicmap/evalsuite.hpp"
#include "topicmap/explorer.hpp"
#include "topicmap/persistence.hpp"
#include "topicmap/service.hpp"

namespace topicmap {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

// Kept in sync with config/defaults.conf (checked by the cli tests).
constexpr std::string_view kBuiltinDefaults = R"(config_version=1
tokenizer.min_len=3
prune.min_df=2
prune.max_df_fraction=0.5
level1.subject=20
level1.background=1
level1.seed=1
level2.subject=60
level2.background=1
level2.seed=2
pseudo_doc_weight=1.0
level1.smooth_beta=0.1
level1.smooth_alpha=0.1
level1.sparse_beta=0.05
level1.decorr_gamma=auto
level2.smooth_beta=0.1
level2.smooth_alpha=0.1
level2.sparse_beta=0.05
level2.decorr_gamma=auto
max_passes=40
rel_tol=0.001
batch_cap=0.10
eval.top_k=10
eval.percentile=75
eval.k_list=100,200,500,1000
tau_grid.step=0.01
map.edge_tau=0.05
map.docs_per_cell=10
)";

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string format_real(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::vector<std::size_t> parse_size_list(const std::string& raw, const std::string& key) {
  std::vector<std::size_t> out;
  std::stringstream ss(raw);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    std::size_t v = 0;
    const auto [ptr, ec] = std::from_chars(item.data(), item.data() + item.size(), v);
    if (item.empty() || ec != std::errc() || ptr != item.data() + item.size() || v == 0) {
      throw UsageError(key + ": expected a comma-separated list of positive integers");
    }
    out.push_back(v);
  }
  if (out.empty()) throw UsageError(key + ": list is empty");
  return out;
}

std::unordered_set<std::string> read_stopwords(const std::optional<std::string>& path) {
  std::unordered_set<std::string> words;
  if (!path) return words;
  std::istringstream in(read_file(*path));
  std::string line;
  while (std::getline(in, line)) {
    line = trim(line);
    if (!line.empty()) words.insert(line);
  }
  return words;
}

Corpus read_corpus(const fs::path& path) {
  std::istringstream in(read_file(path));
  return parse_corpus_file(in);
}

// Records what a run read and wrote; one copy is written next to every
// artifact as <artifact>.manifest.json.
class RunManifest {
 public:
  RunManifest(std::string command, const std::vector<std::string>& args,
              const Settings& settings)
      : start_(std::chrono::steady_clock::now()) {
    doc_["command"] = std::move(command);
    doc_["args"] = args;
    doc_["settings"] = settings.values();
    doc_["seeds"] = {{"level1", settings.get("level1.seed")},
                     {"level2", settings.get("level2.seed")}};
    doc_["inputs"] = json::object();
    doc_["outputs"] = json::array();
  }

  void input(const std::string& role, const fs::path& path) {
    doc_["inputs"][role] = {{"path", path.string()},
                            {"fnv1a64", hex64(fnv1a64(read_file(path)))}};
  }

  void output(const fs::path& path, std::string_view contents) {
    write_file_atomically(path, contents);
    written_.push_back(path);
    doc_["outputs"].push_back(path.string());
  }

  void finish() {
    doc_["duration_seconds"] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    const auto text = doc_.dump(2) + "\n";
    for (const auto& p : written_) {
      write_file_atomically(p.string() + ".manifest.json", text);
    }
  }

 private:
  json doc_;
  std::vector<fs::path> written_;
  std::chrono::steady_clock::time_point start_;
};

// Options shared by every subcommand: --config and repeated --set k=v, plus
// the dedicated flags that map onto settings keys.
struct SettingsFlags {
  std::optional<std::string> config_path;
  std::vector<std::string> overrides;
  std::map<std::string, std::string> flag_values;  // key -> raw flag value
  // A key may be bound on several subcommands; only the parsed one counts.
  std::vector<std::pair<std::string, CLI::Option*>> flag_options;

  void attach(CLI::App* app) {
    app->add_option("--config", config_path, "key=value settings file")
        ->check(CLI::ExistingFile);
    app->add_option("--set", overrides, "override one setting, key=value (repeatable)");
  }

  void flag(CLI::App* app, const std::string& name, const std::string& key,
            const std::string& help) {
    flag_options.emplace_back(
        key, app->add_option(name, flag_values[key], help + " [" + key + "]"));
  }

  // base < config file < --set < dedicated flags.
  Settings resolve(Settings base = Settings::defaults()) const {
    if (config_path) {
      std::ifstream in(*config_path);
      if (!in) throw UsageError("cannot read config " + *config_path);
      base.merge(in, *config_path);
    }
    for (const auto& kv : overrides) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw UsageError("--set expects key=value, got '" + kv + "'");
      base.set(trim(kv.substr(0, eq)), trim(kv.substr(eq + 1)));
    }
    for (const auto& [key, opt] : flag_options) {
      if (opt->count() > 0) base.set(key, flag_values.at(key));
    }
    return base;
  }
};

void set_from_config(Settings& s, const HierarchyConfig& c) {
  auto level = [&](const std::string& p, const TopicConfig& t, const RegularizerConfig& r) {
    s.set(p + ".subject", std::to_string(t.n_subject));
    s.set(p + ".background", std::to_string(t.n_background));
    s.set(p + ".seed", std::to_string(t.seed));
    s.set(p + ".smooth_beta", format_real(r.smooth_beta));
    s.set(p + ".smooth_alpha", format_real(r.smooth_alpha));
    s.set(p + ".sparse_beta", format_real(r.sparse_beta));
    s.set(p + ".decorr_gamma", r.decorr_gamma ? format_real(*r.decorr_gamma) : "auto");
  };
  level("level1", c.level1, c.reg1);
  level("level2", c.level2, c.reg2);
  s.set("pseudo_doc_weight", format_real(c.pseudo_doc_weight));
  s.set("max_passes", std::to_string(c.schedule.max_passes));
  s.set("rel_tol", format_real(c.schedule.rel_tol));
}

// The stored model config, with any user-supplied settings layered on top.
HierarchyConfig config_for_model(const HierarchicalModel& model, const SettingsFlags& flags,
                                 Settings& settings) {
  auto base = Settings::defaults();
  set_from_config(base, model.config);
  settings = flags.resolve(std::move(base));
  return hierarchy_config(settings);
}

PruneConfig prune_config(const Settings& s, const std::optional<std::string>& stopwords) {
  PruneConfig p;
  p.min_df = s.count("prune.min_df");
  p.max_df_fraction = s.real("prune.max_df_fraction");
  p.stopwords = read_stopwords(stopwords);
  return p;
}

// Parses a corpus file and keeps its pruned vocabulary.
ProjectionResult load_pruned_corpus(const fs::path& path, const PruneConfig& prune) {
  const auto text = read_file(path);
  std::istringstream vocab_in(text);
  const auto vocab = build_vocabulary(vocab_in, prune);
  std::istringstream corpus_in(text);
  return project_corpus(parse_corpus_file(corpus_in), vocab);
}

std::unordered_map<std::string, std::string> read_titles(const fs::path& path) {
  std::unordered_map<std::string, std::string> titles;
  std::istringstream in(read_file(path));
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos || tab == 0) {
      throw Error(ErrorCode::kMalformedLine,
                  path.string() + " line " + std::to_string(line_no) + ": expected doc_id<TAB>text");
    }
    titles[line.substr(0, tab)] = line.substr(tab + 1);
  }
  return titles;
}

std::string curve_csv(std::span<const std::pair<double, std::size_t>> curve) {
  std::ostringstream out;
  write_edge_curve_csv(out, curve);
  return out.str();
}

std::string safe_file_name(const std::string& name) {
  std::string out;
  for (const char c : name) {
    if (c == '+') {
      out += "p";
    } else if (c == '-') {
      out += "m";
    } else {
      out += c;
    }
  }
  return out;
}

void print_domain_error(std::ostream& err, std::string_view code, std::string_view message) {
  err << json{{"error", {{"code", code}, {"message", message}}}}.dump() << '\n';
}

}  // namespace

Settings Settings::defaults() {
  Settings s;
  std::istringstream in{std::string(kBuiltinDefaults)};
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find('=');
    s.values_[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return s;
}

void Settings::merge(std::istream& in, std::string_view origin) {
  std::string line;
  std::size_t line_no = 0;
  bool saw_version = false;
  while (std::getline(in, line)) {
    ++line_no;
    const auto t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw UsageError(std::string(origin) + ":" + std::to_string(line_no) +
                       ": expected key=value");
    }
    const auto key = trim(t.substr(0, eq));
    const auto value = trim(t.substr(eq + 1));
    if (key == "config_version") {
      if (value != "1") {
        throw UsageError(std::string(origin) + ": unsupported config_version " + value);
      }
      saw_version = true;
    }
    set(key, value);
  }
  if (!saw_version) throw UsageError(std::string(origin) + ": missing config_version");
}

void Settings::set(const std::string& key, const std::string& value) {
  const auto it = values_.find(key);
  if (it == values_.end()) throw UsageError("unknown setting '" + key + "'");
  it->second = value;
}

const std::string& Settings::get(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) throw UsageError("unknown setting '" + key + "'");
  return it->second;
}

double Settings::real(const std::string& key) const {
  const auto& raw = get(key);
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(raw, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != raw.size() || !std::isfinite(v)) {
    throw UsageError(key + ": expected a real number, got '" + raw + "'");
  }
  return v;
}

std::size_t Settings::count(const std::string& key) const {
  const auto& raw = get(key);
  std::size_t v = 0;
  const auto [ptr, ec] = std::from_chars(raw.data(), raw.data() + raw.size(), v);
  if (raw.empty() || ec != std::errc() || ptr != raw.data() + raw.size()) {
    throw UsageError(key + ": expected a non-negative integer, got '" + raw + "'");
  }
  return v;
}

HierarchyConfig hierarchy_config(const Settings& s) {
  auto topics = [&](const std::string& p) {
    return TopicConfig{s.count(p + ".subject"), s.count(p + ".background"),
                       static_cast<std::uint64_t>(s.count(p + ".seed"))};
  };
  auto reg = [&](const std::string& p) {
    RegularizerConfig r;
    r.smooth_beta = s.real(p + ".smooth_beta");
    r.smooth_alpha = s.real(p + ".smooth_alpha");
    r.sparse_beta = s.real(p + ".sparse_beta");
    if (s.get(p + ".decorr_gamma") != "auto") r.decorr_gamma = s.real(p + ".decorr_gamma");
    return r;
  };
  HierarchyConfig c;
  c.level1 = topics("level1");
  c.level2 = topics("level2");
  c.pseudo_doc_weight = s.real("pseudo_doc_weight");
  c.reg1 = reg("level1");
  c.reg2 = reg("level2");
  c.schedule.max_passes = s.count("max_passes");
  c.schedule.rel_tol = s.real("rel_tol");
  try {
    c.validate();
  } catch (const Error& e) {
    throw UsageError(std::string("invalid settings: ") + e.what());
  }
  return c;
}

std::vector<double> tau_grid(const Settings& s) {
  const double step = s.real("tau_grid.step");
  if (!(step > 0.0 && step <= 1.0)) throw UsageError("tau_grid.step must lie in (0, 1]");
  const auto steps = static_cast<std::size_t>(std::llround(1.0 / step));
  if (std::abs(static_cast<double>(steps) * step - 1.0) > 1e-9) {
    throw UsageError("tau_grid.step must divide 1");
  }
  std::vector<double> grid;
  for (std::size_t i = 0; i <= steps; ++i) {
    grid.push_back(static_cast<double>(i) / static_cast<double>(steps));
  }
  return grid;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"topicmap: hierarchical topic models and topical exploratory search"};
  app.name("topicmap");
  app.require_subcommand(1, 1);
  app.failure_message(CLI::FailureMessage::help);

  std::function<void()> action;
  SettingsFlags flags;
  std::string command;

  // prepare
  struct {
    std::string input, out;
    std::optional<std::string> stopwords;
  } prep;
  auto* prepare = app.add_subcommand(
      "prepare", "Tokenize raw text (doc_id<TAB>source<TAB>text per line) into a corpus file");
  prepare->add_option("--input", prep.input, "raw text file")->required()->check(CLI::ExistingFile);
  prepare->add_option("--out", prep.out, "corpus file to write")->required();
  prepare->add_option("--stopwords", prep.stopwords, "one stopword per line")
      ->check(CLI::ExistingFile);

  // train
  struct {
    std::string corpus, out;
    std::optional<std::string> stopwords;
  } tr;
  auto* train = app.add_subcommand("train", "Train a two-level hierarchical model on a corpus file");
  train->add_option("--corpus", tr.corpus, "corpus file")->required()->check(CLI::ExistingFile);
  train->add_option("--out", tr.out, "model file to write")->required();
  train->add_option("--stopwords", tr.stopwords, "tokens excluded from the vocabulary")
      ->check(CLI::ExistingFile);

  // aggregate
  struct {
    std::string model, initial, added, strategy, out;
    std::optional<std::string> stopwords;
  } ag;
  auto* aggregate_cmd = app.add_subcommand(
      "aggregate", "Aggregate an added corpus into an existing model");
  aggregate_cmd->add_option("--model", ag.model, "initial model")->required()->check(CLI::ExistingFile);
  aggregate_cmd->add_option("--initial-corpus", ag.initial, "corpus the model was trained on")
      ->required()
      ->check(CLI::ExistingFile);
  aggregate_cmd->add_option("--added-corpus", ag.added, "corpus to aggregate")
      ->required()
      ->check(CLI::ExistingFile);
  aggregate_cmd->add_option("--strategy", ag.strategy,
                            "D-I-, D+I-, D-I+, D+I+, D-I+-, D+I+-, baseline or proposed")
      ->default_val("proposed");
  aggregate_cmd->add_option("--out", ag.out, "aggregated model file")->required();
  aggregate_cmd->add_option("--stopwords", ag.stopwords, "tokens pruned from the added corpus")
      ->check(CLI::ExistingFile);

  // eval
  struct {
    std::string model, initial, added, embeddings, out_dir;
    std::vector<std::string> strategies;
    std::optional<std::string> stopwords;
    bool sequential = false;
  } ev;
  auto* eval = app.add_subcommand("eval", "Run every aggregation strategy and write the ablation report");
  eval->add_option("--model", ev.model, "initial model")->required()->check(CLI::ExistingFile);
  eval->add_option("--initial-corpus", ev.initial, "corpus the model was trained on")
      ->required()
      ->check(CLI::ExistingFile);
  eval->add_option("--added-corpus", ev.added, "corpus to aggregate")
      ->required()
      ->check(CLI::ExistingFile);
  eval->add_option("--embeddings", ev.embeddings, "word embeddings (header 'count dim')")
      ->required()
      ->check(CLI::ExistingFile);
  eval->add_option("--strategy", ev.strategies, "strategies to compare (default: all six)");
  eval->add_option("--out-dir", ev.out_dir, "report directory")->required();
  eval->add_option("--stopwords", ev.stopwords, "tokens pruned from the added corpus")
      ->check(CLI::ExistingFile);
  eval->add_flag("--sequential", ev.sequential, "run strategies one after another");

  // bundle
  struct {
    std::string model, corpus, out;
    std::optional<std::string> titles;
  } bu;
  auto* bundle = app.add_subcommand("bundle", "Package a model and its search index for serving");
  bundle->add_option("--model", bu.model, "model file")->required()->check(CLI::ExistingFile);
  bundle->add_option("--corpus", bu.corpus, "corpus the model was trained on")
      ->required()
      ->check(CLI::ExistingFile);
  bundle->add_option("--titles", bu.titles, "doc_id<TAB>raw text, used for snippets")
      ->check(CLI::ExistingFile);
  bundle->add_option("--out", bu.out, "bundle file")->required();

  // serve
  struct {
    std::string bundle, bind = "127.0.0.1:8080";
    std::optional<std::string> static_dir;
  } sv;
  auto* serve_cmd = app.add_subcommand("serve", "Serve a bundle over HTTP");
  serve_cmd->add_option("--bundle", sv.bundle, "bundle file")->required()->check(CLI::ExistingFile);
  serve_cmd->add_option("--bind", sv.bind, "host:port")->capture_default_str();
  serve_cmd->add_option("--static-dir", sv.static_dir, "static files served at /")
      ->check(CLI::ExistingDirectory);

  // schedule
  struct {
    std::size_t initial = 0, added = 0;
  } sc;
  auto* schedule = app.add_subcommand("schedule", "Print the iterative aggregation batch sizes");
  schedule->add_option("--initial", sc.initial, "initial collection size")->required();
  schedule->add_option("--added", sc.added, "added collection size")->required();

  for (auto* sub : {prepare, train, aggregate_cmd, eval, bundle, serve_cmd, schedule}) {
    flags.attach(sub);
  }
  flags.flag(prepare, "--min-len", "tokenizer.min_len", "minimum token length");
  for (auto* sub : {train, aggregate_cmd, eval}) {
    flags.flag(sub, "--min-df", "prune.min_df", "minimum document frequency");
    flags.flag(sub, "--max-df-fraction", "prune.max_df_fraction", "maximum document frequency share");
    flags.flag(sub, "--level1-topics", "level1.subject", "level-1 subject topics");
    flags.flag(sub, "--level2-topics", "level2.subject", "level-2 subject topics");
    flags.flag(sub, "--seed1", "level1.seed", "level-1 seed");
    flags.flag(sub, "--seed2", "level2.seed", "level-2 seed");
    flags.flag(sub, "--max-passes", "max_passes", "EM passes per level");
  }
  for (auto* sub : {aggregate_cmd, eval, schedule}) {
    flags.flag(sub, "--cap", "batch_cap", "iterative batch cap fraction");
  }
  flags.flag(serve_cmd, "--edge-tau", "map.edge_tau", "default map edge threshold");
  flags.flag(serve_cmd, "--docs-per-cell", "map.docs_per_cell", "default documents per map cell");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, err, err);
    return kExitUsage;
  }

  try {
    auto settings = flags.resolve();
    const auto* sub = app.get_subcommands().front();
    command = sub->get_name();

    if (command == "prepare") {
      RunManifest manifest(command, args, settings);
      manifest.input("input", prep.input);
      TokenizerConfig tok;
      tok.min_len = settings.count("tokenizer.min_len");
      tok.stopwords = read_stopwords(prep.stopwords);
      std::istringstream in(read_file(prep.input));
      Corpus corpus;
      std::unordered_set<std::string> seen;
      std::string line;
      std::size_t line_no = 0, skipped = 0;
      while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (trim(line).empty()) continue;
        const auto t1 = line.find('\t');
        const auto t2 = t1 == std::string::npos ? t1 : line.find('\t', t1 + 1);
        if (t2 == std::string::npos || t1 == 0 || t2 == t1 + 1) {
          throw Error(ErrorCode::kMalformedLine,
                      "line " + std::to_string(line_no) + ": expected doc_id<TAB>source<TAB>text");
        }
        Document doc;
        doc.id = line.substr(0, t1);
        doc.source = line.substr(t1 + 1, t2 - t1 - 1);
        if (!seen.insert(doc.id).second) {
          throw Error(ErrorCode::kDuplicateDocId, "duplicate document id '" + doc.id + "'");
        }
        std::map<WordId, double> counts;
        for (const auto& token : tokenize(std::string_view(line).substr(t2 + 1), tok)) {
          counts[*corpus.vocabulary.add(token)] += 1.0;
        }
        if (counts.empty()) {
          ++skipped;
          continue;
        }
        for (const auto& [w, c] : counts) doc.counts.push_back({w, c});
        corpus.source_tags.insert(doc.source);
        corpus.documents.push_back(std::move(doc));
      }
      std::ostringstream text;
      write_corpus_file(text, corpus);
      manifest.output(prep.out, text.str());
      manifest.finish();
      out << corpus.size() << " documents, " << corpus.vocabulary.size() << " tokens, "
          << skipped << " empty lines skipped\n";
    } else if (command == "train") {
      RunManifest manifest(command, args, settings);
      manifest.input("corpus", tr.corpus);
      const auto config = hierarchy_config(settings);
      const auto projected = load_pruned_corpus(tr.corpus, prune_config(settings, tr.stopwords));
      const auto model = train_hierarchy(projected.corpus, config);
      manifest.output(tr.out, serialize_model(model));
      manifest.finish();
      out << "trained on " << projected.corpus.size() << " documents ("
          << projected.dropped_ids.size() << " empty after pruning), vocabulary "
          << projected.corpus.vocabulary.size() << ", model " << hex64(model_hash(model))
          << '\n';
    } else if (command == "aggregate") {
      const auto initial_model = load_hierarchical_model(ag.model);
      const auto config = config_for_model(initial_model, flags, settings);
      RunManifest manifest(command, args, settings);
      manifest.input("model", ag.model);
      manifest.input("initial_corpus", ag.initial);
      manifest.input("added_corpus", ag.added);
      auto strategy = parse_strategy(ag.strategy);
      strategy.batch_cap_fraction = settings.real("batch_cap");
      const auto initial =
          project_corpus(read_corpus(ag.initial), initial_model.level1.vocabulary).corpus;
      const auto added =
          load_pruned_corpus(ag.added, prune_config(settings, ag.stopwords)).corpus;
      const auto result = aggregate(initial_model, initial, added, strategy, config);
      std::ostringstream merged;
      write_corpus_file(merged, result.merged_corpus);
      manifest.output(ag.out, serialize_model(result.model));
      manifest.output(ag.out + ".corpus.tsv", merged.str());
      manifest.output(ag.out + ".provenance.json",
                      json::parse(result.provenance).dump(2) + "\n");
      manifest.finish();
      out << strategy.name() << ": " << result.merged_corpus.size() << " documents, "
          << result.dropped_documents << " dropped, vocabulary "
          << result.model.level1.vocabulary.size() << '\n';
    } else if (command == "eval") {
      const auto initial_model = load_hierarchical_model(ev.model);
      const auto config = config_for_model(initial_model, flags, settings);
      RunManifest manifest(command, args, settings);
      manifest.input("model", ev.model);
      manifest.input("initial_corpus", ev.initial);
      manifest.input("added_corpus", ev.added);
      manifest.input("embeddings", ev.embeddings);
      std::vector<Strategy> strategies;
      if (ev.strategies.empty()) {
        strategies = all_strategies();
      } else {
        for (const auto& s : ev.strategies) strategies.push_back(parse_strategy(s));
      }
      for (auto& s : strategies) s.batch_cap_fraction = settings.real("batch_cap");
      AblationOptions options;
      options.k_list = parse_size_list(settings.get("eval.k_list"), "eval.k_list");
      options.top_k = settings.count("eval.top_k");
      options.percentile = settings.real("eval.percentile");
      options.tau_grid = tau_grid(settings);
      options.parallel = !ev.sequential;
      std::istringstream emb_in(read_file(ev.embeddings));
      const auto table = load_embeddings(emb_in);
      const auto initial =
          project_corpus(read_corpus(ev.initial), initial_model.level1.vocabulary).corpus;
      const auto added =
          load_pruned_corpus(ev.added, prune_config(settings, ev.stopwords)).corpus;
      const auto report = ablation_report(initial_model, initial, added, strategies, table,
                                          config, options);
      const fs::path dir(ev.out_dir);
      fs::create_directories(dir);
      manifest.output(dir / "report.json", report.to_json().dump(2) + "\n");
      manifest.output(dir / "report.txt", report.to_text());
      for (const auto& row : report.rows) {
        if (row.failed) continue;
        manifest.output(dir / ("curve_" + safe_file_name(row.strategy.name()) + ".csv"),
                        curve_csv(row.edge_curve));
      }
      manifest.finish();
      out << report.to_text();
      if (std::all_of(report.rows.begin(), report.rows.end(),
                      [](const StrategyRow& r) { return r.failed; })) {
        print_domain_error(err, "all_strategies_failed", report.rows.front().error);
        return kExitDomainError;
      }
    } else if (command == "bundle") {
      const auto model = load_hierarchical_model(bu.model);
      RunManifest manifest(command, args, settings);
      manifest.input("model", bu.model);
      manifest.input("corpus", bu.corpus);
      std::unordered_map<std::string, std::string> titles;
      if (bu.titles) {
        manifest.input("titles", *bu.titles);
        titles = read_titles(*bu.titles);
      }
      const auto corpus = project_corpus(read_corpus(bu.corpus), model.level1.vocabulary).corpus;
      Bundle b{model, build_index(model, corpus, titles), {}};
      json provenance{{"model", bu.model}, {"model_hash", hex64(model_hash(model))}};
      const fs::path prov_path = bu.model + ".provenance.json";
      if (fs::exists(prov_path)) provenance["aggregation"] = json::parse(read_file(prov_path));
      b.provenance = provenance.dump();
      manifest.output(bu.out, serialize_bundle(b));
      manifest.finish();
      out << "bundled " << b.index.size() << " documents\n";
    } else if (command == "serve") {
      ServeOptions options;
      const auto colon = sv.bind.rfind(':');
      if (colon == std::string::npos) throw UsageError("--bind expects host:port");
      options.host = sv.bind.substr(0, colon);
      const auto port_str = sv.bind.substr(colon + 1);
      const auto [ptr, ec] = std::from_chars(port_str.data(), port_str.data() + port_str.size(),
                                             options.port);
      if (ec != std::errc() || ptr != port_str.data() + port_str.size() || options.port < 0 ||
          options.port > 65535) {
        throw UsageError("--bind port must be in [0, 65535]");
      }
      if (sv.static_dir) options.static_dir = *sv.static_dir;
      options.map_defaults.edge_tau = settings.real("map.edge_tau");
      options.map_defaults.docs_per_cell = settings.count("map.docs_per_cell");
      topicmap::serve(sv.bundle, options, err);
    } else if (command == "schedule") {
      const auto sizes = batch_schedule(sc.initial, sc.added, settings.real("batch_cap"));
      for (std::size_t i = 0; i < sizes.size(); ++i) out << (i ? " " : "") << sizes[i];
      out << '\n';
    }
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n\n" << app.help() << '\n';
    return kExitUsage;
  } catch (const Error& e) {
    print_domain_error(err, error_code_name(e.code()), e.what());
    return kExitDomainError;
  } catch (const json::exception& e) {
    print_domain_error(err, "invalid_json", e.what());
    return kExitDomainError;
  } catch (const std::exception& e) {
    print_domain_error(err, "io_error", e.what());
    return kExitDomainError;
  }
  return kExitOk;
}

}  // namespace topicmap

// Copyright 2026 The ERG Authors.
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

#pragma once

// Pipeline driver behind the `erg` tool: INI config with dotted overrides,
// the stage commands, and JSON run reports under <workdir>/reports.
//
// Exit codes: 0 ok, 1 config or usage error, 2 missing prerequisite or bad
// data, 3 anything else.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <concepts>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <thread>
#include <utility>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <nlohmann/json.hpp>
#include <openssl/evp.h>

#include "erg/corpus.hpp"
#include "erg/distill.hpp"
#include "erg/erg.hpp"
#include "erg/error.hpp"
#include "erg/graph.hpp"
#include "erg/graph_encoder.hpp"
#include "erg/synthetic.hpp"

namespace erg::cli {

namespace fs = std::filesystem;
using boost::property_tree::ptree;

// ---------------------------------------------------------------------------
// Hashing

// Git blob id: sha1("blob <size>\0" + content).
inline std::string git_blob_hash(std::string_view content) {
  const std::string header = "blob " + std::to_string(content.size()) + '\0';
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(ctx, EVP_sha1(), nullptr);
  EVP_DigestUpdate(ctx, header.data(), header.size());
  EVP_DigestUpdate(ctx, content.data(), content.size());
  EVP_DigestFinal_ex(ctx, digest, &len);
  EVP_MD_CTX_free(ctx);
  std::ostringstream out;
  for (unsigned int k = 0; k < len; ++k)
    out << std::hex << std::setw(2) << std::setfill('0')
        << static_cast<int>(digest[k]);
  return out.str();
}

inline std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw PrerequisiteError("cannot open " + path.string());
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

inline std::string file_hash(const fs::path& path) {
  return git_blob_hash(read_file(path));
}

// ---------------------------------------------------------------------------
// Config

struct RunSection {
  std::uint64_t seed = 13;
  fs::path workdir = "work";
  std::size_t threads = 1;  // 0: one per hardware thread
};

struct DataSection {
  fs::path corpus;
  fs::path annotated_train;
  fs::path annotated_dev;
  fs::path manifest;  // prebuilt split; overrides split_mode when set
  SplitMode split_mode = SplitMode::kMediaSource;
  std::optional<SourceCounts> conspiracy_sources;
  std::optional<SourceCounts> benign_sources;
  std::size_t random_train = 0;
  std::size_t random_dev = 0;
  fs::path fixed_test;  // one doc_id per line
  std::size_t fixture_docs_per_class = 20;
  std::size_t fixture_annotated = 16;
};

struct EvalSection {
  fs::path predictions;  // score this file instead of running the model
  fs::path input;        // corpus for `predict`
};

struct PipelineConfig {
  fs::path path;  // the INI file
  ptree tree;     // after overrides
  RunSection run;
  DataSection data;
  ErgConfig erg;
  DistillConfig distill;
  ClassifierConfig classifier;
  EvalSection eval;
};

inline const std::map<std::string, std::set<std::string>>& known_keys() {
  static const std::map<std::string, std::set<std::string>> keys{
      {"run", {"seed", "workdir", "threads"}},
      {"data",
       {"corpus", "annotated_train", "annotated_dev", "manifest", "split_mode",
        "conspiracy_sources", "benign_sources", "random_train", "random_dev",
        "fixed_test", "fixture_docs_per_class", "fixture_annotated"}},
      {"erg",
       {"encoder", "word_vectors", "dim", "vocab_buckets", "context_layers",
        "head_hidden", "epochs", "lr", "seed", "max_pair_distance"}},
      {"distill",
       {"encoder", "word_vectors", "dim", "vocab_buckets", "context_layers",
        "head_hidden", "epochs", "lr", "seed", "pair_subsample"}},
      {"classifier",
       {"variant", "layers", "hidden_width", "residuals", "epochs", "lr",
        "seed", "ablate", "encoder", "word_vectors", "dim", "vocab_buckets",
        "context_layers"}},
      {"eval", {"predictions", "input"}},
  };
  return keys;
}

namespace detail {

inline std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_list(const std::string& s,
                                           std::string_view seps) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (seps.find(c) != std::string_view::npos) {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

inline std::uint64_t to_unsigned(const std::string& s) {
  std::size_t used = 0;
  if (s.empty() || s[0] == '-') throw std::invalid_argument("not unsigned");
  const unsigned long long v = std::stoull(s, &used);
  if (used != s.size()) throw std::invalid_argument("trailing characters");
  return v;
}

inline double to_double(const std::string& s) {
  std::size_t used = 0;
  const double v = std::stod(s, &used);
  if (used != s.size()) throw std::invalid_argument("trailing characters");
  return v;
}

inline bool to_bool(const std::string& s) {
  if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
  if (s == "false" || s == "0" || s == "no" || s == "off") return false;
  throw std::invalid_argument("expected true or false");
}

// Typed access to one section; conversion failures become ConfigError.
class Section {
 public:
  Section(const ptree& root, std::string name, fs::path base)
      : name_(std::move(name)), base_(std::move(base)) {
    if (auto s = root.get_child_optional(name_)) node_ = &*s;
  }

  std::optional<std::string> raw(const std::string& key) const {
    if (!node_) return std::nullopt;
    auto v = node_->get_optional<std::string>(key);
    if (!v) return std::nullopt;
    return trim(*v);
  }

  template <class F>
  auto convert(const std::string& key, F&& f) const {
    const std::string v = *raw(key);
    try {
      return f(v);
    } catch (const ConfigError& e) {
      throw ConfigError(name_ + "." + key + ": " + e.what());
    } catch (const std::exception& e) {
      throw ConfigError(name_ + "." + key + ": cannot read '" + v + "' (" +
                        e.what() + ")");
    }
  }

  template <std::unsigned_integral U>
    requires(!std::same_as<U, bool>)
  void get(const std::string& key, U& out) const {
    if (raw(key))
      out = convert(key, [](const std::string& v) {
        return static_cast<U>(to_unsigned(v));
      });
  }
  void get(const std::string& key, double& out) const {
    if (raw(key)) out = convert(key, to_double);
  }
  void get(const std::string& key, bool& out) const {
    if (raw(key)) out = convert(key, to_bool);
  }
  void get_path(const std::string& key, fs::path& out) const {
    auto v = raw(key);
    if (!v) return;
    if (v->empty()) {
      out.clear();
      return;
    }
    const fs::path p(*v);
    out = p.is_absolute() ? p : (base_ / p).lexically_normal();
  }
  template <class F>
  void get_with(const std::string& key, F&& parse) const {
    if (raw(key)) convert(key, std::forward<F>(parse));
  }

 private:
  const ptree* node_ = nullptr;
  std::string name_;
  fs::path base_;
};

inline SourceCounts parse_source_counts(const std::string& s) {
  const auto parts = split_list(s, " ,\t");
  if (parts.size() != 3)
    throw ConfigError("expected three counts 'train dev test', got '" + s +
                      "'");
  return {to_unsigned(parts[0]), to_unsigned(parts[1]), to_unsigned(parts[2])};
}

inline void read_encoder(const Section& s, EncoderConfig& e) {
  s.get_with("encoder", [&](const std::string& v) {
    e.kind = parse_encoder_kind(v);
    return 0;
  });
  fs::path wv = e.word_vectors;
  s.get_path("word_vectors", wv);
  e.word_vectors = wv.string();
  s.get("dim", e.dim);
  s.get("vocab_buckets", e.vocab_buckets);
  s.get("context_layers", e.context_layers);
}

inline nlohmann::json encoder_json(const EncoderConfig& e) {
  return {{"encoder", std::string(to_string(e.kind))},
          {"word_vectors", e.word_vectors},
          {"dim", e.dim},
          {"vocab_buckets", e.vocab_buckets},
          {"context_layers", e.context_layers}};
}

inline std::string counts_string(const std::optional<SourceCounts>& c) {
  if (!c) return "";
  return std::to_string(c->train) + " " + std::to_string(c->dev) + " " +
         std::to_string(c->test);
}

}  // namespace detail

// Rejects unknown sections and keys; every remaining key is consumed below.
inline void check_keys(const ptree& tree) {
  for (const auto& [section, node] : tree) {
    auto it = known_keys().find(section);
    if (it == known_keys().end())
      throw ConfigError("unknown config section [" + section + "]");
    if (node.empty() && !node.data().empty())
      throw ConfigError("key '" + section + "' lies outside any section");
    for (const auto& [key, value] : node) {
      if (!it->second.contains(key))
        throw ConfigError("unknown config key '" + section + "." + key + "'");
      if (!value.empty())
        throw ConfigError("config key '" + section + "." + key +
                          "' is nested");
    }
  }
}

// `section.key=value`
inline void apply_override(ptree& tree, const std::string& text) {
  const auto pos = text.find('=');
  const std::string key = detail::trim(text.substr(0, pos));
  const auto dot = key.find('.');
  if (pos == std::string::npos || dot == std::string::npos || dot == 0 ||
      dot + 1 == key.size() || key.find('.', dot + 1) != std::string::npos)
    throw ConfigError("override '" + text +
                      "' is not of the form section.key=value");
  tree.put(key, detail::trim(text.substr(pos + 1)));
}

inline PipelineConfig config_from_tree(const ptree& tree, const fs::path& path) {
  check_keys(tree);
  PipelineConfig c;
  c.path = path;
  c.tree = tree;
  const fs::path base = path.parent_path().empty()
                            ? fs::current_path()
                            : fs::absolute(path.parent_path());
  using detail::Section;

  const Section run(tree, "run", base);
  run.get("seed", c.run.seed);
  c.run.workdir = base / "work";
  run.get_path("workdir", c.run.workdir);
  if (c.run.workdir.empty()) throw ConfigError("run.workdir is empty");
  run.get("threads", c.run.threads);

  const Section data(tree, "data", base);
  data.get_path("corpus", c.data.corpus);
  data.get_path("annotated_train", c.data.annotated_train);
  data.get_path("annotated_dev", c.data.annotated_dev);
  data.get_path("manifest", c.data.manifest);
  data.get_with("split_mode", [&](const std::string& v) {
    c.data.split_mode = parse_split_mode(v);
    return 0;
  });
  data.get_with("conspiracy_sources", [&](const std::string& v) {
    c.data.conspiracy_sources = detail::parse_source_counts(v);
    return 0;
  });
  data.get_with("benign_sources", [&](const std::string& v) {
    c.data.benign_sources = detail::parse_source_counts(v);
    return 0;
  });
  data.get("random_train", c.data.random_train);
  data.get("random_dev", c.data.random_dev);
  data.get_path("fixed_test", c.data.fixed_test);
  data.get("fixture_docs_per_class", c.data.fixture_docs_per_class);
  data.get("fixture_annotated", c.data.fixture_annotated);

  // Stage seeds default to the run seed.
  c.erg.seed = c.distill.seed = c.classifier.seed = c.run.seed;

  const Section erg(tree, "erg", base);
  detail::read_encoder(erg, c.erg.encoder);
  erg.get("head_hidden", c.erg.head_hidden);
  erg.get("epochs", c.erg.epochs);
  erg.get("lr", c.erg.lr);
  erg.get("seed", c.erg.seed);
  erg.get_with("max_pair_distance", [&](const std::string& v) {
    if (v.empty())
      c.erg.max_pair_distance.reset();
    else
      c.erg.max_pair_distance = detail::to_unsigned(v);
    return 0;
  });
  if (c.erg.encoder.bilstm)
    throw ConfigError("the graph builder encoder carries no bilstm layer");

  const Section distill(tree, "distill", base);
  detail::read_encoder(distill, c.distill.encoder);
  c.distill.encoder.bilstm = true;
  distill.get("head_hidden", c.distill.head_hidden);
  distill.get("epochs", c.distill.epochs);
  distill.get("lr", c.distill.lr);
  distill.get("seed", c.distill.seed);
  distill.get("pair_subsample", c.distill.pair_subsample);
  if (c.distill.pair_subsample <= 0.0 || c.distill.pair_subsample > 1.0)
    throw ConfigError("distill.pair_subsample must lie in (0, 1]");

  const Section cls(tree, "classifier", base);
  cls.get_with("variant", [&](const std::string& v) {
    c.classifier.variant = parse_variant(v);
    return 0;
  });
  cls.get("layers", c.classifier.layers);
  cls.get("hidden_width", c.classifier.hidden_width);
  cls.get("residuals", c.classifier.residuals);
  cls.get("epochs", c.classifier.epochs);
  cls.get("lr", c.classifier.lr);
  cls.get("seed", c.classifier.seed);
  cls.get_with("ablate", [&](const std::string& v) {
    c.classifier.ablate.clear();
    for (const std::string& a : detail::split_list(v, " ,"))
      c.classifier.ablate.insert(parse_ablation(a));
    return 0;
  });
  detail::read_encoder(cls, c.classifier.encoder);
  c.classifier.encoder.bilstm = true;
  c.distill.components = distill_components(c.classifier.ablate);
  validate(c.classifier);

  const Section eval(tree, "eval", base);
  eval.get_path("predictions", c.eval.predictions);
  eval.get_path("input", c.eval.input);
  return c;
}

inline ptree read_config_tree(const fs::path& path,
                              const std::vector<std::string>& overrides) {
  if (!fs::exists(path))
    throw ConfigError("config file " + path.string() + " does not exist");
  ptree tree;
  try {
    boost::property_tree::read_ini(path.string(), tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError(std::string("cannot parse config: ") + e.what());
  }
  for (const std::string& o : overrides) apply_override(tree, o);
  return tree;
}

inline PipelineConfig load_config(const fs::path& path,
                                  const std::vector<std::string>& overrides = {}) {
  return config_from_tree(read_config_tree(path, overrides), path);
}

// Effective values, defaults included.
inline nlohmann::json to_json(const PipelineConfig& c) {
  nlohmann::json ablate = nlohmann::json::array();
  for (Ablation a : kAblations)
    if (c.classifier.ablate.contains(a)) ablate.push_back(std::string(to_string(a)));
  nlohmann::json erg = detail::encoder_json(c.erg.encoder);
  erg.update({{"head_hidden", c.erg.head_hidden},
              {"epochs", c.erg.epochs},
              {"lr", c.erg.lr},
              {"seed", c.erg.seed},
              {"max_pair_distance",
               c.erg.max_pair_distance ? nlohmann::json(*c.erg.max_pair_distance)
                                       : nlohmann::json(nullptr)}});
  nlohmann::json distill = detail::encoder_json(c.distill.encoder);
  distill.update({{"head_hidden", c.distill.head_hidden},
                  {"epochs", c.distill.epochs},
                  {"lr", c.distill.lr},
                  {"seed", c.distill.seed},
                  {"pair_subsample", c.distill.pair_subsample}});
  nlohmann::json cls = detail::encoder_json(c.classifier.encoder);
  cls.update({{"variant", std::string(to_string(c.classifier.variant))},
              {"layers", c.classifier.layers},
              {"hidden_width", c.classifier.hidden_width},
              {"residuals", c.classifier.residuals},
              {"epochs", c.classifier.epochs},
              {"lr", c.classifier.lr},
              {"seed", c.classifier.seed},
              {"ablate", ablate}});
  return {
      {"run",
       {{"seed", c.run.seed},
        {"workdir", c.run.workdir.string()},
        {"threads", c.run.threads}}},
      {"data",
       {{"corpus", c.data.corpus.string()},
        {"annotated_train", c.data.annotated_train.string()},
        {"annotated_dev", c.data.annotated_dev.string()},
        {"manifest", c.data.manifest.string()},
        {"split_mode", std::string(to_string(c.data.split_mode))},
        {"conspiracy_sources", detail::counts_string(c.data.conspiracy_sources)},
        {"benign_sources", detail::counts_string(c.data.benign_sources)},
        {"random_train", c.data.random_train},
        {"random_dev", c.data.random_dev},
        {"fixed_test", c.data.fixed_test.string()},
        {"fixture_docs_per_class", c.data.fixture_docs_per_class},
        {"fixture_annotated", c.data.fixture_annotated}}},
      {"erg", erg},
      {"distill", distill},
      {"classifier", cls},
      {"eval",
       {{"predictions", c.eval.predictions.string()},
        {"input", c.eval.input.string()}}}};
}

// ---------------------------------------------------------------------------
// Ablation suite

struct DerivedConfig {
  std::string tag;
  ptree tree;
};

inline std::string ablate_value(const std::set<Ablation>& ablate) {
  std::string out;
  for (Ablation a : kAblations) {
    if (!ablate.contains(a)) continue;
    if (!out.empty()) out += ",";
    out += to_string(a);
  }
  return out;
}

// full, one row per removed component, then the remaining variants.
inline std::vector<DerivedConfig> emit_ablation_suite(const ptree& base) {
  std::vector<DerivedConfig> out;
  auto derive = [&](const std::string& tag, Variant v,
                    const std::set<Ablation>& ablate) {
    ptree t = base;
    t.put("classifier.variant", std::string(to_string(v)));
    t.put("classifier.ablate", ablate_value(ablate));
    out.push_back({tag, std::move(t)});
  };
  derive("full", Variant::kFull, {});
  for (Ablation a : kAblations)
    derive("no-" + std::string(to_string(a)), Variant::kFull, {a});
  for (Variant v : {Variant::kBaseline, Variant::kFeatures, Variant::kSoft,
                    Variant::kHard})
    derive(std::string(to_string(v)), v, {});
  return out;
}

// ---------------------------------------------------------------------------
// Artifact layout

inline std::string ablation_suffix(const std::set<Ablation>& ablate) {
  std::string out;
  for (Ablation a : kAblations)
    if (ablate.contains(a)) out += "-no-" + std::string(to_string(a));
  return out;
}

struct Layout {
  fs::path workdir;
  fs::path cache;

  explicit Layout(const PipelineConfig& c) : workdir(c.run.workdir) {
    const char* env = std::getenv("ERG_CACHE_DIR");
    cache = env && *env ? fs::path(env) : workdir / "cache";
  }

  fs::path corpus() const { return workdir / "corpus.jsonl"; }
  fs::path manifest() const { return workdir / "manifest.json"; }
  fs::path reports() const { return workdir / "reports"; }
  fs::path erg() const { return cache / "erg.ckpt"; }
  fs::path graphs() const { return cache / "graphs.jsonl"; }
  fs::path distill(const std::set<Ablation>& ablate) const {
    return cache / ("distill" + distill_tag(ablate) + ".ckpt");
  }
  fs::path classifier(const ClassifierConfig& c) const {
    return cache / ("classifier" + classifier_tag(c) + ".ckpt");
  }
  fs::path predictions(const std::string& tag) const {
    return workdir / ("predictions" + tag + ".jsonl");
  }

  // Only the distillation terms matter for the encoder.
  static std::string distill_tag(const std::set<Ablation>& ablate) {
    return ablation_suffix(ablate);
  }
  static std::string classifier_tag(const ClassifierConfig& c) {
    return "-" + std::string(to_string(c.variant)) + ablation_suffix(c.ablate);
  }
};

inline void require_artifact(const fs::path& p, std::string_view stage) {
  if (!fs::exists(p))
    throw PrerequisiteError("missing " + p.string() + "; run `erg " +
                            std::string(stage) + "` first");
}

inline void require_input(const fs::path& p, std::string_view key) {
  if (p.empty())
    throw ConfigError(std::string(key) + " is not set in the config");
  if (!fs::exists(p))
    throw PrerequisiteError(std::string(key) + " names " + p.string() +
                            ", which does not exist");
}

// ---------------------------------------------------------------------------
// Stage helpers

inline Corpus load_tokenized(const fs::path& path) {
  Corpus c = load_labeled_corpus(path);
  const SimpleTokenizer tok;
  for (Document& d : c.documents) {
    d = tokenize(std::move(d), tok);
    check_token_spans(d);
  }
  return c;
}

inline void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw PrerequisiteError("cannot write " + path.string());
  out << text;
}

inline void write_graphs(const fs::path& path,
                         std::vector<EventRelationGraph> graphs) {
  std::sort(graphs.begin(), graphs.end(),
            [](const auto& a, const auto& b) { return a.doc_id < b.doc_id; });
  std::string text;
  for (const auto& g : graphs) text += serialize_graph(g) + "\n";
  write_text(path, text);
}

inline std::map<std::string, EventRelationGraph> load_graphs(
    const fs::path& path) {
  std::ifstream in = open_input(path);
  std::map<std::string, EventRelationGraph> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      EventRelationGraph g = deserialize_graph(line);
      const std::string id = g.doc_id;
      out.emplace(id, std::move(g));
    } catch (const ParseError& e) {
      throw ParseError(e.what(), line_no);
    }
  }
  return out;
}

// Calls fn(state, k) for k in [0, n) on `threads` workers, each with its own
// state from init(). Results keep index order; the first failing index wins.
template <class State, class T>
std::vector<T> parallel_map(std::size_t n, std::size_t threads,
                            const std::function<State()>& init,
                            const std::function<T(State&, std::size_t)>& fn) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::max<std::size_t>(1, std::min(threads, n));
  std::vector<T> out(n);
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    std::optional<State> state;
    try {
      state.emplace(init());
    } catch (...) {
      const std::size_t k = next.fetch_add(n);
      if (k < n) errors[k] = std::current_exception();
      return;
    }
    for (std::size_t k = next++; k < n; k = next++) {
      try {
        out[k] = fn(*state, k);
      } catch (...) {
        errors[k] = std::current_exception();
      }
    }
  };
  if (threads == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t k = 0; k < threads; ++k) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

inline nlohmann::json table_json(const SplitTable& t) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [label, c] : t.counts)
    j[std::string(to_string(label))] = {
        {"train", c[0]}, {"dev", c[1]}, {"test", c[2]}};
  return j;
}

inline std::string fmt2(double x) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(2) << x;
  return s.str();
}

inline nlohmann::json profile_json(const RelationProfile& p) {
  return {{"singleton", metrics::round2(p.singleton_pct)},
          {"temporal", metrics::round2(p.temporal_pct)},
          {"causal", metrics::round2(p.causal_pct)},
          {"subevent", metrics::round2(p.subevent_pct)}};
}

// Documents of one split, in corpus order.
inline std::vector<const Document*> split_docs(const Corpus& corpus,
                                               const SplitManifest& m,
                                               Split s) {
  std::vector<const Document*> out;
  for (const Document& d : corpus.documents) {
    auto it = m.assignment.find(d.doc_id);
    if (it != m.assignment.end() && it->second == s) out.push_back(&d);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Stages

struct StageResult {
  std::string tag;  // report file suffix
  nlohmann::json metrics = nlohmann::json::object();
  nlohmann::json inputs = nlohmann::json::object();     // path -> blob hash
  nlohmann::json artifacts = nlohmann::json::object();  // path -> blob hash
  std::string summary;                                  // human-readable
};

inline void add_input(StageResult& r, const fs::path& p) {
  r.inputs[p.string()] = file_hash(p);
}

inline void add_artifact(StageResult& r, const fs::path& p) {
  r.artifacts[p.string()] = file_hash(p);
}

struct Context {
  const PipelineConfig& config;
  Layout layout;
  std::ostream& log;
};

inline StageResult generate_fixtures(Context& ctx) {
  const PipelineConfig& c = ctx.config;
  if (c.data.corpus.empty() || c.data.annotated_train.empty())
    throw ConfigError("generate-fixtures writes data.corpus and "
                      "data.annotated_train; set both");
  StageResult r;
  const LabeledFixture fx = synthetic_labeled_corpus(
      c.data.fixture_docs_per_class, c.run.seed, 2, false);
  std::ostringstream corpus;
  write_labeled_corpus(corpus, fx.corpus);
  write_text(c.data.corpus, corpus.str());
  add_artifact(r, c.data.corpus);

  SyntheticOptions opt;
  opt.min_clauses = 3;
  opt.max_clauses = 5;
  auto write_annotated = [&](const fs::path& p, std::size_t n,
                             std::uint64_t seed, const std::string& prefix) {
    std::ostringstream s;
    write_annotated_corpus(s, synthetic_annotated_corpus(n, seed, opt, prefix));
    write_text(p, s.str());
    add_artifact(r, p);
  };
  write_annotated(c.data.annotated_train, c.data.fixture_annotated,
                  c.run.seed + 1, "ann");
  if (!c.data.annotated_dev.empty())
    write_annotated(c.data.annotated_dev,
                    std::max<std::size_t>(1, c.data.fixture_annotated / 2),
                    c.run.seed + 2, "dev");
  r.metrics = {{"labeled_documents", fx.corpus.size()},
               {"annotated_train", c.data.fixture_annotated}};
  r.summary = "fixtures: " + std::to_string(fx.corpus.size()) +
              " labeled articles, " + std::to_string(c.data.fixture_annotated) +
              " annotated training documents\n";
  return r;
}

inline StageResult ingest(Context& ctx) {
  const PipelineConfig& c = ctx.config;
  require_input(c.data.corpus, "data.corpus");
  StageResult r;
  add_input(r, c.data.corpus);
  const Corpus corpus = load_tokenized(c.data.corpus);
  std::ostringstream out;
  write_labeled_corpus(out, corpus);
  write_text(ctx.layout.corpus(), out.str());
  add_artifact(r, ctx.layout.corpus());

  std::map<std::string, std::size_t> per_label;
  std::set<std::string> sources;
  std::size_t tokens = 0;
  for (const Document& d : corpus.documents) {
    ++per_label[d.label ? std::string(to_string(*d.label)) : "unlabeled"];
    sources.insert(d.media_source);
    tokens += d.tokens.size();
  }
  r.metrics = {{"documents", corpus.size()},
               {"per_label", per_label},
               {"media_sources", sources.size()},
               {"tokens", tokens}};
  std::ostringstream s;
  s << "ingest: " << corpus.size() << " documents, " << sources.size()
    << " media sources, " << tokens << " tokens\n";
  r.summary = s.str();
  return r;
}

inline std::set<std::string> read_id_list(const fs::path& p) {
  std::ifstream in = open_input(p);
  std::set<std::string> ids;
  std::string line;
  while (std::getline(in, line)) {
    line = detail::trim(line);
    if (!line.empty()) ids.insert(line);
  }
  return ids;
}

inline StageResult split(Context& ctx) {
  const PipelineConfig& c = ctx.config;
  require_artifact(ctx.layout.corpus(), "ingest");
  StageResult r;
  add_input(r, ctx.layout.corpus());
  const Corpus corpus = load_labeled_corpus(ctx.layout.corpus());
  SplitManifest m;
  if (!c.data.manifest.empty()) {
    require_input(c.data.manifest, "data.manifest");
    add_input(r, c.data.manifest);
    m = load_manifest(c.data.manifest);
  } else if (c.data.split_mode == SplitMode::kMediaSource) {
    if (!c.data.conspiracy_sources || !c.data.benign_sources)
      throw ConfigError(
          "media_source split needs data.conspiracy_sources and "
          "data.benign_sources");
    m = make_media_source_split(corpus,
                                {{Label::kConspiracy, *c.data.conspiracy_sources},
                                 {Label::kBenign, *c.data.benign_sources}},
                                c.run.seed);
  } else {
    require_input(c.data.fixed_test, "data.fixed_test");
    add_input(r, c.data.fixed_test);
    m = make_random_split(corpus, c.data.random_train, c.data.random_dev,
                          read_id_list(c.data.fixed_test), c.run.seed);
  }
  check_manifest(corpus, m);
  write_text(ctx.layout.manifest(), to_json(m).dump(1) + "\n");
  add_artifact(r, ctx.layout.manifest());

  const SplitTable articles = count_articles(corpus, m);
  const SplitTable sources = count_sources(corpus, m);
  r.metrics = {{"mode", std::string(to_string(m.mode))},
               {"articles", table_json(articles)},
               {"sources", table_json(sources)}};
  std::ostringstream s;
  s << "split (" << to_string(m.mode) << ")\n"
    << "class        | train articles/sources | dev | test\n";
  for (Label l : {Label::kConspiracy, Label::kBenign}) {
    auto a = articles.counts.find(l);
    auto o = sources.counts.find(l);
    if (a == articles.counts.end()) continue;
    s << std::left << std::setw(12) << to_string(l) << " | ";
    for (std::size_t k = 0; k < 3; ++k)
      s << a->second[k] << "/" << o->second[k] << (k < 2 ? " | " : "\n");
  }
  r.summary = s.str();
  return r;
}

inline StageResult train_erg_stage(Context& ctx) {
  const PipelineConfig& c = ctx.config;
  require_input(c.data.annotated_train, "data.annotated_train");
  StageResult r;
  add_input(r, c.data.annotated_train);
  const auto train = load_annotated_corpus(c.data.annotated_train);
  std::vector<AnnotatedDocument> dev;
  if (!c.data.annotated_dev.empty()) {
    require_input(c.data.annotated_dev, "data.annotated_dev");
    add_input(r, c.data.annotated_dev);
    dev = load_annotated_corpus(c.data.annotated_dev);
  }
  ErgTrainingLog log;
  ErgModels m = train_erg(train, dev, c.erg, &log);
  fs::create_directories(ctx.layout.cache);
  save_erg(ctx.layout.erg(), m);
  add_artifact(r, ctx.layout.erg());
  r.metrics = log.to_json();
  r.metrics["train_documents"] = train.size();
  r.metrics["dev_documents"] = dev.size();
  std::ostringstream s;
  s << "train-erg: loss " << log.initial_loss << " -> " << log.final_loss
    << " over " << train.size() << " documents\n";
  if (log.dev) {
    s << "dev        | P      | R      | F1\n";
    auto row = [&](const char* name, const metrics::PRF& p) {
      s << std::left << std::setw(10) << name << " | " << fmt2(p.precision)
        << " | " << fmt2(p.recall) << " | " << fmt2(p.f1) << "\n";
    };
    row("event", log.dev->event_macro);
    row("temporal", log.dev->relation_macro[0]);
    row("causal", log.dev->relation_macro[1]);
    row("subevent", log.dev->relation_macro[2]);
  }
  r.summary = s.str();
  return r;
}

inline StageResult build_graphs(Context& ctx) {
  const PipelineConfig& c = ctx.config;
  require_artifact(ctx.layout.corpus(), "ingest");
  require_artifact(ctx.layout.erg(), "train-erg");
  StageResult r;
  add_input(r, ctx.layout.corpus());
  add_input(r, ctx.layout.erg());
  const Corpus corpus = load_tokenized(ctx.layout.corpus());
  const fs::path ckpt = ctx.layout.erg();
  std::vector<EventRelationGraph> graphs =
      parallel_map<ErgModels, EventRelationGraph>(
          corpus.size(), c.run.threads, [&] { return load_erg(ckpt); },
          [&](ErgModels& m, std::size_t k) {
            return build_graph(corpus.documents[k], m);
          });
  std::size_t events = 0, empty = 0;
  std::map<std::string, std::size_t> edges;
  for (EdgeType t : kEdgeTypes) edges[std::string(to_string(t))] = 0;
  for (const auto& g : graphs) {
    events += g.events.size();
    empty += g.events.empty();
    for (const HardEdge& e : g.hard_edges) ++edges[std::string(to_string(e.type))];
  }
  write_graphs(ctx.layout.graphs(), std::move(graphs));
  add_artifact(r, ctx.layout.graphs());
  r.metrics = {{"documents", corpus.size()},
               {"events", events},
               {"documents_without_events", empty},
               {"hard_edges", edges}};
  std::ostringstream s;
  s << "build-graphs: " << corpus.size() << " documents, " << events
    << " events\n";
  r.summary = s.str();
  return r;
}

inline StageResult profile(Context& ctx) {
  require_artifact(ctx.layout.corpus(), "ingest");
  require_artifact(ctx.layout.graphs(), "build-graphs");
  StageResult r;
  add_input(r, ctx.layout.corpus());
  add_input(r, ctx.layout.graphs());
  const Corpus corpus = load_labeled_corpus(ctx.layout.corpus());
  const auto graphs = load_graphs(ctx.layout.graphs());
  std::map<std::string, ProfileCounts> counts;
  for (const Document& d : corpus.documents) {
    auto it = graphs.find(d.doc_id);
    if (it == graphs.end())
      throw PrerequisiteError("no graph for '" + d.doc_id +
                              "'; rerun `erg build-graphs`");
    const ProfileCounts pc = profile_counts(it->second);
    counts["all"] += pc;
    if (d.label) counts[std::string(to_string(*d.label))] += pc;
  }
  std::ostringstream s;
  s << "profile (% of events)\n"
    << "class        | singleton | temporal | causal | subevent\n";
  for (const std::string name : {"conspiracy", "benign", "all"}) {
    auto it = counts.find(name);
    if (it == counts.end() || it->second.events == 0) {
      r.metrics[name] = nullptr;
      continue;
    }
    const RelationProfile p = to_profile(it->second);
    r.metrics[name] = profile_json(p);
    r.metrics[name]["events"] = it->second.events;
    s << std::left << std::setw(12) << name << " | " << fmt2(p.singleton_pct)
      << " | " << fmt2(p.temporal_pct) << " | " << fmt2(p.causal_pct) << " | "
      << fmt2(p.subevent_pct) << "\n";
  }
  r.summary = s.str();
  return r;
}

struct SplitData {
  Corpus corpus;
  SplitManifest manifest;
  std::map<std::string, EventRelationGraph> graphs;
};

inline SplitData load_split_data(Context& ctx, StageResult& r,
                                 bool need_graphs) {
  require_artifact(ctx.layout.corpus(), "ingest");
  require_artifact(ctx.layout.manifest(), "split");
  SplitData d;
  add_input(r, ctx.layout.corpus());
  add_input(r, ctx.layout.manifest());
  d.corpus = load_tokenized(ctx.layout.corpus());
  d.manifest = load_manifest(ctx.layout.manifest());
  check_manifest(d.corpus, d.manifest);
  if (need_graphs) {
    require_artifact(ctx.layout.graphs(), "build-graphs");
    add_input(r, ctx.layout.graphs());
    d.graphs = load_graphs(ctx.layout.graphs());
  }
  return d;
}

inline StageResult distill(Context& ctx) {
  const PipelineConfig& c = ctx.config;
  StageResult r;
  r.tag = Layout::distill_tag(c.classifier.ablate);
  const SplitData d = load_split_data(ctx, r, true);
  std::vector<Document> docs;
  for (const Document* doc : split_docs(d.corpus, d.manifest, Split::kTrain))
    docs.push_back(*doc);
  DistillLog log;
  EventAwareEncoder m = train_event_aware_encoder(docs, d.graphs, c.distill, &log);
  const fs::path out = ctx.layout.distill(c.classifier.ablate);
  fs::create_directories(ctx.layout.cache);
  save_event_aware(out, m);
  add_artifact(r, out);
  r.metrics = log.to_json();
  r.metrics["documents"] = docs.size();
  std::ostringstream s;
  s << "distill: Loss_soft " << log.initial_loss << " -> " << log.final_loss
    << " over " << docs.size() << " documents\n";
  r.summary = s.str();
  return r;
}

struct ClassifierInputs {
  SplitData data;
  std::optional<EventAwareEncoder> distilled;
};

inline std::vector<ClassifierExample> examples_for(const SplitData& d,
                                                   Split s, bool with_graphs) {
  std::vector<ClassifierExample> out;
  for (const Document* doc : split_docs(d.corpus, d.manifest, s)) {
    if (!doc->label)
      throw ValidationError("document '" + doc->doc_id + "' has no label");
    const EventRelationGraph* g = nullptr;
    if (with_graphs) {
      auto it = d.graphs.find(doc->doc_id);
      if (it == d.graphs.end())
        throw PrerequisiteError("no graph for '" + doc->doc_id +
                                "'; rerun `erg build-graphs`");
      g = &it->second;
    }
    out.push_back({doc, g, *doc->label});
  }
  return out;
}

inline std::string prf_row(const std::string& name,
                           const ClassifierEvaluation& e) {
  std::ostringstream s;
  s << std::left << std::setw(24) << name << " | "
    << fmt2(e.conspiracy.precision) << " | " << fmt2(e.conspiracy.recall)
    << " | " << fmt2(e.conspiracy.f1) << " | " << fmt2(e.macro.precision)
    << " | " << fmt2(e.macro.recall) << " | " << fmt2(e.macro.f1) << "\n";
  return s.str();
}

inline const char* kPrfHeader =
    "model                    | P     | R     | F1    | macro P | macro R | "
    "macro F1\n";

inline StageResult train_classifier_stage(Context& ctx) {
  const PipelineConfig& c = ctx.config;
  StageResult r;
  r.tag = Layout::classifier_tag(c.classifier);
  const bool graphs = needs_graphs(c.classifier.variant);
  const SplitData d = load_split_data(ctx, r, graphs);
  std::optional<EventAwareEncoder> distilled;
  if (uses_distilled_encoder(c.classifier.variant)) {
    const fs::path p = ctx.layout.distill(c.classifier.ablate);
    require_artifact(p, "distill");
    add_input(r, p);
    distilled = load_event_aware(p);
  }
  const auto train = examples_for(d, Split::kTrain, graphs);
  const auto dev = examples_for(d, Split::kDev, graphs);
  ClassifierLog log;
  ConspiracyClassifier m = train_classifier(
      train, dev, c.classifier, distilled ? &*distilled : nullptr, &log);
  const fs::path out = ctx.layout.classifier(c.classifier);
  fs::create_directories(ctx.layout.cache);
  save_classifier(out, m);
  add_artifact(r, out);
  const ClassifierEvaluation on_train = evaluate_classifier(m, train);
  r.metrics = {{"log", log.to_json()},
               {"train", to_json(on_train)},
               {"train_documents", train.size()},
               {"dev_documents", dev.size()}};
  std::string table = std::string("train-classifier\n") + kPrfHeader +
                      prf_row(std::string(to_string(c.classifier.variant)) +
                                  " (train)",
                              on_train);
  if (!dev.empty()) {
    const ClassifierEvaluation on_dev = evaluate_classifier(m, dev);
    r.metrics["dev"] = to_json(on_dev);
    table += prf_row(std::string(to_string(c.classifier.variant)) + " (dev)",
                     on_dev);
  }
  r.summary = table;
  return r;
}

struct PredictionRecord {
  std::string doc_id;
  Label label = Label::kBenign;
  std::optional<double> probability;
};

inline std::string predictions_text(std::vector<PredictionRecord> preds) {
  std::sort(preds.begin(), preds.end(),
            [](const auto& a, const auto& b) { return a.doc_id < b.doc_id; });
  std::string out;
  for (const auto& p : preds) {
    nlohmann::json j{{"doc_id", p.doc_id},
                     {"label", std::string(to_string(p.label))}};
    if (p.probability) j["probability"] = *p.probability;
    out += j.dump() + "\n";
  }
  return out;
}

inline std::map<std::string, Label> load_predictions(const fs::path& p) {
  std::ifstream in = open_input(p);
  std::map<std::string, Label> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      const std::string id = j.at("doc_id").get<std::string>();
      if (!out.emplace(id, parse_label(j.at("label").get<std::string>())).second)
        throw ValidationError("duplicate prediction for '" + id + "'");
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(std::string("bad prediction record: ") + e.what(),
                       line_no);
    }
  }
  return out;
}

inline StageResult evaluate(Context& ctx) {
  const PipelineConfig& c = ctx.config;
  StageResult r;
  std::vector<Label> pred, gold;
  std::string name;
  if (!c.eval.predictions.empty()) {
    // Score a predictions file against the gold labels of the test split.
    require_input(c.eval.predictions, "eval.predictions");
    r.tag = "-file";
    const SplitData d = load_split_data(ctx, r, false);
    add_input(r, c.eval.predictions);
    const auto preds = load_predictions(c.eval.predictions);
    const auto test = split_docs(d.corpus, d.manifest, Split::kTest);
    if (preds.size() != test.size())
      throw ValidationError(
          "predictions cover " + std::to_string(preds.size()) +
          " documents, the test split has " + std::to_string(test.size()));
    for (const Document* doc : test) {
      auto it = preds.find(doc->doc_id);
      if (it == preds.end())
        throw ValidationError("no prediction for test document '" +
                              doc->doc_id + "'");
      if (!doc->label)
        throw ValidationError("test document '" + doc->doc_id +
                              "' has no label");
      pred.push_back(it->second);
      gold.push_back(*doc->label);
    }
    name = c.eval.predictions.stem().string();
  } else {
    r.tag = Layout::classifier_tag(c.classifier);
    const bool graphs = needs_graphs(c.classifier.variant);
    const SplitData d = load_split_data(ctx, r, graphs);
    const fs::path ckpt = ctx.layout.classifier(c.classifier);
    require_artifact(ckpt, "train-classifier");
    add_input(r, ckpt);
    ConspiracyClassifier m = load_classifier(ckpt);
    const auto test = examples_for(d, Split::kTest, graphs);
    std::vector<PredictionRecord> records;
    for (const ClassifierExample& ex : test) {
      const double p = m.conspiracy_probability(*ex.doc, ex.graph);
      pred.push_back(decide(p));
      gold.push_back(ex.label);
      records.push_back({ex.doc->doc_id, decide(p), p});
    }
    const fs::path out = ctx.layout.predictions(r.tag);
    write_text(out, predictions_text(std::move(records)));
    add_artifact(r, out);
    name = std::string(to_string(c.classifier.variant)) +
           ablation_suffix(c.classifier.ablate);
  }
  if (gold.empty()) throw ValidationError("the test split is empty");
  const ClassifierEvaluation e = score_labels(pred, gold);
  r.metrics = to_json(e);
  r.summary = std::string("evaluate (test)\n") + kPrfHeader + prf_row(name, e);
  return r;
}

struct Predictor {
  ErgModels erg;
  ConspiracyClassifier classifier;
};

inline StageResult predict_stage(Context& ctx) {
  const PipelineConfig& c = ctx.config;
  require_input(c.eval.input, "eval.input");
  require_artifact(ctx.layout.erg(), "train-erg");
  const fs::path ckpt = ctx.layout.classifier(c.classifier);
  require_artifact(ckpt, "train-classifier");
  StageResult r;
  r.tag = Layout::classifier_tag(c.classifier);
  add_input(r, c.eval.input);
  add_input(r, ctx.layout.erg());
  add_input(r, ckpt);
  const Corpus corpus = load_tokenized(c.eval.input);
  const fs::path erg_ckpt = ctx.layout.erg();
  std::vector<PredictionRecord> records =
      parallel_map<Predictor, PredictionRecord>(
          corpus.size(), c.run.threads,
          [&] { return Predictor{load_erg(erg_ckpt), load_classifier(ckpt)}; },
          [&](Predictor& p, std::size_t k) {
            const Document& doc = corpus.documents[k];
            const Prediction out = predict(doc, p.erg, p.classifier);
            return PredictionRecord{doc.doc_id, out.label, out.probability};
          });
  std::vector<Label> pred, gold;
  std::map<std::string, std::size_t> per_label;
  for (std::size_t k = 0; k < corpus.size(); ++k) {
    ++per_label[std::string(to_string(records[k].label))];
    if (corpus.documents[k].label) {
      pred.push_back(records[k].label);
      gold.push_back(*corpus.documents[k].label);
    }
  }
  const fs::path out = ctx.layout.predictions("");
  write_text(out, predictions_text(std::move(records)));
  add_artifact(r, out);
  r.metrics = {{"documents", corpus.size()}, {"predicted", per_label}};
  std::ostringstream s;
  s << "predict: " << corpus.size() << " documents -> " << out.string() << "\n";
  if (!gold.empty() && gold.size() == corpus.size()) {
    const ClassifierEvaluation e = score_labels(pred, gold);
    r.metrics["evaluation"] = to_json(e);
    s << kPrfHeader << prf_row("input labels", e);
  }
  r.summary = s.str();
  return r;
}

inline StageResult ablation_suite(Context& ctx) {
  const PipelineConfig& c = ctx.config;
  StageResult r;
  const fs::path dir = c.path.parent_path();
  const std::string stem = c.path.stem().string();
  nlohmann::json configs = nlohmann::json::array();
  std::ostringstream s;
  s << "ablation-suite\n";
  for (const DerivedConfig& d : emit_ablation_suite(c.tree)) {
    config_from_tree(d.tree, c.path);  // must stay valid
    const fs::path out = dir / (stem + "." + d.tag + ".ini");
    std::ostringstream text;
    boost::property_tree::write_ini(text, d.tree);
    write_text(out, text.str());
    add_artifact(r, out);
    configs.push_back({{"tag", d.tag}, {"path", out.string()}});
    s << "  " << d.tag << ": " << out.string() << "\n";
  }
  r.metrics = {{"configs", configs}};
  r.summary = s.str();
  return r;
}

// ---------------------------------------------------------------------------
// Driver

inline const std::vector<std::string>& pipeline_stages() {
  static const std::vector<std::string> s{
      "ingest",  "split",            "train-erg", "build-graphs",
      "profile", "distill",          "train-classifier", "evaluate"};
  return s;
}

inline const std::vector<std::string>& commands() {
  static const std::vector<std::string> c{
      "ingest",   "split",            "train-erg", "build-graphs",
      "profile",  "distill",          "train-classifier", "evaluate",
      "predict",  "generate-fixtures", "ablation-suite", "all"};
  return c;
}

inline StageResult run_stage(const std::string& command, Context& ctx) {
  if (command == "ingest") return ingest(ctx);
  if (command == "split") return split(ctx);
  if (command == "train-erg") return train_erg_stage(ctx);
  if (command == "build-graphs") return build_graphs(ctx);
  if (command == "profile") return profile(ctx);
  if (command == "distill") return distill(ctx);
  if (command == "train-classifier") return train_classifier_stage(ctx);
  if (command == "evaluate") return evaluate(ctx);
  if (command == "predict") return predict_stage(ctx);
  if (command == "generate-fixtures") return generate_fixtures(ctx);
  if (command == "ablation-suite") return ablation_suite(ctx);
  throw ConfigError("unknown command '" + command + "'");
}

// Everything but "timing" is a function of inputs, config and seed.
inline nlohmann::json make_report(const std::string& command,
                                  const PipelineConfig& config,
                                  const StageResult& r, double seconds) {
  return {{"command", command},
          {"config", to_json(config)},
          {"inputs", r.inputs},
          {"metrics", r.metrics},
          {"artifacts", r.artifacts},
          {"timing", {{"seconds", seconds}}}};
}

inline fs::path write_report(const Layout& layout, const std::string& name,
                             const nlohmann::json& report) {
  const fs::path p = layout.reports() / (name + ".json");
  write_text(p, report.dump(2) + "\n");
  return p;
}

inline double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
      .count();
}

// Runs one command; returns the report.
inline nlohmann::json run_command(const std::string& command,
                                  const PipelineConfig& config,
                                  std::ostream& out) {
  Context ctx{config, Layout(config), out};
  fs::create_directories(ctx.layout.workdir);
  if (command != "all") {
    const auto t0 = std::chrono::steady_clock::now();
    const StageResult r = run_stage(command, ctx);
    const nlohmann::json report =
        make_report(command, config, r, seconds_since(t0));
    write_report(ctx.layout, command + r.tag, report);
    out << r.summary;
    return report;
  }
  nlohmann::json stages = nlohmann::json::object();
  nlohmann::json timing = nlohmann::json::object();
  nlohmann::json artifacts = nlohmann::json::object();
  const auto t_all = std::chrono::steady_clock::now();
  for (const std::string& stage : pipeline_stages()) {
    if (stage == "distill" &&
        !uses_distilled_encoder(config.classifier.variant))
      continue;
    const auto t0 = std::chrono::steady_clock::now();
    const StageResult r = run_stage(stage, ctx);
    const double secs = seconds_since(t0);
    write_report(ctx.layout, stage + r.tag, make_report(stage, config, r, secs));
    out << r.summary;
    stages[stage] = r.metrics;
    timing[stage] = secs;
    artifacts.update(r.artifacts);
  }
  timing["total"] = seconds_since(t_all);
  nlohmann::json report{{"command", "all"},
                        {"config", to_json(config)},
                        {"stages", stages},
                        {"artifacts", artifacts},
                        {"timing", timing}};
  write_report(ctx.layout, "all" + Layout::classifier_tag(config.classifier),
               report);
  return report;
}

inline int exit_code_for(const std::exception_ptr& e) {
  try {
    std::rethrow_exception(e);
  } catch (const ConfigError&) {
    return 1;
  } catch (const PrerequisiteError&) {
    return 2;
  } catch (const InfeasibleError&) {
    return 2;
  } catch (const ParseError&) {
    return 2;
  } catch (const ValidationError&) {
    return 2;
  } catch (...) {
    return 3;
  }
}

// `erg <command> --config <path> [--set section.key=value ...]`
inline int run(const std::string& command, const fs::path& config_path,
               const std::vector<std::string>& overrides, std::ostream& out,
               std::ostream& err) {
  try {
    if (std::find(commands().begin(), commands().end(), command) ==
        commands().end())
      throw ConfigError("unknown command '" + command + "'");
    const PipelineConfig config = load_config(config_path, overrides);
    run_command(command, config, out);
    return 0;
  } catch (const std::exception& e) {
    const int code = exit_code_for(std::current_exception());
    err << "erg " << command << ": " << e.what() << "\n";
    return code;
  }
}

}  // namespace erg::cli

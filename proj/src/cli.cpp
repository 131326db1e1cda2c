// Copyright 2026 The Pctx Authors.
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

#include "pctx/cli.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <limits>
#include <map>
#include <sstream>

#include "pctx/pipeline.hpp"

namespace pctx {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

class MissingArtifact : public Error {
 public:
  MissingArtifact(const std::string& file, const std::string& stage)
      : Error("missing artifact " + file + ": run `pctx " + stage +
              "` first"),
        stage_(stage) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

struct Options {
  std::string config_path;
  std::string out_dir = "run";
  RawConfig overrides;

  std::string input_path;
  std::string features_path;
  std::string contexts_path;

  std::size_t synth_users = 2000;
  std::size_t synth_items = 300;
  std::size_t synth_intents = 3;
  std::size_t synth_dim = 16;

  std::string sweep_param = "tau";
  std::vector<double> sweep_values{0.0, 0.1, 0.2, 0.3, 0.4};
};

template <class T>
void bind_flag(CLI::App& app, const std::string& name,
               std::optional<T>& target, const std::string& help) {
  app.add_option_function<T>(
      name, [&target](const T& v) { target = v; }, help);
}

template <class T>
void bind_list_flag(CLI::App& app, const std::string& name,
                    std::optional<std::vector<T>>& target,
                    const std::string& help) {
  app.add_option_function<std::vector<T>>(
         name, [&target](const std::vector<T>& v) { target = v; }, help)
      ->delimiter(',');
}

void add_config_flags(CLI::App& app, Options& o) {
  RawConfig& r = o.overrides;
  app.add_option("--config", o.config_path, "JSON config document")
      ->check(CLI::ExistingFile);
  app.add_option("--out", o.out_dir, "Run directory")->capture_default_str();
  bind_flag(app, "--seed", r.seed, "Pipeline seed");
  bind_flag(app, "--threads", r.threads, "Worker thread cap");
  bind_flag(app, "--mode", r.mode, "static|multi|personalized");
  bind_flag(app, "--alpha", r.alpha, "Context weight in the fused vector");
  bind_flag(app, "--tau", r.tau, "Relative frequency floor for SID merging");
  bind_flag(app, "--gamma", r.gamma, "Augmentation probability");
  bind_flag(app, "--beam", r.beam_width, "Beam width");
  bind_flag(app, "--num-digits", r.num_digits, "Digits per semantic ID");
  bind_list_flag(app, "--codebook-sizes", r.codebook_sizes,
            "Comma-separated codebook sizes");
  bind_flag(app, "--conflict-size", r.conflict_size, "Conflict digit alphabet");
  bind_flag(app, "--groups", r.groups, "Allocation groups");
  bind_flag(app, "--gamma-shape", r.gamma_shape, "Allocation Gamma shape");
  bind_flag(app, "--c-start", r.c_start,
            "Centroids granted to the first group");
  bind_flag(app, "--c-step", r.c_step, "Centroid increment per group");
  bind_flag(app, "--kmeans-max-iter", r.kmeans_max_iter, "Lloyd iteration cap");
  bind_flag(app, "--context-decay", r.context_decay,
            "Decayed-mean context factor");
  bind_flag(app, "--whiten", r.whiten, "Whiten fused vectors (true|false)");
  bind_flag(app, "--min-interactions", r.min_interactions, "k-core threshold");
  bind_flag(app, "--max-seq-len", r.max_seq_len,
            "Most recent items kept per user");
  bind_flag(app, "--replacement", r.replacement,
       "other-uniform|all-uniform|frequency-weighted");
  bind_flag(app, "--augment-targets", r.augment_targets,
       "Augment prediction targets (true|false)");
  bind_flag(app, "--epochs", r.epochs, "Augmented draws per sequence");
  bind_flag(app, "--smoothing", r.smoothing, "Count model Laplace constant");
  bind_flag(app, "--history", r.history, "Items in the count model signature");
  bind_flag(app, "--min-support", r.min_support,
            "Count model backoff threshold");
  bind_list_flag(app, "--eval-ks", r.eval_ks, "Comma-separated cutoffs");
}

template <class T>
void overlay(std::optional<T>& base, const std::optional<T>& top) {
  if (top) base = top;
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

PipelineConfig resolve_config(const Options& o, const fs::path& run) {
  RawConfig raw;
  try {
    if (!o.config_path.empty()) {
      raw = parse_config_json(read_text(o.config_path));
    } else if (fs::exists(run / "config.resolved.json")) {
      raw = parse_config_json(read_text(run / "config.resolved.json"));
    }
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  const RawConfig& t = o.overrides;
  if (t.num_digits && !t.codebook_sizes) raw.codebook_sizes.reset();
  if (t.codebook_sizes && !t.num_digits) raw.num_digits.reset();
  overlay(raw.num_digits, t.num_digits);
  overlay(raw.codebook_sizes, t.codebook_sizes);
  overlay(raw.conflict_size, t.conflict_size);
  overlay(raw.alpha, t.alpha);
  overlay(raw.tau, t.tau);
  overlay(raw.gamma, t.gamma);
  overlay(raw.groups, t.groups);
  overlay(raw.gamma_shape, t.gamma_shape);
  overlay(raw.c_start, t.c_start);
  overlay(raw.c_step, t.c_step);
  overlay(raw.kmeans_max_iter, t.kmeans_max_iter);
  overlay(raw.context_decay, t.context_decay);
  overlay(raw.whiten, t.whiten);
  overlay(raw.min_interactions, t.min_interactions);
  overlay(raw.max_seq_len, t.max_seq_len);
  overlay(raw.mode, t.mode);
  overlay(raw.replacement, t.replacement);
  overlay(raw.augment_targets, t.augment_targets);
  overlay(raw.epochs, t.epochs);
  overlay(raw.smoothing, t.smoothing);
  overlay(raw.history, t.history);
  overlay(raw.min_support, t.min_support);
  overlay(raw.beam_width, t.beam_width);
  overlay(raw.eval_ks, t.eval_ks);
  overlay(raw.seed, t.seed);
  overlay(raw.threads, t.threads);
  return validate_config(raw);
}

// Stage bookkeeping: artifacts written, their hashes and the elapsed time.
class Stage {
 public:
  Stage(std::string name, fs::path run, const PipelineConfig& cfg)
      : name_(std::move(name)),
        run_(std::move(run)),
        cfg_(cfg),
        start_(std::chrono::steady_clock::now()) {
    fs::create_directories(run_);
  }

  fs::path path(const std::string& file) const { return run_ / file; }

  fs::path require(const std::string& file, const std::string& producer) const {
    const fs::path p = run_ / file;
    if (!fs::exists(p)) throw MissingArtifact(p.string(), producer);
    return p;
  }

  template <class Fn>
  void write(const std::string& file, Fn&& fn, bool binary = false) {
    const fs::path p = run_ / file;
    {
      std::ofstream out(p, binary ? std::ios::binary : std::ios::out);
      if (!out) throw Error("cannot write " + p.string());
      fn(out);
      if (!out) throw Error("write failed for " + p.string());
    }
    written_.push_back(file);
  }

  void finish() {
    write("config.resolved.json",
          [&](std::ostream& out) { out << config_to_json(cfg_); });
    const fs::path manifest_path = run_ / "manifest.json";
    json manifest = json::object();
    if (fs::exists(manifest_path)) {
      try {
        manifest = json::parse(read_text(manifest_path));
      } catch (const json::exception&) {
        manifest = json::object();
      }
    }
    manifest["config"] = json::parse(config_to_json(cfg_));
    json artifacts = json::object();
    for (const auto& file : written_) {
      artifacts[file] = sha256_file((run_ / file).string());
    }
    const double seconds = std::chrono::duration<double>(
                               std::chrono::steady_clock::now() - start_)
                               .count();
    manifest["stages"][name_] = {{"artifacts", artifacts},
                                 {"seconds", seconds}};
    std::ofstream out(manifest_path);
    out << manifest.dump(2) << '\n';
  }

 private:
  std::string name_;
  fs::path run_;
  PipelineConfig cfg_;
  std::chrono::steady_clock::time_point start_;
  std::vector<std::string> written_;
};

constexpr const char* kUpstreamData = "ingest` or `pctx synth";

// Logs written by ingest/synth are already filtered and truncated.
InteractionLog load_prepared_log(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  PipelineConfig as_is;
  as_is.min_interactions = 1;
  as_is.max_seq_len = std::numeric_limits<std::size_t>::max();
  return build_log(parse_interaction_records(in), as_is);
}

Dataset load_dataset(const Stage& stage) {
  auto log =
      load_prepared_log(stage.require("interactions.tsv", kUpstreamData));
  const auto features = load_embeddings(
      stage.require("features.emb", kUpstreamData).string(), &log.items);
  return make_dataset(std::move(log), features);
}

Tokenizer load_bundle(const Stage& stage, const Dataset& data) {
  std::ifstream in(stage.require("tokenizer.json", "build-tokenizer"));
  return load_tokenizer(in, data.log.items, data.features);
}

void write_features(Stage& stage, const EmbeddingTable& features) {
  stage.write("features.emb", [&](std::ostream& out) {
    write_embeddings_text(features, out);
  });
}

int cmd_ingest(const Options& o, const PipelineConfig& cfg, std::ostream& out) {
  Stage stage("ingest", o.out_dir, cfg);
  auto log = load_interactions(o.input_path, cfg);
  const auto features =
      restrict_to_vocabulary(load_embeddings(o.features_path), log.items);
  bind_features(features, log.items);  // every item must carry a feature row
  stage.write("interactions.tsv",
              [&](std::ostream& s) { write_interactions(log, s); });
  write_features(stage, features);
  stage.finish();
  out << "ingest: " << log.sequences.size() << " users, " << log.items.size()
      << " items, " << log.num_interactions() << " interactions\n";
  return kExitOk;
}

int cmd_synth(const Options& o, const PipelineConfig& cfg, std::ostream& out) {
  Stage stage("synth", o.out_dir, cfg);
  SyntheticOptions so;
  so.n_users = o.synth_users;
  so.n_items = o.synth_items;
  so.n_intents = o.synth_intents;
  so.dim = o.synth_dim;
  so.seed = cfg.seed;
  so.min_interactions = cfg.min_interactions;
  so.max_seq_len = cfg.max_seq_len;
  const auto corpus = generate_synthetic(so);
  stage.write("interactions.tsv",
              [&](std::ostream& s) { write_interactions(corpus.log, s); });
  write_features(stage, corpus.features);
  stage.write("truth.tsv", [&](std::ostream& s) {
    for (std::size_t i = 0; i < corpus.item_intents.size(); ++i) {
      s << "item\t" << corpus.log.items.raw(ItemId(i)) << '\t';
      for (std::size_t k = 0; k < corpus.item_intents[i].size(); ++k) {
        s << (k ? "," : "") << corpus.item_intents[i][k];
      }
      s << '\n';
    }
    for (std::size_t u = 0; u < corpus.user_intent.size(); ++u) {
      s << "user\t" << corpus.log.sequences[u].user << '\t'
        << corpus.user_intent[u] << '\n';
    }
  });
  stage.finish();
  out << "synth: " << corpus.log.sequences.size() << " users, "
      << corpus.log.items.size() << " items, "
      << corpus.log.num_interactions() << " interactions\n";
  return kExitOk;
}

int cmd_build_tokenizer(const Options& o, const PipelineConfig& cfg,
                        std::ostream& out) {
  Stage stage("build-tokenizer", o.out_dir, cfg);
  const Dataset data = load_dataset(stage);
  ContextSource source;
  source.decay = cfg.context_decay;
  if (!o.contexts_path.empty()) {
    source.external_path = fs::absolute(o.contexts_path).string();
  }
  const auto build = build_tokenizer(data, cfg, make_encoder(source));
  const auto& registry = build.tokenizer.registry();

  stage.write("contexts.emb", [&](std::ostream& s) {
    write_embeddings_binary(build.contexts, s);
  }, true);
  stage.write("centroids.tsv", [&](std::ostream& s) {
    write_centroids(build.condensed, data.log.items, s);
  });
  stage.write("codebooks.rq", [&](std::ostream& s) {
    write_codebooks(build.codebooks, s);
  }, true);
  stage.write("tokenizer.json", [&](std::ostream& s) {
    save_tokenizer(build.tokenizer, data.log.items, source, s);
  });
  stage.write("registry.tsv", [&](std::ostream& s) {
    write_registry(registry, data.log.items, s);
  });
  stage.write("sid_groups.tsv", [&](std::ostream& s) {
    export_sid_groups(registry, data.log, build.occurrences, s);
  });
  const auto stats = sid_stats(registry);
  stage.write("sid_stats.csv",
              [&](std::ostream& s) { write_sid_stats_csv(stats, s); });
  stage.finish();
  out << "build-tokenizer: " << stats.items << " items, " << stats.total_sids
      << " semantic IDs (ratio " << format_double(stats.ratio) << ")\n";
  return kExitOk;
}

int cmd_tokenize(const Options& o, const PipelineConfig& cfg,
                 std::ostream& out) {
  Stage stage("tokenize", o.out_dir, cfg);
  const Dataset data = load_dataset(stage);
  const Tokenizer tokenizer = load_bundle(stage, data);
  const auto corpus =
      tokenize_corpus(data.log, data.split, tokenizer, cfg.threads);
  stage.write("tokens.txt",
              [&](std::ostream& s) { write_token_corpus(corpus, s); });
  stage.finish();
  out << "tokenize: " << corpus.size() << " sequences\n";
  return kExitOk;
}

int cmd_fit(const Options& o, const PipelineConfig& cfg, std::ostream& out) {
  Stage stage("fit", o.out_dir, cfg);
  const Dataset data = load_dataset(stage);
  const Tokenizer tokenizer = load_bundle(stage, data);
  const auto model = fit_model(data, tokenizer, cfg);
  stage.write("model.txt", [&](std::ostream& s) { model.write(s); });
  stage.finish();
  out << "fit: " << model.num_cells() << " count cells\n";
  return kExitOk;
}

int cmd_eval(const Options& o, const PipelineConfig& cfg, std::ostream& out) {
  Stage stage("eval", o.out_dir, cfg);
  const auto model_path = stage.require("model.txt", "fit");
  const Dataset data = load_dataset(stage);
  const Tokenizer tokenizer = load_bundle(stage, data);
  std::ifstream min(model_path);
  const auto model = read_count_model(min);
  const auto report = evaluate(model, tokenizer, data.log, data.split,
                               cfg.beam_width, cfg.eval_ks, cfg.threads);
  stage.write("metrics.csv",
              [&](std::ostream& s) { write_metrics_csv(report, s); });
  stage.write("predictions.tsv", [&](std::ostream& s) {
    write_predictions(report, data.log, s);
  });
  stage.finish();
  write_metrics_csv(report, out);
  return kExitOk;
}

int cmd_sweep(const Options& o, const PipelineConfig& cfg, std::ostream& out) {
  Stage stage("sweep", o.out_dir, cfg);
  const Dataset data = load_dataset(stage);
  const auto encoder = ContextEncoder::decayed_mean(cfg.context_decay);
  const auto rows =
      run_sweep(data, cfg, encoder, o.sweep_param, o.sweep_values);
  stage.write("sweep.csv", [&](std::ostream& s) { write_sweep_csv(rows, s); });
  stage.finish();
  write_sweep_csv(rows, out);
  return kExitOk;
}

int cmd_analyze(const Options& o, const PipelineConfig& cfg,
                std::ostream& out) {
  Stage stage("analyze", o.out_dir, cfg);
  const Dataset data = load_dataset(stage);
  const Tokenizer tokenizer = load_bundle(stage, data);
  const auto rate = popular_rate(data.log, data.split, tokenizer, cfg.gamma,
                                 cfg.replacement, cfg.max_seq_len, cfg.threads);
  const auto stats = sid_stats(tokenizer.registry());
  stage.write("popular_rate.csv",
              [&](std::ostream& s) { write_popular_rate_csv(rate, s); });
  stage.write("sid_stats.csv",
              [&](std::ostream& s) { write_sid_stats_csv(stats, s); });
  stage.finish();
  out << "analyze: spearman(position, popular_rate) = "
      << format_double(position_spearman(rate)) << ", sid ratio "
      << format_double(stats.ratio) << '\n';
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out,
            std::ostream& err) {
  Options o;
  CLI::App app{"Personalized context-aware semantic ID tokenizer pipeline",
               "pctx"};
  app.fallthrough();
  app.require_subcommand(1);
  add_config_flags(app, o);

  auto* ingest = app.add_subcommand("ingest", "Filter a raw interaction log");
  ingest->add_option("--input", o.input_path, "user\\titem\\ttimestamp file")
      ->required()
      ->check(CLI::ExistingFile);
  ingest->add_option("--features", o.features_path, "Item feature table")
      ->required()
      ->check(CLI::ExistingFile);

  auto* synth = app.add_subcommand("synth", "Generate a multi-intent corpus");
  synth->add_option("--users", o.synth_users)->capture_default_str();
  synth->add_option("--items", o.synth_items)->capture_default_str();
  synth->add_option("--intents", o.synth_intents)->capture_default_str();
  synth->add_option("--dim", o.synth_dim)->capture_default_str();

  auto* build = app.add_subcommand("build-tokenizer",
                                   "Condense, quantize and build the registry");
  build->add_option("--contexts", o.contexts_path,
                    "External user:position context table")
      ->check(CLI::ExistingFile);

  app.add_subcommand("tokenize", "Write the tokenized training corpus");
  app.add_subcommand("fit", "Fit the count token model");
  app.add_subcommand("eval", "Leave-one-out evaluation");
  auto* sweep = app.add_subcommand("sweep", "Sweep gamma or tau");
  sweep->add_option("--param", o.sweep_param, "gamma|tau")
      ->check(CLI::IsMember({"gamma", "tau"}))
      ->capture_default_str();
  sweep->add_option("--values", o.sweep_values, "Comma-separated grid")
      ->delimiter(',');
  app.add_subcommand("analyze", "popular_rate by position and SID counts");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "pctx: " << e.what() << '\n';
    return kExitConfig;
  }

  const std::string name = app.get_subcommands().front()->get_name();
  try {
    const PipelineConfig cfg = resolve_config(o, o.out_dir);
    if (name == "ingest") return cmd_ingest(o, cfg, out);
    if (name == "synth") return cmd_synth(o, cfg, out);
    if (name == "build-tokenizer") return cmd_build_tokenizer(o, cfg, out);
    if (name == "tokenize") return cmd_tokenize(o, cfg, out);
    if (name == "fit") return cmd_fit(o, cfg, out);
    if (name == "eval") return cmd_eval(o, cfg, out);
    if (name == "sweep") return cmd_sweep(o, cfg, out);
    if (name == "analyze") return cmd_analyze(o, cfg, out);
  } catch (const ConfigError& e) {
    err << "pctx " << name << ": config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const MissingArtifact& e) {
    err << "pctx " << name << ": " << e.what() << '\n';
    return kExitMissing;
  } catch (const std::exception& e) {
    err << "pctx " << name << ": " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitFailure;
}

}  // namespace pctx

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

#include "pctx/pipeline.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <array>
#include <fstream>
#include <iterator>
#include <json.hpp>
#include <sstream>

namespace pctx {

namespace {

// Stream tags for derive_seed so stages never share random streams.
constexpr std::uint64_t kCodebookStream = 0x636f6465;
constexpr std::uint64_t kTrainingStream = 0x74726169;

}  // namespace

Dataset make_dataset(InteractionLog log, const EmbeddingTable& features) {
  Dataset data;
  data.features = bind_features(features, log.items);
  data.split = make_split(log);
  data.log = std::move(log);
  if (data.split.entries.empty()) {
    throw Error("dataset: no sequence is long enough to split");
  }
  return data;
}

TokenizerBuild build_tokenizer(const Dataset& data, const PipelineConfig& cfg,
                               const ContextEncoder& encoder) {
  const std::size_t num_items = data.log.items.size();
  auto occurrences = training_occurrences(data.split);
  auto contexts =
      encode_all(data.log, data.split, data.features, encoder, cfg.threads);

  const auto counts = occurrence_counts(occurrences, num_items);
  auto allocation = cfg.mode == TokenizerMode::kStatic
                        ? single_centroid_allocation(counts)
                        : allocate_centroids(counts, cfg.allocation);
  auto condensed = condense_all(contexts, occurrences, num_items, allocation,
                                cfg.seed, cfg.kmeans_max_iter, cfg.threads);

  // One fused row per (item, facet).
  Matrix fused_rows;
  std::vector<DigitEntry> digit_entries;
  for (const auto& ic : condensed.items) {
    for (std::size_t c = 0; c < ic.centroids.rows(); ++c) {
      fused_rows.append_row(fuse(ic.centroids.row(c),
                                 data.features.row(ic.item.index()),
                                 cfg.alpha));
      digit_entries.push_back({ic.item, c, {}});
    }
  }
  if (digit_entries.empty()) throw Error("build_tokenizer: no item centroids");

  WhiteningTransform whitening =
      cfg.whiten ? fit_whitening(fused_rows)
                 : WhiteningTransform::identity(fused_rows.cols());
  const Matrix whitened = whitening.apply(fused_rows);

  auto codebooks =
      fit_codebooks(whitened, cfg.codebook_sizes,
                    derive_seed(cfg.seed, kCodebookStream),
                    cfg.kmeans_max_iter);
  for (std::size_t r = 0; r < whitened.rows(); ++r) {
    digit_entries[r].digits = encode_digits(whitened.row(r), codebooks);
  }
  const auto sids = assign_conflict_digit(digit_entries, cfg.conflict_size);

  std::vector<std::vector<SidEntry>> per_item(num_items);
  for (std::size_t r = 0; r < digit_entries.size(); ++r) {
    const auto& de = digit_entries[r];
    const auto& ic = condensed.items[de.item.index()];
    SidEntry e;
    e.sid = sids[r];
    const auto w = whitened.row(r);
    e.centroid.assign(w.begin(), w.end());
    e.frequency = ic.counts[de.facet];
    e.facet = de.facet;
    for (std::size_t m = 0; m < ic.members.size(); ++m) {
      if (ic.assignment[m] == de.facet) e.members.push_back(ic.members[m]);
    }
    per_item[de.item.index()].push_back(std::move(e));
  }
  auto registry = build_registry(std::move(per_item), cfg.tau);

  return TokenizerBuild{
      std::move(occurrences),
      std::move(contexts),
      std::move(allocation),
      std::move(condensed),
      std::move(codebooks),
      Tokenizer(std::move(registry), std::move(whitening), data.features,
                encoder, cfg.alpha, cfg.mode)};
}

std::vector<std::size_t> model_vocabulary(const SidRegistry& registry) {
  std::vector<std::size_t> vocab(registry.num_digits(), 1);
  for (std::size_t i = 0; i < registry.num_items(); ++i) {
    for (const auto& e : registry.entries(ItemId(i))) {
      for (std::size_t l = 0; l < vocab.size(); ++l) {
        vocab[l] = std::max<std::size_t>(vocab[l], e.sid[l] + 1u);
      }
    }
  }
  return vocab;
}

TrainingOptions training_options(const PipelineConfig& cfg) {
  TrainingOptions o;
  o.gamma = cfg.gamma;
  o.epochs = cfg.epochs;
  o.seed = derive_seed(cfg.seed, kTrainingStream);
  o.policy = cfg.replacement;
  o.augment_targets = cfg.augment_targets;
  return o;
}

CountModelOptions count_model_options(const PipelineConfig& cfg) {
  return {cfg.smoothing, cfg.history, cfg.min_support};
}

CountTokenModel fit_model(const Dataset& data, const Tokenizer& tokenizer,
                          const PipelineConfig& cfg) {
  const auto training = build_training_set(
      data.log, data.split, tokenizer, training_options(cfg), cfg.threads);
  return fit_count_model(training, model_vocabulary(tokenizer.registry()),
                         count_model_options(cfg));
}

Experiment run_experiment(const Dataset& data, const PipelineConfig& cfg,
                          const ContextEncoder& encoder) {
  auto build = build_tokenizer(data, cfg, encoder);
  auto model = fit_model(data, build.tokenizer, cfg);
  auto metrics = evaluate(model, build.tokenizer, data.log, data.split,
                          cfg.beam_width, cfg.eval_ks, cfg.threads);
  auto stats = sid_stats(build.tokenizer.registry());
  return Experiment{std::move(build), std::move(model), std::move(metrics),
                    std::move(stats)};
}

std::vector<SweepRow> run_sweep(const Dataset& data, const PipelineConfig& cfg,
                                const ContextEncoder& encoder,
                                std::string_view parameter,
                                std::span<const double> values) {
  if (parameter != "gamma" && parameter != "tau") {
    throw ConfigError("sweep parameter must be gamma or tau");
  }
  std::vector<SweepRow> rows;
  for (double v : values) {
    if (v < 0.0 || v > 1.0) {
      throw ConfigError(std::string(parameter) + " must lie in [0,1]");
    }
    PipelineConfig c = cfg;
    (parameter == "gamma" ? c.gamma : c.tau) = v;
    auto exp = run_experiment(data, c, encoder);
    rows.push_back({std::string(parameter), v, std::move(exp.metrics),
                    std::move(exp.stats)});
  }
  return rows;
}

ContextEncoder make_encoder(const ContextSource& source) {
  if (source.external_path.empty()) {
    return ContextEncoder::decayed_mean(source.decay);
  }
  return ContextEncoder::external(load_embeddings(source.external_path));
}

using nlohmann::json;

void save_tokenizer(const Tokenizer& tokenizer, const Vocabulary& items,
                    const ContextSource& source, std::ostream& out) {
  json doc;
  doc["format"] = "pctx-tokenizer-1";
  doc["mode"] = std::string(to_string(tokenizer.mode()));
  doc["alpha"] = tokenizer.alpha();
  if (source.external_path.empty()) {
    doc["context"] = {{"type", "decayed_mean"}, {"decay", source.decay}};
  } else {
    doc["context"] = {{"type", "external"}, {"path", source.external_path}};
  }

  const auto& w = tokenizer.whitening();
  json projection = json::array();
  for (std::size_t r = 0; r < w.projection().rows(); ++r) {
    const auto row = w.projection().row(r);
    projection.push_back(std::vector<double>(row.begin(), row.end()));
  }
  doc["whitening"] = {{"mean", w.mean()}, {"projection", projection}};

  const auto& registry = tokenizer.registry();
  json entries = json::array();
  for (std::size_t i = 0; i < registry.num_items(); ++i) {
    for (const auto& e : registry.entries(ItemId(i))) {
      const auto t = e.sid.tokens();
      entries.push_back({{"item", items.raw(ItemId(i))},
                         {"sid", std::vector<Token>(t.begin(), t.end())},
                         {"facet", e.facet},
                         {"frequency", e.frequency},
                         {"centroid", e.centroid}});
    }
  }
  doc["registry"] = std::move(entries);
  out << doc.dump(1) << '\n';
}

Tokenizer load_tokenizer(std::istream& in, const Vocabulary& items,
                         Matrix features) {
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw ParseError(std::string("tokenizer bundle: ") + e.what());
  }
  try {
    if (doc.at("format") != "pctx-tokenizer-1") {
      throw ParseError("tokenizer bundle: unsupported format");
    }
    const auto mode = parse_mode(doc.at("mode").get<std::string>());
    if (!mode) throw ParseError("tokenizer bundle: unknown mode");

    ContextSource source;
    const auto& ctx = doc.at("context");
    if (ctx.at("type") == "external") {
      source.external_path = ctx.at("path").get<std::string>();
    } else {
      source.decay = ctx.at("decay").get<double>();
    }

    const auto& wj = doc.at("whitening");
    Vec mean = wj.at("mean").get<Vec>();
    Matrix projection;
    for (const auto& row : wj.at("projection")) {
      projection.append_row(row.get<Vec>());
    }

    std::vector<std::vector<SidEntry>> per_item(items.size());
    for (const auto& ej : doc.at("registry")) {
      const auto raw = ej.at("item").get<std::string>();
      const auto id = items.find(raw);
      if (!id) throw ParseError("tokenizer bundle: unknown item key " + raw);
      SidEntry e;
      e.sid = SemanticId(ej.at("sid").get<std::vector<Token>>());
      e.facet = ej.at("facet").get<std::size_t>();
      e.frequency = ej.at("frequency").get<std::size_t>();
      e.centroid = ej.at("centroid").get<Vec>();
      per_item[id->index()].push_back(std::move(e));
    }
    return Tokenizer(SidRegistry(std::move(per_item)),
                     WhiteningTransform(std::move(mean), std::move(projection)),
                     std::move(features), make_encoder(source),
                     doc.at("alpha").get<double>(), *mode);
  } catch (const json::exception& e) {
    throw ParseError(std::string("tokenizer bundle: ") + e.what());
  }
}

std::string sha256_hex(std::string_view data) {
  std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest.data(), &len, EVP_sha256(),
                 nullptr) != 1) {
    throw Error("sha256 failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(kHex[digest[i] >> 4]);
    out.push_back(kHex[digest[i] & 0xf]);
  }
  return out;
}

std::string sha256_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  std::string data((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  return sha256_hex(data);
}

}  // namespace pctx

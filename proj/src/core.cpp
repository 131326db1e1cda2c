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

#include "pctx/core.hpp"

#include <cmath>
#include <json.hpp>

namespace pctx {

using nlohmann::json;

std::string SemanticId::to_string() const {
  std::string out;
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    if (i > 0) out += '-';
    out += std::to_string(tokens_[i]);
  }
  return out;
}

std::size_t SemanticIdHash::operator()(const SemanticId& sid) const {
  std::uint64_t h = 1469598103934665603ULL;
  for (Token t : sid.tokens()) {
    h ^= t;
    h *= 1099511628211ULL;
  }
  return static_cast<std::size_t>(h);
}

ItemId Vocabulary::intern(std::string_view raw) {
  auto it = ids_.find(std::string(raw));
  if (it != ids_.end()) return it->second;
  const ItemId id(raw_.size());
  raw_.emplace_back(raw);
  ids_.emplace(raw_.back(), id);
  return id;
}

std::optional<ItemId> Vocabulary::find(std::string_view raw) const {
  auto it = ids_.find(std::string(raw));
  if (it == ids_.end()) return std::nullopt;
  return it->second;
}

std::string_view to_string(TokenizerMode mode) {
  switch (mode) {
    case TokenizerMode::kStatic:
      return "static";
    case TokenizerMode::kMultiIdentifier:
      return "multi";
    case TokenizerMode::kPersonalized:
      return "personalized";
  }
  return "personalized";
}

std::string_view to_string(ReplacementPolicy policy) {
  switch (policy) {
    case ReplacementPolicy::kOtherUniform:
      return "other-uniform";
    case ReplacementPolicy::kAllUniform:
      return "all-uniform";
    case ReplacementPolicy::kFrequencyWeighted:
      return "frequency-weighted";
  }
  return "other-uniform";
}

std::optional<TokenizerMode> parse_mode(std::string_view text) {
  if (text == "static") return TokenizerMode::kStatic;
  if (text == "multi" || text == "multi-identifier")
    return TokenizerMode::kMultiIdentifier;
  if (text == "personalized") return TokenizerMode::kPersonalized;
  return std::nullopt;
}

std::optional<ReplacementPolicy> parse_replacement(std::string_view text) {
  if (text == "other-uniform") return ReplacementPolicy::kOtherUniform;
  if (text == "all-uniform") return ReplacementPolicy::kAllUniform;
  if (text == "frequency-weighted")
    return ReplacementPolicy::kFrequencyWeighted;
  return std::nullopt;
}

namespace {

std::size_t as_count(const json& v, const std::string& field) {
  if (!v.is_number_integer() || v.get<std::int64_t>() < 0) {
    throw ConfigError(field + " must be a non-negative integer");
  }
  return v.get<std::size_t>();
}

double as_real(const json& v, const std::string& field) {
  if (!v.is_number()) throw ConfigError(field + " must be a number");
  return v.get<double>();
}

std::vector<std::size_t> as_counts(const json& v, const std::string& field) {
  if (!v.is_array()) throw ConfigError(field + " must be an array");
  std::vector<std::size_t> out;
  for (const auto& e : v) out.push_back(as_count(e, field));
  return out;
}

template <typename Fn>
void for_section(const json& root, const char* name, Fn&& fn) {
  if (!root.contains(name)) return;
  const json& section = root.at(name);
  if (!section.is_object()) {
    throw ConfigError(std::string(name) + " must be an object");
  }
  for (auto it = section.begin(); it != section.end(); ++it) {
    if (!fn(it.key(), it.value())) {
      throw ConfigError("unknown config key " + std::string(name) + "." +
                        it.key());
    }
  }
}

void require_unit_interval(double v, const char* field) {
  if (!(v >= 0.0 && v <= 1.0)) {
    throw ConfigError(std::string(field) + " must lie in [0,1]");
  }
}

}  // namespace

RawConfig parse_config_json(std::string_view text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!root.is_object()) throw ConfigError("config must be a JSON object");

  RawConfig raw;
  static const char* kSections[] = {"ingest",   "context",  "condense",
                                    "quantize", "registry", "tokenize",
                                    "model",    "eval"};
  for (auto it = root.begin(); it != root.end(); ++it) {
    const std::string& key = it.key();
    if (key == "seed") {
      raw.seed = as_count(it.value(), "seed");
    } else if (key == "threads") {
      raw.threads = as_count(it.value(), "threads");
    } else if (key == "mode") {
      if (!it.value().is_string()) throw ConfigError("mode must be a string");
      raw.mode = it.value().get<std::string>();
    } else if (std::find(std::begin(kSections), std::end(kSections), key) ==
               std::end(kSections)) {
      throw ConfigError("unknown config key " + key);
    }
  }

  for_section(root, "ingest", [&](const std::string& k, const json& v) {
    if (k == "min_interactions")
      raw.min_interactions = as_count(v, "ingest.min_interactions");
    else if (k == "max_seq_len")
      raw.max_seq_len = as_count(v, "ingest.max_seq_len");
    else
      return false;
    return true;
  });
  for_section(root, "context", [&](const std::string& k, const json& v) {
    if (k != "decay") return false;
    raw.context_decay = as_real(v, "context.decay");
    return true;
  });
  for_section(root, "condense", [&](const std::string& k, const json& v) {
    if (k == "groups")
      raw.groups = as_count(v, "condense.groups");
    else if (k == "gamma_shape")
      raw.gamma_shape = as_real(v, "condense.gamma_shape");
    else if (k == "c_start")
      raw.c_start = as_count(v, "condense.c_start");
    else if (k == "c_step")
      raw.c_step = as_count(v, "condense.c_step");
    else if (k == "max_iter")
      raw.kmeans_max_iter = as_count(v, "condense.max_iter");
    else
      return false;
    return true;
  });
  for_section(root, "quantize", [&](const std::string& k, const json& v) {
    if (k == "num_digits")
      raw.num_digits = as_count(v, "quantize.num_digits");
    else if (k == "codebook_sizes")
      raw.codebook_sizes = as_counts(v, "quantize.codebook_sizes");
    else if (k == "conflict_size")
      raw.conflict_size = as_count(v, "quantize.conflict_size");
    else if (k == "alpha")
      raw.alpha = as_real(v, "quantize.alpha");
    else if (k == "whiten") {
      if (!v.is_boolean()) throw ConfigError("quantize.whiten must be a bool");
      raw.whiten = v.get<bool>();
    } else
      return false;
    return true;
  });
  for_section(root, "registry", [&](const std::string& k, const json& v) {
    if (k != "tau") return false;
    raw.tau = as_real(v, "registry.tau");
    return true;
  });
  for_section(root, "tokenize", [&](const std::string& k, const json& v) {
    if (k == "gamma")
      raw.gamma = as_real(v, "tokenize.gamma");
    else if (k == "replacement") {
      if (!v.is_string())
        throw ConfigError("tokenize.replacement must be a string");
      raw.replacement = v.get<std::string>();
    } else if (k == "augment_targets") {
      if (!v.is_boolean())
        throw ConfigError("tokenize.augment_targets must be a bool");
      raw.augment_targets = v.get<bool>();
    } else if (k == "epochs")
      raw.epochs = as_count(v, "tokenize.epochs");
    else
      return false;
    return true;
  });
  for_section(root, "model", [&](const std::string& k, const json& v) {
    if (k == "smoothing")
      raw.smoothing = as_real(v, "model.smoothing");
    else if (k == "history")
      raw.history = as_count(v, "model.history");
    else if (k == "min_support")
      raw.min_support = as_count(v, "model.min_support");
    else
      return false;
    return true;
  });
  for_section(root, "eval", [&](const std::string& k, const json& v) {
    if (k == "beam_width")
      raw.beam_width = as_count(v, "eval.beam_width");
    else if (k == "ks")
      raw.eval_ks = as_counts(v, "eval.ks");
    else
      return false;
    return true;
  });
  return raw;
}

PipelineConfig validate_config(const RawConfig& raw) {
  PipelineConfig cfg;

  if (raw.codebook_sizes) cfg.codebook_sizes = *raw.codebook_sizes;
  if (cfg.codebook_sizes.empty()) {
    throw ConfigError("codebook_sizes must list at least one codebook");
  }
  for (std::size_t s : cfg.codebook_sizes) {
    if (s < 1 || s > 65536) {
      throw ConfigError("codebook_sizes entries must lie in [1,65536]");
    }
  }
  cfg.num_digits = cfg.codebook_sizes.size() + 1;
  if (raw.num_digits && *raw.num_digits != cfg.num_digits) {
    if (raw.codebook_sizes) {
      throw ConfigError("num_digits must equal codebook count + 1 (" +
                        std::to_string(cfg.num_digits) + ")");
    }
    // Only G given: replicate the default codebook size.
    if (*raw.num_digits < 2) throw ConfigError("num_digits must be >= 2");
    cfg.num_digits = *raw.num_digits;
    cfg.codebook_sizes.assign(cfg.num_digits - 1, 256);
  }
  if (raw.conflict_size) cfg.conflict_size = *raw.conflict_size;
  if (cfg.conflict_size < 1 || cfg.conflict_size > 65536) {
    throw ConfigError("conflict_size must lie in [1,65536]");
  }

  if (raw.alpha) cfg.alpha = *raw.alpha;
  require_unit_interval(cfg.alpha, "alpha");
  if (raw.tau) cfg.tau = *raw.tau;
  require_unit_interval(cfg.tau, "tau");
  if (raw.gamma) cfg.gamma = *raw.gamma;
  require_unit_interval(cfg.gamma, "gamma");

  if (raw.groups) cfg.allocation.groups = *raw.groups;
  if (cfg.allocation.groups < 1) throw ConfigError("groups must be >= 1");
  if (raw.gamma_shape) cfg.allocation.gamma_shape = *raw.gamma_shape;
  if (!(cfg.allocation.gamma_shape > 0.0) ||
      !std::isfinite(cfg.allocation.gamma_shape)) {
    throw ConfigError("gamma_shape must be positive");
  }
  if (raw.c_start) cfg.allocation.c_start = *raw.c_start;
  if (cfg.allocation.c_start < 1) throw ConfigError("c_start must be >= 1");
  if (raw.c_step) cfg.allocation.c_step = *raw.c_step;

  if (raw.kmeans_max_iter) cfg.kmeans_max_iter = *raw.kmeans_max_iter;
  if (cfg.kmeans_max_iter < 1) throw ConfigError("max_iter must be >= 1");
  if (raw.context_decay) cfg.context_decay = *raw.context_decay;
  if (!(cfg.context_decay > 0.0 && cfg.context_decay <= 1.0)) {
    throw ConfigError("context decay must lie in (0,1]");
  }
  if (raw.whiten) cfg.whiten = *raw.whiten;

  if (raw.min_interactions) cfg.min_interactions = *raw.min_interactions;
  if (cfg.min_interactions < 1) {
    throw ConfigError("min_interactions must be >= 1");
  }
  if (raw.max_seq_len) cfg.max_seq_len = *raw.max_seq_len;
  if (cfg.max_seq_len < 1) throw ConfigError("max_seq_len must be >= 1");

  if (raw.mode) {
    auto m = parse_mode(*raw.mode);
    if (!m) {
      throw ConfigError("mode must be one of static|multi|personalized, got '" +
                        *raw.mode + "'");
    }
    cfg.mode = *m;
  }
  if (raw.replacement) {
    auto r = parse_replacement(*raw.replacement);
    if (!r) {
      throw ConfigError(
          "replacement must be one of "
          "other-uniform|all-uniform|frequency-weighted");
    }
    cfg.replacement = *r;
  }
  if (raw.augment_targets) cfg.augment_targets = *raw.augment_targets;
  if (raw.epochs) cfg.epochs = *raw.epochs;
  if (cfg.epochs < 1) throw ConfigError("epochs must be >= 1");

  if (raw.smoothing) cfg.smoothing = *raw.smoothing;
  if (!(cfg.smoothing >= 0.0) || !std::isfinite(cfg.smoothing)) {
    throw ConfigError("smoothing must be a finite value >= 0");
  }
  if (raw.history) cfg.history = *raw.history;
  if (raw.min_support) cfg.min_support = *raw.min_support;
  if (cfg.min_support < 1) throw ConfigError("min_support must be >= 1");

  if (raw.beam_width) cfg.beam_width = *raw.beam_width;
  if (cfg.beam_width < 1) throw ConfigError("beam_width must be >= 1");
  if (raw.eval_ks) cfg.eval_ks = *raw.eval_ks;
  if (cfg.eval_ks.empty()) throw ConfigError("eval ks must not be empty");
  for (std::size_t k : cfg.eval_ks) {
    if (k < 1) throw ConfigError("eval ks entries must be >= 1");
  }

  if (raw.seed) cfg.seed = *raw.seed;
  if (raw.threads) cfg.threads = *raw.threads;
  if (cfg.threads < 1) throw ConfigError("threads must be >= 1");
  return cfg;
}

std::string config_to_json(const PipelineConfig& cfg) {
  json root = json::object();
  root["seed"] = cfg.seed;
  root["threads"] = cfg.threads;
  root["mode"] = std::string(to_string(cfg.mode));
  root["ingest"] = {{"min_interactions", cfg.min_interactions},
                    {"max_seq_len", cfg.max_seq_len}};
  root["context"] = {{"decay", cfg.context_decay}};
  root["condense"] = {{"groups", cfg.allocation.groups},
                      {"gamma_shape", cfg.allocation.gamma_shape},
                      {"c_start", cfg.allocation.c_start},
                      {"c_step", cfg.allocation.c_step},
                      {"max_iter", cfg.kmeans_max_iter}};
  root["quantize"] = {{"num_digits", cfg.num_digits},
                      {"codebook_sizes", cfg.codebook_sizes},
                      {"conflict_size", cfg.conflict_size},
                      {"alpha", cfg.alpha},
                      {"whiten", cfg.whiten}};
  root["registry"] = {{"tau", cfg.tau}};
  root["tokenize"] = {{"gamma", cfg.gamma},
                      {"replacement", std::string(to_string(cfg.replacement))},
                      {"augment_targets", cfg.augment_targets},
                      {"epochs", cfg.epochs}};
  root["model"] = {{"smoothing", cfg.smoothing},
                   {"history", cfg.history},
                   {"min_support", cfg.min_support}};
  root["eval"] = {{"beam_width", cfg.beam_width}, {"ks", cfg.eval_ks}};
  return root.dump(2) + "\n";
}

}  // namespace pctx

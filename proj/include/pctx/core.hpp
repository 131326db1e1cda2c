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

#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "pctx/common.hpp"

namespace pctx {

// Dense item index in [0, |V|).
struct ItemId {
  std::uint32_t value = 0;

  constexpr ItemId() = default;
  constexpr explicit ItemId(std::uint32_t v) : value(v) {}
  constexpr explicit ItemId(std::size_t v)
      : value(static_cast<std::uint32_t>(v)) {}

  constexpr std::size_t index() const { return value; }
  friend constexpr auto operator<=>(ItemId, ItemId) = default;
};

using Token = std::uint16_t;

// Fixed-length digit tuple; the last digit disambiguates items that share
// the content digits. Ordered lexicographically.
class SemanticId {
 public:
  SemanticId() = default;
  explicit SemanticId(std::vector<Token> tokens) : tokens_(std::move(tokens)) {}

  std::size_t size() const { return tokens_.size(); }
  Token operator[](std::size_t i) const { return tokens_[i]; }
  std::span<const Token> tokens() const { return tokens_; }
  std::span<const Token> content() const {
    return std::span<const Token>(tokens_).first(tokens_.size() - 1);
  }
  Token conflict() const { return tokens_.back(); }

  // "5-7-9-0"
  std::string to_string() const;

  friend auto operator<=>(const SemanticId&, const SemanticId&) = default;
  friend bool operator==(const SemanticId&, const SemanticId&) = default;

 private:
  std::vector<Token> tokens_;
};

struct SemanticIdHash {
  std::size_t operator()(const SemanticId& sid) const;
};

// Raw item string <-> dense ItemId bijection.
class Vocabulary {
 public:
  ItemId intern(std::string_view raw);
  std::optional<ItemId> find(std::string_view raw) const;
  const std::string& raw(ItemId id) const { return raw_[id.index()]; }
  std::size_t size() const { return raw_.size(); }

 private:
  std::vector<std::string> raw_;
  std::unordered_map<std::string, ItemId> ids_;
};

struct InteractionSequence {
  std::string user;
  std::vector<ItemId> items;
  std::vector<std::int64_t> timestamps;  // empty when unknown
};

// One (sequence, position) pair. `sequence` indexes the owning log, which
// carries the user key; `position` is 1-based.
struct Occurrence {
  std::uint32_t sequence = 0;
  std::uint32_t position = 1;
  ItemId item;

  friend auto operator<=>(const Occurrence&, const Occurrence&) = default;
};

enum class TokenizerMode { kStatic, kMultiIdentifier, kPersonalized };

// How an augmented position picks its replacement SID.
enum class ReplacementPolicy {
  kOtherUniform,       // uniform over the item's other SIDs
  kAllUniform,         // uniform over all of the item's SIDs
  kFrequencyWeighted,  // other SIDs weighted by frequency
};

std::string_view to_string(TokenizerMode mode);
std::string_view to_string(ReplacementPolicy policy);
std::optional<TokenizerMode> parse_mode(std::string_view text);
std::optional<ReplacementPolicy> parse_replacement(std::string_view text);

struct AllocationParams {
  std::size_t groups = 5;     // T
  double gamma_shape = 2.0;   // K
  std::size_t c_start = 1;
  std::size_t c_step = 1;     // delta
};

struct PipelineConfig {
  // Semantic ID layout: codebook_sizes.size() content digits + 1 conflict.
  std::size_t num_digits = 4;
  std::vector<std::size_t> codebook_sizes{256, 256, 256};
  std::size_t conflict_size = 256;

  double alpha = 0.5;  // fusion weight of the context part
  double tau = 0.2;    // relative frequency floor for SID merging
  double gamma = 0.5;  // augmentation probability

  AllocationParams allocation;
  std::size_t kmeans_max_iter = 100;
  double context_decay = 0.8;
  bool whiten = true;

  std::size_t min_interactions = 5;
  std::size_t max_seq_len = 20;

  TokenizerMode mode = TokenizerMode::kPersonalized;
  ReplacementPolicy replacement = ReplacementPolicy::kOtherUniform;
  bool augment_targets = true;
  std::size_t epochs = 4;

  double smoothing = 0.01;    // Laplace beta
  std::size_t history = 2;    // items in the count-model context signature
  std::size_t min_support = 3;

  std::size_t beam_width = 50;
  std::vector<std::size_t> eval_ks{5, 10};

  std::uint64_t seed = 42;
  std::size_t threads = 1;
};

// Parsed but unvalidated configuration; absent fields take defaults.
struct RawConfig {
  std::optional<std::size_t> num_digits;
  std::optional<std::vector<std::size_t>> codebook_sizes;
  std::optional<std::size_t> conflict_size;
  std::optional<double> alpha;
  std::optional<double> tau;
  std::optional<double> gamma;
  std::optional<std::size_t> groups;
  std::optional<double> gamma_shape;
  std::optional<std::size_t> c_start;
  std::optional<std::size_t> c_step;
  std::optional<std::size_t> kmeans_max_iter;
  std::optional<double> context_decay;
  std::optional<bool> whiten;
  std::optional<std::size_t> min_interactions;
  std::optional<std::size_t> max_seq_len;
  std::optional<std::string> mode;
  std::optional<std::string> replacement;
  std::optional<bool> augment_targets;
  std::optional<std::size_t> epochs;
  std::optional<double> smoothing;
  std::optional<std::size_t> history;
  std::optional<std::size_t> min_support;
  std::optional<std::size_t> beam_width;
  std::optional<std::vector<std::size_t>> eval_ks;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> threads;
};

// Parses the nested JSON config document. Unknown keys are rejected.
RawConfig parse_config_json(std::string_view text);

// Fills defaults and enforces every bound; throws ConfigError naming the
// offending field.
PipelineConfig validate_config(const RawConfig& raw);

// Canonical JSON rendering of a resolved config (stable key order).
std::string config_to_json(const PipelineConfig& cfg);

}  // namespace pctx

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

#include <cstdint>
#include <iosfwd>
#include <span>
#include <unordered_map>
#include <vector>

#include "pctx/common.hpp"
#include "pctx/core.hpp"
#include "pctx/registry.hpp"
#include "pctx/tokenize.hpp"

namespace pctx {

// Autoregressive next-digit model over semantic IDs. Implementations must
// return, for level = prefix.size(), a distribution over vocab_size(level)
// tokens that sums to 1.
class TokenModel {
 public:
  virtual ~TokenModel() = default;

  virtual std::size_t num_levels() const = 0;
  virtual std::size_t vocab_size(std::size_t level) const = 0;
  virtual Vec next_distribution(std::span<const SemanticId> input,
                                std::span<const Token> prefix) const = 0;
};

struct CountModelOptions {
  double smoothing = 0.01;      // beta
  std::size_t history = 2;      // h
  std::size_t min_support = 3;  // backoff below this many observations
};

// Laplace-smoothed conditional counts keyed by (context signature, level,
// digit prefix); the signature is the SIDs of the last k input items.
//
// A query uses the longest k <= h whose (signature, level, prefix) cell has
// at least min_support observations, falling back to k = 0 whenever that
// cell has any data and to the uniform distribution otherwise. Within the
// chosen cell p(t) = (count(t) + beta) / (total + beta * |vocab|).
class CountTokenModel final : public TokenModel {
 public:
  CountTokenModel(std::vector<std::size_t> vocab, CountModelOptions options);

  std::size_t num_levels() const override { return vocab_.size(); }
  std::size_t vocab_size(std::size_t level) const override {
    return vocab_[level];
  }
  const CountModelOptions& options() const { return options_; }
  std::size_t num_cells() const { return cells_.size(); }

  Vec next_distribution(std::span<const SemanticId> input,
                        std::span<const Token> prefix) const override;

  void observe(std::span<const SemanticId> input, const SemanticId& target);

  // Text dump; read_count_model(write(...)) reproduces the model.
  void write(std::ostream& out) const;

 private:
  struct Cell {
    std::unordered_map<Token, std::size_t> counts;
    std::size_t total = 0;
  };
  struct KeyHash {
    std::size_t operator()(const std::vector<Token>& key) const;
  };

  static std::vector<Token> make_key(std::span<const SemanticId> input,
                                     std::size_t order, std::size_t level,
                                     std::span<const Token> prefix);

  friend CountTokenModel read_count_model(std::istream& in);

  std::vector<std::size_t> vocab_;
  CountModelOptions options_;
  std::unordered_map<std::vector<Token>, Cell, KeyHash> cells_;
};

CountTokenModel fit_count_model(const TrainingSet& training,
                                std::vector<std::size_t> vocab,
                                const CountModelOptions& options);

CountTokenModel read_count_model(std::istream& in);

struct ScoredSid {
  SemanticId sid;
  double probability = 0.0;  // product of the per-digit conditionals
};

// Partial digit tuple kept by beam search.
struct Beam {
  std::vector<Token> digits;
  double probability = 1.0;
};

// Width-limited breadth search over model.num_levels() digits. Beams are
// ranked by probability, ties by ascending digit tuple; the result holds up
// to beam_width complete tuples in that order.
std::vector<ScoredSid> beam_search(const TokenModel& model,
                                   std::span<const SemanticId> input,
                                   std::size_t beam_width);

struct ScoredItem {
  ItemId item;
  double score = 0.0;
  SemanticId best_sid;  // most probable decoded SID of the item
};

// Sums decoded SID probabilities per item (SIDs unknown to the registry are
// dropped), ranks by score descending then item id, and keeps the top k.
std::vector<ScoredItem> aggregate_items(std::span<const ScoredSid> decoded,
                                        const SidRegistry& registry,
                                        std::size_t k);

}  // namespace pctx

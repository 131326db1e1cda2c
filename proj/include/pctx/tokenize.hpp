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
#include <vector>

#include "pctx/common.hpp"
#include "pctx/context.hpp"
#include "pctx/core.hpp"
#include "pctx/ingest.hpp"
#include "pctx/quantize.hpp"
#include "pctx/registry.hpp"

namespace pctx {

struct Provenance {
  ItemId item;
  std::size_t facet = 0;  // index into the item's registry entries
  bool augmented = false;
};

// One SID per item; the flat token view has G tokens per item.
struct TokenSequence {
  std::vector<SemanticId> sids;
  std::vector<Provenance> provenance;

  std::size_t size() const { return sids.size(); }
  std::vector<Token> tokens() const;
  std::vector<ItemId> items() const;
};

// Everything needed to map (sequence, position) to a semantic ID.
class Tokenizer {
 public:
  Tokenizer(SidRegistry registry, WhiteningTransform whitening,
            Matrix features, ContextEncoder encoder, double alpha,
            TokenizerMode mode);

  const SidRegistry& registry() const { return registry_; }
  const WhiteningTransform& whitening() const { return whitening_; }
  const Matrix& features() const { return features_; }
  const ContextEncoder& encoder() const { return encoder_; }
  double alpha() const { return alpha_; }
  TokenizerMode mode() const { return mode_; }

  // Whitened fusion of the context at `position` (1-based) with the
  // current item's features.
  Vec fused(const InteractionSequence& seq, std::size_t position) const;

  // Registry entry chosen for the item at `position`: the nearest centroid
  // (personalized), the popular SID (multi) or the sole SID (static).
  std::size_t choose(const InteractionSequence& seq,
                     std::size_t position) const;

  // Tokenizes the first `length` items of `seq` (all when length == 0).
  TokenSequence tokenize_sequence(const InteractionSequence& seq,
                                  std::size_t length = 0) const;

 private:
  SidRegistry registry_;
  WhiteningTransform whitening_;
  Matrix features_;
  ContextEncoder encoder_;
  double alpha_;
  TokenizerMode mode_;
};

// With probability gamma per position, swaps the SID for another SID of the
// same item drawn under `policy`. Single-SID items are never touched.
TokenSequence augment(const TokenSequence& seq, const SidRegistry& registry,
                      double gamma, Rng& rng,
                      ReplacementPolicy policy =
                          ReplacementPolicy::kOtherUniform);

struct TrainingOptions {
  double gamma = 0.5;
  std::size_t epochs = 1;
  std::uint64_t seed = 42;
  ReplacementPolicy policy = ReplacementPolicy::kOtherUniform;
  bool augment_targets = true;
};

// Next-item examples over every train prefix of length >= 2. Each
// (sequence, epoch) pair gets one augmented draw, seeded by
// derive_seed(seed, sequence, epoch); example j uses the first j SIDs of the
// draw as input and SID j as target (taken from the un-augmented
// tokenization when augment_targets is off).
class TrainingSet {
 public:
  struct Example {
    std::uint32_t draw = 0;
    std::uint32_t length = 0;
  };

  std::span<const Example> examples() const { return examples_; }
  std::size_t size() const { return examples_.size(); }

  std::span<const SemanticId> input(const Example& e) const {
    return std::span<const SemanticId>(draws_[e.draw].sids).first(e.length);
  }
  const TokenSequence& draw(const Example& e) const { return draws_[e.draw]; }
  const SemanticId& target(const Example& e) const;
  ItemId target_item(const Example& e) const;
  bool target_augmented(const Example& e) const;

 private:
  friend TrainingSet build_training_set(const InteractionLog&, const Split&,
                                        const Tokenizer&,
                                        const TrainingOptions&, std::size_t);

  std::vector<TokenSequence> base_;    // per split entry
  std::vector<TokenSequence> draws_;   // per (split entry, epoch)
  std::vector<std::size_t> base_of_;   // draw -> base index
  std::vector<Example> examples_;
  bool augment_targets_ = true;
};

TrainingSet build_training_set(const InteractionLog& log, const Split& split,
                               const Tokenizer& tokenizer,
                               const TrainingOptions& options,
                               std::size_t threads = 1);

// Context-matched tokenization of every train prefix, in split order.
std::vector<TokenSequence> tokenize_corpus(const InteractionLog& log,
                                           const Split& split,
                                           const Tokenizer& tokenizer,
                                           std::size_t threads = 1);

// One sequence per line, tokens as space-separated `level:index` pairs.
void write_token_corpus(std::span<const TokenSequence> corpus,
                        std::ostream& out);

}  // namespace pctx

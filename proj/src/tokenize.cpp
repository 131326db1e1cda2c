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

#include "pctx/tokenize.hpp"

#include <ostream>

namespace pctx {

std::vector<Token> TokenSequence::tokens() const {
  std::vector<Token> out;
  for (const auto& sid : sids) {
    out.insert(out.end(), sid.tokens().begin(), sid.tokens().end());
  }
  return out;
}

std::vector<ItemId> TokenSequence::items() const {
  std::vector<ItemId> out;
  out.reserve(provenance.size());
  for (const auto& p : provenance) out.push_back(p.item);
  return out;
}

Tokenizer::Tokenizer(SidRegistry registry, WhiteningTransform whitening,
                     Matrix features, ContextEncoder encoder, double alpha,
                     TokenizerMode mode)
    : registry_(std::move(registry)),
      whitening_(std::move(whitening)),
      features_(std::move(features)),
      encoder_(std::move(encoder)),
      alpha_(alpha),
      mode_(mode) {}

Vec Tokenizer::fused(const InteractionSequence& seq,
                     std::size_t position) const {
  const Vec ctx = encoder_.encode(seq, position, features_);
  const ItemId item = seq.items[position - 1];
  return whitening_.apply(fuse(ctx, features_.row(item.index()), alpha_));
}

std::size_t Tokenizer::choose(const InteractionSequence& seq,
                              std::size_t position) const {
  const ItemId item = seq.items[position - 1];
  if (!registry_.contains(item)) {
    throw Error("tokenize: item id " + std::to_string(item.value) +
                " has no semantic IDs");
  }
  switch (mode_) {
    case TokenizerMode::kStatic:
    case TokenizerMode::kMultiIdentifier:
      return registry_.popular_index(item);
    case TokenizerMode::kPersonalized:
      if (registry_.entries(item).size() == 1) return 0;
      return registry_.assign_index(item, fused(seq, position));
  }
  return 0;
}

TokenSequence Tokenizer::tokenize_sequence(const InteractionSequence& seq,
                                           std::size_t length) const {
  if (length == 0 || length > seq.items.size()) length = seq.items.size();
  TokenSequence out;
  out.sids.reserve(length);
  out.provenance.reserve(length);
  for (std::size_t p = 1; p <= length; ++p) {
    const ItemId item = seq.items[p - 1];
    const std::size_t k = choose(seq, p);
    out.sids.push_back(registry_.entries(item)[k].sid);
    out.provenance.push_back({item, k, false});
  }
  return out;
}

TokenSequence augment(const TokenSequence& seq, const SidRegistry& registry,
                      double gamma, Rng& rng, ReplacementPolicy policy) {
  TokenSequence out = seq;
  for (std::size_t i = 0; i < out.size(); ++i) {
    auto& prov = out.provenance[i];
    const auto entries = registry.entries(prov.item);
    const std::size_t n = entries.size();
    if (n <= 1) continue;
    if (!(rng.uniform() < gamma)) continue;
    std::size_t k = prov.facet;
    switch (policy) {
      case ReplacementPolicy::kOtherUniform:
        k = rng.below(n - 1);
        if (k >= prov.facet) ++k;
        break;
      case ReplacementPolicy::kAllUniform:
        k = rng.below(n);
        break;
      case ReplacementPolicy::kFrequencyWeighted: {
        Vec w(n, 0.0);
        for (std::size_t j = 0; j < n; ++j) {
          if (j != prov.facet) w[j] = static_cast<double>(entries[j].frequency);
        }
        double total = 0.0;
        for (double x : w) total += x;
        if (total > 0.0) {
          k = rng.weighted(w);
        } else {
          k = rng.below(n - 1);
          if (k >= prov.facet) ++k;
        }
        break;
      }
    }
    prov.facet = k;
    prov.augmented = true;
    out.sids[i] = entries[k].sid;
  }
  return out;
}

const SemanticId& TrainingSet::target(const Example& e) const {
  const auto& src =
      augment_targets_ ? draws_[e.draw] : base_[base_of_[e.draw]];
  return src.sids[e.length];
}

ItemId TrainingSet::target_item(const Example& e) const {
  return draws_[e.draw].provenance[e.length].item;
}

bool TrainingSet::target_augmented(const Example& e) const {
  return augment_targets_ && draws_[e.draw].provenance[e.length].augmented;
}

std::vector<TokenSequence> tokenize_corpus(const InteractionLog& log,
                                           const Split& split,
                                           const Tokenizer& tokenizer,
                                           std::size_t threads) {
  std::vector<TokenSequence> out(split.entries.size());
  parallel_for(split.entries.size(), threads, [&](std::size_t i) {
    const auto& e = split.entries[i];
    out[i] = tokenizer.tokenize_sequence(log.sequences[e.sequence],
                                         e.train.size());
  });
  return out;
}

TrainingSet build_training_set(const InteractionLog& log, const Split& split,
                               const Tokenizer& tokenizer,
                               const TrainingOptions& options,
                               std::size_t threads) {
  TrainingSet set;
  set.augment_targets_ = options.augment_targets;
  set.base_ = tokenize_corpus(log, split, tokenizer, threads);

  const std::size_t epochs = std::max<std::size_t>(1, options.epochs);
  const std::size_t n = set.base_.size();
  set.draws_.resize(n * epochs);
  set.base_of_.resize(n * epochs);
  parallel_for(n * epochs, threads, [&](std::size_t d) {
    const std::size_t s = d / epochs;
    const std::size_t epoch = d % epochs;
    Rng rng(derive_seed(options.seed, split.entries[s].sequence, epoch));
    set.draws_[d] = augment(set.base_[s], tokenizer.registry(), options.gamma,
                            rng, options.policy);
    set.base_of_[d] = s;
  });
  for (std::size_t d = 0; d < set.draws_.size(); ++d) {
    const std::size_t len = set.draws_[d].size();
    for (std::size_t j = 1; j < len; ++j) {
      set.examples_.push_back({static_cast<std::uint32_t>(d),
                               static_cast<std::uint32_t>(j)});
    }
  }
  return set;
}

void write_token_corpus(std::span<const TokenSequence> corpus,
                        std::ostream& out) {
  for (const auto& seq : corpus) {
    bool first = true;
    for (const auto& sid : seq.sids) {
      for (std::size_t level = 0; level < sid.size(); ++level) {
        if (!first) out << ' ';
        first = false;
        out << level << ':' << sid[level];
      }
    }
    out << '\n';
  }
}

}  // namespace pctx

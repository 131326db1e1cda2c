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

#include "pctx/gr.hpp"

#include <algorithm>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

namespace pctx {

std::size_t CountTokenModel::KeyHash::operator()(
    const std::vector<Token>& key) const {
  std::uint64_t h = 1469598103934665603ULL;
  for (Token t : key) {
    h ^= t;
    h *= 1099511628211ULL;
  }
  return static_cast<std::size_t>(h);
}

CountTokenModel::CountTokenModel(std::vector<std::size_t> vocab,
                                 CountModelOptions options)
    : vocab_(std::move(vocab)), options_(options) {
  if (vocab_.empty()) throw Error("count model: no levels");
  for (std::size_t v : vocab_) {
    if (v == 0) throw Error("count model: empty level vocabulary");
  }
}

// Key layout: order, the order*G signature tokens, level, level prefix
// tokens. Lengths are implied by order, G and level.
std::vector<Token> CountTokenModel::make_key(std::span<const SemanticId> input,
                                             std::size_t order,
                                             std::size_t level,
                                             std::span<const Token> prefix) {
  std::vector<Token> key;
  key.push_back(static_cast<Token>(order));
  for (std::size_t i = input.size() - order; i < input.size(); ++i) {
    const auto t = input[i].tokens();
    key.insert(key.end(), t.begin(), t.end());
  }
  key.push_back(static_cast<Token>(level));
  key.insert(key.end(), prefix.begin(), prefix.begin() + level);
  return key;
}

void CountTokenModel::observe(std::span<const SemanticId> input,
                              const SemanticId& target) {
  if (target.size() != vocab_.size()) {
    throw Error("count model: target has wrong number of digits");
  }
  const std::size_t max_order = std::min(options_.history, input.size());
  for (std::size_t order = 0; order <= max_order; ++order) {
    for (std::size_t level = 0; level < vocab_.size(); ++level) {
      auto& cell = cells_[make_key(input, order, level, target.tokens())];
      ++cell.counts[target[level]];
      ++cell.total;
    }
  }
}

Vec CountTokenModel::next_distribution(std::span<const SemanticId> input,
                                       std::span<const Token> prefix) const {
  const std::size_t level = prefix.size();
  const std::size_t v = vocab_.at(level);
  const Cell* chosen = nullptr;
  const std::size_t max_order = std::min(options_.history, input.size());
  for (std::size_t order = max_order + 1; order-- > 0;) {
    auto it = cells_.find(make_key(input, order, level, prefix));
    if (it == cells_.end()) continue;
    if (it->second.total >= options_.min_support ||
        (order == 0 && it->second.total > 0)) {
      chosen = &it->second;
      break;
    }
  }
  const double beta = options_.smoothing;
  if (chosen == nullptr || (chosen->total == 0 && beta == 0.0)) {
    return Vec(v, 1.0 / static_cast<double>(v));
  }
  const double denom =
      static_cast<double>(chosen->total) + beta * static_cast<double>(v);
  Vec dist(v, beta / denom);
  for (const auto& [token, count] : chosen->counts) {
    if (token < v) dist[token] = (static_cast<double>(count) + beta) / denom;
  }
  return dist;
}

void CountTokenModel::write(std::ostream& out) const {
  out << "pctx-count-model 1\n";
  out << "vocab";
  for (std::size_t v : vocab_) out << ' ' << v;
  out << "\nsmoothing " << format_double(options_.smoothing) << '\n';
  out << "history " << options_.history << '\n';
  out << "min_support " << options_.min_support << '\n';
  out << "cells " << cells_.size() << '\n';
  std::map<std::vector<Token>, const Cell*> ordered;
  for (const auto& [key, cell] : cells_) ordered.emplace(key, &cell);
  for (const auto& [key, cell] : ordered) {
    for (std::size_t i = 0; i < key.size(); ++i) {
      out << (i == 0 ? "" : " ") << key[i];
    }
    out << '\t';
    std::map<Token, std::size_t> counts(cell->counts.begin(),
                                        cell->counts.end());
    bool first = true;
    for (const auto& [token, count] : counts) {
      out << (first ? "" : " ") << token << ':' << count;
      first = false;
    }
    out << '\n';
  }
}

CountTokenModel fit_count_model(const TrainingSet& training,
                                std::vector<std::size_t> vocab,
                                const CountModelOptions& options) {
  if (training.size() == 0) throw Error("fit_count_model: empty training set");
  CountTokenModel model(std::move(vocab), options);
  for (const auto& e : training.examples()) {
    model.observe(training.input(e), training.target(e));
  }
  return model;
}

CountTokenModel read_count_model(std::istream& in) {
  auto fail = [](const std::string& what) {
    throw ParseError("count model: " + what);
  };
  std::string line;
  std::string word;
  if (!std::getline(in, line) || line != "pctx-count-model 1") {
    fail("bad header");
  }
  std::vector<std::size_t> vocab;
  CountModelOptions options;
  std::size_t cells = 0;
  {
    std::getline(in, line);
    std::istringstream ss(line);
    ss >> word;
    if (word != "vocab") fail("missing vocab line");
    std::size_t v;
    while (ss >> v) vocab.push_back(v);
  }
  auto read_field = [&](const char* name, auto& value) {
    if (!std::getline(in, line)) fail(std::string("missing ") + name);
    std::istringstream ss(line);
    ss >> word;
    if (word != name) fail(std::string("expected ") + name);
    if constexpr (std::is_same_v<std::decay_t<decltype(value)>, double>) {
      std::string text;
      ss >> text;
      if (!parse_double(text, value)) fail(std::string("bad ") + name);
    } else {
      if (!(ss >> value)) fail(std::string("bad ") + name);
    }
  };
  read_field("smoothing", options.smoothing);
  read_field("history", options.history);
  read_field("min_support", options.min_support);
  read_field("cells", cells);

  CountTokenModel model(std::move(vocab), options);
  for (std::size_t c = 0; c < cells; ++c) {
    if (!std::getline(in, line)) fail("truncated cell list");
    const auto tab = line.find('\t');
    if (tab == std::string::npos) fail("cell line without tab");
    std::vector<Token> key;
    for (auto t : split_whitespace(std::string_view(line).substr(0, tab))) {
      key.push_back(static_cast<Token>(std::stoul(std::string(t))));
    }
    CountTokenModel::Cell cell;
    for (auto pair : split_whitespace(std::string_view(line).substr(tab + 1))) {
      const auto colon = pair.find(':');
      if (colon == std::string_view::npos) fail("bad count pair");
      const auto token =
          static_cast<Token>(std::stoul(std::string(pair.substr(0, colon))));
      const auto count = std::stoull(std::string(pair.substr(colon + 1)));
      cell.counts[token] = count;
      cell.total += count;
    }
    model.cells_.emplace(std::move(key), std::move(cell));
  }
  return model;
}

std::vector<ScoredSid> beam_search(const TokenModel& model,
                                   std::span<const SemanticId> input,
                                   std::size_t beam_width) {
  if (beam_width < 1) throw Error("beam_search: beam_width must be >= 1");
  struct Candidate {
    std::size_t beam;
    Token token;
    double probability;
  };

  std::vector<Beam> beams(1);
  std::vector<Candidate> candidates;
  for (std::size_t level = 0; level < model.num_levels(); ++level) {
    candidates.clear();
    for (std::size_t b = 0; b < beams.size(); ++b) {
      const Vec dist = model.next_distribution(input, beams[b].digits);
      for (std::size_t t = 0; t < dist.size(); ++t) {
        candidates.push_back(
            {b, static_cast<Token>(t), beams[b].probability * dist[t]});
      }
    }
    // Beams are kept in rank order and distinct, so (beam digits, token)
    // ordering reduces to comparing the parents' digits.
    auto better = [&](const Candidate& a, const Candidate& c) {
      if (a.probability != c.probability) return a.probability > c.probability;
      if (a.beam != c.beam) return beams[a.beam].digits < beams[c.beam].digits;
      return a.token < c.token;
    };
    const std::size_t keep = std::min(beam_width, candidates.size());
    std::partial_sort(candidates.begin(), candidates.begin() + keep,
                      candidates.end(), better);
    std::vector<Beam> next;
    next.reserve(keep);
    for (std::size_t i = 0; i < keep; ++i) {
      Beam nb;
      nb.digits = beams[candidates[i].beam].digits;
      nb.digits.push_back(candidates[i].token);
      nb.probability = candidates[i].probability;
      next.push_back(std::move(nb));
    }
    beams = std::move(next);
  }

  std::vector<ScoredSid> out;
  out.reserve(beams.size());
  for (auto& b : beams) {
    out.push_back({SemanticId(std::move(b.digits)), b.probability});
  }
  return out;
}

std::vector<ScoredItem> aggregate_items(std::span<const ScoredSid> decoded,
                                        const SidRegistry& registry,
                                        std::size_t k) {
  std::map<ItemId, ScoredItem> by_item;
  for (const auto& d : decoded) {
    const auto item = registry.item_of(d.sid);
    if (!item) continue;
    auto [it, inserted] = by_item.try_emplace(*item);
    ScoredItem& s = it->second;
    if (inserted) {
      s.item = *item;
      s.best_sid = d.sid;
    }
    // Decoded SIDs arrive in rank order, so the first one is the best.
    s.score += d.probability;
  }
  std::vector<ScoredItem> ranked;
  ranked.reserve(by_item.size());
  for (auto& [item, s] : by_item) ranked.push_back(std::move(s));
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const ScoredItem& a, const ScoredItem& b) {
                     return a.score > b.score;
                   });
  if (ranked.size() > k) ranked.resize(k);
  return ranked;
}

}  // namespace pctx

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
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "pctx/common.hpp"
#include "pctx/core.hpp"

namespace pctx {

struct InteractionRecord {
  std::string user;
  std::string item;
  std::int64_t timestamp = 0;
};

// Preprocessed corpus: k-core filtered, chronologically sorted, truncated
// to the most recent max_seq_len items. Sequences are ordered by user key
// and items are reindexed in raw-string order.
struct InteractionLog {
  std::vector<InteractionSequence> sequences;
  Vocabulary items;

  std::size_t num_interactions() const;
};

// Parses `user \t item \t timestamp` lines. Blank lines are skipped;
// malformed lines throw ParseError with the 1-based line number.
std::vector<InteractionRecord> parse_interaction_records(std::istream& in);

// Iteratively drops users and items with fewer than `min_interactions`
// records until nothing changes. Record order is preserved.
std::vector<InteractionRecord> kcore_filter(
    std::vector<InteractionRecord> records, std::size_t min_interactions);

// kcore_filter + per-user chronological sort + suffix truncation + dense
// reindexing. Throws Error("corpus vanished ...") if nothing survives.
InteractionLog build_log(std::vector<InteractionRecord> records,
                         const PipelineConfig& cfg);

InteractionLog load_interactions(const std::string& path,
                                 const PipelineConfig& cfg);

// Writes the log back in the interaction format; timestamps fall back to
// positions when the sequence carries none.
void write_interactions(const InteractionLog& log, std::ostream& out);

// Dense vectors keyed by string: raw item strings for feature tables,
// `user:position` for context tables. All rows share `dim`.
class EmbeddingTable {
 public:
  EmbeddingTable() = default;
  explicit EmbeddingTable(std::size_t dim) : rows_(0, dim), dim_(dim) {}

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return keys_.size(); }
  const std::vector<std::string>& keys() const { return keys_; }
  std::span<const double> row(std::size_t i) const { return rows_.row(i); }
  const Matrix& matrix() const { return rows_; }

  // Throws on a duplicate key, a length mismatch or a non-finite value.
  void add(std::string key, std::span<const double> values);
  std::optional<std::size_t> find(const std::string& key) const;

  friend bool operator==(const EmbeddingTable& a, const EmbeddingTable& b) {
    return a.dim_ == b.dim_ && a.keys_ == b.keys_ && a.rows_ == b.rows_;
  }

 private:
  std::vector<std::string> keys_;
  Matrix rows_;
  std::unordered_map<std::string, std::size_t> index_;
  std::size_t dim_ = 0;
};

// Text format: line 1 `N D`, then N lines `key \t f_1 ... f_D`. Files
// starting with the 8-byte magic `PCTXEMB1` are read as the binary variant.
// With `expected_items`, keys outside the vocabulary are rejected.
EmbeddingTable read_embeddings(std::istream& in,
                               const Vocabulary* expected_items = nullptr);
EmbeddingTable load_embeddings(const std::string& path,
                               const Vocabulary* expected_items = nullptr);

void write_embeddings_text(const EmbeddingTable& table, std::ostream& out);
// Binary layout (little-endian): magic, u64 N, u64 D, then per row
// u32 key length, key bytes, D x f64.
void write_embeddings_binary(const EmbeddingTable& table, std::ostream& out);

// Feature rows in ItemId order. Throws if an item has no row.
Matrix bind_features(const EmbeddingTable& table, const Vocabulary& items);

// Keeps only rows whose key is in the vocabulary, in ItemId order.
EmbeddingTable restrict_to_vocabulary(const EmbeddingTable& table,
                                      const Vocabulary& items);

// Leave-one-out split of one sequence.
struct SplitEntry {
  std::uint32_t sequence = 0;  // index into InteractionLog::sequences
  std::vector<ItemId> train;
  ItemId validation;
  ItemId test;
};

struct Split {
  std::vector<SplitEntry> entries;
  std::size_t excluded = 0;  // sequences shorter than 3
};

Split make_split(const InteractionLog& log);

struct SyntheticOptions {
  std::size_t n_users = 2000;
  std::size_t n_items = 300;
  std::size_t n_intents = 3;
  std::uint64_t seed = 7;
  std::size_t dim = 16;
  double dual_fraction = 0.3;
  double on_intent = 0.9;
  // Share of a dual item's feature vector tied to its primary intent.
  double primary_weight = 0.6;
  // Sampling weight of a dual item inside its secondary intent's pool
  // (primary pool weight is 1).
  double secondary_exposure = 0.7;
  double item_spread = 0.35;
  double noise = 0.05;
  double popularity_exponent = 0.8;
  std::size_t min_len = 8;
  std::size_t max_len = 24;
  std::size_t min_interactions = 5;
  std::size_t max_seq_len = 20;
};

// Seeded multi-intent corpus with retained ground truth.
struct SyntheticCorpus {
  InteractionLog log;
  EmbeddingTable features;
  // Intents per item, indexed by the log's ItemId; primary intent first.
  std::vector<std::vector<std::uint32_t>> item_intents;
  // Intent per log sequence.
  std::vector<std::uint32_t> user_intent;
};

SyntheticCorpus generate_synthetic(const SyntheticOptions& options);
SyntheticCorpus generate_synthetic(std::size_t n_users, std::size_t n_items,
                                   std::size_t n_intents, std::uint64_t seed);

}  // namespace pctx

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

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "pctx/core.hpp"
#include "pctx/gr.hpp"
#include "pctx/ingest.hpp"
#include "pctx/registry.hpp"
#include "pctx/tokenize.hpp"

namespace pctx {

// 1 / log2(rank + 1) for a 1-based rank within the cutoff, else 0.
double ndcg_contribution(std::size_t rank, std::size_t k);

struct UserOutcome {
  std::size_t sequence = 0;  // index into the log
  ItemId target;
  std::size_t rank = 0;   // 1-based position of the target; 0 on a miss
  std::vector<ScoredItem> ranking;
};

struct MetricsReport {
  std::vector<std::size_t> ks;
  std::vector<double> recall;  // aligned with ks
  std::vector<double> ndcg;
  std::size_t users = 0;
  std::size_t unknown_targets = 0;  // targets without any semantic ID
  std::vector<UserOutcome> outcomes;  // in split order
};

// Model input for one user: the train prefix plus the validation item,
// tokenized in context. Items the registry does not know are skipped. When
// the encoder has no row for the validation occurrence, that item takes its
// popular SID.
std::vector<SemanticId> evaluation_input(const InteractionSequence& seq,
                                         const SplitEntry& entry,
                                         const Tokenizer& tokenizer);

// Leave-one-out full ranking. Each user's decoded beam is aggregated into an
// item ranking of depth max(ks); a target never reached counts as a miss.
MetricsReport evaluate(const TokenModel& model, const Tokenizer& tokenizer,
                       const InteractionLog& log, const Split& split,
                       std::size_t beam_width, std::span<const std::size_t> ks,
                       std::size_t threads = 1);

// `metric,value` rows: recall@K, ndcg@K, users, unknown_targets.
void write_metrics_csv(const MetricsReport& report, std::ostream& out);

// `user \t rank \t item \t score \t sid` for every ranked item.
void write_predictions(const MetricsReport& report, const InteractionLog& log,
                       std::ostream& out);

// Probability that an occurrence at each position (1-based, index p-1) is
// tokenized with its item's popular SID, after gamma-augmentation under
// `policy`. Each training occurrence contributes its exact expectation
// (1 - gamma) [chosen == popular] + gamma P(replacement == popular).
struct PopularRate {
  std::vector<double> rate;
  std::vector<std::size_t> occurrences;
};

PopularRate popular_rate(const InteractionLog& log, const Split& split,
                         const Tokenizer& tokenizer, double gamma,
                         ReplacementPolicy policy,
                         std::size_t max_position = 20,
                         std::size_t threads = 1);

// `position,rate,occurrences` for positions with data.
void write_popular_rate_csv(const PopularRate& rate, std::ostream& out);

// Spearman rank correlation of (position, rate) over positions with data,
// average ranks for ties. Returns 0 for fewer than two points or a constant
// series.
double position_spearman(const PopularRate& rate);

struct SweepRow {
  std::string parameter;
  double value = 0.0;
  MetricsReport metrics;
  SidStats sid_stats;
};

// `parameter,value,recall@K...,ndcg@K...,sid_ratio,total_sids`.
void write_sweep_csv(std::span<const SweepRow> rows, std::ostream& out);

// `sids_per_item,items` histogram rows.
void write_sid_stats_csv(const SidStats& stats, std::ostream& out);

}  // namespace pctx

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

#include "pctx/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

#include "pctx/context.hpp"

namespace pctx {

double ndcg_contribution(std::size_t rank, std::size_t k) {
  if (rank == 0 || rank > k) return 0.0;
  return 1.0 / std::log2(static_cast<double>(rank) + 1.0);
}

std::vector<SemanticId> evaluation_input(const InteractionSequence& seq,
                                         const SplitEntry& entry,
                                         const Tokenizer& tokenizer) {
  const std::size_t length = entry.train.size() + 1;
  std::vector<SemanticId> input;
  input.reserve(length);
  for (std::size_t p = 1; p <= length; ++p) {
    const ItemId item = seq.items[p - 1];
    if (!tokenizer.registry().contains(item)) continue;
    // External tables need only cover training occurrences; the validation
    // item falls back to its popular SID when its row is absent.
    const std::size_t k = tokenizer.encoder().covers(seq, p)
                              ? tokenizer.choose(seq, p)
                              : tokenizer.registry().popular_index(item);
    input.push_back(tokenizer.registry().entries(item)[k].sid);
  }
  return input;
}

MetricsReport evaluate(const TokenModel& model, const Tokenizer& tokenizer,
                       const InteractionLog& log, const Split& split,
                       std::size_t beam_width, std::span<const std::size_t> ks,
                       std::size_t threads) {
  if (ks.empty()) throw Error("evaluate: no cutoffs");
  const std::size_t depth = *std::max_element(ks.begin(), ks.end());

  MetricsReport report;
  report.ks.assign(ks.begin(), ks.end());
  report.users = split.entries.size();
  report.outcomes.resize(split.entries.size());

  parallel_for(split.entries.size(), threads, [&](std::size_t u) {
    const auto& entry = split.entries[u];
    const auto& seq = log.sequences[entry.sequence];
    UserOutcome& out = report.outcomes[u];
    out.sequence = entry.sequence;
    out.target = entry.test;
    const auto input = evaluation_input(seq, entry, tokenizer);
    const auto decoded = beam_search(model, input, beam_width);
    out.ranking = aggregate_items(decoded, tokenizer.registry(), depth);
    for (std::size_t r = 0; r < out.ranking.size(); ++r) {
      if (out.ranking[r].item == entry.test) {
        out.rank = r + 1;
        break;
      }
    }
  });

  // Fixed-order reduction keeps the sums independent of the thread count.
  report.recall.assign(ks.size(), 0.0);
  report.ndcg.assign(ks.size(), 0.0);
  for (const auto& o : report.outcomes) {
    if (!tokenizer.registry().contains(o.target)) ++report.unknown_targets;
    for (std::size_t i = 0; i < ks.size(); ++i) {
      if (o.rank != 0 && o.rank <= ks[i]) report.recall[i] += 1.0;
      report.ndcg[i] += ndcg_contribution(o.rank, ks[i]);
    }
  }
  if (report.users > 0) {
    const double n = static_cast<double>(report.users);
    for (std::size_t i = 0; i < ks.size(); ++i) {
      report.recall[i] /= n;
      report.ndcg[i] /= n;
    }
  }
  return report;
}

void write_metrics_csv(const MetricsReport& report, std::ostream& out) {
  out << "metric,value\n";
  for (std::size_t i = 0; i < report.ks.size(); ++i) {
    out << "recall@" << report.ks[i] << ',' << format_double(report.recall[i])
        << '\n';
  }
  for (std::size_t i = 0; i < report.ks.size(); ++i) {
    out << "ndcg@" << report.ks[i] << ',' << format_double(report.ndcg[i])
        << '\n';
  }
  out << "users," << report.users << '\n';
  out << "unknown_targets," << report.unknown_targets << '\n';
}

void write_predictions(const MetricsReport& report, const InteractionLog& log,
                       std::ostream& out) {
  for (const auto& o : report.outcomes) {
    const std::string& user = log.sequences[o.sequence].user;
    for (std::size_t r = 0; r < o.ranking.size(); ++r) {
      const auto& s = o.ranking[r];
      out << user << '\t' << (r + 1) << '\t' << log.items.raw(s.item) << '\t'
          << format_double(s.score) << '\t' << s.best_sid.to_string() << '\n';
    }
  }
}

namespace {

double replacement_hits_popular(std::span<const SidEntry> entries,
                                std::size_t chosen, std::size_t popular,
                                ReplacementPolicy policy) {
  const std::size_t n = entries.size();
  switch (policy) {
    case ReplacementPolicy::kOtherUniform:
      return chosen == popular ? 0.0 : 1.0 / static_cast<double>(n - 1);
    case ReplacementPolicy::kAllUniform:
      return 1.0 / static_cast<double>(n);
    case ReplacementPolicy::kFrequencyWeighted: {
      if (chosen == popular) return 0.0;
      double total = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        if (j != chosen) total += static_cast<double>(entries[j].frequency);
      }
      if (total <= 0.0) return 1.0 / static_cast<double>(n - 1);
      return static_cast<double>(entries[popular].frequency) / total;
    }
  }
  return 0.0;
}

}  // namespace

PopularRate popular_rate(const InteractionLog& log, const Split& split,
                         const Tokenizer& tokenizer, double gamma,
                         ReplacementPolicy policy, std::size_t max_position,
                         std::size_t threads) {
  const auto& registry = tokenizer.registry();
  // Per-entry partial sums, reduced in split order afterwards.
  std::vector<Vec> sums(split.entries.size());
  std::vector<std::vector<std::size_t>> counts(split.entries.size());
  parallel_for(split.entries.size(), threads, [&](std::size_t u) {
    const auto& entry = split.entries[u];
    const auto& seq = log.sequences[entry.sequence];
    const std::size_t len = std::min(entry.train.size(), max_position);
    sums[u].assign(len, 0.0);
    counts[u].assign(len, 0);
    for (std::size_t p = 1; p <= len; ++p) {
      const ItemId item = seq.items[p - 1];
      if (!registry.contains(item)) continue;
      const auto entries = registry.entries(item);
      const std::size_t popular = registry.popular_index(item);
      const std::size_t chosen = tokenizer.choose(seq, p);
      double prob = 1.0;
      if (entries.size() > 1) {
        prob = (1.0 - gamma) * (chosen == popular ? 1.0 : 0.0) +
               gamma * replacement_hits_popular(entries, chosen, popular,
                                                policy);
      }
      sums[u][p - 1] += prob;
      ++counts[u][p - 1];
    }
  });

  PopularRate out;
  out.rate.assign(max_position, 0.0);
  out.occurrences.assign(max_position, 0);
  for (std::size_t u = 0; u < sums.size(); ++u) {
    for (std::size_t p = 0; p < sums[u].size(); ++p) {
      out.rate[p] += sums[u][p];
      out.occurrences[p] += counts[u][p];
    }
  }
  for (std::size_t p = 0; p < max_position; ++p) {
    if (out.occurrences[p] > 0) {
      out.rate[p] /= static_cast<double>(out.occurrences[p]);
    }
  }
  return out;
}

void write_popular_rate_csv(const PopularRate& rate, std::ostream& out) {
  out << "position,rate,occurrences\n";
  for (std::size_t p = 0; p < rate.rate.size(); ++p) {
    if (rate.occurrences[p] == 0) continue;
    out << (p + 1) << ',' << format_double(rate.rate[p]) << ','
        << rate.occurrences[p] << '\n';
  }
}

namespace {

Vec average_ranks(const Vec& values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) {
                     return values[a] < values[b];
                   });
  Vec ranks(values.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && values[order[j + 1]] == values[order[i]]) {
      ++j;
    }
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t m = i; m <= j; ++m) ranks[order[m]] = r;
    i = j + 1;
  }
  return ranks;
}

double pearson(const Vec& x, const Vec& y) {
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace

double position_spearman(const PopularRate& rate) {
  Vec positions;
  Vec values;
  for (std::size_t p = 0; p < rate.rate.size(); ++p) {
    if (rate.occurrences[p] == 0) continue;
    positions.push_back(static_cast<double>(p + 1));
    values.push_back(rate.rate[p]);
  }
  if (positions.size() < 2) return 0.0;
  return pearson(average_ranks(positions), average_ranks(values));
}

void write_sweep_csv(std::span<const SweepRow> rows, std::ostream& out) {
  out << "parameter,value";
  if (!rows.empty()) {
    for (std::size_t k : rows.front().metrics.ks) out << ",recall@" << k;
    for (std::size_t k : rows.front().metrics.ks) out << ",ndcg@" << k;
  }
  out << ",sid_ratio,total_sids\n";
  for (const auto& row : rows) {
    out << row.parameter << ',' << format_double(row.value);
    for (double r : row.metrics.recall) out << ',' << format_double(r);
    for (double n : row.metrics.ndcg) out << ',' << format_double(n);
    out << ',' << format_double(row.sid_stats.ratio) << ','
        << row.sid_stats.total_sids << '\n';
  }
}

void write_sid_stats_csv(const SidStats& stats, std::ostream& out) {
  out << "sids_per_item,items\n";
  for (const auto& [n, items] : stats.histogram) {
    out << n << ',' << items << '\n';
  }
}

}  // namespace pctx

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

// Acceptance runner: one PASS/FAIL line per criterion, nonzero exit if any
// criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "pctx/eval.hpp"
#include "pctx/pipeline.hpp"

namespace pctx {
namespace {

using testing::column_moments;
using testing::enumerate_paths;
using testing::exhaustive_digits;
using testing::random_count_model;
using testing::random_matrix;
using testing::random_registry_entries;
using testing::random_sid;

struct Outcome {
  bool pass = true;
  std::string detail;
};

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof(buf), f, a);
  return buf;
}

// Shared seeded synthetic corpus: 2,000 users, 300 items, 3 intents.
struct Corpus {
  SyntheticCorpus synthetic;
  Dataset data;
};

const Corpus& corpus() {
  static const Corpus c = [] {
    auto syn = generate_synthetic(2000, 300, 3, 7);
    auto data = make_dataset(syn.log, syn.features);
    return Corpus{std::move(syn), std::move(data)};
  }();
  return c;
}

ContextEncoder default_encoder() {
  return ContextEncoder::decayed_mean(PipelineConfig{}.context_decay);
}

Outcome quantization_oracle() {
  Rng rng(101);
  std::size_t compared = 0, mismatched = 0, error_rises = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 8 + rng.below(57);  // 8..64 vectors
    const std::size_t dim = 2 + rng.below(4);
    const auto rows = random_matrix(n, dim, rng);
    const std::vector<std::size_t> sizes{2 + rng.below(3), 2 + rng.below(3)};
    const auto books = fit_codebooks(rows, sizes, derive_seed(101, trial));
    for (std::size_t r = 0; r < rows.rows(); ++r) {
      const auto greedy = encode_digits(rows.row(r), books);
      const auto best = exhaustive_digits(rows.row(r), books);
      if (greedy[0] != best[0]) continue;
      ++compared;
      if (greedy != best) ++mismatched;
    }
    const auto err = residual_error_by_level(rows, books);
    for (std::size_t l = 1; l < err.size(); ++l) {
      if (err[l] > err[l - 1]) ++error_rises;
    }
  }
  Outcome o;
  o.pass = mismatched == 0 && error_rises == 0 && compared > 0;
  o.detail = std::to_string(compared) + " level-1 agreements, " +
             std::to_string(mismatched) + " digit mismatches, " +
             std::to_string(error_rises) + " error increases over 100 trials";
  return o;
}

Outcome beam_oracle() {
  Rng rng(202);
  std::size_t failures = 0;
  std::size_t largest = 0;
  for (int m = 0; m < 20; ++m) {
    std::vector<std::size_t> vocab;
    std::size_t space = 1;
    const std::size_t levels = 2 + rng.below(2);
    for (std::size_t l = 0; l < levels; ++l) {
      const std::size_t v = 2 + rng.below(7);
      vocab.push_back(v);
      space *= v;
    }
    if (space > 512) {
      vocab.back() = std::max<std::size_t>(1, 512 / (space / vocab.back()));
      space = 1;
      for (auto v : vocab) space *= v;
    }
    largest = std::max(largest, space);
    CountModelOptions opt;
    opt.smoothing = 0.01 * static_cast<double>(1 + rng.below(10));
    opt.min_support = 1 + rng.below(3);
    const auto model = random_count_model(vocab, 40 + rng.below(100), opt, rng);
    const std::vector<SemanticId> input{random_sid(vocab, rng),
                                        random_sid(vocab, rng)};
    const auto expect = enumerate_paths(model, input);
    const auto got = beam_search(model, input, space);
    bool ok = got.size() == expect.size();
    for (std::size_t i = 0; ok && i < got.size(); ++i) {
      const auto t = got[i].sid.tokens();
      ok = std::vector<Token>(t.begin(), t.end()) == expect[i].digits &&
           std::abs(got[i].probability - expect[i].probability) <= 1e-12;
    }
    if (!ok) ++failures;
  }
  Outcome o;
  o.pass = failures == 0;
  o.detail = std::to_string(20 - failures) +
             "/20 models match enumeration, largest path space " +
             std::to_string(largest);
  return o;
}

std::multiset<std::size_t> members_of(std::span<const SidEntry> entries) {
  std::multiset<std::size_t> m;
  for (const auto& e : entries) m.insert(e.members.begin(), e.members.end());
  return m;
}

Outcome registry_laws() {
  Rng rng(303);
  std::size_t violations = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t items = 10 + rng.below(40);
    auto per_item = random_registry_entries(items, 1 + rng.below(6),
                                            2 + rng.below(3), 2, 3, rng);
    const double tau = 0.05 * static_cast<double>(rng.below(9));

    std::vector<std::vector<SidEntry>> merged(items);
    for (std::size_t i = 0; i < items; ++i) {
      const auto before = members_of(per_item[i]);
      auto dup = merge_duplicates(per_item[i]);
      if (members_of(dup) != before) ++violations;
      merged[i] = merge_infrequent(std::move(dup), tau);
      if (members_of(merged[i]) != before) ++violations;
    }

    const auto reg = build_registry(per_item, tau);
    std::size_t sids = 0;
    for (std::size_t i = 0; i < items; ++i) {
      const auto entries = reg.entries(ItemId(i));
      sids += entries.size();
      if (entries.size() != merged[i].size()) ++violations;
      std::size_t total = 0;
      std::set<std::vector<Token>> contents;
      for (const auto& e : entries) {
        total += e.frequency;
        if (reg.item_of(e.sid) != ItemId(i)) ++violations;
        const auto c = e.sid.content();
        if (!contents.emplace(c.begin(), c.end()).second) ++violations;
      }
      if (entries.size() > 1) {
        for (const auto& e : entries) {
          if (static_cast<double>(e.frequency) <
              tau * static_cast<double>(total)) {
            ++violations;
          }
        }
      }
    }
    if (reg.total_sids() != sids) ++violations;
  }
  Outcome o;
  o.pass = violations == 0;
  o.detail = std::to_string(violations) + " law violations over 200 registries";
  return o;
}

Tokenizer personalized_tokenizer() {
  PipelineConfig cfg;
  return build_tokenizer(corpus().data, cfg, default_encoder()).tokenizer;
}

Outcome augmentation_statistics(const Tokenizer& tok) {
  const auto& data = corpus().data;
  const auto base = tokenize_corpus(data.log, data.split, tok);
  const auto& reg = tok.registry();
  Outcome o;
  for (double gamma : {0.3, 0.5, 0.7}) {
    std::size_t multi = 0, replaced = 0, single_replaced = 0;
    for (std::size_t d = 0; d < 10000; ++d) {
      const auto& seq = base[d % base.size()];
      Rng rng(derive_seed(404, static_cast<std::uint64_t>(gamma * 10), d));
      const auto aug = augment(seq, reg, gamma, rng);
      for (std::size_t i = 0; i < seq.size(); ++i) {
        const bool changed = aug.sids[i] != seq.sids[i];
        if (reg.entries(seq.provenance[i].item).size() > 1) {
          ++multi;
          if (changed) ++replaced;
        } else if (changed) {
          ++single_replaced;
        }
      }
    }
    const double rate =
        static_cast<double>(replaced) / static_cast<double>(multi);
    if (std::abs(rate - gamma) > 0.02 || single_replaced != 0 || multi == 0) {
      o.pass = false;
    }
    o.detail += fmt("gamma %.1f", gamma) + fmt(": rate %.4f", rate) +
                " over " + std::to_string(multi) + " multi-SID positions, " +
                std::to_string(single_replaced) + " single-SID changes; ";
  }
  o.detail.resize(o.detail.size() - 2);
  return o;
}

std::pair<double, double> rate_range(const PopularRate& r) {
  double lo = 1.0, hi = 0.0;
  for (std::size_t p = 0; p < r.rate.size(); ++p) {
    if (r.occurrences[p] == 0) continue;
    lo = std::min(lo, r.rate[p]);
    hi = std::max(hi, r.rate[p]);
  }
  return {lo, hi};
}

Outcome popular_rate_reproduction(const Tokenizer& personalized) {
  const auto& data = corpus().data;
  PipelineConfig static_cfg;
  static_cfg.mode = TokenizerMode::kStatic;
  const auto static_tok =
      build_tokenizer(data, static_cfg, default_encoder()).tokenizer;

  bool static_ok = true;
  for (double gamma : {0.0, 0.5, 1.0}) {
    const auto r = popular_rate(data.log, data.split, static_tok, gamma,
                                ReplacementPolicy::kAllUniform);
    const auto [lo, hi] = rate_range(r);
    static_ok = static_ok && lo == 1.0 && hi == 1.0;
  }
  const auto r0 = popular_rate(data.log, data.split, personalized, 0.0,
                               ReplacementPolicy::kOtherUniform);
  const double rho = position_spearman(r0);
  const auto r1 = popular_rate(data.log, data.split, personalized, 1.0,
                               ReplacementPolicy::kAllUniform);
  const auto [lo, hi] = rate_range(r1);

  Outcome o;
  o.pass = static_ok && rho < 0.0 && hi - lo < 0.05;
  o.detail = std::string("static rate ") + (static_ok ? "1.0" : "not 1.0") +
             " at every position; gamma 0 Spearman " + fmt("%.3f", rho) +
             "; gamma 1 spread " + fmt("%.4f", hi - lo);
  return o;
}

Outcome tau_monotonicity() {
  const std::vector<double> taus{0.0, 0.1, 0.2, 0.3, 0.4};
  PipelineConfig cfg;
  Outcome o;
  double prev = INFINITY;
  for (double tau : taus) {
    cfg.tau = tau;
    const auto build = build_tokenizer(corpus().data, cfg, default_encoder());
    const double ratio = sid_stats(build.tokenizer.registry()).ratio;
    if (ratio > prev) o.pass = false;
    prev = ratio;
    o.detail += fmt("tau %.1f", tau) + fmt(" -> %.3f; ", ratio);
  }
  o.detail = "SID ratio " + o.detail.substr(0, o.detail.size() - 2);
  return o;
}

// Share of dual-intent occurrences whose SID differs from the modal SID
// that the item receives in its other intent population.
double cross_population_divergence(const Tokenizer& tok) {
  const auto& c = corpus();
  const auto& data = c.data;
  using Key = std::pair<std::size_t, std::uint32_t>;
  std::map<Key, std::map<std::size_t, std::size_t>> counts;
  struct Occ {
    std::size_t item;
    std::uint32_t intent;
    std::size_t facet;
  };
  std::vector<Occ> occs;
  for (const auto& e : data.split.entries) {
    const auto& seq = data.log.sequences[e.sequence];
    const auto intent = c.synthetic.user_intent[e.sequence];
    for (std::size_t p = 1; p <= e.train.size(); ++p) {
      const std::size_t item = seq.items[p - 1].index();
      const auto& ii = c.synthetic.item_intents[item];
      if (ii.size() != 2 || (intent != ii[0] && intent != ii[1])) continue;
      const std::size_t k = tok.choose(seq, p);
      ++counts[{item, intent}][k];
      occs.push_back({item, intent, k});
    }
  }
  std::size_t total = 0, differ = 0;
  for (const auto& o : occs) {
    const auto& ii = c.synthetic.item_intents[o.item];
    const auto other = o.intent == ii[0] ? ii[1] : ii[0];
    const auto it = counts.find({o.item, other});
    if (it == counts.end()) continue;
    std::size_t mode = 0, best = 0;
    for (const auto& [k, n] : it->second) {
      if (n > best) {
        best = n;
        mode = k;
      }
    }
    ++total;
    if (o.facet != mode) ++differ;
  }
  return total == 0 ? 0.0
                    : static_cast<double>(differ) / static_cast<double>(total);
}

std::size_t recall_at_10(const MetricsReport& m) {
  for (std::size_t i = 0; i < m.ks.size(); ++i) {
    if (m.ks[i] == 10) return i;
  }
  return m.ks.size();
}

Outcome directional_end_to_end() {
  const auto& data = corpus().data;
  PipelineConfig cfg;
  cfg.mode = TokenizerMode::kPersonalized;
  const auto pers = run_experiment(data, cfg, default_encoder());
  cfg.mode = TokenizerMode::kStatic;
  const auto stat = run_experiment(data, cfg, default_encoder());
  const std::size_t k = recall_at_10(pers.metrics);
  Outcome o;
  if (k == pers.metrics.ks.size()) {
    o.pass = false;
    o.detail = "Recall@10 not among the configured cutoffs";
    return o;
  }
  const double rp = pers.metrics.recall[k];
  const double rs = stat.metrics.recall[k];
  const double div = cross_population_divergence(pers.build.tokenizer);
  o.pass = rp >= rs && div >= 0.6;
  o.detail = "Recall@10 personalized " + fmt("%.4f", rp) + " vs static " +
             fmt("%.4f", rs) + "; cross-population SID divergence " +
             fmt("%.3f", div);
  return o;
}

std::string pipeline_fingerprint(std::size_t threads) {
  const auto& data = corpus().data;
  PipelineConfig cfg;
  cfg.threads = threads;
  const auto ex = run_experiment(data, cfg, default_encoder());
  std::ostringstream reg, tokens, metrics;
  write_registry(ex.build.tokenizer.registry(), data.log.items, reg);
  const auto corpus_tokens =
      tokenize_corpus(data.log, data.split, ex.build.tokenizer, threads);
  write_token_corpus(corpus_tokens, tokens);
  write_metrics_csv(ex.metrics, metrics);
  return sha256_hex(reg.str()) + sha256_hex(tokens.str()) +
         sha256_hex(metrics.str());
}

Outcome determinism() {
  const auto a1 = pipeline_fingerprint(1);
  const auto b1 = pipeline_fingerprint(1);
  const auto a8 = pipeline_fingerprint(8);
  const auto b8 = pipeline_fingerprint(8);
  Outcome o;
  o.pass = a1 == b1 && a8 == b8;
  o.detail = std::string("1 thread ") + (a1 == b1 ? "identical" : "differs") +
             ", 8 threads " + (a8 == b8 ? "identical" : "differs") +
             ", 1 vs 8 " + (a1 == a8 ? "identical" : "differs");
  return o;
}

Outcome whitening_contract() {
  Rng rng(909);
  double worst_mean = 0.0, worst_var = 0.0;
  for (int fit = 0; fit < 50; ++fit) {
    const std::size_t dim = 2 + rng.below(10);
    const std::size_t n = dim + 5 + rng.below(300);
    Matrix rows = random_matrix(n, dim, rng);
    // Random mixing, offsets and scales; some fits are rank deficient.
    const Matrix mix = random_matrix(dim, dim, rng);
    const bool deficient = fit % 5 == 0;
    Matrix x(n, dim);
    for (std::size_t r = 0; r < n; ++r) {
      for (std::size_t c = 0; c < dim; ++c) {
        double s = 3.0 * static_cast<double>(c);
        for (std::size_t k = 0; k < dim; ++k) {
          if (deficient && k == dim - 1) continue;
          s += rows(r, k) * mix(k, c) * (1.0 + static_cast<double>(k));
        }
        x(r, c) = s;
      }
    }
    const auto w = fit_whitening(x);
    const auto out = w.apply(x);
    const auto [mean, var] = column_moments(out);
    for (std::size_t c = 0; c < out.cols(); ++c) {
      worst_mean = std::max(worst_mean, std::abs(mean[c]));
      worst_var = std::max(worst_var, std::abs(var[c] - 1.0));
    }
  }
  Outcome o;
  o.pass = worst_mean < 1e-4 && worst_var < 1e-3;
  o.detail = "50 fits, max |mean| " + fmt("%.2e", worst_mean) +
             ", max |var - 1| " + fmt("%.2e", worst_var);
  return o;
}

}  // namespace
}  // namespace pctx

int main() {
  using namespace pctx;
  using Clock = std::chrono::steady_clock;

  struct Criterion {
    int id;
    const char* name;
    double limit_seconds;  // 0 for no limit
    std::function<Outcome()> run;
  };

  // Criteria 4 and 5 share the personalized tokenizer; building it is
  // charged to criterion 5, which carries the runtime bound.
  std::optional<Tokenizer> personalized;
  auto tokenizer = [&]() -> const Tokenizer& {
    if (!personalized) personalized.emplace(personalized_tokenizer());
    return *personalized;
  };

  const std::vector<Criterion> criteria{
      {1, "quantization oracle", 1.0, quantization_oracle},
      {2, "beam-search oracle", 1.0, beam_oracle},
      {3, "registry laws", 5.0, registry_laws},
      {5, "popular-rate reproduction", 60.0,
       [&] { return popular_rate_reproduction(tokenizer()); }},
      {4, "augmentation statistics", 0.0,
       [&] { return augmentation_statistics(tokenizer()); }},
      {6, "tau monotonicity", 0.0, tau_monotonicity},
      {7, "directional end-to-end", 120.0, directional_end_to_end},
      {8, "determinism", 0.0, determinism},
      {9, "whitening contract", 0.0, whitening_contract},
  };

  std::map<int, std::string> lines;
  bool all = true;
  for (const auto& c : criteria) {
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("threw: ") + e.what();
    }
    const double secs =
        std::chrono::duration<double>(Clock::now() - t0).count();
    if (c.limit_seconds > 0.0 && secs >= c.limit_seconds) {
      o.pass = false;
      o.detail += "; exceeded " + fmt("%.0f s", c.limit_seconds);
    }
    all = all && o.pass;
    char head[160];
    std::snprintf(head, sizeof(head), "%s criterion %d: %s (%.2f s) - ",
                  o.pass ? "PASS" : "FAIL", c.id, c.name, secs);
    lines[c.id] = head + o.detail;
  }
  for (const auto& [id, line] : lines) std::printf("%s\n", line.c_str());
  std::printf("%s\n", all ? "ALL CRITERIA PASS" : "SOME CRITERIA FAIL");
  return all ? 0 : 1;
}

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

#include <gtest/gtest.h>

#include <map>
#include <set>
#include <sstream>

#include "pctx/ingest.hpp"

namespace pctx {
namespace {

std::vector<InteractionRecord> full_grid(std::size_t users, std::size_t items) {
  std::vector<InteractionRecord> out;
  for (std::size_t u = 0; u < users; ++u) {
    for (std::size_t i = 0; i < items; ++i) {
      out.push_back({"u" + std::to_string(u), "i" + std::to_string(i),
                     static_cast<std::int64_t>(100 - i)});
    }
  }
  return out;
}

TEST(ParseRecords, ReadsLinesAndReportsLineNumbers) {
  std::istringstream ok("u1\ti1\t5\n\nu2\ti2\t7\n");
  const auto recs = parse_interaction_records(ok);
  ASSERT_EQ(recs.size(), 2u);
  EXPECT_EQ(recs[1].item, "i2");
  EXPECT_EQ(recs[1].timestamp, 7);

  std::istringstream bad("u1\ti1\t5\nu2\ti2\n");
  try {
    parse_interaction_records(bad);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos);
  }
}

TEST(KCore, UserBelowThresholdIsRemoved) {
  auto recs = full_grid(6, 6);
  for (int i = 0; i < 4; ++i) {
    recs.push_back({"short", "i" + std::to_string(i), i});
  }
  const auto kept = kcore_filter(recs, 5);
  for (const auto& r : kept) EXPECT_NE(r.user, "short");
  EXPECT_EQ(kept.size(), 36u);
}

TEST(KCore, CascadesToFixpoint) {
  // w0 and y3 fall short on the first pass; losing them pushes w1..w4 below
  // the threshold, which in turn empties x and y0..y2.
  auto recs = full_grid(5, 5);
  for (int w = 0; w < 5; ++w) {
    const std::string user = "w" + std::to_string(w);
    recs.push_back({user, "x", 1});
    for (int y = 0; y < 4; ++y) {
      if (w == 0 && y == 3) continue;
      recs.push_back({user, "y" + std::to_string(y), 2 + y});
    }
  }
  const auto kept = kcore_filter(recs, 5);
  EXPECT_EQ(kept.size(), 25u);
  for (const auto& r : kept) EXPECT_EQ(r.user[0], 'u');
  EXPECT_EQ(kcore_filter(kept, 5).size(), kept.size());
}

TEST(KCore, EverythingDenseIsUnchanged) {
  const auto recs = full_grid(7, 6);
  EXPECT_EQ(kcore_filter(recs, 5).size(), recs.size());
}

TEST(BuildLog, SortsChronologicallyAndKeepsMostRecent) {
  PipelineConfig cfg;
  cfg.min_interactions = 1;
  std::vector<InteractionRecord> recs;
  for (int t = 0; t < 25; ++t) {
    recs.push_back({"u", "i" + std::to_string(t), 1000 - t});
  }
  const auto log = build_log(recs, cfg);
  ASSERT_EQ(log.sequences.size(), 1u);
  const auto& seq = log.sequences[0];
  ASSERT_EQ(seq.items.size(), 20u);
  // Timestamps descend with t, so the most recent 20 are t = 19 .. 0.
  EXPECT_EQ(log.items.raw(seq.items.front()), "i19");
  EXPECT_EQ(log.items.raw(seq.items.back()), "i0");
  for (std::size_t k = 1; k < seq.timestamps.size(); ++k) {
    EXPECT_LE(seq.timestamps[k - 1], seq.timestamps[k]);
  }
}

TEST(BuildLog, CorpusVanishes) {
  PipelineConfig cfg;
  std::vector<InteractionRecord> recs{{"u", "i", 1}};
  try {
    build_log(recs, cfg);
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("corpus vanished"), std::string::npos);
  }
}

TEST(BuildLog, WriteThenReloadIsIdentity) {
  PipelineConfig cfg;
  const auto log = build_log(full_grid(6, 8), cfg);
  std::stringstream ss;
  write_interactions(log, ss);
  const auto again = build_log(parse_interaction_records(ss), cfg);
  ASSERT_EQ(again.sequences.size(), log.sequences.size());
  for (std::size_t s = 0; s < log.sequences.size(); ++s) {
    EXPECT_EQ(again.sequences[s].user, log.sequences[s].user);
    EXPECT_EQ(again.sequences[s].items, log.sequences[s].items);
  }
}

TEST(Embeddings, TextFormatAccepted) {
  std::istringstream in("2 8\na\t1 2 3 4 5 6 7 8\nb\t0 0 0 0 0 0 0 0.5\n");
  const auto t = read_embeddings(in);
  EXPECT_EQ(t.dim(), 8u);
  EXPECT_EQ(t.size(), 2u);
  EXPECT_EQ(t.row(*t.find("b"))[7], 0.5);
}

TEST(Embeddings, RowLengthMismatch) {
  std::istringstream in("1 8\na\t1 2 3 4 5 6 7\n");
  try {
    read_embeddings(in);
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("row length mismatch"),
              std::string::npos);
  }
}

TEST(Embeddings, NonFiniteRejected) {
  std::istringstream in("1 2\na\t1 inf\n");
  try {
    read_embeddings(in);
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("non-finite embedding"),
              std::string::npos);
  }
}

TEST(Embeddings, UnknownItemKeyRejected) {
  Vocabulary v;
  v.intern("a");
  std::istringstream in("1 1\nzz\t1\n");
  EXPECT_THROW(read_embeddings(in, &v), Error);
}

TEST(Embeddings, DuplicateKeyRejected) {
  std::istringstream in("2 1\na\t1\na\t2\n");
  EXPECT_THROW(read_embeddings(in), Error);
}

TEST(Embeddings, TextAndBinaryRoundTripBitExact) {
  Rng rng(4);
  EmbeddingTable t(5);
  for (int i = 0; i < 20; ++i) {
    Vec row(5);
    for (auto& x : row) x = rng.normal() * 1e3 + rng.uniform() * 1e-9;
    t.add("k" + std::to_string(i), row);
  }
  std::stringstream text, bin;
  write_embeddings_text(t, text);
  write_embeddings_binary(t, bin);
  EXPECT_EQ(read_embeddings(text), t);
  EXPECT_EQ(read_embeddings(bin), t);
}

TEST(Split, LeaveOneOut) {
  InteractionLog log;
  for (const char* s : {"a", "b", "c", "d"}) log.items.intern(s);
  auto seq = [&](std::vector<std::uint32_t> ids) {
    InteractionSequence q;
    q.user = "u" + std::to_string(log.sequences.size());
    for (auto i : ids) q.items.push_back(ItemId(i));
    log.sequences.push_back(q);
  };
  seq({0, 1, 2, 3});
  seq({0, 1, 2});
  seq({0, 1});
  const auto split = make_split(log);
  ASSERT_EQ(split.entries.size(), 2u);
  EXPECT_EQ(split.excluded, 1u);
  EXPECT_EQ(split.entries[0].train,
            (std::vector<ItemId>{ItemId(0u), ItemId(1u)}));
  EXPECT_EQ(split.entries[0].validation, ItemId(2u));
  EXPECT_EQ(split.entries[0].test, ItemId(3u));
  EXPECT_EQ(split.entries[1].train, (std::vector<ItemId>{ItemId(0u)}));
  EXPECT_EQ(split.entries[1].test, ItemId(2u));
}

TEST(Split, ReconstructsEverySequence) {
  const auto corpus = generate_synthetic(300, 80, 3, 21);
  const auto split = make_split(corpus.log);
  for (const auto& e : split.entries) {
    auto items = e.train;
    items.push_back(e.validation);
    items.push_back(e.test);
    EXPECT_EQ(items, corpus.log.sequences[e.sequence].items);
  }
}

TEST(Synthetic, DeterministicPerSeed) {
  const auto a = generate_synthetic(200, 60, 3, 5);
  const auto b = generate_synthetic(200, 60, 3, 5);
  const auto c = generate_synthetic(200, 60, 3, 6);
  EXPECT_EQ(a.features, b.features);
  ASSERT_EQ(a.log.sequences.size(), b.log.sequences.size());
  for (std::size_t s = 0; s < a.log.sequences.size(); ++s) {
    EXPECT_EQ(a.log.sequences[s].items, b.log.sequences[s].items);
  }
  EXPECT_FALSE(a.features == c.features);
}

TEST(Synthetic, PreconditionsEnforced) {
  EXPECT_THROW(generate_synthetic(100, 50, 1, 7), Error);
  EXPECT_THROW(generate_synthetic(100, 2, 3, 7), Error);
}

TEST(Synthetic, LogIsAFiveCoreWithCappedSequences) {
  const auto corpus = generate_synthetic(2000, 300, 3, 7);
  std::map<std::uint32_t, std::size_t> item_counts;
  for (const auto& seq : corpus.log.sequences) {
    EXPECT_LE(seq.items.size(), 20u);
    for (auto i : seq.items) ++item_counts[i.value];
  }
  EXPECT_EQ(item_counts.size(), corpus.log.items.size());
  EXPECT_EQ(corpus.features.size(), corpus.log.items.size());
}

TEST(Synthetic, DualItemsReachBothIntentPopulations) {
  const auto corpus = generate_synthetic(2000, 300, 3, 7);
  std::size_t dual = 0, both = 0;
  for (std::size_t i = 0; i < corpus.item_intents.size(); ++i) {
    const auto& intents = corpus.item_intents[i];
    if (intents.size() != 2) continue;
    ++dual;
    std::set<std::uint32_t> seen;
    for (std::size_t s = 0; s < corpus.log.sequences.size(); ++s) {
      for (auto it : corpus.log.sequences[s].items) {
        if (it.index() == i) seen.insert(corpus.user_intent[s]);
      }
    }
    if (seen.count(intents[0]) && seen.count(intents[1])) ++both;
  }
  ASSERT_GT(dual, 0u);
  EXPECT_EQ(both, dual);
}

}  // namespace
}  // namespace pctx

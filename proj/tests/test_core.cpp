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

#include <atomic>
#include <cmath>
#include <set>
#include <stdexcept>

#include "pctx/common.hpp"
#include "pctx/core.hpp"

namespace pctx {
namespace {

TEST(Matrix, AppendRowFixesWidth) {
  Matrix m;
  const Vec a{1, 2, 3};
  m.append_row(a);
  m.append_row(a);
  EXPECT_EQ(m.rows(), 2u);
  EXPECT_EQ(m.cols(), 3u);
  EXPECT_EQ(m(1, 2), 3.0);
  const Vec bad{1, 2};
  EXPECT_THROW(m.append_row(bad), Error);
}

TEST(Rng, SameSeedSameStream) {
  Rng a(5), b(5);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(a.next(), b.next());
}

TEST(Rng, BelowStaysInRangeAndCoversIt) {
  Rng rng(11);
  std::set<std::size_t> seen;
  for (int i = 0; i < 2000; ++i) {
    const auto x = rng.below(7);
    ASSERT_LT(x, 7u);
    seen.insert(x);
  }
  EXPECT_EQ(seen.size(), 7u);
}

TEST(Rng, WeightedNeverPicksZeroWeight) {
  Rng rng(3);
  const Vec w{0.0, 2.0, 0.0, 1.0};
  std::size_t ones = 0;
  for (int i = 0; i < 3000; ++i) {
    const auto k = rng.weighted(w);
    ASSERT_TRUE(k == 1 || k == 3);
    if (k == 1) ++ones;
  }
  EXPECT_NEAR(ones / 3000.0, 2.0 / 3.0, 0.03);
}

TEST(Rng, NormalMoments) {
  Rng rng(17);
  double s = 0.0, s2 = 0.0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    const double x = rng.normal();
    s += x;
    s2 += x * x;
  }
  EXPECT_NEAR(s / n, 0.0, 0.03);
  EXPECT_NEAR(s2 / n, 1.0, 0.04);
}

TEST(DeriveSeed, DistinguishesArguments) {
  EXPECT_NE(derive_seed(1, 2), derive_seed(1, 3));
  EXPECT_NE(derive_seed(1, 2, 0), derive_seed(1, 2, 1));
  EXPECT_NE(derive_seed(1, 2), derive_seed(2, 2));
  EXPECT_EQ(derive_seed(9, 4, 2), derive_seed(9, 4, 2));
}

TEST(ParallelFor, VisitsEveryIndexOnce) {
  std::vector<std::atomic<int>> hits(1000);
  parallel_for(hits.size(), 4, [&](std::size_t i) { ++hits[i]; });
  for (const auto& h : hits) EXPECT_EQ(h.load(), 1);
}

TEST(ParallelFor, RethrowsLowestIndexFailure) {
  try {
    parallel_for(100, 4, [](std::size_t i) {
      if (i == 30 || i == 80) throw Error("at " + std::to_string(i));
    });
    FAIL() << "expected a throw";
  } catch (const Error& e) {
    EXPECT_STREQ(e.what(), "at 30");
  }
}

TEST(FormatDouble, RoundTripsExactly) {
  Rng rng(8);
  for (int i = 0; i < 500; ++i) {
    const double x = rng.normal() * std::pow(10.0, rng.below(20) - 10.0);
    double y = 0.0;
    ASSERT_TRUE(parse_double(format_double(x), y));
    EXPECT_EQ(x, y);
  }
  EXPECT_EQ(format_double(0.5), "0.5");
}

TEST(SemanticId, LexicographicOrderMatchesTuples) {
  const SemanticId a(std::vector<Token>{1, 2, 3, 0});
  const SemanticId b(std::vector<Token>{1, 2, 4, 0});
  const SemanticId c(std::vector<Token>{1, 3, 0, 0});
  EXPECT_LT(a, b);
  EXPECT_LT(b, c);
  EXPECT_EQ(a.to_string(), "1-2-3-0");
  EXPECT_EQ(a.conflict(), 0);
  EXPECT_EQ(a.content().size(), 3u);
  EXPECT_EQ(SemanticIdHash{}(a), SemanticIdHash{}(SemanticId(a)));
}

TEST(Vocabulary, ReindexingRoundTrips) {
  Vocabulary v;
  const std::vector<std::string> raw{"x", "alpha", "b7", "x"};
  for (const auto& s : raw) v.intern(s);
  EXPECT_EQ(v.size(), 3u);
  for (const auto& s : raw) EXPECT_EQ(v.raw(*v.find(s)), s);
  EXPECT_FALSE(v.find("missing").has_value());
  EXPECT_EQ(v.find("x")->value, 0u);
}

TEST(ModeNames, ParseInvertsToString) {
  for (auto m : {TokenizerMode::kStatic, TokenizerMode::kMultiIdentifier,
                 TokenizerMode::kPersonalized}) {
    EXPECT_EQ(parse_mode(to_string(m)), m);
  }
  for (auto p : {ReplacementPolicy::kOtherUniform,
                 ReplacementPolicy::kAllUniform,
                 ReplacementPolicy::kFrequencyWeighted}) {
    EXPECT_EQ(parse_replacement(to_string(p)), p);
  }
  EXPECT_FALSE(parse_mode("dynamic").has_value());
}

TEST(ValidateConfig, GammaOutOfRangeNamesField) {
  RawConfig raw;
  raw.gamma = 1.2;
  try {
    validate_config(raw);
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_EQ(std::string(e.what()), "gamma must lie in [0,1]");
  }
}

TEST(ValidateConfig, DefaultsFollowTheReferenceSetup) {
  const auto cfg = validate_config(RawConfig{});
  EXPECT_EQ(cfg.alpha, 0.5);
  EXPECT_EQ(cfg.num_digits, 4u);
  EXPECT_EQ(cfg.codebook_sizes, (std::vector<std::size_t>{256, 256, 256}));
  EXPECT_EQ(cfg.beam_width, 50u);
  EXPECT_EQ(cfg.max_seq_len, 20u);
  EXPECT_EQ(cfg.min_interactions, 5u);
  EXPECT_EQ(cfg.mode, TokenizerMode::kPersonalized);
}

TEST(ValidateConfig, DigitCountFollowsCodebooks) {
  RawConfig raw;
  raw.codebook_sizes = std::vector<std::size_t>{64, 64, 64};
  EXPECT_EQ(validate_config(raw).num_digits, 4u);

  raw.codebook_sizes = std::vector<std::size_t>{8, 8};
  EXPECT_EQ(validate_config(raw).num_digits, 3u);

  raw.num_digits = 5;
  EXPECT_THROW(validate_config(raw), ConfigError);
}

TEST(ValidateConfig, RejectsOutOfRangeFields) {
  auto expect_bad = [](auto mutate) {
    RawConfig raw;
    mutate(raw);
    EXPECT_THROW(validate_config(raw), ConfigError);
  };
  expect_bad([](RawConfig& r) { r.alpha = -0.1; });
  expect_bad([](RawConfig& r) { r.tau = 1.5; });
  expect_bad([](RawConfig& r) { r.beam_width = 0; });
  expect_bad([](RawConfig& r) { r.groups = 0; });
  expect_bad([](RawConfig& r) { r.gamma_shape = 0.0; });
  expect_bad([](RawConfig& r) { r.c_start = 0; });
  expect_bad([](RawConfig& r) { r.mode = std::string("dynamic"); });
  expect_bad([](RawConfig& r) { r.context_decay = 0.0; });
  expect_bad([](RawConfig& r) { r.threads = 0; });
}

TEST(ConfigJson, ParsesNestedSectionsAndRejectsUnknownKeys) {
  const auto raw = parse_config_json(R"({
    "seed": 9, "mode": "static",
    "quantize": {"alpha": 0.25, "codebook_sizes": [16, 16]},
    "registry": {"tau": 0.1},
    "tokenize": {"gamma": 0.3, "replacement": "all-uniform"}
  })");
  const auto cfg = validate_config(raw);
  EXPECT_EQ(cfg.seed, 9u);
  EXPECT_EQ(cfg.mode, TokenizerMode::kStatic);
  EXPECT_EQ(cfg.alpha, 0.25);
  EXPECT_EQ(cfg.num_digits, 3u);
  EXPECT_EQ(cfg.tau, 0.1);
  EXPECT_EQ(cfg.gamma, 0.3);
  EXPECT_EQ(cfg.replacement, ReplacementPolicy::kAllUniform);

  EXPECT_THROW(parse_config_json(R"({"quantize": {"alhpa": 0.5}})"),
               ConfigError);
  EXPECT_THROW(parse_config_json(R"({"colour": 1})"), ConfigError);
  EXPECT_THROW(parse_config_json("{not json"), ConfigError);
}

TEST(ConfigJson, CanonicalDumpRoundTrips) {
  RawConfig raw;
  raw.tau = 0.35;
  raw.codebook_sizes = std::vector<std::size_t>{32, 16, 8};
  raw.eval_ks = std::vector<std::size_t>{1, 20};
  raw.whiten = false;
  const auto cfg = validate_config(raw);
  const auto text = config_to_json(cfg);
  const auto again = validate_config(parse_config_json(text));
  EXPECT_EQ(config_to_json(again), text);
  EXPECT_EQ(again.codebook_sizes, cfg.codebook_sizes);
  EXPECT_FALSE(again.whiten);
}

}  // namespace
}  // namespace pctx

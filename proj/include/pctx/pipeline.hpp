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
#include <string_view>
#include <vector>

#include "pctx/condense.hpp"
#include "pctx/context.hpp"
#include "pctx/core.hpp"
#include "pctx/eval.hpp"
#include "pctx/gr.hpp"
#include "pctx/ingest.hpp"
#include "pctx/quantize.hpp"
#include "pctx/registry.hpp"
#include "pctx/tokenize.hpp"

namespace pctx {

struct Dataset {
  InteractionLog log;
  Matrix features;  // rows in ItemId order
  Split split;
};

// Binds the feature table to the log vocabulary and splits the log.
Dataset make_dataset(InteractionLog log, const EmbeddingTable& features);

// Intermediate products of a tokenizer build, kept for export and analysis.
struct TokenizerBuild {
  std::vector<Occurrence> occurrences;  // training occurrences
  EmbeddingTable contexts;              // aligned with occurrences
  CentroidAllocation allocation;
  Condensed condensed;
  ResidualCodebooks codebooks;
  Tokenizer tokenizer;
};

// Contexts -> per-item condensation -> fusion -> whitening -> residual
// quantization -> conflict digits -> merged registry. Static mode uses one
// centroid per item; multi-identifier mode shares the personalized registry
// and differs only at tokenization time.
TokenizerBuild build_tokenizer(const Dataset& data, const PipelineConfig& cfg,
                               const ContextEncoder& encoder);

// Number of tokens per digit level that the registry actually uses.
std::vector<std::size_t> model_vocabulary(const SidRegistry& registry);

TrainingOptions training_options(const PipelineConfig& cfg);
CountModelOptions count_model_options(const PipelineConfig& cfg);

CountTokenModel fit_model(const Dataset& data, const Tokenizer& tokenizer,
                          const PipelineConfig& cfg);

struct Experiment {
  TokenizerBuild build;
  CountTokenModel model;
  MetricsReport metrics;
  SidStats stats;
};

Experiment run_experiment(const Dataset& data, const PipelineConfig& cfg,
                          const ContextEncoder& encoder);

// Reruns the experiment for each value of "gamma" or "tau".
std::vector<SweepRow> run_sweep(const Dataset& data, const PipelineConfig& cfg,
                                const ContextEncoder& encoder,
                                std::string_view parameter,
                                std::span<const double> values);

// Where a tokenizer bundle gets its context encoder back from.
struct ContextSource {
  double decay = 0.8;
  std::string external_path;  // empty for the decayed-mean encoder
};

ContextEncoder make_encoder(const ContextSource& source);

// JSON bundle with mode, alpha, context source, whitening transform and the
// registry (SIDs, facets, frequencies, whitened centroids) keyed by raw item.
void save_tokenizer(const Tokenizer& tokenizer, const Vocabulary& items,
                    const ContextSource& source, std::ostream& out);

// Rebuilds the tokenizer against `items`; fails on unknown item keys.
Tokenizer load_tokenizer(std::istream& in, const Vocabulary& items,
                         Matrix features);

std::string sha256_hex(std::string_view data);
std::string sha256_file(const std::string& path);

}  // namespace pctx

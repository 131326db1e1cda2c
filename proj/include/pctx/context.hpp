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

#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "pctx/common.hpp"
#include "pctx/core.hpp"
#include "pctx/ingest.hpp"

namespace pctx {

// `user:position` key used by context tables.
std::string occurrence_key(std::string_view user, std::size_t position);

// Maps a sequence prefix v_1..v_i (the current item included) to a context
// vector. Two variants:
//   * decayed mean: normalize(sum_j decay^(i-j) * feat(v_j)), unit L2 norm;
//   * external: lookup of precomputed rows keyed by occurrence.
class ContextEncoder {
 public:
  static ContextEncoder decayed_mean(double decay);
  static ContextEncoder external(EmbeddingTable table);

  bool is_external() const { return table_ != nullptr; }
  double decay() const { return decay_; }

  // Output dimension given the feature matrix.
  std::size_t dim(const Matrix& features) const;

  // False when an external table has no row for the occurrence.
  bool covers(const InteractionSequence& seq, std::size_t position) const;

  // `position` is 1-based and must not exceed seq.items.size().
  Vec encode(const InteractionSequence& seq, std::size_t position,
             const Matrix& features) const;

 private:
  ContextEncoder() = default;

  double decay_ = 0.8;
  std::shared_ptr<const EmbeddingTable> table_;
};

// Training occurrences in split order: every position of every train prefix.
std::vector<Occurrence> training_occurrences(const Split& split);

// One context row per training occurrence, keyed `user:position`, in the
// order of training_occurrences(). Independent of `threads`.
EmbeddingTable encode_all(const InteractionLog& log, const Split& split,
                          const Matrix& features, const ContextEncoder& encoder,
                          std::size_t threads = 1);

}  // namespace pctx

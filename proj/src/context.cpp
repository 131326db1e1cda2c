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

#include "pctx/context.hpp"

#include <cmath>

namespace pctx {

std::string occurrence_key(std::string_view user, std::size_t position) {
  std::string key(user);
  key += ':';
  key += std::to_string(position);
  return key;
}

ContextEncoder ContextEncoder::decayed_mean(double decay) {
  if (!(decay > 0.0 && decay <= 1.0)) {
    throw ConfigError("context decay must lie in (0,1]");
  }
  ContextEncoder enc;
  enc.decay_ = decay;
  return enc;
}

ContextEncoder ContextEncoder::external(EmbeddingTable table) {
  ContextEncoder enc;
  enc.table_ = std::make_shared<const EmbeddingTable>(std::move(table));
  return enc;
}

std::size_t ContextEncoder::dim(const Matrix& features) const {
  return table_ ? table_->dim() : features.cols();
}

bool ContextEncoder::covers(const InteractionSequence& seq,
                            std::size_t position) const {
  if (position < 1 || position > seq.items.size()) return false;
  return !table_ ||
         table_->find(occurrence_key(seq.user, position)).has_value();
}

Vec ContextEncoder::encode(const InteractionSequence& seq,
                           std::size_t position,
                           const Matrix& features) const {
  if (position < 1 || position > seq.items.size()) {
    throw Error("context position " + std::to_string(position) +
                " out of range for user '" + seq.user + "'");
  }
  if (table_) {
    const auto row = table_->find(occurrence_key(seq.user, position));
    if (!row) {
      throw Error("external context table has no row for (user '" + seq.user +
                  "', position " + std::to_string(position) + ")");
    }
    const auto r = table_->row(*row);
    return Vec(r.begin(), r.end());
  }

  Vec acc(features.cols(), 0.0);
  for (std::size_t j = 0; j < position; ++j) {
    const auto f = features.row(seq.items[j].index());
    for (std::size_t d = 0; d < acc.size(); ++d) {
      acc[d] = decay_ * acc[d] + f[d];
    }
  }
  const double norm = std::sqrt(squared_norm(acc));
  if (norm > 0.0) {
    for (auto& x : acc) x /= norm;
  }
  return acc;
}

std::vector<Occurrence> training_occurrences(const Split& split) {
  std::vector<Occurrence> out;
  for (const auto& e : split.entries) {
    for (std::size_t p = 0; p < e.train.size(); ++p) {
      out.push_back({e.sequence, static_cast<std::uint32_t>(p + 1),
                     e.train[p]});
    }
  }
  return out;
}

EmbeddingTable encode_all(const InteractionLog& log, const Split& split,
                          const Matrix& features, const ContextEncoder& encoder,
                          std::size_t threads) {
  const auto occurrences = training_occurrences(split);
  const std::size_t dim = encoder.dim(features);
  Matrix rows(occurrences.size(), dim);
  parallel_for(occurrences.size(), threads, [&](std::size_t i) {
    const auto& occ = occurrences[i];
    const Vec v =
        encoder.encode(log.sequences[occ.sequence], occ.position, features);
    std::copy(v.begin(), v.end(), rows.row(i).begin());
  });
  EmbeddingTable table(dim);
  for (std::size_t i = 0; i < occurrences.size(); ++i) {
    const auto& occ = occurrences[i];
    table.add(occurrence_key(log.sequences[occ.sequence].user, occ.position),
              rows.row(i));
  }
  return table;
}

}  // namespace pctx

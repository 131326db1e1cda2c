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
#include <span>
#include <vector>

#include "pctx/common.hpp"

namespace pctx {

struct KMeansResult {
  Matrix centroids;
  std::vector<std::uint32_t> assignment;  // per input row
  std::vector<std::size_t> counts;        // members per centroid
  // Within-cluster SSE after each Lloyd round (assignment + update).
  std::vector<double> sse_history;
  std::size_t iterations = 0;
};

// Index of the closest centroid under squared Euclidean distance; equal
// distances resolve to the lowest index.
std::size_t nearest_centroid(std::span<const double> row,
                             const Matrix& centroids);

// k-means++ (D^2 seeding) followed by Lloyd rounds until the assignment
// stops changing or max_iter rounds ran. A cluster left empty takes over the
// point farthest from its own centroid. Requires 1 <= k <= rows.rows().
KMeansResult kmeans(const Matrix& rows, std::size_t k, std::uint64_t seed,
                    std::size_t max_iter = 100);

double within_cluster_sse(const Matrix& rows, const Matrix& centroids,
                          std::span<const std::uint32_t> assignment);

std::size_t count_distinct_rows(const Matrix& rows);

}  // namespace pctx

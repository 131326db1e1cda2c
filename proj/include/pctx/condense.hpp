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
#include <vector>

#include "pctx/common.hpp"
#include "pctx/core.hpp"
#include "pctx/ingest.hpp"

namespace pctx {

// Per-item centroid budget.
//
// Items with at least one context row are sorted ascending by count (ties
// by id) and cut into T groups whose sizes follow the Gamma(K, 1) density
// evaluated at 1..T and normalized. Group t grants C_start + (t-1)*delta
// centroids; an item with fewer rows than its grant falls back to 1. Items
// with equal counts always share a group, so grants are monotone in count.
struct CentroidAllocation {
  std::vector<std::size_t> group;     // 1-based; 0 for items without rows
  std::vector<std::size_t> assigned;  // grant before the fallback
  std::vector<std::size_t> centroids; // final C per item; 0 without rows
};

// Normalized Gamma(shape, 1) density at the support points 1..groups.
std::vector<double> gamma_group_proportions(std::size_t groups, double shape);

CentroidAllocation allocate_centroids(std::span<const std::size_t> counts,
                                      const AllocationParams& params);

// Every item gets a single centroid (static tokenizer).
CentroidAllocation single_centroid_allocation(
    std::span<const std::size_t> counts);

struct ItemCentroids {
  ItemId item;
  Matrix centroids;
  // Indices into the training-occurrence list, with their centroid index.
  std::vector<std::size_t> members;
  std::vector<std::uint32_t> assignment;
  std::vector<std::size_t> counts;
};

// k-means++ clustering of one item's context rows into `count` centroids.
// Throws if count is 0 or exceeds the number of rows.
ItemCentroids cluster_item(const Matrix& rows, std::size_t count,
                           std::uint64_t seed, std::size_t max_iter = 100);

struct Condensed {
  std::vector<ItemCentroids> items;  // indexed by ItemId; empty if excluded
  std::size_t excluded = 0;          // items with no context rows
};

// Groups context rows by item (rows align with `occurrences`) and clusters
// each item with seed derive_seed(seed, item). Independent of `threads`.
Condensed condense_all(const EmbeddingTable& contexts,
                       std::span<const Occurrence> occurrences,
                       std::size_t num_items,
                       const CentroidAllocation& allocation,
                       std::uint64_t seed, std::size_t max_iter = 100,
                       std::size_t threads = 1);

// Training-occurrence count per item.
std::vector<std::size_t> occurrence_counts(
    std::span<const Occurrence> occurrences, std::size_t num_items);

// `item \t centroid_idx \t member_count \t f_1 ... f_d` (tab separated).
void write_centroids(const Condensed& condensed, const Vocabulary& items,
                     std::ostream& out);

}  // namespace pctx

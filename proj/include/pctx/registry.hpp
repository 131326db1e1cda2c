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
#include <map>
#include <optional>
#include <span>
#include <unordered_map>
#include <vector>

#include "pctx/common.hpp"
#include "pctx/core.hpp"
#include "pctx/ingest.hpp"

namespace pctx {

// One semantic ID of one item.
struct SidEntry {
  SemanticId sid;
  Vec centroid;                      // whitened fused space
  std::size_t frequency = 0;         // training occurrences mapped here
  std::size_t facet = 0;             // condensation centroid index
  std::vector<std::size_t> members;  // training-occurrence indices
};

// Collapses entries whose content digits coincide. The survivor keeps the
// smallest SID and facet; frequencies and members are summed and the
// centroid becomes the frequency-weighted mean. Output is sorted by SID.
std::vector<SidEntry> merge_duplicates(std::vector<SidEntry> entries);

// Repeatedly removes the least frequent entry (ties: smallest SID) while its
// share of the item's occurrences is below tau, folding it into the
// surviving entry with the nearest centroid. The last entry always stays.
std::vector<SidEntry> merge_infrequent(std::vector<SidEntry> entries,
                                       double tau);

// Immutable item <-> semantic ID map.
class SidRegistry {
 public:
  SidRegistry() = default;
  // `per_item[i]` lists the SIDs of item i (may be empty). Throws if a SID
  // is claimed by two items or SID lengths differ.
  explicit SidRegistry(std::vector<std::vector<SidEntry>> per_item);

  std::size_t num_items() const { return items_.size(); }
  std::size_t num_digits() const { return num_digits_; }
  std::size_t total_sids() const { return inverse_.size(); }

  bool contains(ItemId item) const {
    return item.index() < items_.size() && !items_[item.index()].empty();
  }
  std::span<const SidEntry> entries(ItemId item) const {
    return items_[item.index()];
  }
  std::optional<ItemId> item_of(const SemanticId& sid) const;

  // Most frequent SID of the item; ties go to the smallest SID.
  std::size_t popular_index(ItemId item) const {
    return popular_[item.index()];
  }
  const SemanticId& popular(ItemId item) const {
    return items_[item.index()][popular_[item.index()]].sid;
  }

  // Nearest centroid among the item's SIDs; ties go to the smaller SID.
  std::size_t assign_index(ItemId item, std::span<const double> vec) const;
  const SemanticId& assign_sid(ItemId item, std::span<const double> vec) const;

  // Index of `sid` within the item's entries, if it belongs to the item.
  std::optional<std::size_t> index_of(ItemId item,
                                      const SemanticId& sid) const;

 private:
  std::vector<std::vector<SidEntry>> items_;
  std::vector<std::size_t> popular_;
  std::unordered_map<SemanticId, ItemId, SemanticIdHash> inverse_;
  std::size_t num_digits_ = 0;
};

// Applies merge_duplicates then merge_infrequent to each item.
SidRegistry build_registry(std::vector<std::vector<SidEntry>> per_item,
                           double tau);

struct SidStats {
  std::map<std::size_t, std::size_t> histogram;  // SIDs per item -> items
  std::size_t items = 0;                         // items with >= 1 SID
  std::size_t total_sids = 0;
  double ratio = 0.0;  // total_sids / items (1.0 for a static tokenizer)
};

SidStats sid_stats(const SidRegistry& registry);

// `item \t facet \t token_1 \t ... \t token_G \t freq`, items in id order.
void write_registry(const SidRegistry& registry, const Vocabulary& items,
                    std::ostream& out);

// One line per member occurrence of every (item, SID) group:
// `item \t sid \t user \t position \t v_1 ... v_position` (raw item strings).
void export_sid_groups(const SidRegistry& registry, const InteractionLog& log,
                       std::span<const Occurrence> occurrences,
                       std::ostream& out);

}  // namespace pctx

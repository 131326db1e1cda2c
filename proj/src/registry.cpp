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

#include "pctx/registry.hpp"

#include <algorithm>
#include <limits>
#include <ostream>

namespace pctx {

namespace {

bool same_content(const SemanticId& a, const SemanticId& b) {
  const auto ca = a.content();
  const auto cb = b.content();
  return std::equal(ca.begin(), ca.end(), cb.begin(), cb.end());
}

void sort_by_sid(std::vector<SidEntry>& entries) {
  std::sort(entries.begin(), entries.end(),
            [](const SidEntry& a, const SidEntry& b) { return a.sid < b.sid; });
}

}  // namespace

std::vector<SidEntry> merge_duplicates(std::vector<SidEntry> entries) {
  // Sorting by SID makes content-equal entries adjacent, smallest first.
  sort_by_sid(entries);
  std::vector<SidEntry> out;
  for (auto& e : entries) {
    if (out.empty() || !same_content(out.back().sid, e.sid)) {
      out.push_back(std::move(e));
      continue;
    }
    SidEntry& keep = out.back();
    const double wa = static_cast<double>(keep.frequency);
    const double wb = static_cast<double>(e.frequency);
    const double total = wa + wb;
    for (std::size_t d = 0; d < keep.centroid.size(); ++d) {
      keep.centroid[d] = total > 0.0
                             ? (wa * keep.centroid[d] + wb * e.centroid[d]) /
                                   total
                             : 0.5 * (keep.centroid[d] + e.centroid[d]);
    }
    keep.frequency += e.frequency;
    keep.facet = std::min(keep.facet, e.facet);
    keep.members.insert(keep.members.end(), e.members.begin(),
                        e.members.end());
  }
  for (auto& e : out) std::sort(e.members.begin(), e.members.end());
  return out;
}

std::vector<SidEntry> merge_infrequent(std::vector<SidEntry> entries,
                                       double tau) {
  sort_by_sid(entries);
  std::size_t total = 0;
  for (const auto& e : entries) total += e.frequency;
  if (total == 0) return entries;

  while (entries.size() > 1) {
    // Lowest frequency; the scan order resolves ties to the smaller SID.
    std::size_t victim = 0;
    for (std::size_t i = 1; i < entries.size(); ++i) {
      if (entries[i].frequency < entries[victim].frequency) victim = i;
    }
    const double share = static_cast<double>(entries[victim].frequency) /
                         static_cast<double>(total);
    if (!(share < tau)) break;

    std::size_t target = entries.size();
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < entries.size(); ++i) {
      if (i == victim) continue;
      const double d =
          squared_distance(entries[i].centroid, entries[victim].centroid);
      if (d < best) {
        best = d;
        target = i;
      }
    }
    SidEntry removed = std::move(entries[victim]);
    SidEntry& into = entries[target];
    into.frequency += removed.frequency;
    into.members.insert(into.members.end(), removed.members.begin(),
                        removed.members.end());
    std::sort(into.members.begin(), into.members.end());
    entries.erase(entries.begin() + static_cast<std::ptrdiff_t>(victim));
  }
  return entries;
}

SidRegistry::SidRegistry(std::vector<std::vector<SidEntry>> per_item)
    : items_(std::move(per_item)) {
  popular_.assign(items_.size(), 0);
  for (std::size_t i = 0; i < items_.size(); ++i) {
    auto& entries = items_[i];
    sort_by_sid(entries);
    for (std::size_t k = 0; k < entries.size(); ++k) {
      const auto& sid = entries[k].sid;
      if (num_digits_ == 0) num_digits_ = sid.size();
      if (sid.size() != num_digits_ || sid.size() < 2) {
        throw Error("registry: inconsistent semantic ID length for " +
                    sid.to_string());
      }
      auto [it, inserted] = inverse_.emplace(sid, ItemId(i));
      if (!inserted) {
        throw Error("registry: semantic ID " + sid.to_string() +
                    " is claimed by two entries");
      }
      if (entries[k].frequency > entries[popular_[i]].frequency) {
        popular_[i] = k;
      }
    }
  }
}

std::optional<ItemId> SidRegistry::item_of(const SemanticId& sid) const {
  auto it = inverse_.find(sid);
  if (it == inverse_.end()) return std::nullopt;
  return it->second;
}

std::size_t SidRegistry::assign_index(ItemId item,
                                      std::span<const double> vec) const {
  if (!contains(item)) {
    throw Error("registry: unknown item id " + std::to_string(item.value));
  }
  const auto& entries = items_[item.index()];
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < entries.size(); ++k) {
    const double d = squared_distance(vec, entries[k].centroid);
    if (d < best_d) {
      best_d = d;
      best = k;
    }
  }
  return best;
}

const SemanticId& SidRegistry::assign_sid(ItemId item,
                                          std::span<const double> vec) const {
  return items_[item.index()][assign_index(item, vec)].sid;
}

std::optional<std::size_t> SidRegistry::index_of(
    ItemId item, const SemanticId& sid) const {
  if (!contains(item)) return std::nullopt;
  const auto& entries = items_[item.index()];
  auto it = std::lower_bound(
      entries.begin(), entries.end(), sid,
      [](const SidEntry& e, const SemanticId& s) { return e.sid < s; });
  if (it == entries.end() || it->sid != sid) return std::nullopt;
  return static_cast<std::size_t>(it - entries.begin());
}

SidRegistry build_registry(std::vector<std::vector<SidEntry>> per_item,
                           double tau) {
  for (auto& entries : per_item) {
    if (entries.empty()) continue;
    entries = merge_infrequent(merge_duplicates(std::move(entries)), tau);
  }
  return SidRegistry(std::move(per_item));
}

SidStats sid_stats(const SidRegistry& registry) {
  SidStats stats;
  for (std::size_t i = 0; i < registry.num_items(); ++i) {
    const std::size_t n = registry.entries(ItemId(i)).size();
    if (n == 0) continue;
    ++stats.histogram[n];
    ++stats.items;
    stats.total_sids += n;
  }
  stats.ratio = stats.items == 0 ? 0.0
                                 : static_cast<double>(stats.total_sids) /
                                       static_cast<double>(stats.items);
  return stats;
}

void write_registry(const SidRegistry& registry, const Vocabulary& items,
                    std::ostream& out) {
  for (std::size_t i = 0; i < registry.num_items(); ++i) {
    for (const auto& e : registry.entries(ItemId(i))) {
      out << items.raw(ItemId(i)) << '\t' << e.facet;
      for (Token t : e.sid.tokens()) out << '\t' << t;
      out << '\t' << e.frequency << '\n';
    }
  }
}

void export_sid_groups(const SidRegistry& registry, const InteractionLog& log,
                       std::span<const Occurrence> occurrences,
                       std::ostream& out) {
  for (std::size_t i = 0; i < registry.num_items(); ++i) {
    for (const auto& e : registry.entries(ItemId(i))) {
      for (std::size_t m : e.members) {
        const auto& occ = occurrences[m];
        const auto& seq = log.sequences[occ.sequence];
        out << log.items.raw(ItemId(i)) << '\t' << e.sid.to_string() << '\t'
            << seq.user << '\t' << occ.position << '\t';
        for (std::size_t p = 0; p < occ.position; ++p) {
          if (p > 0) out << ' ';
          out << log.items.raw(seq.items[p]);
        }
        out << '\n';
      }
    }
  }
}

}  // namespace pctx

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

#include "pctx/condense.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

#include "pctx/kmeans.hpp"

namespace pctx {

std::vector<double> gamma_group_proportions(std::size_t groups, double shape) {
  std::vector<double> p(groups);
  double total = 0.0;
  for (std::size_t t = 0; t < groups; ++t) {
    const double x = static_cast<double>(t + 1);
    // log-space density of Gamma(shape, theta = 1)
    p[t] = std::exp((shape - 1.0) * std::log(x) - x - std::lgamma(shape));
    total += p[t];
  }
  for (auto& v : p) v /= total;
  return p;
}

CentroidAllocation allocate_centroids(std::span<const std::size_t> counts,
                                      const AllocationParams& params) {
  const std::size_t n_items = counts.size();
  CentroidAllocation alloc;
  alloc.group.assign(n_items, 0);
  alloc.assigned.assign(n_items, 0);
  alloc.centroids.assign(n_items, 0);

  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < n_items; ++i) {
    if (counts[i] > 0) order.push_back(i);
  }
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) {
                     return counts[a] < counts[b];
                   });
  const std::size_t n = order.size();
  if (n == 0) return alloc;

  const auto proportions =
      gamma_group_proportions(params.groups, params.gamma_shape);
  std::vector<std::size_t> bounds(params.groups);
  double cum = 0.0;
  for (std::size_t t = 0; t < params.groups; ++t) {
    cum += proportions[t];
    bounds[t] = static_cast<std::size_t>(std::llround(cum * n));
  }
  bounds.back() = n;

  std::size_t t = 0;
  for (std::size_t r = 0; r < n; ++r) {
    while (r >= bounds[t]) ++t;
    const std::size_t item = order[r];
    // A tie block stays in the group of its first member.
    const std::size_t group =
        (r > 0 && counts[order[r - 1]] == counts[item])
            ? alloc.group[order[r - 1]]
            : t + 1;
    alloc.group[item] = group;
    alloc.assigned[item] = params.c_start + (group - 1) * params.c_step;
    alloc.centroids[item] =
        counts[item] < alloc.assigned[item] ? 1 : alloc.assigned[item];
  }
  return alloc;
}

CentroidAllocation single_centroid_allocation(
    std::span<const std::size_t> counts) {
  CentroidAllocation alloc;
  alloc.group.assign(counts.size(), 0);
  alloc.assigned.assign(counts.size(), 0);
  alloc.centroids.assign(counts.size(), 0);
  for (std::size_t i = 0; i < counts.size(); ++i) {
    if (counts[i] == 0) continue;
    alloc.group[i] = 1;
    alloc.assigned[i] = 1;
    alloc.centroids[i] = 1;
  }
  return alloc;
}

ItemCentroids cluster_item(const Matrix& rows, std::size_t count,
                           std::uint64_t seed, std::size_t max_iter) {
  if (count < 1 || count > rows.rows()) {
    throw Error("cluster_item: centroid count " + std::to_string(count) +
                " exceeds " + std::to_string(rows.rows()) + " context rows");
  }
  auto km = kmeans(rows, count, seed, max_iter);
  ItemCentroids out;
  out.centroids = std::move(km.centroids);
  out.assignment = std::move(km.assignment);
  out.counts = std::move(km.counts);
  out.members.resize(rows.rows());
  std::iota(out.members.begin(), out.members.end(), 0);
  return out;
}

std::vector<std::size_t> occurrence_counts(
    std::span<const Occurrence> occurrences, std::size_t num_items) {
  std::vector<std::size_t> counts(num_items, 0);
  for (const auto& occ : occurrences) ++counts[occ.item.index()];
  return counts;
}

Condensed condense_all(const EmbeddingTable& contexts,
                       std::span<const Occurrence> occurrences,
                       std::size_t num_items,
                       const CentroidAllocation& allocation,
                       std::uint64_t seed, std::size_t max_iter,
                       std::size_t threads) {
  if (contexts.size() != occurrences.size()) {
    throw Error("condense_all: context rows do not match occurrences");
  }
  std::vector<std::vector<std::size_t>> by_item(num_items);
  for (std::size_t i = 0; i < occurrences.size(); ++i) {
    by_item[occurrences[i].item.index()].push_back(i);
  }

  Condensed out;
  out.items.resize(num_items);
  parallel_for(num_items, threads, [&](std::size_t item) {
    const auto& members = by_item[item];
    out.items[item].item = ItemId(item);
    if (members.empty()) return;
    Matrix rows(members.size(), contexts.dim());
    for (std::size_t m = 0; m < members.size(); ++m) {
      const auto src = contexts.row(members[m]);
      std::copy(src.begin(), src.end(), rows.row(m).begin());
    }
    const std::size_t c =
        std::clamp<std::size_t>(allocation.centroids[item], 1, members.size());
    auto clustered =
        cluster_item(rows, c, derive_seed(seed, item), max_iter);
    clustered.item = ItemId(item);
    clustered.members = members;
    out.items[item] = std::move(clustered);
  });
  for (std::size_t item = 0; item < num_items; ++item) {
    if (by_item[item].empty()) ++out.excluded;
  }
  if (out.excluded > 0) {
    log(LogLevel::kInfo, "condense_all: " + std::to_string(out.excluded) +
                             " items have no context rows and are excluded");
  }
  return out;
}

void write_centroids(const Condensed& condensed, const Vocabulary& items,
                     std::ostream& out) {
  for (const auto& ic : condensed.items) {
    for (std::size_t c = 0; c < ic.centroids.rows(); ++c) {
      out << items.raw(ic.item) << '\t' << c << '\t' << ic.counts[c];
      for (double v : ic.centroids.row(c)) out << '\t' << format_double(v);
      out << '\n';
    }
  }
}

}  // namespace pctx

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

#include "pctx/kmeans.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

namespace pctx {

std::size_t nearest_centroid(std::span<const double> row,
                             const Matrix& centroids) {
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < centroids.rows(); ++c) {
    const double d = squared_distance(row, centroids.row(c));
    if (d < best_d) {
      best_d = d;
      best = c;
    }
  }
  return best;
}

double within_cluster_sse(const Matrix& rows, const Matrix& centroids,
                          std::span<const std::uint32_t> assignment) {
  double sse = 0.0;
  for (std::size_t i = 0; i < rows.rows(); ++i) {
    sse += squared_distance(rows.row(i), centroids.row(assignment[i]));
  }
  return sse;
}

std::size_t count_distinct_rows(const Matrix& rows) {
  std::vector<std::size_t> order(rows.rows());
  std::iota(order.begin(), order.end(), 0);
  auto less = [&](std::size_t a, std::size_t b) {
    const auto ra = rows.row(a);
    const auto rb = rows.row(b);
    return std::lexicographical_compare(ra.begin(), ra.end(), rb.begin(),
                                        rb.end());
  };
  std::sort(order.begin(), order.end(), less);
  std::size_t distinct = 0;
  for (std::size_t i = 0; i < order.size(); ++i) {
    if (i == 0 || less(order[i - 1], order[i])) ++distinct;
  }
  return distinct;
}

namespace {

Matrix seed_plus_plus(const Matrix& rows, std::size_t k, Rng& rng) {
  const std::size_t n = rows.rows();
  Matrix centers(k, rows.cols());
  std::vector<bool> chosen(n, false);
  std::vector<double> d2(n, std::numeric_limits<double>::infinity());

  std::size_t pick = rng.below(n);
  for (std::size_t c = 0; c < k; ++c) {
    if (c > 0) {
      double total = 0.0;
      for (double d : d2) total += d;
      if (total > 0.0) {
        pick = rng.weighted(d2);
      } else {
        // Every point coincides with a chosen center.
        pick = static_cast<std::size_t>(
            std::find(chosen.begin(), chosen.end(), false) - chosen.begin());
      }
    }
    chosen[pick] = true;
    const auto src = rows.row(pick);
    std::copy(src.begin(), src.end(), centers.row(c).begin());
    for (std::size_t i = 0; i < n; ++i) {
      d2[i] = std::min(d2[i], squared_distance(rows.row(i), centers.row(c)));
    }
  }
  return centers;
}

void update_centroids(const Matrix& rows,
                      std::span<const std::uint32_t> assignment,
                      Matrix& centroids, std::vector<std::size_t>& counts) {
  const std::size_t k = centroids.rows();
  const std::size_t dim = rows.cols();
  Matrix sums(k, dim);
  counts.assign(k, 0);
  for (std::size_t i = 0; i < rows.rows(); ++i) {
    auto s = sums.row(assignment[i]);
    const auto r = rows.row(i);
    for (std::size_t d = 0; d < dim; ++d) s[d] += r[d];
    ++counts[assignment[i]];
  }
  for (std::size_t c = 0; c < k; ++c) {
    if (counts[c] == 0) continue;
    auto dst = centroids.row(c);
    const auto s = sums.row(c);
    for (std::size_t d = 0; d < dim; ++d) {
      dst[d] = s[d] / static_cast<double>(counts[c]);
    }
  }
}

// Moves, for each empty cluster, the point farthest from its centroid
// (taken from a cluster with more than one member) into it.
bool repair_empty(const Matrix& rows, std::vector<std::uint32_t>& assignment,
                  Matrix& centroids, std::vector<std::size_t>& counts) {
  bool repaired = false;
  for (std::size_t c = 0; c < centroids.rows(); ++c) {
    if (counts[c] != 0) continue;
    std::size_t far = rows.rows();
    double far_d = -1.0;
    for (std::size_t i = 0; i < rows.rows(); ++i) {
      if (counts[assignment[i]] < 2) continue;
      const double d =
          squared_distance(rows.row(i), centroids.row(assignment[i]));
      if (d > far_d) {
        far_d = d;
        far = i;
      }
    }
    if (far == rows.rows()) break;
    --counts[assignment[far]];
    assignment[far] = static_cast<std::uint32_t>(c);
    counts[c] = 1;
    repaired = true;
  }
  if (repaired) update_centroids(rows, assignment, centroids, counts);
  return repaired;
}

}  // namespace

KMeansResult kmeans(const Matrix& rows, std::size_t k, std::uint64_t seed,
                    std::size_t max_iter) {
  if (k < 1 || k > rows.rows()) {
    throw Error("kmeans: need 1 <= k <= rows (k=" + std::to_string(k) +
                ", rows=" + std::to_string(rows.rows()) + ")");
  }
  Rng rng(seed);
  KMeansResult res;
  res.centroids = seed_plus_plus(rows, k, rng);
  const std::size_t n = rows.rows();

  std::vector<std::uint32_t> next(n);
  for (std::size_t iter = 0; iter < std::max<std::size_t>(max_iter, 1);
       ++iter) {
    for (std::size_t i = 0; i < n; ++i) {
      next[i] = static_cast<std::uint32_t>(
          nearest_centroid(rows.row(i), res.centroids));
    }
    if (iter > 0 && next == res.assignment) break;
    res.assignment = next;
    update_centroids(rows, res.assignment, res.centroids, res.counts);
    repair_empty(rows, res.assignment, res.centroids, res.counts);
    res.sse_history.push_back(
        within_cluster_sse(rows, res.centroids, res.assignment));
    res.iterations = iter + 1;
  }
  return res;
}

}  // namespace pctx

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
#include <span>
#include <vector>

#include "pctx/common.hpp"
#include "pctx/core.hpp"

namespace pctx {

// concat(alpha * ctx, (1 - alpha) * feat)
Vec fuse(std::span<const double> ctx, std::span<const double> feat,
         double alpha);

// Affine map x -> P (x - mean), where the rows of P are principal axes
// scaled by 1/sqrt(eigenvalue).
class WhiteningTransform {
 public:
  WhiteningTransform() = default;
  WhiteningTransform(Vec mean, Matrix projection)
      : mean_(std::move(mean)), projection_(std::move(projection)) {}

  // Pass-through transform for pipelines with whitening disabled.
  static WhiteningTransform identity(std::size_t dim);

  std::size_t input_dim() const { return mean_.size(); }
  std::size_t output_dim() const { return projection_.rows(); }
  const Vec& mean() const { return mean_; }
  const Matrix& projection() const { return projection_; }

  Vec apply(std::span<const double> x) const;
  Matrix apply(const Matrix& rows) const;

 private:
  Vec mean_;
  Matrix projection_;
};

inline constexpr double kEigenvalueFloor = 1e-10;

// PCA + whitening on the population covariance. Components with eigenvalue
// below kEigenvalueFloor are dropped; each axis is signed so that its
// largest-magnitude coordinate is positive. Throws when the covariance is
// degenerate (fewer than two rows or all rows identical).
WhiteningTransform fit_whitening(const Matrix& rows);

// One codebook per content digit, fit on the residuals of the level above.
struct ResidualCodebooks {
  std::vector<Matrix> levels;

  std::size_t num_levels() const { return levels.size(); }
  std::size_t dim() const { return levels.empty() ? 0 : levels[0].cols(); }
};

// Level g is k-means on level-g residuals with min(sizes[g], distinct
// residual rows) centroids, seeded by derive_seed(seed, g).
ResidualCodebooks fit_codebooks(const Matrix& rows,
                                std::span<const std::size_t> sizes,
                                std::uint64_t seed,
                                std::size_t max_iter = 100);

// Greedy nearest centroid per level on the running residual.
std::vector<Token> encode_digits(std::span<const double> row,
                                 const ResidualCodebooks& codebooks);

Vec reconstruct(std::span<const Token> digits,
                const ResidualCodebooks& codebooks);

// Mean squared residual norm after 0, 1, ..., L levels (L+1 values).
std::vector<double> residual_error_by_level(const Matrix& rows,
                                            const ResidualCodebooks& codebooks);

void write_codebooks(const ResidualCodebooks& codebooks, std::ostream& out);
ResidualCodebooks read_codebooks(std::istream& in);

struct DigitEntry {
  ItemId item;
  std::size_t facet = 0;
  std::vector<Token> digits;  // G-1 content digits
};

// Appends the conflict digit. Entries sharing content digits are grouped;
// each distinct item in a group gets 0, 1, 2, ... in (item, facet) order and
// all entries of one item share its digit. Output is aligned with `entries`.
// Throws "conflict overflow" if a group holds more items than conflict_size.
std::vector<SemanticId> assign_conflict_digit(
    std::span<const DigitEntry> entries, std::size_t conflict_size);

}  // namespace pctx

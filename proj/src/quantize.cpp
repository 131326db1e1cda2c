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

#include "pctx/quantize.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstring>
#include <istream>
#include <map>
#include <numeric>
#include <ostream>

#include "binary_io.hpp"
#include "pctx/kmeans.hpp"

namespace pctx {

namespace {

constexpr char kCodebookMagic[7] = {'P', 'C', 'T', 'X', 'R', 'Q', '1'};

}  // namespace

Vec fuse(std::span<const double> ctx, std::span<const double> feat,
         double alpha) {
  Vec out;
  out.reserve(ctx.size() + feat.size());
  for (double x : ctx) out.push_back(alpha * x);
  for (double x : feat) out.push_back((1.0 - alpha) * x);
  return out;
}

WhiteningTransform WhiteningTransform::identity(std::size_t dim) {
  Matrix p(dim, dim);
  for (std::size_t i = 0; i < dim; ++i) p(i, i) = 1.0;
  return WhiteningTransform(Vec(dim, 0.0), std::move(p));
}

Vec WhiteningTransform::apply(std::span<const double> x) const {
  if (x.size() != mean_.size()) {
    throw Error("whitening: expected input dim " +
                std::to_string(mean_.size()) + ", got " +
                std::to_string(x.size()));
  }
  Vec out(projection_.rows(), 0.0);
  for (std::size_t r = 0; r < projection_.rows(); ++r) {
    const auto p = projection_.row(r);
    double s = 0.0;
    for (std::size_t c = 0; c < x.size(); ++c) s += p[c] * (x[c] - mean_[c]);
    out[r] = s;
  }
  return out;
}

Matrix WhiteningTransform::apply(const Matrix& rows) const {
  Matrix out(rows.rows(), output_dim());
  for (std::size_t i = 0; i < rows.rows(); ++i) {
    const Vec v = apply(rows.row(i));
    std::copy(v.begin(), v.end(), out.row(i).begin());
  }
  return out;
}

WhiteningTransform fit_whitening(const Matrix& rows) {
  const std::size_t n = rows.rows();
  const std::size_t dim = rows.cols();
  if (n < 2) {
    throw Error("fit_whitening: degenerate covariance (need at least 2 rows)");
  }
  using MatX = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                             Eigen::RowMajor>;
  Eigen::Map<const MatX> x(rows.data().data(), n, dim);
  const Eigen::RowVectorXd mu = x.colwise().mean();
  const MatX centered = x.rowwise() - mu;
  const Eigen::MatrixXd cov =
      (centered.transpose() * centered) / static_cast<double>(n);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  if (solver.info() != Eigen::Success) {
    throw Error("fit_whitening: eigendecomposition failed");
  }
  const auto& values = solver.eigenvalues();   // ascending
  const auto& vectors = solver.eigenvectors();

  std::vector<Vec> axes;
  for (Eigen::Index k = static_cast<Eigen::Index>(dim) - 1; k >= 0; --k) {
    const double lambda = values(k);
    if (!(lambda >= kEigenvalueFloor)) continue;
    Vec axis(dim);
    std::size_t arg = 0;
    for (std::size_t c = 0; c < dim; ++c) {
      axis[c] = vectors(static_cast<Eigen::Index>(c), k);
      if (std::abs(axis[c]) > std::abs(axis[arg])) arg = c;
    }
    const double sign = axis[arg] < 0.0 ? -1.0 : 1.0;
    const double scale = sign / std::sqrt(lambda);
    for (auto& v : axis) v *= scale;
    axes.push_back(std::move(axis));
  }
  if (axes.empty()) {
    throw Error("fit_whitening: degenerate covariance (all rows identical)");
  }
  Matrix projection(axes.size(), dim);
  for (std::size_t r = 0; r < axes.size(); ++r) {
    std::copy(axes[r].begin(), axes[r].end(), projection.row(r).begin());
  }
  return WhiteningTransform(Vec(mu.data(), mu.data() + dim),
                            std::move(projection));
}

ResidualCodebooks fit_codebooks(const Matrix& rows,
                                std::span<const std::size_t> sizes,
                                std::uint64_t seed, std::size_t max_iter) {
  if (rows.empty()) throw Error("fit_codebooks: no rows");
  ResidualCodebooks books;
  Matrix residual = rows;
  for (std::size_t level = 0; level < sizes.size(); ++level) {
    const std::size_t k =
        std::min(sizes[level], count_distinct_rows(residual));
    auto km = kmeans(residual, k, derive_seed(seed, level), max_iter);
    for (std::size_t i = 0; i < residual.rows(); ++i) {
      auto r = residual.row(i);
      const auto c = km.centroids.row(km.assignment[i]);
      for (std::size_t d = 0; d < r.size(); ++d) r[d] -= c[d];
    }
    books.levels.push_back(std::move(km.centroids));
  }
  return books;
}

std::vector<Token> encode_digits(std::span<const double> row,
                                 const ResidualCodebooks& codebooks) {
  if (row.size() != codebooks.dim()) {
    throw Error("encode_digits: dimension mismatch");
  }
  std::vector<Token> digits;
  Vec residual(row.begin(), row.end());
  for (const auto& book : codebooks.levels) {
    const std::size_t j = nearest_centroid(residual, book);
    digits.push_back(static_cast<Token>(j));
    const auto c = book.row(j);
    for (std::size_t d = 0; d < residual.size(); ++d) residual[d] -= c[d];
  }
  return digits;
}

Vec reconstruct(std::span<const Token> digits,
                const ResidualCodebooks& codebooks) {
  Vec out(codebooks.dim(), 0.0);
  for (std::size_t level = 0; level < digits.size(); ++level) {
    const auto c = codebooks.levels[level].row(digits[level]);
    for (std::size_t d = 0; d < out.size(); ++d) out[d] += c[d];
  }
  return out;
}

std::vector<double> residual_error_by_level(
    const Matrix& rows, const ResidualCodebooks& codebooks) {
  std::vector<double> err(codebooks.num_levels() + 1, 0.0);
  for (std::size_t i = 0; i < rows.rows(); ++i) {
    Vec residual(rows.row(i).begin(), rows.row(i).end());
    err[0] += squared_norm(residual);
    for (std::size_t level = 0; level < codebooks.num_levels(); ++level) {
      const auto& book = codebooks.levels[level];
      const auto c = book.row(nearest_centroid(residual, book));
      for (std::size_t d = 0; d < residual.size(); ++d) residual[d] -= c[d];
      err[level + 1] += squared_norm(residual);
    }
  }
  const auto n = static_cast<double>(std::max<std::size_t>(1, rows.rows()));
  for (auto& e : err) e /= n;
  return err;
}

void write_codebooks(const ResidualCodebooks& codebooks, std::ostream& out) {
  out.write(kCodebookMagic, sizeof(kCodebookMagic));
  detail::write_le<std::uint32_t>(
      out, static_cast<std::uint32_t>(codebooks.num_levels()));
  for (const auto& book : codebooks.levels) {
    detail::write_le<std::uint32_t>(out,
                                    static_cast<std::uint32_t>(book.rows()));
  }
  detail::write_le<std::uint32_t>(out,
                                  static_cast<std::uint32_t>(codebooks.dim()));
  for (const auto& book : codebooks.levels) {
    for (double v : book.data()) detail::write_f64(out, v);
  }
}

ResidualCodebooks read_codebooks(std::istream& in) {
  char magic[sizeof(kCodebookMagic)];
  if (!in.read(magic, sizeof(magic)) ||
      std::memcmp(magic, kCodebookMagic, sizeof(magic)) != 0) {
    throw ParseError("codebook stream does not start with PCTXRQ1");
  }
  const auto levels = detail::read_le<std::uint32_t>(in);
  std::vector<std::uint32_t> sizes(levels);
  for (auto& s : sizes) s = detail::read_le<std::uint32_t>(in);
  const auto dim = detail::read_le<std::uint32_t>(in);
  ResidualCodebooks books;
  for (std::uint32_t l = 0; l < levels; ++l) {
    Matrix m(sizes[l], dim);
    for (std::size_t r = 0; r < m.rows(); ++r) {
      for (auto& v : m.row(r)) v = detail::read_f64(in);
    }
    books.levels.push_back(std::move(m));
  }
  return books;
}

std::vector<SemanticId> assign_conflict_digit(
    std::span<const DigitEntry> entries, std::size_t conflict_size) {
  std::map<std::vector<Token>, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    groups[entries[i].digits].push_back(i);
  }
  std::vector<SemanticId> out(entries.size());
  for (auto& [prefix, members] : groups) {
    std::sort(members.begin(), members.end(),
              [&](std::size_t a, std::size_t b) {
                if (entries[a].item != entries[b].item)
                  return entries[a].item < entries[b].item;
                return entries[a].facet < entries[b].facet;
              });
    std::size_t next = 0;
    for (std::size_t m = 0; m < members.size(); ++m) {
      const auto& e = entries[members[m]];
      if (m > 0 && entries[members[m - 1]].item != e.item) ++next;
      if (next >= conflict_size) {
        std::string p;
        for (Token t : prefix) p += (p.empty() ? "" : "-") + std::to_string(t);
        throw Error("conflict overflow: prefix " + p + " is shared by more " +
                    "than " + std::to_string(conflict_size) + " items");
      }
      std::vector<Token> tokens = e.digits;
      tokens.push_back(static_cast<Token>(next));
      out[members[m]] = SemanticId(std::move(tokens));
    }
  }
  return out;
}

}  // namespace pctx

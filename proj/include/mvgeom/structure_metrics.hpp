#pragma once

// DINO Structure Distance: self-similarity of L2-normalized patch tokens,
// compared by a normalized Frobenius distance scaled by 100.

#include <Eigen/Core>
#include <cmath>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mvgeom/error.hpp"
#include "mvgeom/npy.hpp"
#include "mvgeom/parallel.hpp"

namespace mvgeom {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// N x D patch tokens with unit-norm rows.
class TokenMatrix {
 public:
  /// Rows are re-normalized even if the producer already normalized them.
  explicit TokenMatrix(RowMatrix tokens, std::string source_tag = {})
      : tokens_(std::move(tokens)), source_tag_(std::move(source_tag)) {
    if (tokens_.rows() < 1 || tokens_.cols() < 1)
      throw Error(ErrorCode::ShapeMismatch, "token matrix needs N >= 1 and D >= 1");
    for (Eigen::Index i = 0; i < tokens_.rows(); ++i) {
      const double n = tokens_.row(i).norm();
      if (!std::isfinite(n)) throw Error(ErrorCode::NonFiniteInput, "non-finite token row " + std::to_string(i));
      if (n < 1e-12) throw Error(ErrorCode::DegenerateToken, "zero token row " + std::to_string(i));
      tokens_.row(i) /= n;
    }
  }

  static TokenMatrix from_array(const ArrayFile& a, std::string source_tag = {}) {
    if (a.shape.size() != 2) throw Error(ErrorCode::ShapeMismatch, source_tag + ": tokens must be a 2-D array");
    const auto values = a.to_f64();
    RowMatrix m = Eigen::Map<const RowMatrix>(values.data(), static_cast<Eigen::Index>(a.shape[0]),
                                              static_cast<Eigen::Index>(a.shape[1]));
    return TokenMatrix(std::move(m), std::move(source_tag));
  }

  const RowMatrix& tokens() const { return tokens_; }
  Eigen::Index count() const { return tokens_.rows(); }
  Eigen::Index dim() const { return tokens_.cols(); }
  const std::string& source_tag() const { return source_tag_; }

 private:
  RowMatrix tokens_;
  std::string source_tag_;
};

inline Eigen::MatrixXd self_similarity(const TokenMatrix& t) { return t.tokens() * t.tokens().transpose(); }

struct DsdOptions {
  /// Above this token count the similarity matrices are formed in row blocks.
  Eigen::Index block_threshold = 8192;
  Eigen::Index block_rows = 256;
  unsigned threads = 1;
};

/// 100 * sqrt(||S(content) - S(stylized)||_F^2 / N^2).
inline double dsd(const TokenMatrix& content, const TokenMatrix& stylized, const DsdOptions& opts = {}) {
  const Eigen::Index n = content.count();
  if (stylized.count() != n)
    throw Error(ErrorCode::TokenCountMismatch,
                std::to_string(n) + " content tokens vs " + std::to_string(stylized.count()) + " stylized tokens");

  const RowMatrix& a = content.tokens();
  const RowMatrix& b = stylized.tokens();
  double sq = 0.0;
  if (n <= opts.block_threshold) {
    sq = (a * a.transpose() - b * b.transpose()).squaredNorm();
  } else {
    const auto rows = static_cast<std::size_t>(std::max<Eigen::Index>(1, opts.block_rows));
    const auto total = static_cast<std::size_t>(n);
    const std::size_t blocks = (total + rows - 1) / rows;
    std::vector<double> partial(blocks, 0.0);
    parallel_chunks(total, rows, opts.threads, [&](std::size_t c, std::size_t begin, std::size_t end) {
      const auto r0 = static_cast<Eigen::Index>(begin);
      const auto len = static_cast<Eigen::Index>(end - begin);
      Eigen::MatrixXd diff = a.middleRows(r0, len) * a.transpose() - b.middleRows(r0, len) * b.transpose();
      partial[c] = diff.squaredNorm();
    });
    for (double p : partial) sq += p;
  }
  const double nn = static_cast<double>(n);
  return 100.0 * std::sqrt(sq / (nn * nn));
}

inline double dsd_average(std::span<const std::pair<TokenMatrix, TokenMatrix>> pairs, const DsdOptions& opts = {}) {
  if (pairs.empty()) throw Error(ErrorCode::EmptySet, "dsd_average over an empty set");
  double sum = 0.0;
  for (const auto& [content, stylized] : pairs) sum += dsd(content, stylized, opts);
  return sum / static_cast<double>(pairs.size());
}

}  // namespace mvgeom

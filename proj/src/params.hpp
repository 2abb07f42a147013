#pragma once

// Flat parameter vector for (D, A) as a product of probability simplices.

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <vector>

#include "infmodel/estimation.hpp"
#include "infmodel/sim.hpp"

namespace infmodel::detail {

struct Block {
  std::size_t offset = 0;
  std::size_t size = 0;
};

class ParamLayout {
 public:
  explicit ParamLayout(const ModelStructure& s) : s_(s) {
    s_.validate();
    const int n = s_.sites();
    d_offset_.assign(n, std::vector<long>(n, -1));
    for (int i = 0; i < n; ++i) {
      const std::size_t start = total_;
      for (int j = 0; j < n; ++j)
        if (s_.network_support[i][j]) d_offset_[i][j] = static_cast<long>(total_++);
      blocks_.push_back({start, total_ - start});
    }
    if (s_.shared_local) {
      const int mm = s_.m[0];
      shared_offset_ = total_;
      for (int r = 0; r < mm; ++r) {
        blocks_.push_back({total_, static_cast<std::size_t>(mm)});
        total_ += static_cast<std::size_t>(mm);
      }
    } else {
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
          if (!s_.network_support[i][j]) continue;
          pair_offset_[{j, i}] = total_;
          for (int r = 0; r < s_.m[j]; ++r) {
            blocks_.push_back({total_, static_cast<std::size_t>(s_.m[i])});
            total_ += static_cast<std::size_t>(s_.m[i]);
          }
        }
    }
  }

  std::size_t size() const { return total_; }
  const std::vector<Block>& blocks() const { return blocks_; }
  const ModelStructure& structure() const { return s_; }

  /// Offset of D(i, j) or -1 outside the support.
  long d_index(int i, int j) const { return d_offset_[i][j]; }
  /// Offset of A_(from,to)(row, 0).
  std::size_t a_index(int from, int to, int row) const {
    if (s_.shared_local) return shared_offset_ + static_cast<std::size_t>(row * s_.m[0]);
    return pair_offset_.at({from, to}) + static_cast<std::size_t>(row * s_.m[to]);
  }

  InfluenceModel to_model(const std::vector<double>& x) const {
    const int n = s_.sites();
    Matrix D = Matrix::Zero(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        if (d_offset_[i][j] >= 0) D(i, j) = x[static_cast<std::size_t>(d_offset_[i][j])];
    if (s_.shared_local) {
      const int mm = s_.m[0];
      Matrix A(mm, mm);
      for (int r = 0; r < mm; ++r)
        for (int c = 0; c < mm; ++c) A(r, c) = x[shared_offset_ + static_cast<std::size_t>(r * mm + c)];
      return InfluenceModel::homogeneous(std::move(D), std::move(A), s_.m);
    }
    std::map<InfluenceModel::PairKey, Matrix> locals;
    for (const auto& [key, off] : pair_offset_) {
      const auto [from, to] = key;
      Matrix A(s_.m[from], s_.m[to]);
      for (int r = 0; r < s_.m[from]; ++r)
        for (int c = 0; c < s_.m[to]; ++c)
          A(r, c) = x[off + static_cast<std::size_t>(r * s_.m[to] + c)];
      locals.emplace(key, std::move(A));
    }
    return InfluenceModel::heterogeneous(std::move(D), std::move(locals), s_.m);
  }

  /// Dirichlet(1) draw for every block: normalised unit exponentials.
  std::vector<double> dirichlet(UniformRng& rng) const {
    std::vector<double> x(total_);
    for (const auto& b : blocks_) {
      double sum = 0;
      for (std::size_t k = 0; k < b.size; ++k) {
        x[b.offset + k] = -std::log1p(-rng.next());
        sum += x[b.offset + k];
      }
      for (std::size_t k = 0; k < b.size; ++k) x[b.offset + k] /= sum;
    }
    return x;
  }

 private:
  ModelStructure s_;
  std::vector<std::vector<long>> d_offset_;
  std::size_t shared_offset_ = 0;
  std::map<InfluenceModel::PairKey, std::size_t> pair_offset_;
  std::vector<Block> blocks_;
  std::size_t total_ = 0;
};

/// Euclidean projection of one block onto the probability simplex.
inline void project_simplex(double* v, std::size_t n, std::vector<double>& buf) {
  buf.assign(v, v + n);
  std::sort(buf.begin(), buf.end(), std::greater<double>());
  double running = -1.0;
  double theta = 0;
  for (std::size_t k = 0; k < n; ++k) {
    running += buf[k];
    const double t = running / static_cast<double>(k + 1);
    if (k + 1 == n || buf[k + 1] <= t) {
      theta = t;
      break;
    }
  }
  double sum = 0;
  for (std::size_t k = 0; k < n; ++k) {
    v[k] = std::max(v[k] - theta, 0.0);
    sum += v[k];
  }
  // Remove the rounding left by the shift so the block sums to one.
  if (sum > 0)
    for (std::size_t k = 0; k < n; ++k) v[k] /= sum;
}

inline double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double d = 0;
  for (std::size_t k = 0; k < a.size(); ++k) d = std::max(d, std::abs(a[k] - b[k]));
  return d;
}

}  // namespace infmodel::detail

#pragma once

#include <vector>

#include "ucn/linalg.hpp"

namespace ucn {

/// One matrix per user, the k-th serving BS occupying rows
/// [slot*Mt, (slot+1)*Mt). Precoders and tangent vectors share this
/// container: the ambient tangent space at any point equals the ambient
/// product space itself, so only the role differs.
struct BlockStack {
  std::vector<CMat> user;  // user[i]: (B_i * Mt) x d_i

  int num_ut() const { return static_cast<int>(user.size()); }
};

using Precoder = BlockStack;
using TangentVector = BlockStack;

inline auto stack_block(CMat& m, int slot, int mt) {
  return m.middleRows(static_cast<Eigen::Index>(slot) * mt, mt);
}

inline auto stack_block(const CMat& m, int slot, int mt) {
  return m.middleRows(static_cast<Eigen::Index>(slot) * mt, mt);
}

inline bool same_shape(const BlockStack& a, const BlockStack& b) {
  if (a.user.size() != b.user.size()) return false;
  for (std::size_t i = 0; i < a.user.size(); ++i) {
    if (a.user[i].rows() != b.user[i].rows() ||
        a.user[i].cols() != b.user[i].cols())
      return false;
  }
  return true;
}

inline void require_same_shape(const BlockStack& a, const BlockStack& b) {
  if (!same_shape(a, b))
    throw DimensionError("block stacks do not conform");
}

inline BlockStack zeros_like(const BlockStack& a) {
  BlockStack z;
  z.user.reserve(a.user.size());
  for (const auto& m : a.user) z.user.emplace_back(CMat::Zero(m.rows(), m.cols()));
  return z;
}

inline BlockStack operator+(const BlockStack& a, const BlockStack& b) {
  require_same_shape(a, b);
  BlockStack r = a;
  for (std::size_t i = 0; i < r.user.size(); ++i) r.user[i] += b.user[i];
  return r;
}

inline BlockStack operator-(const BlockStack& a, const BlockStack& b) {
  require_same_shape(a, b);
  BlockStack r = a;
  for (std::size_t i = 0; i < r.user.size(); ++i) r.user[i] -= b.user[i];
  return r;
}

inline BlockStack operator*(double s, const BlockStack& a) {
  BlockStack r = a;
  for (auto& m : r.user) m *= s;
  return r;
}

inline BlockStack operator-(const BlockStack& a) { return -1.0 * a; }

/// Squared Frobenius norm summed over all blocks.
inline double squared_norm(const BlockStack& a) {
  double acc = 0.0;
  for (const auto& m : a.user) acc += m.squaredNorm();
  return acc;
}

}  // namespace ucn

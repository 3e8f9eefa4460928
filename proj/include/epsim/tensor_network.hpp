#pragma once

// Dense tensors with integer leg labels and pairwise contraction over shared labels.
// Data is stored with the first leg as the major index.

#include <map>
#include <set>

#include "epsim/tensor.hpp"

namespace epsim {

inline constexpr Index kMaxContractionSize = Index{1} << 24;

struct LabeledTensor {
  std::vector<int> labels;
  std::vector<Index> dims;
  Vector data;

  Index size() const { return product(dims); }

  static LabeledTensor scalar(Complex value) {
    LabeledTensor t;
    t.data = Vector::Constant(1, value);
    return t;
  }

  int position(int label) const {
    const auto it = std::find(labels.begin(), labels.end(), label);
    return it == labels.end() ? -1 : static_cast<int>(it - labels.begin());
  }
};

/// Reorders legs so the result has labels `order` (a permutation of t.labels).
inline LabeledTensor permuted(const LabeledTensor& t, const std::vector<int>& order) {
  if (order.size() != t.labels.size()) throw Error(ErrorKind::invalid_argument, "permuted: label count mismatch");
  std::vector<int> perm;
  for (int label : order) {
    const int p = t.position(label);
    if (p < 0) throw Error(ErrorKind::invalid_argument, detail::cat("permuted: unknown label ", label));
    perm.push_back(p);
  }
  LabeledTensor out;
  out.labels = order;
  for (int p : perm) out.dims.push_back(t.dims[p]);
  out.data = perm.empty() ? t.data : permute_legs(t.data, t.dims, perm);
  return out;
}

struct ContractionStats {
  Index largest_intermediate = 1;
  double flops = 0.0;
};

/// Sums over every label the two tensors share; free legs of a come first, then those of b.
inline LabeledTensor contract(const LabeledTensor& a, const LabeledTensor& b, ContractionStats* stats = nullptr,
                              Index limit = kMaxContractionSize) {
  std::vector<int> shared, free_a, free_b;
  for (int l : a.labels) (b.position(l) >= 0 ? shared : free_a).push_back(l);
  for (int l : b.labels)
    if (a.position(l) < 0) free_b.push_back(l);
  Index rows = 1, inner = 1, cols = 1;
  std::vector<Index> out_dims;
  for (int l : free_a) {
    rows *= a.dims[a.position(l)];
    out_dims.push_back(a.dims[a.position(l)]);
  }
  for (int l : shared) {
    const Index da = a.dims[a.position(l)], db = b.dims[b.position(l)];
    if (da != db)
      throw Error(ErrorKind::dimension_mismatch, detail::cat("label ", l, " has dims ", da, " and ", db));
    inner *= da;
  }
  for (int l : free_b) {
    cols *= b.dims[b.position(l)];
    out_dims.push_back(b.dims[b.position(l)]);
  }
  if (rows * cols > limit)
    throw Error(ErrorKind::size_guard,
                detail::cat("contraction would create ", rows * cols, " entries (limit ", limit, "); cost ",
                            static_cast<double>(rows) * inner * cols, " multiply-adds"));
  std::vector<int> order_a = free_a, order_b = shared;
  order_a.insert(order_a.end(), shared.begin(), shared.end());
  order_b.insert(order_b.end(), free_b.begin(), free_b.end());
  const LabeledTensor pa = permuted(a, order_a), pb = permuted(b, order_b);
  // row-major (rows x inner) and (inner x cols) viewed through column-major maps
  Eigen::Map<const Matrix> ma_t(pa.data.data(), inner, rows);
  Eigen::Map<const Matrix> mb_t(pb.data.data(), cols, inner);
  const Matrix prod_t = mb_t * ma_t;  // (A B)^T
  LabeledTensor out;
  out.labels = free_a;
  out.labels.insert(out.labels.end(), free_b.begin(), free_b.end());
  out.dims = out_dims;
  out.data = Eigen::Map<const Vector>(prod_t.data(), rows * cols);
  if (stats) {
    stats->largest_intermediate = std::max(stats->largest_intermediate, rows * cols);
    stats->flops += static_cast<double>(rows) * inner * cols;
  }
  return out;
}

/// Contracts tensors in the given order (left fold).
inline LabeledTensor contract_sequence(const std::vector<const LabeledTensor*>& tensors,
                                       ContractionStats* stats = nullptr, Index limit = kMaxContractionSize) {
  LabeledTensor acc = LabeledTensor::scalar(1.0);
  for (const auto* t : tensors) acc = contract(acc, *t, stats, limit);
  return acc;
}

/// Squared norm of the tensor entries.
inline double squared_norm(const LabeledTensor& t) { return t.data.squaredNorm(); }

}  // namespace epsim

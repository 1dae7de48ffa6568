#ifndef VECCHIA_BATCH_HPP
#define VECCHIA_BATCH_HPP

#include <cmath>
#include <vector>

#include <Eigen/Core>

#include "vecchia/errors.hpp"
#include "vecchia/parallel.hpp"

namespace vecchia {

/// `count` dense dim x dim matrices stored back to back in one contiguous
/// buffer, entry k starting at k * stride, column-major within the entry.
template <typename Scalar>
class StridedMatrixBatch {
 public:
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using MapType = Eigen::Map<Matrix>;
  using ConstMapType = Eigen::Map<const Matrix>;

  StridedMatrixBatch() = default;
  StridedMatrixBatch(Index count, Index dim, Index stride = 0)
      : count_(count), dim_(dim), stride_(stride == 0 ? dim * dim : stride) {
    if (count < 0 || dim < 0) throw SizeError("negative batch shape");
    if (stride_ < dim * dim) throw SizeError("matrix stride smaller than dim^2");
    buffer_.assign(static_cast<std::size_t>(count_ * stride_), Scalar(0));
  }

  Index count() const noexcept { return count_; }
  Index dim() const noexcept { return dim_; }
  Index stride() const noexcept { return stride_; }

  Scalar* entry_data(Index k) noexcept { return buffer_.data() + k * stride_; }
  const Scalar* entry_data(Index k) const noexcept { return buffer_.data() + k * stride_; }

  MapType operator[](Index k) { return MapType(entry_data(k), dim_, dim_); }
  ConstMapType operator[](Index k) const { return ConstMapType(entry_data(k), dim_, dim_); }

  const std::vector<Scalar>& buffer() const noexcept { return buffer_; }

 private:
  Index count_ = 0;
  Index dim_ = 0;
  Index stride_ = 0;
  std::vector<Scalar> buffer_;
};

/// `count` vectors of length dim, entry k starting at k * stride.
template <typename Scalar>
class StridedVectorBatch {
 public:
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  using MapType = Eigen::Map<Vector>;
  using ConstMapType = Eigen::Map<const Vector>;

  StridedVectorBatch() = default;
  StridedVectorBatch(Index count, Index dim, Index stride = 0)
      : count_(count), dim_(dim), stride_(stride == 0 ? dim : stride) {
    if (count < 0 || dim < 0) throw SizeError("negative batch shape");
    if (stride_ < dim) throw SizeError("vector stride smaller than dim");
    buffer_.assign(static_cast<std::size_t>(count_ * stride_), Scalar(0));
  }

  Index count() const noexcept { return count_; }
  Index dim() const noexcept { return dim_; }
  Index stride() const noexcept { return stride_; }

  Scalar* entry_data(Index k) noexcept { return buffer_.data() + k * stride_; }
  const Scalar* entry_data(Index k) const noexcept { return buffer_.data() + k * stride_; }

  MapType operator[](Index k) { return MapType(entry_data(k), dim_); }
  ConstMapType operator[](Index k) const { return ConstMapType(entry_data(k), dim_); }

 private:
  Index count_ = 0;
  Index dim_ = 0;
  Index stride_ = 0;
  std::vector<Scalar> buffer_;
};

template <typename Scalar>
using BatchScalars = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

namespace kernels {

/// Column-oriented (gaxpy) Cholesky of one column-major n x n matrix with
/// leading dimension n. Reads the lower triangle only. Returns 0 on
/// success or j + 1 when pivot j is not positive.
template <typename Scalar>
Index potrf_lower(Scalar* a, Index n) {
  for (Index j = 0; j < n; ++j) {
    Scalar* cj = a + j * n;
    for (Index k = 0; k < j; ++k) {
      const Scalar ljk = a[k * n + j];
      const Scalar* ck = a + k * n;
      for (Index i = j; i < n; ++i) cj[i] -= ljk * ck[i];
    }
    const Scalar pivot = cj[j];
    if (!(pivot > Scalar(0)) || !std::isfinite(pivot)) return j + 1;
    const Scalar d = std::sqrt(pivot);
    cj[j] = d;
    for (Index i = j + 1; i < n; ++i) cj[i] /= d;
  }
  return 0;
}

/// Forward substitution L x = b in place. Returns 0, or j + 1 when L(j, j) == 0.
template <typename Scalar>
Index trsv_lower(const Scalar* l, Index n, Scalar* x) {
  for (Index j = 0; j < n; ++j) {
    const Scalar* cj = l + j * n;
    if (cj[j] == Scalar(0)) return j + 1;
    const Scalar xj = x[j] / cj[j];
    x[j] = xj;
    for (Index i = j + 1; i < n; ++i) x[i] -= xj * cj[i];
  }
  return 0;
}

/// Inner product accumulated in ascending index order.
template <typename Scalar>
Scalar dot(const Scalar* a, const Scalar* b, Index n) {
  Scalar acc(0);
  for (Index i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

}  // namespace kernels

namespace detail {
// Small matrices are grouped so a chunk carries a useful amount of work.
inline Index batch_chunk(Index dim) { return dim >= 256 ? 1 : dim >= 64 ? 16 : 128; }
}  // namespace detail

/// In-place lower Cholesky factorization of every batch entry. The upper
/// triangle is left untouched. Throws NotPositiveDefiniteError carrying
/// the lowest failing entry.
template <typename Scalar>
void batch_potrf(StridedMatrixBatch<Scalar>& a) {
  const Index dim = a.dim();
  parallel_for(a.count(), detail::batch_chunk(dim), [&](Index begin, Index end) {
    for (Index k = begin; k < end; ++k) {
      if (kernels::potrf_lower(a.entry_data(k), dim) != 0)
        throw NotPositiveDefiniteError("matrix is not positive definite", k);
    }
  });
}

/// Solves L x = b per entry, overwriting b with x.
template <typename Scalar>
void batch_trsv_inplace(const StridedMatrixBatch<Scalar>& l, StridedVectorBatch<Scalar>& b) {
  if (l.count() != b.count() || l.dim() != b.dim()) throw SizeError("batch_trsv shape mismatch");
  const Index dim = l.dim();
  parallel_for(l.count(), detail::batch_chunk(dim), [&](Index begin, Index end) {
    for (Index k = begin; k < end; ++k) {
      if (kernels::trsv_lower(l.entry_data(k), dim, b.entry_data(k)) != 0)
        throw SingularError("triangular factor has a zero diagonal", k);
    }
  });
}

template <typename Scalar>
StridedVectorBatch<Scalar> batch_trsv(const StridedMatrixBatch<Scalar>& l,
                                      StridedVectorBatch<Scalar> b) {
  batch_trsv_inplace(l, b);
  return b;
}

template <typename Scalar>
BatchScalars<Scalar> batch_dot(const StridedVectorBatch<Scalar>& a,
                               const StridedVectorBatch<Scalar>& b) {
  if (a.count() != b.count() || a.dim() != b.dim()) throw SizeError("batch_dot shape mismatch");
  BatchScalars<Scalar> out(a.count());
  const Index dim = a.dim();
  parallel_for(a.count(), 1024, [&](Index begin, Index end) {
    for (Index k = begin; k < end; ++k) out[k] = kernels::dot(a.entry_data(k), b.entry_data(k), dim);
  });
  return out;
}

/// sum_i log L(i, i), i.e. half of log|L L^T|.
template <typename Derived>
typename Derived::Scalar half_log_det(const Eigen::MatrixBase<Derived>& l) {
  using Scalar = typename Derived::Scalar;
  Scalar acc(0);
  for (Index i = 0; i < l.rows(); ++i) {
    const Scalar d = l(i, i);
    if (!(d > Scalar(0))) throw DomainError("half_log_det needs a positive diagonal");
    acc += std::log(d);
  }
  return acc;
}

}  // namespace vecchia

#endif  // VECCHIA_BATCH_HPP

#pragma once

#include <Eigen/Dense>

#include <complex>
#include <stdexcept>

#include "aeforms/grid.hpp"

namespace aeforms {

/// An n-component field sampled on the full grid, point-major layout
/// (value(p, c) = data[p*n + c]). The boundary layer is forced to zero; the
/// assembled operators act on the interior restriction.
template <typename Scalar>
class FormField {
 public:
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  FormField(const Grid& grid)
      : grid_(&grid), data_(Vector::Zero(grid.total_points() * grid.dim())) {}

  const Grid& grid() const { return *grid_; }
  int components() const { return grid_->dim(); }

  Scalar& at(std::int64_t point, int comp) { return data_[point * grid_->dim() + comp]; }
  Scalar at(std::int64_t point, int comp) const {
    return data_[point * grid_->dim() + comp];
  }

  const Vector& data() const { return data_; }
  Vector& data() { return data_; }

  /// Zeroes the boundary layer (invariant of the type).
  void enforce_boundary() {
    const int n = grid_->dim();
    for (std::int64_t p = 0; p < grid_->total_points(); ++p)
      if (!grid_->is_interior(p))
        for (int c = 0; c < n; ++c) data_[p * n + c] = Scalar(0);
  }

  bool boundary_is_zero() const {
    const int n = grid_->dim();
    for (std::int64_t p = 0; p < grid_->total_points(); ++p)
      if (!grid_->is_interior(p))
        for (int c = 0; c < n; ++c)
          if (data_[p * n + c] != Scalar(0)) return false;
    return true;
  }

  /// Restriction to interior dofs, point-major over interior enumeration.
  Vector interior() const {
    const int n = grid_->dim();
    Vector v(grid_->interior_dofs());
    for (std::int64_t q = 0; q < grid_->interior_points(); ++q) {
      const std::int64_t p = grid_->full_index_of_interior(q);
      for (int c = 0; c < n; ++c) v[q * n + c] = data_[p * n + c];
    }
    return v;
  }

  void set_interior(const Vector& v) {
    const int n = grid_->dim();
    if (v.size() != grid_->interior_dofs())
      throw std::invalid_argument("FormField::set_interior: size mismatch");
    data_.setZero();
    for (std::int64_t q = 0; q < grid_->interior_points(); ++q) {
      const std::int64_t p = grid_->full_index_of_interior(q);
      for (int c = 0; c < n; ++c) data_[p * n + c] = v[q * n + c];
    }
  }

 private:
  const Grid* grid_;
  Vector data_;
};

using OneFormGrid = FormField<double>;
using ComplexFormGrid = FormField<std::complex<double>>;

/// L^2(dx) norm with the h^n quadrature weight (Euclidean fiber norm).
template <typename Scalar>
double euclidean_norm(const FormField<Scalar>& f) {
  const int n = f.grid().dim();
  const double hn = std::pow(f.grid().spacing(), n);
  return std::sqrt(hn * f.data().squaredNorm());
}

}  // namespace aeforms

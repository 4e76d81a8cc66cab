#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <vector>

namespace aeforms {

/// Uniform truncation of R^n to the box [-L, L]^n with N points per axis and
/// homogeneous Dirichlet boundary.
struct GridSpec {
  int dim = 1;
  double half_width = 1.0;    // L
  int points_per_axis = 3;    // N

  double spacing() const { return 2.0 * half_width / double(points_per_axis - 1); }
  std::int64_t total_points() const {
    std::int64_t t = 1;
    for (int d = 0; d < dim; ++d) t *= points_per_axis;
    return t;
  }
  std::int64_t total_unknowns() const { return total_points() * dim; }

  void validate() const {
    if (dim < 1) throw std::invalid_argument("GridSpec: dim must be >= 1");
    if (points_per_axis < 3)
      throw std::invalid_argument("GridSpec: points_per_axis must be >= 3");
    if (!(half_width > 0.0))
      throw std::invalid_argument("GridSpec: half_width must be > 0");
  }
};

/// Lexicographic point enumeration with interior/boundary classification and
/// an interior sub-enumeration used by the assembled operators.
class Grid {
 public:
  explicit Grid(const GridSpec& spec) : spec_(spec) {
    spec.validate();
    n_ = spec.dim;
    N_ = spec.points_per_axis;
    h_ = spec.spacing();
    stride_.assign(n_, 1);
    for (int d = n_ - 2; d >= 0; --d) stride_[d] = stride_[d + 1] * N_;
    total_ = spec.total_points();
    interior_of_full_.assign(total_, -1);
    std::vector<int> mi(n_, 0);
    for (std::int64_t p = 0; p < total_; ++p) {
      bool interior = true;
      for (int d = 0; d < n_; ++d)
        interior = interior && mi[d] > 0 && mi[d] < N_ - 1;
      if (interior) {
        interior_of_full_[p] = std::int64_t(full_of_interior_.size());
        full_of_interior_.push_back(p);
      }
      for (int d = n_ - 1; d >= 0; --d) {
        if (++mi[d] < N_) break;
        mi[d] = 0;
      }
    }
  }

  const GridSpec& spec() const { return spec_; }
  int dim() const { return n_; }
  int points_per_axis() const { return N_; }
  double spacing() const { return h_; }
  double half_width() const { return spec_.half_width; }
  std::int64_t total_points() const { return total_; }
  std::int64_t interior_points() const { return std::int64_t(full_of_interior_.size()); }
  std::int64_t interior_dofs() const { return interior_points() * n_; }

  std::vector<int> multi_index(std::int64_t p) const {
    std::vector<int> mi(n_);
    for (int d = 0; d < n_; ++d) {
      mi[d] = int(p / stride_[d]);
      p %= stride_[d];
    }
    return mi;
  }

  std::int64_t flat_index(const std::vector<int>& mi) const {
    std::int64_t p = 0;
    for (int d = 0; d < n_; ++d) p += std::int64_t(mi[d]) * stride_[d];
    return p;
  }

  Eigen::VectorXd coords(std::int64_t p) const {
    Eigen::VectorXd x(n_);
    auto mi = multi_index(p);
    for (int d = 0; d < n_; ++d) x(d) = -spec_.half_width + mi[d] * h_;
    return x;
  }

  bool is_interior(std::int64_t p) const { return interior_of_full_[p] >= 0; }

  /// -1 for boundary points.
  std::int64_t interior_index(std::int64_t p) const { return interior_of_full_[p]; }
  std::int64_t full_index_of_interior(std::int64_t q) const { return full_of_interior_[q]; }

  /// Neighbour in axis direction, offset in grid cells; -1 when outside.
  std::int64_t neighbor(std::int64_t p, int axis, int offset) const {
    auto mi = multi_index(p);
    mi[axis] += offset;
    if (mi[axis] < 0 || mi[axis] >= N_) return -1;
    return flat_index(mi);
  }

 private:
  GridSpec spec_;
  int n_ = 0, N_ = 0;
  double h_ = 0;
  std::int64_t total_ = 0;
  std::vector<std::int64_t> stride_;
  std::vector<std::int64_t> interior_of_full_;
  std::vector<std::int64_t> full_of_interior_;
};

inline Grid build_grid(const GridSpec& spec) { return Grid(spec); }

}  // namespace aeforms

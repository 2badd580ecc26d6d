#pragma once

// Time-slab x tensor-product phase-space meshes.
//
// Q_T = [0,T] x Omega_x x Omega_v is split into slabs I_m = (t_{m-1}, t_m]
// and, inside each slab, into Cartesian cells tau_x x tau_v1 x tau_v2.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "vmsd/errors.hpp"

namespace vmsd {

/// Closed interval [lo, hi].
struct Interval {
  double lo = 0.0;
  double hi = 1.0;
  double length() const { return hi - lo; }
  bool contains(double s, double slack = 0.0) const { return s >= lo - slack && s <= hi + slack; }
};

/// Omega_x x Omega_v with Omega_v = [v_lo, v_hi]^2 given per component.
struct DomainBox {
  Interval x{0.0, 1.0};
  Interval v1{-1.0, 1.0};
  Interval v2{-1.0, 1.0};
};

namespace detail {

inline void require_strictly_increasing(const std::vector<double>& nodes, const char* what) {
  if (nodes.size() < 2) throw ConfigError(std::string(what) + ": need at least two nodes");
  for (std::size_t i = 1; i < nodes.size(); ++i) {
    if (!(nodes[i] > nodes[i - 1])) throw ConfigError(std::string(what) + ": nodes must be strictly increasing");
  }
}

inline std::vector<double> uniform_nodes(double lo, double hi, int cells) {
  std::vector<double> n(static_cast<std::size_t>(cells) + 1);
  for (int i = 0; i <= cells; ++i) n[i] = lo + (hi - lo) * static_cast<double>(i) / cells;
  n.back() = hi;
  return n;
}

inline std::vector<double> bisect(const std::vector<double>& nodes) {
  std::vector<double> out;
  out.reserve(2 * nodes.size() - 1);
  for (std::size_t i = 0; i + 1 < nodes.size(); ++i) {
    out.push_back(nodes[i]);
    out.push_back(0.5 * (nodes[i] + nodes[i + 1]));
  }
  out.push_back(nodes.back());
  return out;
}

inline double max_gap(const std::vector<double>& nodes) {
  double g = 0.0;
  for (std::size_t i = 1; i < nodes.size(); ++i) g = std::max(g, nodes[i] - nodes[i - 1]);
  return g;
}

}  // namespace detail

/// 0 = t_0 < t_1 < ... < t_M = T.
class TimePartition {
 public:
  explicit TimePartition(std::vector<double> breakpoints) : t_(std::move(breakpoints)) {
    detail::require_strictly_increasing(t_, "time partition");
    if (t_.front() != 0.0) throw ConfigError("time partition must start at 0");
  }

  int slabs() const { return static_cast<int>(t_.size()) - 1; }
  double final_time() const { return t_.back(); }
  const std::vector<double>& breakpoints() const { return t_; }

  /// Slab m (1-based) is (t_{m-1}, t_m].
  Interval slab(int m) const { return {t_[m - 1], t_[m]}; }
  double length(int m) const { return t_[m] - t_[m - 1]; }

  /// 1-based slab containing t, with t_m belonging to slab m.
  int slab_of(double t) const {
    if (t <= t_.front()) return 1;
    auto it = std::lower_bound(t_.begin(), t_.end(), t);
    if (it == t_.end()) return slabs();
    return std::max(1, static_cast<int>(it - t_.begin()));
  }

 private:
  std::vector<double> t_;
};

/// Tensor grid over Omega_x x Omega_v.
class TensorCellGrid {
 public:
  TensorCellGrid(std::vector<double> x, std::vector<double> v1, std::vector<double> v2)
      : x_(std::move(x)), v1_(std::move(v1)), v2_(std::move(v2)) {
    detail::require_strictly_increasing(x_, "x nodes");
    detail::require_strictly_increasing(v1_, "v1 nodes");
    detail::require_strictly_increasing(v2_, "v2 nodes");
  }

  const std::vector<double>& x_nodes() const { return x_; }
  const std::vector<double>& v1_nodes() const { return v1_; }
  const std::vector<double>& v2_nodes() const { return v2_; }

  int nx() const { return static_cast<int>(x_.size()) - 1; }
  int nv1() const { return static_cast<int>(v1_.size()) - 1; }
  int nv2() const { return static_cast<int>(v2_.size()) - 1; }
  long cell_count() const { return static_cast<long>(nx()) * nv1() * nv2(); }

  DomainBox box() const { return {{x_.front(), x_.back()}, {v1_.front(), v1_.back()}, {v2_.front(), v2_.back()}}; }

 private:
  std::vector<double> x_, v1_, v2_;
};

/// Time partition plus phase-space grid; every element is I_m x tau.
class SlabMesh {
 public:
  SlabMesh(TimePartition time, TensorCellGrid grid) : time_(std::move(time)), grid_(std::move(grid)) {
    // Elements are boxes, so diam(K) is the norm of the edge-length vector,
    // maximised independently per direction.
    const double dt = detail::max_gap(time_.breakpoints());
    const double dx = detail::max_gap(grid_.x_nodes());
    const double dv1 = detail::max_gap(grid_.v1_nodes());
    const double dv2 = detail::max_gap(grid_.v2_nodes());
    h_ = std::sqrt(dt * dt + dx * dx + dv1 * dv1 + dv2 * dv2);
    field_h_ = std::sqrt(dt * dt + dx * dx);
  }

  const TimePartition& time() const { return time_; }
  const TensorCellGrid& grid() const { return grid_; }

  /// max diam(I_m x tau_x x tau_v) over phase-space elements.
  double h() const { return h_; }
  /// max diam(I_m x tau_x) over elements of the field cylinder.
  double field_h() const { return field_h_; }

 private:
  TimePartition time_;
  TensorCellGrid grid_;
  double h_ = 0.0;
  double field_h_ = 0.0;
};

inline SlabMesh build_uniform(double T, int M, int nx, int nv, const DomainBox& box) {
  if (M < 1 || nx < 1 || nv < 1) throw ConfigError("build_uniform: M, nx, nv must be >= 1");
  if (!(T > 0.0)) throw ConfigError("build_uniform: T must be positive");
  if (!(box.x.length() > 0.0) || !(box.v1.length() > 0.0) || !(box.v2.length() > 0.0))
    throw ConfigError("build_uniform: domain box has zero measure");
  return SlabMesh(TimePartition(detail::uniform_nodes(0.0, T, M)),
                  TensorCellGrid(detail::uniform_nodes(box.x.lo, box.x.hi, nx),
                                 detail::uniform_nodes(box.v1.lo, box.v1.hi, nv),
                                 detail::uniform_nodes(box.v2.lo, box.v2.hi, nv)));
}

/// Bisects every slab and every cell edge. Nested: old nodes are kept.
inline SlabMesh refine_once(const SlabMesh& mesh) {
  return SlabMesh(TimePartition(detail::bisect(mesh.time().breakpoints())),
                  TensorCellGrid(detail::bisect(mesh.grid().x_nodes()), detail::bisect(mesh.grid().v1_nodes()),
                                 detail::bisect(mesh.grid().v2_nodes())));
}

}  // namespace vmsd

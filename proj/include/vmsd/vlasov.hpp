#pragma once

// Streamline-diffusion solver for the Vlasov equation with a frozen drift
//   f_t + G . grad_(x,v) f = 0,  G = (vhat1, E1 + vhat2 B, E2 - vhat1 B).
//
// Every term of the slab bilinear form is a product of a (t,x) factor and a
// v factor, so the slab matrix is a short sum of Kronecker products
//   A = sum_k A_k (x) B_k,
// applied matrix-free as Y = sum_k A_k X B_k^T with X the coefficient vector
// viewed as an (n_tx x n_v) row-major matrix. The v factors only depend on
// the mesh and are cached; the (t,x) factors carry the fields.

#include <Eigen/Dense>
#include <Eigen/IterativeLinearSolvers>
#include <Eigen/Sparse>
#include <Eigen/SparseLU>
#include <array>
#include <cmath>
#include <map>
#include <memory>
#include <string>
#include <tuple>
#include <vector>

#include "vmsd/errors.hpp"
#include "vmsd/fespace.hpp"
#include "vmsd/maxwell.hpp"
#include "vmsd/moments.hpp"
#include "vmsd/tensor.hpp"

namespace vmsd {

/// G at one phase-space point.
inline std::array<double, 3> drift(double E1, double E2, double B, double v1, double v2) {
  const auto vh = hat_velocity(v1, v2);
  return {vh[0], E1 + vh[1] * B, E2 - vh[0] * B};
}

/// div_(x,v) G = B (d vhat2/d v1 - d vhat1/d v2); identically zero.
inline double drift_divergence(double B, double v1, double v2) {
  const auto J = hat_velocity_jacobian(v1, v2);
  return B * J[1][0] - B * J[0][1];
}

/// Fields sampled on the (t,x) quadrature grid of every slab, plus ||G||_inf.
struct DriftField {
  std::vector<std::array<Eigen::VectorXd, 3>> slabs;  // E1, E2, B on [qt][qx]
  double sup_norm = 0.0;
  bool zero = true;
};

/// Sup over the phase-space quadrature points of |G| (Euclidean).
inline double drift_sup_norm(const PhaseSpace& V, const std::vector<std::array<Eigen::VectorXd, 3>>& fields) {
  const auto& p1 = V.v1_axis().quad.points;
  const auto& p2 = V.v2_axis().quad.points;
  std::vector<std::array<double, 2>> vh;
  vh.reserve(p1.size() * p2.size());
  double vmax = 0.0;
  for (double a : p1)
    for (double b : p2) {
      vh.push_back(hat_velocity(a, b));
      vmax = std::max(vmax, std::abs(vh.back()[0]));
    }
  double sup = vmax;
  for (const auto& s : fields) {
    if (s[0].isZero(0.0) && s[1].isZero(0.0) && s[2].isZero(0.0)) continue;
    for (Eigen::Index q = 0; q < s[0].size(); ++q) {
      const double E1 = s[0][q], E2 = s[1][q], B = s[2][q];
      for (const auto& u : vh) {
        const double g1 = E1 + u[1] * B, g2 = E2 - u[0] * B;
        sup = std::max(sup, std::sqrt(u[0] * u[0] + g1 * g1 + g2 * g2));
      }
    }
  }
  return sup;
}

inline DriftField zero_drift(const PhaseSpace& V) {
  DriftField G;
  const Eigen::Index nq = static_cast<Eigen::Index>(V.t_axis().qpoints()) * V.x_axis().qpoints();
  G.slabs.assign(V.time().slabs(), {Eigen::VectorXd::Zero(nq), Eigen::VectorXd::Zero(nq), Eigen::VectorXd::Zero(nq)});
  G.sup_norm = drift_sup_norm(V, G.slabs);
  return G;
}

/// Samples the field history on the phase-space (t,x) quadrature grid.
inline DriftField build_drift(const FieldSpace& F, const FieldHistory& W, const PhaseSpace& V) {
  DriftField G;
  for (const auto& s : W.slabs) {
    std::array<Eigen::VectorXd, 3> v{F.on_quadrature(s, 0), F.on_quadrature(s, 1), F.on_quadrature(s, 2)};
    for (const auto& c : v) G.zero = G.zero && c.isZero(0.0);
    G.slabs.push_back(std::move(v));
  }
  if (G.slabs.size() != static_cast<std::size_t>(V.time().slabs())) throw InvariantError("build_drift: slab count mismatch");
  G.sup_norm = drift_sup_norm(V, G.slabs);
  return G;
}

/// Identifies a v factor: weight (1, vhat1, vhat2, vhat1^2, vhat1 vhat2,
/// vhat2^2) and the v-derivative (0, d/dv1, d/dv2) on trial and test side.
struct VKey {
  int weight = 0, trial = 0, test = 0;
  auto operator<=>(const VKey&) const = default;
};

namespace detail {

inline int weight_code(int beta_p, int beta_r) {
  static constexpr int table[3][3] = {{0, 1, 2}, {1, 3, 4}, {2, 4, 5}};
  return table[beta_p][beta_r];
}

inline double weight_value(int code, double vh1, double vh2) {
  switch (code) {
    case 0: return 1.0;
    case 1: return vh1;
    case 2: return vh2;
    case 3: return vh1 * vh1;
    case 4: return vh1 * vh2;
    default: return vh2 * vh2;
  }
}

}  // namespace detail

/// Mesh-only data shared by all slabs: v factors, 1D masses and integrals.
class VelocityFactors {
 public:
  explicit VelocityFactors(const PhaseSpace& V) : V_(V) {
    const auto& a1 = V.v1_axis();
    const auto& a2 = V.v2_axis();
    w_.resize(static_cast<Eigen::Index>(a1.qpoints()) * a2.qpoints());
    vh1_.resizeLike(w_);
    vh2_.resizeLike(w_);
    for (int p = 0; p < a1.qpoints(); ++p)
      for (int q = 0; q < a2.qpoints(); ++q) {
        const Eigen::Index i = static_cast<Eigen::Index>(p) * a2.qpoints() + q;
        const auto vh = hat_velocity(a1.quad.points[p], a2.quad.points[q]);
        w_[i] = a1.quad.weights[p] * a2.quad.weights[q];
        vh1_[i] = vh[0];
        vh2_[i] = vh[1];
      }
    for (int d = 0; d < 3; ++d) {
      const SparseMatrix& m1 = d == 1 ? a1.D : a1.E;
      const SparseMatrix& m2 = d == 2 ? a2.D : a2.E;
      eval_[d] = kron(m1, m2);
    }
  }

  const SparseMatrix& get(const VKey& k) const {
    auto it = cache_.find(k);
    if (it != cache_.end()) return it->second;
    Eigen::VectorXd w(w_.size());
    for (Eigen::Index i = 0; i < w.size(); ++i) w[i] = w_[i] * detail::weight_value(k.weight, vh1_[i], vh2_[i]);
    SparseMatrix B = SparseMatrix(eval_[k.test].transpose()) * (w.asDiagonal() * eval_[k.trial]);
    B.prune(0.0);
    return cache_.emplace(k, std::move(B)).first->second;
  }

 private:
  const PhaseSpace& V_;
  Eigen::VectorXd w_, vh1_, vh2_;
  std::array<SparseMatrix, 3> eval_;
  mutable std::map<VKey, SparseMatrix> cache_;
};

/// Kronecker-sum slab operator.
class VlasovSlabOperator {
 public:
  struct Term {
    VKey key;
    RowSparse A;             // n_tx x n_tx
    const SparseMatrix* B;  // n_v x n_v
  };

  VlasovSlabOperator(const PhaseSpace& V, const VelocityFactors& vf, int m, const std::array<Eigen::VectorXd, 3>& fields, double delta)
      : n_tx_(V.tx_size()), n_v_(V.v_size()) {
    const double len = V.time().length(m);
    const auto& t = V.t_axis();
    const auto& x = V.x_axis();
    const std::array<SparseMatrix, 3> phi{kron(t.E, x.E), kron(t.D(len), x.E), kron(t.E, x.D)};
    const auto tw = t.weights(V.time().slab(m));
    Eigen::VectorXd w(static_cast<Eigen::Index>(tw.size()) * x.qpoints());
    for (std::size_t a = 0; a < tw.size(); ++a)
      for (int q = 0; q < x.qpoints(); ++q) w[static_cast<Eigen::Index>(a) * x.qpoints() + q] = tw[a] * x.quad.weights[q];

    // Streaming terms: (tx derivative, tx coefficient, v weight, v derivative).
    struct Part {
      int txd;
      const Eigen::VectorXd* alpha;
      double sign;
      int beta, vd;
    };
    const Eigen::VectorXd &E1 = fields[0], &E2 = fields[1], &Bf = fields[2];
    std::vector<Part> q{{1, nullptr, 1.0, 0, 0}, {2, nullptr, 1.0, 1, 0}, {0, &E1, 1.0, 0, 1},
                        {0, &Bf, 1.0, 2, 1},     {0, &E2, 1.0, 0, 2},     {0, &Bf, -1.0, 1, 2}};
    std::erase_if(q, [](const Part& p) { return p.alpha && p.alpha->isZero(0.0); });
    std::vector<std::pair<Part, double>> tests{{{0, nullptr, 1.0, 0, 0}, 1.0}};
    if (delta != 0.0)
      for (const auto& p : q) tests.push_back({p, delta});

    std::map<VKey, SparseMatrix> acc;
    for (const auto& p : q)
      for (const auto& [r, s] : tests) {
        Eigen::VectorXd c = w * (p.sign * r.sign * s);
        if (p.alpha) c = c.cwiseProduct(*p.alpha);
        if (r.alpha) c = c.cwiseProduct(*r.alpha);
        SparseMatrix Atx = SparseMatrix(phi[r.txd].transpose()) * (c.asDiagonal() * phi[p.txd]);
        const VKey key{detail::weight_code(p.beta, r.beta), p.vd, r.vd};
        auto it = acc.find(key);
        if (it == acc.end())
          acc.emplace(key, std::move(Atx));
        else
          it->second += Atx;
      }
    // Upwind jump <f_+, g_+>_{m-1} = (e0 e0^T (x) M_x) (x) M_v.
    const SparseMatrix e0 = detail::column_vector(t.start);
    SparseMatrix J = kron(SparseMatrix(e0 * e0.transpose()), x.mass);
    acc[VKey{0, 0, 0}] += J;

    for (auto& [k, A] : acc) {
      A.prune(0.0);
      terms_.push_back({k, RowSparse(A), &vf.get(k)});
    }
  }

  Eigen::Index rows() const { return static_cast<Eigen::Index>(n_tx_) * n_v_; }
  int n_tx() const { return n_tx_; }
  int n_v() const { return n_v_; }
  const std::vector<Term>& terms() const { return terms_; }

  /// y = A x.
  void apply(const Eigen::Ref<const Eigen::VectorXd>& x, Eigen::VectorXd& y) const {
    y.setZero(rows());
    Eigen::Map<const Eigen::MatrixXd> Xt(x.data(), n_v_, n_tx_);  // column j = v-block of tx dof j
    Eigen::Map<Eigen::MatrixXd> Yt(y.data(), n_v_, n_tx_);
    Eigen::MatrixXd T(n_v_, n_tx_);
    for (const auto& term : terms_) {
      T.noalias() = (*term.B) * Xt;
      for (int j = 0; j < n_tx_; ++j)
        for (RowSparse::InnerIterator it(term.A, j); it; ++it) Yt.col(j).noalias() += it.value() * T.col(it.col());
    }
  }

  /// Explicit matrix (small meshes and tests only).
  SparseMatrix assemble() const {
    SparseMatrix K(rows(), rows());
    for (const auto& term : terms_) K += kron(SparseMatrix(term.A), *term.B);
    K.prune(0.0);
    return K;
  }

 private:
  int n_tx_, n_v_;
  std::vector<Term> terms_;
};

/// Block-diagonal preconditioner: each v factor is row-sum lumped, factors
/// carrying a v-derivative are dropped, leaving one (t,x) system per v dof.
class LumpedVelocityPreconditioner {
 public:
  LumpedVelocityPreconditioner() = default;

  void setup(const VlasovSlabOperator& op) {
    n_tx_ = op.n_tx();
    n_v_ = op.n_v();
    std::vector<std::pair<const RowSparse*, Eigen::VectorXd>> parts;
    for (const auto& t : op.terms()) {
      if (t.key.trial != 0 || t.key.test != 0) continue;
      parts.emplace_back(&t.A, *t.B * Eigen::VectorXd::Ones(n_v_));
    }
    auto lus = std::make_shared<std::vector<Eigen::SparseLU<SparseMatrix>>>(n_v_);
    for (int l = 0; l < n_v_; ++l) {
      SparseMatrix P(n_tx_, n_tx_);
      for (const auto& [A, d] : parts) P += d[l] * SparseMatrix(*A);
      P.makeCompressed();
      (*lus)[l].compute(P);
      if ((*lus)[l].info() != Eigen::Success) throw InvariantError("lumped preconditioner: singular block");
    }
    lu_ = std::move(lus);
  }

  template <class M>
  LumpedVelocityPreconditioner& analyzePattern(const M&) { return *this; }
  template <class M>
  LumpedVelocityPreconditioner& factorize(const M&) { return *this; }
  template <class M>
  LumpedVelocityPreconditioner& compute(const M&) { return *this; }
  Eigen::ComputationInfo info() const { return Eigen::Success; }

  template <class Rhs>
  Eigen::VectorXd solve(const Eigen::MatrixBase<Rhs>& b) const {
    if (!lu_) return b;
    Eigen::VectorXd out(b.size());
    Eigen::VectorXd col(n_tx_);
    for (int l = 0; l < n_v_; ++l) {
      for (int j = 0; j < n_tx_; ++j) col[j] = b[static_cast<Eigen::Index>(j) * n_v_ + l];
      const Eigen::VectorXd s = (*lu_)[l].solve(col);
      for (int j = 0; j < n_tx_; ++j) out[static_cast<Eigen::Index>(j) * n_v_ + l] = s[j];
    }
    return out;
  }

 private:
  int n_tx_ = 0, n_v_ = 0;
  std::shared_ptr<std::vector<Eigen::SparseLU<SparseMatrix>>> lu_;
};

/// Eigen-compatible handle on a VlasovSlabOperator for the iterative solvers.
class VlasovOperatorRef;

}  // namespace vmsd

namespace Eigen::internal {
template <>
struct traits<vmsd::VlasovOperatorRef> : public Eigen::internal::traits<Eigen::SparseMatrix<double>> {};
}  // namespace Eigen::internal

namespace vmsd {

class VlasovOperatorRef : public Eigen::EigenBase<VlasovOperatorRef> {
 public:
  using Scalar = double;
  using RealScalar = double;
  using StorageIndex = int;
  enum { ColsAtCompileTime = Eigen::Dynamic, MaxColsAtCompileTime = Eigen::Dynamic, IsRowMajor = false };

  explicit VlasovOperatorRef(const VlasovSlabOperator& op) : op_(&op) {}
  Eigen::Index rows() const { return op_->rows(); }
  Eigen::Index cols() const { return op_->rows(); }

  template <typename Rhs>
  Eigen::Product<VlasovOperatorRef, Rhs, Eigen::AliasFreeProduct> operator*(const Eigen::MatrixBase<Rhs>& x) const {
    return Eigen::Product<VlasovOperatorRef, Rhs, Eigen::AliasFreeProduct>(*this, x.derived());
  }
  const VlasovSlabOperator& op() const { return *op_; }

 private:
  const VlasovSlabOperator* op_;
};

}  // namespace vmsd

namespace Eigen::internal {
template <typename Rhs>
struct generic_product_impl<vmsd::VlasovOperatorRef, Rhs, SparseShape, DenseShape, GemvProduct>
    : generic_product_impl_base<vmsd::VlasovOperatorRef, Rhs, generic_product_impl<vmsd::VlasovOperatorRef, Rhs>> {
  using Scalar = typename Product<vmsd::VlasovOperatorRef, Rhs>::Scalar;
  template <typename Dest>
  static void scaleAndAddTo(Dest& dst, const vmsd::VlasovOperatorRef& lhs, const Rhs& rhs, const Scalar& alpha) {
    Eigen::VectorXd x = rhs;
    Eigen::VectorXd y;
    lhs.op().apply(x, y);
    dst += alpha * y;
  }
};
}  // namespace Eigen::internal

namespace vmsd {

/// Distribution history: data trace f_-(t_0) = P f^0 and one slab function per slab.
struct DistributionHistory {
  Eigen::VectorXd initial;
  std::vector<SlabFunction> slabs;
  std::vector<int> iterations;  // linear-solver iterations per slab
};

class VlasovSolver {
 public:
  /// h is the phase-space mesh parameter.
  VlasovSolver(const PhaseSpace& space, double h, SDParameters params)
      : V_(space), params_(params), delta_(params.delta(h)), vf_(space) {}

  const PhaseSpace& space() const { return V_; }
  double delta() const { return delta_; }
  const VelocityFactors& velocity_factors() const { return vf_; }

  VlasovSlabOperator slab_operator(int m, const DriftField& G) const {
    return VlasovSlabOperator(V_, vf_, m, G.slabs.at(m - 1), delta_);
  }

  /// <f_in, g_+>_{m-1} as a slab load vector.
  Eigen::VectorXd rhs(const Eigen::VectorXd& f_in) const {
    Dims d{V_.nxd(), V_.nv1d(), V_.nv2d()};
    Eigen::VectorXd Mf = mode_product(f_in, d, 0, V_.x_axis().mass);
    Mf = mode_product(Mf, d, 1, V_.v1_axis().mass);
    Mf = mode_product(Mf, d, 2, V_.v2_axis().mass);
    Eigen::VectorXd r(V_.slab_size());
    for (int a = 0; a < V_.nt(); ++a) r.segment(static_cast<Eigen::Index>(a) * V_.trace_size(), V_.trace_size()) = V_.t_axis().start[a] * Mf;
    return r;
  }

  SlabSystem assemble_slab(int m, const DriftField& G, const Eigen::VectorXd& f_in) const {
    return {slab_operator(m, G).assemble(), rhs(f_in)};
  }

  /// Solves one slab; returns the solution and the iteration count.
  std::pair<SlabFunction, int> solve_slab(int m, const DriftField& G, const Eigen::VectorXd& f_in) const {
    SlabFunction out = V_.zero(m);
    if (V_.slab_size() == 0 || f_in.lpNorm<Eigen::Infinity>() == 0.0) return {out, 0};
    const VlasovSlabOperator op = slab_operator(m, G);
    const Eigen::VectorXd b = rhs(f_in);
    Eigen::BiCGSTAB<VlasovOperatorRef, LumpedVelocityPreconditioner> solver;
    const VlasovOperatorRef ref(op);
    solver.compute(ref);
    solver.preconditioner().setup(op);
    solver.setTolerance(params_.solver_tol);
    solver.setMaxIterations(std::max<Eigen::Index>(1000, op.rows() / 10));
    out.coeffs = solver.solveWithGuess(b, V_.constant_in_time(m, f_in).coeffs);
    if (solver.info() != Eigen::Success) {
      // BiCGSTAB can break down on a restart; one more attempt from the current iterate.
      out.coeffs = solver.solveWithGuess(b, Eigen::VectorXd(out.coeffs));
      if (solver.info() != Eigen::Success)
        throw ConfigError("vlasov: linear solver did not converge on slab " + std::to_string(m) + " (residual " +
                          std::to_string(solver.error()) + ")");
    }
    return {out, static_cast<int>(solver.iterations())};
  }

  DistributionHistory march(const Eigen::VectorXd& f0_trace, const DriftField& G) const {
    DistributionHistory H;
    H.initial = f0_trace;
    Eigen::VectorXd in = f0_trace;
    for (int m = 1; m <= V_.time().slabs(); ++m) {
      auto [f, its] = solve_slab(m, G, in);
      H.slabs.push_back(std::move(f));
      H.iterations.push_back(its);
      in = V_.trace(H.slabs.back(), true);
    }
    return H;
  }

 private:
  const PhaseSpace& V_;
  SDParameters params_;
  double delta_;
  VelocityFactors vf_;
};

// ---------------------------------------------------------------------------
// Diagnostics

/// int phi dx dv for every basis function of a trace, [x][v1][v2].
inline Eigen::VectorXd basis_integrals(const PhaseSpace& V) {
  const Eigen::VectorXd ix = V.x_axis().test * Eigen::VectorXd::Ones(V.x_axis().qpoints());
  const Eigen::VectorXd i1 = V.v1_axis().test * Eigen::VectorXd::Ones(V.v1_axis().qpoints());
  const Eigen::VectorXd i2 = V.v2_axis().test * Eigen::VectorXd::Ones(V.v2_axis().qpoints());
  Eigen::VectorXd out(V.trace_size());
  for (int i = 0; i < V.nxd(); ++i)
    for (int a = 0; a < V.nv1d(); ++a)
      for (int b = 0; b < V.nv2d(); ++b) out[(static_cast<Eigen::Index>(i) * V.nv1d() + a) * V.nv2d() + b] = ix[i] * i1[a] * i2[b];
  return out;
}

/// Total mass int f dx dv of a trace.
inline double total_mass(const PhaseSpace& V, const Eigen::VectorXd& trace) {
  if (V.trace_size() == 0) return 0.0;
  return basis_integrals(V).dot(trace);
}

/// int |f| over the cells touching the velocity boundary.
inline double boundary_mass(const PhaseSpace& V, const Eigen::VectorXd& trace) {
  if (V.trace_size() == 0) return 0.0;
  const auto& q1 = V.v1_axis().quad;
  const auto& q2 = V.v2_axis().quad;
  double s = 0.0;
  V.for_each_spatial_plane(trace, [&](int qx, const Eigen::VectorXd& g) {
    const double wx = V.x_axis().quad.weights[qx];
    for (int a = 0; a < q1.size(); ++a) {
      const int c1 = a / q1.per_cell;
      for (int b = 0; b < q2.size(); ++b) {
        const int c2 = b / q2.per_cell;
        const bool edge = c1 == 0 || c1 == q1.cells - 1 || c2 == 0 || c2 == q2.cells - 1;
        if (edge) s += wx * q1.weights[a] * q2.weights[b] * std::abs(g[static_cast<Eigen::Index>(a) * q2.size() + b]);
      }
    }
  });
  return s;
}

/// int |f| dx dv of a trace (quadrature).
inline double l1_norm(const PhaseSpace& V, const Eigen::VectorXd& trace) {
  if (V.trace_size() == 0) return 0.0;
  double s = 0.0;
  const auto& q1 = V.v1_axis().quad;
  const auto& q2 = V.v2_axis().quad;
  V.for_each_spatial_plane(trace, [&](int qx, const Eigen::VectorXd& g) {
    for (int a = 0; a < q1.size(); ++a)
      for (int b = 0; b < q2.size(); ++b)
        s += V.x_axis().quad.weights[qx] * q1.weights[a] * q2.weights[b] * std::abs(g[static_cast<Eigen::Index>(a) * q2.size() + b]);
  });
  return s;
}

/// max(0, -min f) over the slab quadrature points.
inline double undershoot(const PhaseSpace& V, const SlabFunction& f) {
  double u = 0.0;
  if (V.slab_size() == 0) return u;
  V.for_each_plane(f, false, [&](const PhasePlane& P) { u = std::max(u, -P.f.minCoeff()); });
  return u;
}

}  // namespace vmsd

#pragma once

#include <algorithm>
#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include "sdb/error.hpp"
#include "sdb/fe_basis.hpp"
#include "sdb/problem.hpp"
#include "sdb/space.hpp"
#include "sdb/stabilization.hpp"

namespace sdb {

using SparseMatrix = Eigen::SparseMatrix<double>;

enum class Method { galerkin, asgs };

inline Method parse_method(const std::string& s) {
  if (s == "galerkin") return Method::galerkin;
  if (s == "asgs") return Method::asgs;
  throw ConfigError("unknown method '" + s + "' (expected galerkin or asgs)");
}

inline std::string to_string(Method m) { return m == Method::galerkin ? "galerkin" : "asgs"; }

using ForcingFn = std::function<Forcing(double x, double y, double t)>;

inline ForcingFn manufactured_forcing(const CoefficientSet& k) {
  return [k](double x, double y, double t) { return mms_forcing(x, y, t, k); };
}

inline ForcingFn zero_forcing() {
  return [](double, double, double) { return Forcing{}; };
}

/// Linear system for one theta step, unknowns U^{n+1} in BlockLayout order.
struct BlockSystem {
  SparseMatrix matrix;
  Eigen::VectorXd rhs;
  BlockLayout layout;
  std::vector<std::size_t> dirichlet_rows;
  std::optional<std::size_t> gauge_dof;  // pinned pressure unknown (global index)
};

/// Everything the element kernel needs for one step.
///
/// `lagged` supplies mu(c) and the advecting velocity; it is state_n for
/// backward Euler and an extrapolation to t^{n,theta} for Crank-Nicolson.
struct StepData {
  const CoupledState* state_n = nullptr;
  const CoupledState* lagged = nullptr;
  CoefficientSet coeffs;
  ForcingFn forcing;
  double dt = 0.0;
  double theta = 1.0;
  std::size_t step_index = 0;
  int quad_degree = 5;

  double t_theta() const { return state_n->t + 0.5 * (1.0 + theta) * dt; }
};

namespace detail {

constexpr int kLocal = 21;  // 6 u1 + 6 u2 + 3 p + 6 c
constexpr int kU1 = 0, kU2 = 6, kP = 12, kC = 15;

using LocalMatrix = std::array<std::array<double, kLocal>, kLocal>;
using LocalVector = std::array<double, kLocal>;

inline std::array<std::size_t, kLocal> local_to_global(const Discretization& d, std::size_t k) {
  const auto& l = d.layout;
  const auto& p2 = d.dofs.p2_dofs[k];
  const auto& p1 = d.dofs.p1_dofs[k];
  std::array<std::size_t, kLocal> g{};
  for (int i = 0; i < 6; ++i) {
    g[kU1 + i] = l.u1() + p2[i];
    g[kU2 + i] = l.u2() + p2[i];
    g[kC + i] = l.c() + p2[i];
  }
  for (int i = 0; i < 3; ++i) g[kP + i] = l.p() + p1[i];
  return g;
}

inline bool coupled(int i, int j) { return (i < kC) == (j < kC); }

struct ElementContribution {
  LocalMatrix a{};
  LocalVector b{};
};

// Adds -weight * test (x) op to `m` for local vectors of length kLocal.
inline void add_outer(LocalMatrix& m, double weight, const LocalVector& test,
                      const LocalVector& op) {
  for (int i = 0; i < kLocal; ++i) {
    if (test[i] == 0.0) continue;
    const double ti = weight * test[i];
    for (int j = 0; j < kLocal; ++j) m[i][j] -= ti * op[j];
  }
}

inline ElementContribution element_system(const Discretization& d, std::size_t k,
                                          const StepData& s, Method method,
                                          const StabilizationParams* stab,
                                          const QuadratureRule& rule) {
  const auto& geo = d.geometry[k];
  const auto& p2 = d.dofs.p2_dofs[k];
  const auto& p1 = d.dofs.p1_dofs[k];
  const auto& kc = s.coeffs;
  const double t = s.t_theta();
  const double a = 0.5 * (1.0 + s.theta), b = 0.5 * (1.0 - s.theta);

  LocalMatrix op{}, mass{};
  LocalVector load{};

  const bool asgs = method == Method::asgs && stab != nullptr;
  const double tau1 = asgs ? stab->tau1_p : 0.0;
  const double tau2 = asgs ? stab->tau2_p : 0.0;
  const double w_adj = asgs ? stab->transport_adjoint_weight(s.step_index) : 0.0;
  const double w_mass = asgs ? stab->transport_mass_weight(s.step_index) : 0.0;

  for (const auto& qp : rule.points) {
    const auto sh = physical_shape(geo, qp.x, qp.y);
    const double w = qp.weight * std::abs(geo.det);
    const auto x = geo.map(qp.x, qp.y);

    const auto cl = eval_p2(sh, s.lagged->c, p2);
    const double ul1 = eval_p2(sh, s.lagged->u1, p2).v;
    const double ul2 = eval_p2(sh, s.lagged->u2, p2).v;
    const double mu = kc.mu(cl.v);
    const double dmu = kc.mu.derivative(cl.v);
    const Vec2 gmu{dmu * cl.g[0], dmu * cl.g[1]};
    const auto D = kc.diff(x.x, x.y, t);
    const auto f = s.forcing(x.x, x.y, t);

    // Strong operators applied to each basis function.
    std::array<double, 6> visc{}, diff{}, adv{};
    for (int j = 0; j < 6; ++j) {
      const auto& g = sh.g[j];
      const auto& h = sh.h[j];
      visc[j] = -mu * (h[0][0] + h[1][1]) - (gmu[0] * g[0] + gmu[1] * g[1]) + kc.sigma * sh.n[j];
      diff[j] = -(D.d1 * h[0][0] + D.d1_dx * g[0] + D.d2 * h[1][1] + D.d2_dy * g[1]);
      adv[j] = ul1 * g[0] + ul2 * g[1];
    }

    // Galerkin forms.
    for (int i = 0; i < 6; ++i) {
      for (int j = 0; j < 6; ++j) {
        const double gg = sh.g[i][0] * sh.g[j][0] + sh.g[i][1] * sh.g[j][1];
        const double nn = sh.n[i] * sh.n[j];
        const double flow = w * (mu * gg + kc.sigma * nn);
        op[kU1 + i][kU1 + j] += flow;
        op[kU2 + i][kU2 + j] += flow;
        op[kC + i][kC + j] += w * (D.d1 * sh.g[i][0] * sh.g[j][0] + D.d2 * sh.g[i][1] * sh.g[j][1] +
                                   sh.n[i] * adv[j] + kc.alpha * nn);
        mass[kC + i][kC + j] += w * nn;
      }
      for (int j = 0; j < 3; ++j) {
        op[kU1 + i][kP + j] -= w * sh.np[j] * sh.g[i][0];
        op[kU2 + i][kP + j] -= w * sh.np[j] * sh.g[i][1];
        op[kP + j][kU1 + i] += w * sh.g[i][0] * sh.np[j];
        op[kP + j][kU2 + i] += w * sh.g[i][1] * sh.np[j];
      }
      load[kU1 + i] += w * f.f1x * sh.n[i];
      load[kU2 + i] += w * f.f1y * sh.n[i];
      load[kC + i] += w * f.g * sh.n[i];
    }
    for (int j = 0; j < 3; ++j) load[kP + j] += w * f.f2 * sh.np[j];

    if (!asgs) continue;

    // Residual R = F - L U is tested against L* V; each term adds
    // -tau * (T (x) L) to the operator and -tau * T F to the load.
    LocalVector lx{}, tx{}, ly{}, ty{}, ld{}, td{}, lt{}, tt{}, nt{}, nc{};
    for (int j = 0; j < 6; ++j) {
      lx[kU1 + j] = visc[j];
      tx[kU1 + j] = visc[j];
      ly[kU2 + j] = visc[j];
      ty[kU2 + j] = visc[j];
      ld[kU1 + j] = sh.g[j][0];
      ld[kU2 + j] = sh.g[j][1];
      td[kU1 + j] = -sh.g[j][0];
      td[kU2 + j] = -sh.g[j][1];
      lt[kC + j] = diff[j] + adv[j] + kc.alpha * sh.n[j];
      tt[kC + j] = diff[j] - adv[j] + kc.alpha * sh.n[j];
      nc[kC + j] = sh.n[j];
    }
    for (int j = 0; j < 3; ++j) {
      lx[kP + j] = sh.gp[j][0];
      tx[kP + j] = -sh.gp[j][0];
      ly[kP + j] = sh.gp[j][1];
      ty[kP + j] = -sh.gp[j][1];
    }
    nt = nc;

    const auto stab_term = [&](double tau, const LocalVector& test, const LocalVector& lop,
                               const LocalVector* time_op, double rhs) {
      if (tau == 0.0) return;
      add_outer(op, tau * w, test, lop);
      if (time_op) add_outer(mass, tau * w, test, *time_op);
      for (int i = 0; i < kLocal; ++i) load[i] -= tau * w * test[i] * rhs;
    };
    stab_term(tau1, tx, lx, nullptr, f.f1x);
    stab_term(tau1, ty, ly, nullptr, f.f1y);
    stab_term(tau2, td, ld, nullptr, f.f2);
    stab_term(w_adj, tt, lt, &nt, f.g);
    stab_term(w_mass, nc, lt, &nt, f.g);
  }

  // Theta unwinding: L U^{n,theta} = a L U^{n+1} + b L U^n.
  LocalVector old{};
  const auto& sn = *s.state_n;
  for (int i = 0; i < 6; ++i) {
    old[kU1 + i] = sn.u1[static_cast<Eigen::Index>(p2[i])];
    old[kU2 + i] = sn.u2[static_cast<Eigen::Index>(p2[i])];
    old[kC + i] = sn.c[static_cast<Eigen::Index>(p2[i])];
  }
  for (int i = 0; i < 3; ++i) old[kP + i] = sn.p[static_cast<Eigen::Index>(p1[i])];

  ElementContribution out;
  const double inv_dt = 1.0 / s.dt;
  for (int i = 0; i < kLocal; ++i) {
    double r = load[i];
    for (int j = 0; j < kLocal; ++j) {
      out.a[i][j] = a * op[i][j] + inv_dt * mass[i][j];
      r += (inv_dt * mass[i][j] - b * op[i][j]) * old[j];
    }
    out.b[i] = r;
  }
  return out;
}

}  // namespace detail

/// Assembles step systems on a fixed sparsity pattern.
///
/// The pattern couples (u1, u2, p) among themselves and c with itself; the
/// lagged coefficients leave the flow/transport blocks of U^{n+1}
/// uncoupled. Element contributions are computed in parallel and summed in
/// element order, so the result does not depend on the worker count.
class Assembler {
 public:
  explicit Assembler(const Discretization& d, unsigned workers = 1)
      : disc_(&d), workers_(std::max(1u, workers)) {
    build_pattern();
  }

  const Discretization& discretization() const { return *disc_; }
  const SparseMatrix& pattern() const { return pattern_; }
  unsigned workers() const { return workers_; }
  void set_workers(unsigned w) { workers_ = std::max(1u, w); }

  BlockSystem assemble(const StepData& s, Method method,
                       const StabilizationParams* stab = nullptr) const {
    const auto& d = *disc_;
    if (!s.state_n || !s.lagged) throw InputError("step data needs state_n and lagged state");
    if (!s.state_n->matches(d.layout) || !s.lagged->matches(d.layout))
      throw InputError("state dof counts do not match the dof map");
    if (!(s.dt > 0.0)) throw InputError("dt must be positive");
    if (s.theta != 0.0 && s.theta != 1.0) throw InputError("theta must be 0 or 1");
    if (method == Method::asgs) {
      if (!stab) throw InputError("ASGS assembly needs stabilization parameters");
      if (stab->tau1 < 0.0 || stab->tau2 < 0.0 || stab->tau3 < 0.0)
        throw InputError("stabilization parameters must be nonnegative");
    }
    const auto rule = quadrature_rule(s.quad_degree);

    BlockSystem sys;
    sys.layout = d.layout;
    sys.matrix = pattern_;
    sys.rhs = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(d.layout.size()));
    double* values = sys.matrix.valuePtr();

    const std::size_t n_el = d.num_elements();
    constexpr std::size_t kBatch = 2048;
    std::vector<detail::ElementContribution> buf(std::min(n_el, kBatch));
    for (std::size_t start = 0; start < n_el; start += kBatch) {
      const std::size_t count = std::min(kBatch, n_el - start);
      const auto work = [&](std::size_t lo, std::size_t hi) {
        for (std::size_t e = lo; e < hi; ++e)
          buf[e] = detail::element_system(d, start + e, s, method, stab, rule);
      };
      if (workers_ == 1) {
        work(0, count);
      } else {
        std::vector<std::thread> pool;
        const std::size_t chunk = (count + workers_ - 1) / workers_;
        for (std::size_t lo = 0; lo < count; lo += chunk)
          pool.emplace_back(work, lo, std::min(count, lo + chunk));
        for (auto& th : pool) th.join();
      }
      for (std::size_t e = 0; e < count; ++e) {
        const std::size_t k = start + e;
        const auto g = detail::local_to_global(d, k);
        const std::int32_t* slots = &slot_[k * detail::kLocal * detail::kLocal];
        for (int i = 0; i < detail::kLocal; ++i) {
          sys.rhs[static_cast<Eigen::Index>(g[i])] += buf[e].b[i];
          for (int j = 0; j < detail::kLocal; ++j) {
            const auto slot = slots[i * detail::kLocal + j];
            if (slot >= 0) values[slot] += buf[e].a[i][j];
          }
        }
      }
    }
    return sys;
  }

 private:
  void build_pattern() {
    const auto& d = *disc_;
    const auto n = static_cast<Eigen::Index>(d.layout.size());
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(d.num_elements() * (15 * 15 + 6 * 6));
    for (std::size_t k = 0; k < d.num_elements(); ++k) {
      const auto g = detail::local_to_global(d, k);
      for (int i = 0; i < detail::kLocal; ++i)
        for (int j = 0; j < detail::kLocal; ++j)
          if (detail::coupled(i, j))
            trip.emplace_back(static_cast<Eigen::Index>(g[i]), static_cast<Eigen::Index>(g[j]),
                              0.0);
    }
    pattern_.resize(n, n);
    pattern_.setFromTriplets(trip.begin(), trip.end());
    pattern_.makeCompressed();

    const auto* outer = pattern_.outerIndexPtr();
    const auto* inner = pattern_.innerIndexPtr();
    slot_.assign(d.num_elements() * detail::kLocal * detail::kLocal, -1);
    for (std::size_t k = 0; k < d.num_elements(); ++k) {
      const auto g = detail::local_to_global(d, k);
      for (int i = 0; i < detail::kLocal; ++i)
        for (int j = 0; j < detail::kLocal; ++j) {
          if (!detail::coupled(i, j)) continue;
          const auto col = static_cast<Eigen::Index>(g[j]);
          const auto row = static_cast<int>(g[i]);
          const int* lo = inner + outer[col];
          const int* hi = inner + outer[col + 1];
          const int* it = std::lower_bound(lo, hi, row);
          slot_[(k * detail::kLocal + i) * detail::kLocal + j] =
              static_cast<std::int32_t>(it - inner);
        }
    }
  }

  const Discretization* disc_;
  unsigned workers_;
  SparseMatrix pattern_;
  std::vector<std::int32_t> slot_;
};

inline BlockSystem assemble_galerkin(const Assembler& asmb, const StepData& s) {
  return asmb.assemble(s, Method::galerkin);
}

inline BlockSystem assemble_asgs(const Assembler& asmb, const StepData& s,
                                 const StabilizationParams& taus) {
  return asmb.assemble(s, Method::asgs, &taus);
}

namespace detail {

// Symmetric elimination: constrained rows/columns become identity and the
// known column contributions move to the right-hand side.
inline void eliminate(BlockSystem& sys, const std::vector<std::size_t>& dofs,
                      const std::vector<double>& values) {
  const auto n = static_cast<std::size_t>(sys.matrix.rows());
  std::vector<char> fixed(n, 0);
  std::vector<double> g(n, 0.0);
  for (std::size_t i = 0; i < dofs.size(); ++i) {
    if (dofs[i] >= n) throw InputError("constrained dof out of range");
    fixed[dofs[i]] = 1;
    g[dofs[i]] = values[i];
  }
  std::vector<char> has_diag(n, 0);
  for (Eigen::Index col = 0; col < sys.matrix.outerSize(); ++col) {
    const auto c = static_cast<std::size_t>(col);
    for (SparseMatrix::InnerIterator it(sys.matrix, col); it; ++it) {
      const auto r = static_cast<std::size_t>(it.row());
      if (fixed[c]) {
        if (r == c) {
          it.valueRef() = 1.0;
          has_diag[c] = 1;
        } else {
          if (!fixed[r]) sys.rhs[it.row()] -= it.value() * g[c];
          it.valueRef() = 0.0;
        }
      } else if (fixed[r]) {
        it.valueRef() = 0.0;
      }
    }
  }
  for (std::size_t i = 0; i < dofs.size(); ++i) {
    const auto k = static_cast<Eigen::Index>(dofs[i]);
    if (!has_diag[dofs[i]]) sys.matrix.coeffRef(k, k) = 1.0;
    sys.rhs[k] = values[i];
  }
}

}  // namespace detail

/// Homogeneous-or-general Dirichlet data on u1, u2 and c dofs.
inline void apply_dirichlet(BlockSystem& sys, const std::vector<std::size_t>& dofs,
                            const std::vector<double>& values) {
  if (dofs.size() != values.size()) throw InputError("Dirichlet dofs/values size mismatch");
  for (auto dof : dofs) {
    if (dof >= sys.layout.p() && dof < sys.layout.c())
      throw InputError("pressure has no Dirichlet data");
  }
  detail::eliminate(sys, dofs, values);
  sys.dirichlet_rows.insert(sys.dirichlet_rows.end(), dofs.begin(), dofs.end());
}

/// Boundary dofs of u1, u2 and c in global numbering.
inline std::vector<std::size_t> boundary_dofs(const Discretization& d) {
  std::vector<std::size_t> out;
  for (std::size_t off : {d.layout.u1(), d.layout.u2(), d.layout.c()})
    for (auto i : d.dofs.p2_boundary) out.push_back(off + i);
  return out;
}

inline void apply_homogeneous_dirichlet(BlockSystem& sys, const Discretization& d) {
  const auto dofs = boundary_dofs(d);
  apply_dirichlet(sys, dofs, std::vector<double>(dofs.size(), 0.0));
}

/// Pins pressure dof `local_p` to zero. The additive constant is restored by
/// remove_pressure_mean after the solve.
inline void fix_pressure_gauge(BlockSystem& sys, std::size_t local_p = 0) {
  const std::size_t dof = sys.layout.p() + local_p;
  if (dof >= sys.layout.c()) throw InputError("gauge dof outside the pressure block");
  detail::eliminate(sys, {dof}, {0.0});
  sys.gauge_dof = dof;
}

/// Integral of a P1 field over the domain.
inline double integrate_p1(const Discretization& d, const Eigen::VectorXd& p) {
  double s = 0.0;
  for (std::size_t k = 0; k < d.num_elements(); ++k) {
    const auto& t = d.dofs.p1_dofs[k];
    s += d.geometry[k].area *
         (p[static_cast<Eigen::Index>(t[0])] + p[static_cast<Eigen::Index>(t[1])] +
          p[static_cast<Eigen::Index>(t[2])]) /
         3.0;
  }
  return s;
}

/// Shifts p to zero mean over the unit square.
inline void remove_pressure_mean(const Discretization& d, Eigen::VectorXd& p) {
  double area = 0.0;
  for (const auto& g : d.geometry) area += g.area;
  p.array() -= integrate_p1(d, p) / area;
}

}  // namespace sdb

#include "opfr/socp.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <optional>
#include <set>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

namespace opfr::socp {

namespace {

using Json = nlohmann::ordered_json;

/// The problem rewritten as  min c'x : Ae x = be, Gx + s = h,
/// s in R+^l x SOC(d_1) x ... x SOC(d_q).  Equal-bound boxes become
/// equality rows (appended after the user's), finite one-sided bounds
/// become orthant rows, rotated cones become standard second-order cones
/// through (a + b, 2u, a - b).
struct StandardForm {
  RMat Ae;
  RVec be;
  RMat G;
  RVec h;
  int l = 0;                 ///< orthant rows
  std::vector<int> soc_dim;  ///< per cone, |u| + 2
};

StandardForm standardize(const ConeProblem& p) {
  p.validate();
  const int n = p.n_var;

  std::vector<std::pair<int, double>> pins;    // (var, value)
  std::vector<std::pair<int, double>> lowers;  // (var, bound)
  std::vector<std::pair<int, double>> uppers;
  for (int i = 0; i < n; ++i) {
    const double lo = p.lower(i);
    const double up = p.upper(i);
    if (std::isfinite(lo) && lo == up) {
      pins.emplace_back(i, lo);
      continue;
    }
    if (std::isfinite(lo)) lowers.emplace_back(i, lo);
    if (std::isfinite(up)) uppers.emplace_back(i, up);
  }

  StandardForm sf;
  const int p_user = static_cast<int>(p.A.rows());
  sf.Ae = RMat::Zero(p_user + static_cast<int>(pins.size()), n);
  sf.be = RVec::Zero(sf.Ae.rows());
  if (p_user > 0) {
    sf.Ae.topRows(p_user) = p.A;
    sf.be.head(p_user) = p.b;
  }
  for (size_t i = 0; i < pins.size(); ++i) {
    sf.Ae(p_user + static_cast<int>(i), pins[i].first) = 1.0;
    sf.be(p_user + static_cast<int>(i)) = pins[i].second;
  }

  sf.l = static_cast<int>(lowers.size() + uppers.size());
  int m = sf.l;
  for (const RotatedCone& cone : p.cones) {
    sf.soc_dim.push_back(static_cast<int>(cone.u.size()) + 2);
    m += sf.soc_dim.back();
  }
  sf.G = RMat::Zero(m, n);
  sf.h = RVec::Zero(m);
  int r = 0;
  for (const auto& [i, lo] : lowers) {  // -x_i <= -lo
    sf.G(r, i) = -1.0;
    sf.h(r) = -lo;
    ++r;
  }
  for (const auto& [i, up] : uppers) {  // x_i <= up
    sf.G(r, i) = 1.0;
    sf.h(r) = up;
    ++r;
  }
  for (const RotatedCone& cone : p.cones) {
    // s = (a + b, 2u, a - b) with h = 0 on the block.
    sf.G(r, cone.a) = -1.0;
    sf.G(r, cone.b) = -1.0;
    ++r;
    for (int ui : cone.u) {
      sf.G(r, ui) = -2.0;
      ++r;
    }
    sf.G(r, cone.a) = -1.0;
    sf.G(r, cone.b) = 1.0;
    ++r;
  }
  return sf;
}

/// Violation of s in K (0 when inside).
double cone_violation(const StandardForm& sf, const RVec& s) {
  double v = 0.0;
  for (int i = 0; i < sf.l; ++i) v = std::max(v, -s(i));
  int off = sf.l;
  for (int d : sf.soc_dim) {
    v = std::max(v, s.segment(off + 1, d - 1).norm() - s(off));
    off += d;
  }
  return v;
}

KktResiduals compute_residuals(const StandardForm& sf, const RVec& c,
                               const RVec& x, const RVec& y, const RVec& z) {
  KktResiduals res;
  const RVec s = sf.h - sf.G * x;
  double primal = cone_violation(sf, s);
  if (sf.Ae.rows() > 0)
    primal = std::max(primal, (sf.Ae * x - sf.be).cwiseAbs().maxCoeff());
  res.primal = primal;

  RVec stat = c + sf.G.transpose() * z;
  if (sf.Ae.rows() > 0) stat += sf.Ae.transpose() * y;
  double dual = stat.size() > 0 ? stat.cwiseAbs().maxCoeff() : 0.0;
  dual = std::max(dual, cone_violation(sf, z));
  res.dual = dual;

  res.gap = std::abs(s.dot(z)) / (1.0 + std::abs(c.dot(x)));
  return res;
}

/// Nesterov-Todd scaling of the current (s, z) pair.  W is symmetric,
/// W z = W^{-1} s = lambda, and the SOC blocks are eta * Wbar with
/// Wbar = [[a, q'], [q, I + q q'/(1+a)]], a^2 - |q|^2 = 1.
struct Scaling {
  const StandardForm* sf = nullptr;
  RVec w_orth;  ///< sqrt(s_i / z_i)
  struct Soc {
    double eta = 1.0;
    double a = 1.0;
    RVec q;
  };
  std::vector<Soc> soc;

  bool compute(const StandardForm& form, const RVec& s, const RVec& z) {
    sf = &form;
    w_orth = RVec(form.l);
    for (int i = 0; i < form.l; ++i) {
      if (s(i) <= 0.0 || z(i) <= 0.0) return false;
      w_orth(i) = std::sqrt(s(i) / z(i));
    }
    soc.clear();
    int off = form.l;
    for (int d : form.soc_dim) {
      const double sres = s(off) * s(off) - s.segment(off + 1, d - 1).squaredNorm();
      const double zres = z(off) * z(off) - z.segment(off + 1, d - 1).squaredNorm();
      if (sres <= 0.0 || zres <= 0.0 || s(off) <= 0.0 || z(off) <= 0.0)
        return false;
      const double snorm = std::sqrt(sres);
      const double znorm = std::sqrt(zres);
      const RVec sbar = s.segment(off, d) / snorm;
      const RVec zbar = z.segment(off, d) / znorm;
      const double gamma = std::sqrt(0.5 * (1.0 + sbar.dot(zbar)));
      Soc sc;
      sc.eta = std::sqrt(snorm / znorm);
      sc.a = (sbar(0) + zbar(0)) / (2.0 * gamma);
      sc.q = (sbar.tail(d - 1) - zbar.tail(d - 1)) / (2.0 * gamma);
      soc.push_back(std::move(sc));
      off += d;
    }
    return true;
  }

  /// W v
  RVec apply(const RVec& v) const {
    RVec out(v.size());
    out.head(sf->l) = w_orth.cwiseProduct(v.head(sf->l));
    int off = sf->l;
    for (size_t k = 0; k < soc.size(); ++k) {
      const Soc& sc = soc[k];
      const int d = sf->soc_dim[k];
      const double zeta = sc.q.dot(v.segment(off + 1, d - 1));
      out(off) = sc.eta * (sc.a * v(off) + zeta);
      out.segment(off + 1, d - 1) =
          sc.eta * (v.segment(off + 1, d - 1) +
                    (v(off) + zeta / (1.0 + sc.a)) * sc.q);
      off += d;
    }
    return out;
  }

  /// W^{-1} v
  RVec apply_inv(const RVec& v) const {
    RVec out(v.size());
    out.head(sf->l) = v.head(sf->l).cwiseQuotient(w_orth);
    int off = sf->l;
    for (size_t k = 0; k < soc.size(); ++k) {
      const Soc& sc = soc[k];
      const int d = sf->soc_dim[k];
      const double zeta = sc.q.dot(v.segment(off + 1, d - 1));
      out(off) = (sc.a * v(off) - zeta) / sc.eta;
      out.segment(off + 1, d - 1) =
          (v.segment(off + 1, d - 1) +
           (zeta / (1.0 + sc.a) - v(off)) * sc.q) /
          sc.eta;
      off += d;
    }
    return out;
  }

  /// The dense block W'W = W^2 used in the reduced KKT matrix.
  RMat gram() const {
    const int m = static_cast<int>(sf->G.rows());
    RMat out = RMat::Zero(m, m);
    for (int i = 0; i < sf->l; ++i) out(i, i) = w_orth(i) * w_orth(i);
    int off = sf->l;
    for (size_t k = 0; k < soc.size(); ++k) {
      const Soc& sc = soc[k];
      const int d = sf->soc_dim[k];
      const double e2 = sc.eta * sc.eta;
      // eta^2 (2 wbar wbar' - J) with wbar = (a, q).
      out(off, off) = e2 * (2.0 * sc.a * sc.a - 1.0);
      out.block(off, off + 1, 1, d - 1) = e2 * 2.0 * sc.a * sc.q.transpose();
      out.block(off + 1, off, d - 1, 1) = e2 * 2.0 * sc.a * sc.q;
      out.block(off + 1, off + 1, d - 1, d - 1) =
          e2 * (RMat::Identity(d - 1, d - 1) +
                2.0 * sc.q * sc.q.transpose());
      off += d;
    }
    return out;
  }
};

/// Jordan product u o v on R+^l x SOCs.
RVec jordan(const StandardForm& sf, const RVec& u, const RVec& v) {
  RVec out(u.size());
  out.head(sf.l) = u.head(sf.l).cwiseProduct(v.head(sf.l));
  int off = sf.l;
  for (int d : sf.soc_dim) {
    out(off) = u.segment(off, d).dot(v.segment(off, d));
    out.segment(off + 1, d - 1) = u(off) * v.segment(off + 1, d - 1) +
                                  v(off) * u.segment(off + 1, d - 1);
    off += d;
  }
  return out;
}

/// Jordan division u \ v (solves u o w = v).
RVec jordan_div(const StandardForm& sf, const RVec& u, const RVec& v) {
  RVec out(u.size());
  out.head(sf.l) = v.head(sf.l).cwiseQuotient(u.head(sf.l));
  int off = sf.l;
  for (int d : sf.soc_dim) {
    const double u0 = u(off);
    const double rho = u0 * u0 - u.segment(off + 1, d - 1).squaredNorm();
    const double zeta = u.segment(off + 1, d - 1).dot(v.segment(off + 1, d - 1));
    out(off) = (u0 * v(off) - zeta) / rho;
    const double factor = (zeta / u0 - v(off)) / rho;
    out.segment(off + 1, d - 1) = factor * u.segment(off + 1, d - 1) +
                                  v.segment(off + 1, d - 1) / u0;
    off += d;
  }
  return out;
}

/// The cone's identity element.
RVec jordan_identity(const StandardForm& sf) {
  RVec e = RVec::Zero(sf.G.rows());
  e.head(sf.l).setOnes();
  int off = sf.l;
  for (int d : sf.soc_dim) {
    e(off) = 1.0;
    off += d;
  }
  return e;
}

/// Strict interiority, the exact predicate the scaling computation needs.
bool strictly_interior(const StandardForm& sf, const RVec& v) {
  for (int i = 0; i < sf.l; ++i)
    if (v(i) <= 0.0) return false;
  int off = sf.l;
  for (int d : sf.soc_dim) {
    if (v(off) <= 0.0) return false;
    if (v(off) * v(off) - v.segment(off + 1, d - 1).squaredNorm() <= 0.0)
      return false;
    off += d;
  }
  return true;
}

/// Largest t >= 0 with v + t dv staying in the cone (kInf when unbounded).
double max_step(const StandardForm& sf, const RVec& v, const RVec& dv) {
  double t = kInf;
  for (int i = 0; i < sf.l; ++i)
    if (dv(i) < 0.0) t = std::min(t, -v(i) / dv(i));
  int off = sf.l;
  for (int d : sf.soc_dim) {
    // First positive root of (v0 + t d0)^2 - |v1 + t d1|^2 (the interior
    // starting point guarantees the constant term is positive and that the
    // v0 + t d0 >= 0 face cannot be hit first).
    const double A = dv(off) * dv(off) - dv.segment(off + 1, d - 1).squaredNorm();
    const double B = 2.0 * (v(off) * dv(off) -
                            v.segment(off + 1, d - 1).dot(dv.segment(off + 1, d - 1)));
    const double C = v(off) * v(off) - v.segment(off + 1, d - 1).squaredNorm();
    double root = kInf;
    if (A == 0.0) {
      if (B < 0.0) root = -C / B;
    } else {
      const double disc = B * B - 4.0 * A * C;
      if (A > 0.0) {
        if (disc >= 0.0 && B < 0.0) root = 2.0 * C / (-B + std::sqrt(disc));
      } else {
        // Opens downward with a positive value at zero: one positive root.
        root = 2.0 * C / (-B + std::sqrt(disc));
      }
    }
    if (root >= 0.0) t = std::min(t, root);
    off += d;
  }
  return t;
}

Json dump_bound(double v) {
  if (std::isinf(v)) return nullptr;
  return v;
}

// LU factorization of a symmetrically equilibrated copy of a (symmetric)
// KKT matrix.  Near convergence the scaled gram block spreads over many
// orders of magnitude and drives the raw matrix toward the double-precision
// conditioning limit; two Ruiz passes pull the rows and columns back to
// unit size so the factorization stays usable.  The static regularization
// (+reg on the first nx diagonals, -reg on the rest, matching the
// quasi-definite signature) is applied to the equilibrated copy, where it
// acts uniformly across the blocks.
struct KktFactor {
  RVec d;  ///< symmetric scaling: factors D K D with D = diag(d)
  Eigen::PartialPivLU<RMat> lu;

  KktFactor(const RMat& K, int nx, double reg) {
    const auto sz = K.rows();
    d = RVec::Ones(sz);
    RMat scaled = K;
    for (int pass = 0; pass < 2; ++pass) {
      const RVec r = scaled.cwiseAbs()
                         .rowwise()
                         .maxCoeff()
                         .cwiseMax(1e-300)
                         .cwiseSqrt()
                         .cwiseInverse();
      scaled = r.asDiagonal() * scaled * r.asDiagonal();
      d = d.cwiseProduct(r);
    }
    scaled.diagonal().head(nx).array() += reg;
    scaled.diagonal().tail(sz - nx).array() -= reg;
    lu.compute(scaled);
  }

  RVec solve(const RVec& rhs) const {
    return d.asDiagonal() * RVec(lu.solve(RVec(d.asDiagonal() * rhs)));
  }
};

}  // namespace

void ConeProblem::validate() const {
  if (n_var <= 0) throw DomainError("cone problem needs at least one variable");
  if (c.size() != n_var) throw DomainError("objective size mismatch");
  if (A.rows() > 0 && A.cols() != n_var)
    throw DomainError("equality matrix column count mismatch");
  if (b.size() != A.rows()) throw DomainError("equality rhs size mismatch");
  if (lower.size() != n_var || upper.size() != n_var)
    throw DomainError("bound vector size mismatch");
  for (int i = 0; i < n_var; ++i) {
    if (std::isnan(lower(i)) || std::isnan(upper(i)))
      throw DomainError("NaN variable bound");
    if (lower(i) > upper(i)) throw DomainError("crossed variable bounds");
    if (lower(i) == kInf || upper(i) == -kInf)
      throw DomainError("variable bound is infinite in the wrong direction");
  }
  for (const RotatedCone& cone : cones) {
    std::set<int> seen;
    auto add = [&](int i) {
      if (i < 0 || i >= n_var) throw DomainError("cone index out of range");
      if (!seen.insert(i).second)
        throw DomainError("cone indices must be disjoint within a cone");
    };
    for (int ui : cone.u) add(ui);
    add(cone.a);
    add(cone.b);
  }
}

std::string ConeProblem::to_json(bool pretty) const {
  Json doc;
  doc["n_var"] = n_var;
  doc["c"] = std::vector<double>(c.data(), c.data() + c.size());
  doc["A"] = Json::array();
  for (int r = 0; r < A.rows(); ++r) {
    Json row = Json::array();
    for (int j = 0; j < A.cols(); ++j) row.push_back(A(r, j));
    doc["A"].push_back(row);
  }
  doc["b"] = std::vector<double>(b.data(), b.data() + b.size());
  doc["lower"] = Json::array();
  doc["upper"] = Json::array();
  for (int i = 0; i < n_var; ++i) {
    doc["lower"].push_back(dump_bound(lower(i)));
    doc["upper"].push_back(dump_bound(upper(i)));
  }
  doc["cones"] = Json::array();
  for (const RotatedCone& cone : cones)
    doc["cones"].push_back({{"u", cone.u}, {"a", cone.a}, {"b", cone.b}});
  return pretty ? doc.dump(2) : doc.dump();
}

double KktResiduals::max_abs() const {
  return std::max({primal, dual, gap});
}

bool in_rotated_cone(const RVec& u, double a, double b) {
  return a >= 0.0 && b >= 0.0 && u.squaredNorm() <= a * b;
}

bool in_standard_soc(const RVec& w) {
  if (w.size() == 0) return true;
  return w(0) >= 0.0 && w.tail(w.size() - 1).squaredNorm() <= w(0) * w(0);
}

RVec rotated_to_standard(const RVec& u, double a, double b) {
  RVec w(u.size() + 2);
  w(0) = a + b;
  w.segment(1, u.size()) = 2.0 * u;
  w(u.size() + 1) = a - b;
  return w;
}

KktResiduals kkt_residuals(const ConeProblem& p, const ConeSolution& sol) {
  const StandardForm sf = standardize(p);
  if (sol.x.size() != p.n_var || sol.y.size() != sf.Ae.rows() ||
      sol.z.size() != sf.G.rows())
    throw DomainError("solution vectors do not match the problem's internal "
                      "standard form");
  return compute_residuals(sf, p.c, sol.x, sol.y, sol.z);
}

ConeSolution solve(const ConeProblem& p, const SolverOptions& opts) {
  const StandardForm sf = standardize(p);
  const int n = p.n_var;
  const int pe = static_cast<int>(sf.Ae.rows());
  const int m = static_cast<int>(sf.G.rows());
  const int ndeg = sf.l + static_cast<int>(sf.soc_dim.size());

  ConeSolution sol;
  sol.x = RVec::Zero(n);
  sol.y = RVec::Zero(pe);
  sol.z = RVec::Zero(m);

  auto finish = [&](SolveStatus status, const RVec& x, const RVec& y,
                    const RVec& z, int iters, const std::string& msg) {
    sol.status = status;
    sol.x = x;
    sol.y = y;
    sol.z = z;
    sol.objective = p.c.dot(x);
    sol.dual_objective = -(pe > 0 ? sf.be.dot(y) : 0.0) - sf.h.dot(z);
    sol.residuals = compute_residuals(sf, p.c, x, y, z);
    sol.iterations = iters;
    sol.message = msg;
    return sol;
  };

  // Degenerate cone-free case: plain equality-constrained linear program,
  // meaningful only when the equalities determine x.
  if (m == 0) {
    RMat K = RMat::Zero(n + pe, n + pe);
    K.topRightCorner(n, pe) = sf.Ae.transpose();
    K.bottomLeftCorner(pe, n) = sf.Ae;
    RVec rhs(n + pe);
    rhs.head(n) = -p.c;
    rhs.tail(pe) = sf.be;
    Eigen::FullPivLU<RMat> lu(K);
    if (!lu.isInvertible())
      return finish(SolveStatus::max_iter, RVec::Zero(n), RVec::Zero(pe),
                    RVec::Zero(0), 0,
                    "problem has no conic part and the equality KKT system "
                    "is singular");
    const RVec u = lu.solve(rhs);
    return finish(SolveStatus::optimal, u.head(n), u.tail(pe), RVec::Zero(0),
                  0, "");
  }

  // --- Initialization ---------------------------------------------------
  // x0: minimum-norm solution of Ae x = be (zero when unconstrained).
  RVec x = RVec::Zero(n);
  if (pe > 0) {
    x = sf.Ae.completeOrthogonalDecomposition().solve(sf.be);
  }
  RVec y = RVec::Zero(pe);

  // Slacks: orthant part from the natural slack pushed inside; each cone
  // block gets the shifted analytic-center point a = b = 1 + ||u||, i.e.
  // (2 + 2||u||, 2u, 0) in standard coordinates.
  const RVec natural = sf.h - sf.G * x;
  RVec s(m);
  for (int i = 0; i < sf.l; ++i) s(i) = std::max(natural(i), 1.0);
  {
    int off = sf.l;
    for (size_t k = 0; k < p.cones.size(); ++k) {
      const int d = sf.soc_dim[k];
      RVec ux(d - 2);
      for (int i = 0; i < d - 2; ++i) ux(i) = x(p.cones[k].u[i]);
      s(off) = 2.0 + 2.0 * ux.norm();
      s.segment(off + 1, d - 2) = 2.0 * ux;
      s(off + d - 1) = 0.0;
      off += d;
    }
  }
  // Duals: the cone identity (unit interior point per block).
  RVec z = jordan_identity(sf);

  double alpha_prev = 1.0;
  std::string stall_msg = "iteration budget exhausted";

  for (int iter = 0; iter < opts.max_iter; ++iter) {
    // Residuals of the current iterate.
    RVec rx = p.c + sf.G.transpose() * z;
    if (pe > 0) rx += sf.Ae.transpose() * y;
    const RVec ry = pe > 0 ? RVec(sf.Ae * x - sf.be) : RVec(RVec::Zero(0));
    const RVec rz = sf.G * x + s - sf.h;
    const double gap = s.dot(z);
    const double mu = gap / ndeg;
    const double pobj = p.c.dot(x);

    // Exit test on the same measures kkt_residuals() reports, so a
    // converged solution verifies against the advertised tolerances.
    const KktResiduals res = compute_residuals(sf, p.c, x, y, z);
    if (opts.verbose) {
      std::fprintf(stderr,
                   "it %2d  pobj % .6e  gap %.3e  pres %.3e  dres %.3e\n",
                   iter, pobj, res.gap, res.primal, res.dual);
    }
    if (res.primal <= opts.feas_tol && res.dual <= opts.feas_tol &&
        res.gap <= opts.gap_tol) {
      return finish(SolveStatus::optimal, x, y, z, iter, "");
    }

    // Primal infeasibility: (y, z) normalized into a dual-unbounded ray.
    const double ray_val = (pe > 0 ? sf.be.dot(y) : 0.0) + sf.h.dot(z);
    if (ray_val < -opts.feas_tol) {
      RVec ray = sf.G.transpose() * z;
      if (pe > 0) ray += sf.Ae.transpose() * y;
      const double ray_res = ray.cwiseAbs().maxCoeff() / (-ray_val);
      if (ray_res <= opts.feas_tol) {
        return finish(SolveStatus::infeasible, x, y / (-ray_val),
                      z / (-ray_val), iter,
                      "primal infeasible: dual objective unbounded along the "
                      "reported (y, z) ray");
      }
    }
    // Unbounded objective: x normalized by -c'x becomes a feasible descent
    // ray (Ax ~ 0, -Gx in the cone, c'x = -1).  The scale threshold keeps
    // legitimately negative optima from being mistaken for divergence.
    if (pobj < -1.0) {
      const double eq_res =
          pe > 0 ? (sf.Ae * x).cwiseAbs().maxCoeff() / (-pobj) : 0.0;
      const RVec gdir = -sf.G * x / (-pobj);
      if (eq_res <= opts.feas_tol &&
          cone_violation(sf, gdir) <= opts.feas_tol) {
        return finish(SolveStatus::max_iter, x / (-pobj), y, z, iter,
                      "objective unbounded below (dual infeasible); the "
                      "reported x is a normalized descent ray");
      }
    }

    Scaling W;
    if (!W.compute(sf, s, z)) {
      return finish(SolveStatus::max_iter, x, y, z, iter,
                    "iterate left the cone interior (numerical failure)");
    }
    const RVec lambda = W.apply(z);

    // Reduced KKT matrix, shared by predictor and corrector.  The factored
    // copy is equilibrated and carries static regularization (+delta on the
    // primal block, -delta on the dual blocks), which keeps the solve stable
    // when degeneracy drives the true matrix toward singularity near the
    // optimum; iterative refinement against the true matrix recovers the
    // direction accuracy.
    RMat K = RMat::Zero(n + pe + m, n + pe + m);
    if (pe > 0) {
      K.block(0, n, n, pe) = sf.Ae.transpose();
      K.block(n, 0, pe, n) = sf.Ae;
    }
    K.block(0, n + pe, n, m) = sf.G.transpose();
    K.block(n + pe, 0, m, n) = sf.G;
    K.block(n + pe, n + pe, m, m) = -W.gram();
    const KktFactor lu(K, n, 1e-10);
    std::optional<KktFactor> lu_plain;  // unregularized; built on demand

    // Solve K u = rhs through a factorization with refinement against the
    // true matrix; returns the relative residual achieved (infinite when the
    // solve produced non-finite values).
    auto solve_refined = [&](const KktFactor& fact, const RVec& rhs,
                             RVec& u) -> double {
      const double scale = std::max(1.0, rhs.cwiseAbs().maxCoeff());
      u = fact.solve(rhs);
      if (!u.allFinite()) return kInf;
      double best = kInf;
      for (int pass = 0; pass < 5; ++pass) {
        const RVec resid = rhs - K * u;
        if (!resid.allFinite()) return kInf;
        best = resid.cwiseAbs().maxCoeff() / scale;
        if (best <= 1e-13) return best;
        const RVec step = fact.solve(resid);
        if (!step.allFinite()) return best;
        u += step;
      }
      const RVec resid = rhs - K * u;
      if (!resid.allFinite() || !u.allFinite()) return kInf;
      return std::min(best, resid.cwiseAbs().maxCoeff() / scale);
    };

    // Best-effort direction: prefer the regularized factorization, fall back
    // to the unshifted one whenever refinement stalls (degenerate faces,
    // diverging certificate rays), and keep whichever reproduces the true
    // system better.  A direction that is still poor yields a tiny step and
    // is caught by the stall logic rather than aborting the whole solve.
    auto solve_dir = [&](const RVec& ds_target, RVec& dx, RVec& dy, RVec& dz,
                         RVec& ds) -> bool {
      RVec rhs(n + pe + m);
      rhs.head(n) = -rx;
      rhs.segment(n, pe) = -ry;
      rhs.tail(m) = -rz - W.apply(jordan_div(sf, lambda, ds_target));
      RVec u;
      double res = solve_refined(lu, rhs, u);
      if (res > 1e-13) {
        if (!lu_plain) lu_plain.emplace(K, n, 0.0);
        RVec u2;
        const double res2 = solve_refined(*lu_plain, rhs, u2);
        if (res2 < res) {
          u.swap(u2);
          res = res2;
        }
      }
      if (!std::isfinite(res)) return false;
      dx = u.head(n);
      dy = u.segment(n, pe);
      dz = u.tail(m);
      ds = -rz - sf.G * dx;
      return true;
    };

    // Predictor (affine scaling direction).
    const RVec minus_ll = -jordan(sf, lambda, lambda);
    RVec dx_a, dy_a, dz_a, ds_a;
    if (!solve_dir(minus_ll, dx_a, dy_a, dz_a, ds_a)) {
      return finish(SolveStatus::max_iter, x, y, z, iter,
                    "singular KKT system (numerical failure)");
    }
    const double alpha_aff =
        std::min({1.0, max_step(sf, s, ds_a), max_step(sf, z, dz_a)});
    const double gap_aff =
        (s + alpha_aff * ds_a).dot(z + alpha_aff * dz_a);
    const double sigma =
        std::clamp(std::pow(std::max(0.0, gap_aff / gap), 3.0), 0.0, 1.0);

    // Largest verified-interior step along (ds, dz).  The boundary distance
    // is computed in floating point; near convergence a 0.99 fraction of it
    // can still overshoot the cone, so halve until the new iterate passes
    // the interiority test.  Returns 0 when no acceptable step exists.
    auto retreat_alpha = [&](const RVec& ds, const RVec& dz) -> double {
      double a = std::min(
          1.0, 0.99 * std::min(max_step(sf, s, ds), max_step(sf, z, dz)));
      for (int attempt = 0; attempt < 60 && a > 0.0; ++attempt) {
        if (strictly_interior(sf, RVec(s + a * ds)) &&
            strictly_interior(sf, RVec(z + a * dz)))
          return a;
        a *= 0.5;
      }
      return 0.0;
    };

    // Corrector with Mehrotra's second-order term.
    const RVec corr =
        jordan(sf, W.apply_inv(ds_a), W.apply(dz_a));
    const RVec ds_target =
        minus_ll - corr + sigma * mu * jordan_identity(sf);
    RVec dx, dy, dz, ds;
    if (!solve_dir(ds_target, dx, dy, dz, ds)) {
      return finish(SolveStatus::max_iter, x, y, z, iter,
                    "singular KKT system (numerical failure)");
    }
    double alpha = retreat_alpha(ds, dz);

    // Near-degenerate iterates can turn the corrector direction sharply
    // against the cone boundary (the second-order term amplifies direction
    // error).  Retry without that term at progressively more centered -- but
    // still contracting -- targets, keeping the step with the best predicted
    // complementarity reduction alpha * (1 - sigma).  Pure centering
    // (sigma = 1) stays as the last resort: it is always productive but by
    // itself never reduces the gap.
    if (alpha < 1e-7) {
      double best_progress = alpha * (1.0 - sigma);
      for (const double sigma_c : {0.1, 0.5, 0.9, 1.0}) {
        const RVec center_target =
            minus_ll + sigma_c * mu * jordan_identity(sf);
        RVec dxc, dyc, dzc, dsc;
        if (!solve_dir(center_target, dxc, dyc, dzc, dsc)) continue;
        const double alpha_c = retreat_alpha(dsc, dzc);
        const double progress = alpha_c * (1.0 - sigma_c);
        if (progress > best_progress ||
            (progress == best_progress && alpha_c > alpha)) {
          dx.swap(dxc);
          dy.swap(dyc);
          dz.swap(dzc);
          ds.swap(dsc);
          alpha = alpha_c;
          best_progress = progress;
        }
      }
    }

    if (alpha <= 0.0 || (alpha < 1e-10 && alpha_prev < 1e-10)) {
      stall_msg = "step length collapsed (numerical stall)";
      return finish(SolveStatus::max_iter, x, y, z, iter + 1, stall_msg);
    }
    x += alpha * dx;
    y += alpha * dy;
    z += alpha * dz;
    s += alpha * ds;
    alpha_prev = alpha;
  }

  return finish(SolveStatus::max_iter, x, y, z, opts.max_iter, stall_msg);
}

}  // namespace opfr::socp

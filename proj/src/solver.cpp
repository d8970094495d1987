#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <limits>

#include <Eigen/Cholesky>

#include "coherdist/sdp.hpp"

namespace coherdist::sdp {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

constexpr double kStepFraction = 0.98;  // fraction-to-boundary
constexpr double kZeroRowTol = 1e-13;

// Expanded symmetric coefficient: entry at (p, q) with weight v; an
// off-diagonal stored triplet contributes both (r, c) and (c, r).
struct Entry {
  int p, q;
  double v;
};

struct DRow {
  std::vector<std::vector<Entry>> psd;       // per PSD block
  std::vector<std::pair<int, double>> lin;   // (global nonneg index, coeff)
  double b = 0.0;
  int orig = -1;
  double norm2 = 0.0;
};

struct BlockVec {
  std::vector<MatrixXd> P;
  VectorXd l;

  static BlockVec zero(const std::vector<int>& psd_sizes, int nlin) {
    BlockVec v;
    for (int n : psd_sizes) v.P.push_back(MatrixXd::Zero(n, n));
    v.l = VectorXd::Zero(nlin);
    return v;
  }
  static BlockVec identity_scaled(const std::vector<int>& psd_sizes, int nlin,
                                  double tau) {
    BlockVec v;
    for (int n : psd_sizes) v.P.push_back(tau * MatrixXd::Identity(n, n));
    v.l = VectorXd::Constant(nlin, tau);
    return v;
  }
  double dot(const BlockVec& o) const {
    double acc = l.size() ? l.dot(o.l) : 0.0;
    for (size_t b = 0; b < P.size(); ++b) acc += P[b].cwiseProduct(o.P[b]).sum();
    return acc;
  }
  void axpy(double a, const BlockVec& o) {
    for (size_t b = 0; b < P.size(); ++b) P[b] += a * o.P[b];
    l += a * o.l;
  }
  double norm() const { return std::sqrt(dot(*this)); }
};

struct DenseProgram {
  std::vector<int> psd_sizes;
  std::vector<int> psd_orig;  // original block index per PSD block
  std::vector<std::pair<int, int>> lin_map;  // global idx -> (orig block, idx)
  int nlin = 0;
  BlockVec obj;  // maximize <obj, X>
  std::vector<DRow> rows;
  int orig_constraints = 0;
};

double inner_row(const DRow& a, const BlockVec& x) {
  double acc = 0.0;
  for (size_t b = 0; b < a.psd.size(); ++b) {
    for (const Entry& e : a.psd[b]) acc += e.v * x.P[b](e.p, e.q);
  }
  for (const auto& [i, v] : a.lin) acc += v * x.l[i];
  return acc;
}

void add_row(BlockVec& acc, const DRow& a, double w) {
  for (size_t b = 0; b < a.psd.size(); ++b) {
    for (const Entry& e : a.psd[b]) acc.P[b](e.p, e.q) += w * e.v;
  }
  for (const auto& [i, v] : a.lin) acc.l[i] += w * v;
}

// tr(A W B W) for symmetric sparse A, B via the expanded entries:
// tr(E_pq W E_ut W) = W(q, u) W(t, p).
double schur_entry(const DRow& a, const DRow& b, const std::vector<MatrixXd>& w,
                   const VectorXd& wlin2) {
  double acc = 0.0;
  for (size_t blk = 0; blk < a.psd.size(); ++blk) {
    const auto& ea = a.psd[blk];
    const auto& eb = b.psd[blk];
    if (ea.empty() || eb.empty()) continue;
    const MatrixXd& wm = w[blk];
    for (const Entry& x : ea) {
      for (const Entry& y : eb) {
        acc += x.v * y.v * wm(x.q, y.p) * wm(y.q, x.p);
      }
    }
  }
  // Merge the sorted linear coefficient lists.
  size_t i = 0, j = 0;
  while (i < a.lin.size() && j < b.lin.size()) {
    if (a.lin[i].first < b.lin[j].first) {
      ++i;
    } else if (a.lin[i].first > b.lin[j].first) {
      ++j;
    } else {
      acc += a.lin[i].second * b.lin[j].second * wlin2[a.lin[i].first];
      ++i;
      ++j;
    }
  }
  return acc;
}

DenseProgram lower_real(const ConicProgram& p, std::string* error) {
  DenseProgram d;
  std::vector<int> psd_index(p.blocks().size(), -1);
  std::vector<int> lin_offset(p.blocks().size(), -1);
  for (size_t b = 0; b < p.blocks().size(); ++b) {
    const Block& blk = p.blocks()[b];
    if (blk.kind == BlockKind::PSD) {
      psd_index[b] = static_cast<int>(d.psd_sizes.size());
      d.psd_sizes.push_back(blk.size);
      d.psd_orig.push_back(static_cast<int>(b));
    } else {
      lin_offset[b] = d.nlin;
      for (int i = 0; i < blk.size; ++i) {
        d.lin_map.push_back({static_cast<int>(b), i});
      }
      d.nlin += blk.size;
    }
  }
  d.orig_constraints = p.num_constraints();
  d.obj = BlockVec::zero(d.psd_sizes, d.nlin);
  for (const auto& [key, v] : p.objective().psd) {
    const auto [blk, r, c] = key;
    const int pb = psd_index[blk];
    d.obj.P[pb](r, c) += v.real();
    if (r != c) d.obj.P[pb](c, r) += v.real();
  }
  for (const auto& [key, v] : p.objective().lin) {
    d.obj.l[lin_offset[key.first] + key.second] += v;
  }

  for (int ci = 0; ci < p.num_constraints(); ++ci) {
    const auto& row = p.rows()[ci];
    DRow dr;
    dr.psd.resize(d.psd_sizes.size());
    dr.b = p.rhs()[ci];
    dr.orig = ci;
    for (const auto& [key, v] : row.psd) {
      const auto [blk, r, c] = key;
      const int pb = psd_index[blk];
      dr.psd[pb].push_back({r, c, v.real()});
      if (r != c) {
        dr.psd[pb].push_back({c, r, v.real()});
        dr.norm2 += 2.0 * v.real() * v.real();
      } else {
        dr.norm2 += v.real() * v.real();
      }
    }
    for (const auto& [key, v] : row.lin) {
      dr.lin.push_back({lin_offset[key.first] + key.second, v});
      dr.norm2 += v * v;
    }
    std::sort(dr.lin.begin(), dr.lin.end());
    // Presolve: drop numerically zero rows; a zero row with nonzero rhs is
    // an inconsistency.
    if (std::sqrt(dr.norm2) < kZeroRowTol) {
      if (std::abs(dr.b) > 1e-10) {
        *error = "presolve: zero constraint row " + std::to_string(ci) +
                 " with nonzero rhs " + std::to_string(dr.b);
      }
      continue;
    }
    d.rows.push_back(std::move(dr));
  }
  return d;
}

struct Scaling {
  std::vector<MatrixXd> w;       // NT scaling matrix per PSD block, W S W = X
  std::vector<MatrixXd> w_half;  // W^{1/2}
  std::vector<MatrixXd> w_half_inv;
  std::vector<MatrixXd> sinv;    // S^{-1} per PSD block
  VectorXd wlin2;                // x / s per nonneg entry
  VectorXd slin_inv;
  bool ok = true;
};

Scaling compute_scaling(const BlockVec& x, const BlockVec& s) {
  Scaling sc;
  for (size_t b = 0; b < x.P.size(); ++b) {
    Eigen::LLT<MatrixXd> lx(x.P[b]);
    Eigen::LLT<MatrixXd> ls(s.P[b]);
    if (lx.info() != Eigen::Success || ls.info() != Eigen::Success) {
      sc.ok = false;
      return sc;
    }
    const MatrixXd l = lx.matrixL();
    const MatrixXd m = l.transpose() * s.P[b] * l;
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(m);
    if (es.info() != Eigen::Success || es.eigenvalues().minCoeff() <= 0.0) {
      sc.ok = false;
      return sc;
    }
    const VectorXd dinv_sqrt = es.eigenvalues().cwiseSqrt().cwiseInverse();
    const MatrixXd minv_half =
        es.eigenvectors() * dinv_sqrt.asDiagonal() * es.eigenvectors().transpose();
    MatrixXd w = l * minv_half * l.transpose();
    w = 0.5 * (w + w.transpose()).eval();
    sc.w.push_back(w);
    Eigen::SelfAdjointEigenSolver<MatrixXd> ew(w);
    if (ew.info() != Eigen::Success || ew.eigenvalues().minCoeff() <= 0.0) {
      sc.ok = false;
      return sc;
    }
    const VectorXd wsqrt = ew.eigenvalues().cwiseSqrt();
    sc.w_half.push_back(ew.eigenvectors() * wsqrt.asDiagonal() *
                        ew.eigenvectors().transpose());
    sc.w_half_inv.push_back(ew.eigenvectors() * wsqrt.cwiseInverse().asDiagonal() *
                            ew.eigenvectors().transpose());
    const int n = static_cast<int>(x.P[b].rows());
    MatrixXd si = ls.solve(MatrixXd::Identity(n, n));
    sc.sinv.push_back(0.5 * (si + si.transpose()));
  }
  sc.wlin2 = x.l.cwiseQuotient(s.l);
  sc.slin_inv = s.l.cwiseInverse();
  return sc;
}

// Largest alpha with X + alpha * dX staying PSD, per block via
// eigenvalues of L^{-1} dX L^{-T}; nonneg entries handled directly.
double max_step(const BlockVec& x, const BlockVec& dx) {
  double alpha = std::numeric_limits<double>::infinity();
  for (size_t b = 0; b < x.P.size(); ++b) {
    Eigen::LLT<MatrixXd> lx(x.P[b]);
    if (lx.info() != Eigen::Success) return 0.0;
    const MatrixXd l = lx.matrixL();
    MatrixXd t = l.triangularView<Eigen::Lower>().solve(dx.P[b]);
    t = l.triangularView<Eigen::Lower>().solve(t.transpose()).transpose();
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(0.5 * (t + t.transpose()),
                                               Eigen::EigenvaluesOnly);
    const double lmin = es.eigenvalues().minCoeff();
    if (lmin < 0.0) alpha = std::min(alpha, -1.0 / lmin);
  }
  for (int i = 0; i < x.l.size(); ++i) {
    if (dx.l[i] < 0.0) alpha = std::min(alpha, -x.l[i] / dx.l[i]);
  }
  return alpha;
}

struct Workspace {
  const DenseProgram& d;
  BlockVec X, S;
  VectorXd y;
  int ncons;
  double nu;  // total cone dimension

  explicit Workspace(const DenseProgram& dp, double tau)
      : d(dp),
        X(BlockVec::identity_scaled(dp.psd_sizes, dp.nlin, tau)),
        S(BlockVec::identity_scaled(dp.psd_sizes, dp.nlin, tau)),
        y(VectorXd::Zero(static_cast<int>(dp.rows.size()))),
        ncons(static_cast<int>(dp.rows.size())) {
    nu = dp.nlin;
    for (int n : dp.psd_sizes) nu += n;
  }
};

// Jacobi-equilibrated factorization of the Schur complement. The diagonal
// of M spans many orders of magnitude near the boundary; scaling to unit
// diagonal before the LDLT keeps the condition number manageable and makes
// the static regularization uniform across rows instead of proportional to
// the largest one.
struct SchurFactor {
  Eigen::LDLT<MatrixXd> ldlt;
  VectorXd dis;  // D^{-1/2}
  bool ok = false;

  void factorize(const MatrixXd& m) {
    dis = m.diagonal().cwiseMax(1e-300).cwiseSqrt().cwiseInverse();
    MatrixXd ms = dis.asDiagonal() * m * dis.asDiagonal();
    ms.diagonal().array() += 1e-12;
    ldlt.compute(ms);
    ok = ldlt.info() == Eigen::Success;
  }
  VectorXd solve(const VectorXd& rhs) const {
    return dis.asDiagonal() *
           ldlt.solve((dis.asDiagonal() * rhs).eval()).eval();
  }
};

// Directions for the internal minimization form (C = -obj):
//   A(dX) = rp,  A*(dy) + dS = Rd,  dX + W dS W = Rc.
void solve_directions(const Workspace& ws, const Scaling& sc,
                      const SchurFactor& fac, const MatrixXd& m,
                      const VectorXd& rp, const BlockVec& rd, const BlockVec& rc,
                      VectorXd& dy, BlockVec& dx, BlockVec& ds) {
  const DenseProgram& d = ws.d;
  // H = W Rd W - Rc; rhs_a = rp_a + <A_a, H>.
  BlockVec h = BlockVec::zero(d.psd_sizes, d.nlin);
  for (size_t b = 0; b < h.P.size(); ++b) {
    h.P[b] = sc.w[b] * rd.P[b] * sc.w[b] - rc.P[b];
  }
  h.l = sc.wlin2.cwiseProduct(rd.l) - rc.l;
  VectorXd rhs(ws.ncons);
  for (int i = 0; i < ws.ncons; ++i) {
    rhs[i] = rp[i] + inner_row(d.rows[i], h);
  }
  dy = fac.solve(rhs);
  // Iterative refinement against the unregularized Schur matrix: removes
  // the bias of the static regularization and recovers accuracy as the
  // system turns ill-conditioned near the boundary. Residuals are formed
  // in extended precision so refinement keeps paying off at condition
  // numbers where a double-precision residual is pure roundoff.
  using LongVec = Eigen::Matrix<long double, Eigen::Dynamic, 1>;
  using LongMat = Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic>;
  const LongMat ml = m.cast<long double>();
  const LongVec rhsl = rhs.cast<long double>();
  auto residual = [&](const VectorXd& v) -> VectorXd {
    return (rhsl - ml * v.cast<long double>()).cast<double>();
  };
  VectorXd resid = residual(dy);
  double best_res = resid.norm();
  VectorXd best_dy = dy;
  for (int pass = 0; pass < 12; ++pass) {
    dy += fac.solve(resid);
    resid = residual(dy);
    const double res = resid.norm();
    if (res < best_res) {
      best_res = res;
      best_dy = dy;
    } else {
      break;
    }
  }
  dy = best_dy;
  // dS = Rd - A*(dy); dX = Rc - W dS W.
  ds = rd;
  for (int i = 0; i < ws.ncons; ++i) add_row(ds, d.rows[i], -dy[i]);
  dx = rc;
  for (size_t b = 0; b < dx.P.size(); ++b) {
    MatrixXd t = sc.w[b] * ds.P[b] * sc.w[b];
    dx.P[b] -= 0.5 * (t + t.transpose());
  }
  dx.l -= sc.wlin2.cwiseProduct(ds.l);
}

ConicSolution extract_solution(const ConicProgram& p, const DenseProgram& d,
                               const Workspace& ws, SolveStatus status,
                               int iterations, const std::string& message) {
  ConicSolution sol;
  sol.status = status;
  sol.iterations = iterations;
  sol.message = message;
  sol.X.resize(p.blocks().size());
  sol.x_lin.resize(p.blocks().size());
  for (size_t b = 0; b < d.psd_sizes.size(); ++b) {
    sol.X[d.psd_orig[b]] = ws.X.P[b].cast<Complex>();
  }
  for (int i = 0; i < d.nlin; ++i) {
    auto [blk, idx] = d.lin_map[i];
    if (sol.x_lin[blk].size() == 0) {
      sol.x_lin[blk] = RealVector::Zero(p.blocks()[blk].size);
    }
    sol.x_lin[blk][idx] = ws.X.l[i];
  }
  // Dropped presolve rows keep multiplier zero. Internal y corresponds to
  // the minimization form; the reported multiplier flips the sign so that
  // A*(y) - obj is the PSD dual slack and b^T y the dual bound.
  sol.y = RealVector::Zero(d.orig_constraints);
  for (int i = 0; i < ws.ncons; ++i) sol.y[d.rows[i].orig] = -ws.y[i];
  sol.primal_value = ws.X.dot(d.obj);
  double dv = 0.0;
  for (int i = 0; i < ws.ncons; ++i) dv += ws.y[i] * d.rows[i].b;
  sol.dual_value = -dv;
  sol.gap = std::abs(sol.primal_value - sol.dual_value) /
            (1.0 + std::abs(sol.primal_value) + std::abs(sol.dual_value));
  return sol;
}

ConicSolution solve_real(const ConicProgram& p, const SolveOptions& opts) {
  std::string presolve_error;
  DenseProgram d = lower_real(p, &presolve_error);
  if (!presolve_error.empty()) {
    ConicSolution sol;
    sol.status = SolveStatus::NumericalFailure;
    sol.message = presolve_error;
    return sol;
  }
  if (d.rows.empty()) {
    ConicSolution sol;
    sol.status = SolveStatus::NumericalFailure;
    sol.message = "program has no constraints after presolve";
    return sol;
  }

  double bmax = 0.0;
  for (const DRow& r : d.rows) bmax = std::max(bmax, std::abs(r.b));
  Workspace ws(d, 1.0 + bmax);

  // Internal minimization objective.
  BlockVec c = d.obj;
  for (auto& m : c.P) m = -m;
  c.l = -c.l;
  const double cnorm = 1.0 + c.norm();
  double bnorm = 0.0;
  for (const DRow& r : d.rows) bnorm += r.b * r.b;
  bnorm = 1.0 + std::sqrt(bnorm);

  const bool trace = std::getenv("COHERDIST_SDP_TRACE") != nullptr;
  if (trace) {
    std::fprintf(stderr, "sdp: ncons=%zu nlin=%d psd_sizes=[", d.rows.size(),
                 d.nlin);
    for (size_t b = 0; b < d.psd_sizes.size(); ++b) {
      std::fprintf(stderr, "%s%d", b ? "," : "", d.psd_sizes[b]);
    }
    std::fprintf(stderr, "]\n");
  }

  // Rows with many coefficient entries (facially reduced programs produce
  // fully dense rows) are handled by a dense path in the Schur assembly:
  // their coefficient matrices are vectorized into the rows of rmat so the
  // dense-dense part of the Schur complement becomes one matrix product
  // rmat * tmat^T, with tmat holding the vectorized W A_b W per iteration.
  std::vector<int> blk_off(d.psd_sizes.size() + 1, 0);
  for (size_t blk = 0; blk < d.psd_sizes.size(); ++blk) {
    blk_off[blk + 1] = blk_off[blk] + d.psd_sizes[blk] * d.psd_sizes[blk];
  }
  const int vec_len = blk_off.back();
  std::vector<int> dense_idx(d.rows.size(), -1);
  std::vector<int> dense_rows;
  for (size_t b = 0; b < d.rows.size(); ++b) {
    size_t nnz = 0;
    for (const auto& es : d.rows[b].psd) nnz += es.size();
    if (nnz > 32) {
      dense_idx[b] = static_cast<int>(dense_rows.size());
      dense_rows.push_back(static_cast<int>(b));
    }
  }
  const int ndense = static_cast<int>(dense_rows.size());
  using RowMajorMat =
      Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  RowMajorMat rmat(ndense, vec_len);
  if (ndense > 0) {
    rmat.setZero();
    for (int i = 0; i < ndense; ++i) {
      const DRow& r = d.rows[dense_rows[i]];
      for (size_t blk = 0; blk < d.psd_sizes.size(); ++blk) {
        const int n = d.psd_sizes[blk];
        for (const Entry& e : r.psd[blk]) {
          rmat(i, blk_off[blk] + e.q * n + e.p) += e.v;
        }
      }
    }
  }
  RowMajorMat tmat(ndense, vec_len);

  // Best-iterate bookkeeping: near the optimum the Schur system can turn
  // ill-conditioned enough that a late step degrades feasibility again, so
  // failure paths report the best iterate seen rather than the last one.
  BlockVec best_x = ws.X;
  BlockVec best_s = ws.S;
  VectorXd best_y = ws.y;
  double best_err = std::numeric_limits<double>::infinity();
  auto restore_best = [&]() {
    if (std::isfinite(best_err)) {
      ws.X = best_x;
      ws.S = best_s;
      ws.y = best_y;
    }
  };
  // Degenerate instances can hit the double-precision floor slightly above
  // the target tolerances. When no further progress is possible, accept the
  // best iterate if it is within a factor 10 of every tolerance; the
  // independent certificate check still validates the returned iterate.
  auto finish = [&](int it, SolveStatus status,
                    const std::string& msg) -> ConicSolution {
    restore_best();
    if (best_err <= 10.0) {
      return extract_solution(p, d, ws, SolveStatus::Optimal, it,
                              "stopped at numerical precision limit");
    }
    return extract_solution(p, d, ws, status, it, msg);
  };
  int iter = 0;
  for (; iter < opts.max_iter; ++iter) {
    // Residuals.
    VectorXd rp(ws.ncons);
    for (int i = 0; i < ws.ncons; ++i) {
      rp[i] = d.rows[i].b - inner_row(d.rows[i], ws.X);
    }
    BlockVec rd = c;  // Rd = C - S - A*(y)
    rd.axpy(-1.0, ws.S);
    for (int i = 0; i < ws.ncons; ++i) add_row(rd, d.rows[i], -ws.y[i]);

    const double pobj = ws.X.dot(c);
    double dobj = 0.0;
    for (int i = 0; i < ws.ncons; ++i) dobj += ws.y[i] * d.rows[i].b;
    const double relgap =
        std::abs(pobj - dobj) / (1.0 + std::abs(pobj) + std::abs(dobj));
    const double pres = rp.norm() / bnorm;
    const double dres = rd.norm() / cnorm;
    if (relgap <= opts.gap_tol && pres <= opts.feas_tol && dres <= opts.feas_tol) {
      return extract_solution(p, d, ws, SolveStatus::Optimal, iter, "");
    }
    const double err = std::max({relgap / opts.gap_tol, pres / opts.feas_tol,
                                 dres / opts.feas_tol});
    if (err < best_err) {
      best_err = err;
      best_x = ws.X;
      best_s = ws.S;
      best_y = ws.y;
    } else if (err > 1e3 * best_err && best_err < 10.0) {
      // The iterate sequence has collapsed numerically well past the best
      // point; further steps only amplify roundoff.
      return finish(iter, SolveStatus::NumericalFailure,
                    "numerical stall near the optimum");
    }

    const double mu = ws.X.dot(ws.S) / ws.nu;
    Scaling sc = compute_scaling(ws.X, ws.S);
    if (!sc.ok) {
      return finish(iter, SolveStatus::NumericalFailure,
                    "iterate left the cone interior");
    }

    // Schur complement M_ab = <A_a, W A_b W>, with a small static
    // regularization to absorb linearly dependent rows. Columns whose
    // coefficient matrices carry many entries are handled by forming
    // W A_b W densely once and taking sparse inner products, which keeps
    // the assembly cost linear in the entry count per pair.
    MatrixXd m(ws.ncons, ws.ncons);
    // Nonneg part, merged over the sorted coefficient lists.
    auto lin_dot = [&](int a, int b) {
      double acc = 0.0;
      size_t i = 0, j = 0;
      const auto& la = d.rows[a].lin;
      const auto& lb = d.rows[b].lin;
      while (i < la.size() && j < lb.size()) {
        if (la[i].first < lb[j].first) {
          ++i;
        } else if (la[i].first > lb[j].first) {
          ++j;
        } else {
          acc += la[i].second * lb[j].second * sc.wlin2[la[i].first];
          ++i;
          ++j;
        }
      }
      return acc;
    };
    if (ndense > 0) {
      for (int i = 0; i < ndense; ++i) {
        for (size_t blk = 0; blk < d.psd_sizes.size(); ++blk) {
          const int n = d.psd_sizes[blk];
          Eigen::Map<const MatrixXd> a_blk(rmat.row(i).segment(blk_off[blk], n * n).data(),
                                           n, n);
          Eigen::Map<MatrixXd> t_blk(tmat.row(i).segment(blk_off[blk], n * n).data(), n,
                                     n);
          if (d.rows[dense_rows[i]].psd[blk].empty()) {
            t_blk.setZero();
          } else {
            t_blk = sc.w[blk] * a_blk * sc.w[blk];
          }
        }
      }
      const MatrixXd mdd_raw = rmat * tmat.transpose();
      const MatrixXd mdd = 0.5 * (mdd_raw + mdd_raw.transpose());
      for (int i = 0; i < ndense; ++i) {
        const int a = dense_rows[i];
        for (int j = i; j < ndense; ++j) {
          const int b = dense_rows[j];
          const double acc = mdd(i, j) + lin_dot(a, b);
          m(a, b) = acc;
          m(b, a) = acc;
        }
      }
      // Sparse rows against the precomputed W A_b W of each dense column.
      for (int a = 0; a < ws.ncons; ++a) {
        if (dense_idx[a] >= 0) continue;
        for (int j = 0; j < ndense; ++j) {
          const int b = dense_rows[j];
          double acc = lin_dot(a, b);
          for (size_t blk = 0; blk < d.psd_sizes.size(); ++blk) {
            const int n = d.psd_sizes[blk];
            for (const Entry& e : d.rows[a].psd[blk]) {
              acc += e.v * tmat(j, blk_off[blk] + e.q * n + e.p);
            }
          }
          m(a, b) = acc;
          m(b, a) = acc;
        }
      }
    }
    for (int a = 0; a < ws.ncons; ++a) {
      if (dense_idx[a] >= 0) continue;
      for (int b = a; b < ws.ncons; ++b) {
        if (dense_idx[b] >= 0) continue;
        m(a, b) = schur_entry(d.rows[a], d.rows[b], sc.w, sc.wlin2);
        m(b, a) = m(a, b);
      }
    }
    SchurFactor fac;
    fac.factorize(m);
    if (!fac.ok) {
      return extract_solution(p, d, ws, SolveStatus::NumericalFailure, iter,
                              "Schur complement factorization failed");
    }

    // Predictor (affine scaling direction).
    BlockVec rc_aff = ws.X;
    for (auto& blk : rc_aff.P) blk = -blk;
    rc_aff.l = -rc_aff.l;
    VectorXd dy_a;
    BlockVec dx_a, ds_a;
    solve_directions(ws, sc, fac, m, rp, rd, rc_aff, dy_a, dx_a, ds_a);
    // A common step length for both sides keeps the iterate central.
    const double a_aff =
        std::min({1.0, kStepFraction * max_step(ws.X, dx_a),
                  kStepFraction * max_step(ws.S, ds_a)});
    BlockVec xa = ws.X;
    xa.axpy(a_aff, dx_a);
    BlockVec sa = ws.S;
    sa.axpy(a_aff, ds_a);
    const double mu_aff = xa.dot(sa) / ws.nu;
    double sigma = std::pow(std::max(mu_aff, 0.0) / mu, 3.0);
    sigma = std::clamp(sigma, 1e-10, 1.0);

    // Corrector. The Mehrotra second-order term is formed in the scaled
    // space: with L = W^{1/2} S W^{1/2}, solve the Jordan system
    // L o Z = (W^{-1/2} dX W^{-1/2}) o (W^{1/2} dS W^{1/2}) in L's
    // eigenbasis and map Z back through W^{1/2}.
    BlockVec rc = BlockVec::zero(d.psd_sizes, d.nlin);
    for (size_t b = 0; b < rc.P.size(); ++b) {
      const MatrixXd& wh = sc.w_half[b];
      const MatrixXd& whi = sc.w_half_inv[b];
      MatrixXd lam = wh * ws.S.P[b] * wh;
      lam = 0.5 * (lam + lam.transpose()).eval();
      const MatrixXd dxs = whi * dx_a.P[b] * whi;
      const MatrixXd dss = wh * ds_a.P[b] * wh;
      MatrixXd t = 0.5 * (dxs * dss + dss * dxs.transpose());
      t = 0.5 * (t + t.transpose()).eval();
      Eigen::SelfAdjointEigenSolver<MatrixXd> el(lam);
      const VectorXd& ev = el.eigenvalues();
      MatrixXd tp = el.eigenvectors().transpose() * t * el.eigenvectors();
      for (int r = 0; r < tp.rows(); ++r) {
        for (int c2 = 0; c2 < tp.cols(); ++c2) {
          tp(r, c2) *= 2.0 / (ev[r] + ev[c2]);
        }
      }
      const MatrixXd z = el.eigenvectors() * tp * el.eigenvectors().transpose();
      const MatrixXd second = wh * z * wh;
      rc.P[b] = sigma * mu * sc.sinv[b] - ws.X.P[b] -
                0.5 * (second + second.transpose());
    }
    rc.l = sigma * mu * sc.slin_inv - ws.X.l -
           dx_a.l.cwiseProduct(ds_a.l).cwiseProduct(sc.slin_inv);
    VectorXd dy;
    BlockVec dx, ds;
    solve_directions(ws, sc, fac, m, rp, rd, rc, dy, dx, ds);

    const double alpha = std::min({1.0, kStepFraction * max_step(ws.X, dx),
                                   kStepFraction * max_step(ws.S, ds)});
    const double ap = alpha, ad = alpha;
    if (trace) {
      VectorXd adx(ws.ncons);
      for (int i = 0; i < ws.ncons; ++i) adx[i] = inner_row(d.rows[i], dx);
      const double dir_res = (adx - rp).norm();
      std::fprintf(stderr,
                   "it %3d mu %.3e gap %.3e pres %.3e dres %.3e sig %.2e "
                   "aaff %.2e a %.2e |dy| %.2e Adx-rp %.2e Mdiag %.2e\n",
                   iter, mu, relgap, pres, dres, sigma, a_aff, ap, dy.norm(),
                   dir_res, m.diagonal().maxCoeff());
    }
    if (ap < 1e-10 && ad < 1e-10) {
      return finish(iter, SolveStatus::NumericalFailure, "step length collapsed");
    }
    ws.X.axpy(ap, dx);
    ws.S.axpy(ad, ds);
    ws.y += ad * dy;
  }
  return finish(iter, SolveStatus::MaxIterations, "iteration limit reached");
}

}  // namespace

ConicSolution solve(const ConicProgram& p, const SolveOptions& opts) {
  if (const char* dump = std::getenv("COHERDIST_SDP_DUMP")) {
    if (std::FILE* f = std::fopen(dump, "w")) {
      const std::string j = p.dump_json();
      std::fwrite(j.data(), 1, j.size(), f);
      std::fclose(f);
    }
  }
  if (p.is_real()) {
    return solve_real(p, opts);
  }
  const ConicProgram q = embed_hermitian(p);
  ConicSolution es = solve_real(q, opts);
  // Recover the complex iterates from the doubled real blocks.
  ConicSolution sol = es;
  sol.X.assign(p.blocks().size(), Matrix());
  sol.x_lin.assign(p.blocks().size(), RealVector());
  for (size_t b = 0; b < p.blocks().size(); ++b) {
    if (p.blocks()[b].kind == BlockKind::PSD) {
      const int n = p.blocks()[b].size;
      const Matrix& e = es.X[b];
      Matrix x(n, n);
      for (int r = 0; r < n; ++r) {
        for (int cidx = 0; cidx < n; ++cidx) {
          const double re = 0.5 * (e(r, cidx).real() + e(n + r, n + cidx).real());
          const double im = 0.5 * (e(n + r, cidx).real() - e(r, n + cidx).real());
          x(r, cidx) = Complex(re, im);
        }
      }
      sol.X[b] = 0.5 * (x + x.adjoint().eval());
    } else {
      sol.x_lin[b] = es.x_lin[b];
    }
  }
  return sol;
}

}  // namespace coherdist::sdp

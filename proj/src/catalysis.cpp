#include "coherdist/catalysis.hpp"

#include <chrono>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace coherdist::catalysis {

namespace {

using distill::FreeClass;
using sdp::ConicProgram;
using sdp::ConicSolution;
using sdp::SolveStatus;

constexpr int kMaxChoiSide = 4096;
constexpr double kZeroTol = 1e-12;

// Adds the contribution Re(w * X_rc) to a constraint row.
void add_cw(ConicProgram& p, int cons, int blk, int r, int c, Complex w) {
  if (std::abs(w) == 0.0) return;
  if (r == c) {
    if (w.real() != 0.0) p.cons_entry(cons, blk, r, c, w.real());
  } else {
    p.cons_entry(cons, blk, r, c, 0.5 * std::conj(w));
  }
}

class Timer {
 public:
  Timer() : start_(std::chrono::steady_clock::now()) {}
  double ms() const {
    return std::chrono::duration<double, std::milli>(
               std::chrono::steady_clock::now() - start_)
        .count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

// Orthonormal basis of the eigenspace of h with eigenvalues below tol.
Matrix kernel_basis(const Matrix& h, double tol = 1e-9) {
  const EighResult es = eigh(HermitianOperator(h));
  int k = 0;
  while (k < h.rows() && es.eigenvalues[k] < tol) ++k;
  return es.eigenvectors.leftCols(k);
}

// Orthonormal basis of the support (eigenvalues >= tol).
Matrix support_basis(const Matrix& h, double tol = 1e-9) {
  const EighResult es = eigh(HermitianOperator(h));
  int k = 0;
  while (k < h.rows() && es.eigenvalues[k] < tol) ++k;
  return es.eigenvectors.rightCols(h.rows() - k);
}

// Orthonormal basis of the orthogonal complement of span{u x w : u in
// cols(s), w in cols(k)} inside the d1*d2-dimensional product space.
Matrix product_complement(const Matrix& s, const Matrix& k, int d1, int d2) {
  const Matrix proj = tensor(HermitianOperator(Matrix(s * s.adjoint())),
                             HermitianOperator(Matrix(k * k.adjoint())))
                          .mat();
  const EighResult es = eigh(HermitianOperator(
      Matrix::Identity(d1 * d2, d1 * d2) - proj));
  int z = 0;
  while (z < d1 * d2 && es.eigenvalues[z] < 0.5) ++z;
  return es.eigenvectors.rightCols(d1 * d2 - z);
}

// Flag-block output operators of the assisted channel:
//   t0 = |0><0| x Psi_m^eps x sigma_c,  t1 = |1><1| x (1/m) x sigma_c.
struct OutputTargets {
  Matrix t0, t1;
};

OutputTargets flag_targets(int m, double eps, const Matrix& sigma_c) {
  const int k = static_cast<int>(sigma_c.rows());
  const int dout = 2 * m * k;
  Matrix f0 = Matrix::Zero(2, 2), f1 = Matrix::Zero(2, 2);
  f0(0, 0) = 1.0;
  f1(1, 1) = 1.0;
  const Matrix succ = smoothed_target(m, eps).mat();
  const Matrix fail = Matrix::Identity(m, m) / double(m);
  (void)dout;
  const auto kron3 = [](const Matrix& a, const Matrix& b, const Matrix& c) {
    return tensor(HermitianOperator(a),
                  tensor(HermitianOperator(b), HermitianOperator(c)))
        .mat();
  };
  OutputTargets t;
  t.t0 = kron3(f0, succ, sigma_c);
  t.t1 = kron3(f1, fail, sigma_c);
  return t;
}

// Trace-preservation rows tr_B J = 1_A for the full channel.
void add_tp_rows(ConicProgram& prog, int bj, int din, int dout) {
  const auto idx = [dout](int i, int a) { return i * dout + a; };
  for (int a1 = 0; a1 < din; ++a1) {
    for (int a2 = a1; a2 < din; ++a2) {
      int row = prog.new_constraint(a1 == a2 ? 1.0 : 0.0);
      for (int b = 0; b < dout; ++b) {
        add_cw(prog, row, bj, idx(a1, b), idx(a2, b), 1.0);
      }
      if (a1 != a2) {
        row = prog.new_constraint(0.0);
        for (int b = 0; b < dout; ++b) {
          add_cw(prog, row, bj, idx(a1, b), idx(a2, b), Complex(0.0, -1.0));
        }
      }
    }
  }
}

// Incoherent-preservation rows (MIO and DIO) and dephasing-covariance rows
// (DIO only), as for the unassisted Choi program.
void add_membership_rows(ConicProgram& prog, int bj, int din, int dout,
                         FreeClass cls) {
  const auto idx = [dout](int i, int a) { return i * dout + a; };
  for (int i = 0; i < din; ++i) {
    for (int a = 0; a < dout; ++a) {
      for (int b = a + 1; b < dout; ++b) {
        int row = prog.new_constraint(0.0);
        add_cw(prog, row, bj, idx(i, a), idx(i, b), 1.0);
        row = prog.new_constraint(0.0);
        add_cw(prog, row, bj, idx(i, a), idx(i, b), Complex(0.0, -1.0));
      }
    }
  }
  if (cls == FreeClass::DIO) {
    for (int i = 0; i < din; ++i) {
      for (int j = i + 1; j < din; ++j) {
        for (int a = 0; a < dout; ++a) {
          int row = prog.new_constraint(0.0);
          add_cw(prog, row, bj, idx(i, a), idx(j, a), 1.0);
          row = prog.new_constraint(0.0);
          add_cw(prog, row, bj, idx(i, a), idx(j, a), Complex(0.0, -1.0));
        }
      }
    }
  }
}

double unassisted_probability(const CatalysisInstance& inst, FreeClass cls,
                              const sdp::SolveOptions& opts, double* gap) {
  const DistillationInstance base{inst.rho, inst.m, inst.eps};
  const distill::DistillationResult r =
      cls == FreeClass::DIO ? distill::p_dio(base, opts)
                            : distill::p_mio(base, opts);
  if (gap) *gap = r.gap;
  return r.probability;
}

void check_choi_budget(int din, int dout) {
  if (din * dout > kMaxChoiSide) {
    throw std::length_error(
        "catalysis: Choi matrix side " + std::to_string(din * dout) +
        " exceeds the supported budget of " + std::to_string(kMaxChoiSide));
  }
}

CatalysisResult finish_result(FreeClass cls, double assisted, double unassisted,
                              double gap, const Timer& timer,
                              std::shared_ptr<const Matrix> choi) {
  CatalysisResult res;
  res.cls = cls;
  res.probability = std::min(std::max(assisted, 0.0), 1.0);
  res.unassisted = unassisted;
  res.enhancement_ratio =
      unassisted > kZeroTol ? (res.probability - unassisted) / unassisted : 0.0;
  res.gap = gap;
  res.choi = std::move(choi);
  res.wall_time_ms = timer.ms();
  return res;
}

}  // namespace

CatalysisInstance::CatalysisInstance(HermitianOperator rho_in,
                                     PureState catalyst_in, int m_in,
                                     double eps_in, double delta_in)
    : rho(std::move(rho_in)),
      catalyst(std::move(catalyst_in)),
      m(m_in),
      eps(eps_in),
      delta(delta_in) {
  if (m < 2) throw std::invalid_argument("CatalysisInstance: m must be >= 2");
  if (eps < 0.0 || eps >= 1.0) {
    throw std::invalid_argument("CatalysisInstance: eps must be in [0, 1)");
  }
  if (delta < 0.0 || delta >= 1.0) {
    throw std::invalid_argument("CatalysisInstance: delta must be in [0, 1)");
  }
}

CatalysisResult p_dio_catalytic_mc(const CatalysisInstance& inst, FreeClass cls,
                                   const sdp::SolveOptions& opts) {
  Timer timer;
  const int d = inst.rho.dim();
  const int k = inst.catalyst.dim();
  const int m = inst.m;
  {
    const Matrix diff =
        inst.catalyst.density().mat() - max_coherent(k).density().mat();
    if (diff.cwiseAbs().maxCoeff() > 1e-9) {
      throw std::invalid_argument(
          "p_dio_catalytic_mc: catalyst must be maximally coherent");
    }
  }
  const int din = d * k;
  const int dout = 2 * m * k;
  check_choi_budget(din, dout);

  double base_gap = 0.0;
  const double unassisted = unassisted_probability(inst, cls, opts, &base_gap);
  if (inst.eps >= 1.0 - 1.0 / m) {
    return finish_result(cls, 1.0, unassisted, 0.0, timer, nullptr);
  }

  const Matrix rho_in =
      tensor(inst.rho, max_coherent(k).density()).mat();
  const Matrix sigma_c = smoothed_target(k, inst.delta).mat();
  const OutputTargets t = flag_targets(m, inst.eps, sigma_c);
  const Matrix diff_t = t.t0 - t.t1;

  auto prog = std::make_shared<ConicProgram>();
  const int bj = prog->add_psd_block(din * dout);
  const int bp = prog->add_nonneg_block(1);
  const auto idx = [dout](int i, int a) { return i * dout + a; };

  add_tp_rows(*prog, bj, din, dout);
  // Action rows: sum_ij rho'_ij J[(i,b1),(j,b2)] - p (t0 - t1)_{b1 b2}
  //            = t1_{b1 b2}.
  for (int b1 = 0; b1 < dout; ++b1) {
    for (int b2 = b1; b2 < dout; ++b2) {
      int row = prog->new_constraint(t.t1(b1, b2).real());
      for (int i = 0; i < din; ++i) {
        for (int j = 0; j < din; ++j) {
          add_cw(*prog, row, bj, idx(i, b1), idx(j, b2), rho_in(i, j));
        }
      }
      prog->cons_lin(row, bp, 0, -diff_t(b1, b2).real());
      if (b1 != b2) {
        row = prog->new_constraint(t.t1(b1, b2).imag());
        for (int i = 0; i < din; ++i) {
          for (int j = 0; j < din; ++j) {
            add_cw(*prog, row, bj, idx(i, b1), idx(j, b2),
                   Complex(0.0, -1.0) * rho_in(i, j));
          }
        }
        prog->cons_lin(row, bp, 0, -diff_t(b1, b2).imag());
      }
    }
  }
  add_membership_rows(*prog, bj, din, dout, cls);
  prog->obj_lin(bp, 0, 1.0);

  // Facial reduction: every output the channel can emit is supported on
  // supp(t0 + t1), so the Choi matrix must vanish on
  // conj(supp rho') x ker(t0 + t1) whenever that kernel is nonempty.
  const Matrix out_ker = kernel_basis(t.t0 + t.t1);
  Matrix q;
  if (out_ker.cols() > 0) {
    const Matrix in_supp = support_basis(rho_in).conjugate();
    q = product_complement(in_supp, out_ker, din, dout);
    prog = std::make_shared<ConicProgram>(
        sdp::restrict_psd_block(*prog, bj, q));
  }

  ConicSolution sol = sdp::solve(*prog, opts);
  if (sol.status != SolveStatus::Optimal) {
    throw std::runtime_error("catalysis SDP did not reach optimality: " +
                             sol.message);
  }
  Matrix j = sol.X[bj];
  if (q.size() > 0) j = q * j * q.adjoint();
  const double p = sol.x_lin[bp][0];
  return finish_result(cls, p, unassisted, sol.gap, timer,
                       std::make_shared<const Matrix>(std::move(j)));
}

CatalysisResult p_dio_catalytic_pure(const CatalysisInstance& inst,
                                     FreeClass cls,
                                     const sdp::SolveOptions& opts) {
  Timer timer;
  const int d = inst.rho.dim();
  const int k = inst.catalyst.dim();
  const int m = inst.m;
  const int din = d * k;
  const int dout = 2 * m * k;
  check_choi_budget(din, dout);

  double base_gap = 0.0;
  const double unassisted = unassisted_probability(inst, cls, opts, &base_gap);
  if (inst.eps >= 1.0 - 1.0 / m) {
    return finish_result(cls, 1.0, unassisted, 0.0, timer, nullptr);
  }

  const Matrix gamma = inst.catalyst.density().mat();
  const Matrix rho_in = tensor(inst.rho, HermitianOperator(gamma)).mat();
  const Matrix succ = smoothed_target(m, inst.eps).mat();
  const bool zero_delta = inst.delta < kZeroTol;

  auto prog = std::make_shared<ConicProgram>();
  const int bj = prog->add_psd_block(din * dout);
  const int bv = prog->add_psd_block(k);
  const int bw = prog->add_psd_block(k);
  const int bsl = zero_delta ? -1 : prog->add_nonneg_block(2);
  const auto idx = [dout](int i, int a) { return i * dout + a; };

  add_tp_rows(*prog, bj, din, dout);
  // Action rows: Pi(rho x gamma) = |0><0| x Psi_m^eps x V + |1><1| x (1/m) x W.
  for (int b1 = 0; b1 < dout; ++b1) {
    const int f1 = b1 / (m * k), t1 = (b1 / k) % m, c1 = b1 % k;
    for (int b2 = b1; b2 < dout; ++b2) {
      const int f2 = b2 / (m * k), t2 = (b2 / k) % m, c2 = b2 % k;
      for (int im = 0; im < (b1 == b2 ? 1 : 2); ++im) {
        const Complex phase = im == 0 ? Complex(1.0, 0.0) : Complex(0.0, -1.0);
        const int row = prog->new_constraint(0.0);
        for (int i = 0; i < din; ++i) {
          for (int j = 0; j < din; ++j) {
            add_cw(*prog, row, bj, idx(i, b1), idx(j, b2),
                   phase * rho_in(i, j));
          }
        }
        if (f1 == f2 && f1 == 0) {
          add_cw(*prog, row, bv, c1, c2, -phase * succ(t1, t2));
        } else if (f1 == f2 && f1 == 1 && t1 == t2) {
          add_cw(*prog, row, bw, c1, c2, -phase / double(m));
        }
      }
    }
  }
  add_membership_rows(*prog, bj, din, dout, cls);
  // The normalization tr V + tr W = 1 is already implied: trace preservation
  // gives tr Pi(rho x gamma) = 1 and summing the diagonal action rows turns
  // that into tr V + tr W = 1. Adding it as an explicit row would make the
  // constraint matrix exactly rank-deficient and stall the interior-point
  // iteration, so it stays implicit.
  // Catalyst-return fidelity: tr((gamma - (1-delta)) V) - s_v = 0, same for W.
  if (!zero_delta) {
    for (int which = 0; which < 2; ++which) {
      const int blk = which == 0 ? bv : bw;
      const int row = prog->new_constraint(0.0);
      Matrix kmat = gamma - (1.0 - inst.delta) * Matrix::Identity(k, k);
      prog->cons_herm(row, blk, kmat, 1.0);
      prog->cons_lin(row, bsl, which, -1.0);
    }
  }
  for (int c = 0; c < k; ++c) prog->obj_entry(bv, c, c, 1.0);

  // Facial reductions. At delta = 0 the fidelity condition forces the
  // output catalysts onto the ray gamma. Independently, the Choi matrix
  // must vanish on conj(supp rho') x ker of the largest possible output
  // support (catalyst factor full-rank for delta > 0, gamma for delta = 0).
  Matrix gvec;
  if (zero_delta) {
    gvec = Matrix(k, 1);
    for (int c = 0; c < k; ++c) gvec(c, 0) = inst.catalyst.amplitudes()[c];
    prog = std::make_shared<ConicProgram>(
        sdp::restrict_psd_block(*prog, bv, gvec));
    prog = std::make_shared<ConicProgram>(
        sdp::restrict_psd_block(*prog, bw, gvec));
  }
  const Matrix sigma_env =
      zero_delta ? gamma : Matrix(Matrix::Identity(k, k));
  const OutputTargets env = flag_targets(m, inst.eps, sigma_env);
  const Matrix out_ker = kernel_basis(env.t0 + env.t1);
  Matrix q;
  if (out_ker.cols() > 0) {
    const Matrix in_supp = support_basis(rho_in).conjugate();
    q = product_complement(in_supp, out_ker, din, dout);
    prog = std::make_shared<ConicProgram>(
        sdp::restrict_psd_block(*prog, bj, q));
  }

  ConicSolution sol = sdp::solve(*prog, opts);
  if (sol.status != SolveStatus::Optimal) {
    throw std::runtime_error("catalysis SDP did not reach optimality: " +
                             sol.message);
  }
  Matrix j = sol.X[bj];
  if (q.size() > 0) j = q * j * q.adjoint();
  Matrix v = sol.X[bv];
  if (zero_delta) v = gvec * v * gvec.adjoint();
  const double p = v.trace().real();
  return finish_result(cls, p, unassisted, sol.gap, timer,
                       std::make_shared<const Matrix>(std::move(j)));
}

std::string to_string(Family f) {
  return f == Family::v_family ? "v_family" : "u_family";
}

HermitianOperator family_state(Family f, double q) {
  const PureState x1 = example_state(
      f == Family::v_family ? ExampleState::v1 : ExampleState::u1);
  const PureState x2 = example_state(
      f == Family::v_family ? ExampleState::v2 : ExampleState::u2);
  Matrix rho = q * x1.density().mat() + (1.0 - q) * x2.density().mat();
  return HermitianOperator(std::move(rho));
}

SweepTable catalysis_sweep(Family family, const std::vector<double>& q_grid,
                           const std::vector<double>& delta_grid, int m,
                           double eps, FreeClass cls,
                           const sdp::SolveOptions& opts) {
  SweepTable table;
  const double qlo = family == Family::v_family ? 0.1 : 0.2;
  const double qhi = family == Family::v_family ? 0.5 : 0.7;
  for (double q : q_grid) {
    if (q < qlo - 1e-12 || q > qhi + 1e-12) {
      std::ostringstream w;
      w << "q = " << q << " outside the validated range [" << qlo << ", "
        << qhi << "] for " << to_string(family);
      table.warnings.push_back(w.str());
    }
  }
  const PureState cat = max_coherent(2);
  for (double q : q_grid) {
    for (double delta : delta_grid) {
      SweepCell cell;
      cell.family = family;
      cell.q = q;
      cell.delta = delta;
      cell.eps = eps;
      cell.m = m;
      try {
        const CatalysisInstance inst{family_state(family, q), cat, m, eps,
                                     delta};
        const CatalysisResult r = p_dio_catalytic_mc(inst, cls, opts);
        cell.p_assisted = r.probability;
        cell.p_unassisted = r.unassisted;
        cell.ratio = r.enhancement_ratio;
        cell.gap = r.gap;
        cell.status = "Optimal";
      } catch (const std::exception& e) {
        cell.status = std::string("Failed: ") + e.what();
      }
      table.cells.push_back(std::move(cell));
    }
  }
  return table;
}

std::string SweepTable::to_csv() const {
  std::ostringstream os;
  os << "family,q,delta,eps,m,p_assisted,p_unassisted,ratio,gap,status\n";
  os.precision(12);
  for (const SweepCell& c : cells) {
    std::string status = c.status;
    for (char& ch : status) {
      if (ch == ',' || ch == '\n') ch = ';';
    }
    os << to_string(c.family) << ',' << c.q << ',' << c.delta << ',' << c.eps
       << ',' << c.m << ',' << c.p_assisted << ',' << c.p_unassisted << ','
       << c.ratio << ',' << c.gap << ',' << status << '\n';
  }
  return os.str();
}

ChannelReport verify_catalytic_channel(const CatalysisInstance& inst,
                                       const Matrix& choi, double p,
                                       FreeClass cls) {
  ChannelReport rep;
  const int d = inst.rho.dim();
  const int k = inst.catalyst.dim();
  const int m = inst.m;
  const int din = d * k;
  const int dout = 2 * m * k;
  {
    Eigen::SelfAdjointEigenSolver<Matrix> es(choi, Eigen::EigenvaluesOnly);
    rep.psd_defect = std::max(0.0, -es.eigenvalues().minCoeff());
  }
  {
    const HermitianOperator marg =
        partial_trace(HermitianOperator(choi), {din, dout}, /*keep=*/0);
    rep.tp_defect =
        (marg.mat() - Matrix::Identity(din, din)).cwiseAbs().maxCoeff();
  }
  for (int i = 0; i < din; ++i) {
    for (int a = 0; a < dout; ++a) {
      for (int b = 0; b < dout; ++b) {
        if (a == b) continue;
        rep.class_defect =
            std::max(rep.class_defect, std::abs(choi(i * dout + a, i * dout + b)));
      }
    }
  }
  if (cls == FreeClass::DIO) {
    for (int i = 0; i < din; ++i) {
      for (int j = 0; j < din; ++j) {
        if (i == j) continue;
        for (int a = 0; a < dout; ++a) {
          rep.class_defect = std::max(
              rep.class_defect, std::abs(choi(i * dout + a, j * dout + a)));
        }
      }
    }
  }
  const Matrix rho_in = tensor(inst.rho, max_coherent(k).density()).mat();
  const distill::ChoiMatrix cm{din, dout, HermitianOperator(choi)};
  const HermitianOperator action =
      distill::apply_channel(cm, HermitianOperator(rho_in));
  const OutputTargets t =
      flag_targets(m, inst.eps, smoothed_target(k, inst.delta).mat());
  const Matrix expected = p * t.t0 + (1.0 - p) * t.t1;
  rep.action_defect = (action.mat() - expected).cwiseAbs().maxCoeff();
  return rep;
}

}  // namespace coherdist::catalysis

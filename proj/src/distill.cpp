#include "coherdist/distill.hpp"

#include <chrono>
#include <cmath>
#include <sstream>

#include <json.hpp>

namespace coherdist::distill {

namespace {

using sdp::ConicProgram;
using sdp::ConicSolution;
using sdp::SolveStatus;

// Adds the contribution Re(w * X_rc) to a constraint row.
void add_cw(ConicProgram& p, int cons, int blk, int r, int c, Complex w) {
  if (std::abs(w) == 0.0) return;
  if (r == c) {
    if (w.real() != 0.0) p.cons_entry(cons, blk, r, c, w.real());
  } else {
    p.cons_entry(cons, blk, r, c, 0.5 * std::conj(w));
  }
}

double clamp01(double v) { return std::min(std::max(v, 0.0), 1.0); }

// Below this the smoothing parameter is treated as exactly zero, where the
// feasible set loses its relative interior and the programs are built in
// facially reduced form.
constexpr double kZeroEps = 1e-12;

// Orthonormal eigenbasis of the kernel of rho (eigenvalues below tol).
Matrix kernel_basis(const HermitianOperator& rho, double tol = 1e-9) {
  const EighResult es = eigh(rho);
  int k = 0;
  while (k < rho.dim() && es.eigenvalues[k] < tol) ++k;
  return es.eigenvectors.leftCols(k);
}

bool is_pure(const HermitianOperator& rho) {
  return (rho.mat() * rho.mat()).trace().real() > 1.0 - 1e-10;
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

DistillationResult run(FreeClass cls, Route route,
                       std::shared_ptr<ConicProgram> prog,
                       const sdp::SolveOptions& opts, bool minimize_side,
                       const Timer& timer,
                       std::shared_ptr<ConicProgram> tight_prog = nullptr) {
  ConicSolution sol = sdp::solve(*prog, opts);
  if (sol.status != SolveStatus::Optimal && tight_prog) {
    // At the threshold where the optimum jumps, the fidelity inequality is
    // active with zero slack and the program loses its interior; re-solving
    // with the row as an equality restores strict feasibility and agrees
    // with the original program exactly when the constraint binds.
    ConicSolution tight = sdp::solve(*tight_prog, opts);
    if (tight.status == SolveStatus::Optimal) {
      sol = std::move(tight);
      prog = std::move(tight_prog);
    }
  }
  if (sol.status != SolveStatus::Optimal) {
    throw std::runtime_error("distillation SDP did not reach optimality: " +
                             sol.message);
  }
  DistillationResult res;
  res.cls = cls;
  res.route = route;
  res.raw_value = minimize_side ? -sol.primal_value : sol.primal_value;
  res.probability = clamp01(res.raw_value);
  res.gap = sol.gap;
  res.program = std::move(prog);
  res.certificate = std::make_shared<ConicSolution>(std::move(sol));
  res.wall_time_ms = timer.ms();
  return res;
}

// Exact zero: at eps = 0 every feasible protocol has success probability 0
// (full-rank input, or a pure input with fewer levels than the target).
DistillationResult exact_zero_result(FreeClass cls, Route route, int d,
                                     const Timer& timer) {
  DistillationResult res;
  res.cls = cls;
  res.route = route;
  res.probability = res.raw_value = 0.0;
  res.G = Matrix::Zero(d, d);
  res.C = Matrix::Zero(d, d);
  res.wall_time_ms = timer.ms();
  return res;
}

DistillationResult trivial_result(FreeClass cls, Route route, const Timer& timer) {
  DistillationResult res;
  res.cls = cls;
  res.route = route;
  res.probability = res.raw_value = 1.0;
  res.trivial_regime = true;
  res.wall_time_ms = timer.ms();
  return res;
}

// Optimal (G, C) pairs are not unique once the fidelity row is slack: the
// success branch may overshoot the required fidelity 1 - eps. Post-composing
// the branch with a mixture of the identity and the dephasing map keeps
// every constraint (Delta(C) gains (t/m) Delta(G), so Delta(G) = m Delta(C)
// is preserved) and the objective tr(G rho), while lowering the branch
// fidelity; the mixing weight below lands exactly on 1 - eps, so the
// extracted channel maps rho to p * smoothed_target(m, eps) on the nose.
void bind_fidelity(DistillationResult& res, const Matrix& rho, int m,
                   double eps) {
  if (!res.G || !res.C) return;
  const double p = ((*res.G) * rho).trace().real();
  if (p < 1e-9) return;
  const double f = ((*res.C) * rho).trace().real() / p;
  const double target = 1.0 - eps;
  const double denom = f - 1.0 / m;
  if (f <= target + 1e-12 || denom <= 1e-12) return;
  const double t = (f - target) / denom;
  *res.C = (1.0 - t) * (*res.C) + (t / m) * (*res.G);
}

}  // namespace

std::string to_string(FreeClass c) { return c == FreeClass::MIO ? "MIO" : "DIO"; }

std::string to_string(Route r) {
  switch (r) {
    case Route::CompactPrimal: return "CompactPrimal";
    case Route::Dual: return "Dual";
    case Route::Choi: return "Choi";
  }
  return "?";
}

std::string DistillationResult::status() const {
  return trivial_regime ? "TrivialRegime" : "Optimal";
}

std::string DistillationResult::to_json(int d, int m, double eps) const {
  nlohmann::json j;
  j["class"] = distill::to_string(cls);
  j["route"] = distill::to_string(route);
  j["d"] = d;
  j["m"] = m;
  j["eps"] = eps;
  j["probability"] = probability;
  j["gap"] = gap;
  j["status"] = status();
  j["wall_time_ms"] = wall_time_ms;
  return j.dump();
}

DistillationResult p_mio(const DistillationInstance& inst,
                         const sdp::SolveOptions& opts) {
  Timer timer;
  if (inst.trivial_regime()) {
    return trivial_result(FreeClass::MIO, Route::CompactPrimal, timer);
  }
  const Matrix& rho = inst.rho.mat();
  const int d = inst.rho.dim();
  const int m = inst.m;
  const double eps = inst.eps;

  // At eps = 0 the fidelity constraint is an implicit equality forcing
  // G - C onto the kernel of rho; compress that block so the program
  // regains a strictly feasible point (or is exactly zero).
  const bool zero_eps = eps < kZeroEps;
  Matrix ker;
  if (zero_eps) {
    ker = kernel_basis(inst.rho);
    if (ker.cols() == 0) {
      return exact_zero_result(FreeClass::MIO, Route::CompactPrimal, d, timer);
    }
  }

  const int bC = 0, bT1 = 1;  // block layout fixed by the builder below
  auto build = [&](bool tight_fidelity) {
    auto prog = std::make_shared<ConicProgram>();
    prog->add_psd_block(d);            // C
    prog->add_psd_block(d);            // T1 = G - C
    const int bT2 = prog->add_psd_block(d);  // 1 - G
    const int bs =
        (zero_eps || tight_fidelity) ? -1 : prog->add_nonneg_block(1);

    // C + T1 + T2 = 1
    for (int r = 0; r < d; ++r) {
      for (int c = r; c < d; ++c) {
        int row = prog->new_constraint(r == c ? 1.0 : 0.0);
        prog->cons_re(row, bC, r, c, 1.0);
        prog->cons_re(row, bT1, r, c, 1.0);
        prog->cons_re(row, bT2, r, c, 1.0);
        if (r != c) {
          row = prog->new_constraint(0.0);
          prog->cons_im(row, bC, r, c, 1.0);
          prog->cons_im(row, bT1, r, c, 1.0);
          prog->cons_im(row, bT2, r, c, 1.0);
        }
      }
    }
    // Delta(G) = m Delta(C)  <=>  diag(T1) = (m-1) diag(C)
    for (int r = 0; r < d; ++r) {
      const int row = prog->new_constraint(0.0);
      prog->cons_re(row, bT1, r, r, 1.0);
      prog->cons_re(row, bC, r, r, -(m - 1.0));
    }
    // tr C rho - (1-eps) tr G rho = s >= 0; at eps = 0 this is implied by
    // the support restriction of G - C and is omitted.
    if (!zero_eps) {
      const int row = prog->new_constraint(0.0);
      prog->cons_herm(row, bC, rho, eps);
      prog->cons_herm(row, bT1, rho, -(1.0 - eps));
      if (!tight_fidelity) prog->cons_lin(row, bs, 0, -1.0);
    }
    prog->obj_herm(bC, rho, 1.0);
    if (!zero_eps) prog->obj_herm(bT1, rho, 1.0);

    if (zero_eps) {
      prog = std::make_shared<ConicProgram>(
          sdp::restrict_psd_block(*prog, bT1, ker));
    }
    return prog;
  };
  DistillationResult res =
      run(FreeClass::MIO, Route::CompactPrimal, build(false), opts, false,
          timer, zero_eps ? nullptr : build(true));
  res.C = res.certificate->X[bC];
  Matrix t1 = res.certificate->X[bT1];
  if (zero_eps) t1 = ker * t1 * ker.adjoint();
  res.G = res.certificate->X[bC] + t1;
  bind_fidelity(res, rho, m, eps);
  return res;
}

DistillationResult p_dio(const DistillationInstance& inst,
                         const sdp::SolveOptions& opts, bool use_gc_form) {
  Timer timer;
  if (inst.trivial_regime()) {
    return trivial_result(FreeClass::DIO, Route::CompactPrimal, timer);
  }
  const Matrix& rho = inst.rho.mat();
  const int d = inst.rho.dim();
  const int m = inst.m;
  const double eps = inst.eps;

  // eps = 0: m Delta(C) - C is forced onto the kernel of rho (implicit
  // equality in the fidelity constraint); build the facially reduced
  // C-only form regardless of use_gc_form.
  const bool zero_eps = eps < kZeroEps;
  const bool pure = is_pure(inst.rho);
  int nlev = 0;
  for (int r = 0; r < d; ++r) {
    if (rho(r, r).real() > 1e-12) ++nlev;
  }
  Matrix ker;
  if (zero_eps) {
    ker = kernel_basis(inst.rho);
    if (ker.cols() == 0) {
      return exact_zero_result(FreeClass::DIO, Route::CompactPrimal, d, timer);
    }
    // Fewer occupied levels than the target: no zero-error protocol.
    if (pure && nlev < m) {
      return exact_zero_result(FreeClass::DIO, Route::CompactPrimal, d, timer);
    }
  }
  // Pure input with n < m occupied levels at the exact revival threshold
  // eps = 1 - n/m: the fidelity constraint can only be met with equality,
  // which forces C_rr proportional to 1/rho_rr and C rank one on the
  // support. Restrict C to that ray (and the coupled block to the support)
  // so the reduced program regains a strictly feasible point.
  const bool at_threshold = pure && !zero_eps && nlev < m &&
                            std::abs(eps - (1.0 - double(nlev) / m)) < 1e-12;
  Vector ray;
  Matrix supp_iso;
  if (at_threshold) {
    const EighResult er = eigh(inst.rho);
    const Vector amp = er.eigenvectors.col(d - 1);
    ray = Vector::Zero(d);
    for (int r = 0; r < d; ++r) {
      if (std::abs(amp[r]) > 1e-9) ray[r] = amp[r] / std::norm(amp[r]);
    }
    ray /= ray.norm();
    supp_iso = Matrix::Zero(d, nlev);
    int col = 0;
    for (int r = 0; r < d; ++r) {
      if (rho(r, r).real() > 1e-12) supp_iso(r, col++) = 1.0;
    }
  }

  if (!use_gc_form || zero_eps || at_threshold) {
    // C-only elimination form: 0 <= C <= m Delta(C) <= 1,
    // tr C rho >= m (1-eps) tr Delta(C) rho, objective m tr Delta(C) rho.
    const int bC = 0, bT = 1;
    const bool omit_fid = zero_eps || at_threshold;
    Matrix cdir;  // forced-ray compression of C, when applicable
    auto build = [&](bool tight_fidelity) {
      auto prog = std::make_shared<ConicProgram>();
      prog->add_psd_block(d);  // C
      prog->add_psd_block(d);  // m Delta(C) - C
      const int bu = prog->add_nonneg_block(d);
      const int bs =
          (omit_fid || tight_fidelity) ? -1 : prog->add_nonneg_block(1);
      for (int r = 0; r < d; ++r) {
        for (int c = r; c < d; ++c) {
          if (r == c) {
            const int row = prog->new_constraint(0.0);
            prog->cons_re(row, bT, r, r, 1.0);
            prog->cons_re(row, bC, r, r, -(m - 1.0));
          } else {
            int row = prog->new_constraint(0.0);
            prog->cons_re(row, bT, r, c, 1.0);
            prog->cons_re(row, bC, r, c, 1.0);
            row = prog->new_constraint(0.0);
            prog->cons_im(row, bT, r, c, 1.0);
            prog->cons_im(row, bC, r, c, 1.0);
          }
        }
      }
      for (int r = 0; r < d; ++r) {
        const int row = prog->new_constraint(1.0);
        prog->cons_lin(row, bu, r, 1.0);
        prog->cons_re(row, bC, r, r, double(m));
      }
      // The fidelity row is implied by the block restrictions when the
      // reduced geometry forces it to hold with equality.
      if (!omit_fid) {
        const int row = prog->new_constraint(0.0);
        prog->cons_herm(row, bC, rho, 1.0);
        for (int r = 0; r < d; ++r) {
          prog->cons_re(row, bC, r, r, -m * (1.0 - eps) * rho(r, r).real());
        }
        if (!tight_fidelity) prog->cons_lin(row, bs, 0, -1.0);
      }
      for (int r = 0; r < d; ++r) {
        prog->obj_entry(bC, r, r, m * rho(r, r).real());
      }
      if (zero_eps) {
        prog = std::make_shared<ConicProgram>(
            sdp::restrict_psd_block(*prog, bT, ker));
        if (d == 2 && m == 2 && ker.cols() == 1 && pure) {
          cdir = Matrix(2, 1);
          cdir(0, 0) = ker(0, 0);
          cdir(1, 0) = -ker(1, 0);
          prog = std::make_shared<ConicProgram>(
              sdp::restrict_psd_block(*prog, bC, cdir));
        }
      } else if (at_threshold) {
        prog = std::make_shared<ConicProgram>(
            sdp::restrict_psd_block(*prog, bT, supp_iso));
        cdir = ray;
        prog = std::make_shared<ConicProgram>(
            sdp::restrict_psd_block(*prog, bC, cdir));
      }
      return prog;
    };
    DistillationResult res =
        run(FreeClass::DIO, Route::CompactPrimal, build(false), opts, false,
            timer, omit_fid ? nullptr : build(true));
    Matrix c = res.certificate->X[bC];
    if (cdir.size() > 0) c = cdir * c * cdir.adjoint();
    res.C = c;
    Matrix g = Matrix::Zero(d, d);
    g.diagonal() = double(m) * c.diagonal();
    res.G = g;
    bind_fidelity(res, rho, m, eps);
    return res;
  }

  // Explicit (G, C) form with diagonal G, kept for cross-checking.
  const int bC = 0, bT1 = 1;
  int bg = -1;
  auto build = [&](bool tight_fidelity) {
    auto prog = std::make_shared<ConicProgram>();
    prog->add_psd_block(d);  // C
    prog->add_psd_block(d);  // G - C
    bg = prog->add_nonneg_block(d);
    const int bu = prog->add_nonneg_block(d);
    const int bs = tight_fidelity ? -1 : prog->add_nonneg_block(1);
    for (int r = 0; r < d; ++r) {
      for (int c = r; c < d; ++c) {
        if (r == c) {
          const int row = prog->new_constraint(0.0);
          prog->cons_re(row, bT1, r, r, 1.0);
          prog->cons_re(row, bC, r, r, 1.0);
          prog->cons_lin(row, bg, r, -1.0);
        } else {
          int row = prog->new_constraint(0.0);
          prog->cons_re(row, bT1, r, c, 1.0);
          prog->cons_re(row, bC, r, c, 1.0);
          row = prog->new_constraint(0.0);
          prog->cons_im(row, bT1, r, c, 1.0);
          prog->cons_im(row, bC, r, c, 1.0);
        }
      }
    }
    for (int r = 0; r < d; ++r) {
      int row = prog->new_constraint(0.0);
      prog->cons_re(row, bC, r, r, double(m));
      prog->cons_lin(row, bg, r, -1.0);
      row = prog->new_constraint(1.0);
      prog->cons_lin(row, bg, r, 1.0);
      prog->cons_lin(row, bu, r, 1.0);
    }
    {
      const int row = prog->new_constraint(0.0);
      prog->cons_herm(row, bC, rho, 1.0);
      for (int r = 0; r < d; ++r) {
        prog->cons_lin(row, bg, r, -(1.0 - eps) * rho(r, r).real());
      }
      if (!tight_fidelity) prog->cons_lin(row, bs, 0, -1.0);
    }
    for (int r = 0; r < d; ++r) prog->obj_lin(bg, r, rho(r, r).real());
    return prog;
  };
  DistillationResult res = run(FreeClass::DIO, Route::CompactPrimal,
                               build(false), opts, false, timer, build(true));
  res.C = res.certificate->X[bC];
  Matrix g = Matrix::Zero(d, d);
  g.diagonal() = res.certificate->x_lin[bg].cast<Complex>();
  res.G = g;
  bind_fidelity(res, rho, m, eps);
  return res;
}

DistillationResult p_mio_dual(const DistillationInstance& inst,
                              const sdp::SolveOptions& opts) {
  Timer timer;
  if (inst.trivial_regime()) {
    return trivial_result(FreeClass::MIO, Route::Dual, timer);
  }
  const Matrix& rho = inst.rho.mat();
  const int d = inst.rho.dim();
  const int m = inst.m;
  const double eps = inst.eps;

  auto prog = std::make_shared<ConicProgram>();
  const int bX = prog->add_psd_block(d);
  const int bY = prog->add_psd_block(d);
  const int bS1 = prog->add_psd_block(d);  // -( [1-lam(1-eps)] rho + Y - X + Delta(Z) )
  const int bS2 = prog->add_psd_block(d);  // -( lam rho - Y - m Delta(Z) )
  const int blam = prog->add_nonneg_block(1);
  const int bzp = prog->add_nonneg_block(d);  // diag of Z, split free
  const int bzm = prog->add_nonneg_block(d);

  // S1 + Y - X + diag(z) - (1-eps) lam rho = -rho
  for (int r = 0; r < d; ++r) {
    for (int c = r; c < d; ++c) {
      if (r == c) {
        const int row = prog->new_constraint(-rho(r, r).real());
        prog->cons_re(row, bS1, r, r, 1.0);
        prog->cons_re(row, bY, r, r, 1.0);
        prog->cons_re(row, bX, r, r, -1.0);
        prog->cons_lin(row, bzp, r, 1.0);
        prog->cons_lin(row, bzm, r, -1.0);
        prog->cons_lin(row, blam, 0, -(1.0 - eps) * rho(r, r).real());
      } else {
        int row = prog->new_constraint(-rho(r, c).real());
        prog->cons_re(row, bS1, r, c, 1.0);
        prog->cons_re(row, bY, r, c, 1.0);
        prog->cons_re(row, bX, r, c, -1.0);
        prog->cons_lin(row, blam, 0, -(1.0 - eps) * rho(r, c).real());
        row = prog->new_constraint(-rho(r, c).imag());
        prog->cons_im(row, bS1, r, c, 1.0);
        prog->cons_im(row, bY, r, c, 1.0);
        prog->cons_im(row, bX, r, c, -1.0);
        prog->cons_lin(row, blam, 0, -(1.0 - eps) * rho(r, c).imag());
      }
    }
  }
  // S2 - Y - m diag(z) + lam rho = 0
  for (int r = 0; r < d; ++r) {
    for (int c = r; c < d; ++c) {
      if (r == c) {
        const int row = prog->new_constraint(0.0);
        prog->cons_re(row, bS2, r, r, 1.0);
        prog->cons_re(row, bY, r, r, -1.0);
        prog->cons_lin(row, bzp, r, -double(m));
        prog->cons_lin(row, bzm, r, double(m));
        prog->cons_lin(row, blam, 0, rho(r, r).real());
      } else {
        int row = prog->new_constraint(0.0);
        prog->cons_re(row, bS2, r, c, 1.0);
        prog->cons_re(row, bY, r, c, -1.0);
        prog->cons_lin(row, blam, 0, rho(r, c).real());
        row = prog->new_constraint(0.0);
        prog->cons_im(row, bS2, r, c, 1.0);
        prog->cons_im(row, bY, r, c, -1.0);
        prog->cons_lin(row, blam, 0, rho(r, c).imag());
      }
    }
  }
  for (int r = 0; r < d; ++r) prog->obj_entry(bX, r, r, -1.0);

  return run(FreeClass::MIO, Route::Dual, std::move(prog), opts, true, timer);
}

DistillationResult p_dio_dual(const DistillationInstance& inst,
                              const sdp::SolveOptions& opts) {
  Timer timer;
  if (inst.trivial_regime()) {
    return trivial_result(FreeClass::DIO, Route::Dual, timer);
  }
  const Matrix& rho = inst.rho.mat();
  const int d = inst.rho.dim();
  const int m = inst.m;
  const double eps = inst.eps;

  auto prog = std::make_shared<ConicProgram>();
  const int bX = prog->add_psd_block(d);
  const int bY = prog->add_psd_block(d);
  const int bS1 = prog->add_psd_block(d);
  const int blam = prog->add_nonneg_block(1);

  // S1 + m Delta(Y) - Y - m Delta(X) + lam (rho - m (1-eps) Delta(rho)) = -m Delta(rho)
  for (int r = 0; r < d; ++r) {
    for (int c = r; c < d; ++c) {
      if (r == c) {
        const int row = prog->new_constraint(-m * rho(r, r).real());
        prog->cons_re(row, bS1, r, r, 1.0);
        prog->cons_re(row, bY, r, r, m - 1.0);
        prog->cons_re(row, bX, r, r, -double(m));
        prog->cons_lin(row, blam, 0, (1.0 - m * (1.0 - eps)) * rho(r, r).real());
      } else {
        int row = prog->new_constraint(0.0);
        prog->cons_re(row, bS1, r, c, 1.0);
        prog->cons_re(row, bY, r, c, -1.0);
        prog->cons_lin(row, blam, 0, rho(r, c).real());
        row = prog->new_constraint(0.0);
        prog->cons_im(row, bS1, r, c, 1.0);
        prog->cons_im(row, bY, r, c, -1.0);
        prog->cons_lin(row, blam, 0, rho(r, c).imag());
      }
    }
  }
  for (int r = 0; r < d; ++r) prog->obj_entry(bX, r, r, -1.0);

  return run(FreeClass::DIO, Route::Dual, std::move(prog), opts, true, timer);
}

DistillationResult p_exact_choi(const HermitianOperator& rho,
                                const HermitianOperator& target, FreeClass cls,
                                const sdp::SolveOptions& opts) {
  Timer timer;
  const int d = rho.dim();
  const int dout = target.dim();
  const auto idx = [dout](int i, int a) { return i * dout + a; };

  auto prog = std::make_shared<ConicProgram>();
  const int bJ = prog->add_psd_block(d * dout);
  const int bK = prog->add_psd_block(d);  // 1_A - tr_B J
  const int bp = prog->add_nonneg_block(1);

  // K + tr_B J = 1_A
  for (int a1 = 0; a1 < d; ++a1) {
    for (int a2 = a1; a2 < d; ++a2) {
      int row = prog->new_constraint(a1 == a2 ? 1.0 : 0.0);
      prog->cons_re(row, bK, a1, a2, 1.0);
      for (int b = 0; b < dout; ++b) {
        add_cw(*prog, row, bJ, idx(a1, b), idx(a2, b), 1.0);
      }
      if (a1 != a2) {
        row = prog->new_constraint(0.0);
        prog->cons_im(row, bK, a1, a2, 1.0);
        for (int b = 0; b < dout; ++b) {
          add_cw(*prog, row, bJ, idx(a1, b), idx(a2, b), Complex(0.0, -1.0));
        }
      }
    }
  }
  // tr_A J (rho^T x 1) = p * target
  for (int b1 = 0; b1 < dout; ++b1) {
    for (int b2 = b1; b2 < dout; ++b2) {
      int row = prog->new_constraint(0.0);
      for (int i = 0; i < d; ++i) {
        for (int j = 0; j < d; ++j) {
          add_cw(*prog, row, bJ, idx(i, b1), idx(j, b2), rho.mat()(i, j));
        }
      }
      prog->cons_lin(row, bp, 0, -target.mat()(b1, b2).real());
      if (b1 != b2) {
        row = prog->new_constraint(0.0);
        for (int i = 0; i < d; ++i) {
          for (int j = 0; j < d; ++j) {
            add_cw(*prog, row, bJ, idx(i, b1), idx(j, b2),
                   Complex(0.0, -1.0) * rho.mat()(i, j));
          }
        }
        prog->cons_lin(row, bp, 0, -target.mat()(b1, b2).imag());
      }
    }
  }
  // Membership rows: E(|i><i|) diagonal for MIO and DIO.
  for (int i = 0; i < d; ++i) {
    for (int a = 0; a < dout; ++a) {
      for (int b = a + 1; b < dout; ++b) {
        int row = prog->new_constraint(0.0);
        add_cw(*prog, row, bJ, idx(i, a), idx(i, b), 1.0);
        row = prog->new_constraint(0.0);
        add_cw(*prog, row, bJ, idx(i, a), idx(i, b), Complex(0.0, -1.0));
      }
    }
  }
  // Dephasing covariance rows for DIO: Delta(E(|i><j|)) = 0, i != j.
  if (cls == FreeClass::DIO) {
    for (int i = 0; i < d; ++i) {
      for (int j = i + 1; j < d; ++j) {
        for (int a = 0; a < dout; ++a) {
          int row = prog->new_constraint(0.0);
          add_cw(*prog, row, bJ, idx(i, a), idx(j, a), 1.0);
          row = prog->new_constraint(0.0);
          add_cw(*prog, row, bJ, idx(i, a), idx(j, a), Complex(0.0, -1.0));
        }
      }
    }
  }
  prog->obj_lin(bp, 0, 1.0);

  return run(cls, Route::Choi, std::move(prog), opts, false, timer);
}

HermitianOperator apply_channel(const ChoiMatrix& choi, const HermitianOperator& rho) {
  const int d = choi.d_in, dout = choi.d_out;
  if (rho.dim() != d) throw std::invalid_argument("apply_channel: dimension mismatch");
  Matrix out = Matrix::Zero(dout, dout);
  for (int a = 0; a < dout; ++a) {
    for (int b = 0; b < dout; ++b) {
      for (int i = 0; i < d; ++i) {
        for (int j = 0; j < d; ++j) {
          out(a, b) += rho.mat()(i, j) * choi.j.mat()(i * dout + a, j * dout + b);
        }
      }
    }
  }
  return HermitianOperator(std::move(out));
}

ChoiMatrix extract_protocol(const DistillationInstance& inst,
                            const HermitianOperator& g, const HermitianOperator& c,
                            double tol) {
  const int d = inst.rho.dim();
  const int m = inst.m;
  if (g.dim() != d || c.dim() != d) {
    throw std::invalid_argument("extract_protocol: G, C must match the input dimension");
  }
  std::ostringstream violations;
  auto min_eig = [](const Matrix& h) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(h, Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
  };
  if (min_eig(c.mat()) < -tol) violations << " C not PSD;";
  if (min_eig(g.mat() - c.mat()) < -tol) violations << " C <= G violated;";
  if (min_eig(Matrix::Identity(d, d) - g.mat()) < -tol) violations << " G <= 1 violated;";
  double diag_defect = 0.0;
  for (int r = 0; r < d; ++r) {
    diag_defect = std::max(diag_defect,
                           std::abs(g.mat()(r, r).real() - m * c.mat()(r, r).real()));
  }
  if (diag_defect > tol) violations << " Delta(G) = m Delta(C) violated;";
  const double trc = (c.mat() * inst.rho.mat()).trace().real();
  const double trg = (g.mat() * inst.rho.mat()).trace().real();
  if (trc < (1.0 - inst.eps) * trg - tol) violations << " fidelity row violated;";
  if (violations.tellp() > 0) {
    throw std::domain_error("extract_protocol: infeasible (G, C):" + violations.str());
  }

  const Matrix psi = max_coherent(m).density().mat();
  const Matrix dmat = (g.mat() - c.mat()) / double(m - 1);
  Matrix j(d * m, d * m);
  for (int i = 0; i < d; ++i) {
    for (int jj = 0; jj < d; ++jj) {
      // transpose convention: block (i, jj) carries C[jj, i], D[jj, i]
      j.block(i * m, jj * m, m, m) =
          c.mat()(jj, i) * psi +
          dmat(jj, i) * (Matrix::Identity(m, m) - psi);
    }
  }
  return ChoiMatrix{d, m, HermitianOperator(std::move(j))};
}

ProtocolReport verify_protocol(const ChoiMatrix& choi, FreeClass cls,
                               const HermitianOperator& rho, double expected_p,
                               const HermitianOperator& expected_target) {
  ProtocolReport rep;
  const int d = choi.d_in, dout = choi.d_out;
  {
    Eigen::SelfAdjointEigenSolver<Matrix> es(choi.j.mat(), Eigen::EigenvaluesOnly);
    rep.psd_defect = std::max(0.0, -es.eigenvalues().minCoeff());
  }
  {
    const HermitianOperator marg =
        partial_trace(choi.j, {d, dout}, /*keep=*/0);
    Eigen::SelfAdjointEigenSolver<Matrix> es(
        marg.mat() - Matrix::Identity(d, d), Eigen::EigenvaluesOnly);
    rep.marginal_defect = std::max(0.0, es.eigenvalues().maxCoeff());
  }
  for (int i = 0; i < d; ++i) {
    for (int a = 0; a < dout; ++a) {
      for (int b = 0; b < dout; ++b) {
        if (a == b) continue;
        rep.class_defect = std::max(
            rep.class_defect, std::abs(choi.j.mat()(i * dout + a, i * dout + b)));
      }
    }
  }
  if (cls == FreeClass::DIO) {
    for (int i = 0; i < d; ++i) {
      for (int jj = 0; jj < d; ++jj) {
        if (i == jj) continue;
        for (int a = 0; a < dout; ++a) {
          rep.class_defect = std::max(
              rep.class_defect, std::abs(choi.j.mat()(i * dout + a, jj * dout + a)));
        }
      }
    }
  }
  const HermitianOperator action = apply_channel(choi, rho);
  rep.action_defect =
      (action.mat() - expected_p * expected_target.mat()).cwiseAbs().maxCoeff();
  return rep;
}

}  // namespace coherdist::distill

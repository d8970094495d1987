#include "coherdist/sdp.hpp"

#include <cmath>

#include <json.hpp>

namespace coherdist::sdp {

int ConicProgram::add_psd_block(int n) {
  if (n < 1) throw std::invalid_argument("add_psd_block: size must be >= 1");
  blocks_.push_back({BlockKind::PSD, n});
  return static_cast<int>(blocks_.size()) - 1;
}

int ConicProgram::add_nonneg_block(int k) {
  if (k < 1) throw std::invalid_argument("add_nonneg_block: size must be >= 1");
  blocks_.push_back({BlockKind::Nonneg, k});
  return static_cast<int>(blocks_.size()) - 1;
}

int ConicProgram::new_constraint(double b) {
  rows_.emplace_back();
  rows_.back().b = b;
  b_.push_back(b);
  return static_cast<int>(rows_.size()) - 1;
}

void ConicProgram::check_psd_index(int blk, int r, int c) const {
  if (blk < 0 || blk >= static_cast<int>(blocks_.size()) ||
      blocks_[blk].kind != BlockKind::PSD) {
    throw std::invalid_argument("coefficient refers to a non-PSD block");
  }
  const int n = blocks_[blk].size;
  if (r < 0 || c < 0 || r >= n || c >= n) {
    throw std::invalid_argument("coefficient index out of range");
  }
}

void ConicProgram::add_entry(Row& row, int blk, int r, int c, Complex v) {
  check_psd_index(blk, r, c);
  if (r == c && std::abs(v.imag()) > 1e-14) {
    throw std::invalid_argument("diagonal coefficient must be real");
  }
  // Canonical storage at (min, max); the (c, r) entry is the conjugate.
  if (r <= c) {
    row.psd[{blk, r, c}] += v;
  } else {
    row.psd[{blk, c, r}] += std::conj(v);
  }
}

void ConicProgram::obj_entry(int blk, int r, int c, Complex v) {
  add_entry(obj_, blk, r, c, v);
}

void ConicProgram::obj_lin(int blk, int idx, double v) {
  obj_.lin[{blk, idx}] += v;
}

void ConicProgram::cons_entry(int cons, int blk, int r, int c, Complex v) {
  add_entry(rows_.at(cons), blk, r, c, v);
}

void ConicProgram::cons_lin(int cons, int blk, int idx, double v) {
  if (blocks_.at(blk).kind != BlockKind::Nonneg || idx < 0 ||
      idx >= blocks_[blk].size) {
    throw std::invalid_argument("linear coefficient index out of range");
  }
  rows_.at(cons).lin[{blk, idx}] += v;
}

void ConicProgram::cons_re(int cons, int blk, int r, int c, double w) {
  if (r == c) {
    cons_entry(cons, blk, r, c, w);
  } else {
    cons_entry(cons, blk, r, c, 0.5 * w);
  }
}

void ConicProgram::cons_im(int cons, int blk, int r, int c, double w) {
  if (r == c) throw std::invalid_argument("cons_im: diagonal entries are real");
  cons_entry(cons, blk, r, c, Complex(0.0, 0.5 * w));
}

void ConicProgram::cons_herm(int cons, int blk, const Matrix& k, double w) {
  const int n = static_cast<int>(k.rows());
  for (int r = 0; r < n; ++r) {
    for (int c = r; c < n; ++c) {
      const Complex v = w * k(r, c);
      if (std::abs(v) > 0.0) cons_entry(cons, blk, r, c, v);
    }
  }
}

void ConicProgram::obj_herm(int blk, const Matrix& k, double w) {
  const int n = static_cast<int>(k.rows());
  for (int r = 0; r < n; ++r) {
    for (int c = r; c < n; ++c) {
      const Complex v = w * k(r, c);
      if (std::abs(v) > 0.0) obj_entry(blk, r, c, v);
    }
  }
}

bool ConicProgram::is_real() const {
  auto row_real = [](const Row& row) {
    for (const auto& [key, v] : row.psd) {
      if (std::abs(v.imag()) > 1e-14) return false;
    }
    return true;
  };
  if (!row_real(obj_)) return false;
  for (const auto& row : rows_) {
    if (!row_real(row)) return false;
  }
  return true;
}

Eigen::MatrixXd embed_matrix(const Matrix& h) {
  const int n = static_cast<int>(h.rows());
  Eigen::MatrixXd out(2 * n, 2 * n);
  out.topLeftCorner(n, n) = h.real();
  out.bottomRightCorner(n, n) = h.real();
  out.topRightCorner(n, n) = -h.imag();
  out.bottomLeftCorner(n, n) = h.imag();
  return out;
}

ConicProgram embed_hermitian(const ConicProgram& p) {
  ConicProgram q;
  for (const Block& blk : p.blocks()) {
    if (blk.kind == BlockKind::PSD) {
      q.add_psd_block(2 * blk.size);
    } else {
      q.add_nonneg_block(blk.size);
    }
  }
  // Each Hermitian coefficient K maps to (1/2) [[Re K, -Im K], [Im K, Re K]]
  // so inner products (and hence all values) are preserved.
  auto emit = [&](const ConicProgram::Row& row, int cons) {
    for (const auto& [key, v] : row.psd) {
      const auto [blk, r, c] = key;
      const int n = p.blocks()[blk].size;
      const double re = 0.5 * v.real(), im = 0.5 * v.imag();
      auto put = [&](int rr, int cc, double val) {
        if (val == 0.0) return;
        if (cons < 0) {
          q.obj_entry(blk, rr, cc, val);
        } else {
          q.cons_entry(cons, blk, rr, cc, val);
        }
      };
      // stored entry is at (r, c) with r <= c plus its conjugate at (c, r)
      put(r, c, re);
      put(n + r, n + c, re);
      if (r != c) {
        put(r, n + c, -im);
        put(n + r, c, im);
      } else if (im != 0.0) {
        throw std::logic_error("embed_hermitian: complex diagonal coefficient");
      }
    }
    for (const auto& [key, v] : row.lin) {
      if (cons < 0) {
        q.obj_lin(key.first, key.second, v);
      } else {
        q.cons_lin(cons, key.first, key.second, v);
      }
    }
  };
  emit(p.objective(), -1);
  for (int i = 0; i < p.num_constraints(); ++i) {
    const int cons = q.new_constraint(p.rhs()[i]);
    emit(p.rows()[i], cons);
  }
  return q;
}

std::string ConicProgram::dump_json() const {
  nlohmann::json j;
  for (const Block& blk : blocks_) {
    j["blocks"].push_back({{"kind", blk.kind == BlockKind::PSD ? "psd" : "nonneg"},
                           {"size", blk.size}});
  }
  auto row_to_json = [&](const Row& row) {
    nlohmann::json out;
    for (size_t blk = 0; blk < blocks_.size(); ++blk) {
      if (blocks_[blk].kind == BlockKind::PSD) {
        const int n = blocks_[blk].size;
        Matrix k = Matrix::Zero(n, n);
        for (const auto& [key, v] : row.psd) {
          if (std::get<0>(key) != static_cast<int>(blk)) continue;
          const int r = std::get<1>(key), c = std::get<2>(key);
          k(r, c) += v;
          if (r != c) k(c, r) += std::conj(v);
        }
        nlohmann::json entries = nlohmann::json::array();
        for (int r = 0; r < n; ++r) {
          for (int c = 0; c < n; ++c) {
            entries.push_back({k(r, c).real(), k(r, c).imag()});
          }
        }
        out.push_back({{"block", blk}, {"entries", entries}});
      } else {
        RealVector v = RealVector::Zero(blocks_[blk].size);
        for (const auto& [key, val] : row.lin) {
          if (key.first == static_cast<int>(blk)) v[key.second] = val;
        }
        nlohmann::json entries = nlohmann::json::array();
        for (int i = 0; i < v.size(); ++i) entries.push_back(v[i]);
        out.push_back({{"block", blk}, {"entries", entries}});
      }
    }
    return out;
  };
  j["objective"] = row_to_json(obj_);
  j["constraints"] = nlohmann::json::array();
  for (const Row& row : rows_) j["constraints"].push_back(row_to_json(row));
  j["b"] = b_;
  return j.dump(2);
}

namespace {

// Dense Hermitian coefficient matrix of one block of a row.
Matrix row_block_matrix(const ConicProgram& p, const ConicProgram::Row& row, int blk) {
  const int n = p.blocks()[blk].size;
  Matrix k = Matrix::Zero(n, n);
  for (const auto& [key, v] : row.psd) {
    if (std::get<0>(key) != blk) continue;
    const int r = std::get<1>(key), c = std::get<2>(key);
    k(r, c) += v;
    if (r != c) k(c, r) += std::conj(v);
  }
  return k;
}

double row_value(const ConicProgram& p, const ConicProgram::Row& row,
                 const ConicSolution& s) {
  double acc = 0.0;
  for (size_t blk = 0; blk < p.blocks().size(); ++blk) {
    if (p.blocks()[blk].kind == BlockKind::PSD) {
      const Matrix k = row_block_matrix(p, row, static_cast<int>(blk));
      acc += (k * s.X[blk]).trace().real();
    }
  }
  for (const auto& [key, v] : row.lin) {
    acc += v * s.x_lin[key.first][key.second];
  }
  return acc;
}

}  // namespace

ConicProgram restrict_psd_block(const ConicProgram& p, int blk, const Matrix& q) {
  if (blk < 0 || blk >= static_cast<int>(p.blocks().size()) ||
      p.blocks()[blk].kind != BlockKind::PSD ||
      q.rows() != p.blocks()[blk].size || q.cols() < 1) {
    throw std::invalid_argument("restrict_psd_block: bad block or basis");
  }
  ConicProgram out;
  for (size_t b = 0; b < p.blocks().size(); ++b) {
    if (p.blocks()[b].kind == BlockKind::PSD) {
      out.add_psd_block(static_cast<int>(b) == blk ? static_cast<int>(q.cols())
                                                   : p.blocks()[b].size);
    } else {
      out.add_nonneg_block(p.blocks()[b].size);
    }
  }
  auto emit = [&](const ConicProgram::Row& row, int cons) {
    // Compress the coefficient of the restricted block; copy the rest.
    const int n = p.blocks()[blk].size;
    Matrix k = Matrix::Zero(n, n);
    for (const auto& [key, v] : row.psd) {
      const auto [b, r, c] = key;
      if (b != blk) {
        if (cons < 0) {
          out.obj_entry(b, r, c, v);
        } else {
          out.cons_entry(cons, b, r, c, v);
        }
        continue;
      }
      k(r, c) += v;
      if (r != c) k(c, r) += std::conj(v);
    }
    Matrix kk = q.adjoint() * k * q;
    kk = 0.5 * (kk + kk.adjoint()).eval();
    if (kk.cwiseAbs().maxCoeff() > 0.0) {
      if (cons < 0) {
        out.obj_herm(blk, kk, 1.0);
      } else {
        out.cons_herm(cons, blk, kk, 1.0);
      }
    }
    for (const auto& [key, v] : row.lin) {
      if (cons < 0) {
        out.obj_lin(key.first, key.second, v);
      } else {
        out.cons_lin(cons, key.first, key.second, v);
      }
    }
  };
  emit(p.objective(), -1);
  for (int i = 0; i < p.num_constraints(); ++i) {
    const int cons = out.new_constraint(p.rhs()[i]);
    emit(p.rows()[i], cons);
  }
  return out;
}

CertificateReport check_certificate(const ConicProgram& p, const ConicSolution& s) {
  CertificateReport rep;
  for (int i = 0; i < p.num_constraints(); ++i) {
    const double r = std::abs(row_value(p, p.rows()[i], s) - p.rhs()[i]);
    rep.primal_residual = std::max(rep.primal_residual, r);
  }
  // Primal cone membership.
  for (size_t blk = 0; blk < p.blocks().size(); ++blk) {
    if (p.blocks()[blk].kind == BlockKind::PSD) {
      Eigen::SelfAdjointEigenSolver<Matrix> es(s.X[blk], Eigen::EigenvaluesOnly);
      rep.psd_defect = std::max(rep.psd_defect, -es.eigenvalues().minCoeff());
    } else if (s.x_lin[blk].size() > 0) {
      rep.psd_defect = std::max(rep.psd_defect, -s.x_lin[blk].minCoeff());
    }
  }
  // Dual slack A*(y) - obj must be in the cone.
  for (size_t blk = 0; blk < p.blocks().size(); ++blk) {
    if (p.blocks()[blk].kind == BlockKind::PSD) {
      Matrix slack = -row_block_matrix(p, p.objective(), static_cast<int>(blk));
      for (int i = 0; i < p.num_constraints(); ++i) {
        slack += s.y[i] * row_block_matrix(p, p.rows()[i], static_cast<int>(blk));
      }
      Eigen::SelfAdjointEigenSolver<Matrix> es(slack, Eigen::EigenvaluesOnly);
      rep.dual_residual = std::max(rep.dual_residual, -es.eigenvalues().minCoeff());
    } else {
      RealVector slack = RealVector::Zero(p.blocks()[blk].size);
      for (const auto& [key, v] : p.objective().lin) {
        if (key.first == static_cast<int>(blk)) slack[key.second] -= v;
      }
      for (int i = 0; i < p.num_constraints(); ++i) {
        for (const auto& [key, v] : p.rows()[i].lin) {
          if (key.first == static_cast<int>(blk)) slack[key.second] += s.y[i] * v;
        }
      }
      if (slack.size() > 0) {
        rep.dual_residual = std::max(rep.dual_residual, -slack.minCoeff());
      }
    }
  }
  const double pv = row_value(p, p.objective(), s);
  double dv = 0.0;
  for (int i = 0; i < p.num_constraints(); ++i) dv += s.y[i] * p.rhs()[i];
  rep.gap = std::abs(pv - dv) / (1.0 + std::abs(pv) + std::abs(dv));
  return rep;
}

}  // namespace coherdist::sdp

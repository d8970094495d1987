#pragma once

#include <map>
#include <string>
#include <tuple>
#include <vector>

#include "coherdist/linalg.hpp"

namespace coherdist::sdp {

enum class BlockKind { PSD, Nonneg };

struct Block {
  BlockKind kind;
  int size;
};

/// Standard-form conic program:
///
///   maximize   <obj, X>
///   subject to <A_i, X> = b_i,   X in (product of PSD and Nonneg blocks)
///
/// PSD blocks are complex Hermitian; <K, X> = Re tr(K X). Inequality rows
/// are expected to be converted to equalities with Nonneg slack entries by
/// the caller. Data is accumulated through the entry helpers below and is
/// immutable once handed to solve().
class ConicProgram {
 public:
  int add_psd_block(int n);
  int add_nonneg_block(int k);

  const std::vector<Block>& blocks() const { return blocks_; }
  int num_constraints() const { return static_cast<int>(b_.size()); }
  const std::vector<double>& rhs() const { return b_; }

  /// Start a new equality row with right-hand side b; returns its index.
  int new_constraint(double b);

  // Coefficient accumulation. A PSD entry (r, c, v) contributes v at (r, c)
  // and conj(v) at (c, r) of the Hermitian coefficient matrix; diagonal
  // entries must be real.
  void obj_entry(int blk, int r, int c, Complex v);
  void obj_lin(int blk, int idx, double v);
  void cons_entry(int cons, int blk, int r, int c, Complex v);
  void cons_lin(int cons, int blk, int idx, double v);

  // Convenience rows: contribution w * Re X_rc resp. w * Im X_rc.
  void cons_re(int cons, int blk, int r, int c, double w);
  void cons_im(int cons, int blk, int r, int c, double w);
  /// Adds w * Re tr(K X_blk) to a constraint row (K Hermitian).
  void cons_herm(int cons, int blk, const Matrix& k, double w);
  void obj_herm(int blk, const Matrix& k, double w);

  /// True when every stored coefficient is real within 1e-14.
  bool is_real() const;

  // Internal storage, exposed for the embedding, the solver front end and
  // the certificate checker.
  using EntryMap = std::map<std::tuple<int, int, int>, Complex>;
  using LinMap = std::map<std::pair<int, int>, double>;
  struct Row {
    EntryMap psd;
    LinMap lin;
    double b = 0.0;
  };
  const Row& objective() const { return obj_; }
  const std::vector<Row>& rows() const { return rows_; }

  /// Debug dump of the full program (dense row-major matrices, [re, im]
  /// pairs) to a JSON string; schema documented in the README.
  std::string dump_json() const;

 private:
  void check_psd_index(int blk, int r, int c) const;
  void add_entry(Row& row, int blk, int r, int c, Complex v);

  std::vector<Block> blocks_;
  Row obj_;
  std::vector<Row> rows_;
  std::vector<double> b_;
};

/// Real-symmetric embedding of a single Hermitian matrix,
/// [[Re H, -Im H], [Im H, Re H]]; eigenvalues of H each appear twice.
Eigen::MatrixXd embed_matrix(const Matrix& h);

/// Maps a program with complex Hermitian PSD blocks to one over real
/// symmetric blocks of doubled side. Coefficient matrices are halved so
/// that objective and constraint values are preserved; solving the
/// embedded program yields the same optimum.
ConicProgram embed_hermitian(const ConicProgram& p);

/// Facial-reduction helper: returns the program with PSD block `blk`
/// replaced by its compression onto the column span of q (isometry,
/// q^dagger q = 1): the block variable becomes M = q^dagger X q with
/// X = q M q^dagger, and every coefficient K maps to q^dagger K q.
/// Sound whenever the optimal X is known to be supported on span(q).
ConicProgram restrict_psd_block(const ConicProgram& p, int blk, const Matrix& q);

enum class SolveStatus { Optimal, MaxIterations, NumericalFailure };

struct SolveOptions {
  double gap_tol = 1e-8;
  double feas_tol = 1e-8;
  int max_iter = 100;
};

struct ConicSolution {
  SolveStatus status = SolveStatus::NumericalFailure;
  double primal_value = 0.0;  // <obj, X> at the returned X
  double dual_value = 0.0;    // b^T y; upper bound on the optimum
  std::vector<Matrix> X;      // PSD blocks (complex); Nonneg blocks as diagonal
  std::vector<RealVector> x_lin;
  RealVector y;
  double gap = 0.0;  // |primal - dual| / (1 + |primal| + |dual|)
  int iterations = 0;
  std::string message;
};

/// Primal-dual path-following solve (Nesterov-Todd scaling, Mehrotra
/// predictor-corrector, dense Newton system). Deterministic for fixed input.
ConicSolution solve(const ConicProgram& p, const SolveOptions& opts = {});

struct CertificateReport {
  double primal_residual = 0.0;  // max |<A_i, X> - b_i|
  double dual_residual = 0.0;    // PSD defect of A*(y) - obj, plus Nonneg part
  double gap = 0.0;
  double psd_defect = 0.0;  // worst negative eigenvalue of the primal blocks
};

/// Recomputes feasibility residuals and the duality gap from the program
/// data and the returned iterates, on a code path independent of the solver.
CertificateReport check_certificate(const ConicProgram& p, const ConicSolution& s);

}  // namespace coherdist::sdp

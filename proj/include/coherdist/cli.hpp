#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "coherdist/distill.hpp"
#include "coherdist/linalg.hpp"
#include "coherdist/sdp.hpp"

namespace coherdist::cli {

/// Parses one numeric token: a plain decimal or an exact fraction "a/b"
/// (so threshold points like 1/3 land on the representable value nearest
/// the rational). Throws std::invalid_argument on malformed input.
double parse_number(const std::string& token);

/// Parses a grid given as a comma list ("0.1,0.2,1/3") or an inclusive
/// range "start..end:step" (endpoint kept when it lands within 1e-9 of a
/// step). Throws std::invalid_argument on malformed input or empty grids.
std::vector<double> parse_grid(const std::string& text);

/// Comma-separated amplitude list -> normalized pure state.
PureState parse_amplitudes(const std::string& text);

/// Worker-pool width: the COHERDIST_THREADS environment variable when set,
/// otherwise `requested` when positive, otherwise the hardware concurrency;
/// always at least 1.
int thread_count(int requested = 0);

/// Runs fn(i) for i in [0, n) on a bounded pool of `threads` workers.
/// Callers index into preallocated output slots, which keeps the results in
/// deterministic order regardless of completion order.
void run_indexed(int n, int threads, const std::function<void(int)>& fn);

/// Loads a density matrix from a JSON file {"dim": d, "entries": [[re, im],
/// ...]} with dim*dim row-major entries; validates Hermiticity, positive
/// semidefiniteness and unit trace. Throws std::invalid_argument on
/// malformed or non-state input, std::runtime_error when unreadable.
HermitianOperator load_density_json(const std::string& path);

struct SweepRow {
  double eps = 0.0;
  distill::FreeClass cls = distill::FreeClass::DIO;
  int m = 2;
  double probability = 0.0;
  double gap = 0.0;
  std::string status;  // "Optimal" or the per-row failure message
};

struct SweepResult {
  std::vector<SweepRow> rows;  // ordered by the input grid

  /// CSV with header fidelity,eps,class,m,probability,gap,status where
  /// fidelity = 1 - eps. Byte-stable for fixed inputs.
  std::string to_csv() const;

  bool all_failed() const;
};

/// Evaluates the distillation probability over an eps grid, dispatching the
/// rows to a bounded worker pool. Per-row failures are recorded in the
/// status column and the sweep continues.
SweepResult sweep(const HermitianOperator& rho, distill::FreeClass cls, int m,
                  const std::vector<double>& eps_grid,
                  const sdp::SolveOptions& opts = {}, int threads = 0);

struct VerifyConfig {
  bool full = false;  // include the catalysis criteria
  std::uint64_t seed = 1;
};

/// Runs the acceptance-criteria suite, printing one pass/fail line with
/// measured values per criterion. Returns the number of failed criteria.
int run_verification(const VerifyConfig& cfg, std::ostream& out);

}  // namespace coherdist::cli

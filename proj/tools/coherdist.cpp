// Command-line front end: single computations, fidelity-probability sweeps,
// catalysis sweeps, and the verification suite. CSV/JSON on stdout or to a
// file; exit codes: 0 success, 1 verification failure, 2 usage error,
// 3 solver failure.

#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "coherdist/analytic.hpp"
#include "coherdist/catalysis.hpp"
#include "coherdist/cli.hpp"
#include "coherdist/distill.hpp"
#include "coherdist/states.hpp"

namespace {

using namespace coherdist;

constexpr int kExitOk = 0;
constexpr int kExitVerification = 1;
constexpr int kExitUsage = 2;
constexpr int kExitSolver = 3;

struct StateFlags {
  std::string name;  // example-state name or "psi:M"
  std::string amps;  // comma list of amplitudes
  std::string file;  // density-matrix JSON path
};

void add_state_flags(CLI::App* cmd, StateFlags& f) {
  auto* a = cmd->add_option("--state", f.name,
                            "named example state (v1, v2, u1, u2, main_example, "
                            "sudden_death_example) or psi:M for the maximally "
                            "coherent M-level state");
  auto* b = cmd->add_option("--amps", f.amps,
                            "comma-separated amplitudes of a pure state "
                            "(normalized automatically; fractions allowed)");
  auto* c = cmd->add_option("--file", f.file,
                            "density-matrix JSON file {\"dim\": d, \"entries\": "
                            "[[re, im], ...]} (row-major)");
  a->excludes(b)->excludes(c);
  b->excludes(c);
}

/// Resolves the input state; sets `pure` when the amplitudes are known.
HermitianOperator resolve_state(const StateFlags& f,
                                std::optional<PureState>& pure) {
  const int sources = int(!f.name.empty()) + int(!f.amps.empty()) + int(!f.file.empty());
  if (sources != 1) {
    throw std::invalid_argument(
        "exactly one of --state, --amps, --file is required");
  }
  if (!f.name.empty()) {
    if (f.name.rfind("psi:", 0) == 0) {
      const double m = cli::parse_number(f.name.substr(4));
      if (m < 1 || m != std::floor(m)) {
        throw std::invalid_argument("psi:M needs a positive integer M");
      }
      pure = max_coherent(static_cast<int>(m));
    } else {
      pure = example_state(example_state_from_name(f.name));
    }
    return pure->density();
  }
  if (!f.amps.empty()) {
    pure = cli::parse_amplitudes(f.amps);
    return pure->density();
  }
  return cli::load_density_json(f.file);
}

distill::FreeClass parse_class(const std::string& s) {
  if (s == "MIO" || s == "mio") return distill::FreeClass::MIO;
  if (s == "DIO" || s == "dio") return distill::FreeClass::DIO;
  throw std::invalid_argument("unknown class '" + s + "' (use MIO or DIO)");
}

void write_output(const std::string& path, const std::string& content) {
  if (path.empty()) {
    std::cout << content;
    return;
  }
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open output file: " + path);
  out << content;
}

int cmd_compute(const StateFlags& sf, const std::string& cls_name, int m,
                const std::string& eps_text, const std::string& output) {
  std::optional<PureState> pure;
  HermitianOperator rho = resolve_state(sf, pure);
  const distill::FreeClass cls = parse_class(cls_name);
  const double eps = cli::parse_number(eps_text);
  const DistillationInstance inst(rho, m, eps);
  distill::DistillationResult r;
  try {
    r = cls == distill::FreeClass::MIO ? distill::p_mio(inst)
                                       : distill::p_dio(inst);
  } catch (const std::exception& e) {
    std::cerr << "solver failure: " << e.what() << "\n";
    return kExitSolver;
  }
  nlohmann::json out;
  out["result"] = nlohmann::json::parse(r.to_json(rho.dim(), m, eps));
  if (pure) {
    nlohmann::json an;
    const analytic::SortedAmplitudes amps = analytic::normalize_amplitudes(*pure);
    an["nonzero_levels"] = amps.n;
    an["p_sio_pure"] = analytic::p_sio_pure(amps, m);
    an["dio_feasibility"] =
        analytic::to_string(analytic::dio_threshold(
            amps.n, m, eps,
            std::abs(amps.values.maxCoeff() - amps.values.minCoeff()) < 1e-12));
    if (m == 2) {
      an["p_qubit_target"] = analytic::p_qubit_target(amps, eps).probability;
    }
    if (amps.n >= 2) {
      const analytic::MioPureBounds b = analytic::mio_pure_lower_bound(amps, m);
      an["mio_lower_bound_tight"] = b.tight;
      an["mio_lower_bound_weak"] = b.weak;
    }
    out["analytic"] = an;
  }
  write_output(output, out.dump(2) + "\n");
  return kExitOk;
}

int cmd_sweep(const StateFlags& sf, const std::string& cls_name, int m,
              const std::string& eps_text, int threads,
              const std::string& output) {
  std::optional<PureState> pure;
  const HermitianOperator rho = resolve_state(sf, pure);
  const distill::FreeClass cls = parse_class(cls_name);
  const std::vector<double> grid = cli::parse_grid(eps_text);
  for (const double e : grid) {
    if (e < 0.0 || e >= 1.0) {
      throw std::invalid_argument("eps grid values must lie in [0, 1)");
    }
  }
  const cli::SweepResult res = cli::sweep(rho, cls, m, grid, {}, threads);
  write_output(output, res.to_csv());
  return res.all_failed() ? kExitSolver : kExitOk;
}

int cmd_catalysis(const std::string& family, const std::string& q_text,
                  const std::string& delta_text, const std::string& eps_text,
                  int m, const std::string& cls_name,
                  const std::string& output) {
  catalysis::Family fam;
  if (family == "v" || family == "v_family") {
    fam = catalysis::Family::v_family;
  } else if (family == "u" || family == "u_family") {
    fam = catalysis::Family::u_family;
  } else {
    throw std::invalid_argument("unknown family '" + family + "' (use v or u)");
  }
  const std::vector<double> qs = cli::parse_grid(q_text);
  const std::vector<double> deltas = cli::parse_grid(delta_text);
  const double eps = cli::parse_number(eps_text);
  const distill::FreeClass cls = parse_class(cls_name);
  const catalysis::SweepTable table =
      catalysis::catalysis_sweep(fam, qs, deltas, m, eps, cls);
  for (const std::string& w : table.warnings) {
    std::cerr << "warning: " << w << "\n";
  }
  write_output(output, table.to_csv());
  bool any_ok = false;
  for (const auto& cell : table.cells) {
    if (cell.status == "Optimal") any_ok = true;
  }
  return any_ok || table.cells.empty() ? kExitOk : kExitSolver;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"one-shot probabilistic coherence-distillation toolkit"};
  app.require_subcommand(1);

  StateFlags compute_state, sweep_state;
  std::string compute_class = "DIO", sweep_class = "DIO", catalysis_class = "DIO";
  int compute_m = 2, sweep_m = 2, catalysis_m = 2;
  std::string compute_eps = "0", sweep_eps, catalysis_eps = "0.01";
  std::string compute_out, sweep_out, catalysis_out;
  int sweep_threads = 0;
  std::string family, q_text, delta_text = "0";
  bool verify_quick = false, verify_full = false;
  std::uint64_t verify_seed = 1;

  CLI::App* compute = app.add_subcommand("compute", "solve one instance, print JSON");
  add_state_flags(compute, compute_state);
  compute->add_option("--class", compute_class, "free class: MIO or DIO");
  compute->add_option("--m", compute_m, "target dimension")->check(CLI::Range(2, 4096));
  compute->add_option("--eps", compute_eps, "output infidelity (fractions allowed)");
  compute->add_option("-o,--output", compute_out, "output file (default stdout)");

  CLI::App* sweep = app.add_subcommand("sweep", "probability over an eps grid, CSV");
  add_state_flags(sweep, sweep_state);
  sweep->add_option("--class", sweep_class, "free class: MIO or DIO");
  sweep->add_option("--m", sweep_m, "target dimension")->check(CLI::Range(2, 4096));
  sweep->add_option("--eps", sweep_eps,
                    "eps grid: comma list or start..end:step (fractions allowed)")
      ->required();
  sweep->add_option("--threads", sweep_threads,
                    "worker-pool width (default: COHERDIST_THREADS or all cores)");
  sweep->add_option("-o,--output", sweep_out, "output file (default stdout)");

  CLI::App* cat = app.add_subcommand("catalysis",
                                     "catalyst-assisted sweep over (q, delta), CSV");
  cat->add_option("--family", family, "input-state family: v or u")->required();
  cat->add_option("--q", q_text, "mixing-weight grid")->required();
  cat->add_option("--delta", delta_text, "catalyst-return infidelity grid");
  cat->add_option("--eps", catalysis_eps, "output infidelity");
  cat->add_option("--m", catalysis_m, "target dimension");
  cat->add_option("--class", catalysis_class, "free class: MIO or DIO");
  cat->add_option("-o,--output", catalysis_out, "output file (default stdout)");

  CLI::App* verify = app.add_subcommand("verify", "run the acceptance-criteria suite");
  verify->add_flag("--quick", verify_quick, "skip the catalysis criterion");
  verify->add_flag("--full", verify_full, "include the catalysis criterion");
  verify->add_option("--seed", verify_seed, "seed for the random-state pools");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (compute->parsed()) {
      return cmd_compute(compute_state, compute_class, compute_m, compute_eps,
                         compute_out);
    }
    if (sweep->parsed()) {
      return cmd_sweep(sweep_state, sweep_class, sweep_m, sweep_eps,
                       sweep_threads, sweep_out);
    }
    if (cat->parsed()) {
      return cmd_catalysis(family, q_text, delta_text, catalysis_eps,
                           catalysis_m, catalysis_class, catalysis_out);
    }
    if (verify->parsed()) {
      if (verify_quick && verify_full) {
        std::cerr << "--quick and --full are mutually exclusive\n";
        return kExitUsage;
      }
      cli::VerifyConfig cfg;
      cfg.full = verify_full;
      cfg.seed = verify_seed;
      const int failures = cli::run_verification(cfg, std::cout);
      return failures == 0 ? kExitOk : kExitVerification;
    }
  } catch (const std::invalid_argument& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::length_error& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "solver failure: " << e.what() << "\n";
    return kExitSolver;
  }
  return kExitUsage;
}

#include "coherdist/cli.hpp"

#include <atomic>
#include <cctype>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <json.hpp>

namespace coherdist::cli {

namespace {

std::string trim(const std::string& s) {
  size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

double parse_plain(const std::string& token) {
  const std::string t = trim(token);
  if (t.empty()) throw std::invalid_argument("empty numeric token");
  size_t pos = 0;
  double v = 0.0;
  try {
    v = std::stod(t, &pos);
  } catch (const std::exception&) {
    throw std::invalid_argument("malformed number: '" + token + "'");
  }
  if (pos != t.size()) {
    throw std::invalid_argument("malformed number: '" + token + "'");
  }
  return v;
}

std::string sanitize(const std::string& s) {
  std::string out = s;
  for (char& c : out) {
    if (c == ',' || c == '\n' || c == '\r') c = ';';
  }
  return out;
}

}  // namespace

double parse_number(const std::string& token) {
  const std::string t = trim(token);
  const size_t slash = t.find('/');
  if (slash == std::string::npos) return parse_plain(t);
  const double num = parse_plain(t.substr(0, slash));
  const double den = parse_plain(t.substr(slash + 1));
  if (den == 0.0) throw std::invalid_argument("zero denominator: '" + token + "'");
  return num / den;
}

std::vector<double> parse_grid(const std::string& text) {
  const std::string t = trim(text);
  if (t.empty()) throw std::invalid_argument("empty grid");
  const size_t range = t.find("..");
  if (range != std::string::npos) {
    const size_t colon = t.find(':', range + 2);
    if (colon == std::string::npos) {
      throw std::invalid_argument("range grid needs a ':step' suffix: '" + text + "'");
    }
    const double start = parse_number(t.substr(0, range));
    const double end = parse_number(t.substr(range + 2, colon - range - 2));
    const double step = parse_number(t.substr(colon + 1));
    if (step <= 0.0) throw std::invalid_argument("range step must be positive");
    if (end < start) throw std::invalid_argument("range end precedes start");
    std::vector<double> grid;
    for (int i = 0;; ++i) {
      const double v = start + i * step;
      if (v > end + 1e-9) break;
      grid.push_back(std::abs(v - end) <= 1e-9 ? end : v);
    }
    return grid;
  }
  std::vector<double> grid;
  std::stringstream ss(t);
  std::string tok;
  while (std::getline(ss, tok, ',')) grid.push_back(parse_number(tok));
  if (grid.empty()) throw std::invalid_argument("empty grid");
  return grid;
}

PureState parse_amplitudes(const std::string& text) {
  const std::vector<double> vals = parse_grid(text);
  Vector a(static_cast<int>(vals.size()));
  for (size_t i = 0; i < vals.size(); ++i) a[static_cast<int>(i)] = vals[i];
  const double norm = a.norm();
  if (norm < 1e-12) throw std::invalid_argument("amplitude list has zero norm");
  a /= norm;
  return PureState(std::move(a));
}

int thread_count(int requested) {
  if (const char* env = std::getenv("COHERDIST_THREADS")) {
    const int v = std::atoi(env);
    if (v >= 1) return v;
  }
  if (requested > 0) return requested;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? static_cast<int>(hw) : 1;
}

void run_indexed(int n, int threads, const std::function<void(int)>& fn) {
  if (n <= 0) return;
  threads = std::min(std::max(threads, 1), n);
  if (threads == 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (int t = 0; t < threads; ++t) {
    pool.emplace_back([&]() {
      for (;;) {
        const int i = next.fetch_add(1);
        if (i >= n) return;
        fn(i);
      }
    });
  }
  for (auto& th : pool) th.join();
}

HermitianOperator load_density_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open density-matrix file: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw std::invalid_argument("invalid JSON in " + path + ": " + e.what());
  }
  if (!j.is_object() || !j.contains("dim") || !j.contains("entries")) {
    throw std::invalid_argument(path + ": expected {\"dim\": d, \"entries\": [[re, im], ...]}");
  }
  if (!j["dim"].is_number_integer() || j["dim"].get<int>() < 1) {
    throw std::invalid_argument(path + ": dim must be a positive integer");
  }
  const int d = j["dim"].get<int>();
  const auto& entries = j["entries"];
  if (!entries.is_array() || static_cast<int>(entries.size()) != d * d) {
    throw std::invalid_argument(path + ": entries must hold dim*dim [re, im] pairs");
  }
  Matrix mat(d, d);
  for (int r = 0; r < d; ++r) {
    for (int c = 0; c < d; ++c) {
      const auto& e = entries[r * d + c];
      if (!e.is_array() || e.size() != 2 || !e[0].is_number() || !e[1].is_number()) {
        throw std::invalid_argument(path + ": each entry must be an [re, im] pair");
      }
      mat(r, c) = Complex(e[0].get<double>(), e[1].get<double>());
    }
  }
  const double herm_defect = (mat - mat.adjoint()).cwiseAbs().maxCoeff();
  if (herm_defect > 1e-9) {
    throw std::invalid_argument(path + ": matrix is not Hermitian (defect " +
                                std::to_string(herm_defect) + ")");
  }
  mat = 0.5 * (mat + mat.adjoint().eval());
  HermitianOperator rho{std::move(mat)};
  if (std::abs(rho.trace() - 1.0) > 1e-9) {
    throw std::invalid_argument(path + ": trace must be 1");
  }
  const EighResult e = eigh(rho);
  if (e.eigenvalues.minCoeff() < -1e-9) {
    throw std::invalid_argument(path + ": matrix is not positive semidefinite");
  }
  return rho;
}

std::string SweepResult::to_csv() const {
  std::ostringstream out;
  out.precision(12);
  out << "fidelity,eps,class,m,probability,gap,status\n";
  for (const SweepRow& r : rows) {
    out << (1.0 - r.eps) << ',' << r.eps << ',' << distill::to_string(r.cls)
        << ',' << r.m << ',' << r.probability << ',' << r.gap << ','
        << sanitize(r.status) << '\n';
  }
  return out.str();
}

bool SweepResult::all_failed() const {
  for (const SweepRow& r : rows) {
    if (r.status == "Optimal") return false;
  }
  return !rows.empty();
}

SweepResult sweep(const HermitianOperator& rho, distill::FreeClass cls, int m,
                  const std::vector<double>& eps_grid,
                  const sdp::SolveOptions& opts, int threads) {
  SweepResult result;
  result.rows.resize(eps_grid.size());
  run_indexed(static_cast<int>(eps_grid.size()), thread_count(threads), [&](int i) {
    SweepRow& row = result.rows[i];
    row.eps = eps_grid[i];
    row.cls = cls;
    row.m = m;
    try {
      const DistillationInstance inst(rho, m, eps_grid[i]);
      const distill::DistillationResult r =
          cls == distill::FreeClass::MIO ? distill::p_mio(inst, opts)
                                         : distill::p_dio(inst, opts);
      row.probability = r.probability;
      row.gap = r.gap;
      row.status = "Optimal";
    } catch (const std::exception& e) {
      row.status = std::string("Failed: ") + e.what();
    }
  });
  return result;
}

}  // namespace coherdist::cli

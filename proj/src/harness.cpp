#include "irstensor/harness.hpp"

#include "irstensor/tensor_ops.hpp"
#include "irstensor/version.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <limits>
#include <map>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace irstensor {

namespace {

constexpr const char* kCsvHeader =
    "estimator,sweep_key,snr_db,nmse_theta,nmse_H,nmse_G,crb_norm,"
    "iters_mean,iters_median,conv_rate,time_ms,runs,failures";

const double kNan = std::numeric_limits<double>::quiet_NaN();

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fmt_override_value(double v) {
  if (v == std::floor(v) && std::abs(v) < 1e15) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%lld", static_cast<long long>(v));
    return buf;
  }
  return fmt_double(v);
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

std::vector<std::string> split_ws(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream is(s);
  std::string tok;
  while (is >> tok) out.push_back(tok);
  return out;
}

double parse_double(const std::string& s, const std::string& what) {
  const std::string t = trim(s);
  char* end = nullptr;
  const double v = std::strtod(t.c_str(), &end);
  if (end == t.c_str() || *end != '\0')
    throw std::runtime_error("spec parse: bad number for " + what + ": '" + t +
                             "'");
  return v;
}

long long parse_int(const std::string& s, const std::string& what) {
  const double v = parse_double(s, what);
  if (v != std::floor(v))
    throw std::runtime_error("spec parse: expected integer for " + what);
  return static_cast<long long>(v);
}

bool parse_bool(const std::string& s, const std::string& what) {
  const std::string t = trim(s);
  if (t == "true" || t == "1") return true;
  if (t == "false" || t == "0") return false;
  throw std::runtime_error("spec parse: expected boolean for " + what);
}

}  // namespace

std::string estimator_name(EstimatorKind kind) {
  switch (kind) {
    case EstimatorKind::Ls: return "ls";
    case EstimatorKind::Krf: return "krf";
    case EstimatorKind::Bals: return "bals";
    case EstimatorKind::BalsOrthogonal: return "bals_orth";
    case EstimatorKind::Tals: return "tals";
    case EstimatorKind::BlockLs: return "block_ls";
  }
  throw ShapeError("estimator_name: unknown kind");
}

EstimatorKind estimator_from_name(const std::string& name) {
  if (name == "ls") return EstimatorKind::Ls;
  if (name == "krf") return EstimatorKind::Krf;
  if (name == "bals") return EstimatorKind::Bals;
  if (name == "bals_orth") return EstimatorKind::BalsOrthogonal;
  if (name == "tals") return EstimatorKind::Tals;
  if (name == "block_ls") return EstimatorKind::BlockLs;
  throw std::runtime_error("unknown estimator name: '" + name + "'");
}

std::string sweep_label(const SweepPoint& pt) {
  if (!pt.label.empty()) return pt.label;
  if (pt.overrides.empty()) return "base";
  std::string out;
  for (const auto& [k, v] : pt.overrides) {
    if (!out.empty()) out += ';';
    out += k + "=" + fmt_override_value(v);
  }
  return out;
}

SystemConfig apply_overrides(const SystemConfig& base, const SweepPoint& pt) {
  SystemConfig cfg = base;
  for (const auto& [key, value] : pt.overrides) {
    auto as_int = [&](const std::string& what) {
      if (value != std::floor(value) || value < 1)
        throw std::runtime_error("sweep override " + what +
                                 " needs a positive integer");
      return static_cast<int>(value);
    };
    if (key == "M") cfg.M = as_int(key);
    else if (key == "L") cfg.L = as_int(key);
    else if (key == "N") cfg.N = as_int(key);
    else if (key == "K") cfg.K = as_int(key);
    else if (key == "T") cfg.T = as_int(key);
    else if (key == "U") cfg.U = as_int(key);
    else if (key == "P") cfg.P = as_int(key);
    else if (key == "R1") cfg.R1 = as_int(key);
    else if (key == "R2") cfg.R2 = as_int(key);
    else if (key == "snr_db") cfg.snr_db = value;
    else if (key == "blockage_fraction") {
      if (!cfg.perturbation) cfg.perturbation = PerturbationConfig{};
      cfg.perturbation->blockage_fraction = value;
    } else if (key == "gamma") {
      if (!cfg.perturbation) cfg.perturbation = PerturbationConfig{};
      cfg.perturbation->gamma = value;
    } else {
      throw std::runtime_error("unknown sweep override key: '" + key + "'");
    }
  }
  return cfg;
}

std::uint64_t tensor_checksum(const Tensor3& t) {
  // FNV-1a over the raw payload bytes.
  const auto* p = reinterpret_cast<const unsigned char*>(t.data().data());
  const std::size_t nbytes = sizeof(Complex) * static_cast<std::size_t>(t.size());
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (std::size_t i = 0; i < nbytes; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

namespace {

int estimator_stream_id(EstimatorKind k) { return 100 + static_cast<int>(k); }

struct EstimatorOutcome {
  bool attempted = false;
  bool failed = false;
  double nmse_theta = 0.0;
  double nmse_h = 0.0, nmse_g = 0.0;
  bool has_hg = false;
  int iters = 0;
  bool converged = false;
  double time_ms = 0.0;
};

struct RunRecord {
  bool scenario_failed = false;
  double crb_term = 0.0;
  std::uint64_t checksum = 0;
  std::vector<EstimatorOutcome> est;
};

double aligned_composite_nmse(const ComplexMatrix& h_hat,
                              const ComplexMatrix& g_hat,
                              const ComplexMatrix& h_ref,
                              const ComplexMatrix& g_ref) {
  const ComplexMatrix th = khatri_rao(h_hat.transpose(), g_hat);
  const ComplexMatrix tr = khatri_rao(h_ref.transpose(), g_ref);
  const double den = tr.squaredNorm();
  double num = 0.0;
  for (Index c = 0; c < th.cols(); ++c) {
    const double dn = th.col(c).squaredNorm();
    if (dn == 0.0) {
      num += tr.col(c).squaredNorm();
      continue;
    }
    const Complex delta = th.col(c).dot(tr.col(c)) / dn;
    num += (tr.col(c) - delta * th.col(c)).squaredNorm();
  }
  return num / den;
}

EstimatorOutcome evaluate_one(EstimatorKind kind, const Scenario& sc,
                              const ComplexVector& theta_true,
                              const ExperimentSpec& spec,
                              std::uint64_t run_seed) {
  EstimatorOutcome out;
  out.attempted = true;
  Rng rng(mix_seed(run_seed,
                   {static_cast<std::uint64_t>(estimator_stream_id(kind))}));
  try {
    switch (kind) {
      case EstimatorKind::Ls: {
        EstimationResult r = ls_composite(sc.y, sc.s_ideal, sc.x);
        out.nmse_theta = nmse(r.theta_hat, theta_true);
        out.iters = r.iterations;
        out.converged = r.converged;
        out.time_ms = r.wall_time_s * 1e3;
        break;
      }
      case EstimatorKind::Krf:
      case EstimatorKind::Bals:
      case EstimatorKind::BalsOrthogonal: {
        EstimationResult r =
            kind == EstimatorKind::Krf
                ? krf(sc.y, sc.s_ideal, sc.x)
                : (kind == EstimatorKind::Bals
                       ? bals(sc.y, sc.s_ideal, sc.x, spec.bals_options, rng)
                       : bals_orthogonal(sc.y, sc.s_ideal, sc.x,
                                         spec.bals_options, rng));
        out.nmse_theta = nmse(r.theta_hat, theta_true);
        AlignResult al = align_scaling(r.h_hat, r.g_hat, sc.h_eff, sc.g_eff);
        out.nmse_h = nmse(al.h, sc.h_eff);
        out.nmse_g = nmse(al.g, sc.g_eff);
        out.has_hg = true;
        out.iters = r.iterations;
        out.converged = r.converged;
        out.time_ms = r.wall_time_s * 1e3;
        break;
      }
      case EstimatorKind::Tals: {
        EstimationResult r =
            tals(sc.y, sc.x, sc.s_ideal, spec.tals_options, rng);
        // Joint phase estimation leaves a per-column scale in the composite;
        // absorb it before scoring.
        out.nmse_theta =
            aligned_composite_nmse(r.h_hat, r.g_hat, sc.h_eff, sc.g_eff);
        AlignResult al = align_scaling(r.h_hat, r.g_hat, sc.h_eff, sc.g_eff);
        out.nmse_h = nmse(al.h, sc.h_eff);
        out.nmse_g = nmse(al.g, sc.g_eff);
        out.has_hg = true;
        out.iters = r.iterations;
        out.converged = r.converged;
        out.time_ms = r.wall_time_s * 1e3;
        break;
      }
      case EstimatorKind::BlockLs: {
        const auto t0 = std::chrono::steady_clock::now();
        std::vector<ComplexMatrix> blocks = block_ls(sc.y, sc.x);
        double num = 0.0, den = 0.0;
        for (Index k = 0; k < sc.y.dim3(); ++k) {
          const ComplexMatrix truth =
              sc.g_eff * sc.s_actual.row(k).asDiagonal() * sc.h_eff;
          num += (blocks[static_cast<std::size_t>(k)] - truth).squaredNorm();
          den += truth.squaredNorm();
        }
        out.nmse_theta = num / den;  // cascaded per-block error
        out.iters = 0;
        out.converged = true;
        out.time_ms = std::chrono::duration<double, std::milli>(
                          std::chrono::steady_clock::now() - t0)
                          .count();
        break;
      }
    }
  } catch (const DesignError&) {
    out.failed = true;
  } catch (const NumericsError&) {
    out.failed = true;
  }
  return out;
}

int resolve_threads(int threads) {
  if (threads > 0) return threads;
  if (const char* env = std::getenv("IRSTENSOR_THREADS")) {
    const int v = std::atoi(env);
    if (v > 0) return v;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? static_cast<int>(hw) : 1;
}

double mean_of(const std::vector<double>& v) {
  if (v.empty()) return kNan;
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double median_of(std::vector<double> v) {
  if (v.empty()) return kNan;
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

MonteCarloReport run_experiment(const ExperimentSpec& spec_in, int threads) {
  ExperimentSpec spec = spec_in;
  if (spec.estimators.empty())
    throw ShapeError("run_experiment: no estimators selected");
  if (spec.runs < 1) throw ShapeError("run_experiment: runs must be >= 1");
  if (spec.snr_grid_db.empty()) spec.snr_grid_db = {spec.base.snr_db};
  if (spec.sweep.empty()) spec.sweep.push_back(SweepPoint{"base", {}});

  // Pre-launch feasibility gate.
  std::vector<std::string> problems;
  for (const auto& pt : spec.sweep) {
    SystemConfig cfg = apply_overrides(spec.base, pt);
    cfg.validate();
    const DesignReport rep = check_design(cfg);
    const Index d2 = rep.d2;
    if (cfg.K < cfg.N && !cfg.allow_nonorthogonal_design)
      problems.push_back(sweep_label(pt) +
                         ": phase design needs K >= N "
                         "(or allow_nonorthogonal_design)");
    if (cfg.T < d2 && !cfg.allow_nonorthogonal_design)
      problems.push_back(sweep_label(pt) +
                         ": pilot design needs T >= pilot columns "
                         "(or allow_nonorthogonal_design)");
    for (EstimatorKind kind : spec.estimators) {
      bool ok = true;
      switch (kind) {
        case EstimatorKind::Ls: ok = rep.ls_feasible(); break;
        case EstimatorKind::Krf: ok = rep.krf_feasible(); break;
        case EstimatorKind::Bals: ok = rep.bals_feasible(); break;
        case EstimatorKind::BalsOrthogonal: ok = rep.krf_feasible(); break;
        case EstimatorKind::Tals: ok = rep.tals_feasible(); break;
        case EstimatorKind::BlockLs: ok = rep.block_ls_feasible(); break;
      }
      if (!ok)
        problems.push_back(sweep_label(pt) + ": design conditions fail for " +
                           estimator_name(kind));
    }
  }
  if (!problems.empty() && !spec.force) {
    std::string msg = "run_experiment: infeasible design";
    for (const auto& p : problems) msg += "\n  " + p;
    msg += "\n(use force to launch anyway; failing runs are counted)";
    throw DesignError(msg);
  }

  const std::size_t n_sweep = spec.sweep.size();
  const std::size_t n_snr = spec.snr_grid_db.size();
  const std::size_t n_runs = static_cast<std::size_t>(spec.runs);
  const std::size_t n_items = n_sweep * n_snr * n_runs;
  std::vector<RunRecord> records(n_items);

  // Resolve per-point configs once.
  std::vector<SystemConfig> point_cfgs;
  for (const auto& pt : spec.sweep)
    point_cfgs.push_back(apply_overrides(spec.base, pt));

  auto work_one = [&](std::size_t item) {
    const std::size_t si = item / (n_snr * n_runs);
    const std::size_t rem = item % (n_snr * n_runs);
    const std::size_t gi = rem / n_runs;
    const std::size_t r = rem % n_runs;
    RunRecord& rec = records[item];
    rec.est.resize(spec.estimators.size());
    SystemConfig cfg = point_cfgs[si];
    cfg.snr_db = spec.snr_grid_db[gi];
    const std::uint64_t run_seed =
        mix_seed(spec.master_seed, {static_cast<std::uint64_t>(si),
                                    static_cast<std::uint64_t>(gi),
                                    static_cast<std::uint64_t>(r)});
    Scenario sc;
    try {
      Rng rng(mix_seed(run_seed, {17}));
      sc = synthesize_scenario(cfg, rng);
    } catch (const DesignError&) {
      rec.scenario_failed = true;
      return;
    } catch (const NumericsError&) {
      rec.scenario_failed = true;
      return;
    }
    rec.checksum = tensor_checksum(sc.y);
    const ComplexVector theta_true = sc.theta();
    const double tnorm2 = theta_true.squaredNorm();
    rec.crb_term = sc.sigma2 * static_cast<double>(sc.d2()) * cfg.N *
                   static_cast<double>(sc.d1()) /
                   (static_cast<double>(cfg.K) * cfg.T * tnorm2);
    for (std::size_t ei = 0; ei < spec.estimators.size(); ++ei)
      rec.est[ei] =
          evaluate_one(spec.estimators[ei], sc, theta_true, spec, run_seed);
  };

  const int nthreads =
      std::max(1, std::min<int>(resolve_threads(threads),
                                static_cast<int>(n_items)));
  if (nthreads == 1) {
    for (std::size_t i = 0; i < n_items; ++i) work_one(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::exception_ptr first_error;
    std::mutex error_mutex;
    auto worker = [&] {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= n_items) return;
        try {
          work_one(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!first_error) first_error = std::current_exception();
        }
      }
    };
    std::vector<std::thread> pool;
    for (int i = 0; i < nthreads; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
    if (first_error) std::rethrow_exception(first_error);
  }

  // Deterministic aggregation in run order.
  MonteCarloReport report;
  report.spec = spec;
  for (std::size_t ei = 0; ei < spec.estimators.size(); ++ei) {
    for (std::size_t si = 0; si < n_sweep; ++si) {
      for (std::size_t gi = 0; gi < n_snr; ++gi) {
        CellStats cell;
        cell.estimator = estimator_name(spec.estimators[ei]);
        cell.sweep_key = sweep_label(spec.sweep[si]);
        cell.snr_db = spec.snr_grid_db[gi];
        cell.runs = spec.runs;
        std::vector<double> v_nt, v_nh, v_ng, v_it, v_ms, v_crb;
        int conv = 0, ok_runs = 0;
        bool any_hg = false;
        std::uint64_t checksum = 0;
        for (std::size_t r = 0; r < n_runs; ++r) {
          const RunRecord& rec = records[(si * n_snr + gi) * n_runs + r];
          if (rec.scenario_failed) {
            ++cell.failures;
            continue;
          }
          checksum ^= rec.checksum;
          v_crb.push_back(rec.crb_term);
          const EstimatorOutcome& eo = rec.est[ei];
          if (eo.failed) {
            ++cell.failures;
            continue;
          }
          ++ok_runs;
          v_nt.push_back(eo.nmse_theta);
          if (eo.has_hg) {
            any_hg = true;
            v_nh.push_back(eo.nmse_h);
            v_ng.push_back(eo.nmse_g);
          }
          v_it.push_back(static_cast<double>(eo.iters));
          v_ms.push_back(eo.time_ms);
          if (eo.converged) ++conv;
        }
        cell.scenario_checksum = checksum;
        cell.nmse_theta = mean_of(v_nt);
        cell.nmse_h = any_hg ? mean_of(v_nh) : kNan;
        cell.nmse_g = any_hg ? mean_of(v_ng) : kNan;
        cell.crb_norm = mean_of(v_crb);
        cell.iters_mean = mean_of(v_it);
        cell.iters_median = median_of(v_it);
        cell.conv_rate =
            ok_runs > 0 ? static_cast<double>(conv) / ok_runs : kNan;
        cell.time_ms = mean_of(v_ms);
        report.cells.push_back(std::move(cell));
      }
    }
  }
  return report;
}

std::string report_csv(const MonteCarloReport& rep) {
  std::string out = kCsvHeader;
  out += '\n';
  for (const CellStats& c : rep.cells) {
    out += c.estimator;
    out += ',' + c.sweep_key;
    out += ',' + fmt_double(c.snr_db);
    out += ',' + fmt_double(c.nmse_theta);
    out += ',' + fmt_double(c.nmse_h);
    out += ',' + fmt_double(c.nmse_g);
    out += ',' + fmt_double(c.crb_norm);
    out += ',' + fmt_double(c.iters_mean);
    out += ',' + fmt_double(c.iters_median);
    out += ',' + fmt_double(c.conv_rate);
    out += ',' + fmt_double(c.time_ms);
    out += ',' + std::to_string(c.runs);
    out += ',' + std::to_string(c.failures);
    out += '\n';
  }
  return out;
}

void emit_report(const MonteCarloReport& rep, const std::string& path,
                 const std::string& format) {
  if (format == "csv") {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("emit_report: cannot open " + path);
    os << report_csv(rep);
    if (!os) throw std::runtime_error("emit_report: write failed: " + path);
    std::ofstream side(path + ".spec.txt");
    if (!side)
      throw std::runtime_error("emit_report: cannot open " + path +
                               ".spec.txt");
    side << "# report sidecar (library " << kVersion << ")\n"
         << spec_to_text(rep.spec);
    return;
  }
  if (format == "structured_text") {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("emit_report: cannot open " + path);
    os << "# report (library " << kVersion << ")\n\n"
       << spec_to_text(rep.spec) << "\n";
    for (const CellStats& c : rep.cells) {
      os << "[cell]\n"
         << "estimator = " << c.estimator << "\n"
         << "sweep_key = " << c.sweep_key << "\n"
         << "snr_db = " << fmt_double(c.snr_db) << "\n"
         << "nmse_theta = " << fmt_double(c.nmse_theta) << "\n"
         << "nmse_H = " << fmt_double(c.nmse_h) << "\n"
         << "nmse_G = " << fmt_double(c.nmse_g) << "\n"
         << "crb_norm = " << fmt_double(c.crb_norm) << "\n"
         << "iters_mean = " << fmt_double(c.iters_mean) << "\n"
         << "iters_median = " << fmt_double(c.iters_median) << "\n"
         << "conv_rate = " << fmt_double(c.conv_rate) << "\n"
         << "time_ms = " << fmt_double(c.time_ms) << "\n"
         << "runs = " << c.runs << "\n"
         << "failures = " << c.failures << "\n\n";
    }
    if (!os) throw std::runtime_error("emit_report: write failed: " + path);
    return;
  }
  throw std::runtime_error("emit_report: unknown format '" + format + "'");
}

std::vector<CellStats> parse_report_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line))
    throw std::runtime_error("report parse: empty input");
  if (trim(line) != kCsvHeader)
    throw std::runtime_error("report parse: unexpected header");
  std::vector<CellStats> cells;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    const auto f = split(trim(line), ',');
    if (f.size() != 13)
      throw std::runtime_error("report parse: expected 13 fields, got " +
                               std::to_string(f.size()));
    CellStats c;
    c.estimator = f[0];
    c.sweep_key = f[1];
    c.snr_db = parse_double(f[2], "snr_db");
    c.nmse_theta = parse_double(f[3], "nmse_theta");
    c.nmse_h = parse_double(f[4], "nmse_H");
    c.nmse_g = parse_double(f[5], "nmse_G");
    c.crb_norm = parse_double(f[6], "crb_norm");
    c.iters_mean = parse_double(f[7], "iters_mean");
    c.iters_median = parse_double(f[8], "iters_median");
    c.conv_rate = parse_double(f[9], "conv_rate");
    c.time_ms = parse_double(f[10], "time_ms");
    c.runs = static_cast<int>(parse_int(f[11], "runs"));
    c.failures = static_cast<int>(parse_int(f[12], "failures"));
    cells.push_back(std::move(c));
  }
  return cells;
}

std::vector<CellStats> parse_report_csv_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("report parse: cannot open " + path);
  return parse_report_csv(is);
}

// ---- spec files ----

ExperimentSpec parse_spec(std::istream& in) {
  ExperimentSpec spec;
  spec.output_path = "report.csv";
  std::string line, section;
  bool saw_pert = false;
  PerturbationConfig pert;
  std::vector<std::pair<std::string, std::vector<double>>> shorthand;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::string where = " (line " + std::to_string(lineno) + ")";
    if (line.front() == '[') {
      if (line.back() != ']')
        throw std::runtime_error("spec parse: malformed section" + where);
      section = trim(line.substr(1, line.size() - 2));
      if (section != "system" && section != "experiment" &&
          section != "sweep" && section != "bals" && section != "tals" &&
          section != "perturbation")
        throw std::runtime_error("spec parse: unknown section [" + section +
                                 "]" + where);
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error("spec parse: expected key = value" + where);
    const std::string key = trim(line.substr(0, eq));
    const std::string val = trim(line.substr(eq + 1));
    if (section.empty())
      throw std::runtime_error("spec parse: key outside any section" + where);

    if (section == "system") {
      if (key == "M") spec.base.M = static_cast<int>(parse_int(val, key));
      else if (key == "L") spec.base.L = static_cast<int>(parse_int(val, key));
      else if (key == "N") spec.base.N = static_cast<int>(parse_int(val, key));
      else if (key == "K") spec.base.K = static_cast<int>(parse_int(val, key));
      else if (key == "T") spec.base.T = static_cast<int>(parse_int(val, key));
      else if (key == "U") spec.base.U = static_cast<int>(parse_int(val, key));
      else if (key == "P") spec.base.P = static_cast<int>(parse_int(val, key));
      else if (key == "R1") spec.base.R1 = static_cast<int>(parse_int(val, key));
      else if (key == "R2") spec.base.R2 = static_cast<int>(parse_int(val, key));
      else if (key == "snr_db") spec.base.snr_db = parse_double(val, key);
      else if (key == "channel_model") {
        if (val == "iid_rayleigh")
          spec.base.channel_model = ChannelModel::IidRayleigh;
        else if (val == "geometric")
          spec.base.channel_model = ChannelModel::Geometric;
        else
          throw std::runtime_error("spec parse: unknown channel_model '" + val +
                                   "'" + where);
      } else if (key == "allow_nonorthogonal_design")
        spec.base.allow_nonorthogonal_design = parse_bool(val, key);
      else
        throw std::runtime_error("spec parse: unknown [system] key '" + key +
                                 "'" + where);
    } else if (section == "perturbation") {
      saw_pert = true;
      if (key == "blockage_fraction")
        pert.blockage_fraction = parse_double(val, key);
      else if (key == "gamma") pert.gamma = parse_double(val, key);
      else
        throw std::runtime_error("spec parse: unknown [perturbation] key '" +
                                 key + "'" + where);
    } else if (section == "experiment") {
      if (key == "snr_grid_db") {
        spec.snr_grid_db.clear();
        for (const auto& tok : split_ws(val))
          spec.snr_grid_db.push_back(parse_double(tok, key));
      } else if (key == "estimators") {
        spec.estimators.clear();
        for (const auto& tok : split_ws(val))
          spec.estimators.push_back(estimator_from_name(tok));
      } else if (key == "runs")
        spec.runs = static_cast<int>(parse_int(val, key));
      else if (key == "master_seed")
        spec.master_seed = static_cast<std::uint64_t>(parse_int(val, key));
      else if (key == "output") spec.output_path = val;
      else if (key == "format") {
        if (val != "csv" && val != "structured_text")
          throw std::runtime_error("spec parse: unknown format '" + val + "'" +
                                   where);
        spec.format = val;
      } else if (key == "force")
        spec.force = parse_bool(val, key);
      else
        throw std::runtime_error("spec parse: unknown [experiment] key '" +
                                 key + "'" + where);
    } else if (section == "sweep") {
      if (key == "point") {
        SweepPoint pt;
        for (auto part : split(val, ',')) {
          part = trim(part);
          if (part.empty()) continue;
          const auto peq = part.find('=');
          if (peq == std::string::npos)
            throw std::runtime_error(
                "spec parse: sweep point needs key=value pairs" + where);
          pt.overrides.emplace_back(trim(part.substr(0, peq)),
                                    parse_double(part.substr(peq + 1),
                                                 "sweep value"));
        }
        if (pt.overrides.empty())
          throw std::runtime_error("spec parse: empty sweep point" + where);
        spec.sweep.push_back(std::move(pt));
      } else {
        std::vector<double> values;
        for (const auto& tok : split_ws(val))
          values.push_back(parse_double(tok, key));
        if (values.empty())
          throw std::runtime_error("spec parse: empty sweep list" + where);
        shorthand.emplace_back(key, std::move(values));
      }
    } else {  // [bals] / [tals]
      BalsOptions& opt =
          section == "bals" ? spec.bals_options : spec.tals_options;
      if (key == "delta") opt.delta = parse_double(val, key);
      else if (key == "max_iter")
        opt.max_iter = static_cast<int>(parse_int(val, key));
      else if (key == "normalize_error") opt.normalize_error = parse_bool(val, key);
      else
        throw std::runtime_error("spec parse: unknown [" + section +
                                 "] key '" + key + "'" + where);
    }
  }
  if (saw_pert) spec.base.perturbation = pert;
  if (!shorthand.empty()) {
    if (!spec.sweep.empty())
      throw std::runtime_error(
          "spec parse: mixing sweep shorthand lists with explicit points is "
          "not supported");
    if (shorthand.size() > 1)
      throw std::runtime_error(
          "spec parse: several sweep keys need explicit point lines");
    for (double v : shorthand[0].second) {
      SweepPoint pt;
      pt.overrides.emplace_back(shorthand[0].first, v);
      spec.sweep.push_back(std::move(pt));
    }
  }
  spec.base.validate();
  if (spec.estimators.empty())
    throw std::runtime_error("spec parse: no estimators selected");
  return spec;
}

ExperimentSpec parse_spec_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("spec parse: cannot open " + path);
  return parse_spec(is);
}

std::string spec_to_text(const ExperimentSpec& spec) {
  std::ostringstream os;
  os << "[system]\n";
  os << "M = " << spec.base.M << "\n";
  os << "L = " << spec.base.L << "\n";
  os << "N = " << spec.base.N << "\n";
  os << "K = " << spec.base.K << "\n";
  os << "T = " << spec.base.T << "\n";
  os << "U = " << spec.base.U << "\n";
  os << "P = " << spec.base.P << "\n";
  os << "R1 = " << spec.base.R1 << "\n";
  os << "R2 = " << spec.base.R2 << "\n";
  os << "snr_db = " << fmt_double(spec.base.snr_db) << "\n";
  os << "channel_model = "
     << (spec.base.channel_model == ChannelModel::Geometric ? "geometric"
                                                            : "iid_rayleigh")
     << "\n";
  os << "allow_nonorthogonal_design = "
     << (spec.base.allow_nonorthogonal_design ? "true" : "false") << "\n";
  if (spec.base.perturbation) {
    os << "\n[perturbation]\n";
    os << "blockage_fraction = "
       << fmt_double(spec.base.perturbation->blockage_fraction) << "\n";
    os << "gamma = " << fmt_double(spec.base.perturbation->gamma) << "\n";
  }
  os << "\n[experiment]\n";
  os << "snr_grid_db =";
  for (double v : spec.snr_grid_db) os << ' ' << fmt_double(v);
  os << "\n";
  os << "estimators =";
  for (EstimatorKind k : spec.estimators) os << ' ' << estimator_name(k);
  os << "\n";
  os << "runs = " << spec.runs << "\n";
  os << "master_seed = " << spec.master_seed << "\n";
  os << "output = " << spec.output_path << "\n";
  os << "format = " << spec.format << "\n";
  os << "force = " << (spec.force ? "true" : "false") << "\n";
  if (!spec.sweep.empty()) {
    os << "\n[sweep]\n";
    for (const auto& pt : spec.sweep) {
      os << "point =";
      bool first = true;
      for (const auto& [k, v] : pt.overrides) {
        os << (first ? " " : ", ") << k << "=" << fmt_override_value(v);
        first = false;
      }
      if (pt.overrides.empty()) os << " ";
      os << "\n";
    }
  }
  os << "\n[bals]\n";
  os << "delta = " << fmt_double(spec.bals_options.delta) << "\n";
  os << "max_iter = " << spec.bals_options.max_iter << "\n";
  os << "normalize_error = "
     << (spec.bals_options.normalize_error ? "true" : "false") << "\n";
  os << "\n[tals]\n";
  os << "delta = " << fmt_double(spec.tals_options.delta) << "\n";
  os << "max_iter = " << spec.tals_options.max_iter << "\n";
  os << "normalize_error = "
     << (spec.tals_options.normalize_error ? "true" : "false") << "\n";
  return os.str();
}

std::vector<std::string> builtin_figure_ids() {
  return {"fig3", "fig4", "fig5", "fig6", "fig7", "fig8", "fig9", "fig9ref"};
}

ExperimentSpec builtin_figure_spec(const std::string& id) {
  ExperimentSpec spec;
  spec.master_seed = 1;
  spec.snr_grid_db = {0, 5, 10, 15, 20, 25, 30};
  auto sweep_n = [&](std::initializer_list<int> ns) {
    for (int n : ns) {
      SweepPoint pt;
      pt.overrides.emplace_back("N", static_cast<double>(n));
      spec.sweep.push_back(std::move(pt));
    }
  };
  if (id == "fig3" || id == "fig5" || id == "fig6") {
    // Factor-NMSE / runtime / iteration-count views of the same layout.
    spec.base.M = 3;
    spec.base.L = 2;
    spec.base.K = 50;
    spec.base.T = 4;
    spec.base.allow_nonorthogonal_design = true;  // N = 100 exceeds K
    sweep_n({50, 100});
    spec.runs = 5000;
    if (id == "fig6") {
      spec.estimators = {EstimatorKind::Bals};
    } else {
      spec.estimators = {EstimatorKind::Krf, EstimatorKind::Bals};
      spec.force = true;  // factor-split cells at N = 100 record failures
    }
    spec.output_path = id + ".csv";
    return spec;
  }
  if (id == "fig4") {
    spec.base.M = 3;
    spec.base.L = 20;
    spec.base.K = 100;
    spec.base.T = 4;
    sweep_n({10, 50, 100});
    spec.runs = 1000;
    spec.estimators = {EstimatorKind::Krf, EstimatorKind::Bals};
    spec.output_path = "fig4.csv";
    return spec;
  }
  if (id == "fig7") {
    spec.base.M = 20;
    spec.base.L = 8;
    spec.base.N = 50;
    spec.base.K = 50;
    spec.base.T = 20;
    spec.runs = 1000;
    spec.estimators = {EstimatorKind::Ls, EstimatorKind::Krf};
    spec.output_path = "fig7.csv";
    return spec;
  }
  if (id == "fig8") {
    spec.base.channel_model = ChannelModel::Geometric;
    spec.base.R1 = 1;
    spec.base.R2 = 1;
    spec.base.K = 64;
    spec.base.N = 64;
    spec.base.L = 4;
    spec.base.T = 4;
    spec.base.M = 4;
    SweepPoint p1;
    p1.overrides = {{"T", 4.0}, {"M", 4.0}};
    SweepPoint p2;
    p2.overrides = {{"T", 20.0}, {"M", 20.0}};
    spec.sweep = {p1, p2};
    spec.runs = 1000;
    spec.estimators = {EstimatorKind::Krf, EstimatorKind::BlockLs};
    spec.output_path = "fig8.csv";
    return spec;
  }
  if (id == "fig9" || id == "fig9ref") {
    spec.base.M = 50;
    spec.base.T = 50;
    spec.base.K = 100;
    spec.base.L = 4;
    spec.snr_grid_db = {0, 10, 20, 30};
    sweep_n({16, 32});
    spec.runs = 200;
    if (id == "fig9") {
      spec.base.perturbation = PerturbationConfig{0.2, 0.01};
      spec.estimators = {EstimatorKind::Tals};
    } else {
      // Companion reference: same layout, phases held exactly, 2-factor run.
      spec.estimators = {EstimatorKind::Bals};
    }
    spec.output_path = id + ".csv";
    return spec;
  }
  throw std::runtime_error("unknown builtin experiment id: '" + id + "'");
}

}  // namespace irstensor

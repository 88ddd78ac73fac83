#pragma once

#include "irstensor/analysis.hpp"
#include "irstensor/estimators.hpp"
#include "irstensor/system_model.hpp"

#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

namespace irstensor {

enum class EstimatorKind {
  Ls = 0,
  Krf = 1,
  Bals = 2,
  BalsOrthogonal = 3,
  Tals = 4,
  BlockLs = 5,
};

std::string estimator_name(EstimatorKind kind);
EstimatorKind estimator_from_name(const std::string& name);

// One sweep point: named config overrides applied on top of the base config.
struct SweepPoint {
  std::string label;  // auto-derived "key=value,..." when empty
  std::vector<std::pair<std::string, double>> overrides;
};

struct ExperimentSpec {
  SystemConfig base;
  std::vector<double> snr_grid_db;  // empty => single point at base.snr_db
  std::vector<EstimatorKind> estimators;
  std::vector<SweepPoint> sweep;  // empty => single point labeled "base"
  int runs = 100;
  std::uint64_t master_seed = 1;
  BalsOptions bals_options;  // 2-factor alternating runs
  BalsOptions tals_options;  // 3-factor runs (max_iter defaults to 500)
  bool force = false;        // launch cells even if design checks fail
  std::string output_path = "report.csv";
  std::string format = "csv";  // csv | structured_text

  ExperimentSpec() { tals_options.max_iter = 500; }
};

// Aggregated statistics for one (estimator, sweep point, SNR) cell. Failed
// runs are excluded from every mean; `failures` counts them.
struct CellStats {
  std::string estimator;
  std::string sweep_key;
  double snr_db = 0.0;
  double nmse_theta = 0.0;  // block_ls rows carry the cascaded per-block NMSE
  double nmse_h = 0.0;
  double nmse_g = 0.0;
  double crb_norm = 0.0;  // mean normalized trace bound for the cell
  double iters_mean = 0.0;
  double iters_median = 0.0;
  double conv_rate = 0.0;
  double time_ms = 0.0;
  int runs = 0;
  int failures = 0;
  // XOR of the per-run observation checksums; identical across the estimator
  // rows of a cell because every estimator sees the same realization. Not
  // part of the CSV schema.
  std::uint64_t scenario_checksum = 0;
};

struct MonteCarloReport {
  ExperimentSpec spec;
  std::vector<CellStats> cells;
};

// Run the Monte Carlo experiment. threads <= 0 consults IRSTENSOR_THREADS,
// then the hardware concurrency. Runs are paired: within a (sweep, SNR, run)
// triple every estimator consumes the same synthesized observation, and all
// estimator/scenario random streams derive from
// mix_seed(master_seed, {sweep index, snr index, run index, stream id}), so
// results are independent of the thread count.
MonteCarloReport run_experiment(const ExperimentSpec& spec, int threads = 0);

// CSV text for the report (schema: estimator,sweep_key,snr_db,nmse_theta,
// nmse_H,nmse_G,crb_norm,iters_mean,iters_median,conv_rate,time_ms,runs,
// failures; doubles at 17 significant digits).
std::string report_csv(const MonteCarloReport& rep);

// format == "csv": write the CSV to `path` plus a spec-echo sidecar at
// path + ".spec.txt". format == "structured_text": single readable file.
void emit_report(const MonteCarloReport& rep, const std::string& path,
                 const std::string& format);

std::vector<CellStats> parse_report_csv(std::istream& in);
std::vector<CellStats> parse_report_csv_file(const std::string& path);

// Experiment-spec files: INI-style sections [system], [experiment],
// [perturbation], [sweep], [bals], [tals]; `key = value` lines; '#' comments.
ExperimentSpec parse_spec(std::istream& in);
ExperimentSpec parse_spec_file(const std::string& path);
std::string spec_to_text(const ExperimentSpec& spec);

// Built-in experiment presets reproducing the reference study layouts
// (ids fig3..fig9, plus fig9ref for the unperturbed companion).
ExperimentSpec builtin_figure_spec(const std::string& id);
std::vector<std::string> builtin_figure_ids();

// Apply sweep-point overrides (dimension keys N/K/T/M/L/U/P/R1/R2, snr_db,
// blockage_fraction, gamma) to a config.
SystemConfig apply_overrides(const SystemConfig& base, const SweepPoint& pt);
std::string sweep_label(const SweepPoint& pt);

std::uint64_t tensor_checksum(const Tensor3& t);

// Command-line front end (subcommands run/check/crb/repro). Returns the
// process exit code: 0 ok, 1 infeasible design, 2 I/O or spec error,
// 64 usage.
int cli_main(int argc, char** argv);

}  // namespace irstensor

#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "cobras/array_model.hpp"
#include "cobras/grid_estimation.hpp"
#include "cobras/signal_sim.hpp"

namespace cobras::bench {

// Shortest distance between spatial frequencies on the periodic
// interval [-1, 1): min_i |a - b + 2i|.
double wrap_distance(double a, double b);

// Minimum-cost assignment (Hungarian algorithm) on a square cost matrix;
// returns column index assigned to each row.
std::vector<int> min_cost_assignment(const Eigen::MatrixXd& cost);

struct TrialEstimate {
  std::vector<double> frequencies;          // exactly L entries
  std::vector<Eigen::VectorXcd> shifts;     // aligned with frequencies
  double runtime_s = 0.0;
  double solver_residual = 0.0;
  std::uint64_t seed = 0;
  bool failed = false;
};

// RMSE over trials with estimates matched to the truth by minimum-cost
// assignment under the squared wrap-around distance.
double rmse_frequencies(const std::vector<double>& truth,
                        const std::vector<TrialEstimate>& trials);

// Deviation of the per-source mean estimate from the truth.
double bias_frequencies(const std::vector<double>& truth,
                        const std::vector<TrialEstimate>& trials);

// Shift-vector RMSE with the same per-trial assignment as the frequency
// metrics; normalized by P-1 (the first entries cancel by construction).
// Returns 0 for single-subarray geometries.
double rmse_shifts(const std::vector<double>& truth_freqs,
                   const std::vector<Eigen::VectorXcd>& truth_shifts,
                   const std::vector<TrialEstimate>& trials);

enum class Estimator { cobras_grid, cobras_gridless, lnuc1_reference };

Estimator estimator_from_name(const std::string& name);
std::string estimator_name(Estimator est);

enum class SweepVariable { snapshots, snr, separation, correlation };

struct ScenarioConfig {
  ArrayGeometry geometry;
  SourceScenario sources;          // base scenario; sweep overrides one field
  Estimator estimator = Estimator::cobras_grid;
  int grid_size = 200;
  int trials = 100;
  SweepVariable sweep_variable = SweepVariable::snapshots;
  std::vector<double> sweep_values;
  std::string output_path;
  std::uint64_t master_seed = 1;
  double solver_tolerance = 3e-5;
  int solver_max_iterations = 20000;

  void validate() const;
};

void to_json(nlohmann::json& j, const ScenarioConfig& config);
void from_json(const nlohmann::json& j, ScenarioConfig& config);

struct SweepRow {
  double sweep_value = 0.0;
  double rmse = 0.0;
  double bias = 0.0;
  double rmse_phi = 0.0;
  int failures = 0;
  double mean_runtime_s = 0.0;
};

struct ScenarioResult {
  std::vector<SweepRow> rows;
  bool aborted = false;  // more than 10% of trials failed at some sweep value
};

// Runs trials * sweep_values estimator invocations with per-trial derived
// seeds; lambda comes from the known noise level. Trials run on two worker
// threads; aggregation is ordered by trial index, so results are
// deterministic for a fixed master seed.
ScenarioResult run_scenario(const ScenarioConfig& config);

// CSV with header sweep_value,rmse,bias,rmse_phi,failures,mean_runtime_s.
std::string to_csv(const ScenarioResult& result);

// Single-instance spectrum for plotting: solves the grid problem on one
// simulated measurement and returns (nu_k, p_k) pairs plus the estimate.
GridEstimate spectrum_estimate(const ScenarioConfig& config);

}  // namespace cobras::bench

#include "cobras/bench.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>
#include <thread>

#include "cobras/gridless.hpp"
#include "cobras/rng.hpp"

namespace cobras::bench {

double wrap_distance(double a, double b) {
  double d = std::fmod(std::abs(a - b), 2.0);
  return std::min(d, 2.0 - d);
}

std::vector<int> min_cost_assignment(const Eigen::MatrixXd& cost) {
  const int n = static_cast<int>(cost.rows());
  if (cost.cols() != n) throw std::invalid_argument("cost matrix must be square");
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1, 0.0);
  std::vector<int> p(n + 1, 0), way(n + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      const int i0 = p[j0];
      int j1 = -1;
      double delta = inf;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0);
  }
  std::vector<int> row_to_col(n, -1);
  for (int j = 1; j <= n; ++j) {
    if (p[j] > 0) row_to_col[p[j] - 1] = j - 1;
  }
  return row_to_col;
}

namespace {

std::vector<int> assign_trial(const std::vector<double>& truth,
                              const std::vector<double>& estimates) {
  const int L = static_cast<int>(truth.size());
  Eigen::MatrixXd cost(L, L);
  for (int l = 0; l < L; ++l) {
    for (int m = 0; m < L; ++m) {
      const double d = wrap_distance(truth[l], estimates[m]);
      cost(l, m) = d * d;
    }
  }
  return min_cost_assignment(cost);
}

}  // namespace

double rmse_frequencies(const std::vector<double>& truth,
                        const std::vector<TrialEstimate>& trials) {
  const int L = static_cast<int>(truth.size());
  double total = 0.0;
  for (const auto& trial : trials) {
    const auto match = assign_trial(truth, trial.frequencies);
    for (int l = 0; l < L; ++l) {
      const double d = wrap_distance(truth[l], trial.frequencies[match[l]]);
      total += d * d;
    }
  }
  return std::sqrt(total / (static_cast<double>(L) * trials.size()));
}

double bias_frequencies(const std::vector<double>& truth,
                        const std::vector<TrialEstimate>& trials) {
  const int L = static_cast<int>(truth.size());
  std::vector<double> mean(L, 0.0);
  for (const auto& trial : trials) {
    const auto match = assign_trial(truth, trial.frequencies);
    for (int l = 0; l < L; ++l) mean[l] += trial.frequencies[match[l]];
  }
  double total = 0.0;
  for (int l = 0; l < L; ++l) {
    const double dev = truth[l] - mean[l] / static_cast<double>(trials.size());
    total += dev * dev;
  }
  return std::sqrt(total / L);
}

double rmse_shifts(const std::vector<double>& truth_freqs,
                   const std::vector<Eigen::VectorXcd>& truth_shifts,
                   const std::vector<TrialEstimate>& trials) {
  const int L = static_cast<int>(truth_freqs.size());
  const int P = static_cast<int>(truth_shifts.at(0).size());
  if (P <= 1) return 0.0;
  double total = 0.0;
  for (const auto& trial : trials) {
    const auto match = assign_trial(truth_freqs, trial.frequencies);
    for (int l = 0; l < L; ++l) {
      total += (truth_shifts[l] - trial.shifts[match[l]]).squaredNorm();
    }
  }
  return std::sqrt(total / (static_cast<double>(L) * trials.size() * (P - 1)));
}

Estimator estimator_from_name(const std::string& name) {
  if (name == "cobras-grid") return Estimator::cobras_grid;
  if (name == "cobras-gridless") return Estimator::cobras_gridless;
  if (name == "lnuc1-reference") return Estimator::lnuc1_reference;
  throw std::invalid_argument("unknown estimator: " + name);
}

std::string estimator_name(Estimator est) {
  switch (est) {
    case Estimator::cobras_grid: return "cobras-grid";
    case Estimator::cobras_gridless: return "cobras-gridless";
    case Estimator::lnuc1_reference: return "lnuc1-reference";
  }
  return "unknown";
}

void ScenarioConfig::validate() const {
  geometry.validate();
  sources.validate();
  if (grid_size < 1) throw std::invalid_argument("grid size must be positive");
  if (trials < 1) throw std::invalid_argument("need at least one trial");
  if (sweep_values.empty()) throw std::invalid_argument("sweep value list is empty");
  if (sweep_variable == SweepVariable::separation && sources.source_count() != 2) {
    throw std::invalid_argument("separation sweep requires exactly two sources");
  }
}

namespace {

const char* sweep_name(SweepVariable v) {
  switch (v) {
    case SweepVariable::snapshots: return "snapshots";
    case SweepVariable::snr: return "snr";
    case SweepVariable::separation: return "separation";
    case SweepVariable::correlation: return "correlation";
  }
  return "unknown";
}

SweepVariable sweep_from_name(const std::string& name) {
  if (name == "snapshots") return SweepVariable::snapshots;
  if (name == "snr") return SweepVariable::snr;
  if (name == "separation") return SweepVariable::separation;
  if (name == "correlation") return SweepVariable::correlation;
  throw std::invalid_argument("unknown sweep variable: " + name);
}

SourceScenario apply_sweep(const SourceScenario& base, SweepVariable variable, double value) {
  SourceScenario scenario = base;
  switch (variable) {
    case SweepVariable::snapshots:
      scenario.snapshots = static_cast<int>(std::llround(value));
      break;
    case SweepVariable::snr:
      scenario.snr_db = value;
      break;
    case SweepVariable::separation:
      scenario.frequencies[1] = scenario.frequencies[0] - value;
      break;
    case SweepVariable::correlation:
      scenario.correlation = source_covariance(scenario.source_count(), value);
      break;
  }
  return scenario;
}

TrialEstimate run_gridless_trial(const Eigen::MatrixXcd& Y, const ArrayGeometry& geom,
                                 double lambda, int L, StableRng& pad_rng,
                                 const conic::SolveOptions& options) {
  TrialEstimate trial;
  const SampleCovariance R = sample_covariance(Y);
  const GramCertificate cert = solve_gridless_dual(R.data, geom, lambda, options);
  trial.solver_residual =
      std::max(cert.dual.diag.primal_residual, cert.dual.diag.dual_residual);
  trial.failed = cert.dual.diag.status == conic::SolveStatus::infeasible_detected ||
                 (cert.dual.diag.status == conic::SolveStatus::max_iterations &&
                  trial.solver_residual > 1e-3);
  const MatrixPolynomial poly = dual_polynomial(cert.dual.upsilon0, geom, cert.baseline);
  const RootSelection roots = root_dual_polynomial(poly, L);
  const FrequencyRecovery rec = frequencies_from_roots(roots.roots, cert.baseline.delta);
  trial.frequencies = rec.frequencies;
  for (double nu : trial.frequencies) {
    try {
      trial.shifts.push_back(gridless_shift_vector(poly, nu, cert.baseline.delta));
    } catch (const DegenerateShiftError&) {
      trial.shifts.push_back(Eigen::VectorXcd::Ones(geom.subarray_count()));
    }
  }
  while (static_cast<int>(trial.frequencies.size()) < L) {
    trial.frequencies.push_back(pad_rng.uniform(-1.0, 1.0));
    trial.shifts.push_back(Eigen::VectorXcd::Ones(geom.subarray_count()));
  }
  return trial;
}

TrialEstimate run_trial(const ScenarioConfig& config, const SourceScenario& scenario,
                        const FrequencyGrid& grid, double lambda, std::uint64_t data_seed,
                        std::uint64_t pad_seed) {
  const int L = scenario.source_count();
  SourceScenario with_seed = scenario;
  with_seed.seed = data_seed;
  const Eigen::MatrixXcd Y = simulate_snapshots(config.geometry, with_seed);

  conic::SolveOptions options;
  options.tolerance = config.solver_tolerance;
  options.max_iterations = config.solver_max_iterations;

  StableRng pad_rng(pad_seed);
  const auto start = std::chrono::steady_clock::now();
  TrialEstimate trial;
  if (config.estimator == Estimator::cobras_gridless) {
    trial = run_gridless_trial(Y, config.geometry, lambda, L, pad_rng, options);
  } else {
    const GridEstimator method = config.estimator == Estimator::lnuc1_reference
                                     ? GridEstimator::lnuc1_reference
                                     : GridEstimator::cobras;
    const GridEstimate est =
        estimate_grid(Y, config.geometry, grid, lambda, L, pad_rng, method, options);
    trial.frequencies = est.frequencies;
    trial.shifts = est.shifts;
    trial.solver_residual = std::max(est.diag.primal_residual, est.diag.dual_residual);
    trial.failed = est.diag.status == conic::SolveStatus::infeasible_detected ||
                   (est.diag.status == conic::SolveStatus::max_iterations &&
                    trial.solver_residual > 1e-3);
  }
  trial.runtime_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  trial.seed = data_seed;
  return trial;
}

}  // namespace

ScenarioResult run_scenario(const ScenarioConfig& config) {
  config.validate();
  const FrequencyGrid grid = FrequencyGrid::uniform(config.grid_size);
  ScenarioResult result;

  for (std::size_t si = 0; si < config.sweep_values.size(); ++si) {
    const double value = config.sweep_values[si];
    const SourceScenario scenario = apply_sweep(config.sources, config.sweep_variable, value);
    scenario.validate();
    const double sigma = noise_sigma_from_snr_db(scenario.snr_db);
    const double lambda = select_lambda(sigma, config.geometry);
    const int T = config.trials;

    std::vector<TrialEstimate> trials(T);
    std::atomic<int> next{0};
    std::atomic<bool> threw{false};
    auto worker = [&]() {
      for (int t = next.fetch_add(1); t < T; t = next.fetch_add(1)) {
        if (threw.load()) return;
        try {
          const std::uint64_t data_seed = derive_seed(config.master_seed, si, 2 * t);
          const std::uint64_t pad_seed = derive_seed(config.master_seed, si, 2 * t + 1);
          trials[t] = run_trial(config, scenario, grid, lambda, data_seed, pad_seed);
        } catch (...) {
          trials[t].failed = true;
          threw.store(true);
        }
      }
    };
    {
      std::thread other(worker);
      worker();
      other.join();
    }

    std::vector<TrialEstimate> good;
    SweepRow row;
    row.sweep_value = value;
    double runtime = 0.0;
    for (const auto& trial : trials) {
      runtime += trial.runtime_s;
      if (trial.failed) {
        row.failures += 1;
      } else {
        good.push_back(trial);
      }
    }
    row.mean_runtime_s = runtime / T;
    if (!good.empty()) {
      std::vector<Eigen::VectorXcd> truth_shifts;
      for (double mu : scenario.frequencies) {
        truth_shifts.push_back(shift_vector(config.geometry, mu));
      }
      row.rmse = rmse_frequencies(scenario.frequencies, good);
      row.bias = bias_frequencies(scenario.frequencies, good);
      row.rmse_phi = rmse_shifts(scenario.frequencies, truth_shifts, good);
    }
    result.rows.push_back(row);
    if (row.failures * 10 > T) {
      result.aborted = true;
      return result;
    }
  }
  return result;
}

std::string to_csv(const ScenarioResult& result) {
  std::string out = "sweep_value,rmse,bias,rmse_phi,failures,mean_runtime_s\n";
  char line[256];
  for (const auto& row : result.rows) {
    std::snprintf(line, sizeof(line), "%.12g,%.12g,%.12g,%.12g,%d,%.6g\n", row.sweep_value,
                  row.rmse, row.bias, row.rmse_phi, row.failures, row.mean_runtime_s);
    out += line;
  }
  return out;
}

GridEstimate spectrum_estimate(const ScenarioConfig& config) {
  config.validate();
  const FrequencyGrid grid = FrequencyGrid::uniform(config.grid_size);
  SourceScenario scenario = config.sources;
  scenario.seed = derive_seed(config.master_seed, 0, 0);
  const Eigen::MatrixXcd Y = simulate_snapshots(config.geometry, scenario);
  const double sigma = noise_sigma_from_snr_db(scenario.snr_db);
  const double lambda = select_lambda(sigma, config.geometry);

  conic::SolveOptions options;
  options.tolerance = config.solver_tolerance;
  options.max_iterations = config.solver_max_iterations;
  StableRng pad_rng(derive_seed(config.master_seed, 0, 1));
  const GridEstimator method = config.estimator == Estimator::lnuc1_reference
                                   ? GridEstimator::lnuc1_reference
                                   : GridEstimator::cobras;
  return estimate_grid(Y, config.geometry, grid, lambda, scenario.source_count(), pad_rng, method,
                       options);
}

void to_json(nlohmann::json& j, const ScenarioConfig& config) {
  j = nlohmann::json::object();
  j["geometry"] = config.geometry;
  nlohmann::json sources;
  sources["frequencies"] = config.sources.frequencies;
  if (config.sources.correlation.isIdentity(1e-14)) {
    sources["correlation"] = 0.0;
  } else if (config.sources.source_count() == 2 &&
             config.sources.correlation(0, 1).imag() == 0.0) {
    sources["correlation"] = config.sources.correlation(0, 1).real();
  } else {
    auto rows = nlohmann::json::array();
    for (int a = 0; a < config.sources.correlation.rows(); ++a) {
      auto r = nlohmann::json::array();
      for (int b = 0; b < config.sources.correlation.cols(); ++b) {
        r.push_back(config.sources.correlation(a, b).real());
      }
      rows.push_back(std::move(r));
    }
    sources["correlation"] = std::move(rows);
  }
  sources["snr_db"] = config.sources.snr_db;
  sources["snapshots"] = config.sources.snapshots;
  j["sources"] = std::move(sources);
  j["estimator"] = estimator_name(config.estimator);
  j["grid_size"] = config.grid_size;
  j["trials"] = config.trials;
  j["sweep"] = {{"variable", sweep_name(config.sweep_variable)}, {"values", config.sweep_values}};
  j["output"] = config.output_path;
  j["seed"] = config.master_seed;
  j["solver_tolerance"] = config.solver_tolerance;
  j["solver_max_iterations"] = config.solver_max_iterations;
}

void from_json(const nlohmann::json& j, ScenarioConfig& config) {
  config = ScenarioConfig{};
  config.geometry = j.at("geometry").get<ArrayGeometry>();
  const auto& sources = j.at("sources");
  config.sources.frequencies = sources.at("frequencies").get<std::vector<double>>();
  const int L = static_cast<int>(config.sources.frequencies.size());
  if (!sources.contains("correlation")) {
    config.sources.correlation = Eigen::MatrixXcd::Identity(L, L);
  } else if (sources.at("correlation").is_number()) {
    config.sources.correlation = source_covariance(L, sources.at("correlation").get<double>());
  } else {
    const auto rows = sources.at("correlation").get<std::vector<std::vector<double>>>();
    config.sources.correlation.resize(L, L);
    for (int a = 0; a < L; ++a) {
      for (int b = 0; b < L; ++b) config.sources.correlation(a, b) = rows.at(a).at(b);
    }
  }
  config.sources.snr_db = sources.at("snr_db").get<double>();
  config.sources.snapshots = sources.at("snapshots").get<int>();
  config.estimator = estimator_from_name(j.at("estimator").get<std::string>());
  config.grid_size = j.at("grid_size").get<int>();
  config.trials = j.at("trials").get<int>();
  config.sweep_variable = sweep_from_name(j.at("sweep").at("variable").get<std::string>());
  config.sweep_values = j.at("sweep").at("values").get<std::vector<double>>();
  if (j.contains("output")) config.output_path = j.at("output").get<std::string>();
  if (j.contains("seed")) config.master_seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("solver_tolerance")) {
    config.solver_tolerance = j.at("solver_tolerance").get<double>();
  }
  if (j.contains("solver_max_iterations")) {
    config.solver_max_iterations = j.at("solver_max_iterations").get<int>();
  }
  config.validate();
}

}  // namespace cobras::bench

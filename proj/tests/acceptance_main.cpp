// Acceptance suite: one pass/fail line per criterion, nonzero exit on any
// failure. Run through ctest or directly; expect ~15-30 minutes total.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "cobras/bench.hpp"
#include "cobras/gridless.hpp"
#include "cobras/norms.hpp"
#include "cobras/rng.hpp"
#include "cobras/signal_sim.hpp"

using namespace cobras;
using Complex = std::complex<double>;

namespace {

constexpr double kPi = 3.14159265358979323846;

ArrayGeometry wide_aperture_geometry() {
  return ArrayGeometry::from_global_positions(
      {{0.0, 0.6, 2.3}, {12.2, 13.0}, {21.5, 22.8, 23.6}, {37.6, 38.5, 41.1}});
}

ArrayGeometry ula_geometry() {
  return ArrayGeometry::from_global_positions({{0, 1, 2}, {3, 4, 5}, {6, 7, 8}});
}

ArrayGeometry correlated_geometry() {
  return ArrayGeometry::from_global_positions(
      {{0.0, 1.0, 3.0}, {17.4, 18.4, 19.4, 21.4}, {24.8, 25.8}},
      {Complex(1.0, 0.0), 0.7 * std::polar(1.0, 2.0 * kPi / 3.0),
       1.2 * std::polar(1.0, kPi / 4.0)});
}

// random geometry with M sensors split into P subarrays
ArrayGeometry random_geometry(int M, int P, StableRng& rng) {
  std::vector<int> sizes(P, 1);
  for (int extra = 0; extra < M - P; ++extra) sizes[rng.uniform_index(P)] += 1;
  std::vector<std::vector<double>> pos(P);
  double origin = 0.0;
  for (int p = 0; p < P; ++p) {
    double x = origin;
    for (int m = 0; m < sizes[p]; ++m) {
      pos[p].push_back(x);
      x += 0.5 + 1.5 * rng.uniform();
    }
    origin = x + 4.0 * rng.uniform();
  }
  std::vector<Complex> offsets(P, Complex(1.0, 0.0));
  for (int p = 1; p < P; ++p) {
    offsets[p] = (0.6 + 0.8 * rng.uniform()) * std::polar(1.0, rng.uniform(-kPi, kPi));
  }
  return ArrayGeometry::from_global_positions(pos, offsets);
}

Eigen::MatrixXcd random_instance_snapshots(const ArrayGeometry& geom, int N, StableRng& rng) {
  const int L = 1 + static_cast<int>(rng.uniform_index(2));
  std::vector<double> mus;
  for (int l = 0; l < L; ++l) mus.push_back(rng.uniform(-0.95, 0.95));
  SourceScenario sc = SourceScenario::make(mus, 8.0, N, rng.next_u64());
  return simulate_snapshots(geom, sc);
}

double lnuc1_objective(const Eigen::MatrixXcd& Y, const ArrayGeometry& geom,
                       const FrequencyGrid& grid, double lambda, const ExtendedSignal& Q) {
  const Eigen::MatrixXcd B = dictionary_matrix(geom, grid);
  return 0.5 * (B * Q.stacked() - Y).squaredNorm() +
         lambda * std::sqrt(static_cast<double>(Q.snapshots())) * lnuc1_norm(Q.blocks);
}

struct Outcome {
  bool pass = true;
  std::string detail;

  void fail(const std::string& msg) {
    pass = false;
    if (!detail.empty()) detail += "; ";
    detail += msg;
  }
  void note(const std::string& msg) {
    if (detail.empty()) detail = msg;
  }
};

std::string fmt(const char* pattern, double a, double b = 0.0, double c = 0.0) {
  char buf[160];
  std::snprintf(buf, sizeof(buf), pattern, a, b, c);
  return buf;
}

conic::SolveOptions tight_options() {
  conic::SolveOptions opt;
  opt.tolerance = 1e-8;
  opt.max_iterations = 100000;
  return opt;
}

// -------------------------------------------------------------------------
Outcome criterion_theorem_equivalence() {
  Outcome out;
  StableRng rng(101);
  double worst_value = 0.0, worst_recovery = 0.0, worst_identity = 0.0;
  for (int instance = 0; instance < 20; ++instance) {
    const int P = 1 + static_cast<int>(rng.uniform_index(3));
    const int M = std::max(P, 4 + static_cast<int>(rng.uniform_index(5)));
    const int K = 5 + static_cast<int>(rng.uniform_index(6));
    const int N = 2 + static_cast<int>(rng.uniform_index(3));
    const double lambda = (instance % 2 == 0) ? 0.1 : 1.0;
    const ArrayGeometry geom = random_geometry(M, P, rng);
    const FrequencyGrid grid = FrequencyGrid::uniform(K);
    const Eigen::MatrixXcd Y = random_instance_snapshots(geom, N, rng);

    const Lnuc1Result ref = solve_lnuc1(Y, geom, grid, lambda, tight_options());
    const SampleCovariance R = sample_covariance(Y);
    const CobrasResult cov =
        solve_cobras_covariance_form(R.data, N, geom, grid, lambda, tight_options());

    const double scaled = 0.5 * lambda * N * cov.objective;
    const double value_dev = std::abs(ref.objective - scaled) / std::abs(scaled);
    worst_value = std::max(worst_value, value_dev);

    const ExtendedSignal Q = recover_extended_signal(cov.S, Y, geom, grid, lambda);
    const double rec_obj = lnuc1_objective(Y, geom, grid, lambda, Q);
    const double rec_dev = std::abs(rec_obj - ref.objective) / std::abs(ref.objective);
    worst_recovery = std::max(worst_recovery, rec_dev);

    const double root_n = std::sqrt(static_cast<double>(N));
    for (int k = 0; k < K; ++k) {
      const Eigen::MatrixXcd rhs =
          conic::psd_sqrt((Q.blocks[k] * Q.blocks[k].adjoint()).eval()) / root_n;
      const double dev = (cov.S.blocks[k] - rhs).cwiseAbs().maxCoeff() /
                         (1.0 + cov.S.blocks[k].cwiseAbs().maxCoeff());
      worst_identity = std::max(worst_identity, dev);
    }
  }
  if (worst_value > 1e-4) out.fail(fmt("value relation dev %.2e > 1e-4", worst_value));
  if (worst_recovery > 1e-4) out.fail(fmt("recovery objective dev %.2e > 1e-4", worst_recovery));
  if (worst_identity > 1e-3) out.fail(fmt("block identity dev %.2e > 1e-3", worst_identity));
  out.note(fmt("value %.1e, recovery %.1e, identity %.1e", worst_value, worst_recovery,
               worst_identity));
  return out;
}

// -------------------------------------------------------------------------
Outcome criterion_corollary_crosscheck() {
  Outcome out;
  StableRng rng(202);
  double worst_obj = 0.0, worst_spec = 0.0;
  for (int instance = 0; instance < 10; ++instance) {
    const int P = 1 + static_cast<int>(rng.uniform_index(3));
    const int M = std::max(P + 1, 4 + static_cast<int>(rng.uniform_index(5)));
    const int K = 5 + static_cast<int>(rng.uniform_index(6));
    const int N = (instance < 5) ? 2 + static_cast<int>(rng.uniform_index(std::max(1, M - 2)))
                                 : M + static_cast<int>(rng.uniform_index(8));
    const double lambda = 0.5;
    const ArrayGeometry geom = random_geometry(M, P, rng);
    const FrequencyGrid grid = FrequencyGrid::uniform(K);
    const Eigen::MatrixXcd Y = random_instance_snapshots(geom, N, rng);
    const SampleCovariance R = sample_covariance(Y);

    const CobrasResult snap = solve_cobras_snapshot_form(Y, geom, grid, lambda, tight_options());
    const CobrasResult cov =
        solve_cobras_covariance_form(R.data, N, geom, grid, lambda, tight_options());

    worst_obj = std::max(worst_obj,
                         std::abs(snap.objective - cov.objective) / std::abs(cov.objective));
    const Eigen::VectorXd ps = block_spectrum(snap.S);
    const Eigen::VectorXd pc = block_spectrum(cov.S);
    worst_spec = std::max(worst_spec,
                          (ps - pc).cwiseAbs().maxCoeff() / (1.0 + pc.cwiseAbs().maxCoeff()));
  }
  if (worst_obj > 1e-4) out.fail(fmt("objective dev %.2e > 1e-4", worst_obj));
  if (worst_spec > 1e-4) out.fail(fmt("spectrum dev %.2e > 1e-4", worst_spec));
  out.note(fmt("objective %.1e, spectrum %.1e", worst_obj, worst_spec));
  return out;
}

// -------------------------------------------------------------------------
Outcome criterion_duality() {
  Outcome out;
  StableRng rng(303);
  double worst_gap = 0.0, worst_slack = 0.0;
  for (int instance = 0; instance < 5; ++instance) {
    const int P = 1 + static_cast<int>(rng.uniform_index(3));
    const int M = std::max(P + 1, 4 + static_cast<int>(rng.uniform_index(5)));
    const int K = 5 + static_cast<int>(rng.uniform_index(6));
    const int N = 3 + static_cast<int>(rng.uniform_index(4));
    const double lambda = 0.5;
    const ArrayGeometry geom = random_geometry(M, P, rng);
    const FrequencyGrid grid = FrequencyGrid::uniform(K);
    const Eigen::MatrixXcd Y = random_instance_snapshots(geom, N, rng);
    const SampleCovariance R = sample_covariance(Y);

    const CobrasResult primal =
        solve_cobras_covariance_form(R.data, N, geom, grid, lambda, tight_options());
    const DualCertificate dual = solve_grid_dual(R.data, geom, grid, lambda, tight_options());

    worst_gap = std::max(worst_gap, std::abs(dual.objective - primal.objective) /
                                        (1.0 + std::abs(primal.objective)));
    for (int k = 0; k < K; ++k) {
      const Eigen::MatrixXcd Bk = subarray_block_matrix(geom, grid.points[k]);
      Eigen::MatrixXcd slack = -Bk.adjoint() * dual.upsilon0 * Bk;
      slack.diagonal().array() += 1.0;
      const double resid = (primal.S.blocks[k] * slack).trace().real();
      const double tr = primal.S.blocks[k].real().trace();
      worst_slack = std::max(worst_slack, std::abs(resid) / (1.0 + tr));
    }
  }
  if (worst_gap > 1e-4) out.fail(fmt("duality gap %.2e > 1e-4", worst_gap));
  if (worst_slack > 1e-4) out.fail(fmt("slackness residual %.2e > 1e-4", worst_slack));

  // gridless dual against a dense-grid dual on a common-baseline array
  const ArrayGeometry geom = ula_geometry();
  SourceScenario sc = SourceScenario::make({0.505, 0.205}, 10.0, 20, 907);
  const Eigen::MatrixXcd Y = simulate_snapshots(geom, sc);
  const SampleCovariance R = sample_covariance(Y);
  const double lambda = select_lambda(noise_sigma_from_snr_db(sc.snr_db), geom);
  conic::SolveOptions big = tight_options();
  big.tolerance = 1e-7;
  const GramCertificate gl = solve_gridless_dual(R.data, geom, lambda, big);
  const DualCertificate gd =
      solve_grid_dual(R.data, geom, FrequencyGrid::uniform(400), lambda, big);
  const double gl_dev =
      std::abs(gl.dual.objective - gd.objective) / (1.0 + std::abs(gd.objective));
  if (gl.dual.objective > gd.objective + 1e-5) {
    out.fail(fmt("continuum objective %.6f exceeds grid objective %.6f", gl.dual.objective,
                 gd.objective));
  }
  if (gl_dev > 1e-3) out.fail(fmt("gridless vs dense grid dev %.2e > 1e-3", gl_dev));
  out.note(fmt("gap %.1e, slack %.1e, gridless dev %.1e", worst_gap, worst_slack, gl_dev));
  return out;
}

// -------------------------------------------------------------------------
Outcome criterion_factorization_oracle() {
  Outcome out;
  StableRng rng(404);
  double worst_attain = 0.0;
  double worst_margin = 0.0;  // most negative slack of feasible factorizations
  for (int instance = 0; instance < 50; ++instance) {
    const int P = 1 + static_cast<int>(rng.uniform_index(4));
    const int N = 1 + static_cast<int>(rng.uniform_index(5));
    Eigen::MatrixXcd Q(P, N);
    for (int i = 0; i < P; ++i) {
      for (int j = 0; j < N; ++j) Q(i, j) = rng.complex_normal();
    }
    const double nn = nuclear_norm(Q);
    const auto [gamma, g] = lemma1_factors(Q);
    worst_attain = std::max(
        worst_attain, std::abs(0.5 * (gamma.squaredNorm() + g.squaredNorm()) - nn));

    const int r = static_cast<int>(gamma.cols());
    Eigen::MatrixXcd T(r, r);
    for (int i = 0; i < r; ++i) {
      for (int j = 0; j < r; ++j) T(i, j) = rng.complex_normal();
    }
    T += 2.5 * Eigen::MatrixXcd::Identity(r, r);
    const Eigen::MatrixXcd gamma2 = gamma * T;
    const Eigen::MatrixXcd g2 = T.inverse() * g;
    const double other = 0.5 * (gamma2.squaredNorm() + g2.squaredNorm());
    worst_margin = std::min(worst_margin, other - nn);
  }
  if (worst_attain > 1e-9) out.fail(fmt("factor construction off by %.2e > 1e-9", worst_attain));
  if (worst_margin < -1e-9) {
    out.fail(fmt("feasible factorization beat the norm by %.2e", -worst_margin));
  }
  out.note(fmt("attainment %.1e, best challenger margin %+.1e", worst_attain, worst_margin));
  return out;
}

// -------------------------------------------------------------------------
Outcome criterion_gridless_end_to_end() {
  Outcome out;
  const ArrayGeometry geom = ula_geometry();

  // noiseless rooting accuracy
  {
    SourceScenario sc = SourceScenario::make({0.505, 0.205}, 300.0, 50, 1801);
    const Eigen::MatrixXcd Y = simulate_snapshots(geom, sc);
    const SampleCovariance R = sample_covariance(Y);
    conic::SolveOptions opt = tight_options();
    const GramCertificate cert = solve_gridless_dual(R.data, geom, 0.01, opt);
    const MatrixPolynomial poly = dual_polynomial(cert.dual.upsilon0, geom, cert.baseline);
    const RootSelection sel = root_dual_polynomial(poly, 2);
    if (sel.roots.size() != 2) {
      out.fail("root selection did not produce two roots");
    } else {
      std::vector<double> est = frequencies_from_roots(sel.roots, cert.baseline.delta).frequencies;
      std::sort(est.begin(), est.end());
      const double err = std::max(std::abs(est[0] - 0.205), std::abs(est[1] - 0.505));
      if (err > 1e-3) out.fail(fmt("noiseless root error %.2e > 1e-3", err));
      out.note(fmt("noiseless root error %.1e", err));
    }
  }

  // Monte Carlo error level at moderate noise
  {
    bench::ScenarioConfig config;
    config.geometry = geom;
    config.sources = SourceScenario::make({0.505, 0.205}, 20.0, 50, 0);
    config.estimator = bench::Estimator::cobras_gridless;
    config.grid_size = 200;
    config.trials = 100;
    config.sweep_variable = bench::SweepVariable::separation;
    config.sweep_values = {0.3};
    config.master_seed = 515;
    const bench::ScenarioResult result = bench::run_scenario(config);
    if (result.aborted || result.rows.empty()) {
      out.fail("scenario aborted");
    } else {
      const double rmse = result.rows[0].rmse;
      if (rmse > 0.005) out.fail(fmt("gridless RMSE %.4f > 0.005", rmse));
      out.note(out.detail + fmt(", RMSE %.4f (<= 0.005)", rmse));
    }
  }
  return out;
}

// -------------------------------------------------------------------------
Outcome criterion_snapshot_sweep() {
  Outcome out;
  bench::ScenarioConfig config;
  config.geometry = wide_aperture_geometry();
  config.sources = SourceScenario::make({0.5011, 0.4672, -0.2007}, 6.0, 100, 0);
  config.estimator = bench::Estimator::cobras_grid;
  config.grid_size = 400;
  config.trials = 100;
  config.sweep_variable = bench::SweepVariable::snapshots;
  config.sweep_values = {30, 100, 300};
  config.master_seed = 626;
  const bench::ScenarioResult result = bench::run_scenario(config);
  if (result.aborted || result.rows.size() != 3) {
    out.fail("scenario aborted");
    return out;
  }
  const double r30 = result.rows[0].rmse;
  const double r100 = result.rows[1].rmse;
  const double r300 = result.rows[2].rmse;
  if (r30 < 0.0047 || r30 > 0.019) out.fail(fmt("RMSE(N=30) %.4f outside [0.0047, 0.019]", r30));
  if (r100 < 0.0026 || r100 > 0.0106) {
    out.fail(fmt("RMSE(N=100) %.4f outside [0.0026, 0.0106]", r100));
  }
  int inversions = 0;
  if (r100 > r30) ++inversions;
  if (r300 > r100) ++inversions;
  if (inversions > 1) out.fail("trend not monotone within one inversion");
  out.note(fmt("RMSE %.4f / %.4f / %.4f for N=30/100/300", r30, r100, r300));
  return out;
}

// -------------------------------------------------------------------------
Outcome criterion_snr_threshold() {
  Outcome out;
  bench::ScenarioConfig config;
  config.geometry = wide_aperture_geometry();
  config.sources = SourceScenario::make({0.5011, 0.4672, -0.2007}, 6.0, 20, 0);
  config.estimator = bench::Estimator::cobras_grid;
  config.grid_size = 400;
  config.trials = 100;
  config.sweep_variable = bench::SweepVariable::snr;
  config.sweep_values = {-8, 8};
  config.master_seed = 737;
  const bench::ScenarioResult result = bench::run_scenario(config);
  if (result.aborted || result.rows.size() != 2) {
    out.fail("scenario aborted");
    return out;
  }
  const double low = result.rows[0].rmse;
  const double high = result.rows[1].rmse;
  if (high > 0.02) out.fail(fmt("RMSE(+8dB) %.4f > 0.02", high));
  if (low < 0.1) out.fail(fmt("RMSE(-8dB) %.4f < 0.1", low));
  out.note(fmt("RMSE %.4f @ -8dB, %.4f @ +8dB", low, high));
  return out;
}

// -------------------------------------------------------------------------
Outcome criterion_correlated_sources() {
  Outcome out;
  bench::ScenarioConfig config;
  config.geometry = correlated_geometry();
  config.sources = SourceScenario::make({0.505, 0.105}, 0.0, 30, 0);
  config.estimator = bench::Estimator::cobras_grid;
  config.grid_size = 200;
  config.trials = 100;
  config.sweep_variable = bench::SweepVariable::correlation;
  config.sweep_values = {1.0};
  config.master_seed = 848;
  const bench::ScenarioResult result = bench::run_scenario(config);
  if (result.aborted || result.rows.empty()) {
    out.fail("scenario aborted");
    return out;
  }
  const double rmse = result.rows[0].rmse;
  if (rmse > 0.07) out.fail(fmt("coherent-source RMSE %.4f > 0.07", rmse));
  out.note(fmt("RMSE %.4f at full correlation (<= 0.07)", rmse));
  return out;
}

// -------------------------------------------------------------------------
Outcome criterion_single_subarray_reduction() {
  Outcome out;
  StableRng rng(909);
  double worst = 0.0;
  for (int instance = 0; instance < 10; ++instance) {
    const int M = 4 + static_cast<int>(rng.uniform_index(5));
    const int K = 6 + static_cast<int>(rng.uniform_index(5));
    const int N = 2 + static_cast<int>(rng.uniform_index(5));
    const ArrayGeometry geom = random_geometry(M, 1, rng);
    const FrequencyGrid grid = FrequencyGrid::uniform(K);
    const Eigen::MatrixXcd Y = random_instance_snapshots(geom, N, rng);
    const SampleCovariance R = sample_covariance(Y);
    const double lambda = 0.5;

    const CobrasResult compact =
        solve_cobras_covariance_form(R.data, N, geom, grid, lambda, tight_options());
    const SparrowResult diag = solve_sparrow(R.data, N, geom, grid, lambda, tight_options());
    for (int k = 0; k < K; ++k) {
      worst = std::max(worst, std::abs(compact.S.blocks[k](0, 0).real() - diag.s(k)) /
                                  (1.0 + diag.s.maxCoeff()));
    }
  }
  if (worst > 1e-4) out.fail(fmt("spectrum deviation %.2e > 1e-4", worst));
  out.note(fmt("worst spectrum deviation %.1e", worst));
  return out;
}

// -------------------------------------------------------------------------
Outcome criterion_complexity_direction() {
  Outcome out;
  const ArrayGeometry geom = ula_geometry();
  const FrequencyGrid grid = FrequencyGrid::uniform(100);
  const double lambda = select_lambda(noise_sigma_from_snr_db(0.0), geom);

  // fixed iteration budget isolates the per-iteration complexity
  conic::SolveOptions budget;
  budget.tolerance = 1e-14;
  budget.max_iterations = 150;
  budget.check_interval = 150;

  auto timed = [&](const std::function<void()>& fn) {
    const auto start = std::chrono::steady_clock::now();
    fn();
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  };

  double cov_time[2], ref_time[2];
  int idx = 0;
  for (int N : {10, 100}) {
    SourceScenario sc = SourceScenario::make({0.505, -0.205}, 0.0, N, 4242);
    const Eigen::MatrixXcd Y = simulate_snapshots(geom, sc);
    const SampleCovariance R = sample_covariance(Y);
    cov_time[idx] = timed([&] {
      (void)solve_cobras_covariance_form(R.data, N, geom, grid, lambda, budget);
    });
    ref_time[idx] = timed([&] { (void)solve_lnuc1(Y, geom, grid, lambda, budget); });
    ++idx;
  }
  const double cov_ratio = std::max(cov_time[0], cov_time[1]) /
                           std::max(1e-9, std::min(cov_time[0], cov_time[1]));
  const double ref_ratio = ref_time[1] / std::max(1e-9, ref_time[0]);
  if (cov_ratio >= 2.0) out.fail(fmt("covariance-form time ratio %.2f >= 2", cov_ratio));
  if (ref_ratio <= 10.0) {
    out.fail(fmt("reference time ratio %.2f <= 10 (not superlinear in N)", ref_ratio));
  }
  out.note(fmt("covariance ratio %.2f, reference ratio %.1f over N=10->100", cov_ratio,
               ref_ratio));
  return out;
}

}  // namespace

int main() {
  struct Entry {
    const char* name;
    std::function<Outcome()> run;
  };
  const std::vector<Entry> criteria = {
      {"theorem equivalence", criterion_theorem_equivalence},
      {"corollary cross-check", criterion_corollary_crosscheck},
      {"duality suite", criterion_duality},
      {"factorization oracle", criterion_factorization_oracle},
      {"gridless end-to-end", criterion_gridless_end_to_end},
      {"snapshot sweep", criterion_snapshot_sweep},
      {"snr threshold", criterion_snr_threshold},
      {"correlated sources", criterion_correlated_sources},
      {"single-subarray reduction", criterion_single_subarray_reduction},
      {"complexity direction", criterion_complexity_direction},
  };

  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto start = std::chrono::steady_clock::now();
    Outcome out;
    try {
      out = criteria[i].run();
    } catch (const std::exception& err) {
      out.pass = false;
      out.detail = std::string("exception: ") + err.what();
    }
    const double dt =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("[%2zu/10] %-28s %s  (%s; %.1fs)\n", i + 1, criteria[i].name,
                out.pass ? "PASS" : "FAIL", out.detail.c_str(), dt);
    std::fflush(stdout);
    if (!out.pass) ++failures;
  }
  return failures;
}

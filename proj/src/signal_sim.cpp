#include "cobras/signal_sim.hpp"

#include <cmath>
#include <stdexcept>

#include "cobras/rng.hpp"

namespace cobras {

void SourceScenario::validate() const {
  if (frequencies.empty()) throw std::invalid_argument("scenario needs at least one source");
  for (double mu : frequencies) {
    if (!(mu >= -1.0 && mu < 1.0)) throw std::invalid_argument("source frequency outside [-1, 1)");
  }
  const int L = source_count();
  if (correlation.rows() != L || correlation.cols() != L) {
    throw std::invalid_argument("correlation template has wrong size");
  }
  if ((correlation - correlation.adjoint()).cwiseAbs().maxCoeff() > 1e-12) {
    throw std::invalid_argument("correlation template must be Hermitian");
  }
  for (int l = 0; l < L; ++l) {
    if (std::abs(correlation(l, l) - 1.0) > 1e-12) {
      throw std::invalid_argument("correlation template must have unit diagonal");
    }
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> eig(correlation, Eigen::EigenvaluesOnly);
  if (eig.eigenvalues().minCoeff() < -1e-10) {
    throw std::invalid_argument("correlation template must be PSD");
  }
  if (snapshots < 1) throw std::invalid_argument("need at least one snapshot");
}

SourceScenario SourceScenario::make(std::vector<double> frequencies, double snr_db, int snapshots,
                                    std::uint64_t seed, double rho) {
  SourceScenario s;
  const int L = static_cast<int>(frequencies.size());
  s.frequencies = std::move(frequencies);
  s.correlation = source_covariance(L, rho);
  s.snr_db = snr_db;
  s.snapshots = snapshots;
  s.seed = seed;
  s.validate();
  return s;
}

Eigen::MatrixXcd source_covariance(int L, double rho) {
  if (rho < 0.0 || rho > 1.0) throw std::invalid_argument("correlation must lie in [0, 1]");
  if (rho == 0.0) return Eigen::MatrixXcd::Identity(L, L);
  if (L != 2) throw std::invalid_argument("scalar correlation is defined for two sources");
  Eigen::MatrixXcd E(2, 2);
  E << 1.0, rho, rho, 1.0;
  return E;
}

double noise_sigma_from_snr_db(double snr_db) {
  return std::sqrt(std::pow(10.0, -snr_db / 10.0));
}

Eigen::MatrixXcd simulate_snapshots(const ArrayGeometry& geom, const SourceScenario& scenario) {
  geom.validate();
  scenario.validate();
  const int L = scenario.source_count();
  const int N = scenario.snapshots;
  const int M = geom.sensor_count();

  StableRng rng(scenario.seed);
  Eigen::MatrixXcd G(L, N);
  for (int l = 0; l < L; ++l) {
    for (int n = 0; n < N; ++n) G(l, n) = rng.complex_normal();
  }

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> eig(scenario.correlation);
  const Eigen::VectorXd clipped = eig.eigenvalues().cwiseMax(0.0);
  const Eigen::MatrixXcd sqrt_corr = eig.eigenvectors() *
                                     clipped.cwiseSqrt().asDiagonal() *
                                     eig.eigenvectors().adjoint();
  const Eigen::MatrixXcd psi = sqrt_corr * G;

  const double sigma = noise_sigma_from_snr_db(scenario.snr_db);
  Eigen::MatrixXcd noise(M, N);
  for (int m = 0; m < M; ++m) {
    for (int n = 0; n < N; ++n) noise(m, n) = sigma * rng.complex_normal();
  }

  const Eigen::MatrixXcd A = full_steering_matrix(geom, scenario.frequencies);
  return A * psi + noise;
}

SampleCovariance sample_covariance(const Eigen::MatrixXcd& Y) {
  const int N = static_cast<int>(Y.cols());
  if (N < 1) throw std::invalid_argument("need at least one snapshot");
  Eigen::MatrixXcd R = Y * Y.adjoint() / static_cast<double>(N);
  R = 0.5 * (R + R.adjoint()).eval();
  return SampleCovariance{std::move(R), N};
}

double select_lambda(double sigma, const ArrayGeometry& geom) {
  if (sigma < 0.0) throw std::invalid_argument("noise level must be nonnegative");
  int max_mp = 0;
  for (const auto& sub : geom.subarrays) max_mp = std::max(max_mp, sub.size());
  return sigma * std::sqrt(max_mp * std::log(static_cast<double>(geom.sensor_count())));
}

}  // namespace cobras

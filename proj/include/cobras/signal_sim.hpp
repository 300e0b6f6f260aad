#pragma once

#include <Eigen/Dense>
#include <cstdint>

#include "cobras/array_model.hpp"

namespace cobras {

// Source setup for one simulated measurement: spatial frequencies, a
// unit-diagonal correlation template for the source waveforms, SNR and
// snapshot count. The seed selects the waveform/noise realization.
struct SourceScenario {
  std::vector<double> frequencies;
  Eigen::MatrixXcd correlation;  // L x L Hermitian PSD, unit diagonal
  double snr_db = 0.0;
  int snapshots = 1;
  std::uint64_t seed = 0;

  int source_count() const { return static_cast<int>(frequencies.size()); }
  void validate() const;

  static SourceScenario make(std::vector<double> frequencies, double snr_db, int snapshots,
                             std::uint64_t seed, double rho = 0.0);
};

struct SampleCovariance {
  Eigen::MatrixXcd data;  // Hermitian M x M
  int snapshots = 0;
};

// Unit-diagonal source correlation template: [[1, rho], [rho, 1]] for two
// sources; identity for rho == 0 and any L. rho must lie in [0, 1].
Eigen::MatrixXcd source_covariance(int L, double rho);

// sigma^2 = 10^(-snr_db/10), with SNR = 1/sigma^2.
double noise_sigma_from_snr_db(double snr_db);

// Y = A(mu, eta) Psi + N with Psi drawn as correlation^(1/2) * G for i.i.d.
// circular complex Gaussian G, and white sensor noise of variance sigma^2.
// Bit-identical output for a fixed seed.
Eigen::MatrixXcd simulate_snapshots(const ArrayGeometry& geom, const SourceScenario& scenario);

// R = Y Y^H / N, symmetrized.
SampleCovariance sample_covariance(const Eigen::MatrixXcd& Y);

// Regularization heuristic: lambda = sigma * sqrt(max_p M_p * log M),
// natural logarithm.
double select_lambda(double sigma, const ArrayGeometry& geom);

}  // namespace cobras

#pragma once

#include <Eigen/Dense>
#include <optional>
#include <stdexcept>
#include <vector>

#include <json.hpp>

#include "cobras/array_model.hpp"
#include "cobras/conic.hpp"
#include "cobras/rng.hpp"

namespace cobras {

// K Hermitian PSD blocks of equal size P; the compact recovery variable.
struct BlockDiagPsd {
  int block_dim = 0;
  std::vector<Eigen::MatrixXcd> blocks;

  int block_count() const { return static_cast<int>(blocks.size()); }
  double trace() const;
  void validate(double tol = 1e-8) const;
};

// K stacked P x N blocks of the extended signal Q.
struct ExtendedSignal {
  std::vector<Eigen::MatrixXcd> blocks;

  int block_count() const { return static_cast<int>(blocks.size()); }
  int block_rows() const { return blocks.empty() ? 0 : static_cast<int>(blocks[0].rows()); }
  int snapshots() const { return blocks.empty() ? 0 : static_cast<int>(blocks[0].cols()); }
  Eigen::MatrixXcd stacked() const;
};

struct SolveDiagnostics {
  conic::SolveStatus status = conic::SolveStatus::max_iterations;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  double duality_gap = 0.0;
  int iterations = 0;
};

struct Lnuc1Result {
  ExtendedSignal Q;
  double objective = 0.0;  // (1/2)||BQ-Y||_F^2 + lambda sqrt(N) ||Q||_{*,1}
  SolveDiagnostics diag;
};

// Reference mixed-norm program: nuclear-norm epigraph blocks per grid point
// plus a Schur-complement epigraph for the quadratic data term.
Lnuc1Result solve_lnuc1(const Eigen::MatrixXcd& Y, const ArrayGeometry& geom,
                        const FrequencyGrid& grid, double lambda,
                        const conic::SolveOptions& options = {});

struct CobrasResult {
  BlockDiagPsd S;
  Eigen::MatrixXcd Z;      // auxiliary Hermitian block (N x N or M x M)
  double objective = 0.0;  // Tr((BSB^H + lambda I)^{-1} R) + Tr(S) at optimum
  SolveDiagnostics diag;
  // solver state for warm-starting another instance of the same layout
  Eigen::VectorXd warm_primal;
  Eigen::VectorXd warm_dual;
  double final_rho = 0.0;
};

// Measurement-domain form; SDP constraint of size (N+M), preferred for N < M.
CobrasResult solve_cobras_snapshot_form(const Eigen::MatrixXcd& Y, const ArrayGeometry& geom,
                                        const FrequencyGrid& grid, double lambda,
                                        const conic::SolveOptions& options = {});

// Covariance-domain form; SDP constraint of size 2M, preferred for N >= M.
CobrasResult solve_cobras_covariance_form(const Eigen::MatrixXcd& R_hat, int snapshots,
                                          const ArrayGeometry& geom, const FrequencyGrid& grid,
                                          double lambda, const conic::SolveOptions& options = {});

// Closed-form signal recovery Q = S B^H (B S B^H + lambda I)^{-1} Y.
ExtendedSignal recover_extended_signal(const BlockDiagPsd& S, const Eigen::MatrixXcd& Y,
                                       const ArrayGeometry& geom, const FrequencyGrid& grid,
                                       double lambda);

// Per-grid-point statistic p_k = max(0, tr(S_k)).
Eigen::VectorXd block_spectrum(const BlockDiagPsd& S);

struct PeakSelection {
  std::vector<int> support;          // grid indices, -1 for random padding
  std::vector<double> frequencies;   // exactly L values
  int random_padding = 0;
};

// Local maxima ranked by value; pads with seeded-random grid frequencies
// when fewer than L maxima exceed gamma * max(spectrum). Plateaus resolve
// to their lowest index.
PeakSelection select_peaks(const Eigen::VectorXd& spectrum, const FrequencyGrid& grid, int L,
                           StableRng& rng, double gamma = 1e-2);

// Unknown-model-order variant: every local maximum above the threshold.
std::vector<int> threshold_support(const Eigen::VectorXd& spectrum, double gamma = 1e-2);

struct DegenerateShiftError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct WaveformShift {
  Eigen::VectorXcd waveform;  // length N
  Eigen::VectorXcd shift;     // length P, first entry exactly 1
};

// Rank-one readout of a signal block: dominant singular triple, shift
// normalized to its first element. Throws DegenerateShiftError when that
// element vanishes.
WaveformShift recover_waveforms_and_shifts(const Eigen::MatrixXcd& Qk);

struct SparrowResult {
  Eigen::VectorXd s;  // K nonnegative grid powers
  double objective = 0.0;
  SolveDiagnostics diag;
};

// Fully calibrated special case: diagonal S over the steering dictionary
// A(nu, eta); coincides with the compact form when P = 1.
SparrowResult solve_sparrow(const Eigen::MatrixXcd& R_hat, int snapshots,
                            const ArrayGeometry& geom, const FrequencyGrid& grid, double lambda,
                            const conic::SolveOptions& options = {});

struct GridEstimate {
  Eigen::VectorXd spectrum;
  std::vector<int> support;
  std::vector<double> frequencies;
  std::vector<Eigen::VectorXcd> shifts;     // first entry 1
  std::vector<Eigen::VectorXcd> waveforms;  // length N
  BlockDiagPsd S;
  std::optional<ExtendedSignal> Q;
  double lambda = 0.0;
  double objective = 0.0;
  SolveDiagnostics diag;
};

enum class GridEstimator { cobras, lnuc1_reference };

// Full grid pipeline: solve (form chosen by N vs M for the compact method),
// spectrum, peak selection, and per-peak waveform/shift readout.
GridEstimate estimate_grid(const Eigen::MatrixXcd& Y, const ArrayGeometry& geom,
                           const FrequencyGrid& grid, double lambda, int L, StableRng& rng,
                           GridEstimator method = GridEstimator::cobras,
                           const conic::SolveOptions& options = {});

void to_json(nlohmann::json& j, const GridEstimate& est);

}  // namespace cobras

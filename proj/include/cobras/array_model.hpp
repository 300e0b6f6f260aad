#pragma once

#include <Eigen/Dense>
#include <complex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

namespace cobras {

using Complex = std::complex<double>;

// One internally calibrated subarray. Sensor positions are relative to the
// subarray's first sensor and expressed in half signal wavelengths, so
// intra_positions.front() == 0 and the entries increase strictly.
struct SubarrayGeometry {
  std::vector<double> intra_positions;

  int size() const { return static_cast<int>(intra_positions.size()); }
  void validate() const;
};

// A partly calibrated array: P subarrays, P-1 unknown displacements relative
// to the first subarray, and per-subarray gain/phase offsets (first fixed
// to 1). Displacements are in half signal wavelengths.
struct ArrayGeometry {
  std::vector<SubarrayGeometry> subarrays;
  std::vector<double> displacements;  // eta^(2) ... eta^(P)
  std::vector<Complex> offsets;       // alpha^(1) == 1, ..., alpha^(P)

  int subarray_count() const { return static_cast<int>(subarrays.size()); }
  int sensor_count() const;
  // Displacement of subarray p (0-based); subarray 0 sits at the origin.
  double displacement_of(int p) const { return p == 0 ? 0.0 : displacements[p - 1]; }
  Complex offset_of(int p) const { return offsets[p]; }
  // First global sensor row of subarray p.
  int subarray_row_offset(int p) const;
  void validate() const;

  // Contiguous layout from global sensor positions grouped per subarray;
  // offsets default to 1.
  static ArrayGeometry from_global_positions(const std::vector<std::vector<double>>& positions,
                                             std::vector<Complex> offsets = {});
};

// Candidate spatial frequencies nu_k in [-1, 1), strictly increasing.
struct FrequencyGrid {
  std::vector<double> points;

  int size() const { return static_cast<int>(points.size()); }
  void validate() const;

  // nu_k = -1 + 2k/K, k = 0..K-1.
  static FrequencyGrid uniform(int K);
};

// Common-baseline structure: every intra-subarray position is an integer
// multiple of delta. exponents[p][m] * delta == rho_m^(p); degree is the
// largest exponent over the array.
struct BaselineDecomposition {
  double delta = 0.0;
  std::vector<std::vector<int>> exponents;
  int degree = 0;
};

// Subarray steering vector [1, e^{j pi mu rho_2}, ...]; mu must lie in [-1, 1).
Eigen::VectorXcd subarray_steering_vector(const SubarrayGeometry& sub, double mu);

// M x P block-diagonal stack of the subarray steering vectors.
Eigen::MatrixXcd subarray_block_matrix(const ArrayGeometry& geom, double mu);

// M x (P*K) horizontal concatenation of subarray_block_matrix over the grid.
Eigen::MatrixXcd dictionary_matrix(const ArrayGeometry& geom, const FrequencyGrid& grid);

// Length-P vector [1, alpha^(2) e^{j pi mu eta^(2)}, ...].
Eigen::VectorXcd shift_vector(const ArrayGeometry& geom, double mu);

// (P*L) x L block-diagonal of shift vectors, one per frequency.
Eigen::MatrixXcd shift_matrix(const ArrayGeometry& geom, std::span<const double> mus);

// M x L steering matrix, column l = subarray_block_matrix(mu_l) * shift_vector(mu_l).
Eigen::MatrixXcd full_steering_matrix(const ArrayGeometry& geom, std::span<const double> mus);

// Largest delta >= delta_min such that all intra positions are integer
// multiples of delta (relative tolerance 1e-9). nullopt when no such
// baseline exists; the gridless path is then unsupported.
std::optional<BaselineDecomposition> common_baseline_decomposition(const ArrayGeometry& geom,
                                                                   double delta_min = 1e-3);

// 0/1 selection matrix J of size M x ((D+1)P): the row of sensor m in
// subarray p has its single 1 in column d_m^(p) * P + p. J applied to the
// monomial stack [I_P; z I_P; ...; z^D I_P] reproduces the subarray block
// matrix at z = e^{j pi mu delta}.
Eigen::MatrixXd selection_matrix(const ArrayGeometry& geom, const BaselineDecomposition& dec);

void to_json(nlohmann::json& j, const ArrayGeometry& geom);
void from_json(const nlohmann::json& j, ArrayGeometry& geom);

}  // namespace cobras

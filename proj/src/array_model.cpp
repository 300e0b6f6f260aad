#include "cobras/array_model.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace cobras {

namespace {

constexpr double kPi = std::numbers::pi;

void check_mu(double mu) {
  if (!(mu >= -1.0 && mu < 1.0)) {
    throw std::domain_error("spatial frequency must lie in [-1, 1)");
  }
}

Complex unit_phasor(double phase) { return {std::cos(phase), std::sin(phase)}; }

}  // namespace

void SubarrayGeometry::validate() const {
  if (intra_positions.empty()) throw std::invalid_argument("subarray has no sensors");
  if (intra_positions.front() != 0.0) {
    throw std::invalid_argument("first intra-subarray position must be exactly 0");
  }
  for (std::size_t m = 1; m < intra_positions.size(); ++m) {
    if (!(intra_positions[m] > intra_positions[m - 1])) {
      throw std::invalid_argument("intra-subarray positions must increase strictly");
    }
  }
}

int ArrayGeometry::sensor_count() const {
  int m = 0;
  for (const auto& sub : subarrays) m += sub.size();
  return m;
}

int ArrayGeometry::subarray_row_offset(int p) const {
  int row = 0;
  for (int q = 0; q < p; ++q) row += subarrays[q].size();
  return row;
}

void ArrayGeometry::validate() const {
  if (subarrays.empty()) throw std::invalid_argument("geometry needs at least one subarray");
  for (const auto& sub : subarrays) sub.validate();
  const auto P = subarrays.size();
  if (displacements.size() != P - 1) {
    throw std::invalid_argument("expected P-1 subarray displacements");
  }
  if (offsets.size() != P) throw std::invalid_argument("expected P gain/phase offsets");
  if (offsets.front() != Complex(1.0, 0.0)) {
    throw std::invalid_argument("first gain/phase offset must be exactly 1");
  }
}

ArrayGeometry ArrayGeometry::from_global_positions(
    const std::vector<std::vector<double>>& positions, std::vector<Complex> offsets) {
  ArrayGeometry geom;
  for (std::size_t p = 0; p < positions.size(); ++p) {
    const auto& global = positions[p];
    if (global.empty()) throw std::invalid_argument("empty subarray position list");
    SubarrayGeometry sub;
    sub.intra_positions.reserve(global.size());
    for (double r : global) sub.intra_positions.push_back(r - global.front());
    geom.subarrays.push_back(std::move(sub));
    if (p > 0) geom.displacements.push_back(global.front() - positions.front().front());
  }
  if (offsets.empty()) {
    geom.offsets.assign(positions.size(), Complex(1.0, 0.0));
  } else {
    geom.offsets = std::move(offsets);
  }
  geom.validate();
  return geom;
}

void FrequencyGrid::validate() const {
  if (points.empty()) throw std::invalid_argument("frequency grid is empty");
  for (std::size_t k = 0; k < points.size(); ++k) {
    if (!(points[k] >= -1.0 && points[k] < 1.0)) {
      throw std::invalid_argument("grid points must lie in [-1, 1)");
    }
    if (k > 0 && !(points[k] > points[k - 1])) {
      throw std::invalid_argument("grid points must increase strictly");
    }
  }
}

FrequencyGrid FrequencyGrid::uniform(int K) {
  if (K < 1) throw std::invalid_argument("grid size must be positive");
  FrequencyGrid grid;
  grid.points.resize(K);
  for (int k = 0; k < K; ++k) grid.points[k] = -1.0 + 2.0 * k / K;
  return grid;
}

Eigen::VectorXcd subarray_steering_vector(const SubarrayGeometry& sub, double mu) {
  check_mu(mu);
  Eigen::VectorXcd b(sub.size());
  b(0) = Complex(1.0, 0.0);
  for (int m = 1; m < sub.size(); ++m) {
    b(m) = unit_phasor(kPi * mu * sub.intra_positions[m]);
  }
  return b;
}

Eigen::MatrixXcd subarray_block_matrix(const ArrayGeometry& geom, double mu) {
  const int M = geom.sensor_count();
  const int P = geom.subarray_count();
  Eigen::MatrixXcd B = Eigen::MatrixXcd::Zero(M, P);
  int row = 0;
  for (int p = 0; p < P; ++p) {
    const int Mp = geom.subarrays[p].size();
    B.block(row, p, Mp, 1) = subarray_steering_vector(geom.subarrays[p], mu);
    row += Mp;
  }
  return B;
}

Eigen::MatrixXcd dictionary_matrix(const ArrayGeometry& geom, const FrequencyGrid& grid) {
  const int M = geom.sensor_count();
  const int P = geom.subarray_count();
  const int K = grid.size();
  Eigen::MatrixXcd B(M, P * K);
  for (int k = 0; k < K; ++k) {
    B.middleCols(k * P, P) = subarray_block_matrix(geom, grid.points[k]);
  }
  return B;
}

Eigen::VectorXcd shift_vector(const ArrayGeometry& geom, double mu) {
  check_mu(mu);
  const int P = geom.subarray_count();
  Eigen::VectorXcd phi(P);
  phi(0) = Complex(1.0, 0.0);
  for (int p = 1; p < P; ++p) {
    phi(p) = geom.offset_of(p) * unit_phasor(kPi * mu * geom.displacement_of(p));
  }
  return phi;
}

Eigen::MatrixXcd shift_matrix(const ArrayGeometry& geom, std::span<const double> mus) {
  const int P = geom.subarray_count();
  const int L = static_cast<int>(mus.size());
  if (L < 1) throw std::invalid_argument("need at least one frequency");
  Eigen::MatrixXcd Phi = Eigen::MatrixXcd::Zero(P * L, L);
  for (int l = 0; l < L; ++l) {
    Phi.block(l * P, l, P, 1) = shift_vector(geom, mus[l]);
  }
  return Phi;
}

Eigen::MatrixXcd full_steering_matrix(const ArrayGeometry& geom, std::span<const double> mus) {
  const int M = geom.sensor_count();
  const int L = static_cast<int>(mus.size());
  if (L < 1) throw std::invalid_argument("need at least one frequency");
  Eigen::MatrixXcd A(M, L);
  for (int l = 0; l < L; ++l) {
    A.col(l) = subarray_block_matrix(geom, mus[l]) * shift_vector(geom, mus[l]);
  }
  return A;
}

namespace {

// gcd over reals with tolerance-aware Euclid; zero means "unconstrained".
double real_gcd(double a, double b, double tol) {
  a = std::abs(a);
  b = std::abs(b);
  if (a < b) std::swap(a, b);
  while (b > tol) {
    double r = std::fmod(a, b);
    if (r > b - tol) r = 0.0;  // a is an (almost) exact multiple of b
    a = b;
    b = r;
  }
  return a;
}

}  // namespace

std::optional<BaselineDecomposition> common_baseline_decomposition(const ArrayGeometry& geom,
                                                                   double delta_min) {
  geom.validate();
  double max_pos = 0.0;
  for (const auto& sub : geom.subarrays) {
    for (double rho : sub.intra_positions) max_pos = std::max(max_pos, std::abs(rho));
  }
  if (max_pos == 0.0) {
    // Single-sensor subarrays only; any baseline works, pick 1.
    BaselineDecomposition dec;
    dec.delta = 1.0;
    for (const auto& sub : geom.subarrays) dec.exponents.emplace_back(sub.size(), 0);
    dec.degree = 0;
    return dec;
  }

  const double tol = 1e-9 * max_pos;
  double delta = 0.0;
  for (const auto& sub : geom.subarrays) {
    for (double rho : sub.intra_positions) {
      if (rho == 0.0) continue;
      delta = (delta == 0.0) ? std::abs(rho) : real_gcd(delta, rho, tol);
    }
  }
  if (!(delta >= delta_min)) return std::nullopt;

  BaselineDecomposition dec;
  dec.delta = delta;
  dec.degree = 0;
  for (const auto& sub : geom.subarrays) {
    std::vector<int> d;
    d.reserve(sub.intra_positions.size());
    for (double rho : sub.intra_positions) {
      const double ratio = rho / delta;
      const int q = static_cast<int>(std::llround(ratio));
      if (q < 0 || std::abs(delta * q - rho) > tol) return std::nullopt;
      d.push_back(q);
      dec.degree = std::max(dec.degree, q);
    }
    dec.exponents.push_back(std::move(d));
  }
  return dec;
}

Eigen::MatrixXd selection_matrix(const ArrayGeometry& geom, const BaselineDecomposition& dec) {
  const int M = geom.sensor_count();
  const int P = geom.subarray_count();
  const int D = dec.degree;
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(M, (D + 1) * P);
  int row = 0;
  for (int p = 0; p < P; ++p) {
    for (int m = 0; m < geom.subarrays[p].size(); ++m, ++row) {
      J(row, dec.exponents[p][m] * P + p) = 1.0;
    }
  }
  return J;
}

void to_json(nlohmann::json& j, const ArrayGeometry& geom) {
  j = nlohmann::json::object();
  auto subs = nlohmann::json::array();
  for (const auto& sub : geom.subarrays) subs.push_back(sub.intra_positions);
  j["subarrays"] = std::move(subs);
  j["displacements"] = geom.displacements;
  auto offs = nlohmann::json::array();
  for (const auto& a : geom.offsets) offs.push_back({a.real(), a.imag()});
  j["offsets"] = std::move(offs);
}

void from_json(const nlohmann::json& j, ArrayGeometry& geom) {
  geom = ArrayGeometry{};
  for (const auto& sub : j.at("subarrays")) {
    geom.subarrays.push_back(SubarrayGeometry{sub.get<std::vector<double>>()});
  }
  geom.displacements = j.at("displacements").get<std::vector<double>>();
  if (j.contains("offsets")) {
    for (const auto& a : j.at("offsets")) {
      geom.offsets.emplace_back(a.at(0).get<double>(), a.at(1).get<double>());
    }
  } else {
    geom.offsets.assign(geom.subarrays.size(), Complex(1.0, 0.0));
  }
  geom.validate();
}

}  // namespace cobras

#pragma once

#include <Eigen/Dense>
#include <complex>
#include <vector>

#include <json.hpp>

#include "cobras/array_model.hpp"
#include "cobras/grid_estimation.hpp"

namespace cobras {

// Sum of the P x P submatrices on the i-th block diagonal of F
// (i > 0 above the main block diagonal, i < 0 below).
Eigen::MatrixXcd block_trace(const Eigen::MatrixXcd& F, int i, int P);

// Dual pair of the covariance-form program: upsilon0 PSD, upsilon1
// unstructured, [[R, upsilon1], [upsilon1^H, upsilon0]] PSD, and
// I_P - B^H(nu_k) upsilon0 B(nu_k) PSD on every grid point.
struct DualCertificate {
  Eigen::MatrixXcd upsilon0;
  Eigen::MatrixXcd upsilon1;
  double objective = 0.0;  // -2 Re tr(upsilon1) - lambda tr(upsilon0)
  SolveDiagnostics diag;
};

DualCertificate solve_grid_dual(const Eigen::MatrixXcd& R_hat, const ArrayGeometry& geom,
                                const FrequencyGrid& grid, double lambda,
                                const conic::SolveOptions& options = {});

// Gridless certificate: the per-point constraint is replaced by a Gram-pair
// condition H - J^H upsilon0 J >= 0 with block-trace equalities pinning H to
// the constant polynomial I_P.
struct GramCertificate {
  Eigen::MatrixXcd H;  // (D+1)P x (D+1)P
  DualCertificate dual;
  BaselineDecomposition baseline;
};

struct BaselineRequired : std::runtime_error {
  using std::runtime_error::runtime_error;
};

GramCertificate solve_gridless_dual(const Eigen::MatrixXcd& R_hat, const ArrayGeometry& geom,
                                    double lambda, const conic::SolveOptions& options = {},
                                    double delta_min = 1e-3);

// Trigonometric matrix polynomial sum_i K_i z^i with K_{-i} = K_i^H;
// Hermitian-valued on the unit circle.
struct MatrixPolynomial {
  int block_dim = 0;
  int degree = 0;
  std::vector<Eigen::MatrixXcd> coefficients;  // index i + degree for i in [-D, D]

  const Eigen::MatrixXcd& coeff(int i) const { return coefficients.at(i + degree); }
  Eigen::MatrixXcd eval(std::complex<double> z) const;
};

// Coefficients of B^H(z) upsilon0 B(z) via the Gram matrix J^H upsilon0 J.
MatrixPolynomial dual_polynomial(const Eigen::MatrixXcd& upsilon0, const ArrayGeometry& geom,
                                 const BaselineDecomposition& dec);

struct RootSelection {
  std::vector<std::complex<double>> roots;      // on the unit circle, best L
  std::vector<std::complex<double>> all_roots;  // raw determinant roots
  bool underestimated = false;
};

// Roots of det(z^D (I_P - M(z))); conjugate-reciprocal pairs ranked by
// distance from the unit circle, then by slackness of I_P - M(z).
RootSelection root_dual_polynomial(const MatrixPolynomial& poly, int L);

struct FrequencyRecovery {
  std::vector<double> frequencies;            // wrapped into [-1, 1)
  bool ambiguous = false;                     // true when delta > 1
  std::vector<std::vector<double>> aliases;   // per root, all aliases in [-1, 1)
};

// nu = arg(z) / (pi delta); a baseline above one half-wavelength makes the
// inversion ambiguous and all aliases are reported.
FrequencyRecovery frequencies_from_roots(const std::vector<std::complex<double>>& roots,
                                         double delta);

// Shift vector at a recovered frequency: unit null vector of
// I_P - M(e^{j pi nu delta}), scaled to first entry 1.
Eigen::VectorXcd gridless_shift_vector(const MatrixPolynomial& poly, double nu, double delta);

// Diagnostic document: certificate spectrum, polynomial coefficients and the
// root table with moduli and angles.
nlohmann::json certificate_report(const GramCertificate& cert, const MatrixPolynomial& poly,
                                  const RootSelection& roots);

}  // namespace cobras

#include "cobras/gridless.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace cobras {

namespace {

using conic::Complex;

constexpr double kPi = std::numbers::pi;

SolveDiagnostics diagnostics(const conic::ConicSolution& sol) {
  return SolveDiagnostics{sol.status, sol.primal_residual, sol.dual_residual, sol.duality_gap,
                          sol.iterations};
}

// Shared part of both dual programs: the 2M block W = [[R, Y1], [Y1^H, Y0]]
// with W11 pinned to R, plus the (minimization-form) objective
// 2 Re tr(Y1) + lambda tr(Y0).
int add_dual_corner_block(conic::ProblemBuilder& builder, const Eigen::MatrixXcd& R_hat,
                          double lambda) {
  const int M = static_cast<int>(R_hat.rows());
  const int w = builder.add_psd_block("W", 2 * M);
  Eigen::MatrixXcd C = Eigen::MatrixXcd::Zero(2 * M, 2 * M);
  for (int i = 0; i < M; ++i) C(M + i, i) = 2.0;  // Hermitianized: 2 Re tr(W12)
  C.bottomRightCorner(M, M) = lambda * Eigen::MatrixXcd::Identity(M, M);
  builder.add_objective_term(w, C);
  for (int i = 0; i < M; ++i) {
    for (int j = i; j < M; ++j) {
      Eigen::MatrixXcd E = Eigen::MatrixXcd::Zero(2 * M, 2 * M);
      E(j, i) = 1.0;  // tr(E W) = W[i, j]
      builder.add_equality({{w, E}}, R_hat(i, j));
    }
  }
  return w;
}

void fill_dual_certificate(DualCertificate& cert, const conic::ConicProblem& problem,
                           const conic::ConicSolution& sol, int w_block, int M) {
  const Eigen::MatrixXcd W = conic::extract_block(problem, sol.x, w_block);
  cert.upsilon0 = W.bottomRightCorner(M, M);
  cert.upsilon1 = W.topRightCorner(M, M);
  cert.objective = -sol.primal_objective;
  cert.diag = diagnostics(sol);
}

}  // namespace

Eigen::MatrixXcd block_trace(const Eigen::MatrixXcd& F, int i, int P) {
  if (F.rows() != F.cols() || F.rows() % P != 0) {
    throw std::invalid_argument("matrix size must be a multiple of the block size");
  }
  const int blocks = static_cast<int>(F.rows()) / P;
  if (std::abs(i) > blocks - 1) throw std::invalid_argument("block diagonal index out of range");
  Eigen::MatrixXcd sum = Eigen::MatrixXcd::Zero(P, P);
  for (int j = 0; j < blocks - std::abs(i); ++j) {
    const int row = (i >= 0) ? j : j - i;
    const int col = (i >= 0) ? j + i : j;
    sum += F.block(row * P, col * P, P, P);
  }
  return sum;
}

DualCertificate solve_grid_dual(const Eigen::MatrixXcd& R_hat, const ArrayGeometry& geom,
                                const FrequencyGrid& grid, double lambda,
                                const conic::SolveOptions& options) {
  if (!(lambda > 0.0)) throw std::invalid_argument("lambda must be positive");
  geom.validate();
  grid.validate();
  const int M = geom.sensor_count();
  const int P = geom.subarray_count();
  const int K = grid.size();

  conic::ProblemBuilder builder;
  const int w_block = add_dual_corner_block(builder, R_hat, lambda);

  for (int k = 0; k < K; ++k) {
    const Eigen::MatrixXcd Bk = subarray_block_matrix(geom, grid.points[k]);
    const int c_block = builder.add_psd_block("C" + std::to_string(k), P);
    // C_k + B_k^H Y0 B_k = I_P
    for (int a = 0; a < P; ++a) {
      for (int b = a; b < P; ++b) {
        Eigen::MatrixXcd cc = Eigen::MatrixXcd::Zero(P, P);
        cc(b, a) = 1.0;
        Eigen::MatrixXcd cw = Eigen::MatrixXcd::Zero(2 * M, 2 * M);
        cw.bottomRightCorner(M, M) = Bk.col(b) * Bk.col(a).adjoint();
        builder.add_equality({{c_block, cc}, {w_block, cw}},
                             a == b ? Complex(1.0, 0.0) : Complex(0.0, 0.0));
      }
    }
  }

  const conic::ConicProblem problem = builder.build();
  const conic::ConicSolution sol = conic::solve(problem, options);
  DualCertificate cert;
  fill_dual_certificate(cert, problem, sol, w_block, M);
  return cert;
}

GramCertificate solve_gridless_dual(const Eigen::MatrixXcd& R_hat, const ArrayGeometry& geom,
                                    double lambda, const conic::SolveOptions& options,
                                    double delta_min) {
  if (!(lambda > 0.0)) throw std::invalid_argument("lambda must be positive");
  geom.validate();
  const auto dec = common_baseline_decomposition(geom, delta_min);
  if (!dec) {
    throw BaselineRequired("geometry has no common baseline; gridless path unsupported");
  }
  const int M = geom.sensor_count();
  const int P = geom.subarray_count();
  const int D = dec->degree;
  const int stack = (D + 1) * P;
  const Eigen::MatrixXd J = selection_matrix(geom, *dec);

  conic::ProblemBuilder builder;
  const int w_block = add_dual_corner_block(builder, R_hat, lambda);
  const int e_block = builder.add_psd_block("E", stack);

  // blktr_i(E + J^H Y0 J) = I_P for i = 0, zero otherwise (H eliminated as
  // E + J^H Y0 J).
  for (int i = 0; i <= D; ++i) {
    for (int a = 0; a < P; ++a) {
      const int b0 = (i == 0) ? a : 0;  // Hermitian-valued only for i == 0
      for (int b = b0; b < P; ++b) {
        Eigen::MatrixXcd ce = Eigen::MatrixXcd::Zero(stack, stack);
        for (int j = 0; j + i <= D; ++j) ce((j + i) * P + b, j * P + a) = 1.0;
        Eigen::MatrixXcd cw = Eigen::MatrixXcd::Zero(2 * M, 2 * M);
        cw.bottomRightCorner(M, M) = J * ce * J.transpose();
        const Complex rhs = (i == 0 && a == b) ? Complex(1.0, 0.0) : Complex(0.0, 0.0);
        builder.add_equality({{e_block, ce}, {w_block, cw}}, rhs);
      }
    }
  }

  const conic::ConicProblem problem = builder.build();
  const conic::ConicSolution sol = conic::solve(problem, options);

  GramCertificate cert;
  cert.baseline = *dec;
  fill_dual_certificate(cert.dual, problem, sol, w_block, M);
  const Eigen::MatrixXcd E = conic::extract_block(problem, sol.x, e_block);
  cert.H = E + J.transpose() * cert.dual.upsilon0 * J;
  return cert;
}

Eigen::MatrixXcd MatrixPolynomial::eval(Complex z) const {
  Eigen::MatrixXcd value = Eigen::MatrixXcd::Zero(block_dim, block_dim);
  Complex zp(1.0, 0.0);
  for (int i = 0; i <= degree; ++i) {
    value += coeff(i) * zp;
    if (i > 0) value += coeff(-i) / zp;
    zp *= z;
  }
  return value;
}

MatrixPolynomial dual_polynomial(const Eigen::MatrixXcd& upsilon0, const ArrayGeometry& geom,
                                 const BaselineDecomposition& dec) {
  const int P = geom.subarray_count();
  const Eigen::MatrixXd J = selection_matrix(geom, dec);
  const Eigen::MatrixXcd F = J.transpose() * upsilon0 * J;
  MatrixPolynomial poly;
  poly.block_dim = P;
  poly.degree = dec.degree;
  poly.coefficients.resize(2 * dec.degree + 1);
  for (int i = -dec.degree; i <= dec.degree; ++i) {
    poly.coefficients[i + dec.degree] = block_trace(F, i, P);
  }
  return poly;
}

namespace {

// dense polynomial in ascending coefficient order
using Poly = Eigen::VectorXcd;

Poly poly_mul(const Poly& a, const Poly& b) {
  Poly out = Poly::Zero(a.size() + b.size() - 1);
  for (int i = 0; i < a.size(); ++i) {
    for (int j = 0; j < b.size(); ++j) out(i + j) += a(i) * b(j);
  }
  return out;
}

void poly_add(Poly& a, const Poly& b) {
  if (b.size() > a.size()) {
    Poly tmp = Poly::Zero(b.size());
    tmp.head(a.size()) = a;
    a.swap(tmp);
  }
  a.head(b.size()) += b;
}

// determinant by cofactor expansion over polynomial entries (P <= 4 here)
Poly poly_det(const std::vector<std::vector<Poly>>& mat) {
  const int n = static_cast<int>(mat.size());
  if (n == 1) return mat[0][0];
  Poly det = Poly::Zero(1);
  for (int j = 0; j < n; ++j) {
    std::vector<std::vector<Poly>> minor;
    minor.reserve(n - 1);
    for (int r = 1; r < n; ++r) {
      std::vector<Poly> row;
      row.reserve(n - 1);
      for (int c = 0; c < n; ++c) {
        if (c != j) row.push_back(mat[r][c]);
      }
      minor.push_back(std::move(row));
    }
    Poly term = poly_mul(mat[0][j], poly_det(minor));
    if (j % 2 == 1) term = -term;
    poly_add(det, term);
  }
  return det;
}

std::vector<Complex> poly_roots(const Poly& p) {
  // strip negligible leading/trailing coefficients
  const double scale = p.cwiseAbs().maxCoeff();
  std::vector<Complex> roots;
  if (scale == 0.0) return roots;
  int hi = static_cast<int>(p.size()) - 1;
  while (hi > 0 && std::abs(p(hi)) <= 1e-12 * scale) --hi;
  int lo = 0;
  while (lo < hi && std::abs(p(lo)) <= 1e-12 * scale) ++lo;  // roots at z = 0
  const int deg = hi - lo;
  if (deg < 1) return roots;

  Eigen::MatrixXcd companion = Eigen::MatrixXcd::Zero(deg, deg);
  for (int i = 1; i < deg; ++i) companion(i, i - 1) = 1.0;
  for (int i = 0; i < deg; ++i) companion(i, deg - 1) = -p(lo + i) / p(hi);
  Eigen::ComplexEigenSolver<Eigen::MatrixXcd> eig(companion, false);
  roots.reserve(deg);
  for (int i = 0; i < deg; ++i) roots.push_back(eig.eigenvalues()(i));
  return roots;
}

double angular_distance(double a, double b) {
  double d = std::fmod(std::abs(a - b), 2.0 * kPi);
  return std::min(d, 2.0 * kPi - d);
}

}  // namespace

RootSelection root_dual_polynomial(const MatrixPolynomial& poly, int L) {
  const int P = poly.block_dim;
  const int D = poly.degree;
  if (D < 1) throw std::invalid_argument("polynomial degree must be at least one");

  // entries of z^D (I_P - M(z)) as ascending polynomials of degree <= 2D
  std::vector<std::vector<Poly>> mat(P, std::vector<Poly>(P));
  for (int a = 0; a < P; ++a) {
    for (int b = 0; b < P; ++b) {
      Poly entry = Poly::Zero(2 * D + 1);
      for (int i = -D; i <= D; ++i) entry(i + D) = -poly.coeff(i)(a, b);
      if (a == b) entry(D) += 1.0;
      mat[a][b] = std::move(entry);
    }
  }
  RootSelection sel;
  sel.all_roots = poly_roots(poly_det(mat));

  struct Candidate {
    double angle;
    double off_circle;
    double slack;
  };
  std::vector<Candidate> cands;
  std::vector<bool> used(sel.all_roots.size(), false);
  for (std::size_t i = 0; i < sel.all_roots.size(); ++i) {
    if (used[i]) continue;
    used[i] = true;
    const Complex zi = sel.all_roots[i];
    if (std::abs(zi) == 0.0) continue;
    const Complex target = 1.0 / std::conj(zi);
    std::size_t best = i;
    double best_dist = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < sel.all_roots.size(); ++j) {
      if (used[j]) continue;
      const double d = std::abs(sel.all_roots[j] - target);
      if (d < best_dist) {
        best_dist = d;
        best = j;
      }
    }
    Complex zbest = zi;
    if (best != i) {
      used[best] = true;
      const Complex zj = sel.all_roots[best];
      if (std::abs(std::abs(zj) - 1.0) < std::abs(std::abs(zi) - 1.0)) zbest = zj;
    }
    Candidate cand;
    cand.angle = std::arg(zbest);
    cand.off_circle = std::abs(std::log(std::abs(zbest)));
    cand.slack = 0.0;
    cands.push_back(cand);
  }

  // merge near-coincident candidates (double roots at the support)
  std::sort(cands.begin(), cands.end(),
            [](const Candidate& a, const Candidate& b) { return a.angle < b.angle; });
  std::vector<Candidate> merged;
  for (const auto& cand : cands) {
    if (!merged.empty() && angular_distance(merged.back().angle, cand.angle) <= 1e-4) {
      if (cand.off_circle < merged.back().off_circle) merged.back() = cand;
      continue;
    }
    merged.push_back(cand);
  }
  if (merged.size() > 1 && angular_distance(merged.front().angle, merged.back().angle) <= 1e-4) {
    if (merged.back().off_circle < merged.front().off_circle) merged.front() = merged.back();
    merged.pop_back();
  }

  for (auto& cand : merged) {
    const Complex z = std::polar(1.0, cand.angle);
    Eigen::MatrixXcd slackmat = -poly.eval(z);
    slackmat.diagonal().array() += 1.0;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> eig(
        0.5 * (slackmat + slackmat.adjoint()).eval(), Eigen::EigenvaluesOnly);
    cand.slack = eig.eigenvalues().minCoeff();
  }

  std::sort(merged.begin(), merged.end(), [](const Candidate& a, const Candidate& b) {
    if (std::abs(a.off_circle - b.off_circle) > 1e-9) return a.off_circle < b.off_circle;
    return a.slack < b.slack;
  });

  for (int l = 0; l < L && l < static_cast<int>(merged.size()); ++l) {
    sel.roots.push_back(std::polar(1.0, merged[l].angle));
  }
  sel.underestimated = static_cast<int>(sel.roots.size()) < L;
  return sel;
}

FrequencyRecovery frequencies_from_roots(const std::vector<Complex>& roots, double delta) {
  if (!(delta > 0.0)) throw std::invalid_argument("baseline must be positive");
  FrequencyRecovery rec;
  rec.ambiguous = delta > 1.0 + 1e-12;
  const double period = 2.0 / delta;  // nu aliases repeat every 2/delta
  for (const Complex& z : roots) {
    double nu = std::arg(z) / (kPi * delta);
    nu -= 2.0 * std::floor((nu + 1.0) / 2.0);
    rec.frequencies.push_back(nu);
    std::vector<double> aliases;
    if (rec.ambiguous) {
      const double base = std::arg(z) / (kPi * delta);
      for (double cand = base - period * std::ceil((base + 1.0) / period);
           cand < 1.0; cand += period) {
        if (cand >= -1.0) aliases.push_back(cand);
      }
    }
    rec.aliases.push_back(std::move(aliases));
  }
  return rec;
}

Eigen::VectorXcd gridless_shift_vector(const MatrixPolynomial& poly, double nu, double delta) {
  const Complex z = std::polar(1.0, kPi * nu * delta);
  Eigen::MatrixXcd slackmat = -poly.eval(z);
  slackmat.diagonal().array() += 1.0;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> eig(
      0.5 * (slackmat + slackmat.adjoint()).eval());
  const Eigen::VectorXcd u = eig.eigenvectors().col(0);  // smallest eigenvalue
  if (std::abs(u(0)) <= 1e-12) {
    throw DegenerateShiftError("first shift element vanishes; normalization undefined");
  }
  Eigen::VectorXcd phi = u / u(0);
  phi(0) = Complex(1.0, 0.0);
  return phi;
}

nlohmann::json certificate_report(const GramCertificate& cert, const MatrixPolynomial& poly,
                                  const RootSelection& roots) {
  nlohmann::json j;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> eig(cert.dual.upsilon0, Eigen::EigenvaluesOnly);
  j["upsilon0_eigenvalues"] =
      std::vector<double>(eig.eigenvalues().data(),
                          eig.eigenvalues().data() + eig.eigenvalues().size());
  j["objective"] = cert.dual.objective;
  j["baseline"] = cert.baseline.delta;
  j["degree"] = poly.degree;
  auto coeffs = nlohmann::json::array();
  for (int i = -poly.degree; i <= poly.degree; ++i) {
    auto mat = nlohmann::json::array();
    const auto& K = poly.coeff(i);
    for (int a = 0; a < K.rows(); ++a) {
      auto row = nlohmann::json::array();
      for (int b = 0; b < K.cols(); ++b) row.push_back({K(a, b).real(), K(a, b).imag()});
      mat.push_back(std::move(row));
    }
    coeffs.push_back({{"power", i}, {"value", std::move(mat)}});
  }
  j["coefficients"] = std::move(coeffs);
  auto table = nlohmann::json::array();
  for (const auto& z : roots.all_roots) {
    table.push_back({{"re", z.real()},
                     {"im", z.imag()},
                     {"modulus", std::abs(z)},
                     {"angle", std::arg(z)}});
  }
  j["roots"] = std::move(table);
  auto selected = nlohmann::json::array();
  for (const auto& z : roots.roots) selected.push_back(std::arg(z));
  j["selected_angles"] = std::move(selected);
  j["underestimated"] = roots.underestimated;
  return j;
}

}  // namespace cobras

#include "cobras/conic.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <cstdio>
#include <cstdlib>

namespace cobras::conic {

namespace {

constexpr double kSqrt2 = std::numbers::sqrt2;

void check_hermitian(const Eigen::MatrixXcd& X) {
  if (X.rows() != X.cols()) throw std::invalid_argument("matrix is not square");
  const double scale = std::max(1.0, X.cwiseAbs().maxCoeff());
  if ((X - X.adjoint()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
    throw std::invalid_argument("matrix is not Hermitian");
  }
}

// svec index of entry (i, j), i >= j, in lower-triangle column-major order.
inline int svec_index(int n, int i, int j) {
  return j * (2 * n - j + 1) / 2 + (i - j);
}

void svec_into(const Eigen::MatrixXd& E, Eigen::Ref<Eigen::VectorXd> out) {
  const int n = static_cast<int>(E.rows());
  int idx = 0;
  for (int j = 0; j < n; ++j) {
    out(idx++) = E(j, j);
    for (int i = j + 1; i < n; ++i) out(idx++) = kSqrt2 * E(i, j);
  }
}

void unsvec_into(const Eigen::Ref<const Eigen::VectorXd>& v, Eigen::MatrixXd& E) {
  const int n = static_cast<int>(E.rows());
  int idx = 0;
  for (int j = 0; j < n; ++j) {
    E(j, j) = v(idx++);
    for (int i = j + 1; i < n; ++i) {
      const double w = v(idx++) / kSqrt2;
      E(i, j) = w;
      E(j, i) = w;
    }
  }
}

}  // namespace

Eigen::MatrixXd embed_hermitian(const Eigen::MatrixXcd& X) {
  check_hermitian(X);
  const int n = static_cast<int>(X.rows());
  Eigen::MatrixXd E(2 * n, 2 * n);
  E.topLeftCorner(n, n) = X.real();
  E.topRightCorner(n, n) = -X.imag();
  E.bottomLeftCorner(n, n) = X.imag();
  E.bottomRightCorner(n, n) = X.real();
  return E;
}

Eigen::MatrixXcd hermitian_from_embedding(const Eigen::MatrixXd& E) {
  const int n = static_cast<int>(E.rows()) / 2;
  Eigen::MatrixXcd X(n, n);
  X.real() = 0.5 * (E.topLeftCorner(n, n) + E.bottomRightCorner(n, n));
  X.imag() = 0.5 * (E.bottomLeftCorner(n, n) - E.topRightCorner(n, n));
  return 0.5 * (X + X.adjoint()).eval();
}

Eigen::MatrixXcd psd_sqrt(const Eigen::MatrixXcd& X) {
  check_hermitian(X);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> eig(X);
  const Eigen::VectorXd& vals = eig.eigenvalues();
  const double norm = std::max(std::abs(vals.minCoeff()), std::abs(vals.maxCoeff()));
  if (vals.minCoeff() < -1e-6 * norm) {
    throw std::invalid_argument("matrix is not positive semidefinite");
  }
  return eig.eigenvectors() * vals.cwiseMax(0.0).cwiseSqrt().asDiagonal() *
         eig.eigenvectors().adjoint();
}

int ConicProblem::block_index(std::string_view name) const {
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    if (blocks[i].name == name) return static_cast<int>(i);
  }
  throw std::out_of_range("unknown block name");
}

void dump_problem(const ConicProblem& problem, std::ostream& os) {
  os << "cones";
  for (const auto& blk : problem.blocks) {
    os << " " << blk.name << ":psd:" << blk.complex_dim;
  }
  os << "\nobjective";
  for (int i = 0; i < problem.total_dim(); ++i) {
    if (problem.c(i) != 0.0) os << " " << i << ":" << problem.c(i);
  }
  os << "\n";
  for (int r = 0; r < problem.A.rows(); ++r) {
    os << "eq " << r;
    for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(problem.A, r); it; ++it) {
      os << " " << it.col() << ":" << it.value();
    }
    os << " = " << problem.b(r) << "\n";
  }
}

int ProblemBuilder::add_psd_block(std::string name, int complex_dim) {
  if (complex_dim < 1) throw std::invalid_argument("block dimension must be positive");
  ConicProblem::Block blk;
  blk.name = std::move(name);
  blk.complex_dim = complex_dim;
  blk.offset = total_dim_;
  total_dim_ += blk.svec_length();
  blocks_.push_back(blk);
  objective_.push_back(Eigen::MatrixXcd::Zero(complex_dim, complex_dim));
  return static_cast<int>(blocks_.size()) - 1;
}

void ProblemBuilder::add_objective_term(int block, const Eigen::MatrixXcd& C) {
  objective_.at(block) += 0.5 * (C + C.adjoint());
}

void ProblemBuilder::append_row(
    const std::vector<std::pair<int, Eigen::MatrixXcd>>& hermitian_terms, double rhs) {
  const int row = static_cast<int>(rhs_.size());
  bool nonzero = false;
  for (const auto& [block, C] : hermitian_terms) {
    const auto& blk = blocks_.at(block);
    const int n = blk.complex_dim;
    const int ne = blk.embedded_dim();
    const int base = blk.offset;
    for (int p = 0; p < n; ++p) {
      const double diag = C(p, p).real();
      if (diag != 0.0) {
        triplets_.emplace_back(row, base + svec_index(ne, p, p), 0.5 * diag);
        triplets_.emplace_back(row, base + svec_index(ne, n + p, n + p), 0.5 * diag);
        nonzero = true;
      }
      for (int q = p + 1; q < n; ++q) {
        const Complex cpq = C(p, q);
        const double re = cpq.real();
        const double im = cpq.imag();
        if (re != 0.0) {
          triplets_.emplace_back(row, base + svec_index(ne, q, p), 0.5 * kSqrt2 * re);
          triplets_.emplace_back(row, base + svec_index(ne, n + q, n + p), 0.5 * kSqrt2 * re);
          nonzero = true;
        }
        if (im != 0.0) {
          triplets_.emplace_back(row, base + svec_index(ne, n + q, p), -0.5 * kSqrt2 * im);
          triplets_.emplace_back(row, base + svec_index(ne, n + p, q), 0.5 * kSqrt2 * im);
          nonzero = true;
        }
      }
    }
  }
  if (!nonzero) {
    if (std::abs(rhs) > 1e-12) {
      throw std::invalid_argument("equality with zero coefficients and nonzero rhs");
    }
    while (!triplets_.empty() && triplets_.back().row() == row) triplets_.pop_back();
    return;
  }
  rhs_.push_back(rhs);
}

void ProblemBuilder::add_equality(const std::vector<Term>& terms, Complex rhs) {
  std::vector<std::pair<int, Eigen::MatrixXcd>> re_terms;
  std::vector<std::pair<int, Eigen::MatrixXcd>> im_terms;
  re_terms.reserve(terms.size());
  im_terms.reserve(terms.size());
  const Complex half_i(0.0, 0.5);
  for (const auto& term : terms) {
    const auto& blk = blocks_.at(term.block);
    if (term.coeff.rows() != blk.complex_dim || term.coeff.cols() != blk.complex_dim) {
      throw std::invalid_argument("coefficient size does not match block");
    }
    re_terms.emplace_back(term.block, 0.5 * (term.coeff + term.coeff.adjoint()));
    im_terms.emplace_back(term.block, -half_i * (term.coeff - term.coeff.adjoint()));
  }
  append_row(re_terms, rhs.real());
  append_row(im_terms, rhs.imag());
}

ConicProblem ProblemBuilder::build() {
  ConicProblem problem;
  problem.blocks = blocks_;
  problem.c = Eigen::VectorXd::Zero(total_dim_);
  for (std::size_t bi = 0; bi < blocks_.size(); ++bi) {
    const auto& blk = blocks_[bi];
    const int n = blk.complex_dim;
    const int ne = blk.embedded_dim();
    const auto& C = objective_[bi];
    for (int p = 0; p < n; ++p) {
      const double diag = C(p, p).real();
      problem.c(blk.offset + svec_index(ne, p, p)) += 0.5 * diag;
      problem.c(blk.offset + svec_index(ne, n + p, n + p)) += 0.5 * diag;
      for (int q = p + 1; q < n; ++q) {
        const double re = C(p, q).real();
        const double im = C(p, q).imag();
        problem.c(blk.offset + svec_index(ne, q, p)) += 0.5 * kSqrt2 * re;
        problem.c(blk.offset + svec_index(ne, n + q, n + p)) += 0.5 * kSqrt2 * re;
        problem.c(blk.offset + svec_index(ne, n + q, p)) += -0.5 * kSqrt2 * im;
        problem.c(blk.offset + svec_index(ne, n + p, q)) += 0.5 * kSqrt2 * im;
      }
    }
  }
  const int rows = static_cast<int>(rhs_.size());
  problem.A.resize(rows, total_dim_);
  problem.A.setFromTriplets(triplets_.begin(), triplets_.end());
  problem.A.makeCompressed();
  problem.b = Eigen::Map<const Eigen::VectorXd>(rhs_.data(), rows);
  return problem;
}

namespace {

// Projects every embedded block onto the PSD cone, then back onto the
// embedding subspace (kills round-off drift between the redundant copies).
void project_cone(const ConicProblem& problem, Eigen::VectorXd& v,
                  std::vector<Eigen::MatrixXd>& scratch,
                  std::vector<Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>>& eigs) {
  for (std::size_t bi = 0; bi < problem.blocks.size(); ++bi) {
    const auto& blk = problem.blocks[bi];
    const int ne = blk.embedded_dim();
    const int n = blk.complex_dim;
    Eigen::MatrixXd& E = scratch[bi];
    unsvec_into(v.segment(blk.offset, blk.svec_length()), E);

    // Gershgorin screens: definite sign without an eigendecomposition.
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < ne; ++i) {
      const double radius = E.col(i).cwiseAbs().sum() - std::abs(E(i, i));
      lo = std::min(lo, E(i, i) - radius);
      hi = std::max(hi, E(i, i) + radius);
    }
    if (lo >= 0.0) continue;  // already PSD
    if (hi <= 0.0) {
      v.segment(blk.offset, blk.svec_length()).setZero();
      continue;
    }

    auto& eig = eigs[bi];
    eig.compute(E);
    const Eigen::VectorXd& vals = eig.eigenvalues();
    if (vals(0) >= 0.0) continue;
    if (vals(ne - 1) <= 0.0) {
      v.segment(blk.offset, blk.svec_length()).setZero();
      continue;
    }
    int positives = 0;
    for (int i = 0; i < ne; ++i) {
      if (vals(i) > 0.0) ++positives;
    }
    if (positives <= ne - positives) {
      E.setZero();
      for (int i = 0; i < ne; ++i) {
        if (vals(i) > 0.0) E.noalias() += vals(i) * eig.eigenvectors().col(i) *
                                          eig.eigenvectors().col(i).transpose();
      }
    } else {
      for (int i = 0; i < ne; ++i) {
        if (vals(i) < 0.0) E.noalias() -= vals(i) * eig.eigenvectors().col(i) *
                                          eig.eigenvectors().col(i).transpose();
      }
    }
    // embedding-subspace projection: average the two Hermitian copies
    Eigen::MatrixXd A11 = 0.5 * (E.topLeftCorner(n, n) + E.bottomRightCorner(n, n));
    Eigen::MatrixXd A21 = 0.5 * (E.bottomLeftCorner(n, n) - E.topRightCorner(n, n));
    E.topLeftCorner(n, n) = A11;
    E.bottomRightCorner(n, n) = A11;
    E.bottomLeftCorner(n, n) = A21;
    E.topRightCorner(n, n) = -A21;
    svec_into(E, v.segment(blk.offset, blk.svec_length()));
  }
}

struct Scaling {
  Eigen::VectorXd row;    // D, applied to constraint rows
  Eigen::VectorXd col;    // E, block-constant, applied to columns
  double b_scale = 1.0;
  double c_scale = 1.0;
};

Scaling equilibrate(const ConicProblem& problem, Eigen::SparseMatrix<double, Eigen::RowMajor>& A,
                    Eigen::VectorXd& b, Eigen::VectorXd& c, bool enabled) {
  const int rows = static_cast<int>(A.rows());
  const int cols = static_cast<int>(A.cols());
  Scaling sc;
  sc.row = Eigen::VectorXd::Ones(rows);
  sc.col = Eigen::VectorXd::Ones(cols);

  if (enabled && rows > 0) {
    for (int pass = 0; pass < 10; ++pass) {
      Eigen::VectorXd row_max = Eigen::VectorXd::Zero(rows);
      Eigen::VectorXd blk_max = Eigen::VectorXd::Zero(static_cast<int>(problem.blocks.size()));
      std::vector<int> col_block(cols);
      for (std::size_t bi = 0; bi < problem.blocks.size(); ++bi) {
        const auto& blk = problem.blocks[bi];
        std::fill_n(col_block.begin() + blk.offset, blk.svec_length(), static_cast<int>(bi));
      }
      for (int r = 0; r < rows; ++r) {
        for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(A, r); it; ++it) {
          const double a = std::abs(it.value());
          row_max(r) = std::max(row_max(r), a);
          blk_max(col_block[it.col()]) = std::max(blk_max(col_block[it.col()]), a);
        }
      }
      double dev = 0.0;
      Eigen::VectorXd dr(rows), dc(cols);
      for (int r = 0; r < rows; ++r) {
        dr(r) = row_max(r) > 0 ? 1.0 / std::sqrt(row_max(r)) : 1.0;
        dev = std::max(dev, std::abs(1.0 - row_max(r)));
      }
      for (std::size_t bi = 0; bi < problem.blocks.size(); ++bi) {
        const auto& blk = problem.blocks[bi];
        const double s = blk_max(bi) > 0 ? 1.0 / std::sqrt(blk_max(bi)) : 1.0;
        dc.segment(blk.offset, blk.svec_length()).setConstant(s);
        dev = std::max(dev, std::abs(1.0 - blk_max(bi)));
      }
      for (int r = 0; r < rows; ++r) {
        for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(A, r); it; ++it) {
          it.valueRef() *= dr(r) * dc(it.col());
        }
      }
      sc.row.array() *= dr.array();
      sc.col.array() *= dc.array();
      if (dev < 1e-3) break;
    }
  }

  b = sc.row.asDiagonal() * b;
  c = sc.col.asDiagonal() * c;
  const double bn = b.norm();
  const double cn = c.norm();
  sc.b_scale = bn > 1e-12 ? 1.0 / bn : 1.0;
  sc.c_scale = cn > 1e-12 ? 1.0 / cn : 1.0;
  b *= sc.b_scale;
  c *= sc.c_scale;
  return sc;
}

}  // namespace

double ConicSolution::max_residual() const {
  return std::max({primal_residual, dual_residual, duality_gap});
}

ConicSolution solve(const ConicProblem& problem, const SolveOptions& options) {
  const int dim = problem.total_dim();
  const int rows = static_cast<int>(problem.A.rows());

  Eigen::SparseMatrix<double, Eigen::RowMajor> A = problem.A;
  Eigen::VectorXd b = problem.b;
  Eigen::VectorXd c = problem.c;
  const Scaling sc = equilibrate(problem, A, b, c, options.equilibrate);

  // Normal-equation factorization for the affine projection.
  Eigen::LLT<Eigen::MatrixXd> llt;
  if (rows > 0) {
    Eigen::MatrixXd gram = Eigen::MatrixXd(A * A.transpose());
    gram.diagonal().array() += 1e-10 * (1.0 + gram.diagonal().mean());
    llt.compute(gram);
    if (llt.info() != Eigen::Success) {
      throw std::runtime_error("failed to factorize constraint normal equations");
    }
  }
  const Eigen::SparseMatrix<double> At = A.transpose();

  const double rho0 = options.rho;
  double rho = rho0;
  Eigen::VectorXd z = Eigen::VectorXd::Zero(dim);
  if (options.initial_iterate && options.initial_iterate->size() == dim) {
    // incoming iterate is in original units; move to scaled space
    z = sc.col.cwiseInverse().asDiagonal() * (*options.initial_iterate) * sc.b_scale;
  }
  Eigen::VectorXd u = Eigen::VectorXd::Zero(dim);
  if (options.initial_dual && options.initial_dual->size() == dim) {
    u = -(sc.col.asDiagonal() * (*options.initial_dual)) * sc.c_scale / rho0;
  }
  Eigen::VectorXd x = z;
  Eigen::VectorXd w = Eigen::VectorXd::Zero(rows);

  std::vector<Eigen::MatrixXd> scratch;
  std::vector<Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>> eigs(problem.blocks.size());
  scratch.reserve(problem.blocks.size());
  for (const auto& blk : problem.blocks) {
    scratch.emplace_back(blk.embedded_dim(), blk.embedded_dim());
  }

  const double alpha = options.over_relaxation;
  ConicSolution sol;
  sol.x = Eigen::VectorXd::Zero(dim);
  sol.y = Eigen::VectorXd::Zero(rows);
  sol.s = Eigen::VectorXd::Zero(dim);

  const double b_norm_orig = (sc.row.cwiseInverse().asDiagonal() * b / sc.b_scale).norm();
  const double c_norm_orig = (sc.col.cwiseInverse().asDiagonal() * c / sc.c_scale).norm();

  Eigen::VectorXd v(dim), x_relaxed(dim), z_prev(dim), s_scaled(dim), resid(rows);

  int iter = 0;
  for (; iter < options.max_iterations; ++iter) {
    // affine step: project z - u - c/rho onto {Ax = b}
    v = z - u - c / rho;
    if (rows > 0) {
      resid.noalias() = A * v;
      resid -= b;
      w = llt.solve(resid);
      x.noalias() = v - At * w;
    } else {
      x = v;
    }

    x_relaxed = alpha * x + (1.0 - alpha) * z;
    z_prev = z;
    z = x_relaxed + u;
    project_cone(problem, z, scratch, eigs);
    u += x_relaxed - z;

    const bool last = iter + 1 == options.max_iterations;
    if ((iter + 1) % options.check_interval != 0 && !last) continue;

    // unscaled residuals at (z, y, s)
    sol.y = -rho * (sc.row.asDiagonal() * w) / sc.c_scale;
    s_scaled = -rho * u;
    project_cone(problem, s_scaled, scratch, eigs);
    sol.s = (sc.col.cwiseInverse().asDiagonal() * s_scaled) / sc.c_scale;
    sol.x = (sc.col.asDiagonal() * z) / sc.b_scale;

    const Eigen::VectorXd pr =
        sc.row.cwiseInverse().asDiagonal() * (A * z - b) / sc.b_scale;
    sol.primal_residual = pr.norm() / (1.0 + b_norm_orig);
    const Eigen::VectorXd dr =
        sc.col.cwiseInverse().asDiagonal() *
            (c - At * (sc.row.cwiseInverse().asDiagonal() * sol.y * sc.c_scale)) / sc.c_scale -
        sol.s;
    sol.dual_residual = dr.norm() / (1.0 + c_norm_orig);
    sol.primal_objective = problem.c.dot(sol.x);
    sol.dual_objective = problem.b.dot(sol.y);
    sol.duality_gap = std::abs(sol.primal_objective - sol.dual_objective) /
                      (1.0 + std::abs(sol.primal_objective) + std::abs(sol.dual_objective));
    sol.iterations = iter + 1;

    sol.final_rho = rho;
    if (sol.primal_residual <= options.tolerance && sol.dual_residual <= options.tolerance &&
        sol.duality_gap <= options.tolerance) {
      sol.status = SolveStatus::optimal;
      return sol;
    }

    if (iter > 1000 && u.norm() > 1e10 * (1.0 + b.norm())) {
      sol.status = SolveStatus::infeasible_detected;
      sol.certificate = u / u.norm();
      return sol;
    }

    if (options.adaptive_rho && iter < options.adaptive_rho_window && !last) {
      const double rp = (x - z).norm();
      const double rd = rho * (z - z_prev).norm();
      if (rp > 10.0 * rd && rho < 1e6) {
        rho *= 2.0;
        u *= 0.5;
        if (getenv("COBRAS_DEBUG_RHO")) fprintf(stderr, "it %d rho -> %g (rp %g rd %g)\n", iter, rho, rp, rd);
      } else if (rd > 10.0 * rp && rho > 1e-6) {
        rho *= 0.5;
        u *= 2.0;
        if (getenv("COBRAS_DEBUG_RHO")) fprintf(stderr, "it %d rho -> %g (rp %g rd %g)\n", iter, rho, rp, rd);
      }
    }
  }

  sol.status = SolveStatus::max_iterations;
  sol.iterations = iter;
  return sol;
}

Eigen::MatrixXcd extract_block(const ConicProblem& problem, const Eigen::VectorXd& v, int block) {
  const auto& blk = problem.blocks.at(block);
  Eigen::MatrixXd E(blk.embedded_dim(), blk.embedded_dim());
  unsvec_into(v.segment(blk.offset, blk.svec_length()), E);
  return hermitian_from_embedding(E);
}

Eigen::MatrixXcd extract_block(const ConicProblem& problem, const Eigen::VectorXd& v,
                               std::string_view name) {
  return extract_block(problem, v, problem.block_index(name));
}

}  // namespace cobras::conic

#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <complex>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace cobras::conic {

using Complex = std::complex<double>;

// [[Re X, -Im X], [Im X, Re X]] for Hermitian X; positive semidefinite iff
// X is, with every eigenvalue of X appearing twice.
Eigen::MatrixXd embed_hermitian(const Eigen::MatrixXcd& X);

// Inverse of embed_hermitian (averages the redundant copies).
Eigen::MatrixXcd hermitian_from_embedding(const Eigen::MatrixXd& E);

// PSD square root via eigendecomposition; eigenvalues below zero are
// clipped. Rejects input with min eigenvalue < -1e-6 * ||X||.
Eigen::MatrixXcd psd_sqrt(const Eigen::MatrixXcd& X);

// Linear-objective problem over a product of Hermitian PSD blocks with
// affine equality constraints. The real decision vector is the scaled
// vectorization (svec) of the real embeddings of all blocks.
struct ConicProblem {
  struct Block {
    std::string name;
    int complex_dim = 0;
    int offset = 0;  // start of this block's svec segment

    int embedded_dim() const { return 2 * complex_dim; }
    int svec_length() const { return embedded_dim() * (embedded_dim() + 1) / 2; }
  };

  std::vector<Block> blocks;
  Eigen::SparseMatrix<double, Eigen::RowMajor> A;
  Eigen::VectorXd b;
  Eigen::VectorXd c;

  int total_dim() const { return static_cast<int>(c.size()); }
  int block_index(std::string_view name) const;
};

// Text dump (objective, equality triplets, cone layout) for cross-checking
// against an external modeling tool.
void dump_problem(const ConicProblem& problem, std::ostream& os);

// Assembles a ConicProblem from complex Hermitian blocks and scalar
// equations sum_b tr(C_b X_b) = rhs. Each complex equation is compiled to a
// real row pair (real/imaginary part); all-zero rows are dropped.
class ProblemBuilder {
 public:
  struct Term {
    int block = -1;
    Eigen::MatrixXcd coeff;  // arbitrary complex n x n, n = block dim
  };

  int add_psd_block(std::string name, int complex_dim);

  // Accumulates tr(C X_block) into the objective; C is Hermitian-symmetrized.
  void add_objective_term(int block, const Eigen::MatrixXcd& C);

  void add_equality(const std::vector<Term>& terms, Complex rhs);

  ConicProblem build();

 private:
  void append_row(const std::vector<std::pair<int, Eigen::MatrixXcd>>& hermitian_terms,
                  double rhs);

  std::vector<ConicProblem::Block> blocks_;
  std::vector<Eigen::MatrixXcd> objective_;
  std::vector<Eigen::Triplet<double>> triplets_;
  std::vector<double> rhs_;
  int total_dim_ = 0;
};

enum class SolveStatus { optimal, max_iterations, infeasible_detected };

struct SolveOptions {
  double tolerance = 1e-7;
  int max_iterations = 50000;
  double over_relaxation = 1.6;
  double rho = 0.1;
  bool adaptive_rho = true;
  int adaptive_rho_window = 1500;  // iterations after which rho is frozen
  int check_interval = 25;
  bool equilibrate = true;
  std::optional<Eigen::VectorXd> initial_iterate;  // svec-space primal guess
  std::optional<Eigen::VectorXd> initial_dual;     // svec-space dual cone guess
};

struct ConicSolution {
  SolveStatus status = SolveStatus::max_iterations;
  Eigen::VectorXd x;  // cone-feasible primal, svec space
  Eigen::VectorXd y;  // equality multipliers
  Eigen::VectorXd s;  // dual cone variable, c - A'y at convergence
  double primal_objective = 0.0;
  double dual_objective = 0.0;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  double duality_gap = 0.0;
  int iterations = 0;
  double final_rho = 0.0;
  Eigen::VectorXd certificate;  // populated when infeasibility is detected

  double max_residual() const;
  bool usable() const { return status != SolveStatus::infeasible_detected; }
};

ConicSolution solve(const ConicProblem& problem, const SolveOptions& options = {});

// Recovers the complex Hermitian value of one block from an svec-space
// vector (primal x or dual s).
Eigen::MatrixXcd extract_block(const ConicProblem& problem, const Eigen::VectorXd& v, int block);
Eigen::MatrixXcd extract_block(const ConicProblem& problem, const Eigen::VectorXd& v,
                               std::string_view name);

}  // namespace cobras::conic

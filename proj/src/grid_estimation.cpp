#include "cobras/grid_estimation.hpp"

#include <algorithm>
#include <cmath>

#include "cobras/norms.hpp"

namespace cobras {

namespace {

using conic::Complex;

SolveDiagnostics diagnostics(const conic::ConicSolution& sol) {
  return SolveDiagnostics{sol.status, sol.primal_residual, sol.dual_residual, sol.duality_gap,
                          sol.iterations};
}

// Subarray steering columns for every grid point; column k is the M-vector
// of subarray p's response embedded at its sensor rows.
std::vector<Eigen::MatrixXcd> grid_blocks(const ArrayGeometry& geom, const FrequencyGrid& grid) {
  std::vector<Eigen::MatrixXcd> out;
  out.reserve(grid.size());
  for (double nu : grid.points) out.push_back(subarray_block_matrix(geom, nu));
  return out;
}

// Adds the Hermitian-valued constraint  Z_block(sub) = sum_k B_k S_k B_k^H + lambda I
// over the trailing M x M corner of a (head+M)-dimensional block.
void add_dictionary_corner_constraint(conic::ProblemBuilder& builder, int corner_block, int head,
                                      const std::vector<Eigen::MatrixXcd>& Bk,
                                      const std::vector<int>& s_blocks, double lambda, int M) {
  const int dim = head + M;
  for (int a = 0; a < M; ++a) {
    for (int b = a; b < M; ++b) {
      std::vector<conic::ProblemBuilder::Term> terms;
      Eigen::MatrixXcd corner = Eigen::MatrixXcd::Zero(dim, dim);
      corner(head + b, head + a) = 1.0;  // tr(C G) = G[head+a, head+b]
      terms.push_back({corner_block, corner});
      for (std::size_t k = 0; k < s_blocks.size(); ++k) {
        // tr(C S_k) = [B_k S_k B_k^H]_{ab}
        Eigen::MatrixXcd coeff = Bk[k].row(b).adjoint() * Bk[k].row(a);
        if (coeff.cwiseAbs().maxCoeff() == 0.0) continue;
        terms.push_back({s_blocks[k], Eigen::MatrixXcd(-coeff)});
      }
      const Complex rhs = (a == b) ? Complex(lambda, 0.0) : Complex(0.0, 0.0);
      builder.add_equality(terms, rhs);
    }
  }
}

}  // namespace

double BlockDiagPsd::trace() const {
  double t = 0.0;
  for (const auto& blk : blocks) t += blk.real().trace();
  return t;
}

void BlockDiagPsd::validate(double tol) const {
  for (const auto& blk : blocks) {
    if (blk.rows() != block_dim || blk.cols() != block_dim) {
      throw std::invalid_argument("block size mismatch");
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> eig(blk, Eigen::EigenvaluesOnly);
    const double scale = std::max(1.0, blk.cwiseAbs().maxCoeff());
    if (eig.eigenvalues().minCoeff() < -tol * scale) {
      throw std::invalid_argument("block is not PSD within tolerance");
    }
  }
}

Eigen::MatrixXcd ExtendedSignal::stacked() const {
  const int P = block_rows();
  const int N = snapshots();
  Eigen::MatrixXcd Q(P * block_count(), N);
  for (int k = 0; k < block_count(); ++k) Q.middleRows(k * P, P) = blocks[k];
  return Q;
}

Lnuc1Result solve_lnuc1(const Eigen::MatrixXcd& Y, const ArrayGeometry& geom,
                        const FrequencyGrid& grid, double lambda,
                        const conic::SolveOptions& options) {
  if (!(lambda > 0.0)) throw std::invalid_argument("lambda must be positive");
  geom.validate();
  grid.validate();
  const int M = geom.sensor_count();
  const int P = geom.subarray_count();
  const int N = static_cast<int>(Y.cols());
  const int K = grid.size();
  const auto Bk = grid_blocks(geom, grid);
  const double weight = lambda * std::sqrt(static_cast<double>(N));

  conic::ProblemBuilder builder;
  std::vector<int> w_blocks(K);
  for (int k = 0; k < K; ++k) {
    w_blocks[k] = builder.add_psd_block("W" + std::to_string(k), P + N);
    builder.add_objective_term(w_blocks[k],
                               0.5 * weight * Eigen::MatrixXcd::Identity(P + N, P + N));
  }
  const int v_block = builder.add_psd_block("V", N + M);
  {
    Eigen::MatrixXcd C = Eigen::MatrixXcd::Zero(N + M, N + M);
    C.topLeftCorner(N, N) = 0.5 * Eigen::MatrixXcd::Identity(N, N);
    builder.add_objective_term(v_block, C);
  }

  // trailing corner of V pinned to the identity
  for (int a = 0; a < M; ++a) {
    for (int b = a; b < M; ++b) {
      Eigen::MatrixXcd C = Eigen::MatrixXcd::Zero(N + M, N + M);
      C(N + b, N + a) = 1.0;
      builder.add_equality({{v_block, C}}, a == b ? Complex(1.0, 0.0) : Complex(0.0, 0.0));
    }
  }
  // residual coupling: V[N+m, n] - sum_k [B_k Q_k]_{m,n} = -Y[m,n]
  for (int m = 0; m < M; ++m) {
    for (int n = 0; n < N; ++n) {
      std::vector<conic::ProblemBuilder::Term> terms;
      Eigen::MatrixXcd CV = Eigen::MatrixXcd::Zero(N + M, N + M);
      CV(n, N + m) = 1.0;
      terms.push_back({v_block, CV});
      for (int k = 0; k < K; ++k) {
        Eigen::MatrixXcd CW = Eigen::MatrixXcd::Zero(P + N, P + N);
        bool any = false;
        for (int p = 0; p < P; ++p) {
          const Complex bval = Bk[k](m, p);
          if (bval != Complex(0.0, 0.0)) {
            CW(P + n, p) = -bval;
            any = true;
          }
        }
        if (any) terms.push_back({w_blocks[k], CW});
      }
      builder.add_equality(terms, -Y(m, n));
    }
  }

  const conic::ConicProblem problem = builder.build();
  const conic::ConicSolution sol = conic::solve(problem, options);

  Lnuc1Result result;
  result.diag = diagnostics(sol);
  result.Q.blocks.reserve(K);
  Eigen::MatrixXcd Qstack(K * P, N);
  for (int k = 0; k < K; ++k) {
    const Eigen::MatrixXcd W = conic::extract_block(problem, sol.x, w_blocks[k]);
    result.Q.blocks.push_back(W.block(0, P, P, N));
    Qstack.middleRows(k * P, P) = result.Q.blocks.back();
  }
  const Eigen::MatrixXcd B = dictionary_matrix(geom, grid);
  result.objective =
      0.5 * (B * Qstack - Y).squaredNorm() + weight * lnuc1_norm(result.Q.blocks);
  return result;
}

CobrasResult solve_cobras_snapshot_form(const Eigen::MatrixXcd& Y, const ArrayGeometry& geom,
                                        const FrequencyGrid& grid, double lambda,
                                        const conic::SolveOptions& options) {
  if (!(lambda > 0.0)) throw std::invalid_argument("lambda must be positive");
  geom.validate();
  grid.validate();
  const int M = geom.sensor_count();
  const int P = geom.subarray_count();
  const int N = static_cast<int>(Y.cols());
  const int K = grid.size();
  const auto Bk = grid_blocks(geom, grid);

  conic::ProblemBuilder builder;
  const int g_block = builder.add_psd_block("G", N + M);
  {
    Eigen::MatrixXcd C = Eigen::MatrixXcd::Zero(N + M, N + M);
    C.topLeftCorner(N, N) = Eigen::MatrixXcd::Identity(N, N) / static_cast<double>(N);
    builder.add_objective_term(g_block, C);
  }
  std::vector<int> s_blocks(K);
  for (int k = 0; k < K; ++k) {
    s_blocks[k] = builder.add_psd_block("S" + std::to_string(k), P);
    builder.add_objective_term(s_blocks[k], Eigen::MatrixXcd::Identity(P, P));
  }

  // off-diagonal corner pinned to Y^H
  for (int n = 0; n < N; ++n) {
    for (int m = 0; m < M; ++m) {
      Eigen::MatrixXcd C = Eigen::MatrixXcd::Zero(N + M, N + M);
      C(N + m, n) = 1.0;  // tr(C G) = G[n, N+m]
      builder.add_equality({{g_block, C}}, std::conj(Y(m, n)));
    }
  }
  add_dictionary_corner_constraint(builder, g_block, N, Bk, s_blocks, lambda, M);

  const conic::ConicProblem problem = builder.build();
  const conic::ConicSolution sol = conic::solve(problem, options);

  CobrasResult result;
  result.diag = diagnostics(sol);
  result.warm_primal = sol.x;
  result.warm_dual = sol.s;
  result.final_rho = sol.final_rho;
  const Eigen::MatrixXcd G = conic::extract_block(problem, sol.x, g_block);
  result.Z = G.topLeftCorner(N, N);
  result.S.block_dim = P;
  result.S.blocks.reserve(K);
  for (int k = 0; k < K; ++k) {
    result.S.blocks.push_back(conic::extract_block(problem, sol.x, s_blocks[k]));
  }
  result.objective = sol.primal_objective;
  return result;
}

CobrasResult solve_cobras_covariance_form(const Eigen::MatrixXcd& R_hat, int snapshots,
                                          const ArrayGeometry& geom, const FrequencyGrid& grid,
                                          double lambda, const conic::SolveOptions& options) {
  if (!(lambda > 0.0)) throw std::invalid_argument("lambda must be positive");
  (void)snapshots;
  geom.validate();
  grid.validate();
  const int M = geom.sensor_count();
  const int P = geom.subarray_count();
  const int K = grid.size();
  const auto Bk = grid_blocks(geom, grid);

  conic::ProblemBuilder builder;
  const int g_block = builder.add_psd_block("G", 2 * M);
  {
    Eigen::MatrixXcd C = Eigen::MatrixXcd::Zero(2 * M, 2 * M);
    C.topLeftCorner(M, M) = R_hat;
    builder.add_objective_term(g_block, C);
  }
  std::vector<int> s_blocks(K);
  for (int k = 0; k < K; ++k) {
    s_blocks[k] = builder.add_psd_block("S" + std::to_string(k), P);
    builder.add_objective_term(s_blocks[k], Eigen::MatrixXcd::Identity(P, P));
  }

  // off-diagonal corner pinned to I_M
  for (int i = 0; i < M; ++i) {
    for (int j = 0; j < M; ++j) {
      Eigen::MatrixXcd C = Eigen::MatrixXcd::Zero(2 * M, 2 * M);
      C(M + j, i) = 1.0;  // tr(C G) = G[i, M+j]
      builder.add_equality({{g_block, C}}, i == j ? Complex(1.0, 0.0) : Complex(0.0, 0.0));
    }
  }
  add_dictionary_corner_constraint(builder, g_block, M, Bk, s_blocks, lambda, M);

  const conic::ConicProblem problem = builder.build();
  const conic::ConicSolution sol = conic::solve(problem, options);

  CobrasResult result;
  result.diag = diagnostics(sol);
  result.warm_primal = sol.x;
  result.warm_dual = sol.s;
  result.final_rho = sol.final_rho;
  const Eigen::MatrixXcd G = conic::extract_block(problem, sol.x, g_block);
  result.Z = G.topLeftCorner(M, M);
  result.S.block_dim = P;
  result.S.blocks.reserve(K);
  for (int k = 0; k < K; ++k) {
    result.S.blocks.push_back(conic::extract_block(problem, sol.x, s_blocks[k]));
  }
  result.objective = sol.primal_objective;
  return result;
}

ExtendedSignal recover_extended_signal(const BlockDiagPsd& S, const Eigen::MatrixXcd& Y,
                                       const ArrayGeometry& geom, const FrequencyGrid& grid,
                                       double lambda) {
  if (!(lambda > 0.0)) throw std::invalid_argument("lambda must be positive");
  const int M = geom.sensor_count();
  const int K = grid.size();
  const auto Bk = grid_blocks(geom, grid);

  Eigen::MatrixXcd W = lambda * Eigen::MatrixXcd::Identity(M, M);
  for (int k = 0; k < K; ++k) W += Bk[k] * S.blocks[k] * Bk[k].adjoint();
  const Eigen::MatrixXcd X = W.ldlt().solve(Y);

  ExtendedSignal Q;
  Q.blocks.reserve(K);
  for (int k = 0; k < K; ++k) Q.blocks.push_back(S.blocks[k] * (Bk[k].adjoint() * X));
  return Q;
}

Eigen::VectorXd block_spectrum(const BlockDiagPsd& S) {
  Eigen::VectorXd p(S.block_count());
  for (int k = 0; k < S.block_count(); ++k) {
    p(k) = std::max(0.0, S.blocks[k].real().trace());
  }
  return p;
}

std::vector<int> threshold_support(const Eigen::VectorXd& spectrum, double gamma) {
  std::vector<int> maxima;
  const int K = static_cast<int>(spectrum.size());
  const double peak = spectrum.size() > 0 ? spectrum.maxCoeff() : 0.0;
  for (int k = 0; k < K; ++k) {
    const bool left_ok = (k == 0) || spectrum(k) > spectrum(k - 1);
    const bool right_ok = (k == K - 1) || spectrum(k) >= spectrum(k + 1);
    if (left_ok && right_ok && spectrum(k) > gamma * peak) maxima.push_back(k);
  }
  return maxima;
}

PeakSelection select_peaks(const Eigen::VectorXd& spectrum, const FrequencyGrid& grid, int L,
                           StableRng& rng, double gamma) {
  if (L < 1) throw std::invalid_argument("need at least one source");
  std::vector<int> maxima = threshold_support(spectrum, gamma);
  std::stable_sort(maxima.begin(), maxima.end(), [&](int a, int b) {
    return spectrum(a) > spectrum(b);  // stable: plateau keeps lowest index first
  });

  PeakSelection sel;
  for (int i = 0; i < L && i < static_cast<int>(maxima.size()); ++i) {
    sel.support.push_back(maxima[i]);
    sel.frequencies.push_back(grid.points[maxima[i]]);
  }
  while (static_cast<int>(sel.frequencies.size()) < L) {
    const int k = static_cast<int>(rng.uniform_index(grid.size()));
    sel.support.push_back(-1);
    sel.frequencies.push_back(grid.points[k]);
    sel.random_padding += 1;
  }
  return sel;
}

WaveformShift recover_waveforms_and_shifts(const Eigen::MatrixXcd& Qk) {
  Eigen::JacobiSVD<Eigen::MatrixXcd> svd(Qk, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::VectorXcd u = svd.matrixU().col(0);
  const Eigen::VectorXcd v = svd.matrixV().col(0);
  const double sigma = svd.singularValues()(0);
  const Complex u0 = u(0);
  if (std::abs(u0) <= 1e-12) {
    throw DegenerateShiftError("first shift element vanishes; normalization undefined");
  }
  WaveformShift out;
  out.waveform = sigma * u0 * v.conjugate();
  out.shift = u / u0;
  out.shift(0) = Complex(1.0, 0.0);
  return out;
}

SparrowResult solve_sparrow(const Eigen::MatrixXcd& R_hat, int snapshots,
                            const ArrayGeometry& geom, const FrequencyGrid& grid, double lambda,
                            const conic::SolveOptions& options) {
  if (!(lambda > 0.0)) throw std::invalid_argument("lambda must be positive");
  (void)snapshots;
  geom.validate();
  grid.validate();
  const int M = geom.sensor_count();
  const int K = grid.size();
  const Eigen::MatrixXcd A = full_steering_matrix(geom, grid.points);

  conic::ProblemBuilder builder;
  const int g_block = builder.add_psd_block("G", 2 * M);
  {
    Eigen::MatrixXcd C = Eigen::MatrixXcd::Zero(2 * M, 2 * M);
    C.topLeftCorner(M, M) = R_hat;
    builder.add_objective_term(g_block, C);
  }
  std::vector<int> s_blocks(K);
  for (int k = 0; k < K; ++k) {
    s_blocks[k] = builder.add_psd_block("s" + std::to_string(k), 1);
    builder.add_objective_term(s_blocks[k], Eigen::MatrixXcd::Identity(1, 1));
  }

  for (int i = 0; i < M; ++i) {
    for (int j = 0; j < M; ++j) {
      Eigen::MatrixXcd C = Eigen::MatrixXcd::Zero(2 * M, 2 * M);
      C(M + j, i) = 1.0;
      builder.add_equality({{g_block, C}}, i == j ? Complex(1.0, 0.0) : Complex(0.0, 0.0));
    }
  }
  for (int a = 0; a < M; ++a) {
    for (int b = a; b < M; ++b) {
      std::vector<conic::ProblemBuilder::Term> terms;
      Eigen::MatrixXcd corner = Eigen::MatrixXcd::Zero(2 * M, 2 * M);
      corner(M + b, M + a) = 1.0;
      terms.push_back({g_block, corner});
      for (int k = 0; k < K; ++k) {
        const Complex coeff = A(a, k) * std::conj(A(b, k));
        Eigen::MatrixXcd c1(1, 1);
        c1(0, 0) = -coeff;
        terms.push_back({s_blocks[k], c1});
      }
      builder.add_equality(terms, a == b ? Complex(lambda, 0.0) : Complex(0.0, 0.0));
    }
  }

  const conic::ConicProblem problem = builder.build();
  const conic::ConicSolution sol = conic::solve(problem, options);

  SparrowResult result;
  result.diag = diagnostics(sol);
  result.s.resize(K);
  for (int k = 0; k < K; ++k) {
    result.s(k) = std::max(0.0, conic::extract_block(problem, sol.x, s_blocks[k])(0, 0).real());
  }
  result.objective = sol.primal_objective;
  return result;
}

GridEstimate estimate_grid(const Eigen::MatrixXcd& Y, const ArrayGeometry& geom,
                           const FrequencyGrid& grid, double lambda, int L, StableRng& rng,
                           GridEstimator method, const conic::SolveOptions& options) {
  const int M = geom.sensor_count();
  const int N = static_cast<int>(Y.cols());
  const int P = geom.subarray_count();

  GridEstimate est;
  est.lambda = lambda;

  if (method == GridEstimator::lnuc1_reference) {
    Lnuc1Result ref = solve_lnuc1(Y, geom, grid, lambda, options);
    est.diag = ref.diag;
    est.objective = ref.objective;
    est.Q = ref.Q;
    est.S.block_dim = P;
    const double root_n = std::sqrt(static_cast<double>(N));
    for (const auto& Qk : ref.Q.blocks) {
      est.S.blocks.push_back(conic::psd_sqrt((Qk * Qk.adjoint()).eval()) / root_n);
    }
  } else {
    CobrasResult res;
    if (N < M) {
      res = solve_cobras_snapshot_form(Y, geom, grid, lambda, options);
    } else {
      const Eigen::MatrixXcd R = (Y * Y.adjoint() / static_cast<double>(N)).eval();
      res = solve_cobras_covariance_form(0.5 * (R + R.adjoint()), N, geom, grid, lambda, options);
    }
    est.diag = res.diag;
    est.objective = res.objective;
    est.S = std::move(res.S);
    est.Q = recover_extended_signal(est.S, Y, geom, grid, lambda);
  }

  est.spectrum = block_spectrum(est.S);
  const PeakSelection sel = select_peaks(est.spectrum, grid, L, rng);
  est.support = sel.support;
  est.frequencies = sel.frequencies;

  for (int l = 0; l < L; ++l) {
    if (sel.support[l] >= 0 && est.Q) {
      try {
        WaveformShift ws = recover_waveforms_and_shifts(est.Q->blocks[sel.support[l]]);
        est.waveforms.push_back(std::move(ws.waveform));
        est.shifts.push_back(std::move(ws.shift));
        continue;
      } catch (const DegenerateShiftError&) {
        // fall through to the neutral guess
      }
    }
    est.waveforms.push_back(Eigen::VectorXcd::Zero(N));
    est.shifts.push_back(Eigen::VectorXcd::Ones(P));
  }
  return est;
}

void to_json(nlohmann::json& j, const GridEstimate& est) {
  j = nlohmann::json::object();
  j["spectrum"] = std::vector<double>(est.spectrum.data(), est.spectrum.data() + est.spectrum.size());
  j["support"] = est.support;
  j["frequencies"] = est.frequencies;
  auto shifts = nlohmann::json::array();
  for (const auto& phi : est.shifts) {
    auto one = nlohmann::json::array();
    for (int p = 0; p < phi.size(); ++p) one.push_back({phi(p).real(), phi(p).imag()});
    shifts.push_back(std::move(one));
  }
  j["shifts"] = std::move(shifts);
  j["objective"] = est.objective;
  j["lambda"] = est.lambda;
  j["residuals"] = {{"primal", est.diag.primal_residual},
                    {"dual", est.diag.dual_residual},
                    {"gap", est.diag.duality_gap},
                    {"iterations", est.diag.iterations}};
}

}  // namespace cobras

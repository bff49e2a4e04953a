#include "magnon/opensys.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>
#include <thread>

#include "exponential_rk4.hpp"
#include "magnon/entanglement.hpp"

namespace magnon {

namespace {

using detail::BlockSpec;
using detail::ExponentialRk4;

constexpr double kDivergence = 1e6;

struct Eigenbasis {
  Eigen::VectorXd energies;
  MatrixXc vectors;

  MatrixXc to(const MatrixXc& m) const { return vectors.adjoint() * m * vectors; }
  MatrixXc from(const MatrixXc& m) const { return vectors * m * vectors.adjoint(); }
};

Eigenbasis diagonalize(const HamiltonianMatrix<double>& h) {
  if (!h.hermitian || h.hermiticity_defect() > 1e-12) throw opensys_error("open dynamics needs a hermitian Hamiltonian");
  if (!h.matrix.allFinite()) throw opensys_error("non-finite Hamiltonian entries");
  Eigen::SelfAdjointEigenSolver<MatrixXc> solver(h.matrix);
  if (solver.info() != Eigen::Success) throw opensys_error("eigendecomposition failed");
  return {solver.eigenvalues(), solver.eigenvectors()};
}

void require_operators(const std::vector<MatrixXc>& lowering, Eigen::Index n) {
  for (const auto& l : lowering)
    if (l.rows() != n || l.cols() != n) throw opensys_error("bath operator dimension differs from the Hamiltonian");
}

// Right-hand side beyond -i[H, .] and -gamma O.  The state is {rho, O_1, ...}
// when rho is carried, {O_1, ...} otherwise; with fixed O-bar only {rho}.
struct Rhs {
  std::vector<MatrixXc> l, l_dag;
  std::vector<MatrixXc> fixed_o;  // Markov limit
  double gamma = 0;
  bool with_rho = true;
  bool evolve_o = true;

  void operator()(const std::vector<MatrixXc>& u, double, std::vector<MatrixXc>& out) const {
    const std::size_t first_o = with_rho ? 1 : 0;
    const std::size_t m = l.size();
    auto o = [&](std::size_t j) -> const MatrixXc& { return evolve_o ? u[first_o + j] : fixed_o[j]; };
    if (with_rho) {
      const MatrixXc& rho = u[0];
      out[0] = MatrixXc::Zero(rho.rows(), rho.cols());
      for (std::size_t j = 0; j < m; ++j) {
        const MatrixXc rho_od = rho * o(j).adjoint();
        const MatrixXc o_rho = o(j) * rho;
        out[0].noalias() += l[j] * rho_od - rho_od * l[j] - l_dag[j] * o_rho + o_rho * l_dag[j];
      }
    }
    if (evolve_o) {
      MatrixXc a = MatrixXc::Zero(l[0].rows(), l[0].cols());
      for (std::size_t k = 0; k < m; ++k) a.noalias() += l_dag[k] * o(k);
      for (std::size_t j = 0; j < m; ++j) out[first_o + j] = 0.5 * gamma * l[j] - (a * o(j) - o(j) * a);
    }
  }
};

Rhs make_rhs(const Eigenbasis& basis, const std::vector<MatrixXc>& lowering, const BathSpec& bath, bool with_rho) {
  Rhs rhs;
  rhs.gamma = bath.gamma;
  rhs.with_rho = with_rho;
  rhs.evolve_o = !bath.markov;
  for (const auto& l : lowering) {
    rhs.l.push_back(basis.to(l));
    rhs.l_dag.push_back(rhs.l.back().adjoint());
    if (bath.markov) rhs.fixed_o.push_back(0.5 * rhs.l.back());
  }
  return rhs;
}

std::vector<BlockSpec> blocks_for(const Eigenbasis& basis, const BathSpec& bath, std::size_t n_baths, bool with_rho) {
  std::vector<BlockSpec> blocks;
  if (with_rho) blocks.push_back({basis.energies, basis.energies, 0.0});
  if (!bath.markov)
    for (std::size_t j = 0; j < n_baths; ++j) blocks.push_back({basis.energies, basis.energies, bath.gamma});
  return blocks;
}

void require_bounded(const std::vector<MatrixXc>& o, double t) {
  for (const auto& m : o)
    if (!m.allFinite() || m.cwiseAbs().maxCoeff() > kDivergence) {
      std::ostringstream msg;
      msg << "O-bar diverged at t = " << t << "; the system-bath coupling is too strong for the leading-order equation";
      throw strong_coupling_error(msg.str());
    }
}

double lowest_eigenvalue(const MatrixXc& rho) {
  const MatrixXc h = 0.5 * (rho + rho.adjoint());
  return Eigen::SelfAdjointEigenSolver<MatrixXc>(h, Eigen::EigenvaluesOnly).eigenvalues()(0);
}

void validate_density(const DensityMatrix& rho, Eigen::Index n) {
  if (rho.matrix.rows() != n || rho.matrix.cols() != n || static_cast<Eigen::Index>(rho.layout.size()) != n)
    throw opensys_error("initial density matrix does not match the Hamiltonian");
  if ((rho.matrix - rho.matrix.adjoint()).cwiseAbs().maxCoeff() > 1e-10)
    throw opensys_error("initial density matrix is not hermitian");
  if (std::abs(rho.trace() - 1.0) > 1e-8) throw opensys_error("initial density matrix trace differs from 1");
}

using CellHamiltonian = std::function<HamiltonianMatrix<double>(int cell)>;

MasterTrajectory run_master(const CellHamiltonian& cell_h, bool constant, const std::vector<MatrixXc>& lowering,
                            const BathSpec& bath, const DensityMatrix& rho0, const TimeGrid& grid,
                            const OpenOptions& options) {
  bath.validate();
  if (options.substeps < 1) throw opensys_error("substeps must be positive");
  if (lowering.empty()) throw opensys_error("at least one bath operator is required");
  const double h_step = grid.dt() / options.substeps;

  MasterTrajectory out;
  out.times = grid.times();
  const auto record = [&](const MatrixXc& rho, const std::vector<MatrixXc>& o, double t) {
    out.states.push_back({rho, rho0.layout});
    if (options.record_o) out.o.push_back({t, o});
    out.trace_error.push_back(std::abs(rho.trace() - 1.0));
    double lowest = std::numeric_limits<double>::quiet_NaN();
    if (options.check_positivity) {
      lowest = lowest_eigenvalue(rho);
      if (lowest < -options.positivity_tolerance) {
        std::ostringstream msg;
        msg << "density matrix eigenvalue " << lowest << " at t = " << t << " is below -" << options.positivity_tolerance;
        throw positivity_error(msg.str(), t, lowest);
      }
    }
    out.min_eigenvalue.push_back(lowest);
  };

  MatrixXc rho = rho0.matrix;
  const Eigen::Index n = rho.rows();
  require_operators(lowering, n);
  validate_density(rho0, n);
  std::vector<MatrixXc> o(lowering.size(), MatrixXc::Zero(n, n));
  if (bath.markov) o = markov_limit_dissipator(lowering).o;
  record(rho, o, grid.t_start);

  std::optional<Eigenbasis> basis;
  std::optional<ExponentialRk4> stepper;
  Rhs rhs;
  std::vector<MatrixXc> u;
  for (int k = 0; k < grid.n_steps; ++k) {
    if (!basis || !constant) {
      const auto h = cell_h(k);
      if (h.dimension() != n) throw opensys_error("Hamiltonian dimension changed between cells");
      basis = diagonalize(h);
      rhs = make_rhs(*basis, lowering, bath, true);
      stepper.emplace(blocks_for(*basis, bath, lowering.size(), true), h_step);
    }
    u.assign(1, basis->to(rho));
    if (!bath.markov)
      for (const auto& oj : o) u.push_back(basis->to(oj));
    double t = grid.time(k);
    for (int s = 0; s < options.substeps; ++s) {
      stepper->step(u, t, rhs);
      u[0] = 0.5 * (u[0] + u[0].adjoint()).eval();
      t = grid.time(k) + (s + 1) * h_step;
    }
    rho = basis->from(u[0]);
    rho = 0.5 * (rho + rho.adjoint()).eval();
    if (!bath.markov) {
      for (std::size_t j = 0; j < o.size(); ++j) o[j] = basis->from(u[1 + j]);
      require_bounded(o, grid.time(k + 1));
    }
    record(rho, o, out.times[static_cast<std::size_t>(k) + 1]);
  }
  return out;
}

MatrixXc embed(const MatrixXc& effective) {
  MatrixXc out = MatrixXc::Zero(7, 7);
  out.bottomRightCorner(6, 6) = effective;
  return out;
}

}  // namespace

void BathSpec::validate() const {
  if (!(gamma > 0) || !std::isfinite(gamma)) throw opensys_error("gamma must be positive and finite");
  if (!(lambda_a >= 0) || !(lambda_b >= 0) || !std::isfinite(lambda_a) || !std::isfinite(lambda_b))
    throw opensys_error("bath couplings must be non-negative");
}

double ou_kernel(double gamma, double t, double s) {
  if (!(gamma > 0)) throw opensys_error("gamma must be positive");
  return 0.5 * gamma * std::exp(-gamma * std::abs(t - s));
}

HamiltonianMatrix<double> open_hamiltonian(const EffectiveParams<double>& p,
                                           std::optional<std::pair<double, double>> magnon_frequencies) {
  const auto h = build_effective_hamiltonian(p, magnon_frequencies);
  return {embed(h.matrix), BasisLayout::open(), true};
}

StateVector to_open_layout(const StateVector& psi) {
  if (psi.layout != BasisLayout::effective()) throw opensys_error("state is not on the effective layout");
  StateVector out{VectorXc::Zero(7), BasisLayout::open()};
  out.amplitudes.tail(6) = psi.amplitudes;
  return out;
}

std::vector<MatrixXc> lowering_operators(const BathSpec& bath) {
  bath.validate();
  const auto layout = BasisLayout::open();
  const auto vac = static_cast<Eigen::Index>(layout.index_of("vac"));
  std::vector<MatrixXc> out;
  for (const char* site : {"1", "2"}) {
    MatrixXc l = MatrixXc::Zero(7, 7);
    l(vac, static_cast<Eigen::Index>(layout.index_of(std::string("co") + site))) = bath.lambda_a;
    l(vac, static_cast<Eigen::Index>(layout.index_of(std::string("cm") + site))) = bath.lambda_b;
    out.push_back(l);
  }
  return out;
}

OOperatorState markov_limit_dissipator(const std::vector<MatrixXc>& lowering, double t) {
  OOperatorState s;
  s.t = t;
  for (const auto& l : lowering) s.o.push_back(0.5 * l);
  return s;
}

std::vector<OOperatorState> evolve_o_operators(const HamiltonianMatrix<double>& h, const std::vector<MatrixXc>& lowering,
                                               const BathSpec& bath, const TimeGrid& grid, const OpenOptions& options) {
  bath.validate();
  if (options.substeps < 1) throw opensys_error("substeps must be positive");
  if (lowering.empty()) throw opensys_error("at least one bath operator is required");
  const Eigen::Index n = h.dimension();
  require_operators(lowering, n);

  std::vector<OOperatorState> out;
  if (bath.markov) {
    for (double t : grid.times()) out.push_back(markov_limit_dissipator(lowering, t));
    return out;
  }
  const auto basis = diagonalize(h);
  const auto rhs = make_rhs(basis, lowering, bath, false);
  const double h_step = grid.dt() / options.substeps;
  ExponentialRk4 stepper(blocks_for(basis, bath, lowering.size(), false), h_step);

  std::vector<MatrixXc> u(lowering.size(), MatrixXc::Zero(n, n));
  const auto times = grid.times();
  out.push_back({times[0], u});
  for (int k = 0; k < grid.n_steps; ++k) {
    for (int s = 0; s < options.substeps; ++s) stepper.step(u, grid.time(k) + s * h_step, rhs);
    OOperatorState state{times[static_cast<std::size_t>(k) + 1], {}};
    for (const auto& m : u) state.o.push_back(basis.from(m));
    require_bounded(state.o, state.t);
    out.push_back(std::move(state));
  }
  return out;
}

MasterTrajectory propagate_master_equation(const HamiltonianMatrix<double>& h, const std::vector<MatrixXc>& lowering,
                                           const BathSpec& bath, const DensityMatrix& rho0, const TimeGrid& grid,
                                           const OpenOptions& options) {
  return run_master([&h](int) { return h; }, true, lowering, bath, rho0, grid, options);
}

MasterTrajectory propagate_master_equation(const HamiltonianSource& h, const std::vector<MatrixXc>& lowering,
                                           const BathSpec& bath, const DensityMatrix& rho0, const TimeGrid& grid,
                                           const OpenOptions& options) {
  return run_master([&](int k) { return h(grid.time(k) + 0.5 * grid.dt()); }, false, lowering, bath, rho0, grid,
                    options);
}

namespace {

struct QsdSums {
  std::vector<MatrixXc> sum;          // sum of rho
  std::vector<Eigen::MatrixXd> sum_abs2;  // sum of |rho_ij|^2
  std::vector<MatrixXc> sum_sq;       // sum of rho_ij^2

  void reset(std::size_t samples, Eigen::Index n) {
    sum.assign(samples, MatrixXc::Zero(n, n));
    sum_abs2.assign(samples, Eigen::MatrixXd::Zero(n, n));
    sum_sq.assign(samples, MatrixXc::Zero(n, n));
  }
  void add(std::size_t k, const VectorXc& psi) {
    const MatrixXc rho = psi * psi.adjoint();
    sum[k] += rho;
    sum_abs2[k] += rho.cwiseAbs2();
    sum_sq[k] += rho.cwiseProduct(rho);
  }
  void merge(const QsdSums& other) {
    for (std::size_t k = 0; k < sum.size(); ++k) {
      sum[k] += other.sum[k];
      sum_abs2[k] += other.sum_abs2[k];
      sum_sq[k] += other.sum_sq[k];
    }
  }
};

std::complex<double> complex_normal(std::mt19937_64& rng, double variance) {
  std::normal_distribution<double> normal(0.0, std::sqrt(0.5 * variance));
  const double re = normal(rng);
  const double im = normal(rng);
  return {re, im};
}

}  // namespace

QsdEnsemble propagate_qsd_trajectories(const HamiltonianMatrix<double>& h, const std::vector<MatrixXc>& lowering,
                                       const BathSpec& bath, const StateVector& psi0, const TimeGrid& grid,
                                       int n_trajectories, std::uint64_t seed, const QsdOptions& options) {
  bath.validate();
  if (n_trajectories < 1) throw opensys_error("need at least one trajectory");
  if (options.substeps < 1) throw opensys_error("substeps must be positive");
  if (lowering.empty()) throw opensys_error("at least one bath operator is required");
  const Eigen::Index n = h.dimension();
  require_operators(lowering, n);
  if (psi0.amplitudes.size() != n) throw opensys_error("initial state does not match the Hamiltonian");
  const auto m1 = psi0.layout.find("m1");
  const auto m2 = psi0.layout.find("m2");

  const auto basis = diagonalize(h);
  const int steps = grid.n_steps * options.substeps;
  const double h_step = grid.dt() / options.substeps;
  const double half = 0.5 * h_step;
  const std::size_t n_baths = lowering.size();

  std::vector<MatrixXc> l_eig;
  for (const auto& l : lowering) l_eig.push_back(basis.to(l));

  // sum_j L_j^dagger O_j on the half-step grid, in the eigenbasis.
  std::vector<MatrixXc> damping;
  {
    const auto o = evolve_o_operators(h, lowering, bath, TimeGrid(grid.t_start, grid.t_end, 2 * steps));
    damping.reserve(o.size());
    for (const auto& state : o) {
      MatrixXc a = MatrixXc::Zero(n, n);
      for (std::size_t j = 0; j < n_baths; ++j) a += l_eig[j].adjoint() * basis.to(state.o[j]);
      damping.push_back(std::move(a));
    }
  }

  const std::vector<BlockSpec> blocks{{basis.energies, Eigen::VectorXd::Zero(1), 0.0}};
  const VectorXc start = basis.vectors.adjoint() * psi0.amplitudes;
  const std::size_t samples = static_cast<std::size_t>(grid.n_steps) + 1;

  constexpr int kBlock = 32;
  const int n_blocks = (n_trajectories + kBlock - 1) / kBlock;
  std::vector<QsdSums> block_sums(static_cast<std::size_t>(n_blocks));
  std::atomic<int> next{0};

  auto worker = [&]() {
    ExponentialRk4 stepper(blocks, h_step);
    std::vector<std::vector<std::complex<double>>> z(n_baths, std::vector<std::complex<double>>(2 * steps + 1));
    const double decay = std::exp(-bath.gamma * half);
    const double innovation = 0.5 * bath.gamma * (1.0 - decay * decay);
    std::vector<MatrixXc> u(1);
    for (int b = next++; b < n_blocks; b = next++) {
      auto& sums = block_sums[static_cast<std::size_t>(b)];
      sums.reset(samples, n);
      const int first = b * kBlock;
      const int last = std::min(n_trajectories, first + kBlock);
      for (int traj = first; traj < last; ++traj) {
        std::seed_seq sequence{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                               static_cast<std::uint32_t>(traj), 0x51D5u};
        std::mt19937_64 rng(sequence);
        for (auto& zj : z) {
          if (options.zero_noise) {
            std::fill(zj.begin(), zj.end(), 0.0);
          } else if (bath.markov) {
            // White noise: dW/dt held constant over each step (all three stage points).
            for (int s = 0; s < steps; ++s) {
              const auto w = complex_normal(rng, h_step) / h_step;
              zj[2 * s] = zj[2 * s + 1] = w;
            }
            zj[2 * steps] = 0.0;
          } else {
            zj[0] = complex_normal(rng, 0.5 * bath.gamma);
            for (int i = 1; i <= 2 * steps; ++i) zj[i] = decay * zj[i - 1] + complex_normal(rng, innovation);
          }
        }
        int step_index = 0;
        auto rhs = [&](const std::vector<MatrixXc>& v, double t, std::vector<MatrixXc>& out) {
          const double offset = (t - grid.t_start) / half - 2.0 * step_index;
          const int stage = static_cast<int>(std::lround(offset));
          // Markov noise is constant over the step, including its end point.
          const int idx = bath.markov ? 2 * step_index : 2 * step_index + stage;
          out[0] = -damping[static_cast<std::size_t>(2 * step_index + stage)] * v[0];
          for (std::size_t j = 0; j < n_baths; ++j) out[0].noalias() += std::conj(z[j][idx]) * (l_eig[j] * v[0]);
        };
        u[0] = start;
        sums.add(0, psi0.amplitudes);
        for (int s = 0; s < steps; ++s) {
          step_index = s;
          stepper.step(u, grid.t_start + s * h_step, rhs);
          if ((s + 1) % options.substeps == 0)
            sums.add(static_cast<std::size_t>((s + 1) / options.substeps), basis.vectors * u[0]);
        }
      }
    }
  };
  const int threads = std::max(1, std::min(options.threads, n_blocks));
  std::vector<std::thread> pool;
  for (int i = 1; i < threads; ++i) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  QsdSums total = std::move(block_sums[0]);
  for (int b = 1; b < n_blocks; ++b) total.merge(block_sums[static_cast<std::size_t>(b)]);

  QsdEnsemble out;
  out.trajectories = n_trajectories;
  out.times = grid.times();
  const double count = n_trajectories;
  const double bessel = n_trajectories > 1 ? count / (count - 1.0) : 0.0;
  for (std::size_t k = 0; k < samples; ++k) {
    const MatrixXc mean = total.sum[k] / count;
    const Eigen::MatrixXd var = ((total.sum_abs2[k] / count) - mean.cwiseAbs2()).cwiseMax(0.0) * bessel;
    out.mean.push_back({mean, psi0.layout});
    out.standard_error.push_back((var / count).cwiseSqrt());
    if (m1 && m2) {
      const auto i = static_cast<Eigen::Index>(*m1), j = static_cast<Eigen::Index>(*m2);
      const std::complex<double> mu = mean(i, j);
      const std::complex<double> phase = std::abs(mu) > 0 ? mu / std::abs(mu) : 1.0;
      const double second = 0.5 * (total.sum_abs2[k](i, j) / count +
                                   std::real(std::conj(phase * phase) * total.sum_sq[k](i, j) / count));
      const double v = std::max(0.0, second - std::norm(mu)) * bessel;
      out.concurrence.push_back(2.0 * std::abs(mu));
      out.concurrence_error.push_back(2.0 * std::sqrt(v / count));
    } else {
      out.concurrence.push_back(std::numeric_limits<double>::quiet_NaN());
      out.concurrence_error.push_back(std::numeric_limits<double>::quiet_NaN());
    }
  }
  return out;
}

double magnon_concurrence(const DensityMatrix& rho) {
  return concurrence_wootters(reduce_to_magnons(rho), 1e-6);
}

ControlledOpenResult controlled_open_dynamics(const ControlProblem& problem, const ControlField& optimized,
                                              const BathSpec& bath, const OpenOptions& options) {
  problem.validate();
  optimized.validate();
  if (optimized.cells() != problem.n_steps) throw opensys_error("control field does not match the problem grid");
  const auto grid = problem.grid();
  const auto rho0 = DensityMatrix::pure(to_open_layout(problem.initial));
  const VectorXc target = to_open_layout(problem.target).amplitudes;
  auto cell_h = [&](int k) {
    return open_hamiltonian(problem.params, std::pair<double, double>{optimized.values[0](k), optimized.values[1](k)});
  };
  const auto traj = run_master(cell_h, false, lowering_operators(bath), bath, rho0, grid, options);

  ControlledOpenResult out;
  out.times = traj.times;
  out.trace_error = traj.trace_error;
  out.min_eigenvalue = traj.min_eigenvalue;
  for (const auto& rho : traj.states) {
    out.concurrence.push_back(magnon_concurrence(rho));
    out.fidelity.push_back(std::real(target.dot(rho.matrix * target)));
  }
  out.final_state = traj.states.back();
  return out;
}

}  // namespace magnon

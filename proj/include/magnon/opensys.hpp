#pragma once

// Dissipative dynamics of the magnon chain with its cavity modes coupled to
// Ornstein-Uhlenbeck baths: the leading-order O-operator master equation, its
// Markov limit, and linear quantum-state-diffusion trajectories.
//
// States live on BasisLayout::open(), the single-excitation sector plus the
// joint vacuum.  All propagators take the Hamiltonian and the bath operators
// L_j as plain matrices, so they work for any dimension.

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "magnon/control.hpp"
#include "magnon/dynamics.hpp"
#include "magnon/model.hpp"

namespace magnon {

class opensys_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Entries of O-bar grew past 1e6; the leading-order closure is not valid.
class strong_coupling_error : public opensys_error {
 public:
  using opensys_error::opensys_error;
};

class positivity_error : public opensys_error {
 public:
  positivity_error(const std::string& what, double t, double eigenvalue)
      : opensys_error(what), time(t), worst_eigenvalue(eigenvalue) {}
  double time;
  double worst_eigenvalue;
};

struct BathSpec {
  double gamma = 0.7;      // OU rate, inverse memory time
  double lambda_a = 0.01;  // optical cavity coupling
  double lambda_b = 0.01;  // microwave cavity coupling
  bool markov = false;     // replace O-bar by L/2

  void validate() const;
};

/// gamma exp(-gamma |t - s|) / 2.
double ou_kernel(double gamma, double t, double s);

/// Effective Hamiltonian embedded in the open layout (vacuum energy 0).
HamiltonianMatrix<double> open_hamiltonian(const EffectiveParams<double>& p,
                                           std::optional<std::pair<double, double>> magnon_frequencies = {});

/// Embeds a state of the effective layout into the open layout.
StateVector to_open_layout(const StateVector& psi);

/// L_j = lambda_a a_j + lambda_b b_j on the open layout, j = 1, 2.
std::vector<MatrixXc> lowering_operators(const BathSpec& bath);

struct OOperatorState {
  double t = 0;
  std::vector<MatrixXc> o;  // one per bath
};

/// O-bar_j = L_j / 2 for every bath.
OOperatorState markov_limit_dissipator(const std::vector<MatrixXc>& lowering, double t = 0);

struct OpenOptions {
  int substeps = 4;                    // integrator steps per grid cell
  double positivity_tolerance = 1e-6;  // allowed negative eigenvalue of rho
  bool check_positivity = true;
  bool record_o = true;  // keep O-bar at every grid point (master equation only)
};

/// dO_j/dt = (gamma/2) L_j - gamma O_j + [-iH - sum_k L_k^dagger O_k, O_j],
/// O_j(0) = 0, on every grid point.  Throws strong_coupling_error on divergence.
std::vector<OOperatorState> evolve_o_operators(const HamiltonianMatrix<double>& h, const std::vector<MatrixXc>& lowering,
                                               const BathSpec& bath, const TimeGrid& grid, const OpenOptions& options = {});

struct MasterTrajectory {
  std::vector<double> times;
  std::vector<DensityMatrix> states;
  std::vector<OOperatorState> o;       // empty unless options.record_o
  std::vector<double> trace_error;     // |tr rho - 1|
  std::vector<double> min_eigenvalue;  // NaN when positivity checks are off
};

/// drho/dt = -i[H, rho] + sum_j [L_j, rho O_j^dagger] - [L_j^dagger, O_j rho]
/// integrated jointly with O-bar (or with O-bar = L/2 when bath.markov).
/// Throws positivity_error when rho develops an eigenvalue below
/// -positivity_tolerance at a grid point.
MasterTrajectory propagate_master_equation(const HamiltonianMatrix<double>& h, const std::vector<MatrixXc>& lowering,
                                           const BathSpec& bath, const DensityMatrix& rho0, const TimeGrid& grid,
                                           const OpenOptions& options = {});

/// Same with H(t) held constant on each grid cell at its midpoint value.
MasterTrajectory propagate_master_equation(const HamiltonianSource& h, const std::vector<MatrixXc>& lowering,
                                           const BathSpec& bath, const DensityMatrix& rho0, const TimeGrid& grid,
                                           const OpenOptions& options = {});

struct QsdOptions {
  int substeps = 4;
  int threads = 1;
  bool zero_noise = false;  // drift-only trajectories
};

struct QsdEnsemble {
  std::vector<double> times;
  std::vector<DensityMatrix> mean;                // M[|psi><psi|]
  std::vector<Eigen::MatrixXd> standard_error;    // entrywise, of the complex mean
  std::vector<double> concurrence;                // of the mean state
  std::vector<double> concurrence_error;          // linearised standard error of 2|rho_m1m2|
  int trajectories = 0;
};

/// Linear QSD with complex OU noise of covariance ou_kernel (white noise when
/// bath.markov).  Trajectory i draws from its own generator seeded by
/// (seed, i); the reduction order is fixed, so results do not depend on
/// `threads`.
QsdEnsemble propagate_qsd_trajectories(const HamiltonianMatrix<double>& h, const std::vector<MatrixXc>& lowering,
                                       const BathSpec& bath, const StateVector& psi0, const TimeGrid& grid,
                                       int n_trajectories, std::uint64_t seed, const QsdOptions& options = {});

/// Concurrence of the magnon pair after tracing out everything else.
double magnon_concurrence(const DensityMatrix& rho);

struct ControlledOpenResult {
  std::vector<double> times;
  std::vector<double> concurrence;
  std::vector<double> fidelity;  // <target| rho |target>
  std::vector<double> trace_error;
  std::vector<double> min_eigenvalue;
  DensityMatrix final_state;
};

/// Master-equation run of the controlled problem, with the Hamiltonian of each
/// control cell built from the optimized fields.
ControlledOpenResult controlled_open_dynamics(const ControlProblem& problem, const ControlField& optimized,
                                              const BathSpec& bath, const OpenOptions& options = {});

}  // namespace magnon

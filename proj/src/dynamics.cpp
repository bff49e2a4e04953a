#include "magnon/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace magnon {

namespace {

void require_hermitian(const HamiltonianMatrix<double>& h) {
  if (!h.hermitian) throw model_error("propagation requires a hermitian Hamiltonian");
  if (h.hermiticity_defect() > 1e-12) throw model_error("Hamiltonian flagged hermitian is not");
}

void require_matching(const HamiltonianMatrix<double>& h, const StateVector& psi) {
  if (h.dimension() != psi.amplitudes.size() || h.layout.size() != psi.layout.size())
    throw model_error("state and Hamiltonian dimensions differ");
}

}  // namespace

StateVector StateVector::basis_state(const BasisLayout& layout, const std::string& label) {
  StateVector s{VectorXc::Zero(static_cast<Eigen::Index>(layout.size())), layout};
  s.amplitudes(static_cast<Eigen::Index>(layout.index_of(label))) = 1.0;
  return s;
}

TimeGrid::TimeGrid(double start, double end, int steps) : t_start(start), t_end(end), n_steps(steps) {
  if (!(end > start)) throw model_error("time grid needs t_end > t_start");
  if (steps <= 0) throw model_error("time grid needs a positive step count");
}

std::vector<double> TimeGrid::times() const {
  std::vector<double> t(static_cast<std::size_t>(n_steps) + 1);
  for (int k = 0; k <= n_steps; ++k) t[static_cast<std::size_t>(k)] = time(k);
  t.back() = t_end;
  return t;
}

int default_step_count(const MatrixXc& h, double t_start, double t_end) {
  if (!(t_end > t_start)) throw model_error("time grid needs t_end > t_start");
  const double steps = std::ceil((t_end - t_start) * h.diagonal().cwiseAbs().maxCoeff() / 0.05);
  if (!(steps < std::numeric_limits<int>::max())) throw model_error("default step count overflows; give n_steps explicitly");
  return std::max(1, static_cast<int>(steps));
}

SpectralPropagator::SpectralPropagator(const HamiltonianMatrix<double>& h) : layout_(h.layout) {
  require_hermitian(h);
  Eigen::SelfAdjointEigenSolver<MatrixXc> solver(h.matrix);
  if (solver.info() != Eigen::Success) throw model_error("eigendecomposition failed");
  energies_ = solver.eigenvalues();
  vectors_ = solver.eigenvectors();
}

VectorXc SpectralPropagator::evolve(const VectorXc& psi0, double t) const {
  if (t == 0) return psi0;
  VectorXc coefficients = vectors_.adjoint() * psi0;
  for (Eigen::Index k = 0; k < coefficients.size(); ++k)
    coefficients(k) *= std::polar(1.0, -energies_(k) * t);
  return vectors_ * coefficients;
}

MatrixXc SpectralPropagator::unitary(double t) const {
  VectorXc phases(energies_.size());
  for (Eigen::Index k = 0; k < phases.size(); ++k) phases(k) = std::polar(1.0, -energies_(k) * t);
  return vectors_ * phases.asDiagonal() * vectors_.adjoint();
}

Trajectory sample_constant(const HamiltonianMatrix<double>& h, const StateVector& psi0, std::span<const double> times) {
  require_matching(h, psi0);
  const SpectralPropagator propagator(h);
  Trajectory out;
  out.times.assign(times.begin(), times.end());
  out.states.reserve(times.size());
  for (double t : times) out.states.push_back({propagator.evolve(psi0.amplitudes, t), psi0.layout});
  return out;
}

Trajectory propagate_constant(const HamiltonianMatrix<double>& h, const StateVector& psi0, const TimeGrid& grid) {
  // Times are measured from t_start: psi0 is the state at grid.t_start.
  auto times = grid.times();
  std::vector<double> elapsed(times.size());
  std::transform(times.begin(), times.end(), elapsed.begin(), [&](double t) { return t - grid.t_start; });
  auto out = sample_constant(h, psi0, elapsed);
  out.times = std::move(times);
  out.states.front() = psi0;
  return out;
}

MatrixXc cell_propagator(const MatrixXc& h, double dt) {
  Eigen::SelfAdjointEigenSolver<MatrixXc> solver(h);
  const auto& v = solver.eigenvectors();
  VectorXc phases(h.rows());
  for (Eigen::Index k = 0; k < phases.size(); ++k) phases(k) = std::polar(1.0, -solver.eigenvalues()(k) * dt);
  return v * phases.asDiagonal() * v.adjoint();
}

Trajectory propagate_timedep(const HamiltonianSource& h_of_t, const StateVector& psi0, const TimeGrid& grid) {
  Trajectory out;
  out.times = grid.times();
  out.states.reserve(out.times.size());
  out.states.push_back(psi0);
  const double dt = grid.dt();
  VectorXc psi = psi0.amplitudes;
  for (int k = 0; k < grid.n_steps; ++k) {
    const auto h = h_of_t(grid.time(k) + 0.5 * dt);
    if (!h.matrix.allFinite()) throw model_error("non-finite Hamiltonian entry at t=" + std::to_string(grid.time(k)));
    require_hermitian(h);
    require_matching(h, psi0);
    psi = cell_propagator(h.matrix, dt) * psi;
    out.states.push_back({psi, psi0.layout});
  }
  return out;
}

EffectiveParams<double> effective_from_full(const FullModelParams<double>& full, DetuningConvention convention) {
  EffectiveParams<double> p;
  p.omega_a = full.omega_a_prime;
  p.omega_b = full.omega_b_prime;
  p.omega_m = full.omega_m;
  p.g_m = full.g_mb;
  p.g_c = compute_effective_coupling(full, convention);
  p.j_a = full.j_a;
  return p;
}

AdiabaticReport validate_adiabatic_elimination(const FullModelParams<double>& full, const TimeGrid& grid,
                                               DetuningConvention convention) {
  AdiabaticReport report;
  const auto effective = effective_from_full(full, convention);
  report.effective_coupling = effective.g_c;

  const double largest_coupling = std::max({std::abs(full.g_cb), std::abs(full.g_ca), std::abs(full.Omega)});
  if (std::min(full.delta_1, full.delta_2) < 10.0 * largest_coupling) {
    report.regime_ok = false;
    std::ostringstream msg;
    msg << "converter detunings (" << full.delta_1 << ", " << full.delta_2
        << ") are less than 10x the largest converter coupling " << largest_coupling;
    report.warning = msg.str();
  }

  const auto h_full = build_full_hamiltonian(full);
  const auto h_eff = build_effective_hamiltonian(effective);
  const auto full_traj = propagate_constant(h_full, StateVector::basis_state(h_full.layout, "m1"), grid);
  const auto eff_traj = propagate_constant(h_eff, StateVector::basis_state(h_eff.layout, "m1"), grid);

  for (std::size_t k = 0; k < full_traj.size(); ++k) {
    for (const char* label : {"m1", "m2"}) {
      const double d = std::abs(full_traj.states[k][label] - eff_traj.states[k][label]);
      report.max_deviation = std::max(report.max_deviation, d);
    }
  }
  return report;
}

}  // namespace magnon

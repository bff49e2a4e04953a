#include "magnon/control.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "magnon/entanglement.hpp"

namespace magnon {

namespace {

double sample_shape(const ShapeFunction& s, double t) {
  if (!s) return 1.0;
  const double v = s(t);
  if (!(v >= 0.0 && v <= 1.0)) throw control_error("shape function left [0, 1]");
  return v;
}

void require_normalized(const StateVector& s, const char* what) {
  if (std::abs(s.norm() - 1.0) > 1e-9) throw control_error(std::string(what) + " is not normalized");
}

void require_grid(const ControlField& fields, const Trajectory& traj, const char* what) {
  if (traj.size() != static_cast<std::size_t>(fields.cells()) + 1)
    throw control_error(std::string(what) + " does not match the control grid");
}

MatrixXc cell_unitary(const ControlProblem& problem, const ControlField& fields, int k, double dt) {
  return cell_propagator(problem.hamiltonian(fields.values[0](k), fields.values[1](k)).matrix, dt);
}

// (e^z - 1) / z
std::complex<double> phi1(std::complex<double> z) {
  if (std::abs(z) < 1e-4) return 1.0 + z / 2.0 + z * z / 6.0;
  return (std::exp(z) - 1.0) / z;
}

// Im <chi(t)| N_l |psi(t)> averaged over one cell of constant H, with psi(t)
// started from psi at the cell's start and chi(t) ending at chi at its end.
std::array<double, kNumControls> cell_averaged_gradient(const MatrixXc& h, double dt, const VectorXc& psi,
                                                        const VectorXc& chi) {
  const Eigen::SelfAdjointEigenSolver<MatrixXc> solver(h);
  const auto& v = solver.eigenvectors();
  const auto& e = solver.eigenvalues();
  const VectorXc a = v.adjoint() * psi;
  const VectorXc b = v.adjoint() * chi;
  const auto n = e.size();
  MatrixXc w(n, n);
  for (Eigen::Index r = 0; r < n; ++r)
    for (Eigen::Index c = 0; c < n; ++c)
      w(r, c) = std::polar(1.0, -e(r) * dt) * phi1(std::complex<double>(0, (e(r) - e(c)) * dt));
  std::array<double, kNumControls> out{};
  for (int l = 0; l < kNumControls; ++l) {
    const VectorXc x = (b.array() * v.row(l).transpose().array()).conjugate();
    const VectorXc y = v.row(l).transpose().array() * a.array();
    out[static_cast<std::size_t>(l)] = std::imag(x.cwiseProduct(w * y).sum());
  }
  return out;
}

}  // namespace

ControlField ControlField::constant(const TimeGrid& grid, double value, std::array<double, kNumControls> lambda) {
  ControlField f;
  f.grid = grid;
  f.lambda = lambda;
  for (int l = 0; l < kNumControls; ++l) {
    f.values[l] = Eigen::VectorXd::Constant(grid.n_steps, value);
    f.reference[l] = f.values[l];
    f.shape[l] = Eigen::VectorXd::Ones(grid.n_steps);
  }
  return f;
}

void ControlField::validate() const {
  for (int l = 0; l < kNumControls; ++l) {
    if (values[l].size() != grid.n_steps || reference[l].size() != grid.n_steps || shape[l].size() != grid.n_steps)
      throw control_error("control samples do not match the grid");
    if (!(lambda[l] > 0)) throw control_error("lambda must be positive");
    if ((shape[l].array() < 0.0).any() || (shape[l].array() > 1.0).any())
      throw control_error("shape samples must lie in [0, 1]");
    if (!values[l].allFinite()) throw control_error("non-finite control values");
  }
}

ShapeFunction flattop_shape(double t_start, double t_end, double rise) {
  return [=](double t) {
    if (t <= t_start || t >= t_end) return 0.0;
    if (rise <= 0) return 1.0;
    const double edge = std::min(t - t_start, t_end - t);
    if (edge >= rise) return 1.0;
    const double s = std::sin(0.5 * std::numbers::pi * edge / rise);
    return s * s;
  };
}

ControlProblem ControlProblem::bell_state(const EffectiveParams<double>& params, double total_time, int n_steps) {
  ControlProblem p;
  p.params = params;
  const auto layout = BasisLayout::effective();
  p.initial = StateVector::basis_state(layout, "m1");
  p.target = StateVector{VectorXc::Zero(6), layout};
  p.target.amplitudes(0) = p.target.amplitudes(1) = 1.0 / std::sqrt(2.0);
  p.total_time = total_time;
  p.n_steps = n_steps;
  return p;
}

HamiltonianMatrix<double> ControlProblem::hamiltonian(double f1, double f2) const {
  return build_effective_hamiltonian(params, std::pair<double, double>{f1, f2});
}

ControlField ControlProblem::initial_field() const {
  auto f = ControlField::constant(grid(), guess, lambda);
  const double dt = grid().dt();
  for (int l = 0; l < kNumControls; ++l)
    for (int k = 0; k < n_steps; ++k) f.shape[l](k) = sample_shape(shape[l], (k + 0.5) * dt);
  return f;
}

std::array<double, kNumControls> ControlProblem::lambda_at(int iteration) const {
  std::array<double, kNumControls> out{};
  const double factor = std::pow(lambda_decay, std::max(iteration - 1, 0));
  for (int l = 0; l < kNumControls; ++l) out[l] = std::max(std::min(lambda_min, lambda[l]), lambda[l] * factor);
  return out;
}

void ControlProblem::validate() const {
  params.validate();
  if (!(total_time > 0)) throw control_error("total time must be positive");
  if (n_steps <= 0) throw control_error("control grid needs cells");
  if (initial.layout != BasisLayout::effective() || target.layout != BasisLayout::effective())
    throw control_error("control states must use the effective layout");
  require_normalized(initial, "initial state");
  require_normalized(target, "target state");
  if (!(stop.lower_bound < stop.upper_bound)) throw control_error("empty control bounds");
  for (double l : lambda)
    if (!(l > 0)) throw control_error("lambda must be positive");
  if (!(lambda_decay > 0 && lambda_decay <= 1)) throw control_error("lambda_decay must lie in (0, 1]");
  if (!(lambda_min > 0)) throw control_error("lambda_min must be positive");
}

FunctionalValue evaluate_functional(const StateVector& psi_T, const StateVector& target, const ControlField& fields) {
  require_normalized(psi_T, "final state");
  require_normalized(target, "target state");
  FunctionalValue out;
  out.J_T = 1.0 - std::norm(target.amplitudes.dot(psi_T.amplitudes));
  const double dt = fields.grid.dt();
  for (int l = 0; l < kNumControls; ++l) {
    for (int k = 0; k < fields.cells(); ++k) {
      const double s = fields.shape[l](k);
      if (s == 0.0) continue;
      const double df = fields.values[l](k) - fields.reference[l](k);
      out.running_cost += fields.lambda[l] / s * df * df * dt;
    }
  }
  out.J = out.J_T + out.running_cost;
  return out;
}

Trajectory forward_propagate(const ControlProblem& problem, const ControlField& fields) {
  const auto grid = problem.grid();
  Trajectory out;
  out.times = grid.times();
  out.states.reserve(out.times.size());
  out.states.push_back(problem.initial);
  VectorXc psi = problem.initial.amplitudes;
  for (int k = 0; k < grid.n_steps; ++k) {
    psi = cell_unitary(problem, fields, k, grid.dt()) * psi;
    out.states.push_back({psi, problem.initial.layout});
  }
  return out;
}

Trajectory backward_propagate(const ControlProblem& problem, const ControlField& fields, const StateVector& psi_T) {
  const auto grid = problem.grid();
  if (fields.cells() != grid.n_steps) throw control_error("control field does not match the problem grid");
  std::vector<MatrixXc> propagators;
  propagators.reserve(static_cast<std::size_t>(grid.n_steps));
  for (int k = 0; k < grid.n_steps; ++k) propagators.push_back(cell_unitary(problem, fields, k, grid.dt()));
  return backward_propagate(problem, propagators, psi_T);
}

Trajectory backward_propagate(const ControlProblem& problem, const std::vector<MatrixXc>& propagators,
                              const StateVector& psi_T) {
  const auto grid = problem.grid();
  if (propagators.size() != static_cast<std::size_t>(grid.n_steps))
    throw control_error("propagators do not match the problem grid");
  Trajectory out;
  out.times = grid.times();
  out.states.assign(out.times.size(), StateVector{});
  VectorXc chi = problem.target.amplitudes.dot(psi_T.amplitudes) * problem.target.amplitudes;
  out.states.back() = {chi, problem.target.layout};
  for (int k = grid.n_steps - 1; k >= 0; --k) {
    chi = propagators[static_cast<std::size_t>(k)].adjoint() * chi;
    out.states[static_cast<std::size_t>(k)] = {chi, problem.target.layout};
  }
  return out;
}

KrotovUpdate krotov_update_step(const ControlProblem& problem, const ControlField& fields, const Trajectory& forward,
                                const Trajectory& costate, double update_sign) {
  require_grid(fields, forward, "forward trajectory");
  require_grid(fields, costate, "costate trajectory");
  const auto grid = problem.grid();
  const double dt = grid.dt();

  KrotovUpdate out;
  out.fields = fields;
  out.fields.reference = fields.values;
  out.forward.times = grid.times();
  out.forward.states.reserve(out.forward.times.size());
  out.forward.states.push_back(problem.initial);
  out.propagators.reserve(static_cast<std::size_t>(grid.n_steps));

  VectorXc psi = problem.initial.amplitudes;
  for (int k = 0; k < grid.n_steps; ++k) {
    // Sequential: psi is the state under the already-updated earlier cells.
    const VectorXc& state = problem.sequential ? psi : forward.states[static_cast<std::size_t>(k)].amplitudes;
    const VectorXc& chi = costate.states[static_cast<std::size_t>(k) + 1].amplitudes;
    const auto gradient =
        cell_averaged_gradient(problem.hamiltonian(fields.values[0](k), fields.values[1](k)).matrix, dt, state, chi);
    for (int l = 0; l < kNumControls; ++l) {
      const double s = fields.shape[l](k);
      out.fields.values[l](k) = fields.values[l](k) + update_sign * s / fields.lambda[l] * gradient[l];
    }
    out.propagators.push_back(cell_unitary(problem, out.fields, k, dt));
    psi = out.propagators.back() * psi;
    out.forward.states.push_back({psi, problem.initial.layout});
  }
  return out;
}

std::string to_string(Termination t) {
  switch (t) {
    case Termination::Converged: return "converged";
    case Termination::BoundExceeded: return "bound-exceeded";
    case Termination::MaxIterations: return "max-iterations";
  }
  return "unknown";
}

ControlResult krotov_optimize(const ControlProblem& problem) {
  problem.validate();
  ControlResult result;
  result.fields = problem.initial_field();
  auto forward = forward_propagate(problem, result.fields);
  std::vector<MatrixXc> propagators;
  auto j_t = [&](const Trajectory& fw) { return 1.0 - std::norm(problem.target.amplitudes.dot(fw.back().amplitudes)); };
  result.j_t_history.push_back(j_t(forward));
  result.j_history.push_back(result.j_t_history.back());

  result.termination = Termination::MaxIterations;
  while (true) {
    if (result.j_t_history.back() <= problem.stop.j_target) {
      result.termination = Termination::Converged;
      break;
    }
    if (result.iterations >= problem.stop.max_iterations) break;

    result.fields.lambda = problem.lambda_at(result.iterations + 1);
    const auto costate = propagators.empty() ? backward_propagate(problem, result.fields, forward.back())
                                             : backward_propagate(problem, propagators, forward.back());
    auto update = krotov_update_step(problem, result.fields, forward, costate);
    for (int l = 0; l < kNumControls; ++l) {
      if (!update.fields.values[l].allFinite()) {
        std::ostringstream msg;
        msg << "non-finite control f_" << l + 1 << " in iteration " << result.iterations + 1;
        throw control_error(msg.str());
      }
    }
    bool in_range = true;
    for (int l = 0; l < kNumControls; ++l)
      in_range = in_range && update.fields.values[l].minCoeff() >= problem.stop.lower_bound &&
                 update.fields.values[l].maxCoeff() <= problem.stop.upper_bound;
    if (!in_range) {
      result.termination = Termination::BoundExceeded;
      break;
    }

    const auto value = evaluate_functional(update.forward.back(), problem.target, update.fields);
    result.fields = std::move(update.fields);
    forward = std::move(update.forward);
    propagators = std::move(update.propagators);
    result.j_t_history.push_back(value.J_T);
    result.j_history.push_back(value.J);
    ++result.iterations;
  }

  result.final_state = forward.back();
  result.final_j_t = result.j_t_history.back();
  result.final_concurrence = concurrence_pure(result.final_state.amplitudes(0), result.final_state.amplitudes(1));
  return result;
}

}  // namespace magnon

#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include "app.hpp"
#include "magnon/entanglement.hpp"
#include "magnon/oracles/oracles.hpp"

namespace magnon::app {

namespace {

CheckResult bounded(std::string name, double observed, double tolerance, std::string detail = "") {
  return {std::move(name), observed, tolerance, std::isfinite(observed) && observed <= tolerance, std::move(detail), {}};
}

StateVector open_initial(const ExperimentConfig& config) {
  return to_open_layout(StateVector::basis_state(BasisLayout::effective(), config.initial));
}

CheckResult wootters_vs_pure(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n;
  double worst = 0;
  for (int i = 0; i < 1000; ++i) {
    VectorXc v(6);
    for (auto& x : v) x = {n(rng), n(rng)};
    const StateVector psi{v.normalized(), BasisLayout::effective()};
    worst = std::max(worst, std::abs(concurrence_wootters(reduce_to_magnons(psi)) - concurrence_pure(psi["m1"], psi["m2"])));
  }
  return bounded("wootters_vs_pure", worst, 1e-9, "1000 random states");
}

CheckResult markov_vs_lindblad(const ExperimentConfig& config) {
  auto bath = config.bath;
  bath.markov = true;
  const auto h = open_hamiltonian(config.model);
  const auto lowering = lowering_operators(bath);
  const auto rho0 = DensityMatrix::pure(open_initial(config));
  const TimeGrid grid(0, 20, 200);
  OpenOptions options;
  options.substeps = 80;
  const auto me = propagate_master_equation(h, lowering, bath, rho0, grid, options);
  const auto ref = oracles::lindblad_propagate(h.matrix, lowering, rho0.matrix, grid);
  double worst = 0;
  for (std::size_t k = 0; k < ref.size(); ++k) worst = std::max(worst, (me.states[k].matrix - ref[k]).cwiseAbs().maxCoeff());
  return bounded("markov_vs_lindblad", worst, 1e-8, "t in [0, 20], step 1.25e-3");
}

CheckResult o_bar_vs_double_integral(const ExperimentConfig& config) {
  const auto h = open_hamiltonian(config.model);
  const auto lowering = lowering_operators(config.bath);
  const TimeGrid grid(0, 0.5, 1000);
  OpenOptions options;
  options.substeps = 10;
  const auto fast = evolve_o_operators(h, lowering, config.bath, grid, options);
  const auto slow = oracles::o_bar_double_integral(h.matrix, lowering, config.bath.gamma, grid);
  double worst = 0;
  for (std::size_t k = 0; k < slow.size(); ++k)
    for (std::size_t j = 0; j < lowering.size(); ++j) worst = std::max(worst, (fast[k].o[j] - slow[k][j]).cwiseAbs().maxCoeff());
  return bounded("o_bar_vs_double_integral", worst, 1e-5, "t in [0, 0.5]");
}

CheckResult krotov_gradient(const ExperimentConfig& config, std::uint64_t seed) {
  // A large lambda keeps the first sweep in the linear regime, where the
  // update equals -dJ_T/df / (2 lambda dt).
  const double total_time = config.control.total_times.front();
  auto problem = ControlProblem::bell_state(config.model, total_time,
                                            static_cast<int>(std::lround(config.control.steps_per_unit * total_time)));
  problem.guess = config.control.guess;
  problem.lambda = {1e4, 1e4};
  problem.sequential = config.control.sequential;
  const auto fields = problem.initial_field();
  const auto forward = forward_propagate(problem, fields);
  const auto costate = backward_propagate(problem, fields, forward.back());
  const auto update = krotov_update_step(problem, fields, forward, costate, config.validate.update_sign);
  const double dt = problem.grid().dt();

  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> cell(0, problem.n_steps - 1), control(0, kNumControls - 1);
  int probes = 0, mismatches = 0;
  double worst = 0;
  for (int attempt = 0; attempt < 2000 && probes < 20; ++attempt) {
    const int k = cell(rng), l = control(rng);
    const double fd = oracles::finite_difference_gradient(problem, fields, l, k);
    if (std::abs(fd) < 1e-7) continue;  // too close to a sign change
    ++probes;
    const double df = update.fields.values[l](k) - fields.values[l](k);
    const double predicted = -fd / (2 * problem.lambda[l] * dt);
    if (df * fd >= 0) ++mismatches;
    worst = std::max(worst, std::abs(df - predicted) / std::abs(predicted));
  }
  std::ostringstream detail;
  detail << mismatches << " sign mismatches in " << probes << " probes";
  auto r = bounded("krotov_gradient", worst, 1e-2, detail.str());
  r.passed = r.passed && probes == 20 && mismatches == 0;
  return r;
}

CheckResult adiabatic_sweep(const ExperimentConfig& config) {
  const TimeGrid grid(0, config.validate.adiabatic_horizon, config.validate.adiabatic_steps);
  // observed: largest change between successive detunings; the tolerance is roundoff.
  CheckResult r{"adiabatic_elimination", -std::numeric_limits<double>::infinity(), 1e-12, true, "", {}};
  std::ostringstream detail;
  detail << "deviation at detuning scale 1, 3, 10:";
  for (double scale : {1.0, 3.0, 10.0}) {
    auto full = config.validate.full;
    full.delta_1 *= scale;
    full.delta_2 *= scale;
    const auto report = validate_adiabatic_elimination(full, grid);
    if (!r.values.empty()) r.observed = std::max(r.observed, report.max_deviation - r.values.back());
    r.values.push_back(report.max_deviation);
    detail << " " << report.max_deviation;
    if (scale == 1.0 && !report.regime_ok) detail << " (" << report.warning << ")";
  }
  r.detail = detail.str();
  r.passed = r.observed <= r.tolerance;
  return r;
}

}  // namespace

std::vector<CheckResult> validate_suite(const ExperimentConfig& config) {
  const std::uint64_t seed = config.seed.value_or(0);
  return {wootters_vs_pure(seed), markov_vs_lindblad(config), o_bar_vs_double_integral(config),
          krotov_gradient(config, seed), adiabatic_sweep(config)};
}

}  // namespace magnon::app

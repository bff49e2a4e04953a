#include <doctest.h>

#include <cmath>
#include <random>

#include "magnon/control.hpp"
#include "magnon/entanglement.hpp"
#include "magnon/oracles/oracles.hpp"

using namespace magnon;

namespace {

const EffectiveParams<double> kControl{12, 1, 1, 1, 1.5, 3};

ControlProblem bell_problem(double total_time = 45) {
  return ControlProblem::bell_state(kControl, total_time, static_cast<int>(std::lround(20 * total_time)));
}

StateVector random_state(std::mt19937_64& rng) {
  std::normal_distribution<double> n;
  VectorXc v(6);
  for (auto& x : v) x = {n(rng), n(rng)};
  return {v.normalized(), BasisLayout::effective()};
}

KrotovUpdate first_sweep(const ControlProblem& problem, double update_sign = 1.0) {
  const auto fields = problem.initial_field();
  const auto forward = forward_propagate(problem, fields);
  const auto costate = backward_propagate(problem, fields, forward.back());
  return krotov_update_step(problem, fields, forward, costate, update_sign);
}

}  // namespace

TEST_CASE("functional at the target and orthogonal to it") {
  const auto problem = bell_problem();
  const auto fields = problem.initial_field();
  const auto at = evaluate_functional(problem.target, problem.target, fields);
  CHECK(at.J == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(at.running_cost == 0.0);

  const StateVector orth{(VectorXc(6) << 1, -1, 0, 0, 0, 0).finished() / std::sqrt(2.0), BasisLayout::effective()};
  CHECK(evaluate_functional(orth, problem.target, fields).J == doctest::Approx(1.0));

  std::mt19937_64 rng(1);
  for (int i = 0; i < 100; ++i) {
    const double jt = evaluate_functional(random_state(rng), random_state(rng), fields).J_T;
    CHECK(jt >= 0.0);
    CHECK(jt <= 1.0);
  }

  const StateVector unnormalized{VectorXc::Ones(6), BasisLayout::effective()};
  CHECK_THROWS_AS(evaluate_functional(unnormalized, problem.target, fields), control_error);
}

TEST_CASE("running cost") {
  const auto problem = bell_problem();
  auto fields = problem.initial_field();
  fields.values[0](3) += 0.1;
  fields.values[1](5) -= 0.2;
  const double dt = problem.grid().dt();
  auto cost = [&] { return evaluate_functional(problem.target, problem.target, fields).running_cost; };
  const double first = fields.lambda[0] * 0.01 * dt, second = fields.lambda[1] * 0.04 * dt;
  CHECK(std::abs(cost() - (first + second)) < 1e-15);

  fields.shape[1](5) = 0.5;
  CHECK(std::abs(cost() - (first + 2 * second)) < 1e-15);

  // Zero shape cells carry no cost.
  fields.shape[1](5) = 0;
  CHECK(std::abs(cost() - first) < 1e-15);
}

TEST_CASE("costate boundary values") {
  auto problem = bell_problem();
  const auto fields = problem.initial_field();
  const auto at_target = backward_propagate(problem, fields, problem.target);
  CHECK((at_target.back().amplitudes - problem.target.amplitudes).norm() < 1e-15);

  const StateVector orth{(VectorXc(6) << 1, -1, 0, 0, 0, 0).finished() / std::sqrt(2.0), BasisLayout::effective()};
  const auto zero = backward_propagate(problem, fields, orth);
  for (const auto& s : zero.states) CHECK(s.amplitudes.norm() < 1e-15);
}

TEST_CASE("costate under constant fields is backward free evolution") {
  auto problem = bell_problem(10);
  const auto fields = problem.initial_field();
  std::mt19937_64 rng(4);
  const auto psi_T = random_state(rng);
  const auto chi = backward_propagate(problem, fields, psi_T);
  const SpectralPropagator prop(problem.hamiltonian(1.0, 1.0));
  const VectorXc chi_T = chi.back().amplitudes;
  for (std::size_t k = 0; k < chi.size(); k += 20)
    CHECK((chi.states[k].amplitudes - prop.evolve(chi_T, chi.times[k] - problem.total_time)).norm() < 1e-10);
}

TEST_CASE("zero shape freezes the fields") {
  auto problem = bell_problem();
  problem.shape = {[](double) { return 0.0; }, [](double) { return 0.0; }};
  const auto update = first_sweep(problem);
  for (int l = 0; l < kNumControls; ++l) CHECK(update.fields.values[l] == problem.initial_field().values[l]);
}

TEST_CASE("doubling lambda halves the first update") {
  auto problem = bell_problem();
  problem.sequential = false;
  const auto a = first_sweep(problem);
  problem.lambda = {2 * problem.lambda[0], 2 * problem.lambda[1]};
  const auto b = first_sweep(problem);
  for (int l = 0; l < kNumControls; ++l) {
    const Eigen::VectorXd da = a.fields.values[l].array() - 1.0;
    const Eigen::VectorXd db = b.fields.values[l].array() - 1.0;
    CHECK((da - 2 * db).cwiseAbs().maxCoeff() < 1e-14);
    CHECK(da.cwiseAbs().maxCoeff() > 1e-4);
  }

  // In sequential mode the first cell sees identical inputs as well.
  problem.sequential = true;
  problem.lambda = {5, 5};
  const auto c = first_sweep(problem);
  problem.lambda = {10, 10};
  const auto d = first_sweep(problem);
  const double dc = c.fields.values[0](0) - 1.0, dd = d.fields.values[0](0) - 1.0;
  CHECK(std::abs(dc) > 1e-8);
  CHECK(std::abs(dc - 2 * dd) <= 1e-10 * std::abs(dc));
}

TEST_CASE("first update follows the finite-difference gradient") {
  auto problem = bell_problem();
  problem.lambda = {1e4, 1e4};  // small step: the sequential sweep stays on the unperturbed path
  const auto fields = problem.initial_field();
  const auto update = first_sweep(problem);
  const double dt = problem.grid().dt();
  std::mt19937_64 rng(20);
  std::uniform_int_distribution<int> cell(0, problem.n_steps - 1), control(0, kNumControls - 1);
  int probes = 0;
  while (probes < 20) {
    const int k = cell(rng), l = control(rng);
    const double fd = oracles::finite_difference_gradient(problem, fields, l, k);
    const double df = update.fields.values[l](k) - fields.values[l](k);
    if (std::abs(fd) < 1e-7) continue;  // too close to a sign change to be informative
    ++probes;
    CHECK(df * fd < 0);
    // df = -(S / lambda) dJ_T/df / (2 dt) in the small-step limit.
    const double predicted = -fd / (2 * problem.lambda[l] * dt);
    CHECK(std::abs(df - predicted) <= 1e-2 * std::abs(predicted));
  }

  // The reversed update is caught by the same check.
  const auto wrong = first_sweep(problem, -1.0);
  const double fd0 = oracles::finite_difference_gradient(problem, fields, 0, 0);
  CHECK((wrong.fields.values[0](0) - 1.0) * fd0 > 0);
}

TEST_CASE("updates stay local to the shape support") {
  auto problem = bell_problem();
  const double half = problem.total_time / 2;
  problem.shape = {[=](double t) { return t <= half ? 1.0 : 0.0; }, [=](double t) { return t <= half ? 1.0 : 0.0; }};
  problem.stop.max_iterations = 10;
  const auto result = krotov_optimize(problem);
  CHECK(result.iterations == 10);
  const double dt = problem.grid().dt();
  bool changed_early = false;
  for (int l = 0; l < kNumControls; ++l)
    for (int k = 0; k < problem.n_steps; ++k) {
      if ((k + 0.5) * dt > half) CHECK(result.fields.values[l](k) == 1.0);
      else changed_early = changed_early || result.fields.values[l](k) != 1.0;
    }
  CHECK(changed_early);
}

TEST_CASE("global phase of the target does not matter") {
  auto problem = bell_problem();
  problem.stop.max_iterations = 8;
  const auto a = krotov_optimize(problem);
  problem.target.amplitudes *= std::polar(1.0, 0.731);
  const auto b = krotov_optimize(problem);
  REQUIRE(a.j_t_history.size() == b.j_t_history.size());
  for (std::size_t i = 0; i < a.j_t_history.size(); ++i) CHECK(std::abs(a.j_t_history[i] - b.j_t_history[i]) < 1e-10);
  for (int l = 0; l < kNumControls; ++l) CHECK((a.fields.values[l] - b.fields.values[l]).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("starting at the target converges immediately") {
  auto problem = bell_problem();
  problem.initial = problem.target;
  // The target is not stationary, so pick parameters where it is: no couplings.
  problem.params.g_m = problem.params.g_c = problem.params.j_a = 0;
  const auto result = krotov_optimize(problem);
  CHECK(result.iterations == 0);
  CHECK(result.termination == Termination::Converged);
  CHECK(result.final_j_t <= 1e-4);
}

TEST_CASE("bell state at T = 45") {
  const auto problem = bell_problem();
  const auto result = krotov_optimize(problem);
  CHECK(result.termination == Termination::Converged);
  CHECK(result.final_concurrence > 0.9999);
  CHECK(std::abs(result.final_state.norm() - 1) < 1e-9);
  CHECK(result.iterations < 500);
  for (int l = 0; l < kNumControls; ++l) {
    CHECK(result.fields.values[l].minCoeff() >= 0.7);
    CHECK(result.fields.values[l].maxCoeff() <= 1.3);
  }
  for (std::size_t i = 1; i < result.j_t_history.size(); ++i) {
    CHECK(result.j_t_history[i] <= result.j_t_history[i - 1] + 1e-10);
    // J of the new iterate, against the previous iterate as reference, never exceeds the previous J_T.
    CHECK(result.j_history[i] <= result.j_t_history[i - 1] + 1e-10);
  }
  // Concurrence through the mixed-state route agrees.
  CHECK(concurrence_wootters(reduce_to_magnons(result.final_state)) == doctest::Approx(result.final_concurrence).epsilon(1e-9));
}

TEST_CASE("bound violation returns the last in-range iterate") {
  auto problem = bell_problem();
  problem.lambda = {0.05, 0.05};
  problem.lambda_decay = 1;
  problem.lambda_min = 0.05;
  const auto result = krotov_optimize(problem);
  CHECK(result.termination == Termination::BoundExceeded);
  for (int l = 0; l < kNumControls; ++l) {
    CHECK(result.fields.values[l].minCoeff() >= 0.7);
    CHECK(result.fields.values[l].maxCoeff() <= 1.3);
  }
}

TEST_CASE("non-finite updates abort") {
  auto problem = bell_problem();
  problem.lambda = {1e-320, 1e-320};
  problem.lambda_decay = 1;
  problem.stop.lower_bound = -INFINITY;
  problem.stop.upper_bound = INFINITY;
  CHECK_THROWS_AS(krotov_optimize(problem), control_error);
}

TEST_CASE("step size schedule") {
  auto problem = bell_problem();
  CHECK(problem.lambda_at(1)[0] == 5.0);
  CHECK(problem.lambda_at(2)[0] == doctest::Approx(4.75));
  CHECK(problem.lambda_at(1000)[1] == 0.3);
  problem.lambda = {0.1, 0.2};
  CHECK(problem.lambda_at(1000)[0] == 0.1);
  problem.lambda_decay = 1;
  problem.lambda = {25, 25};
  CHECK(problem.lambda_at(400)[0] == 25.0);
}

TEST_CASE("problem validation") {
  auto problem = bell_problem();
  problem.lambda = {-1, 1};
  CHECK_THROWS_AS(problem.validate(), control_error);
  problem = bell_problem();
  problem.stop.lower_bound = 2;
  CHECK_THROWS_AS(problem.validate(), control_error);
  problem = bell_problem();
  problem.target.amplitudes *= 2;
  CHECK_THROWS_AS(problem.validate(), control_error);
  problem = bell_problem();
  problem.lambda_decay = 1.5;
  CHECK_THROWS_AS(problem.validate(), control_error);
}

TEST_CASE("flat-top shape") {
  const auto s = flattop_shape(0, 10, 2);
  CHECK(s(0) == doctest::Approx(0.0));
  CHECK(s(1) == doctest::Approx(0.5));
  CHECK(s(5) == 1.0);
  CHECK(s(10) == doctest::Approx(0.0));
}

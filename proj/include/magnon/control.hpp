#pragma once

// Krotov optimisation of the two magnon frequencies f_1(t), f_2(t).
//
// Controls are piecewise constant on the cells of a uniform grid; cell k spans
// [t_k, t_k + dt).  The magnon-l number operator is the derivative of H with
// respect to f_l.

#include <array>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "magnon/dynamics.hpp"
#include "magnon/model.hpp"

namespace magnon {

class control_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

constexpr int kNumControls = 2;

struct ControlField {
  TimeGrid grid;
  std::array<Eigen::VectorXd, kNumControls> values;     // f_l per cell
  std::array<Eigen::VectorXd, kNumControls> reference;  // f_l^ref per cell
  std::array<Eigen::VectorXd, kNumControls> shape;      // S_l per cell, in [0, 1]
  std::array<double, kNumControls> lambda{5.0, 5.0};  // inverse step sizes

  /// Constant field equal to its own reference, with unit shape.
  static ControlField constant(const TimeGrid& grid, double value, std::array<double, kNumControls> lambda = {5.0, 5.0});

  int cells() const { return grid.n_steps; }
  void validate() const;
};

/// Update shape S(t); the default is identically one.
using ShapeFunction = std::function<double(double t)>;

/// sin^2 ramps of width `rise` at both ends, one in between.
ShapeFunction flattop_shape(double t_start, double t_end, double rise);

struct StopRule {
  double j_target = 1e-4;
  double lower_bound = 0.7;
  double upper_bound = 1.3;
  int max_iterations = 500;
};

struct ControlProblem {
  EffectiveParams<double> params;
  StateVector initial;
  StateVector target;
  double total_time = 45;
  int n_steps = 900;
  double guess = 1.0;  // initial f_1 = f_2
  std::array<double, kNumControls> lambda{5.0, 5.0};  // first-iteration inverse step sizes
  double lambda_decay = 0.95;  // lambda is multiplied by this after every iteration
  double lambda_min = 0.3;     // until it reaches this floor
  std::array<ShapeFunction, kNumControls> shape{};  // empty means S = 1
  StopRule stop;
  bool sequential = true;  // time-local update; false updates all cells from the old forward pass

  /// Magnon 1 excited at t = 0, target (|10> + |01>)/sqrt(2) on the magnons
  /// with every cavity mode empty.
  static ControlProblem bell_state(const EffectiveParams<double>& params, double total_time, int n_steps);

  TimeGrid grid() const { return TimeGrid(0.0, total_time, n_steps); }
  HamiltonianMatrix<double> hamiltonian(double f1, double f2) const;
  /// Initial guess field with this problem's shapes and step sizes.
  ControlField initial_field() const;
  /// Inverse step sizes used in iteration `iteration` (1-based); never below
  /// min(lambda_min, lambda).
  std::array<double, kNumControls> lambda_at(int iteration) const;
  void validate() const;
};

struct FunctionalValue {
  double J = 0;
  double J_T = 0;
  double running_cost = 0;
};

/// J_T = 1 - |<target|psi_T>|^2 plus the running cost of (f - f_ref).
FunctionalValue evaluate_functional(const StateVector& psi_T, const StateVector& target, const ControlField& fields);

/// Forward trajectory on the control grid.
Trajectory forward_propagate(const ControlProblem& problem, const ControlField& fields);

/// Costate chi on the control grid, chi(T) = <target|psi_T> target.
Trajectory backward_propagate(const ControlProblem& problem, const ControlField& fields, const StateVector& psi_T);
/// Same, reusing cell unitaries already computed for `fields`.
Trajectory backward_propagate(const ControlProblem& problem, const std::vector<MatrixXc>& propagators,
                              const StateVector& psi_T);

struct KrotovUpdate {
  ControlField fields;                  // updated values; reference holds the previous values
  Trajectory forward;                   // forward trajectory under the updated fields
  std::vector<MatrixXc> propagators;    // cell unitaries of the updated fields
};

/// One Krotov sweep.  `update_sign` is +1 for the descent direction; other
/// values exist for mutation testing of the validation suite.
KrotovUpdate krotov_update_step(const ControlProblem& problem, const ControlField& fields, const Trajectory& forward,
                                const Trajectory& costate, double update_sign = 1.0);

enum class Termination { Converged, BoundExceeded, MaxIterations };

std::string to_string(Termination t);

struct ControlResult {
  ControlField fields;
  std::vector<double> j_t_history;  // entry 0 is the initial guess
  std::vector<double> j_history;    // J_T plus the running cost of that iteration's update
  StateVector final_state;
  double final_concurrence = 0;
  double final_j_t = 1;
  Termination termination = Termination::MaxIterations;
  int iterations = 0;
};

/// Iterates forward/backward/update until J_T <= j_target, a control leaves
/// [lower_bound, upper_bound], or max_iterations.  On a bound violation the
/// last in-range iterate is returned.  Iteration i uses lambda_at(i).
ControlResult krotov_optimize(const ControlProblem& problem);

}  // namespace magnon

#pragma once

// Slow, independent reference implementations.  Only tests and the validation
// suite link these; nothing in the library depends on them.

#include <vector>

#include <Eigen/Dense>

#include "magnon/control.hpp"
#include "magnon/dynamics.hpp"
#include "magnon/entanglement.hpp"
#include "magnon/model.hpp"

namespace magnon::oracles {

/// Classical RK4 on i dpsi/dt = H psi, `substeps` steps per grid cell.
std::vector<VectorXc> rk4_propagate(const MatrixXc& h, const VectorXc& psi0, const TimeGrid& grid, int substeps);

/// Lindblad equation drho/dt = -i[H, rho] + sum_j (L rho L^+ - {L^+ L, rho}/2)
/// through the exact exponential of the vectorised generator.
std::vector<MatrixXc> lindblad_propagate(const MatrixXc& h, const std::vector<MatrixXc>& lowering, const MatrixXc& rho0,
                                         const TimeGrid& grid);

/// O-bar(t) = int_0^t ds gamma/2 e^{-gamma (t - s)} O(t, s) with
/// dO(t, s)/dt = [-iH - sum_k L_k^+ O-bar_k(t), O(t, s)], O(s, s) = L.
/// Every O(t, s_i) is carried explicitly; Simpson quadrature in s.
std::vector<std::vector<MatrixXc>> o_bar_double_integral(const MatrixXc& h, const std::vector<MatrixXc>& lowering,
                                                         double gamma, const TimeGrid& grid);

/// Central difference of J_T with respect to control `l` on cell `k`.
double finite_difference_gradient(const ControlProblem& problem, const ControlField& fields, int l, int k,
                                  double eps = 1e-6);

/// Partial trace in the occupation-number product space: every non-vacuum
/// label is a two-level mode, the state is expanded into 2^modes dimensions
/// and all modes but m1, m2 are summed out.
TwoQubitDensity brute_force_reduce(const DensityMatrix& rho);

/// Concurrence from the eigenvalues of rho (YxY) rho* (YxY).
double wootters_from_eigenvalues(const Eigen::Matrix4cd& rho);

}  // namespace magnon::oracles

#pragma once

#include <complex>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "magnon/model.hpp"

namespace magnon {

struct StateVector {
  VectorXc amplitudes;
  BasisLayout layout;

  /// Unit excitation on `label`.
  static StateVector basis_state(const BasisLayout& layout, const std::string& label);

  double norm() const { return amplitudes.norm(); }
  std::complex<double> operator[](const std::string& label) const {
    return amplitudes(static_cast<Eigen::Index>(layout.index_of(label)));
  }
};

/// Density matrix over a single-excitation (optionally vacuum-augmented) layout.
struct DensityMatrix {
  MatrixXc matrix;
  BasisLayout layout;

  static DensityMatrix pure(const StateVector& psi) { return {psi.amplitudes * psi.amplitudes.adjoint(), psi.layout}; }

  std::complex<double> trace() const { return matrix.trace(); }
  std::complex<double> operator()(const std::string& row, const std::string& col) const {
    return matrix(static_cast<Eigen::Index>(layout.index_of(row)), static_cast<Eigen::Index>(layout.index_of(col)));
  }
};

/// Uniform grid with n_steps cells on [t_start, t_end].
struct TimeGrid {
  double t_start = 0;
  double t_end = 1;
  int n_steps = 1;

  TimeGrid() = default;
  TimeGrid(double start, double end, int steps);

  double dt() const { return (t_end - t_start) / n_steps; }
  double time(int k) const { return t_start + k * dt(); }
  std::vector<double> times() const;
};

/// Step count giving dt * max|H_ii| <= 0.05 over [t_start, t_end].
int default_step_count(const MatrixXc& h, double t_start, double t_end);

struct Trajectory {
  std::vector<double> times;
  std::vector<StateVector> states;

  std::size_t size() const { return states.size(); }
  const StateVector& back() const { return states.back(); }
};

/// exp(-iHt) through one eigendecomposition of a hermitian H; cheap to apply at
/// arbitrary (including very large) times.
class SpectralPropagator {
 public:
  explicit SpectralPropagator(const HamiltonianMatrix<double>& h);

  VectorXc evolve(const VectorXc& psi0, double t) const;
  MatrixXc unitary(double t) const;

  const Eigen::VectorXd& eigenvalues() const { return energies_; }
  const MatrixXc& eigenvectors() const { return vectors_; }
  const BasisLayout& layout() const { return layout_; }

 private:
  Eigen::VectorXd energies_;
  MatrixXc vectors_;
  BasisLayout layout_;
};

/// Spectral propagation onto a uniform grid.
Trajectory propagate_constant(const HamiltonianMatrix<double>& h, const StateVector& psi0, const TimeGrid& grid);

/// Spectral propagation evaluated directly at arbitrary sample times.
Trajectory sample_constant(const HamiltonianMatrix<double>& h, const StateVector& psi0, std::span<const double> times);

using HamiltonianSource = std::function<HamiltonianMatrix<double>(double t)>;

/// exp(-i H dt) for a hermitian H.
MatrixXc cell_propagator(const MatrixXc& h, double dt);

/// Piecewise-constant exponential stepping with H sampled at cell midpoints.
Trajectory propagate_timedep(const HamiltonianSource& h_of_t, const StateVector& psi0, const TimeGrid& grid);

/// Closed-form magnon amplitudes of the projected dynamics, valid to first
/// order in 1/omega_a.  Returns (psi_m1, psi_m2).
template <typename Real>
std::pair<std::complex<Real>, std::complex<Real>> analytic_magnon_amplitudes(const EffectiveParams<Real>& p, Real t) {
  using std::exp;
  const auto f = analytic_frequencies(p);
  const std::complex<Real> i(0, 1);
  const auto e1 = exp(i * f.omega_1 * t);
  const auto e2 = exp(-i * f.omega_2 * t);
  const auto e3 = exp(i * f.omega_3 * t);
  const auto e4 = exp(-i * f.omega_4 * t);
  return {(e1 + e2 + e3 + e4) / Real(4), (e1 + e2 - e3 - e4) / Real(4)};
}

struct AdiabaticReport {
  double max_deviation = 0;  // max over grid and both magnons of |p_full - p_eff|
  double effective_coupling = 0;
  bool regime_ok = true;  // detunings at least 10x every converter coupling
  std::string warning;
};

/// Propagates the 10-level model and the 6-level effective model from the same
/// magnon-1 excitation and compares the magnon amplitudes.
AdiabaticReport validate_adiabatic_elimination(const FullModelParams<double>& full, const TimeGrid& grid,
                                               DetuningConvention convention = DetuningConvention::Delta1Delta2);

/// Effective parameters implied by a full model (g_c from the converter).
EffectiveParams<double> effective_from_full(const FullModelParams<double>& full,
                                            DetuningConvention convention = DetuningConvention::Delta1Delta2);

}  // namespace magnon

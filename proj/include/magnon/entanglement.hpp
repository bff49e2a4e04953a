#pragma once

#include <array>
#include <complex>
#include <stdexcept>

#include <Eigen/Dense>

#include "magnon/dynamics.hpp"
#include "magnon/model.hpp"

namespace magnon {

class entanglement_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Two-qubit state of the magnon pair in the basis (|00>, |01>, |10>, |11>),
/// first qubit magnon 1.
struct TwoQubitDensity {
  Eigen::Matrix4cd rho = Eigen::Matrix4cd::Zero();

  /// Throws entanglement_error when the matrix is not a density matrix within
  /// the given tolerances.
  void validate(double hermitian_tol = 1e-10, double trace_tol = 1e-9, double eigen_tol = 1e-8) const;
};

/// 2|p1||p2|, the concurrence of a single-excitation pure state.
double concurrence_pure(std::complex<double> p1, std::complex<double> p2);

/// Partial trace over every non-magnon mode.  Each basis label is one quantum
/// in that mode; "vac" (when present) is the joint vacuum.
TwoQubitDensity reduce_to_magnons(const StateVector& state);
TwoQubitDensity reduce_to_magnons(const DensityMatrix& state);

/// Wootters concurrence.  Negative eigenvalues of rho down to -eigen_tol are
/// clamped; below that the state is rejected.
double concurrence_wootters(const TwoQubitDensity& rho, double eigen_tol = 1e-8);

enum class EnvelopeBranch { Ev1 = 0, Ev2 = 1, Ev3 = 2, Ev4 = 3 };

struct EnvelopeSample {
  double t = 0;
  bool phi1_defined = false;
  double phi1 = 0;  // NaN when the csc product is singular
  double phi2 = 0;
  double phi3 = 0;
  double Phi = 1;
  std::array<double, 4> branch{};  // ev1..ev4
  std::array<bool, 4> active{};

  bool is_active(EnvelopeBranch b) const { return active[static_cast<int>(b)]; }
  double value(EnvelopeBranch b) const { return branch[static_cast<int>(b)]; }
  /// Largest active branch.
  double upper() const;
};

/// Beat envelopes of the closed-system concurrence and the region that decides
/// which pair of branches applies.
EnvelopeSample envelope_sample(const EffectiveParams<double>& p, double t);

}  // namespace magnon

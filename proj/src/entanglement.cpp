#include "magnon/entanglement.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <sstream>

namespace magnon {

namespace {

constexpr Eigen::Index k00 = 0;
constexpr Eigen::Index k01 = 1;  // magnon 2 excited
constexpr Eigen::Index k10 = 2;  // magnon 1 excited

// Two-qubit index of a basis label when the environment is in its vacuum;
// nullopt for labels that put the quantum into a cavity mode.
std::optional<Eigen::Index> magnon_index(const std::string& label) {
  if (label == "m1") return k10;
  if (label == "m2") return k01;
  if (label == "vac") return k00;
  return std::nullopt;
}

TwoQubitDensity reduce(const MatrixXc& rho, const BasisLayout& layout) {
  if (!layout.find("m1") || !layout.find("m2")) throw entanglement_error("layout has no magnon labels");
  if (rho.rows() != static_cast<Eigen::Index>(layout.size()) || rho.cols() != rho.rows())
    throw entanglement_error("density matrix does not match its layout");

  TwoQubitDensity out;
  const auto n = static_cast<Eigen::Index>(layout.size());
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto qi = magnon_index(layout.label(static_cast<std::size_t>(i)));
    if (!qi) {
      // Quantum sits in a cavity mode: the magnons are in |00>.
      out.rho(k00, k00) += rho(i, i);
      continue;
    }
    for (Eigen::Index j = 0; j < n; ++j) {
      const auto qj = magnon_index(layout.label(static_cast<std::size_t>(j)));
      if (qj) out.rho(*qi, *qj) += rho(i, j);
    }
  }
  return out;
}

}  // namespace

void TwoQubitDensity::validate(double hermitian_tol, double trace_tol, double eigen_tol) const {
  const double defect = (rho - rho.adjoint()).cwiseAbs().maxCoeff();
  if (defect > hermitian_tol) {
    std::ostringstream msg;
    msg << "two-qubit matrix not hermitian (defect " << defect << ")";
    throw entanglement_error(msg.str());
  }
  const double trace_error = std::abs(rho.trace() - 1.0);
  if (trace_error > trace_tol) {
    std::ostringstream msg;
    msg << "two-qubit matrix trace off by " << trace_error;
    throw entanglement_error(msg.str());
  }
  const Eigen::Matrix4cd h = 0.5 * (rho + rho.adjoint());
  const double lowest = Eigen::SelfAdjointEigenSolver<Eigen::Matrix4cd>(h, Eigen::EigenvaluesOnly).eigenvalues()(0);
  if (lowest < -eigen_tol) {
    std::ostringstream msg;
    msg << "two-qubit matrix has eigenvalue " << lowest;
    throw entanglement_error(msg.str());
  }
}

double concurrence_pure(std::complex<double> p1, std::complex<double> p2) {
  const double n = std::norm(p1) + std::norm(p2);
  if (n > 1.0 + 1e-9) throw entanglement_error("magnon amplitudes exceed unit norm");
  return 2.0 * std::abs(p1) * std::abs(p2);
}

TwoQubitDensity reduce_to_magnons(const StateVector& state) {
  return reduce(state.amplitudes * state.amplitudes.adjoint(), state.layout);
}

TwoQubitDensity reduce_to_magnons(const DensityMatrix& state) { return reduce(state.matrix, state.layout); }

double concurrence_wootters(const TwoQubitDensity& state, double eigen_tol) {
  state.validate(1e-10, 1e-9, eigen_tol);
  // The square roots of the eigenvalues of rho (YxY) rho* (YxY) are the singular
  // values of tau = W^T (YxY) W with rho = W W^dagger.  Working with tau avoids
  // taking square roots of round-off sized eigenvalues.
  const Eigen::Matrix4cd h = 0.5 * (state.rho + state.rho.adjoint());
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix4cd> eig(h);
  Eigen::Matrix4cd w = eig.eigenvectors();
  for (int k = 0; k < 4; ++k) w.col(k) *= std::sqrt(std::max(eig.eigenvalues()(k), 0.0));

  Eigen::Matrix4cd yy = Eigen::Matrix4cd::Zero();
  yy(0, 3) = -1.0;
  yy(1, 2) = 1.0;
  yy(2, 1) = 1.0;
  yy(3, 0) = -1.0;
  const Eigen::Matrix4cd tau = w.transpose() * yy * w;
  const Eigen::Vector4d lambda = Eigen::JacobiSVD<Eigen::Matrix4cd>(tau).singularValues();  // descending
  return std::max(0.0, lambda(0) - lambda(1) - lambda(2) - lambda(3));
}

double EnvelopeSample::upper() const {
  double best = -std::numeric_limits<double>::infinity();
  for (int b = 0; b < 4; ++b)
    if (active[b]) best = std::max(best, branch[b]);
  return best;
}

EnvelopeSample envelope_sample(const EffectiveParams<double>& p, double t) {
  const double wa = p.omega_a, gm = p.g_m, gc = p.g_c, ja = p.j_a;
  if (wa == 0 || gm == 0 || gc == 0 || ja == 0)
    throw entanglement_error("envelope formulas need nonzero omega_a, g_m, g_c and j_a");
  const double nan = std::numeric_limits<double>::quiet_NaN();
  const double gc2 = gc * gc, gc4 = gc2 * gc2, wa2 = wa * wa, wa3 = wa2 * wa;

  const double fast = gc2 * ja * t / wa2;                 // g_c^2 j_a t / w_a^2
  const double half_split = gc4 * ja * t / (2 * gm * wa3);  // g_c^4 j_a t / (2 g_m w_a^3)
  const double quarter_split = gc4 * ja * t / (4 * gm * wa3);
  const double csc_arg_minus = gc2 * ja * t * (gc2 - 2 * gm * wa) / (2 * gm * wa3);
  const double csc_arg_plus = gc2 * ja * t * (gc2 + 2 * gm * wa) / (2 * gm * wa3);

  EnvelopeSample s;
  s.t = t;
  const double sin_minus = std::sin(csc_arg_minus);
  const double sin_plus = std::sin(csc_arg_plus);
  const bool csc_singular = std::abs(sin_minus) < 1e-12 || std::abs(sin_plus) < 1e-12;

  bool excluded = csc_singular;
  if (csc_singular) {
    s.phi1 = nan;
  } else {
    const double c = std::cos(fast);
    const double sq = std::sin(half_split) * std::sin(half_split);
    s.phi1 = c * c * sq * sq / (sin_minus * sin_plus);
    const bool on_boundary = std::abs(std::cos(gc4 * ja * t / (gm * wa3)) - std::cos(2 * fast)) <= 1e-9;
    const bool large_difference = std::abs((1.0 / sin_minus - 1.0 / sin_plus) * std::sin(fast)) > 2.0;
    excluded = on_boundary || large_difference;
  }
  s.phi1_defined = !excluded;

  const double cq = std::cos(quarter_split), sq = std::sin(quarter_split);
  s.phi2 = std::sin(fast) * cq * cq;
  s.phi3 = std::sin(fast) * sq * sq;
  s.Phi = std::max(cq * cq, sq * sq);

  s.branch = {nan, nan, nan, nan};
  if (s.phi1_defined) {
    s.branch[0] = std::sqrt(std::abs(s.phi1)) / 2;
    s.branch[1] = std::min(std::abs(s.phi2), std::abs(s.phi3));
    s.active = {true, true, false, false};
  } else {
    s.branch[2] = std::abs(s.phi2);
    s.branch[3] = std::abs(s.phi3);
    s.active = {false, false, true, true};
  }
  return s;
}

}  // namespace magnon

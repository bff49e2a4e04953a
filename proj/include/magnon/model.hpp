#pragma once

// Hamiltonians of the fiber-linked magnon-cavity chain restricted to the
// single-excitation sector, and the closed-form quantities derived from them.
//
// Everything here is templated on the real scalar so the same formulas can be
// evaluated in extended precision.

#include <cmath>
#include <complex>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace magnon {

template <typename Real>
using ComplexMatrix = Eigen::Matrix<std::complex<Real>, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Real>
using ComplexVector = Eigen::Matrix<std::complex<Real>, Eigen::Dynamic, 1>;

using MatrixXc = ComplexMatrix<double>;
using VectorXc = ComplexVector<double>;

class model_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Near-zero denominator in the effective optical/microwave coupling.
class resonance_error : public model_error {
 public:
  using model_error::model_error;
};

/// Ordered labels of a basis; the position of a label is its matrix index.
class BasisLayout {
 public:
  BasisLayout() = default;
  explicit BasisLayout(std::vector<std::string> labels) : labels_(std::move(labels)) {
    for (std::size_t i = 0; i < labels_.size(); ++i)
      for (std::size_t j = i + 1; j < labels_.size(); ++j)
        if (labels_[i] == labels_[j]) throw model_error("duplicate basis label: " + labels_[i]);
  }

  /// (m1, m2, c_m1, c_m2, c_o1, c_o2), the row order of the effective matrix.
  static BasisLayout effective() { return BasisLayout({"m1", "m2", "cm1", "cm2", "co1", "co2"}); }

  static BasisLayout full() {
    return BasisLayout({"m1", "m2", "b1", "b2", "atom1_1", "atom1_2", "atom2_1", "atom2_2", "a1", "a2"});
  }

  /// Effective layout with the vacuum prepended (dissipative dynamics).
  static BasisLayout open() { return BasisLayout({"vac", "m1", "m2", "cm1", "cm2", "co1", "co2"}); }

  std::size_t size() const { return labels_.size(); }
  const std::vector<std::string>& labels() const { return labels_; }
  const std::string& label(std::size_t i) const { return labels_.at(i); }

  std::optional<std::size_t> find(const std::string& label) const {
    for (std::size_t i = 0; i < labels_.size(); ++i)
      if (labels_[i] == label) return i;
    return std::nullopt;
  }

  std::size_t index_of(const std::string& label) const {
    if (auto i = find(label)) return *i;
    throw model_error("basis has no label '" + label + "'");
  }

  bool operator==(const BasisLayout&) const = default;

 private:
  std::vector<std::string> labels_;
};

template <typename Real = double>
struct FullModelParams {
  Real omega_a_prime = 0;  // optical cavity
  Real omega_b_prime = 0;  // microwave cavity
  Real omega_m = 0;
  Real delta_1 = 0;  // converter level |1>
  Real delta_2 = 0;  // converter level |2>
  Real Omega = 0;    // pump
  Real g_mb = 0;
  Real g_cb = 0;
  Real g_ca = 0;
  Real j_a = 0;

  void validate() const {
    using std::isfinite;
    for (Real v : {omega_a_prime, omega_b_prime, omega_m, delta_1, delta_2, Omega, g_mb, g_cb, g_ca, j_a})
      if (!isfinite(v)) throw model_error("full model parameters must be finite");
    if (!(omega_a_prime > 0)) throw model_error("omega_a_prime must be positive");
    if (!(delta_1 > 0) || !(delta_2 > 0)) throw model_error("converter detunings must be positive");
  }
};

template <typename Real = double>
struct EffectiveParams {
  Real omega_a = 0;
  Real omega_b = 0;
  Real omega_m = 0;
  Real g_m = 0;
  Real g_c = 0;
  Real j_a = 0;

  Real epsilon() const { return Real(1) / omega_a; }

  void validate() const {
    using std::isfinite;
    for (Real v : {omega_a, omega_b, omega_m, g_m, g_c, j_a})
      if (!isfinite(v)) throw model_error("effective model parameters must be finite");
    if (!(omega_a > 0)) throw model_error("omega_a must be positive");
  }
};

template <typename Real = double>
struct HamiltonianMatrix {
  ComplexMatrix<Real> matrix;
  BasisLayout layout;
  bool hermitian = true;

  Eigen::Index dimension() const { return matrix.rows(); }

  /// Largest |H - H^dagger| entry.
  Real hermiticity_defect() const { return (matrix - matrix.adjoint()).cwiseAbs().maxCoeff(); }
};

template <typename Real = double>
struct AnalyticFrequencies {
  Real omega_1 = 0, omega_2 = 0, omega_3 = 0, omega_4 = 0;
  Real s_1 = 0, s_2 = 0;
};

/// Which detuning product sits in the denominator of the effective coupling.
enum class DetuningConvention {
  Delta1Delta2,  // delta_1 * delta_2
  Delta2Squared  // delta_2 * delta_2, one reading of the undefined third detuning
};

template <typename Real>
Real compute_effective_coupling(const FullModelParams<Real>& p,
                                DetuningConvention convention = DetuningConvention::Delta1Delta2) {
  using std::abs;
  const Real product = convention == DetuningConvention::Delta1Delta2 ? p.delta_1 * p.delta_2 : p.delta_2 * p.delta_2;
  const Real denominator = product - p.Omega * p.Omega;
  if (!(abs(denominator) > Real(1e-12)))
    throw resonance_error("detuning product equals Omega^2; effective coupling is singular");
  return p.g_ca * p.g_cb * p.Omega / denominator;
}

template <typename Real>
HamiltonianMatrix<Real> build_full_hamiltonian(const FullModelParams<Real>& p) {
  p.validate();
  HamiltonianMatrix<Real> h{ComplexMatrix<Real>::Zero(10, 10), BasisLayout::full(), true};
  auto& H = h.matrix;
  const Real diagonal[5] = {p.omega_m, p.omega_b_prime, p.delta_1, p.delta_2, p.omega_a_prime};
  for (int level = 0; level < 5; ++level)
    for (int site = 0; site < 2; ++site) H(2 * level + site, 2 * level + site) = diagonal[level];

  auto couple = [&H](int i, int j, Real g) {
    H(i, j) = g;
    H(j, i) = g;
  };
  for (int site = 0; site < 2; ++site) {
    couple(0 + site, 2 + site, p.g_mb);   // m_i <-> b_i
    couple(2 + site, 4 + site, p.g_cb);   // b_i <-> |1>_i
    couple(4 + site, 6 + site, p.Omega);  // |1>_i <-> |2>_i
    couple(6 + site, 8 + site, p.g_ca);   // |2>_i <-> a_i
  }
  couple(8, 9, p.j_a);
  return h;
}

/// The 6x6 effective Hamiltonian.  `magnon_frequencies`, when given, replaces
/// the two magnon diagonal entries (frequency-modulation controls).
template <typename Real>
HamiltonianMatrix<Real> build_effective_hamiltonian(const EffectiveParams<Real>& p,
                                                    std::optional<std::pair<std::type_identity_t<Real>, std::type_identity_t<Real>>> magnon_frequencies = {}) {
  p.validate();
  HamiltonianMatrix<Real> h{ComplexMatrix<Real>::Zero(6, 6), BasisLayout::effective(), true};
  auto& H = h.matrix;
  const auto [f1, f2] = magnon_frequencies.value_or(std::pair<Real, Real>{p.omega_m, p.omega_m});
  H(0, 0) = f1;
  H(1, 1) = f2;
  H(2, 2) = H(3, 3) = p.omega_b;
  H(4, 4) = H(5, 5) = p.omega_a;
  H(0, 2) = H(2, 0) = p.g_m;
  H(1, 3) = H(3, 1) = p.g_m;
  H(2, 4) = H(4, 2) = p.g_c;
  H(3, 5) = H(5, 3) = p.g_c;
  H(4, 5) = H(5, 4) = p.j_a;
  return h;
}

template <typename Real>
void require_resonant_microwave(const EffectiveParams<Real>& p) {
  using std::abs;
  if (abs(p.omega_m - p.omega_b) > Real(1e-12) * (abs(p.omega_m) + abs(p.omega_b) + Real(1)))
    throw model_error("the projected dynamics assumes omega_m == omega_b");
}

/// Non-hermitian 4x4 generator of the magnon/microwave amplitudes after the
/// optical modes are integrated out to second order in 1/omega_a.
template <typename Real>
HamiltonianMatrix<Real> build_pq_effective_hamiltonian(const EffectiveParams<Real>& p) {
  p.validate();
  require_resonant_microwave(p);
  const Real wa2 = p.omega_a * p.omega_a;
  const Real gc2 = p.g_c * p.g_c;
  const Real dressed_g = p.g_m - gc2 * p.g_m / wa2;
  const Real shifted = -gc2 * (p.omega_m + p.omega_a) / wa2 + p.omega_m;
  const Real cross = gc2 * p.j_a / wa2;

  HamiltonianMatrix<Real> h{ComplexMatrix<Real>::Zero(4, 4), BasisLayout({"m1", "m2", "cm1", "cm2"}), false};
  auto& H = h.matrix;
  H(0, 0) = H(1, 1) = p.omega_m;
  H(0, 2) = H(1, 3) = p.g_m;
  H(2, 0) = H(3, 1) = dressed_g;
  H(2, 2) = H(3, 3) = shifted;
  H(2, 3) = H(3, 2) = cross;
  return h;
}

template <typename Real>
AnalyticFrequencies<Real> analytic_frequencies(const EffectiveParams<Real>& p) {
  using std::sqrt;
  p.validate();
  require_resonant_microwave(p);
  const Real wa = p.omega_a, wm = p.omega_m, gm = p.g_m, gc = p.g_c, ja = p.j_a;
  const Real wa2 = wa * wa;
  const Real gc2 = gc * gc;
  const Real gc4 = gc2 * gc2;

  auto radicand = [&](Real sign) {
    const Real shifted = sign * ja + wm + wa;
    return gc4 * shifted * shifted - 4 * gc2 * gm * gm * wa2 + 4 * gm * gm * wa2 * wa2;
  };
  const Real r1 = radicand(Real(-1));
  const Real r2 = radicand(Real(1));
  if (r1 < 0 || r2 < 0)
    throw model_error("negative radicand in analytic frequencies; parameters outside the large-omega_a regime");

  AnalyticFrequencies<Real> f;
  f.s_1 = sqrt(r1);
  f.s_2 = sqrt(r2);
  const Real minus = gc2 * (wm + wa - ja);
  const Real plus = gc2 * (wm + wa + ja);
  const Real bare = 2 * wm * wa2;
  f.omega_1 = (minus + f.s_1 - bare) / (2 * wa2);
  f.omega_2 = (-minus + f.s_1 + bare) / (2 * wa2);
  f.omega_3 = (plus + f.s_2 - bare) / (2 * wa2);
  f.omega_4 = (-plus + f.s_2 + bare) / (2 * wa2);
  return f;
}

}  // namespace magnon

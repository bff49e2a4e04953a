#include "magnon/oracles/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <stdexcept>

#include <unsupported/Eigen/MatrixFunctions>

namespace magnon::oracles {

using cd = std::complex<double>;

std::vector<VectorXc> rk4_propagate(const MatrixXc& h, const VectorXc& psi0, const TimeGrid& grid, int substeps) {
  const cd minus_i(0, -1);
  const double dt = grid.dt() / substeps;
  auto f = [&](const VectorXc& v) -> VectorXc { return minus_i * (h * v); };
  std::vector<VectorXc> out{psi0};
  VectorXc psi = psi0;
  for (int k = 0; k < grid.n_steps; ++k) {
    for (int s = 0; s < substeps; ++s) {
      const VectorXc k1 = f(psi);
      const VectorXc k2 = f(psi + 0.5 * dt * k1);
      const VectorXc k3 = f(psi + 0.5 * dt * k2);
      const VectorXc k4 = f(psi + dt * k3);
      psi += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    out.push_back(psi);
  }
  return out;
}

std::vector<MatrixXc> lindblad_propagate(const MatrixXc& h, const std::vector<MatrixXc>& lowering, const MatrixXc& rho0,
                                         const TimeGrid& grid) {
  const auto n = h.rows();
  const MatrixXc id = MatrixXc::Identity(n, n);
  // Column-major vec: vec(A X B) = (B^T kron A) vec(X).
  auto kron = [n](const MatrixXc& a, const MatrixXc& b) {
    MatrixXc out(n * n, n * n);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < n; ++j) out.block(i * n, j * n, n, n) = a(i, j) * b;
    return out;
  };
  const cd i(0, 1);
  MatrixXc gen = -i * kron(id, h) + i * kron(h.transpose(), id);
  for (const auto& l : lowering) {
    const MatrixXc ldl = l.adjoint() * l;
    gen += kron(l.conjugate(), l) - 0.5 * kron(id, ldl) - 0.5 * kron(ldl.transpose(), id);
  }
  const MatrixXc step = (gen * grid.dt()).exp();
  Eigen::Map<const VectorXc> v0(rho0.data(), n * n);
  VectorXc v = v0;
  std::vector<MatrixXc> out{rho0};
  for (int k = 0; k < grid.n_steps; ++k) {
    v = step * v;
    out.push_back(Eigen::Map<const MatrixXc>(v.data(), n, n));
  }
  return out;
}

std::vector<std::vector<MatrixXc>> o_bar_double_integral(const MatrixXc& h, const std::vector<MatrixXc>& lowering,
                                                         double gamma, const TimeGrid& grid) {
  const auto n = h.rows();
  const std::size_t m = lowering.size();
  const double dt = grid.dt();
  const cd minus_i(0, -1);

  // history[j][i] = O_j(t_k, s_i) for i <= k
  std::vector<std::vector<MatrixXc>> history(m);
  for (std::size_t j = 0; j < m; ++j) history[j].push_back(lowering[j]);
  std::vector<std::vector<MatrixXc>> out{std::vector<MatrixXc>(m, MatrixXc::Zero(n, n))};

  auto quadrature = [&](std::size_t j, int k) {
    // int_0^{t_k} alpha(t_k, s) O(t_k, s) ds; Simpson on an even count of
    // intervals, the 3/8 rule on the last three when the count is odd.
    MatrixXc sum = MatrixXc::Zero(n, n);
    if (k == 0) return sum;
    auto f = [&](int i) -> MatrixXc { return 0.5 * gamma * std::exp(-gamma * (k - i) * dt) * history[j][i]; };
    if (k == 1) return MatrixXc(0.5 * dt * (f(0) + f(1)));
    int simpson_end = (k % 2 == 0) ? k : k - 3;
    for (int i = 0; i + 2 <= simpson_end; i += 2) sum += dt / 3.0 * (f(i) + 4.0 * f(i + 1) + f(i + 2));
    if (simpson_end != k) sum += 3.0 * dt / 8.0 * (f(k - 3) + 3.0 * f(k - 2) + 3.0 * f(k - 1) + f(k));
    return sum;
  };

  for (int k = 0; k < grid.n_steps; ++k) {
    // Generator at the cell midpoint, O-bar extrapolated from the last two points.
    std::vector<MatrixXc> o_mid(m);
    for (std::size_t j = 0; j < m; ++j)
      o_mid[j] = k == 0 ? MatrixXc(0.5 * out[0][j] + 0.5 * (0.5 * gamma * dt * lowering[j]))
                        : MatrixXc(1.5 * out[k][j] - 0.5 * out[k - 1][j]);
    MatrixXc g = minus_i * h;
    for (std::size_t j = 0; j < m; ++j) g -= lowering[j].adjoint() * o_mid[j];
    const MatrixXc u = (g * dt).exp();
    const MatrixXc u_inv = (-g * dt).exp();
    std::vector<MatrixXc> next(m);
    for (std::size_t j = 0; j < m; ++j) {
      for (auto& o : history[j]) o = u * o * u_inv;
      history[j].push_back(lowering[j]);
      next[j] = quadrature(j, k + 1);
    }
    out.push_back(std::move(next));
  }
  return out;
}

double finite_difference_gradient(const ControlProblem& problem, const ControlField& fields, int l, int k, double eps) {
  auto j_t = [&](double shift) {
    ControlField f = fields;
    f.values[l](k) += shift;
    const auto fw = forward_propagate(problem, f);
    return 1.0 - std::norm(problem.target.amplitudes.dot(fw.back().amplitudes));
  };
  return (j_t(eps) - j_t(-eps)) / (2.0 * eps);
}

TwoQubitDensity brute_force_reduce(const DensityMatrix& rho) {
  const auto& labels = rho.layout.labels();
  std::vector<std::string> modes;
  for (const auto& l : labels)
    if (l != "vac") modes.push_back(l);
  const int n_modes = static_cast<int>(modes.size());
  if (n_modes > 16) throw std::invalid_argument("too many modes for the product space");
  const auto mode_of = [&](const std::string& l) {
    return static_cast<int>(std::find(modes.begin(), modes.end(), l) - modes.begin());
  };
  const int q1 = mode_of("m1"), q2 = mode_of("m2");
  if (q1 == n_modes || q2 == n_modes) throw std::invalid_argument("layout has no magnon labels");

  // Product-space index of each layout entry: one bit per mode.
  std::vector<std::size_t> index;
  for (const auto& l : labels) index.push_back(l == "vac" ? 0u : std::size_t{1} << mode_of(l));

  const std::size_t dim = std::size_t{1} << n_modes;
  MatrixXc big = MatrixXc::Zero(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim));
  for (std::size_t a = 0; a < labels.size(); ++a)
    for (std::size_t b = 0; b < labels.size(); ++b)
      big(static_cast<Eigen::Index>(index[a]), static_cast<Eigen::Index>(index[b])) +=
          rho.matrix(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b));

  // Two-qubit index: magnon 1 is the high bit.
  auto qubits = [&](std::size_t s) { return static_cast<Eigen::Index>(2 * ((s >> q1) & 1u) + ((s >> q2) & 1u)); };
  const std::size_t magnon_mask = (std::size_t{1} << q1) | (std::size_t{1} << q2);
  TwoQubitDensity out;
  for (std::size_t a = 0; a < dim; ++a)
    for (std::size_t b = 0; b < dim; ++b)
      if ((a & ~magnon_mask) == (b & ~magnon_mask))
        out.rho(qubits(a), qubits(b)) += big(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b));
  return out;
}

double wootters_from_eigenvalues(const Eigen::Matrix4cd& rho) {
  Eigen::Matrix4cd yy = Eigen::Matrix4cd::Zero();
  yy(0, 3) = -1.0;
  yy(1, 2) = 1.0;
  yy(2, 1) = 1.0;
  yy(3, 0) = -1.0;
  const Eigen::Matrix4cd r = rho * yy * rho.conjugate() * yy;
  const Eigen::Vector4cd ev = Eigen::ComplexEigenSolver<Eigen::Matrix4cd>(r, false).eigenvalues();
  std::array<double, 4> lam{};
  for (int k = 0; k < 4; ++k) lam[k] = std::sqrt(std::max(0.0, ev(k).real()));
  std::sort(lam.begin(), lam.end(), std::greater<>());
  return std::max(0.0, lam[0] - lam[1] - lam[2] - lam[3]);
}

}  // namespace magnon::oracles

#pragma once

// Fourth-order exponential time differencing (Cox-Matthews) for systems
// du/dt = R o u + N(u, t) where the linear rates R act entrywise.  Used in the
// eigenbasis of a reference Hamiltonian, where -i[H, .] is diagonal.

#include <cmath>
#include <complex>
#include <vector>

#include <Eigen/Dense>

#include "magnon/model.hpp"

namespace magnon::detail {

using cd = std::complex<double>;

struct PhiWeights {
  cd full;       // e^z
  cd half;       // e^{z/2}
  cd half_step;  // (h/2) phi1(z/2)
  cd w_first;    // h (phi1 - 3 phi2 + 4 phi3)
  cd w_middle;   // h (phi2 - 2 phi3)
  cd w_last;     // h (4 phi3 - phi2)
};

// phi1..phi3 at z; Taylor series near zero where the closed forms cancel.
inline void phi_functions(cd z, cd& phi1, cd& phi2, cd& phi3) {
  if (std::abs(z) < 0.5) {
    phi1 = phi2 = phi3 = 0.0;
    cd term = 1.0;  // z^k
    double f1 = 1.0, f2 = 2.0, f3 = 6.0;
    for (int k = 0; k < 20; ++k) {
      phi1 += term / f1;
      phi2 += term / f2;
      phi3 += term / f3;
      term *= z;
      f1 *= k + 2;
      f2 *= k + 3;
      f3 *= k + 4;
    }
    return;
  }
  const cd e = std::exp(z);
  phi1 = (e - 1.0) / z;
  phi2 = (phi1 - 1.0) / z;
  phi3 = (phi2 - 0.5) / z;
}

inline PhiWeights phi_weights(cd rate, double h) {
  const cd z = rate * h;
  cd p1, p2, p3, q1, q2, q3;
  phi_functions(z, p1, p2, p3);
  phi_functions(0.5 * z, q1, q2, q3);
  PhiWeights w;
  w.full = std::exp(z);
  w.half = std::exp(0.5 * z);
  w.half_step = 0.5 * h * q1;
  w.w_first = h * (p1 - 3.0 * p2 + 4.0 * p3);
  w.w_middle = h * (p2 - 2.0 * p3);
  w.w_last = h * (4.0 * p3 - p2);
  return w;
}

/// One block of the state (a matrix) with entrywise rates
/// rate(a, c) = -decay - i (E_row(a) - E_col(c)).
struct BlockSpec {
  Eigen::VectorXd row_energies;
  Eigen::VectorXd col_energies;
  double decay = 0;
};

struct BlockWeights {
  MatrixXc full, half, half_step, w_first, w_middle, w_last;
};

inline BlockWeights block_weights(const BlockSpec& block, double h) {
  const auto rows = block.row_energies.size();
  const auto cols = block.col_energies.size();
  BlockWeights b;
  for (MatrixXc* m : {&b.full, &b.half, &b.half_step, &b.w_first, &b.w_middle, &b.w_last}) m->resize(rows, cols);
  for (Eigen::Index a = 0; a < rows; ++a)
    for (Eigen::Index c = 0; c < cols; ++c) {
      const auto w = phi_weights(cd(-block.decay, -(block.row_energies(a) - block.col_energies(c))), h);
      b.full(a, c) = w.full;
      b.half(a, c) = w.half;
      b.half_step(a, c) = w.half_step;
      b.w_first(a, c) = w.w_first;
      b.w_middle(a, c) = w.w_middle;
      b.w_last(a, c) = w.w_last;
    }
  return b;
}

class ExponentialRk4 {
 public:
  ExponentialRk4(const std::vector<BlockSpec>& blocks, double h) : h_(h) {
    for (const auto& b : blocks) weights_.push_back(block_weights(b, h));
  }

  double step_size() const { return h_; }

  /// nonlinear(u, t, out) fills out (same shapes as u).
  template <typename Nonlinear>
  void step(std::vector<MatrixXc>& u, double t, Nonlinear&& nonlinear) {
    const std::size_t m = u.size();
    resize(u);
    nonlinear(u, t, nu_);
    for (std::size_t i = 0; i < m; ++i)
      a_[i] = weights_[i].half.cwiseProduct(u[i]) + weights_[i].half_step.cwiseProduct(nu_[i]);
    nonlinear(a_, t + 0.5 * h_, na_);
    for (std::size_t i = 0; i < m; ++i)
      b_[i] = weights_[i].half.cwiseProduct(u[i]) + weights_[i].half_step.cwiseProduct(na_[i]);
    nonlinear(b_, t + 0.5 * h_, nb_);
    for (std::size_t i = 0; i < m; ++i)
      c_[i] = weights_[i].half.cwiseProduct(a_[i]) + weights_[i].half_step.cwiseProduct(2.0 * nb_[i] - nu_[i]);
    nonlinear(c_, t + h_, nc_);
    for (std::size_t i = 0; i < m; ++i) {
      const auto& w = weights_[i];
      u[i] = w.full.cwiseProduct(u[i]) + w.w_first.cwiseProduct(nu_[i]) + w.w_middle.cwiseProduct(2.0 * (na_[i] + nb_[i])) +
             w.w_last.cwiseProduct(nc_[i]);
    }
  }

 private:
  void resize(const std::vector<MatrixXc>& u) {
    for (auto* v : {&nu_, &na_, &nb_, &nc_, &a_, &b_, &c_})
      if (v->size() != u.size()) v->assign(u.size(), MatrixXc());
  }

  double h_;
  std::vector<BlockWeights> weights_;
  std::vector<MatrixXc> nu_, na_, nb_, nc_, a_, b_, c_;
};

}  // namespace magnon::detail

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include <unsupported/Eigen/FFT>

#include "magnon/dynamics.hpp"
#include "magnon/oracles/oracles.hpp"

using namespace magnon;

namespace {

const EffectiveParams<double> kBeat{1200, 1, 1, 0.1, 0.23, 1.3};

StateVector magnon1() { return StateVector::basis_state(BasisLayout::effective(), "m1"); }

double max_amplitude_error(const Trajectory& a, const Trajectory& b) {
  double err = 0;
  for (std::size_t i = 0; i < a.size(); ++i)
    err = std::max(err, (a.states[i].amplitudes - b.states[i].amplitudes).cwiseAbs().maxCoeff());
  return err;
}

}  // namespace

TEST_CASE("time grid") {
  const TimeGrid g(1, 3, 4);
  CHECK(g.dt() == 0.5);
  CHECK(g.times().size() == 5);
  CHECK(g.time(4) == 3.0);
  CHECK_THROWS(TimeGrid(1, 1, 4));
  CHECK_THROWS(TimeGrid(0, 1, 0));
}

TEST_CASE("default step count") {
  const auto h = build_effective_hamiltonian(kBeat);
  const int n = default_step_count(h.matrix, 0, 10);
  const double largest = h.matrix.diagonal().cwiseAbs().maxCoeff();
  CHECK(10.0 / n * largest <= 0.05);
  CHECK(10.0 / (n - 1) * largest > 0.05);
  CHECK(default_step_count(MatrixXc::Zero(2, 2), 0, 1) == 1);
  CHECK_THROWS(default_step_count(h.matrix, 0, 1e12));
}

TEST_CASE("zero time is the identity") {
  const auto h = build_effective_hamiltonian(kBeat);
  const double t0 = 0;
  const auto tr = sample_constant(h, magnon1(), std::span(&t0, 1));
  CHECK((tr.states[0].amplitudes - magnon1().amplitudes).norm() == 0.0);
  const auto grid = propagate_constant(h, magnon1(), TimeGrid(0, 1, 3));
  CHECK((grid.states[0].amplitudes - magnon1().amplitudes).norm() == 0.0);
}

TEST_CASE("diagonal hamiltonian picks up phases") {
  HamiltonianMatrix<double> h{MatrixXc::Zero(3, 3), BasisLayout({"x", "y", "z"}), true};
  h.matrix.diagonal() << 0.5, -1.25, 3.0;
  StateVector psi{VectorXc::Constant(3, 1.0 / std::sqrt(3.0)), h.layout};
  const auto tr = propagate_constant(h, psi, TimeGrid(0, 2, 4));
  for (std::size_t k = 0; k < tr.size(); ++k)
    for (int j = 0; j < 3; ++j) {
      const auto expected = std::exp(std::complex<double>(0, -h.matrix(j, j).real() * tr.times[k])) / std::sqrt(3.0);
      CHECK(std::abs(tr.states[k].amplitudes(j) - expected) < 1e-14);
    }
}

TEST_CASE("spectral propagation matches a fixed-step integrator in the weak-coupling regime") {
  const auto h = build_effective_hamiltonian(kBeat);
  const TimeGrid grid(0, 50, 50);
  const auto exact = propagate_constant(h, magnon1(), grid);
  const auto rk4 = oracles::rk4_propagate(h.matrix, magnon1().amplitudes, grid, 1000);  // dt = 1e-3
  double err = 0;
  for (std::size_t i = 0; i < rk4.size(); ++i)
    err = std::max(err, (exact.states[i].amplitudes - rk4[i]).cwiseAbs().maxCoeff());
  CHECK(err < 1e-6);
}

TEST_CASE("norm conservation and time reversal") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.05, 3);
  std::normal_distribution<double> n;
  for (int trial = 0; trial < 20; ++trial) {
    const EffectiveParams<double> p{u(rng) * 100, u(rng), u(rng), u(rng), u(rng), u(rng)};
    const auto h = build_effective_hamiltonian(p);
    VectorXc v(6);
    for (auto& x : v) x = {n(rng), n(rng)};
    const StateVector psi{v.normalized(), BasisLayout::effective()};
    const auto tr = propagate_constant(h, psi, TimeGrid(0, 500, 100));
    for (const auto& s : tr.states) {
      CHECK(std::abs(s.norm() - 1) < 1e-9);
      CHECK(s.amplitudes.allFinite());
    }
    const SpectralPropagator prop(h);
    const VectorXc back = prop.evolve(prop.evolve(psi.amplitudes, 321.5), -321.5);
    CHECK((back - psi.amplitudes).norm() < 1e-9);
  }
}

TEST_CASE("very long times stay normalized") {
  const auto h = build_effective_hamiltonian(kBeat);
  const std::vector<double> times{1e6, 5.5e7, 1.1e8};
  const auto tr = sample_constant(h, magnon1(), times);
  for (const auto& s : tr.states) CHECK(std::abs(s.norm() - 1) < 1e-9);
}

TEST_CASE("time-dependent stepping reduces to the constant case") {
  const auto h = build_effective_hamiltonian(kBeat);
  const TimeGrid grid(0, 20, 400);
  const auto a = propagate_constant(h, magnon1(), grid);
  const auto b = propagate_timedep([&](double) { return h; }, magnon1(), grid);
  CHECK(max_amplitude_error(a, b) < 1e-10);

  // Magnon frequencies pinned at omega_m reproduce the uncontrolled dynamics.
  const EffectiveParams<double> p{12, 1, 1, 1, 1.5, 3};
  const auto c = propagate_constant(build_effective_hamiltonian(p), magnon1(), grid);
  const auto d = propagate_timedep([&](double) { return build_effective_hamiltonian(p, std::pair{1.0, 1.0}); }, magnon1(), grid);
  CHECK(max_amplitude_error(c, d) < 1e-10);
}

TEST_CASE("time-dependent stepping converges at second order") {
  const EffectiveParams<double> p{12, 1, 1, 1, 1.5, 3};
  auto source = [&](double t) { return build_effective_hamiltonian(p, std::pair{1 + 0.2 * std::sin(t), 1 - 0.1 * std::cos(2 * t)}); };
  auto final_state = [&](int steps) { return propagate_timedep(source, magnon1(), TimeGrid(0, 10, steps)).back().amplitudes; };
  const VectorXc coarse = final_state(200), mid = final_state(400), fine = final_state(800);
  const double ratio = (coarse - mid).norm() / (mid - fine).norm();
  CHECK(ratio == doctest::Approx(4.0).epsilon(0.05));
  for (int steps : {200, 400, 800}) CHECK(std::abs(final_state(steps).norm() - 1) < 1e-9);
}

TEST_CASE("time-dependent stepping rejects bad input") {
  const auto h = build_effective_hamiltonian(kBeat);
  const StateVector wrong{VectorXc::Zero(4), BasisLayout({"a", "b", "c", "d"})};
  CHECK_THROWS(propagate_constant(h, wrong, TimeGrid(0, 1, 1)));
  CHECK_THROWS(propagate_timedep([&](double) { return build_effective_hamiltonian(kBeat, std::pair{NAN, 1.0}); }, magnon1(),
                                 TimeGrid(0, 1, 2)));
}

TEST_CASE("analytic amplitudes at zero time and without optics") {
  const auto [p1, p2] = analytic_magnon_amplitudes(kBeat, 0.0);
  CHECK(std::abs(p1 - 1.0) < 1e-15);
  CHECK(std::abs(p2) < 1e-15);

  auto p = kBeat;
  p.g_c = 0;
  for (double t : {0.3, 7.0, 123.4, 1e4}) {
    const auto [a1, a2] = analytic_magnon_amplitudes(p, t);
    const auto expected = std::exp(std::complex<double>(0, -p.omega_m * t)) * std::cos(p.g_m * t);
    CHECK(std::abs(a1 - expected) < 1e-9);
    CHECK(std::abs(a2) < 1e-12);
  }
}

TEST_CASE("analytic amplitudes converge to the numerics as omega_a grows") {
  auto max_error = [](double omega_a) {
    auto p = kBeat;
    p.omega_a = omega_a;
    std::vector<double> times;
    for (double t = 0; t <= 2000; t += 0.37) times.push_back(t);
    const auto tr = sample_constant(build_effective_hamiltonian(p), magnon1(), times);
    double err = 0;
    for (std::size_t i = 0; i < times.size(); ++i)
      err = std::max(err, std::abs(std::abs(analytic_magnon_amplitudes(p, times[i]).first) - std::abs(tr.states[i]["m1"])));
    return err;
  };
  const double e1 = max_error(1200), e2 = max_error(2400);
  CHECK(e1 < 1e-3);
  CHECK(e1 / e2 > 1.8);
}

TEST_CASE("spectrum of the magnon amplitude peaks at the analytic frequencies") {
  // Undersampled on purpose: every frequency aliases into [0, 2 pi / stride) at a
  // known bin, and the window is long enough to split the beat pair.
  const auto f = analytic_frequencies(kBeat);
  const int n = 1 << 21;
  const double stride = 300;
  std::vector<double> times(n);
  for (int i = 0; i < n; ++i) times[static_cast<std::size_t>(i)] = i * stride;
  const auto tr = sample_constant(build_effective_hamiltonian(kBeat), magnon1(), times);
  std::vector<std::complex<double>> signal(n), spectrum;
  for (int i = 0; i < n; ++i) signal[static_cast<std::size_t>(i)] = tr.states[static_cast<std::size_t>(i)]["m1"];
  Eigen::FFT<double> fft;
  fft.fwd(spectrum, signal);

  std::vector<double> mag(n);
  for (int i = 0; i < n; ++i) mag[static_cast<std::size_t>(i)] = std::abs(spectrum[static_cast<std::size_t>(i)]);
  std::vector<int> peaks;
  for (int i = 0; i < n; ++i) {
    const double here = mag[static_cast<std::size_t>(i)];
    if (here > mag[static_cast<std::size_t>((i + 1) % n)] && here >= mag[static_cast<std::size_t>((i + n - 1) % n)])
      peaks.push_back(i);
  }
  std::partial_sort(peaks.begin(), peaks.begin() + 4, peaks.end(),
                    [&](int a, int b) { return mag[static_cast<std::size_t>(a)] > mag[static_cast<std::size_t>(b)]; });
  peaks.resize(4);

  // p1 ~ e^{i w1 t} + e^{-i w2 t} + e^{i w3 t} + e^{-i w4 t}; the forward FFT bin of
  // e^{i nu t_j} is nu * stride * n / (2 pi) mod n.
  auto bin = [&](double nu) {
    const double b = std::fmod(nu * stride * n / (2 * std::numbers::pi), double(n));
    return b < 0 ? b + n : b;
  };
  const double binwidth = 2 * std::numbers::pi / (stride * n);
  CHECK((f.omega_3 - f.omega_1) / binwidth > 2.0);
  for (double nu : {f.omega_1, -f.omega_2, f.omega_3, -f.omega_4}) {
    const double expected = bin(nu);
    const bool found = std::any_of(peaks.begin(), peaks.end(), [&](int p) {
      const double d = std::abs(p - expected);
      return std::min(d, n - d) <= 1.0;
    });
    CHECK_MESSAGE(found, "no peak near bin " << expected);
  }
}

namespace {

FullModelParams<double> converter(double detuning, double pump) {
  FullModelParams<double> p;
  p.omega_a_prime = 12;
  p.omega_b_prime = 1;
  p.omega_m = 1;
  p.g_mb = 1;
  p.j_a = 3;
  p.g_cb = 1;
  p.g_ca = 1;
  p.Omega = pump;
  p.delta_1 = detuning;
  p.delta_2 = detuning;
  return p;
}

}  // namespace

TEST_CASE("adiabatic elimination with the converter decoupled") {
  auto p = converter(10, 1);
  p.g_cb = p.g_ca = 0;
  const auto r = validate_adiabatic_elimination(p, TimeGrid(0, 50, 500));
  CHECK(r.max_deviation < 1e-12);
  CHECK(r.effective_coupling == 0.0);
}

TEST_CASE("adiabatic deviation shrinks with detuning") {
  double last = INFINITY;
  for (double d : {10.0, 30.0, 100.0, 300.0}) {
    const auto r = validate_adiabatic_elimination(converter(d, 1), TimeGrid(0, 50, 500));
    CHECK(r.regime_ok);
    CHECK(r.max_deviation < last);
    last = r.max_deviation;
  }
  const auto weak = validate_adiabatic_elimination(converter(5, 1), TimeGrid(0, 5, 50));
  CHECK_FALSE(weak.regime_ok);
  CHECK_FALSE(weak.warning.empty());
}

TEST_CASE("without pump the converter only dresses the microwave mode at second order") {
  // With the level shift g_cb^2 / (omega_b - delta_1) folded into the effective
  // microwave frequency, what remains is the (g_cb / delta_1)^2 leakage.
  std::vector<double> scaled;
  for (double d : {10.0, 30.0, 100.0}) {
    auto full = converter(d, 0);
    full.delta_2 = 2 * d;
    auto eff = effective_from_full(full);
    CHECK(eff.g_c == 0.0);
    eff.omega_b += full.g_cb * full.g_cb / (full.omega_b_prime - full.delta_1);
    const TimeGrid grid(0, 5, 500);
    const auto a = propagate_constant(build_full_hamiltonian(full), StateVector::basis_state(BasisLayout::full(), "m1"), grid);
    const auto b = propagate_constant(build_effective_hamiltonian(eff), magnon1(), grid);
    double dev = 0;
    for (std::size_t i = 0; i < a.size(); ++i)
      for (const char* m : {"m1", "m2"}) dev = std::max(dev, std::abs(a.states[i][m] - b.states[i][m]));
    const double bound = std::pow(full.g_cb / full.delta_1, 2);
    CHECK(dev <= 3 * bound);
    scaled.push_back(dev / bound);
  }
  CHECK(scaled.front() / scaled.back() == doctest::Approx(1.0).epsilon(0.3));
}

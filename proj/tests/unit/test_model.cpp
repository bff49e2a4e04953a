#include <doctest.h>

#include <random>

#include <boost/multiprecision/cpp_bin_float.hpp>

#include "magnon/model.hpp"

using namespace magnon;
using big = boost::multiprecision::cpp_bin_float_50;

namespace {

EffectiveParams<double> beat_params() { return {1200, 1, 1, 0.1, 0.23, 1.3}; }

FullModelParams<double> random_full(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-2, 2), pos(5, 50);
  FullModelParams<double> p;
  p.omega_a_prime = pos(rng);
  p.omega_b_prime = u(rng);
  p.omega_m = u(rng);
  p.delta_1 = pos(rng);
  p.delta_2 = pos(rng);
  p.Omega = u(rng);
  p.g_mb = u(rng);
  p.g_cb = u(rng);
  p.g_ca = u(rng);
  p.j_a = u(rng);
  return p;
}

}  // namespace

TEST_CASE("effective coupling") {
  FullModelParams<double> p;
  p.omega_a_prime = 10;
  p.g_ca = p.g_cb = p.Omega = p.delta_1 = 1;
  p.delta_2 = 2;
  CHECK(compute_effective_coupling(p) == doctest::Approx(1.0));

  p.Omega = 0;
  CHECK(compute_effective_coupling(p) == 0.0);

  p.Omega = std::sqrt(2.0);
  CHECK_THROWS_AS(compute_effective_coupling(p), resonance_error);

  p.Omega = 1;
  CHECK(compute_effective_coupling(p, DetuningConvention::Delta2Squared) == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("effective coupling is odd in the pump") {
  std::mt19937_64 rng(7);
  for (int i = 0; i < 100; ++i) {
    auto p = random_full(rng);
    const double plus = compute_effective_coupling(p);
    p.Omega = -p.Omega;
    CHECK(compute_effective_coupling(p) == doctest::Approx(-plus).epsilon(1e-14));
  }
}

TEST_CASE("full hamiltonian entries") {
  FullModelParams<double> p;
  p.omega_a_prime = 12;
  p.omega_b_prime = 1.1;
  p.omega_m = 0.9;
  p.delta_1 = 20;
  p.delta_2 = 30;
  p.Omega = 0.5;
  p.g_mb = 0.2;
  p.g_cb = 0.3;
  p.g_ca = 0.4;
  p.j_a = 0.6;
  const auto h = build_full_hamiltonian(p);
  const auto& L = h.layout;
  auto at = [&](const char* a, const char* b) {
    return h.matrix(static_cast<Eigen::Index>(L.index_of(a)), static_cast<Eigen::Index>(L.index_of(b)));
  };
  CHECK(h.dimension() == 10);
  CHECK(at("m1", "b1") == std::complex<double>(0.2));
  CHECK(at("m2", "b2") == std::complex<double>(0.2));
  CHECK(at("b1", "atom1_1") == std::complex<double>(0.3));
  CHECK(at("atom1_2", "atom2_2") == std::complex<double>(0.5));
  CHECK(at("atom2_1", "a1") == std::complex<double>(0.4));
  CHECK(at("a1", "a2") == std::complex<double>(0.6));
  CHECK(at("m1", "b2") == std::complex<double>(0.0));
  CHECK(at("atom1_1", "a1") == std::complex<double>(0.0));

  p.Omega = p.g_mb = p.g_cb = p.g_ca = p.j_a = 0;
  const auto d = build_full_hamiltonian(p);
  Eigen::VectorXd expected(10);
  expected << 0.9, 0.9, 1.1, 1.1, 20, 20, 30, 30, 12, 12;
  CHECK(d.matrix.isApprox(MatrixXc(expected.cast<std::complex<double>>().asDiagonal())));
}

TEST_CASE("hamiltonians are hermitian") {
  std::mt19937_64 rng(11);
  for (int i = 0; i < 200; ++i) {
    const auto full = random_full(rng);
    CHECK(build_full_hamiltonian(full).hermiticity_defect() <= 1e-12);
    const EffectiveParams<double> eff{full.omega_a_prime, full.omega_b_prime, full.omega_m, full.g_mb, full.g_ca, full.j_a};
    CHECK(build_effective_hamiltonian(eff).hermiticity_defect() <= 1e-12);
  }
}

TEST_CASE("effective hamiltonian pattern") {
  const EffectiveParams<double> p{12, 1.05, 0.95, 0.7, 1.5, 3};
  const auto h = build_effective_hamiltonian(p);
  CHECK(h.layout == BasisLayout::effective());
  CHECK(h.matrix(4, 5) == std::complex<double>(3));

  // Nonzero pattern of the printed matrix.
  Eigen::Matrix<int, 6, 6> pattern;
  pattern << 1, 0, 1, 0, 0, 0,
             0, 1, 0, 1, 0, 0,
             1, 0, 1, 0, 1, 0,
             0, 1, 0, 1, 0, 1,
             0, 0, 1, 0, 1, 1,
             0, 0, 0, 1, 1, 1;
  for (int r = 0; r < 6; ++r)
    for (int c = 0; c < 6; ++c) CHECK((h.matrix(r, c) != 0.0) == (pattern(r, c) == 1));

  const Eigen::Vector<double, 6> diag{0.95, 0.95, 1.05, 1.05, 12, 12};
  CHECK(h.matrix.diagonal().real().isApprox(diag));

  auto decoupled = p;
  decoupled.g_c = 0;
  const auto hd = build_effective_hamiltonian(decoupled);
  CHECK(hd.matrix.block(0, 4, 4, 2).isZero(0));
  CHECK(hd.matrix.block(4, 0, 2, 4).isZero(0));

  const auto ho = build_effective_hamiltonian(p, std::pair{1.1, 0.9});
  CHECK(ho.matrix(0, 0) == std::complex<double>(1.1));
  CHECK(ho.matrix(1, 1) == std::complex<double>(0.9));
  MatrixXc rest = ho.matrix - h.matrix;
  rest(0, 0) = rest(1, 1) = 0;
  CHECK(rest.isZero(0));
}

TEST_CASE("projected non-hermitian hamiltonian") {
  EffectiveParams<double> p{1200, 1, 1, 0.1, 0.23, 1.3};
  const auto h = build_pq_effective_hamiltonian(p);
  CHECK_FALSE(h.hermitian);
  CHECK(h.dimension() == 4);
  const double wa2 = p.omega_a * p.omega_a;
  CHECK(h.matrix(2, 0).real() == doctest::Approx(p.g_m - p.g_c * p.g_c * p.g_m / wa2).epsilon(1e-15));
  CHECK(h.matrix(0, 2).real() == p.g_m);
  CHECK(h.matrix(2, 3).real() == doctest::Approx(p.g_c * p.g_c * p.j_a / wa2).epsilon(1e-15));

  auto decoupled = p;
  decoupled.g_c = 0;
  const auto hd = build_pq_effective_hamiltonian(decoupled);
  CHECK(hd.hermiticity_defect() == 0.0);
  CHECK(hd.matrix(2, 0).real() == p.g_m);

  // Every correction term scales with 1/omega_a^2 at fixed omega_a-free factors.
  auto corrections = [&](double wa) {
    auto q = p;
    q.omega_a = wa;
    q.j_a = 1.3;
    const auto m = build_pq_effective_hamiltonian(q).matrix;
    auto bare = decoupled;
    const auto b = build_pq_effective_hamiltonian(bare).matrix;
    return std::array<double, 2>{(m(2, 0) - b(2, 0)).real(), (m(2, 3) - b(2, 3)).real()};
  };
  const auto c1 = corrections(1200);
  const auto c10 = corrections(12000);
  CHECK(c1[0] / c10[0] == doctest::Approx(100).epsilon(1e-5));  // cancellation against g_m
  CHECK(c1[1] / c10[1] == doctest::Approx(100).epsilon(1e-9));

  p.omega_b = 1.01;
  CHECK_THROWS_AS(build_pq_effective_hamiltonian(p), model_error);
}

TEST_CASE("analytic frequencies, decoupled optics") {
  const EffectiveParams<double> p{1200, 1, 1, 0.1, 0, 1.3};
  const auto f = analytic_frequencies(p);
  CHECK(f.omega_1 == doctest::Approx(-0.9).epsilon(1e-12));
  CHECK(f.omega_3 == doctest::Approx(-0.9).epsilon(1e-12));
  CHECK(f.omega_2 == doctest::Approx(1.1).epsilon(1e-12));
  CHECK(f.omega_4 == doctest::Approx(1.1).epsilon(1e-12));
  CHECK(f.s_1 == doctest::Approx(2 * 0.1 * 1200 * 1200));
}

TEST_CASE("analytic frequencies, no fiber coupling") {
  const auto f = analytic_frequencies(EffectiveParams<double>{1200, 1, 1, 0.1, 0.23, 0});
  CHECK(f.s_1 == f.s_2);
  CHECK(f.omega_1 == f.omega_3);
  CHECK(f.omega_2 == f.omega_4);
}

TEST_CASE("analytic frequencies swap under fiber sign flip") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> gm(0.05, 1), gc(0.05, 2), ja(-5, 5);
  for (int i = 0; i < 100; ++i) {
    EffectiveParams<double> p{1200, 1, 1, gm(rng), gc(rng), ja(rng)};
    const auto f = analytic_frequencies(p);
    p.j_a = -p.j_a;
    const auto g = analytic_frequencies(p);
    CHECK(f.omega_1 == doctest::Approx(g.omega_3).epsilon(1e-12));
    CHECK(f.omega_2 == doctest::Approx(g.omega_4).epsilon(1e-12));
  }
}

TEST_CASE("analytic frequencies match a 50-digit evaluation in the weak-coupling regime") {
  // Independent transcription of the printed formulas in extended precision.
  const big wa = 1200, wm = 1, gm = big(1) / 10, gc = big(23) / 100, ja = big(13) / 10;
  const big wa2 = wa * wa, gc2 = gc * gc;
  const big s1 = sqrt(gc2 * gc2 * pow(wm + wa - ja, 2) - 4 * gc2 * gm * gm * wa2 + 4 * gm * gm * wa2 * wa2);
  const big s2 = sqrt(gc2 * gc2 * pow(wm + wa + ja, 2) - 4 * gc2 * gm * gm * wa2 + 4 * gm * gm * wa2 * wa2);
  const big w1 = (gc2 * (wm + wa - ja) + s1 - 2 * wm * wa2) / (2 * wa2);
  const big w2 = (-gc2 * (wm + wa - ja) + s1 + 2 * wm * wa2) / (2 * wa2);
  const big w3 = (gc2 * (wm + wa + ja) + s2 - 2 * wm * wa2) / (2 * wa2);
  const big w4 = (-gc2 * (wm + wa + ja) + s2 + 2 * wm * wa2) / (2 * wa2);

  const auto f = analytic_frequencies(beat_params());
  CHECK(std::abs(f.omega_1 - w1.convert_to<double>()) < 1e-13);
  CHECK(std::abs(f.omega_2 - w2.convert_to<double>()) < 1e-13);
  CHECK(std::abs(f.omega_3 - w3.convert_to<double>()) < 1e-13);
  CHECK(std::abs(f.omega_4 - w4.convert_to<double>()) < 1e-13);
  // The splitting that sets the beat period survives double rounding.
  const double split = (w3 - w1).convert_to<double>();
  CHECK(std::abs((f.omega_3 - f.omega_1) - split) < 1e-6 * split);

  // The templated model runs in extended precision as well.
  const EffectiveParams<big> pb{wa, 1, wm, gm, gc, ja};
  const auto fb = analytic_frequencies(pb);
  CHECK(abs(fb.omega_3 - w3) < big(1e-40));
}

TEST_CASE("negative radicand is an error") {
  CHECK_THROWS_AS(analytic_frequencies(EffectiveParams<double>{1, -1, -1, 1, 3, 0}), model_error);
}

TEST_CASE("basis layouts") {
  CHECK(BasisLayout::open().index_of("vac") == 0);
  CHECK(BasisLayout::open().index_of("co2") == 6);
  CHECK(BasisLayout::full().size() == 10);
  CHECK_THROWS_AS(BasisLayout({"a", "a"}), model_error);
  CHECK_THROWS_AS(BasisLayout::effective().index_of("vac"), model_error);
}

TEST_CASE("parameter validation") {
  CHECK_THROWS_AS(build_effective_hamiltonian(EffectiveParams<double>{0, 1, 1, 1, 1, 1}), model_error);
  CHECK_THROWS_AS(build_effective_hamiltonian(EffectiveParams<double>{12, NAN, 1, 1, 1, 1}), model_error);
  FullModelParams<double> p;
  p.omega_a_prime = 1;
  p.delta_1 = 1;
  CHECK_THROWS_AS(build_full_hamiltonian(p), model_error);
}

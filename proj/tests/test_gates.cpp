#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include <unsupported/Eigen/KroneckerProduct>
#include <unsupported/Eigen/MatrixFunctions>

#include "tweezersim/errors.hpp"
#include "tweezersim/gates.hpp"

using namespace tweezersim;
using constants::pi;

namespace {

constexpr int kN = 3;

Eigen::VectorXcd vec(const Register& r) {
  const auto a = r.amplitudes();
  Eigen::VectorXcd v(static_cast<Eigen::Index>(a.size()));
  for (std::size_t i = 0; i < a.size(); ++i) v(static_cast<Eigen::Index>(i)) = a[i];
  return v;
}

Eigen::VectorXcd vec(const HybridAtomState& s) {
  Eigen::VectorXcd v(static_cast<Eigen::Index>(s.dim()));
  for (std::size_t i = 0; i < s.dim(); ++i) v(static_cast<Eigen::Index>(i)) = s.amplitudes()[i];
  return v;
}

Register pair(const HybridAtomState& a, const HybridAtomState& b) { return Register({a, b}); }

HybridAtomState up(int n = 0) { return prepare_fock(ElectronicLevel::Up, n, kN); }
HybridAtomState down(int n = 0) { return prepare_fock(ElectronicLevel::Down, n, kN); }

HybridAtomState absent() {
  auto s = up();
  s.set_lost(true);
  return s;
}

}  // namespace

TEST_CASE("rotation operator equals the exponential of the Pauli generator") {
  Eigen::Matrix2cd sx, sy;
  sx << 0, 1, 1, 0;
  sy << 0, Complex(0, -1), Complex(0, 1), 0;
  for (double phi : {0.0, 0.4, pi / 2, 2.9})
    for (double theta : {pi / 2, -pi / 2, pi, 0.3}) {
      const Eigen::Matrix2cd oracle = (Complex(0, -theta / 2) * (std::cos(phi) * sx + std::sin(phi) * sy)).exp();
      const Eigen::MatrixXcd u = rotation_op(phi, theta, kN).dense();
      for (int n = 0; n <= kN; ++n) {
        CHECK(std::abs(u(n, n) - oracle(0, 0)) < 1e-12);
        CHECK(std::abs(u(n, kN + 1 + n) - oracle(0, 1)) < 1e-12);
        CHECK(std::abs(u(kN + 1 + n, n) - oracle(1, 0)) < 1e-12);
        CHECK(std::abs(u(kN + 1 + n, kN + 1 + n) - oracle(1, 1)) < 1e-12);
      }
    }
}

TEST_CASE("register local operations equal Kronecker products") {
  const auto a = prepare_superposition(Complex(0.6), Complex(0, 0.8), 1, kN);
  const auto b = prepare_superposition(Complex(std::sqrt(0.5)), Complex(std::sqrt(0.5)), 2, kN);
  Register r = pair(a, b);
  CHECK(r.norm_squared() == doctest::Approx(1.0));
  const auto op = rotation_op(0.3, 1.1, kN);
  r.apply(1, op);
  const Eigen::MatrixXcd id = Eigen::MatrixXcd::Identity(2 * (kN + 1), 2 * (kN + 1));
  const Eigen::MatrixXcd full = Eigen::kroneckerProduct(id, op.dense());
  const Eigen::VectorXcd oracle = full * Eigen::VectorXcd(Eigen::kroneckerProduct(vec(a), vec(b)));
  CHECK((vec(r) - oracle).norm() < 1e-12);
  CHECK(r.electronic_population(0, ElectronicLevel::Up) == doctest::Approx(0.64));
  CHECK(r.motional_distribution(1)[2] == doctest::Approx(1.0));
}

TEST_CASE("ideal CZ truth table") {
  Rng rng(1);
  GateContext ctx(GateErrorSpec::ideal(), rng);
  const auto plus = prepare_superposition(Complex(std::sqrt(0.5)), Complex(std::sqrt(0.5)), 0, kN);
  Register r = pair(plus, plus);
  CHECK(apply_cz(r, 0, 1, ctx) == CzOutcome::Ideal);
  const auto a = r.amplitudes();
  const std::size_t d = 2 * (kN + 1);
  const std::size_t u = kN + 1;
  CHECK(std::abs(a[0 * d + 0] - 0.5) < 1e-12);
  CHECK(std::abs(a[0 * d + u] - 0.5) < 1e-12);
  CHECK(std::abs(a[u * d + 0] - 0.5) < 1e-12);
  CHECK(std::abs(a[u * d + u] + 0.5) < 1e-12);
}

TEST_CASE("CZ with a missing atom is vacuous") {
  Rng rng(2);
  GateContext ctx(GateErrorSpec::ideal(), rng);
  const auto plus = prepare_superposition(Complex(std::sqrt(0.5)), Complex(std::sqrt(0.5)), 0, kN);
  Register r = pair(absent(), plus);
  const Eigen::VectorXcd before = vec(r);
  CHECK(apply_cz(r, 0, 1, ctx) == CzOutcome::Vacuous);
  CHECK((vec(r) - before).norm() < 1e-12);
  CHECK(ctx.events().back() == "cz_vacuous");
}

TEST_CASE("CNOT maps data presence onto the ancilla") {
  for (double theta : {0.0, 0.7}) {
    GateErrorSpec spec = GateErrorSpec::ideal();
    spec.cz_single_atom_phase = theta;
    for (bool present : {true, false}) {
      Rng rng(3);
      GateContext ctx(spec, rng);
      Register r = pair(present ? up() : absent(), up());
      apply_local_z(r, 0, -theta);
      apply_rotation(r, 1, 0.0, pi / 2, ctx);
      apply_cz(r, 0, 1, ctx);
      apply_rotation(r, 1, pi + theta, pi / 2, ctx);
      const double p_down = r.electronic_population(1, ElectronicLevel::Down);
      // Present data flips the ancilla to the bright state.
      CHECK(p_down == doctest::Approx(present ? 1.0 : 0.0).epsilon(1e-12));
    }
  }
}

TEST_CASE("CZ error branches occur at their configured rates") {
  GateErrorSpec spec;
  spec.cz_phase_error_prob = 0.1;
  spec.cz_loss_prob = 0.05;
  Rng rng(4);
  int loss = 0, phase = 0;
  const int trials = 40000;
  for (int i = 0; i < trials; ++i) {
    GateContext ctx(spec, rng);
    Register r = pair(up(), up());
    const auto out = apply_cz(r, 0, 1, ctx);
    if (out == CzOutcome::Loss) {
      ++loss;
      CHECK(r.lost(0) != r.lost(1));
    }
    if (out == CzOutcome::PhaseError) ++phase;
  }
  CHECK(std::abs(loss / double(trials) - 0.05) < 5 * std::sqrt(0.05 * 0.95 / trials));
  CHECK(std::abs(phase / double(trials) - 0.1) < 5 * std::sqrt(0.1 * 0.9 / trials));
}

TEST_CASE("over-rotation jitter is shared within a shot") {
  GateErrorSpec spec = GateErrorSpec::ideal();
  spec.sq_over_rotation_sigma = 0.05;
  Rng rng(5);
  GateContext ctx(spec, rng);
  const double a = ctx.next_over_rotation();
  CHECK(a != 0.0);
  CHECK(ctx.next_over_rotation() == a);
  spec.sq_jitter_per_gate = true;
  GateContext per_gate(spec, rng);
  CHECK(per_gate.next_over_rotation() != per_gate.next_over_rotation());
}

TEST_CASE("measurement collapses and follows the Born rule") {
  Rng rng(6);
  const auto s = prepare_superposition(Complex(std::sqrt(0.3)), Complex(std::sqrt(0.7)), 0, kN);
  int downs = 0;
  const int trials = 20000;
  for (int i = 0; i < trials; ++i) {
    Register r({s});
    const auto lvl = r.measure_electronic(0, rng);
    if (lvl == ElectronicLevel::Down) ++downs;
    CHECK(r.electronic_population(0, lvl) == doctest::Approx(1.0));
  }
  CHECK(std::abs(downs / double(trials) - 0.3) < 5 * std::sqrt(0.21 / trials));
}

TEST_CASE("loss, replacement and heating") {
  Rng rng(7);
  Register r = pair(down(1), up(0));
  r.mark_lost(0, rng);
  CHECK(r.lost(0));
  const Eigen::VectorXcd before = vec(r);
  r.apply(0, rotation_op(0.0, pi, kN));
  CHECK((vec(r) - before).norm() == 0.0);

  r.replace(1, down(2), rng);
  CHECK(r.atom_state(1).population(ElectronicLevel::Down, 2) == doctest::Approx(1.0));

  Register h({prepare_superposition(Complex(std::sqrt(0.5)), Complex(std::sqrt(0.5)), 1, kN)});
  h.apply_raising(0);
  CHECK(h.motional_distribution(0)[2] == doctest::Approx(1.0));
  CHECK(h.norm_squared() == doctest::Approx(1.0));
  Register edge({down(kN)});
  CHECK_THROWS_AS(edge.apply_raising(0), TruncationError);
}

TEST_CASE("imaging and pushout") {
  ImagingSpec spec;
  spec.bright_loss_prob = 0.0;
  Rng rng(8);
  Register r = pair(down(), up());
  const auto bright = image(r, 0, spec, rng);
  const auto dark = image(r, 1, spec, rng);
  CHECK(bright.bright);
  CHECK_FALSE(dark.bright);
  CHECK(pushout(r, 0, rng));
  CHECK_FALSE(pushout(r, 1, rng));
  CHECK(r.lost(0));
  spec.unshelved_loss_prob = 1.0;
  Register e = pair(down(), up());
  CHECK(expose(e, 0, spec, rng));
  CHECK_FALSE(expose(e, 1, spec, rng));
}

TEST_CASE("entangled atoms have no single-atom state") {
  Rng rng(9);
  GateContext ctx(GateErrorSpec::ideal(), rng);
  const auto plus = prepare_superposition(Complex(std::sqrt(0.5)), Complex(std::sqrt(0.5)), 0, kN);
  Register r = pair(plus, plus);
  apply_cz(r, 0, 1, ctx);
  CHECK_THROWS_AS(r.atom_state(0), NumericError);
}

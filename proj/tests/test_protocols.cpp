#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "tweezersim/analysis.hpp"
#include "tweezersim/errors.hpp"
#include "tweezersim/protocols.hpp"

using namespace tweezersim;
using constants::pi;

namespace {

ReadoutConfig ideal_readout() {
  ReadoutConfig c;
  c.shots = 200;
  c.gates = GateErrorSpec::ideal();
  c.imaging.bright_loss_prob = 0.0;
  c.heating_prob_per_round = 0.0;
  return c;
}

}  // namespace

TEST_CASE("ideal repeated readout is bright for present data and dark for absent data") {
  const auto r = run_repeated_readout(ideal_readout());
  REQUIRE(r.records.size() == 400);
  for (const auto& rec : r.records) {
    REQUIRE(rec.rounds.size() == 4);
    for (const auto& round : rec.rounds) CHECK(round.bright == (rec.scenario == Scenario::Present));
  }
}

TEST_CASE("shot records do not depend on the worker count") {
  auto c = ideal_readout();
  c.gates = GateErrorSpec{};
  c.imaging = ImagingSpec{};
  c.heating_prob_per_round = 0.008;
  c.shots = 300;
  c.threads = 1;
  const auto a = run_repeated_readout(c);
  c.threads = 4;
  const auto b = run_repeated_readout(c);
  REQUIRE(a.records.size() == b.records.size());
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    CHECK(a.records[i].seed == b.records[i].seed);
    CHECK(a.records[i].events == b.records[i].events);
    for (std::size_t k = 0; k < a.records[i].rounds.size(); ++k)
      CHECK(a.records[i].rounds[k].signal == b.records[i].rounds[k].signal);
  }
}

TEST_CASE("ancilla imaging loss does not reach the data atom") {
  auto c = ideal_readout();
  c.imaging.bright_loss_prob = 0.5;
  c.shots = 2000;
  c.include_absent = false;
  const auto r = run_repeated_readout(c);
  std::vector<double> bright(4, 0.0);
  for (const auto& rec : r.records)
    for (std::size_t k = 0; k < 4; ++k) bright[k] += rec.rounds[k].bright ? 1.0 / 2000 : 0.0;
  for (double b : bright) CHECK(b == doctest::Approx(1.0));
}

TEST_CASE("cooling circuit removes one quantum and flags the ground state on the ancilla") {
  const int n_max = 6;
  const double eta = 0.36;
  const auto rsb = ideal_pi_pulse(PulseKind::RedSideband, 0.0, eta, n_max);
  const auto basis = rotation_op(0.0, pi / 2, 2);
  for (int n : {0, 1, 3}) {
    Rng rng(1);
    GateContext ctx(GateErrorSpec::ideal(), rng);
    Register reg({prepare_fock(ElectronicLevel::Down, n, n_max), prepare_fock(ElectronicLevel::Down, 0, 2)});
    cooling_circuit(reg, rsb, ctx);
    CHECK(reg.electronic_population(0, ElectronicLevel::Up) == doctest::Approx(1.0));
    CHECK(reg.motional_distribution(0)[std::max(n - 1, 0)] == doctest::Approx(1.0));
    reg.apply(1, basis);
    CHECK(reg.electronic_population(1, ElectronicLevel::Down) == doctest::Approx(n == 0 ? 1.0 : 0.0));
  }
}

TEST_CASE("ideal algorithmic cooling matches one-quantum removal") {
  CoolingConfig c;
  c.shots = 4000;
  c.initial_ground_fractions = {0.5};
  c.drive.n_max = 30;
  const auto r = run_algorithmic_cooling(c);
  const auto& s = r.summaries.at(0);
  CHECK(s.ideal_ground_fraction == doctest::Approx(0.75).epsilon(1e-6));
  CHECK(std::abs(s.ground_fraction - 0.75) < 4 * s.ground_stderr);
  CHECK(s.wrong_state_fraction == 0.0);
  CHECK(s.ancilla_correlation == doctest::Approx(1.0));
  CHECK(s.lost_fraction == 0.0);
}

TEST_CASE("sideband spectrum of the motional ground state") {
  SpectrumConfig c;
  c.detuning_hz = {-35e3, 0.0, 35e3};
  const std::vector<double> ground{1.0, 0.0, 0.0, 0.0};
  const auto s = simulate_sideband_spectrum(ground, c);
  // Only the far tail of the blue line reaches the red resonance.
  const double omega01 = sideband_rabi(0, 1, c.eta, c.rabi);
  const double tail = detuned_rabi_transfer(omega01, constants::two_pi * 70e3, s.duration);
  CHECK(s.points[0].p_exc == doctest::Approx(tail).epsilon(1e-9));
  CHECK(s.points[2].p_exc == doctest::Approx(1.0).epsilon(1e-12));
  c.offset = 0.1;
  const auto o = simulate_sideband_spectrum(ground, c);
  CHECK(o.points[0].p_exc == doctest::Approx(0.1 + 0.9 * tail));
  CHECK(o.points[2].p_exc == doctest::Approx(1.0));

  c.shots_per_point = 500;
  const auto a = simulate_sideband_spectrum(ground, c);
  const auto b = simulate_sideband_spectrum(ground, c);
  for (std::size_t i = 0; i < a.points.size(); ++i) {
    CHECK(a.points[i].p_exc == b.points[i].p_exc);
    CHECK(a.points[i].shots == 500);
  }
  const std::vector<double> edge{0.5, 0.5};
  CHECK_THROWS_AS(simulate_sideband_spectrum(edge, c), TruncationError);
}

TEST_CASE("thermal reading of a one-quantum-removed state overestimates the ground fraction") {
  const double eta = 0.36, rabi = constants::two_pi * 2e3;
  const double T = pi / std::abs(sideband_rabi(0, 1, eta, rabi));
  const double t12 = detuned_rabi_transfer(sideband_rabi(1, 2, eta, rabi), 0.0, T);
  for (double q : {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7}) {
    const auto d = remove_one_quantum(thermal_distribution(ThermalSpec{q / (1 - q), 80}));
    const double red = sideband_excitation(d, PulseKind::RedSideband, 0.0, T, eta, rabi);
    const double blue = sideband_excitation(d, PulseKind::BlueSideband, 0.0, T, eta, rabi);
    const double r = red / blue;
    const double excess = (1.0 - r) - d[0];
    CHECK(d[0] == doctest::Approx(1 - q * q).epsilon(1e-9));
    CHECK(excess > 0.0);
    CHECK(excess <= nonthermal_correction(r, t12) + r * r);
  }
}

TEST_CASE("phase calibration fringes of present and absent data are in antiphase") {
  PhaseCalibrationConfig c;
  for (int k = 0; k < 12; ++k) c.phases.push_back(2 * pi * k / 12);
  c.gates.cz_single_atom_phase = 0.7;
  const auto rows = calibrate_phase(c);
  REQUIRE(rows.size() == 24);
  for (std::size_t j = 0; j < rows.size(); j += 2) {
    CHECK(rows[j].ancilla_down + rows[j + 1].ancilla_down == doctest::Approx(1.0));
    CHECK(rows[j].data_up == doctest::Approx(1.0));
    CHECK(std::isnan(rows[j + 1].data_up));
  }
  const auto at = calibrate_phase(PhaseCalibrationConfig{{pi + 0.7}, c.gates, std::nullopt});
  CHECK(at[0].ancilla_down == doctest::Approx(1.0));
  CHECK(at[1].ancilla_down == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("loss detection keeps the data coherence") {
  LossDetectionConfig c;
  c.shots = 1600;
  c.gates = GateErrorSpec::ideal();
  c.include_absent = false;
  c.analyzer_phases.clear();
  for (int k = 0; k < 8; ++k) c.analyzer_phases.push_back(2 * pi * k / 8);
  for (bool reference : {true, false}) {
    c.reference = reference;
    const auto r = run_loss_detection(c);
    std::vector<double> ph, p, se;
    for (const auto& f : r.fringe) {
      ph.push_back(f.phase);
      p.push_back(f.p_up);
      se.push_back(std::max(f.std_error, 0.01));
    }
    const auto fit = fit_sinusoid(ph, p, se);
    CHECK(fit.amplitude > 0.45);
    CHECK(r.mean_shelving_transfer == doctest::Approx(1.0).epsilon(1e-9));
    for (const auto& rec : r.records) CHECK(rec.data_label != "lost");
  }
}

TEST_CASE("invalid protocol configurations are rejected") {
  CoolingConfig c;
  c.initial_ground_fractions = {1.5};
  CHECK_THROWS_AS(run_algorithmic_cooling(c), ConfigError);
  ReadoutConfig r;
  r.rounds = 0;
  CHECK_THROWS_AS(run_repeated_readout(r), ConfigError);
  SpectrumConfig s;
  CHECK_THROWS_AS(simulate_sideband_spectrum(std::vector<double>{0.5, 0.2}, s), ConfigError);
}

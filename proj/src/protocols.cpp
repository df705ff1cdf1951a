#include "tweezersim/protocols.hpp"

#include <cmath>
#include <random>

#include "tweezersim/errors.hpp"

namespace tweezersim {

using constants::pi;
using constants::two_pi;

const char* to_string(Scenario s) { return s == Scenario::Present ? "present" : "absent"; }

CzOutcome apply_cnot(Register& reg, std::size_t data, std::size_t ancilla, const CnotPhases& phases, GateContext& ctx,
                     bool entangle) {
  const double theta = ctx.spec().cz_single_atom_phase;
  apply_local_z(reg, data, phases.local_z.value_or(-theta));
  apply_rotation(reg, ancilla, 0.0, pi / 2, ctx);
  CzOutcome out = CzOutcome::Ideal;
  if (entangle) out = apply_cz(reg, data, ancilla, ctx);
  apply_rotation(reg, ancilla, phases.compensation_phase.value_or(pi + theta), pi / 2, ctx);
  return out;
}

namespace {

void check_probability(double p, const char* key) {
  if (!(p >= 0.0 && p <= 1.0)) throw ConfigError(key, "probability must lie in [0, 1]");
}

HybridAtomState absent_atom(int n_max) {
  auto s = prepare_fock(ElectronicLevel::Up, 0, n_max);
  s.set_lost(true);
  return s;
}

std::string level_label(ElectronicLevel l) { return l == ElectronicLevel::Down ? "down" : "up"; }

void finish_data(Register& reg, std::size_t atom, Rng& rng, ShotRecord& rec) {
  rec.data_lost = reg.lost(atom);
  if (rec.data_lost) {
    rec.data_label = "lost";
    return;
  }
  rec.data_label = level_label(reg.measure_electronic(atom, rng));
  rec.data_n = reg.measure_motional(atom, rng);
}

void finish_ancilla(Register& reg, std::size_t atom, Rng& rng, ShotRecord& rec) {
  rec.ancilla_lost = reg.lost(atom);
  rec.ancilla_label = rec.ancilla_lost ? "lost" : level_label(reg.measure_electronic(atom, rng));
}

}  // namespace

void validate(const ReadoutConfig& c) {
  if (c.shots < 1) throw ConfigError("protocol.shots", "must be >= 1");
  if (c.rounds < 1) throw ConfigError("protocol.rounds", "must be >= 1");
  validate(c.gates);
  validate(c.imaging);
  check_probability(c.heating_prob_per_round, "protocol.heating_prob_per_round");
  check_probability(c.ancilla_absent_prob, "protocol.ancilla_absent_prob");
  thermal_distribution(c.data_motion);
  thermal_distribution(c.ancilla_motion);
}

ReadoutResult run_repeated_readout(const ReadoutConfig& c) {
  validate(c);
  std::vector<Scenario> scenarios{Scenario::Present};
  if (c.include_absent) scenarios.push_back(Scenario::Absent);
  const std::size_t total = c.shots * scenarios.size();
  ReadoutResult result;
  result.records = run_shots(total, c.threads, [&](std::size_t k) {
    const Scenario sc = scenarios[k / c.shots];
    ShotRecord rec;
    rec.shot = k % c.shots;
    rec.scenario = sc;
    rec.seed = shot_seed(c.seed, rec.shot, sc);
    Rng rng(rec.seed);
    GateContext ctx(c.gates, rng);

    auto fresh_ancilla = [&] {
      if (c.ancilla_absent_prob > 0.0 && uniform01(rng) < c.ancilla_absent_prob) {
        ctx.record("ancilla_absent");
        return absent_atom(c.ancilla_motion.n_max);
      }
      return sample_thermal(ElectronicLevel::Up, c.ancilla_motion, rng);
    };

    HybridAtomState data = absent_atom(c.data_motion.n_max);
    if (sc == Scenario::Present) {
      data = sample_thermal(ElectronicLevel::Up, c.data_motion, rng);
      const auto d = data.motional_distribution();
      for (std::size_t n = 0; n < d.size(); ++n)
        if (d[n] > 0.5) rec.data_initial_n = static_cast<int>(n);
    }
    Register reg({data, fresh_ancilla()});
    for (int r = 0; r < c.rounds; ++r) {
      if (r > 0) reg.replace(1, fresh_ancilla(), rng);
      apply_cnot(reg, 0, 1, c.cnot, ctx);
      const auto img = image(reg, 1, c.imaging, rng);
      rec.rounds.push_back({img.signal, img.bright});
      if (expose(reg, 0, c.imaging, rng)) ctx.record("data_lost_imaging");
      if (c.heating_prob_per_round > 0.0 && !reg.lost(0) && uniform01(rng) < c.heating_prob_per_round) {
        reg.apply_raising(0);
        ctx.record("heating_kick");
      }
    }
    finish_data(reg, 0, rng, rec);
    finish_ancilla(reg, 1, rng, rec);
    rec.events = ctx.events();
    return rec;
  });
  return result;
}

void validate(const SidebandDrive& d) {
  if (!(d.rabi > 0.0) || !std::isfinite(d.rabi)) throw ConfigError("pulses.rabi_hz", "must be positive");
  if (!(d.trap.eta > 0.0)) throw ConfigError("trap.eta", "must be positive");
  if (d.dt && !(*d.dt > 0.0)) throw ConfigError("pulses.dt_s", "must be positive");
  if (d.n_max < 2) throw ConfigError("n_max", "must be >= 2");
  for (auto c : kNoiseChannels)
    if (const auto* sd = std::get_if<SpectralDensity>(&d.noise[c])) validate(*sd);
}

void validate(const LossDetectionConfig& c) {
  if (c.shots < 1) throw ConfigError("protocol.shots", "must be >= 1");
  validate(c.gates);
  validate(c.imaging);
  validate(c.shelving);
  if (std::abs(std::norm(c.c_down) + std::norm(c.c_up) - 1.0) > 1e-10)
    throw ConfigError("protocol.data_state", "electronic superposition is not normalized");
  if (c.analyzer_phases.empty()) throw ConfigError("protocol.analyzer_phases", "grid is empty");
  if (c.target_shelving_fidelity && !(*c.target_shelving_fidelity > 0.0 && *c.target_shelving_fidelity <= 1.0))
    throw ConfigError("protocol.target_shelving_fidelity", "must lie in (0, 1]");
}

LossDetectionResult run_loss_detection(const LossDetectionConfig& c) {
  validate(c);
  LossDetectionResult result;
  const auto& drive = c.shelving;
  const PulseKind kind = PulseKind::BlueSideband;
  const double omega01 = std::abs(lowest_pair_rabi(kind, drive.trap.eta, drive.rabi, drive.mode));
  const PulseSpec pulse{kind, drive.rabi, 0.0, 0.0, pi / omega01};
  const double dt = drive.dt.value_or(default_dt(pulse, drive.trap, drive.mode));

  // Perturbative budget of the shelving pulse. In ladder mode the lowest
  // pair sees eta e^{-eta^2/2} in place of eta.
  const double eta_eff =
      drive.mode == EvolutionMode::TwoLevel ? drive.trap.eta : omega01 / drive.rabi;
  result.shelving_budget = infidelity_budget(drive.noise, eta_eff, drive.rabi, pulse.duration);
  NoiseModel noise = drive.noise;
  if (c.target_shelving_fidelity) {
    const double want = 1.0 - *c.target_shelving_fidelity;
    if (want > 0.0) {
      if (!(result.shelving_budget.total > 0.0))
        throw ConfigError("protocol.target_shelving_fidelity", "needs a noise model with nonzero infidelity");
      result.noise_scale = std::sqrt(want / result.shelving_budget.total);
    } else {
      result.noise_scale = 0.0;
    }
    noise = noise.scaled(result.noise_scale);
  }
  const bool noisy = !noise.empty();

  std::vector<Scenario> scenarios{Scenario::Present};
  if (c.include_absent) scenarios.push_back(Scenario::Absent);
  const std::size_t total = c.shots * scenarios.size();
  const int n_max = drive.n_max;
  const auto ideal_prop = noisy ? LocalOp() : propagator(pulse, drive.trap, noiseless(pulse.duration, dt), n_max, drive.mode);

  result.records = run_shots(total, c.threads, [&](std::size_t k) {
    const Scenario sc = scenarios[k / c.shots];
    ShotRecord rec;
    rec.shot = k % c.shots;
    rec.scenario = sc;
    rec.seed = shot_seed(c.seed, rec.shot, sc);
    rec.phase = c.analyzer_phases[rec.shot % c.analyzer_phases.size()];
    Rng rng(rec.seed);
    GateContext ctx(c.gates, rng);
    const std::uint64_t static_seed = derive_seed(rec.seed, {0x5747ULL});

    auto shelving_op = [&](std::uint64_t which) {
      if (!noisy) return ideal_prop;
      const auto realization = sample_noise(noise, pulse.duration, dt, derive_seed(rec.seed, {which}), static_seed);
      return propagator(pulse, drive.trap, realization, n_max, drive.mode);
    };

    HybridAtomState data =
        sc == Scenario::Present ? prepare_superposition(c.c_down, c.c_up, 0, n_max) : absent_atom(n_max);
    if (sc == Scenario::Present) rec.data_initial_n = 0;
    Register reg({data, prepare_fock(ElectronicLevel::Up, 0, 2)});

    if (!reg.lost(0)) {
      const auto u = shelving_op(1);
      check_truncation(reg.local_populations(0), n_max, kind, drive.mode);
      auto probe = prepare_fock(ElectronicLevel::Down, 0, n_max);
      u.apply(probe.amplitudes());
      rec.shelving_transfer = probe.population(ElectronicLevel::Up, 1);
      reg.apply(0, u);
    }
    apply_cnot(reg, 0, 1, c.cnot, ctx, !c.reference);
    if (!c.reference) {
      const auto img = image(reg, 1, c.imaging, rng);
      rec.rounds.push_back({img.signal, img.bright});
      if (expose(reg, 0, c.imaging, rng)) ctx.record("data_lost_imaging");
    }
    if (!reg.lost(0)) {
      const auto u = shelving_op(2);
      check_truncation(reg.local_populations(0), n_max, kind, drive.mode);
      reg.apply(0, u);
    }
    apply_rotation(reg, 0, rec.phase, pi / 2, ctx);
    finish_data(reg, 0, rng, rec);
    finish_ancilla(reg, 1, rng, rec);
    rec.events = ctx.events();
    return rec;
  });

  const std::size_t g = c.analyzer_phases.size();
  std::vector<std::size_t> ups(g, 0), counts(g, 0);
  double transfer = 0.0;
  std::size_t transfer_n = 0;
  for (const auto& r : result.records) {
    if (r.scenario != Scenario::Present) continue;
    const std::size_t j = r.shot % g;
    ++counts[j];
    if (r.data_label == "up") ++ups[j];
    if (!std::isnan(r.shelving_transfer)) {
      transfer += r.shelving_transfer;
      ++transfer_n;
    }
  }
  result.mean_shelving_transfer = transfer_n ? transfer / static_cast<double>(transfer_n) : kNaN;
  for (std::size_t j = 0; j < g; ++j) {
    FringePoint fp;
    fp.phase = c.analyzer_phases[j];
    fp.shots = counts[j];
    fp.p_up = counts[j] ? static_cast<double>(ups[j]) / static_cast<double>(counts[j]) : 0.0;
    fp.std_error = counts[j] ? std::sqrt(fp.p_up * (1.0 - fp.p_up) / static_cast<double>(counts[j])) : 0.0;
    result.fringe.push_back(fp);
  }
  return result;
}

void validate(const CoolingConfig& c) {
  if (c.shots < 1) throw ConfigError("protocol.shots", "must be >= 1");
  if (c.initial_ground_fractions.empty()) throw ConfigError("protocol.initial_ground_fractions", "list is empty");
  for (double p0 : c.initial_ground_fractions)
    if (!(p0 > 0.0 && p0 <= 1.0)) throw ConfigError("protocol.initial_ground_fractions", "values must lie in (0, 1]");
  validate(c.gates);
  validate(c.drive);
  thermal_distribution(c.ancilla_motion);
}

void cooling_circuit(Register& reg, const LocalOp& rsb, GateContext& ctx) {
  reg.apply(0, rsb);
  apply_rotation(reg, 1, 0.0, pi / 2, ctx);
  apply_cz(reg, 0, 1, ctx);
  apply_rotation(reg, 0, 0.0, -pi / 2, ctx);
  apply_rotation(reg, 1, 0.0, -pi / 2, ctx);
  apply_cz(reg, 0, 1, ctx);
  apply_rotation(reg, 0, 0.0, -pi / 2, ctx);
  apply_rotation(reg, 1, 0.0, -pi / 2, ctx);
}

CoolingResult run_algorithmic_cooling(const CoolingConfig& c) {
  validate(c);
  CoolingResult result;
  const auto& drive = c.drive;
  const int n_max = drive.n_max;
  const PulseKind kind = PulseKind::RedSideband;
  const double omega10 = std::abs(lowest_pair_rabi(kind, drive.trap.eta, drive.rabi, drive.mode));
  const PulseSpec pulse{kind, drive.rabi, 0.0, 0.0, pi / omega10};
  const double dt = drive.dt.value_or(default_dt(pulse, drive.trap, drive.mode));
  const LocalOp ideal = ideal_pi_pulse(kind, 0.0, drive.trap.eta, n_max);
  const auto basis_change = rotation_op(0.0, pi / 2, c.ancilla_motion.n_max);

  for (std::size_t j = 0; j < c.initial_ground_fractions.size(); ++j) {
    const double p0 = c.initial_ground_fractions[j];
    const ThermalSpec spec = ThermalSpec::from_ground_fraction(p0, n_max);
    auto records = run_shots(c.shots, c.threads, [&](std::size_t i) {
      ShotRecord rec;
      rec.shot = i;
      rec.seed = derive_seed(c.seed, {static_cast<std::uint64_t>(i), 0, static_cast<std::uint64_t>(j)});
      Rng rng(rec.seed);
      GateContext ctx(c.gates, rng);
      const auto data = sample_thermal(ElectronicLevel::Down, spec, rng);
      const auto d = data.motional_distribution();
      for (std::size_t n = 0; n < d.size(); ++n)
        if (d[n] > 0.5) rec.data_initial_n = static_cast<int>(n);
      Register reg({data, sample_thermal(ElectronicLevel::Down, c.ancilla_motion, rng)});
      if (c.rsb == RsbModel::Ideal) {
        cooling_circuit(reg, ideal, ctx);
      } else {
        const auto noise = sample_noise(drive.noise, pulse.duration, dt, derive_seed(rec.seed, {1}));
        check_truncation(reg.local_populations(0), n_max, kind, drive.mode);
        cooling_circuit(reg, propagator(pulse, drive.trap, noise, n_max, drive.mode), ctx);
      }
      finish_data(reg, 0, rng, rec);
      rec.ancilla_lost = reg.lost(1);
      if (rec.ancilla_lost) {
        rec.ancilla_label = "lost";
      } else {
        reg.apply(1, basis_change);
        rec.ancilla_label = reg.measure_electronic(1, rng) == ElectronicLevel::Down ? "plus" : "minus";
      }
      rec.events = ctx.events();
      return rec;
    });

    CoolingSummary s;
    s.initial_ground_fraction = p0;
    s.initial_nbar = spec.nbar;
    s.shots = records.size();
    s.ideal_ground_fraction = remove_one_quantum(thermal_distribution(spec))[0];
    s.up_motional_distribution.assign(static_cast<std::size_t>(n_max + 1), 0.0);
    std::size_t ground = 0, up = 0, down = 0, lost = 0, plus = 0, agree = 0;
    for (const auto& r : records) {
      if (r.data_label == "lost") ++lost;
      if (r.data_label == "down") ++down;
      if (r.data_label == "up") {
        ++up;
        s.up_motional_distribution[static_cast<std::size_t>(r.data_n)] += 1.0;
        if (r.data_n == 0) ++ground;
      }
      if (r.ancilla_label == "plus") ++plus;
      if ((r.ancilla_label == "plus") == (r.data_initial_n == 0) && r.ancilla_label != "lost") ++agree;
    }
    const auto n = static_cast<double>(s.shots);
    s.ground_fraction = ground / n;
    s.ground_stderr = std::sqrt(s.ground_fraction * (1.0 - s.ground_fraction) / n);
    s.conditional_ground_fraction = up ? static_cast<double>(ground) / static_cast<double>(up) : 0.0;
    s.wrong_state_fraction = down / n;
    s.lost_fraction = lost / n;
    s.ancilla_plus_fraction = plus / n;
    s.ancilla_correlation = agree / n;
    if (up)
      for (auto& v : s.up_motional_distribution) v /= static_cast<double>(up);
    result.summaries.push_back(std::move(s));
    result.records.push_back(std::move(records));
  }
  return result;
}

const char* to_string(SpectrumSide s) {
  switch (s) {
    case SpectrumSide::Red: return "red";
    case SpectrumSide::Blue: return "blue";
    case SpectrumSide::Both: return "both";
  }
  return "?";
}

SpectrumSide spectrum_side_from_string(const std::string& s) {
  if (s == "red" || s == "rsb") return SpectrumSide::Red;
  if (s == "blue" || s == "bsb") return SpectrumSide::Blue;
  if (s == "both") return SpectrumSide::Both;
  throw ConfigError("spectrum.side", "expected red, blue or both, got '" + s + "'");
}

void validate(const SpectrumConfig& c) {
  if (c.detuning_hz.empty()) throw ConfigError("spectrum.detunings_hz", "grid is empty");
  if (!(c.rabi > 0.0)) throw ConfigError("pulses.rabi_hz", "must be positive");
  if (!(c.eta > 0.0)) throw ConfigError("trap.eta", "must be positive");
  if (c.duration && !(*c.duration > 0.0)) throw ConfigError("spectrum.duration_s", "must be positive");
  check_probability(c.offset, "spectrum.offset");
}

double sideband_excitation(std::span<const double> dist, PulseKind kind, double detuning_hz, double duration,
                           double eta, double rabi) {
  const int s = sideband_order(kind);
  double p = 0.0;
  for (std::size_t n = 0; n < dist.size(); ++n) {
    const int to = static_cast<int>(n) + s;
    if (to < 0 || dist[n] == 0.0) continue;
    const double omega = sideband_rabi(static_cast<int>(n), to, eta, rabi);
    p += dist[n] * detuned_rabi_transfer(omega, two_pi * detuning_hz, duration);
  }
  return p;
}

SidebandSpectrum simulate_sideband_spectrum(std::span<const double> dist, const SpectrumConfig& c) {
  validate(c);
  validate_probability_vector(dist, 1e-8);
  const int n_max = static_cast<int>(dist.size()) - 1;
  if ((c.side != SpectrumSide::Red) && dist.back() > kTruncationThreshold)
    throw TruncationError("population " + std::to_string(dist.back()) + " at n_max = " + std::to_string(n_max) +
                          " would couple above the basis on the blue sideband");
  SidebandSpectrum out;
  out.side = c.side;
  out.rabi = c.rabi;
  out.eta = c.eta;
  out.trap_frequency_hz = c.trap_frequency_hz;
  out.duration = c.duration.value_or(pi / std::abs(sideband_rabi(0, 1, c.eta, c.rabi)));
  for (std::size_t i = 0; i < c.detuning_hz.size(); ++i) {
    const double x = c.detuning_hz[i];
    double p = 0.0;
    switch (c.side) {
      case SpectrumSide::Blue:
        p = sideband_excitation(dist, PulseKind::BlueSideband, x, out.duration, c.eta, c.rabi);
        break;
      case SpectrumSide::Red:
        p = sideband_excitation(dist, PulseKind::RedSideband, x, out.duration, c.eta, c.rabi);
        break;
      case SpectrumSide::Both:
        p = sideband_excitation(dist, PulseKind::BlueSideband, x - c.trap_frequency_hz, out.duration, c.eta, c.rabi) +
            sideband_excitation(dist, PulseKind::RedSideband, x + c.trap_frequency_hz, out.duration, c.eta, c.rabi);
        break;
    }
    p = std::clamp(c.offset + (1.0 - c.offset) * p, 0.0, 1.0);
    SpectrumPoint pt;
    pt.detuning_hz = x;
    pt.shots = c.shots_per_point;
    if (c.shots_per_point == 0) {
      pt.p_exc = p;
    } else {
      Rng rng(derive_seed(c.seed, {static_cast<std::uint64_t>(i)}));
      std::binomial_distribution<std::size_t> bin(c.shots_per_point, p);
      const auto n = static_cast<double>(c.shots_per_point);
      pt.p_exc = static_cast<double>(bin(rng)) / n;
      pt.std_error = std::sqrt(pt.p_exc * (1.0 - pt.p_exc) / n);
    }
    out.points.push_back(pt);
  }
  return out;
}

std::vector<PhaseCalibrationRow> calibrate_phase(const PhaseCalibrationConfig& c) {
  if (c.phases.empty()) throw ConfigError("protocol.phases", "grid is empty");
  validate(c.gates);
  GateErrorSpec gates = c.gates;
  if (c.shots == 0) {
    gates.cz_phase_error_prob = 0.0;
    gates.cz_loss_prob = 0.0;
    gates.sq_over_rotation_sigma = 0.0;
  }
  const std::size_t shots = std::max<std::size_t>(c.shots, 1);
  std::vector<PhaseCalibrationRow> rows;
  for (std::size_t j = 0; j < c.phases.size(); ++j) {
    for (Scenario sc : {Scenario::Present, Scenario::Absent}) {
      const auto samples = run_shots(shots, c.threads, [&](std::size_t i) {
        Rng rng(derive_seed(c.seed, {static_cast<std::uint64_t>(i), static_cast<std::uint64_t>(sc),
                                     static_cast<std::uint64_t>(j)}));
        GateContext ctx(gates, rng);
        Register reg({sc == Scenario::Present ? prepare_fock(ElectronicLevel::Up, 0, c.n_max) : absent_atom(c.n_max),
                      prepare_fock(ElectronicLevel::Up, 0, 2)});
        apply_cnot(reg, 0, 1, CnotPhases{c.local_z, c.phases[j]}, ctx);
        const double anc = reg.lost(1) ? 0.0 : reg.electronic_population(1, ElectronicLevel::Down);
        const double dat = reg.lost(0) ? 0.0 : reg.electronic_population(0, ElectronicLevel::Up);
        return std::pair<double, double>{anc, dat};
      });
      PhaseCalibrationRow row;
      row.phase = c.phases[j];
      row.scenario = sc;
      for (const auto& [a, d] : samples) {
        row.ancilla_down += a;
        row.data_up += d;
      }
      row.ancilla_down /= static_cast<double>(shots);
      row.data_up = sc == Scenario::Present ? row.data_up / static_cast<double>(shots) : kNaN;
      rows.push_back(row);
    }
  }
  return rows;
}

}  // namespace tweezersim

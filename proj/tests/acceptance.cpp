// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "tweezersim/analysis.hpp"
#include "tweezersim/dynamics.hpp"
#include "tweezersim/protocols.hpp"
#include "tweezersim/report.hpp"
#include "tweezersim/response.hpp"

using namespace tweezersim;
using constants::pi;
using constants::two_pi;

namespace {

constexpr double kEta = 0.36;
const double kRabi = two_pi * 2e3;
const double kTrapHz = 35e3;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

unsigned worker_count() { return std::max(1u, std::thread::hardware_concurrency()); }

Outcome c1_response() {
  const auto t0 = std::chrono::steady_clock::now();
  double worst = 0.0;
  for (auto ch : {NoiseChannel::TrapFrequency, NoiseChannel::LaserFrequency}) {
    ResponseQuery q;
    q.eta = kEta;
    q.rabi = kRabi;
    q.channel = ch;
    for (int k = 0; k < 50; ++k) q.frequency_hz.push_back(10.0 * std::pow(1000.0, k / 49.0));
    const auto closed = response_closed_form(q);
    const auto num = response_numeric(q);
    for (std::size_t i = 0; i < q.frequency_hz.size(); ++i)
      worst = std::max(worst, std::abs(num.values[i] - closed.values[i]) / closed.values[i]);
  }
  const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return {worst < 1e-6 && s < 10.0, fmt("max relative deviation %.3g (limit 1e-6), %.2f s (limit 10 s)", worst, s)};
}

Outcome c2_quasi_static() {
  const auto t0 = std::chrono::steady_clock::now();
  NoiseModel m;
  m[NoiseChannel::TrapFrequency] = QuasiStatic{0.005 * two_pi * kTrapHz};
  const double chi = infidelity_budget(m, kEta, kRabi).total;
  const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return {chi >= 4.8e-2 && chi <= 6.4e-2 && s < 1.0, fmt("chi = %.5f (window [0.048, 0.064]), %.3f s", chi, s)};
}

Outcome c3_trajectories() {
  const auto t0 = std::chrono::steady_clock::now();
  // White laser-frequency PSD on a grid that starts one bin above zero.
  const double df = 20.0, fmax = 8e3;
  SpectralDensity psd;
  for (double f = df; f <= fmax + 1e-9; f += df) {
    psd.frequency_hz.push_back(f);
    psd.psd.push_back(1.0);
  }
  NoiseModel unit;
  unit[NoiseChannel::LaserFrequency] = psd;
  const double chi1 = infidelity_budget(unit, kEta, kRabi).total;
  for (auto& v : psd.psd) v = 0.02 / chi1;
  NoiseModel model;
  model[NoiseChannel::LaserFrequency] = psd;
  const double chi = infidelity_budget(model, kEta, kRabi).total;

  const TrapSpec trap = TrapSpec::from_eta(kEta, two_pi * kTrapHz);
  const double T = pi / (kEta * kRabi);
  const PulseSpec pulse{PulseKind::BlueSideband, kRabi, 0.0, 0.0, T};
  const double dt = default_dt(pulse, trap, EvolutionMode::TwoLevel);
  const std::size_t n = 2000;
  const auto infid = run_shots(n, worker_count(), [&](std::size_t i) {
    const auto noise = sample_noise(model, T, dt, derive_seed(2024, {i}));
    const auto s = evolve(prepare_fock(ElectronicLevel::Down, 0, 2), pulse, trap, noise, EvolutionMode::TwoLevel);
    return 1.0 - s.population(ElectronicLevel::Up, 1);
  });
  double mean = 0.0, var = 0.0;
  for (double v : infid) mean += v / double(n);
  for (double v : infid) var += (v - mean) * (v - mean) / double(n - 1);
  const double se = std::sqrt(var / double(n));
  const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const double z = (mean - chi) / se;
  return {std::abs(z) < 3.0 && s < 300.0,
          fmt("perturbative %.5f, trajectories %.5f +- %.5f (z = %.2f), %.1f s", chi, mean, se, z, s)};
}

Outcome c4_laguerre() {
  const double T = pi / std::abs(sideband_rabi(0, 1, kEta, kRabi));
  const double t01 = detuned_rabi_transfer(sideband_rabi(0, 1, kEta, kRabi), 0.0, T);
  const double t12 = detuned_rabi_transfer(sideband_rabi(1, 2, kEta, kRabi), 0.0, T);
  const double v = 1.0 - t12;
  return {std::abs(v - 0.236) <= 0.01 && std::abs(t01 - 1.0) < 1e-12, fmt("1 - t12 = %.4f (t01 = %.12f)", v, t01)};
}

Outcome c5_cooling() {
  const auto t0 = std::chrono::steady_clock::now();
  CoolingConfig c;
  c.shots = 10000;
  c.seed = 5;
  c.threads = worker_count();
  c.drive.n_max = 40;
  const auto r = run_algorithmic_cooling(c);
  const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const std::vector<double> expected{0.51, 0.75, 0.91, 0.99};
  bool ok = s < 120.0;
  std::string d;
  for (std::size_t i = 0; i < expected.size(); ++i) {
    const auto& sm = r.summaries[i];
    const double sigma = std::sqrt(expected[i] * (1 - expected[i]) / double(sm.shots));
    const double z = (sm.ground_fraction - expected[i]) / sigma;
    // The ideal column differs from 1 - q^2 only by the weight beyond n_max.
    ok = ok && std::abs(z) <= 3.0 && std::abs(sm.ideal_ground_fraction - expected[i]) < 1e-6;
    d += fmt("p0=%.1f: %.4f (z=%+.2f) ", sm.initial_ground_fraction, sm.ground_fraction, z);
  }
  return {ok, d + fmt("%.1f s", s)};
}

Outcome c6_correction() {
  const double a = nonthermal_correction(0.08, 0.764), b = nonthermal_correction(0.24, 0.764);
  bool ok = std::abs(a - 0.005) <= 5e-4 && std::abs(b - 0.028) <= 5e-4;
  const double T = pi / std::abs(sideband_rabi(0, 1, kEta, kRabi));
  const double t12 = detuned_rabi_transfer(sideband_rabi(1, 2, kEta, kRabi), 0.0, T);
  double worst = -1e9;
  for (double q = 0.1; q <= 0.7001; q += 0.05) {
    const auto d = remove_one_quantum(thermal_distribution(ThermalSpec{q / (1 - q), 120}));
    const double r = sideband_excitation(d, PulseKind::RedSideband, 0.0, T, kEta, kRabi) /
                     sideband_excitation(d, PulseKind::BlueSideband, 0.0, T, kEta, kRabi);
    const double excess = (1.0 - r) - d[0];
    // Overestimate, bounded by the leading term plus an r^2 remainder.
    ok = ok && excess > 0.0 && excess <= nonthermal_correction(r, t12) + r * r;
    worst = std::max(worst, (excess - nonthermal_correction(r, t12)) / (r * r));
  }
  return {ok, fmt("c(0.08) = %.5f, c(0.24) = %.5f; ladder oracle max (excess - c)/r^2 = %.3f", a, b, worst)};
}

ImagingSpec calibrated_imaging(const GateErrorSpec& gates) {
  return calibrate_imaging(ImagingSpec{}, 0.90, cnot_flip_error(gates), 0.5);
}

Outcome c7_readout() {
  const auto t0 = std::chrono::steady_clock::now();
  ReadoutConfig c;
  c.shots = 100000;
  c.seed = 7;
  c.threads = worker_count();
  c.imaging = calibrated_imaging(c.gates);
  const auto r = run_repeated_readout(c);
  const auto table = detection_table(r.records, {0.5}, {1, 2, 3, 4});
  const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::string d;
  for (const auto& row : table) d += fmt("F(N=%d) = %.4f ", row.n_cyc, row.F);
  const bool ok = std::abs(table[0].F - 0.90) <= 0.005 && table[3].F >= 0.98 && table[3].F <= 0.995 && s < 300.0;
  return {ok, d + fmt("(bright mean %.4f), %.1f s", c.imaging.bright_mean, s)};
}

struct HistogramNumbers {
  double weight, weight_se, F, transfer;
};

HistogramNumbers loss_histogram(Complex c_down, Complex c_up) {
  LossDetectionConfig c;
  c.shots = 20000;
  c.seed = 8;
  c.threads = worker_count();
  c.imaging = calibrated_imaging(c.gates);
  c.shelving.noise[NoiseChannel::TrapFrequency] = QuasiStatic{0.005 * two_pi * kTrapHz};
  c.target_shelving_fidelity = 0.92;
  c.c_down = c_down;
  c.c_up = c_up;
  const auto r = run_loss_detection(c);
  std::vector<double> present, absent;
  for (const auto& rec : r.records) (rec.scenario == Scenario::Present ? present : absent).push_back(rec.rounds[0].signal);
  const auto w = estimate_dark_weight(present, c.imaging);
  const auto det = optimize_threshold(present, absent, 0.5);
  return {w.weight, w.std_error, det.F, r.mean_shelving_transfer};
}

Outcome c8_loss_histogram() {
  const auto down = loss_histogram(Complex(1.0), Complex(0.0));
  const auto plus = loss_histogram(Complex(std::sqrt(0.5)), Complex(std::sqrt(0.5)));
  const bool ok = down.weight >= 0.06 && down.weight <= 0.10 && down.F >= 0.85 && down.F <= 0.91;
  return {ok, fmt("data |down>: sub-peak %.4f +- %.4f, F = %.4f, transfer %.4f; data |+>: sub-peak %.4f, F = %.4f",
                  down.weight, down.weight_se, down.F, down.transfer, plus.weight, plus.F)};
}

// Two Gaussians of equal width on a global offset, 1 kHz spacing, binomial
// counts at 900 shots per point.
std::vector<SpectrumPoint> synthetic_spectrum(double nbar, std::uint64_t seed) {
  const double blue = 0.95, mu = kTrapHz, width = 2e3, offset = 0.02;
  const std::size_t shots = 900;
  const double red = blue * ratio_from_nbar(nbar);
  Rng rng(seed);
  std::vector<SpectrumPoint> pts;
  for (int k = -45; k <= 45; ++k) {
    const double x = 1e3 * k;
    const double p = double_gaussian(x, blue, red, mu, width, offset);
    std::binomial_distribution<std::size_t> b(shots, p);
    SpectrumPoint s{x, double(b(rng)) / double(shots), 0.0, shots};
    s.std_error = std::sqrt(s.p_exc * (1 - s.p_exc) / double(shots));
    pts.push_back(s);
  }
  return pts;
}

Outcome c9_coverage() {
  bool ok = true;
  std::string d;
  const std::vector<double> temperatures{0.002, 0.05, 0.3};
  for (std::size_t k = 0; k < temperatures.size(); ++k) {
    const double nbar = temperatures[k];
    int covered = 0, asym = 0, clipped = 0;
    bool lower_ok = true;
    const int n = 300;
    for (int i = 0; i < n; ++i) {
      const auto pts = synthetic_spectrum(nbar, derive_seed(9, {k, std::uint64_t(i)}));
      const auto blue = fit_heating_sideband(pts);
      const auto prof = profile_likelihood_cooling_peak(pts, blue);
      const auto t = temperature_from_profile(prof, blue.height);
      if (t.nbar_lower <= nbar && nbar <= t.nbar_upper) ++covered;
      if (t.nbar_upper - t.nbar > t.nbar - t.nbar_lower) ++asym;
      if (t.one_sided) ++clipped;
      lower_ok = lower_ok && t.nbar_lower >= 0.0;
    }
    const double cov = covered / double(n);
    ok = ok && std::abs(cov - 0.68) <= 0.05;
    if (nbar == 0.002) ok = ok && lower_ok && asym > n / 2;
    d += fmt("nbar=%g: coverage %.3f, asymmetric %d/%d, clipped %d; ", nbar, cov, asym, n, clipped);
  }
  return {ok, d};
}

Outcome c10_determinism() {
  std::vector<std::string> csv;
  for (unsigned threads : {1u, 4u, 16u}) {
    std::ostringstream os;
    ReadoutConfig r;
    r.shots = 500;
    r.seed = 10;
    r.threads = threads;
    write_shot_csv(os, run_repeated_readout(r).records);
    LossDetectionConfig l;
    l.shots = 200;
    l.seed = 10;
    l.threads = threads;
    l.shelving.noise[NoiseChannel::LaserFrequency] = SpectralDensity::white(1e4, 4e3, 41);
    l.analyzer_phases = {0.0, pi / 2, pi};
    write_shot_csv(os, run_loss_detection(l).records);
    CoolingConfig c;
    c.shots = 300;
    c.seed = 10;
    c.threads = threads;
    c.gates = GateErrorSpec{};
    for (const auto& recs : run_algorithmic_cooling(c).records) write_shot_csv(os, recs);
    csv.push_back(os.str());
  }
  const bool ok = csv[0] == csv[1] && csv[0] == csv[2];
  return {ok, fmt("%zu bytes; 1 vs 4 threads %s, 1 vs 16 threads %s", csv[0].size(), csv[0] == csv[1] ? "equal" : "differ",
                  csv[0] == csv[2] ? "equal" : "differ")};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"1 response closed form vs quadrature", c1_response},
      {"2 quasi-static trap-noise infidelity", c2_quasi_static},
      {"3 perturbative vs trajectory infidelity", c3_trajectories},
      {"4 Laguerre transfer 1 - t12", c4_laguerre},
      {"5 ideal algorithmic cooling", c5_cooling},
      {"6 non-thermal correction", c6_correction},
      {"7 repeated-readout fidelity growth", c7_readout},
      {"8 loss-detection histogram", c8_loss_histogram},
      {"9 thermometry interval coverage", c9_coverage},
      {"10 determinism across worker counts", c10_determinism},
  };
  // Optional filter: run only criteria whose number is listed.
  std::vector<std::string> only(argv + 1, argv + argc);
  int failed = 0;
  for (const auto& [name, fn] : criteria) {
    const std::string id = name.substr(0, name.find(' '));
    if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failed;
    std::printf("%s [%s] %s\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d criteria failed\n", failed);
  return failed ? 1 : 0;
}

#include "tweezersim/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "tweezersim/errors.hpp"

namespace tweezersim {

using constants::pi;
using constants::two_pi;

const char* to_string(PulseKind kind) {
  switch (kind) {
    case PulseKind::Carrier: return "carrier";
    case PulseKind::RedSideband: return "red";
    case PulseKind::BlueSideband: return "blue";
    case PulseKind::Free: return "free";
  }
  return "?";
}

PulseKind pulse_kind_from_string(const std::string& s) {
  if (s == "carrier") return PulseKind::Carrier;
  if (s == "red" || s == "rsb") return PulseKind::RedSideband;
  if (s == "blue" || s == "bsb") return PulseKind::BlueSideband;
  if (s == "free") return PulseKind::Free;
  throw ConfigError("kind", "unknown pulse kind '" + s + "'");
}

int sideband_order(PulseKind kind) {
  switch (kind) {
    case PulseKind::BlueSideband: return 1;
    case PulseKind::RedSideband: return -1;
    default: return 0;
  }
}

void validate(const PulseSpec& p) {
  if (!(p.duration >= 0.0) || !std::isfinite(p.duration)) throw ConfigError("duration_s", "must be finite and >= 0");
  if (!(p.rabi >= 0.0) || !std::isfinite(p.rabi)) throw ConfigError("rabi", "must be finite and >= 0");
  if (!std::isfinite(p.detuning) || !std::isfinite(p.phase)) throw ConfigError("pulse", "non-finite detuning or phase");
}

const char* to_string(NoiseChannel c) {
  switch (c) {
    case NoiseChannel::TrapFrequency: return "trap_frequency";
    case NoiseChannel::LaserFrequency: return "laser_frequency";
    case NoiseChannel::LaserAmplitude: return "laser_amplitude";
  }
  return "?";
}

NoiseChannel noise_channel_from_string(const std::string& s) {
  if (s == "trap_frequency" || s == "trap") return NoiseChannel::TrapFrequency;
  if (s == "laser_frequency" || s == "laser") return NoiseChannel::LaserFrequency;
  if (s == "laser_amplitude" || s == "amplitude") return NoiseChannel::LaserAmplitude;
  throw ConfigError("channel", "unknown noise channel '" + s + "'");
}

// ---------------------------------------------------------------------------
// Noise models

namespace {

std::vector<double> trapezoid_weights(const std::vector<double>& f) {
  std::vector<double> w(f.size(), 0.0);
  for (std::size_t i = 0; i + 1 < f.size(); ++i) {
    const double h = 0.5 * (f[i + 1] - f[i]);
    w[i] += h;
    w[i + 1] += h;
  }
  return w;
}

}  // namespace

double SpectralDensity::variance() const {
  const auto w = trapezoid_weights(frequency_hz);
  double v = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) v += w[i] * psd[i];
  return v;
}

SpectralDensity SpectralDensity::white(double s0, double f_max, std::size_t points) {
  if (points < 2) throw ConfigError("points", "a tabulated PSD needs at least two points");
  SpectralDensity out;
  out.frequency_hz.resize(points);
  out.psd.assign(points, s0);
  for (std::size_t i = 0; i < points; ++i)
    out.frequency_hz[i] = f_max * static_cast<double>(i) / static_cast<double>(points - 1);
  return out;
}

void validate(const SpectralDensity& s) {
  if (s.frequency_hz.size() != s.psd.size() || s.frequency_hz.size() < 2)
    throw ConfigError("psd", "PSD table needs at least two (frequency, value) rows");
  for (std::size_t i = 0; i < s.psd.size(); ++i) {
    if (!(s.psd[i] >= 0.0) || !std::isfinite(s.psd[i])) throw ConfigError("psd", "PSD values must be finite and >= 0");
    if (!(s.frequency_hz[i] >= 0.0)) throw ConfigError("psd", "PSD frequencies must be >= 0");
    if (i > 0 && !(s.frequency_hz[i] > s.frequency_hz[i - 1]))
      throw ConfigError("psd", "PSD frequency grid must be strictly increasing");
  }
}

bool NoiseModel::empty() const {
  return std::all_of(channels.begin(), channels.end(),
                     [](const ChannelNoise& c) { return std::holds_alternative<std::monostate>(c); });
}

NoiseModel NoiseModel::scaled(double factor) const {
  NoiseModel out = *this;
  for (auto& c : out.channels) {
    if (auto* qs = std::get_if<QuasiStatic>(&c)) qs->sigma *= factor;
    if (auto* sd = std::get_if<SpectralDensity>(&c))
      for (auto& v : sd->psd) v *= factor * factor;
  }
  return out;
}

bool NoiseRealization::time_independent() const {
  for (const auto& s : series) {
    if (s.empty()) continue;
    for (double v : s)
      if (v != s.front()) return false;
  }
  return true;
}

namespace {

std::size_t step_count(double duration, double dt) {
  if (!(duration >= 0.0) || !std::isfinite(duration)) throw ConfigError("duration_s", "must be finite and >= 0");
  if (!(dt > 0.0) || !std::isfinite(dt)) throw ConfigError("dt_s", "time step must be positive");
  if (duration == 0.0) return 0;
  return static_cast<std::size_t>(std::max<long long>(1, std::llround(duration / dt)));
}

}  // namespace

NoiseRealization noiseless(double duration, double dt) {
  NoiseRealization r;
  r.steps = step_count(duration, dt);
  r.dt = r.steps > 0 ? duration / static_cast<double>(r.steps) : dt;
  return r;
}

NoiseRealization sample_noise(const NoiseModel& model, double duration, double dt, std::uint64_t seed,
                              std::optional<std::uint64_t> static_seed) {
  NoiseRealization r = noiseless(duration, dt);
  r.seed = seed;
  r.static_seed = static_seed.value_or(seed);

  for (auto c : kNoiseChannels) {
    const auto ci = static_cast<std::size_t>(c);
    const ChannelNoise& ch = model[c];
    auto& out = r.series[ci];
    if (const auto* qs = std::get_if<QuasiStatic>(&ch)) {
      if (!(qs->sigma >= 0.0)) throw ConfigError(std::string("noise.") + to_string(c), "sigma must be >= 0");
      Rng rng(derive_seed(r.static_seed, {0x51A7ULL, ci}));
      const double v = qs->sigma > 0.0 ? normal(rng, 0.0, qs->sigma) : 0.0;
      out.assign(r.steps, v);
    } else if (const auto* sd = std::get_if<SpectralDensity>(&ch)) {
      validate(*sd);
      if (dt > 1.0 / (20.0 * sd->max_frequency()))
        throw ConfigError("dt_s", "time step too coarse for PSD support up to " +
                                      std::to_string(sd->max_frequency()) + " Hz (need dt <= 1/(20 f_max))");
      // Spectral synthesis: one random-phase cosine per tabulated frequency,
      // amplitude sqrt(2 S w) with trapezoid weight w, so <h^2> = int S df.
      Rng rng(derive_seed(seed, {0x5DEC7ULL, ci}));
      const auto w = trapezoid_weights(sd->frequency_hz);
      out.assign(r.steps, 0.0);
      for (std::size_t k = 0; k < w.size(); ++k) {
        const double phase0 = two_pi * uniform01(rng);
        const double amp = std::sqrt(2.0 * sd->psd[k] * w[k]);
        if (amp == 0.0) continue;
        const double wf = two_pi * sd->frequency_hz[k];
        const Complex step = std::polar(1.0, wf * r.dt);
        Complex z = std::polar(amp, phase0 + 0.5 * wf * r.dt);
        for (std::size_t i = 0; i < r.steps; ++i) {
          out[i] += z.real();
          z *= step;
        }
      }
    }
  }
  return r;
}

// ---------------------------------------------------------------------------
// Couplings

double sideband_rabi(int n_from, int n_to, double eta, double rabi) {
  if (n_from < 0 || n_to < 0) throw ConfigError("n", "Fock numbers must be >= 0");
  const int dn = std::abs(n_to - n_from);
  if (dn > 1) throw ConfigError("n", "only first-order sidebands (|dn| <= 1) are modelled");
  const int lo = std::min(n_from, n_to);
  const double x = eta * eta;
  double v = rabi * std::exp(-0.5 * x) * std::assoc_laguerre(static_cast<unsigned>(lo), static_cast<unsigned>(dn), x);
  if (dn == 1) v *= eta / std::sqrt(static_cast<double>(lo + 1));
  return v;
}

double blue_pi_time(double eta, double rabi) {
  if (!(eta > 0.0) || !(rabi > 0.0)) throw ConfigError("pulse", "eta and rabi must be positive");
  return pi / (eta * rabi);
}

double lowest_pair_rabi(PulseKind kind, double eta, double rabi, EvolutionMode mode) {
  const int s = sideband_order(kind);
  if (kind == PulseKind::Free) return 0.0;
  if (mode == EvolutionMode::TwoLevel) return s == 0 ? rabi : eta * rabi;
  const int n0 = std::max(0, -s);
  return sideband_rabi(n0, n0 + s, eta, rabi);
}

double default_dt(const PulseSpec& pulse, const TrapSpec& trap, EvolutionMode mode) {
  const double omega = std::abs(lowest_pair_rabi(pulse.kind, trap.eta, pulse.rabi, mode));
  if (omega > 0.0) return (pi / omega) / 2000.0;
  return pulse.duration > 0.0 ? pulse.duration / 2000.0 : 1e-9;
}

double detuned_rabi_transfer(double rabi, double detuning, double t) {
  const double g2 = rabi * rabi + detuning * detuning;
  if (g2 == 0.0) return 0.0;
  const double s = std::sin(0.5 * std::sqrt(g2) * t);
  return rabi * rabi / g2 * s * s;
}

namespace {

struct PairIndex {
  std::size_t g;  // (down, n)
  std::size_t e;  // (up, n + s)
  int n;          // motional number of the down state
};

struct Structure {
  int s = 0;
  std::vector<PairIndex> pairs;
  std::vector<std::size_t> active_singles;  // unpaired states that still carry diagonal terms
  std::vector<double> coupling;             // |Omega_n| / Omega_0 with sign, per pair
};

std::size_t idx(int level_up, int n, int n_max) {
  return static_cast<std::size_t>(level_up) * static_cast<std::size_t>(n_max + 1) + static_cast<std::size_t>(n);
}

Structure make_structure(PulseKind kind, double eta, int n_max, EvolutionMode mode) {
  Structure st;
  st.s = sideband_order(kind);
  const int s = st.s;
  if (mode == EvolutionMode::TwoLevel) {
    if (kind != PulseKind::Free) {
      const int n0 = std::max(0, -s);
      st.pairs.push_back({idx(0, n0, n_max), idx(1, n0 + s, n_max), n0});
      st.coupling.push_back(s == 0 ? 1.0 : eta);
    }
    return st;
  }
  std::vector<bool> paired(2 * static_cast<std::size_t>(n_max + 1), false);
  if (kind != PulseKind::Free) {
    for (int n = std::max(0, -s); n + s <= n_max && n <= n_max; ++n) {
      PairIndex p{idx(0, n, n_max), idx(1, n + s, n_max), n};
      paired[p.g] = paired[p.e] = true;
      st.pairs.push_back(p);
      st.coupling.push_back(sideband_rabi(n, n + s, eta, 1.0));
    }
  }
  for (std::size_t i = 0; i < paired.size(); ++i)
    if (!paired[i]) st.active_singles.push_back(i);
  return st;
}

struct StepTerms {
  double trap = 0.0;      // delta omega_t
  double sigma_z = 0.0;   // (phi_dot - detuning) / 2
  double rabi = 0.0;      // Omega_0 + delta Omega
};

StepTerms terms_at(const PulseSpec& pulse, const NoiseRealization& noise, std::size_t step) {
  StepTerms t;
  t.trap = noise.value(NoiseChannel::TrapFrequency, step);
  t.sigma_z = 0.5 * (noise.value(NoiseChannel::LaserFrequency, step) - pulse.detuning);
  t.rabi = pulse.kind == PulseKind::Free ? 0.0 : pulse.rabi + noise.value(NoiseChannel::LaserAmplitude, step);
  return t;
}

double diag_term(const StepTerms& t, int level_up, int n) {
  return t.trap * static_cast<double>(n) + (level_up ? t.sigma_z : -t.sigma_z);
}

Complex coupling_phase(const PulseSpec& pulse, int s) {
  // e^{i phase} i^{|s|}: the first-order Lamb-Dicke factor i eta a^dagger
  // carries the i for sidebands.
  return std::polar(1.0, pulse.phase + (s != 0 ? 0.5 * pi : 0.0));
}

void check_grid(const PulseSpec& pulse, const NoiseRealization& noise) {
  if (pulse.duration == 0.0) return;
  if (noise.steps == 0 ||
      std::abs(static_cast<double>(noise.steps) * noise.dt - pulse.duration) > 1e-9 * pulse.duration)
    throw ConfigError("noise", "noise realization grid does not span the pulse duration");
  for (const auto& s : noise.series)
    if (!s.empty() && s.size() != noise.steps) throw ConfigError("noise", "noise series length mismatch");
}

std::size_t step_at(const NoiseRealization& noise, double t) {
  if (noise.steps == 0) return 0;
  const auto k = static_cast<long long>(std::floor(t / noise.dt));
  return static_cast<std::size_t>(std::clamp<long long>(k, 0, static_cast<long long>(noise.steps) - 1));
}

}  // namespace

Eigen::MatrixXcd build_hamiltonian(const PulseSpec& pulse, const TrapSpec& trap, const NoiseRealization& noise,
                                   double t, int n_max, EvolutionMode mode) {
  validate(pulse);
  if (t < 0.0 || t > pulse.duration * (1.0 + 1e-12)) throw ConfigError("t", "time outside [0, duration]");
  check_grid(pulse, noise);
  const auto st = make_structure(pulse.kind, trap.eta, n_max, mode);
  const auto dim = static_cast<Eigen::Index>(2 * (n_max + 1));
  Eigen::MatrixXcd h = Eigen::MatrixXcd::Zero(dim, dim);
  const StepTerms terms = noise.steps ? terms_at(pulse, noise, step_at(noise, t)) : terms_at(pulse, NoiseRealization{}, 0);
  const Complex u = coupling_phase(pulse, st.s);
  for (std::size_t k = 0; k < st.pairs.size(); ++k) {
    const auto& p = st.pairs[k];
    const auto g = static_cast<Eigen::Index>(p.g);
    const auto e = static_cast<Eigen::Index>(p.e);
    h(g, g) = diag_term(terms, 0, p.n);
    h(e, e) = diag_term(terms, 1, p.n + st.s);
    const Complex c = 0.5 * terms.rabi * st.coupling[k] * u;
    h(e, g) = c;
    h(g, e) = std::conj(c);
  }
  for (auto i : st.active_singles) {
    const int up = i > static_cast<std::size_t>(n_max) ? 1 : 0;
    const int n = static_cast<int>(i) - up * (n_max + 1);
    h(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) = diag_term(terms, up, n);
  }
  return h;
}

LocalOp propagator(const PulseSpec& pulse, const TrapSpec& trap, const NoiseRealization& noise, int n_max,
                   EvolutionMode mode) {
  validate(pulse);
  const std::size_t dim = 2 * static_cast<std::size_t>(n_max + 1);
  LocalOp out(dim);
  if (pulse.duration == 0.0) return out;
  check_grid(pulse, noise);

  const auto st = make_structure(pulse.kind, trap.eta, n_max, mode);
  const Complex u = coupling_phase(pulse, st.s);
  const bool constant = noise.time_independent();
  const std::size_t steps = constant ? 1 : noise.steps;
  const double h = constant ? pulse.duration : noise.dt;

  std::vector<std::array<Complex, 4>> acc(st.pairs.size(), {Complex{1.0}, Complex{0.0}, Complex{0.0}, Complex{1.0}});
  std::vector<double> single_phase(st.active_singles.size(), 0.0);
  std::vector<std::pair<int, int>> single_labels;
  single_labels.reserve(st.active_singles.size());
  for (auto i : st.active_singles) {
    const int up = i > static_cast<std::size_t>(n_max) ? 1 : 0;
    single_labels.emplace_back(up, static_cast<int>(i) - up * (n_max + 1));
  }

  for (std::size_t k = 0; k < steps; ++k) {
    const StepTerms terms = terms_at(pulse, noise, k);
    double max_eig = 0.0;
    for (std::size_t b = 0; b < st.pairs.size(); ++b) {
      const auto& p = st.pairs[b];
      const double dg = diag_term(terms, 0, p.n);
      const double de = diag_term(terms, 1, p.n + st.s);
      const Complex c = 0.5 * terms.rabi * st.coupling[b] * u;
      const double m = 0.5 * (dg + de);
      const double z = 0.5 * (dg - de);
      const double w = std::sqrt(z * z + std::norm(c));
      max_eig = std::max(max_eig, std::abs(m) + w);
      const double wt = w * h;
      const double cw = std::cos(wt);
      const double sw = w > 0.0 ? std::sin(wt) / w : h;  // sin(w h) / w
      const Complex ph = std::polar(1.0, -m * h);
      const Complex mi{0.0, -1.0};
      // e^{-i m h} [cos(w h) 1 - i sin(w h)/w K], K = [[z, c*], [c, -z]]
      const std::array<Complex, 4> step{ph * (cw + mi * sw * z), ph * (mi * sw * std::conj(c)),
                                        ph * (mi * sw * c), ph * (cw - mi * sw * z)};
      auto& a = acc[b];
      a = {step[0] * a[0] + step[1] * a[2], step[0] * a[1] + step[1] * a[3],
           step[2] * a[0] + step[3] * a[2], step[2] * a[1] + step[3] * a[3]};
    }
    for (std::size_t j = 0; j < single_labels.size(); ++j) {
      const double d = diag_term(terms, single_labels[j].first, single_labels[j].second);
      max_eig = std::max(max_eig, std::abs(d));
      single_phase[j] += d * h;
    }
    if (noise.dt * max_eig > 0.1)
      throw StepSizeError("dt * max|eigenvalue| = " + std::to_string(noise.dt * max_eig) + " exceeds 0.1 rad");
  }

  for (std::size_t b = 0; b < st.pairs.size(); ++b) out.set_pair(st.pairs[b].g, st.pairs[b].e, acc[b]);
  for (std::size_t j = 0; j < st.active_singles.size(); ++j)
    out.set_single(st.active_singles[j], std::polar(1.0, -single_phase[j]));
  return out;
}

void check_truncation(std::span<const double> local_populations, int n_max, PulseKind kind, EvolutionMode mode) {
  if (mode == EvolutionMode::TwoLevel) return;
  const int s = sideband_order(kind);
  if (s == 0) return;
  // Blue: (down, n_max) would couple to (up, n_max + 1). Red: (up, n_max) to (down, n_max + 1).
  const int level_up = s > 0 ? 0 : 1;
  const double p = local_populations[idx(level_up, n_max, n_max)];
  if (p > kTruncationThreshold)
    throw TruncationError("population " + std::to_string(p) + " at the truncation edge n_max = " +
                          std::to_string(n_max) + " would couple out of the basis; raise n_max");
}

void check_truncation(const HybridAtomState& state, PulseKind kind, EvolutionMode mode) {
  std::vector<double> pops(state.dim());
  for (std::size_t i = 0; i < pops.size(); ++i) pops[i] = std::norm(state.amplitudes()[i]);
  check_truncation(pops, state.n_max(), kind, mode);
}

HybridAtomState evolve(const HybridAtomState& state, const PulseSpec& pulse, const TrapSpec& trap,
                       const NoiseRealization& noise, EvolutionMode mode) {
  if (state.lost()) throw ConfigError("state", "cannot evolve a lost atom");
  if (std::abs(state.norm_squared() - 1.0) > 1e-10) throw ConfigError("state", "state is not normalized");
  check_truncation(state, pulse.kind, mode);
  HybridAtomState out = state;
  propagator(pulse, trap, noise, state.n_max(), mode).apply(out.amplitudes());
  return out;
}

LocalOp ideal_pi_pulse(PulseKind kind, double phase, double eta, int n_max) {
  const auto st = make_structure(kind, eta, n_max, EvolutionMode::RwaLadder);
  PulseSpec p;
  p.kind = kind;
  p.phase = phase;
  const Complex u = coupling_phase(p, st.s);
  LocalOp out(2 * static_cast<std::size_t>(n_max + 1));
  const Complex mi{0.0, -1.0};
  for (std::size_t b = 0; b < st.pairs.size(); ++b) {
    const Complex ub = st.coupling[b] < 0.0 ? -u : u;
    out.set_pair(st.pairs[b].g, st.pairs[b].e, {Complex{0.0}, mi * std::conj(ub), mi * ub, Complex{0.0}});
  }
  return out;
}

// ---------------------------------------------------------------------------
// PSD files

PsdQuantity psd_quantity_from_string(const std::string& s) {
  if (s == "angular_rate" || s == "rad2_per_s2_per_hz") return PsdQuantity::AngularRate;
  if (s == "frequency" || s == "hz2_per_hz") return PsdQuantity::Frequency;
  if (s == "phase" || s == "rad2_per_hz") return PsdQuantity::Phase;
  throw ConfigError("psd_quantity", "unknown PSD quantity '" + s + "'");
}

SpectralDensity convert_psd(SpectralDensity psd, PsdQuantity quantity) {
  for (std::size_t i = 0; i < psd.psd.size(); ++i) {
    switch (quantity) {
      case PsdQuantity::AngularRate: break;
      case PsdQuantity::Frequency: psd.psd[i] *= two_pi * two_pi; break;
      case PsdQuantity::Phase: {
        const double w = two_pi * psd.frequency_hz[i];
        psd.psd[i] *= w * w;
        break;
      }
    }
  }
  return psd;
}

SpectralDensity load_psd_csv(const std::filesystem::path& path, PsdQuantity quantity) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open PSD file " + path.string());
  SpectralDensity out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    const char c0 = line[first];
    if (!(std::isdigit(static_cast<unsigned char>(c0)) || c0 == '-' || c0 == '+' || c0 == '.')) continue;
    for (auto& ch : line)
      if (ch == ',' || ch == ';' || ch == '\t') ch = ' ';
    std::istringstream ss(line);
    double f = 0.0, s = 0.0;
    if (!(ss >> f >> s))
      throw IoError(path.string() + ":" + std::to_string(lineno) + ": expected two numeric columns");
    out.frequency_hz.push_back(f);
    out.psd.push_back(s);
  }
  out = convert_psd(std::move(out), quantity);
  validate(out);
  return out;
}

}  // namespace tweezersim

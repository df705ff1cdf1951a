#include "tweezersim/response.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "tweezersim/errors.hpp"

namespace tweezersim {

using constants::pi;
using constants::two_pi;

double ResponseQuery::pulse_duration() const { return duration ? *duration : pi / (eta * rabi); }

void validate(const ResponseQuery& q) {
  if (!(q.eta > 0.0) || !std::isfinite(q.eta)) throw ConfigError("eta", "must be positive");
  if (!(q.rabi > 0.0) || !std::isfinite(q.rabi)) throw ConfigError("rabi", "must be positive");
  if (q.duration && !(*q.duration > 0.0)) throw ConfigError("duration", "must be positive");
  if (q.frequency_hz.empty()) throw ConfigError("frequency_hz", "grid is empty");
  for (std::size_t i = 0; i < q.frequency_hz.size(); ++i) {
    if (!(q.frequency_hz[i] > 0.0) || !std::isfinite(q.frequency_hz[i]))
      throw ConfigError("frequency_hz", "grid values must be positive");
    if (i > 0 && !(q.frequency_hz[i] > q.frequency_hz[i - 1]))
      throw ConfigError("frequency_hz", "grid must be strictly increasing");
  }
}

double response_closed_form(double f_hz, double eta, double rabi) {
  const double omega = eta * rabi;
  const double x = two_pi * std::abs(f_hz);
  const double y = pi * (omega - x) / (2.0 * omega);
  const double sinc = std::abs(y) < 1e-8 ? 1.0 - y * y / 6.0 : std::sin(y) / y;
  const double a = (pi / 2.0) * sinc / (omega + x);
  return a * a;
}

ResponseFunction response_closed_form(const ResponseQuery& q) {
  validate(q);
  if (q.channel == NoiseChannel::LaserAmplitude)
    throw ConfigError("channel", "the closed form covers the frequency-noise channels only");
  if (q.duration && std::abs(*q.duration * q.eta * q.rabi - pi) > 1e-9 * pi)
    throw ConfigError("duration", "the closed form holds at the pi time only");
  ResponseFunction out{q.frequency_hz, {}, q.channel, ResponseMethod::ClosedForm};
  out.values.reserve(q.frequency_hz.size());
  for (double f : q.frequency_hz) out.values.push_back(response_closed_form(f, q.eta, q.rabi));
  return out;
}

double response_amplitude_closed_form(double f_hz, double eta, double duration) {
  const double a = pi * f_hz;
  const double s = std::abs(a * duration) < 1e-8 ? duration : std::sin(a * duration) / a;
  return (eta / 2.0) * (eta / 2.0) * s * s;
}

namespace {

std::size_t panel_count(double f_hz, const ResponseQuery& q) {
  if (q.panels_per_period < kMinPanelsPerPeriod)
    throw ResolutionError("panels_per_period = " + std::to_string(q.panels_per_period) + " is below the minimum " +
                          std::to_string(kMinPanelsPerPeriod));
  const double rate = std::max(std::abs(f_hz), q.eta * q.rabi / two_pi);
  const double periods = rate * q.pulse_duration();
  auto m = static_cast<std::size_t>(std::ceil(q.panels_per_period * std::max(periods, 1.0)));
  if (m % 2) ++m;
  if (m > q.max_panels)
    throw ResolutionError("frequency " + std::to_string(f_hz) + " Hz needs " + std::to_string(m) +
                          " panels, above max_panels = " + std::to_string(q.max_panels));
  return m;
}

// Channel operator in the (g', e') basis where the drive is exp(-i Omega t sigma'_y / 2).
struct Op2 {
  Complex m[2][2];
};

Op2 channel_operator(NoiseChannel c, double eta) {
  switch (c) {
    case NoiseChannel::TrapFrequency:
      return {{{0.0, 0.0}, {0.0, 1.0}}};
    case NoiseChannel::LaserFrequency:
      return {{{-0.5, 0.0}, {0.0, 0.5}}};
    case NoiseChannel::LaserAmplitude:
      return {{{0.0, Complex{0.0, -eta / 2.0}}, {Complex{0.0, eta / 2.0}, 0.0}}};
  }
  return {};
}

}  // namespace

double response_numeric(double f_hz, const ResponseQuery& q) {
  const double omega = q.eta * q.rabi;
  const double T = q.pulse_duration();
  const std::size_t m = panel_count(f_hz, q);
  const double h = T / static_cast<double>(m);
  const Op2 op = channel_operator(q.channel, q.eta);

  // w(t) = (O_H(t) - <O_H>) psi0 has no component along psi0 = g', so only the
  // e' amplitude contributes.
  Complex wp{};
  Complex wm{};
  for (std::size_t k = 0; k <= m; ++k) {
    const double t = h * static_cast<double>(k);
    const double c = std::cos(omega * t / 2.0);
    const double s = std::sin(omega * t / 2.0);
    // O U psi0 with U psi0 = (c, s), rotated back by U^T.
    const Complex o0 = op.m[0][0] * c + op.m[0][1] * s;
    const Complex o1 = op.m[1][0] * c + op.m[1][1] * s;
    const Complex w = -s * o0 + c * o1;
    const double weight = (k == 0 || k == m) ? 1.0 : (k % 2 ? 4.0 : 2.0);
    const Complex e = std::polar(weight, -two_pi * f_hz * t);
    wp += e * w;
    wm += std::conj(e) * w;
  }
  const double scale = h / 3.0;
  return 0.5 * (std::norm(wp * scale) + std::norm(wm * scale));
}

ResponseFunction response_numeric(const ResponseQuery& q) {
  validate(q);
  ResponseFunction out{q.frequency_hz, {}, q.channel, ResponseMethod::Numeric};
  out.values.reserve(q.frequency_hz.size());
  for (double f : q.frequency_hz) out.values.push_back(response_numeric(f, q));
  return out;
}

namespace {

double interp(const std::vector<double>& x, const std::vector<double>& y, double at) {
  if (x.size() == 1) return y[0];
  auto it = std::upper_bound(x.begin(), x.end(), at);
  if (it == x.begin()) return y.front();
  if (it == x.end()) return y.back();
  const auto j = static_cast<std::size_t>(it - x.begin());
  const double t = (at - x[j - 1]) / (x[j] - x[j - 1]);
  return y[j - 1] + t * (y[j] - y[j - 1]);
}

}  // namespace

double infidelity(const SpectralDensity& psd, const ResponseFunction& response, std::vector<std::string>* warnings) {
  validate(psd);
  const auto& fr = response.frequency_hz;
  if (fr.empty() || fr.size() != response.values.size())
    throw GridMismatchError("response grid is empty or inconsistent");
  const double lo = std::max(psd.frequency_hz.front(), fr.front());
  const double hi = std::min(psd.frequency_hz.back(), fr.back());
  if (!(hi > lo)) throw GridMismatchError("PSD and response grids do not overlap");

  std::vector<double> grid;
  grid.reserve(psd.frequency_hz.size() + fr.size() + 2);
  grid.push_back(lo);
  grid.push_back(hi);
  for (double f : psd.frequency_hz)
    if (f > lo && f < hi) grid.push_back(f);
  for (double f : fr)
    if (f > lo && f < hi) grid.push_back(f);
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());

  double chi = 0.0;
  double prev = interp(psd.frequency_hz, psd.psd, grid[0]) * interp(fr, response.values, grid[0]);
  for (std::size_t i = 1; i < grid.size(); ++i) {
    const double cur = interp(psd.frequency_hz, psd.psd, grid[i]) * interp(fr, response.values, grid[i]);
    chi += 0.5 * (prev + cur) * (grid[i] - grid[i - 1]);
    prev = cur;
  }

  if (warnings) {
    double outside = 0.0;
    for (std::size_t i = 0; i < psd.frequency_hz.size(); ++i)
      if (psd.frequency_hz[i] < lo || psd.frequency_hz[i] > hi) outside = std::max(outside, std::abs(psd.psd[i]));
    if (outside > 0.0) {
      std::ostringstream os;
      os << "PSD has support outside the response grid [" << lo << ", " << hi << "] Hz that was dropped";
      warnings->push_back(os.str());
    }
  }
  return chi;
}

double infidelity_quasi_static(double sigma, double zero_frequency_response) {
  if (!(sigma >= 0.0)) throw ConfigError("sigma", "must be non-negative");
  return sigma * sigma * zero_frequency_response;
}

InfidelityBudget infidelity_budget(const NoiseModel& model, double eta, double rabi, std::optional<double> duration) {
  InfidelityBudget budget;
  for (NoiseChannel c : kNoiseChannels) {
    ResponseQuery q;
    q.eta = eta;
    q.rabi = rabi;
    q.duration = duration;
    q.channel = c;
    q.frequency_hz = {1.0};
    validate(q);
    ChannelBudget entry{c, 0.0, "none"};
    const auto& noise = model[c];
    if (const auto* qs = std::get_if<QuasiStatic>(&noise)) {
      entry.kind = "quasi_static";
      entry.chi = infidelity_quasi_static(qs->sigma, response_numeric(0.0, q));
    } else if (const auto* sd = std::get_if<SpectralDensity>(&noise)) {
      entry.kind = "spectral";
      ResponseFunction r{sd->frequency_hz, {}, c, ResponseMethod::Numeric};
      for (double f : sd->frequency_hz) r.values.push_back(response_numeric(f, q));
      entry.chi = infidelity(*sd, r, &budget.warnings);
    }
    budget.total += entry.chi;
    budget.channels.push_back(entry);
  }
  return budget;
}

}  // namespace tweezersim

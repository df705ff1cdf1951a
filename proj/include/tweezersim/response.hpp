#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "tweezersim/dynamics.hpp"

namespace tweezersim {

inline constexpr int kMinPanelsPerPeriod = 400;

/// Linear-response problem for a two-level sideband drive of Rabi frequency
/// eta * rabi, started from the lower state.
struct ResponseQuery {
  double eta = 0.0;
  double rabi = 0.0;                   // Omega_0, rad/s
  std::optional<double> duration;      // defaults to the pi time pi / (eta rabi)
  std::vector<double> frequency_hz;    // strictly increasing, positive
  NoiseChannel channel = NoiseChannel::TrapFrequency;
  int panels_per_period = kMinPanelsPerPeriod;
  std::size_t max_panels = 20'000'000;

  double pulse_duration() const;
};

void validate(const ResponseQuery& q);

enum class ResponseMethod { ClosedForm, Numeric };

struct ResponseFunction {
  std::vector<double> frequency_hz;
  std::vector<double> values;  // s^2
  NoiseChannel channel = NoiseChannel::TrapFrequency;
  ResponseMethod method = ResponseMethod::ClosedForm;
};

/// Closed-form response of a pi pulse to trap or laser frequency noise,
/// written so that it stays finite at the resonance f = eta rabi / 2 pi.
double response_closed_form(double f_hz, double eta, double rabi);
/// Closed form on the query grid. Only valid for the two frequency-noise
/// channels at the pi time.
ResponseFunction response_closed_form(const ResponseQuery& q);

/// Amplitude-noise response at any duration: (eta/2)^2 (sin(pi f T) / (pi f))^2.
double response_amplitude_closed_form(double f_hz, double eta, double duration);

/// Numeric response from the Fourier transforms of the channel's
/// interaction-picture perturbation, by composite Simpson quadrature.
double response_numeric(double f_hz, const ResponseQuery& q);
ResponseFunction response_numeric(const ResponseQuery& q);

/// Frequency-domain infidelity: trapezoid of S(f) I(f) on the union of the
/// two grids restricted to their overlap. Warnings about PSD support outside
/// the response grid are appended to `warnings`.
double infidelity(const SpectralDensity& psd, const ResponseFunction& response,
                  std::vector<std::string>* warnings = nullptr);

/// Quasi-static limit chi = sigma^2 I(0).
double infidelity_quasi_static(double sigma, double zero_frequency_response);

struct ChannelBudget {
  NoiseChannel channel = NoiseChannel::TrapFrequency;
  double chi = 0.0;
  std::string kind;  // "none", "quasi_static" or "spectral"
};

struct InfidelityBudget {
  std::vector<ChannelBudget> channels;
  double total = 0.0;
  std::vector<std::string> warnings;
};

/// Per-channel and total perturbative infidelity of a pulse under `model`.
/// Spectral channels are integrated against the numeric response evaluated
/// on the PSD's own grid (its zero-frequency point uses I(0)).
InfidelityBudget infidelity_budget(const NoiseModel& model, double eta, double rabi,
                                   std::optional<double> duration = std::nullopt);

}  // namespace tweezersim

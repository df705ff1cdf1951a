#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "tweezersim/errors.hpp"
#include "tweezersim/response.hpp"

using namespace tweezersim;
using constants::pi;
using constants::two_pi;

namespace {

const double kEta = 0.36;
const double kRabi = two_pi * 2e3;

// Direct form of the pi-pulse response, singular at x = Omega.
double raw_closed_form(double f, double eta, double rabi) {
  const double omega = eta * rabi;
  const double x = two_pi * f;
  const double t = pi / omega;
  const double v = omega * std::cos(pi * f * t) / (omega * omega - x * x);
  return v * v;
}

std::vector<double> log_grid(double lo, double hi, int n) {
  std::vector<double> g;
  for (int i = 0; i < n; ++i) g.push_back(lo * std::pow(hi / lo, double(i) / (n - 1)));
  return g;
}

ResponseQuery query(NoiseChannel c, std::vector<double> grid) {
  ResponseQuery q;
  q.eta = kEta;
  q.rabi = kRabi;
  q.channel = c;
  q.frequency_hz = std::move(grid);
  return q;
}

}  // namespace

TEST_CASE("closed form limits") {
  const double omega = kEta * kRabi;
  CHECK(response_closed_form(0.0, kEta, kRabi) == doctest::Approx(1.0 / (omega * omega)).epsilon(1e-12));
  const double f_res = omega / two_pi;
  const double t_pi = pi / omega;
  CHECK(response_closed_form(f_res, kEta, kRabi) == doctest::Approx(std::pow(t_pi / 4, 2)).epsilon(1e-12));
  for (double rel : {1e-6, -1e-6}) {
    CHECK(response_closed_form(f_res * (1 + rel), kEta, kRabi) == doctest::Approx(std::pow(t_pi / 4, 2)).epsilon(1e-5));
    CHECK(raw_closed_form(f_res * (1 + rel), kEta, kRabi) == doctest::Approx(std::pow(t_pi / 4, 2)).epsilon(1e-5));
  }
  for (double f : {10.0, 333.0, 1500.0, 9000.0})
    CHECK(response_closed_form(f, kEta, kRabi) == doctest::Approx(raw_closed_form(f, kEta, kRabi)).epsilon(1e-10));
}

TEST_CASE("closed form scaling law") {
  for (double c : {0.5, 3.0})
    for (double f : {50.0, 700.0, 4000.0})
      CHECK(response_closed_form(c * f, kEta, c * kRabi) ==
            doctest::Approx(response_closed_form(f, kEta, kRabi) / (c * c)).epsilon(1e-12));
}

TEST_CASE("numeric response matches the closed form on a log grid") {
  for (auto c : {NoiseChannel::TrapFrequency, NoiseChannel::LaserFrequency}) {
    const auto q = query(c, log_grid(10.0, 1e4, 50));
    const auto numeric = response_numeric(q);
    const auto closed = response_closed_form(q);
    for (std::size_t i = 0; i < q.frequency_hz.size(); ++i)
      CHECK(numeric.values[i] == doctest::Approx(closed.values[i]).epsilon(1e-6));
  }
}

TEST_CASE("numeric response is even in f and non-negative") {
  const auto q = query(NoiseChannel::TrapFrequency, {1.0});
  for (double f : {0.0, 120.0, 720.0, 5000.0}) {
    CHECK(response_numeric(-f, q) == doctest::Approx(response_numeric(f, q)).epsilon(1e-12));
    CHECK(response_numeric(f, q) >= 0.0);
  }
}

TEST_CASE("amplitude channel response") {
  auto q = query(NoiseChannel::LaserAmplitude, log_grid(5.0, 2e4, 30));
  q.duration = 1.3 * pi / (kEta * kRabi);
  const auto r = response_numeric(q);
  for (std::size_t i = 0; i < r.values.size(); ++i)
    CHECK(r.values[i] ==
          doctest::Approx(response_amplitude_closed_form(q.frequency_hz[i], kEta, *q.duration)).epsilon(1e-8));
  CHECK_THROWS_AS(response_closed_form(q), ConfigError);
}

TEST_CASE("quasi-static infidelity of trap-frequency fluctuations") {
  const double sigma = 0.005 * two_pi * 35e3;
  const auto budget = [&] {
    NoiseModel m;
    m[NoiseChannel::TrapFrequency] = QuasiStatic{sigma};
    return infidelity_budget(m, kEta, kRabi);
  }();
  const double omega = kEta * kRabi;
  CHECK(budget.total == doctest::Approx(sigma * sigma / (omega * omega)).epsilon(1e-9));
  CHECK(budget.total == doctest::Approx(0.05908).epsilon(1e-3));
  CHECK(budget.channels[0].kind == "quasi_static");
}

TEST_CASE("spectral infidelity on mismatched grids") {
  const auto q = query(NoiseChannel::LaserFrequency, log_grid(10.0, 1e4, 200));
  const auto r = response_closed_form(q);
  SUBCASE("white PSD on the overlap") {
    const auto psd = SpectralDensity::white(2.0, 5e3, 501);
    std::vector<std::string> warn;
    const double chi = infidelity(psd, r, &warn);
    CHECK(chi > 0.0);
    CHECK(warn.size() == 1);
    // An independent fine trapezoid over [10, 5000] Hz.
    double oracle = 0.0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
      const double a = 10.0 + (5e3 - 10.0) * i / n;
      const double b = 10.0 + (5e3 - 10.0) * (i + 1) / n;
      oracle += 0.5 * 2.0 * (response_closed_form(a, kEta, kRabi) + response_closed_form(b, kEta, kRabi)) * (b - a);
    }
    CHECK(chi == doctest::Approx(oracle).epsilon(2e-3));
  }
  SUBCASE("disjoint grids") {
    const auto psd = SpectralDensity::white(2.0, 5.0, 11);
    CHECK_THROWS_AS(infidelity(psd, r), GridMismatchError);
  }
}

TEST_CASE("quadrature resolution guards") {
  auto q = query(NoiseChannel::TrapFrequency, {100.0});
  q.panels_per_period = 100;
  CHECK_THROWS_AS(response_numeric(q), ResolutionError);
  q.panels_per_period = 400;
  q.max_panels = 50;
  CHECK_THROWS_AS(response_numeric(q), ResolutionError);
  auto bad = query(NoiseChannel::TrapFrequency, {100.0, 50.0});
  CHECK_THROWS_AS(response_numeric(bad), ConfigError);
}

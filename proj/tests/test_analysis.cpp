#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "tweezersim/analysis.hpp"
#include "tweezersim/errors.hpp"

using namespace tweezersim;

namespace {

std::vector<SpectrumPoint> gaussian_spectrum(double blue, double red, double mu, double sigma, double d,
                                             std::size_t shots, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<SpectrumPoint> pts;
  for (int k = -45; k <= 45; ++k) {
    const double x = 1e3 * k;
    const double p = double_gaussian(x, blue, red, mu, sigma, d);
    SpectrumPoint s{x, p, 0.0, shots};
    if (shots > 0) {
      std::binomial_distribution<std::size_t> b(shots, p);
      s.p_exc = double(b(rng)) / double(shots);
      s.std_error = std::sqrt(s.p_exc * (1 - s.p_exc) / double(shots));
    }
    pts.push_back(s);
  }
  return pts;
}

}  // namespace

TEST_CASE("nelder-mead finds the Rosenbrock minimum") {
  auto f = [](const std::vector<double>& x) { return std::pow(1 - x[0], 2) + 100 * std::pow(x[1] - x[0] * x[0], 2); };
  const auto r = nelder_mead(f, {-1.2, 1.0}, {0.5, 0.5});
  CHECK(r.converged);
  CHECK(r.x[0] == doctest::Approx(1.0).epsilon(1e-4));
  CHECK(r.x[1] == doctest::Approx(1.0).epsilon(1e-4));
}

TEST_CASE("exact spectra are fitted back to their parameters") {
  const auto pts = gaussian_spectrum(0.95, 0.2, 35e3, 2e3, 0.03, 0, 0);
  const auto blue = fit_heating_sideband(pts);
  CHECK(blue.height == doctest::Approx(0.95).epsilon(1e-5));
  CHECK(blue.center_hz == doctest::Approx(35e3).epsilon(1e-6));
  CHECK(blue.width_hz == doctest::Approx(2e3).epsilon(1e-5));
  CHECK(blue.offset == doctest::Approx(0.03).epsilon(1e-5));

  const auto both = fit_double_gaussian_with_offset(pts);
  CHECK(both.red_height == doctest::Approx(0.2).epsilon(1e-5));
  CHECK(both.ground_state_fraction() == doctest::Approx(1 - 0.2 / 0.95).epsilon(1e-5));
  CHECK(both.wrong_state_fraction() == doctest::Approx(0.03).epsilon(1e-4));

  const auto prof = profile_likelihood_cooling_peak(pts, blue);
  CHECK(prof.estimate == doctest::Approx(0.2).epsilon(1e-4));
  CHECK(prof.lower < prof.estimate);
  CHECK(prof.upper > prof.estimate);
}

TEST_CASE("flat spectra are degenerate") {
  std::vector<SpectrumPoint> flat;
  for (int k = 0; k < 20; ++k) flat.push_back({1e3 * k, 0.1, 0.0, 0});
  CHECK_THROWS_AS(fit_heating_sideband(flat), DegenerateFitError);
  CHECK_THROWS_AS(fit_heating_sideband(std::vector<SpectrumPoint>(flat.begin(), flat.begin() + 3)), DegenerateFitError);
}

TEST_CASE("least-squares errors agree with the scatter of repeated fits") {
  const int reps = 60;
  std::vector<double> est, se;
  for (int i = 0; i < reps; ++i) {
    const auto pts = gaussian_spectrum(0.9, 0.3, 35e3, 2e3, 0.02, 400, 100 + i);
    const auto fit = fit_double_gaussian_with_offset(pts);
    est.push_back(fit.red_height);
    se.push_back(std::sqrt(fit.covariance(1, 1)));
  }
  double m = 0, v = 0, s = 0;
  for (double e : est) m += e / reps;
  for (double e : est) v += (e - m) * (e - m) / (reps - 1);
  for (double e : se) s += e / reps;
  CHECK(std::abs(m - 0.3) < 4 * std::sqrt(v / reps));
  CHECK(std::sqrt(v) / s == doctest::Approx(1.0).epsilon(0.3));
}

TEST_CASE("profile interval is clipped at zero for a cold sample") {
  const auto pts = gaussian_spectrum(0.98, 0.0, 35e3, 2e3, 0.0, 150, 7);
  const auto blue = fit_heating_sideband(pts);
  const auto prof = profile_likelihood_cooling_peak(pts, blue);
  CHECK(prof.lower >= 0.0);
  CHECK(prof.upper > prof.estimate);
  CHECK(prof.upper < 0.05);
  const auto t = temperature_from_profile(prof, blue.height);
  CHECK(t.nbar_lower >= 0.0);
  CHECK(t.nbar_upper > t.nbar);
  for (double d : prof.delta_chi2) CHECK(d >= -1e-9);
}

TEST_CASE("nbar and ratio conversions") {
  for (double n : {0.0, 0.002, 0.05, 0.3, 3.0}) CHECK(nbar_from_ratio(ratio_from_nbar(n)) == doctest::Approx(n));
  CHECK(nbar_from_ratio(0.5) == doctest::Approx(1.0));
  CHECK_THROWS_AS(nbar_from_ratio(1.0), NonThermalError);
  CHECK_THROWS_AS(nbar_from_ratio(1.3), NonThermalError);
  CHECK_THROWS_AS(ratio_from_nbar(-0.1), ConfigError);
}

TEST_CASE("non-thermal correction endpoints") {
  CHECK(nonthermal_correction(0.08, 0.764) == doctest::Approx(std::pow(0.08, 1.5) * 0.236));
  CHECK(nonthermal_correction(0.08, 0.764) == doctest::Approx(0.00534).epsilon(1e-3));
  CHECK(nonthermal_correction(0.24, 0.764) == doctest::Approx(0.02775).epsilon(1e-3));
  CHECK(nonthermal_correction(0.0, 0.764) == 0.0);
}

TEST_CASE("analytic threshold for equal-width normals") {
  const NormalMixture present{{1.0}, {4.0}, {1.0}};
  const NormalMixture absent{{1.0}, {0.0}, {1.0}};
  const auto r = optimize_threshold(present, absent, 0.5);
  CHECK(r.threshold == doctest::Approx(2.0).epsilon(1e-9));
  CHECK(r.F == doctest::Approx(0.97725).epsilon(1e-5));
  CHECK(r.F == doctest::Approx(r.P1 * r.F1 + (1 - r.P1) * r.F0));
  CHECK(r.bright_above);

  // An unequal prior shifts the crossing towards the less likely class.
  const auto skew = optimize_threshold(present, absent, 0.8);
  CHECK(skew.threshold == doctest::Approx(2.0 - std::log(4.0) / 4.0).epsilon(1e-9));
}

TEST_CASE("sample threshold sweep") {
  const std::vector<double> p{3, 4, 5}, a{0, 1, 2};
  const auto r = optimize_threshold(p, a, 0.5);
  CHECK(r.threshold == doctest::Approx(2.5));
  CHECK(r.F == doctest::Approx(1.0));

  // Two equally good thresholds: the lower one is kept.
  const std::vector<double> p2{1, 3}, a2{0, 2};
  const auto t = optimize_threshold(p2, a2, 0.5);
  CHECK(t.F == doctest::Approx(0.75));
  CHECK(t.threshold == doctest::Approx(0.5));

  // Orientation follows the class means.
  const auto inv = optimize_threshold(a, p, 0.5);
  CHECK_FALSE(inv.bright_above);
  CHECK(inv.F == doctest::Approx(1.0));

  // Large normal samples approach the analytic optimum.
  Rng rng(11);
  std::normal_distribution<double> b(4, 1), d(0, 1);
  std::vector<double> ps(50000), as(50000);
  for (auto& v : ps) v = b(rng);
  for (auto& v : as) v = d(rng);
  const auto big = optimize_threshold(ps, as, 0.5);
  CHECK(std::abs(big.F - 0.97725) < 0.003);
  CHECK(std::abs(big.threshold - 2.0) < 0.2);
}

TEST_CASE("imaging calibration hits the target fidelity") {
  ImagingSpec base;
  const auto cal = calibrate_imaging(base, 0.9);
  CHECK(cal.bright_mean == doctest::Approx(2.5631031310892007).epsilon(1e-9));
  const double eps = cnot_flip_error(GateErrorSpec{});
  CHECK(eps == doctest::Approx(0.005));
  const auto cal2 = calibrate_imaging(base, 0.9, eps);
  CHECK(cal2.bright_mean > cal.bright_mean);
  const auto r = optimize_threshold(present_signal_model(cal2, eps), absent_signal_model(cal2), 0.5);
  CHECK(r.F == doctest::Approx(0.9).epsilon(1e-9));
  CHECK_THROWS_AS(calibrate_imaging(base, 0.999999, 0.1), ConfigError);
}

TEST_CASE("aggregation") {
  const std::vector<double> rounds{1.0, 2.0, 3.5, -1.0};
  CHECK(aggregate_signal(rounds, 1) == 1.0);
  CHECK(aggregate_signal(rounds, 4) == doctest::Approx(5.5));
  CHECK_THROWS_AS(aggregate_signal(rounds, 5), ConfigError);
  ImagingSpec im;
  // With no flip error the per-round LLR of two unit normals is linear.
  const double b = im.bright_mean;
  CHECK(aggregate_signal(rounds, 2, AggregationMode::LikelihoodRatio, im, 0.0) ==
        doctest::Approx(b * 3.0 - b * b));
  CHECK(std::isfinite(aggregate_signal(std::vector<double>{-40.0}, 1, AggregationMode::LikelihoodRatio, im, 0.01)));
}

TEST_CASE("dark sub-peak weight") {
  ImagingSpec im;
  im.bright_mean = 6.0;
  Rng rng(12);
  std::normal_distribution<double> b(6, 1), d(0, 1);
  std::uniform_real_distribution<double> u(0, 1);
  std::vector<double> s(20000);
  for (auto& v : s) v = u(rng) < 0.08 ? d(rng) : b(rng);
  const auto w = estimate_dark_weight(s, im);
  CHECK(std::abs(w.weight - 0.08) < 4 * w.std_error);
  CHECK(w.std_error == doctest::Approx(std::sqrt(0.08 * 0.92 / 20000)).epsilon(0.1));
}

TEST_CASE("sinusoid fit") {
  std::vector<double> ph, v;
  for (int k = 0; k < 8; ++k) {
    ph.push_back(2 * constants::pi * k / 8);
    v.push_back(0.5 + 0.4 * std::cos(ph.back() - 1.0));
  }
  const auto f = fit_sinusoid(ph, v);
  CHECK(f.offset == doctest::Approx(0.5));
  CHECK(f.amplitude == doctest::Approx(0.4));
  CHECK(f.phase == doctest::Approx(1.0));
  CHECK_THROWS_AS(fit_sinusoid(std::vector<double>{0, 0, 0}, std::vector<double>{1, 2, 3}), DegenerateFitError);
}

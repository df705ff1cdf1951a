#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "tweezersim/gates.hpp"
#include "tweezersim/protocols.hpp"

namespace tweezersim {

// ---------------------------------------------------------------------------
// Optimizer

struct SimplexResult {
  std::vector<double> x;
  double value = 0.0;
  int iterations = 0;
  bool converged = false;
};

/// Nelder-Mead on an unconstrained objective, with one restart from the
/// first optimum. `step` sets the initial simplex edge per coordinate.
SimplexResult nelder_mead(const std::function<double(const std::vector<double>&)>& f, std::vector<double> x0,
                          std::vector<double> step, int max_iterations = 20000, double tol = 1e-12);

// ---------------------------------------------------------------------------
// Spectrum fitting

struct FitOptions {
  /// Restrict the heating-peak fit to positive detunings.
  bool heating_side_only = true;
  int max_iterations = 20000;
  /// Confidence level on the Delta chi^2 scale (1 = one sigma).
  double delta_chi2 = 1.0;
  int profile_grid_points = 400;
};

/// Variance of one spectrum point for weighting. With shots > 0 this is the
/// binomial variance of `model` (or of the observed value when model < 0),
/// floored at the Agresti-Coull variance of a zero-count point. Points with
/// shots = 0 are exact and get unit weight.
double point_variance(const SpectrumPoint& p, double model = -1.0);

struct GaussianPeak {
  double height = 0.0;
  double center_hz = 0.0;
  double width_hz = 0.0;
  double offset = 0.0;
  Eigen::Matrix4d covariance = Eigen::Matrix4d::Zero();  // (height, center, width, offset)
  double chi2 = 0.0;
  int dof = 0;
  int iterations = 0;
};

GaussianPeak fit_heating_sideband(std::span<const SpectrumPoint> points, const FitOptions& opt = {});

struct DoubleGaussianFit {
  double blue_height = 0.0;
  double red_height = 0.0;
  double center_hz = 0.0;  // blue at +center, red at -center
  double width_hz = 0.0;
  double offset = 0.0;
  Eigen::Matrix<double, 5, 5> covariance = Eigen::Matrix<double, 5, 5>::Zero();  // (a_b, a_r, mu, sigma, d)
  double chi2 = 0.0;
  int dof = 0;

  double ground_state_fraction() const { return 1.0 - red_height / blue_height; }
  double wrong_state_fraction() const { return offset; }
};

double double_gaussian(double x, double blue, double red, double center, double width, double offset);

DoubleGaussianFit fit_double_gaussian_with_offset(std::span<const SpectrumPoint> points, const FitOptions& opt = {});

struct ProfileInterval {
  double estimate = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  bool one_sided = false;          // lower bound clipped at 0
  bool unbounded_above = false;    // Delta chi^2 never reached the level below 1
  double chi2_min = 0.0;
  std::vector<double> grid;        // scanned a1 values
  std::vector<double> delta_chi2;  // profile curve on the grid
};

/// Profile likelihood of the cooling-peak height a1 with the heating peak's
/// shape fixed; the offset is re-optimized in closed form at each a1.
ProfileInterval profile_likelihood_cooling_peak(std::span<const SpectrumPoint> points, const GaussianPeak& blue,
                                                const FitOptions& opt = {});

enum class TemperatureMethod { LeastSquares, ProfileLikelihood };
const char* to_string(TemperatureMethod m);

struct TemperatureEstimate {
  double nbar = 0.0;
  double nbar_lower = 0.0;
  double nbar_upper = 0.0;
  double ratio = 0.0;
  double ratio_lower = 0.0;
  double ratio_upper = 0.0;
  bool one_sided = false;
  bool unbounded_above = false;
  TemperatureMethod method = TemperatureMethod::ProfileLikelihood;
};

double nbar_from_ratio(double r);
double ratio_from_nbar(double nbar);

/// Maps a profile interval on a1 through r = a1 / a_blue and nbar = r / (1 - r).
TemperatureEstimate temperature_from_profile(const ProfileInterval& a1, double blue_height);
/// Delta-method estimate from the double-Gaussian fit covariance.
TemperatureEstimate temperature_from_fit(const DoubleGaussianFit& fit);

/// r^{3/2} (1 - t12): the overestimation of the ground-state fraction when
/// 1 - r is read off a one-quantum-removed distribution as if it were thermal.
double nonthermal_correction(double r_est, double t12);

// ---------------------------------------------------------------------------
// Detection

struct DetectionResult {
  double threshold = 0.0;
  double F = 0.0;
  double F1 = 0.0;
  double F0 = 0.0;
  double P1 = 0.5;
  int n_cyc = 1;
  bool bright_above = true;
  std::vector<std::string> warnings;
};

/// Empirical threshold sweep over sample midpoints. Orientation is taken
/// from the class means; ties go to the lower threshold.
DetectionResult optimize_threshold(std::span<const double> present, std::span<const double> absent, double P1,
                                   int n_cyc = 1);

struct NormalMixture {
  std::vector<double> weights;
  std::vector<double> means;
  std::vector<double> stds;

  double pdf(double x) const;
  double cdf(double x) const;
  double mean() const;
};

/// Analytic mode: the optimum sits on a crossing of P1 f_present and
/// (1 - P1) f_absent, or at a classify-all endpoint.
DetectionResult optimize_threshold(const NormalMixture& present, const NormalMixture& absent, double P1, int n_cyc = 1);

/// Probability that a CNOT leaves the ancilla dark although the data atom is
/// present: a Z error on the ancilla, or loss of either atom.
double cnot_flip_error(const GateErrorSpec& gates);

/// Single-round signal models for data present and absent.
NormalMixture present_signal_model(const ImagingSpec& imaging, double flip_error);
NormalMixture absent_signal_model(const ImagingSpec& imaging);

/// Solves for bright_mean so the threshold-optimized single-round fidelity at
/// prior P1 equals `target`.
ImagingSpec calibrate_imaging(const ImagingSpec& base, double target, double flip_error = 0.0, double P1 = 0.5);

enum class AggregationMode { Sum, LikelihoodRatio };

/// Per-shot aggregate of the first n rounds.
std::vector<double> aggregate_signals(std::span<const ShotRecord> records, int n, AggregationMode mode = AggregationMode::Sum,
                                      const ImagingSpec& imaging = {}, double flip_error = 0.0);
double aggregate_signal(std::span<const double> rounds, int n, AggregationMode mode = AggregationMode::Sum,
                        const ImagingSpec& imaging = {}, double flip_error = 0.0);

/// One DetectionResult per (P1, n) pair, rounds from present and absent records.
std::vector<DetectionResult> detection_table(std::span<const ShotRecord> records, const std::vector<double>& priors,
                                             const std::vector<int>& n_cyc, AggregationMode mode = AggregationMode::Sum,
                                             const ImagingSpec& imaging = {}, double flip_error = 0.0);

struct MixtureWeight {
  double weight = 0.0;
  double std_error = 0.0;
  int iterations = 0;
};

/// Maximum-likelihood weight of the dark component in a two-normal mixture
/// with the shapes of `imaging` held fixed.
MixtureWeight estimate_dark_weight(std::span<const double> signals, const ImagingSpec& imaging);

struct SineFit {
  double offset = 0.0;
  double amplitude = 0.0;  // >= 0
  double phase = 0.0;      // p = offset + amplitude cos(phi - phase)
  double offset_error = 0.0;
  double amplitude_error = 0.0;
  double chi2 = 0.0;
};

SineFit fit_sinusoid(std::span<const double> phases, std::span<const double> values,
                     std::span<const double> std_errors = {});

}  // namespace tweezersim

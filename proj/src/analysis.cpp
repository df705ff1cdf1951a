#include "tweezersim/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "tweezersim/errors.hpp"

namespace tweezersim {

namespace {

constexpr double kZ = 1.0;  // Agresti-Coull z for the variance floor

double normal_pdf(double x, double mean, double sd) {
  const double z = (x - mean) / sd;
  return std::exp(-0.5 * z * z) / (sd * std::sqrt(2.0 * constants::pi));
}

double normal_cdf(double x, double mean, double sd) { return 0.5 * std::erfc(-(x - mean) / (sd * std::sqrt(2.0))); }

double gauss(double x, double center, double width) {
  const double z = (x - center) / width;
  return std::exp(-0.5 * z * z);
}

double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

double min_spacing(std::span<const SpectrumPoint> pts) {
  std::vector<double> x;
  for (const auto& p : pts) x.push_back(p.detuning_hz);
  std::sort(x.begin(), x.end());
  double s = std::numeric_limits<double>::infinity();
  for (std::size_t i = 1; i < x.size(); ++i)
    if (x[i] > x[i - 1]) s = std::min(s, x[i] - x[i - 1]);
  return s;
}

// Central-difference Hessian of f at x with per-coordinate steps h.
Eigen::MatrixXd hessian(const std::function<double(const std::vector<double>&)>& f, const std::vector<double>& x,
                        const std::vector<double>& h) {
  const std::size_t n = x.size();
  Eigen::MatrixXd H(n, n);
  const double f0 = f(x);
  for (std::size_t i = 0; i < n; ++i) {
    auto xp = x, xm = x;
    xp[i] += h[i];
    xm[i] -= h[i];
    H(i, i) = (f(xp) - 2.0 * f0 + f(xm)) / (h[i] * h[i]);
    for (std::size_t j = i + 1; j < n; ++j) {
      auto a = x, b = x, c = x, d = x;
      a[i] += h[i], a[j] += h[j];
      b[i] += h[i], b[j] -= h[j];
      c[i] -= h[i], c[j] += h[j];
      d[i] -= h[i], d[j] -= h[j];
      H(i, j) = H(j, i) = (f(a) - f(b) - f(c) + f(d)) / (4.0 * h[i] * h[j]);
    }
  }
  return H;
}

// Covariance of least-squares parameters: 2 H^{-1} of chi^2.
Eigen::MatrixXd covariance_from_chi2(const std::function<double(const std::vector<double>&)>& chi2,
                                     const std::vector<double>& x, const std::vector<double>& h) {
  const Eigen::MatrixXd H = hessian(chi2, x, h);
  Eigen::LDLT<Eigen::MatrixXd> ldlt(H);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive())
    throw ConvergenceError("chi^2 Hessian is not positive definite at the optimum");
  return 2.0 * ldlt.solve(Eigen::MatrixXd::Identity(H.rows(), H.cols()));
}

struct Moments {
  double height, center, width, offset;
};

Moments peak_moments(std::span<const SpectrumPoint> pts) {
  std::vector<double> y;
  for (const auto& p : pts) y.push_back(p.p_exc);
  std::vector<double> sorted = y;
  std::sort(sorted.begin(), sorted.end());
  const std::size_t q = std::max<std::size_t>(1, sorted.size() / 4);
  const double base = std::accumulate(sorted.begin(), sorted.begin() + static_cast<long>(q), 0.0) / double(q);
  double w = 0.0, m1 = 0.0;
  for (const auto& p : pts) {
    const double e = std::max(0.0, p.p_exc - base);
    w += e;
    m1 += e * p.detuning_hz;
  }
  const double top = sorted.back() - base;
  if (!(w > 0.0) || !(top > 0.0)) throw DegenerateFitError("spectrum is flat; no peak to fit");
  const double center = m1 / w;
  double m2 = 0.0;
  for (const auto& p : pts) m2 += std::max(0.0, p.p_exc - base) * std::pow(p.detuning_hz - center, 2);
  double width = std::sqrt(m2 / w);
  if (!(width > 0.0)) width = min_spacing(pts);
  return {top, center, width, base};
}

void require_points(std::span<const SpectrumPoint> pts, std::size_t n, const char* what) {
  if (pts.size() < n) throw DegenerateFitError(std::string(what) + ": need at least " + std::to_string(n) + " points");
  for (const auto& p : pts)
    if (!std::isfinite(p.detuning_hz) || !std::isfinite(p.p_exc))
      throw ConfigError("spectrum", "non-finite spectrum point");
}

}  // namespace

// ---------------------------------------------------------------------------

SimplexResult nelder_mead(const std::function<double(const std::vector<double>&)>& f, std::vector<double> x0,
                          std::vector<double> step, int max_iterations, double tol) {
  const std::size_t n = x0.size();
  if (step.size() != n) throw ConfigError("nelder_mead", "step size does not match the parameter count");
  SimplexResult out;
  for (int restart = 0; restart < 2; ++restart) {
    std::vector<std::vector<double>> s(n + 1, x0);
    for (std::size_t i = 0; i < n; ++i) s[i + 1][i] += step[i];
    std::vector<double> fv(n + 1);
    for (std::size_t i = 0; i <= n; ++i) fv[i] = f(s[i]);
    std::vector<std::size_t> idx(n + 1);
    bool converged = false;
    int it = 0;
    for (; it < max_iterations; ++it) {
      std::iota(idx.begin(), idx.end(), 0);
      std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return fv[a] < fv[b]; });
      const std::size_t best = idx.front(), worst = idx.back(), second = idx[n - 1];
      if (std::abs(fv[worst] - fv[best]) <= tol * (std::abs(fv[best]) + tol)) {
        converged = true;
        break;
      }
      std::vector<double> c(n, 0.0);
      for (std::size_t k = 0; k < n; ++k)
        for (std::size_t i = 0; i < n; ++i) c[i] += s[idx[k]][i] / double(n);
      auto along = [&](double t) {
        std::vector<double> p(n);
        for (std::size_t i = 0; i < n; ++i) p[i] = c[i] + t * (s[worst][i] - c[i]);
        return p;
      };
      auto xr = along(-1.0);
      const double fr = f(xr);
      if (fr < fv[best]) {
        auto xe = along(-2.0);
        const double fe = f(xe);
        if (fe < fr) {
          s[worst] = xe, fv[worst] = fe;
        } else {
          s[worst] = xr, fv[worst] = fr;
        }
      } else if (fr < fv[second]) {
        s[worst] = xr, fv[worst] = fr;
      } else {
        const bool outside = fr < fv[worst];
        auto xc = along(outside ? -0.5 : 0.5);
        const double fc = f(xc);
        if (fc < (outside ? fr : fv[worst])) {
          s[worst] = xc, fv[worst] = fc;
        } else {
          for (std::size_t k = 1; k <= n; ++k) {
            auto& p = s[idx[k]];
            for (std::size_t i = 0; i < n; ++i) p[i] = s[best][i] + 0.5 * (p[i] - s[best][i]);
            fv[idx[k]] = f(p);
          }
        }
      }
    }
    const auto b = static_cast<std::size_t>(std::min_element(fv.begin(), fv.end()) - fv.begin());
    out.x = s[b];
    out.value = fv[b];
    out.iterations += it;
    out.converged = converged;
    x0 = out.x;
    for (std::size_t i = 0; i < n; ++i) step[i] *= 0.1;
  }
  return out;
}

// ---------------------------------------------------------------------------

double point_variance(const SpectrumPoint& p, double model) {
  if (p.shots == 0) return 1.0;
  const double N = double(p.shots);
  const double p0 = (kZ * kZ / 2.0) / (N + kZ * kZ);
  const double floor = p0 * (1.0 - p0) / (N + kZ * kZ);
  if (model < 0.0) {
    const double pt = (p.p_exc * N + kZ * kZ / 2.0) / (N + kZ * kZ);
    return std::max(floor, pt * (1.0 - pt) / (N + kZ * kZ));
  }
  const double m = clamp01(model);
  return std::max(floor, m * (1.0 - m) / N);
}

GaussianPeak fit_heating_sideband(std::span<const SpectrumPoint> points, const FitOptions& opt) {
  std::vector<SpectrumPoint> sel;
  for (const auto& p : points)
    if (!opt.heating_side_only || p.detuning_hz > 0.0) sel.push_back(p);
  require_points(sel, 5, "heating sideband fit");
  const Moments m0 = peak_moments(sel);

  auto model = [](const std::vector<double>& q, double x) {
    return clamp01(q[3]) + std::abs(q[0]) * gauss(x, q[1], std::abs(q[2]));
  };
  std::vector<double> var(sel.size());
  for (std::size_t i = 0; i < sel.size(); ++i) var[i] = point_variance(sel[i]);
  auto chi2 = [&](const std::vector<double>& q) {
    double c = 0.0;
    for (std::size_t i = 0; i < sel.size(); ++i) c += std::pow(sel[i].p_exc - model(q, sel[i].detuning_hz), 2) / var[i];
    return c;
  };

  std::vector<double> q{m0.height, m0.center, m0.width, m0.offset};
  const std::vector<double> step{0.1 * m0.height, 0.2 * m0.width, 0.2 * m0.width, 0.05};
  SimplexResult r;
  int iterations = 0;
  for (int pass = 0; pass < 2; ++pass) {
    r = nelder_mead(chi2, q, step, opt.max_iterations);
    iterations += r.iterations;
    q = r.x;
    for (std::size_t i = 0; i < sel.size(); ++i) var[i] = point_variance(sel[i], model(q, sel[i].detuning_hz));
  }
  r = nelder_mead(chi2, q, step, opt.max_iterations);
  iterations += r.iterations;
  if (!r.converged) throw ConvergenceError("heating sideband fit did not converge");
  q = r.x;
  q[0] = std::abs(q[0]);
  q[2] = std::abs(q[2]);
  q[3] = clamp01(q[3]);
  if (q[2] < 0.5 * min_spacing(sel)) throw DegenerateFitError("fitted width is below the grid spacing");

  GaussianPeak g;
  g.height = q[0];
  g.center_hz = q[1];
  g.width_hz = q[2];
  g.offset = q[3];
  g.chi2 = r.value;
  g.dof = static_cast<int>(sel.size()) - 4;
  g.iterations = iterations;
  const std::vector<double> h{1e-4 * std::max(q[0], 1e-3), 1e-4 * q[2], 1e-4 * q[2], 1e-5};
  auto chi2_free = [&](const std::vector<double>& p) {
    double c = 0.0;
    for (std::size_t i = 0; i < sel.size(); ++i) {
      const double mdl = p[3] + p[0] * gauss(sel[i].detuning_hz, p[1], p[2]);
      c += std::pow(sel[i].p_exc - mdl, 2) / var[i];
    }
    return c;
  };
  g.covariance = covariance_from_chi2(chi2_free, q, h);
  return g;
}

double double_gaussian(double x, double blue, double red, double center, double width, double offset) {
  return offset + blue * gauss(x, center, width) + red * gauss(x, -center, width);
}

DoubleGaussianFit fit_double_gaussian_with_offset(std::span<const SpectrumPoint> points, const FitOptions& opt) {
  require_points(points, 6, "double Gaussian fit");
  FitOptions blue_opt = opt;
  blue_opt.heating_side_only = true;
  const GaussianPeak b = fit_heating_sideband(points, blue_opt);

  // Red height guess from the point nearest -center.
  double red0 = 0.0, best = std::numeric_limits<double>::infinity();
  for (const auto& p : points)
    if (std::abs(p.detuning_hz + b.center_hz) < best) {
      best = std::abs(p.detuning_hz + b.center_hz);
      red0 = std::max(0.0, p.p_exc - b.offset);
    }

  auto model = [](const std::vector<double>& q, double x) {
    return double_gaussian(x, std::abs(q[0]), std::abs(q[1]), q[2], std::abs(q[3]), clamp01(q[4]));
  };
  std::vector<double> var(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) var[i] = point_variance(points[i]);
  auto chi2 = [&](const std::vector<double>& q) {
    double c = 0.0;
    for (std::size_t i = 0; i < points.size(); ++i)
      c += std::pow(points[i].p_exc - model(q, points[i].detuning_hz), 2) / var[i];
    return c;
  };
  std::vector<double> q{b.height, red0, b.center_hz, b.width_hz, b.offset};
  const std::vector<double> step{0.05 * b.height, 0.05 * b.height, 0.1 * b.width_hz, 0.1 * b.width_hz, 0.02};
  SimplexResult r;
  for (int pass = 0; pass < 2; ++pass) {
    r = nelder_mead(chi2, q, step, opt.max_iterations);
    q = r.x;
    for (std::size_t i = 0; i < points.size(); ++i) var[i] = point_variance(points[i], model(q, points[i].detuning_hz));
  }
  r = nelder_mead(chi2, q, step, opt.max_iterations);
  if (!r.converged) throw ConvergenceError("double Gaussian fit did not converge");
  q = r.x;
  q[0] = std::abs(q[0]);
  q[1] = std::abs(q[1]);
  q[3] = std::abs(q[3]);
  q[4] = clamp01(q[4]);
  if (!(q[0] > 0.0)) throw DegenerateFitError("heating peak height is zero");

  DoubleGaussianFit fit;
  fit.blue_height = q[0];
  fit.red_height = q[1];
  fit.center_hz = q[2];
  fit.width_hz = q[3];
  fit.offset = q[4];
  fit.chi2 = r.value;
  fit.dof = static_cast<int>(points.size()) - 5;
  auto chi2_free = [&](const std::vector<double>& p) {
    double c = 0.0;
    for (std::size_t i = 0; i < points.size(); ++i)
      c += std::pow(points[i].p_exc - double_gaussian(points[i].detuning_hz, p[0], p[1], p[2], p[3], p[4]), 2) / var[i];
    return c;
  };
  const double hs = 1e-4 * std::max(q[0], 1e-3);
  fit.covariance = covariance_from_chi2(chi2_free, q, {hs, hs, 1e-4 * q[3], 1e-4 * q[3], 1e-5});
  return fit;
}

// ---------------------------------------------------------------------------

ProfileInterval profile_likelihood_cooling_peak(std::span<const SpectrumPoint> points, const GaussianPeak& blue,
                                                const FitOptions& opt) {
  require_points(points, 3, "cooling peak profile");
  if (!(blue.width_hz > 0.0) || !(blue.height > 0.0)) throw ConfigError("blue", "heating peak fit is degenerate");
  if (opt.profile_grid_points < 10) throw ConfigError("profile_grid_points", "must be at least 10");
  const std::size_t n = points.size();
  std::vector<double> y(n), gr(n), w(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double x = points[i].detuning_hz;
    y[i] = points[i].p_exc - blue.height * gauss(x, blue.center_hz, blue.width_hz);
    gr[i] = gauss(x, -blue.center_hz, blue.width_hz);
    w[i] = 1.0 / point_variance(points[i]);
  }

  // Weighted linear fit of y = a1 gr + d; returns (a1, stderr of a1).
  auto linear = [&] {
    double sw = 0, sg = 0, sy = 0, sgg = 0, sgy = 0;
    for (std::size_t i = 0; i < n; ++i) {
      sw += w[i], sg += w[i] * gr[i], sy += w[i] * y[i];
      sgg += w[i] * gr[i] * gr[i], sgy += w[i] * gr[i] * y[i];
    }
    const double det = sw * sgg - sg * sg;
    if (!(det > 0.0)) throw DegenerateFitError("cooling peak is not constrained by the sampled detunings");
    return std::pair{(sw * sgy - sg * sy) / det, std::sqrt(sw / det)};
  };
  auto [a_hat, a_se] = linear();
  // Second pass: binomial weights from the model at the first estimate.
  {
    double sw = 0, sr = 0;
    for (std::size_t i = 0; i < n; ++i) sw += w[i], sr += w[i] * (y[i] - std::max(a_hat, 0.0) * gr[i]);
    const double d = sr / sw;
    for (std::size_t i = 0; i < n; ++i) {
      const double model = points[i].p_exc - y[i] + std::max(a_hat, 0.0) * gr[i] + d;
      w[i] = 1.0 / point_variance(points[i], model);
    }
    std::tie(a_hat, a_se) = linear();
  }

  auto chi2 = [&](double a1) {
    double sw = 0, sr = 0;
    for (std::size_t i = 0; i < n; ++i) sw += w[i], sr += w[i] * (y[i] - a1 * gr[i]);
    const double d = sr / sw;
    double c = 0;
    for (std::size_t i = 0; i < n; ++i) c += w[i] * std::pow(y[i] - a1 * gr[i] - d, 2);
    return c;
  };

  ProfileInterval out;
  const double hi = std::min(1.0, 3.0 * std::max(a_hat, 0.0) + 5.0 * a_se);
  const int G = opt.profile_grid_points;
  out.grid.resize(static_cast<std::size_t>(G));
  std::vector<double> c(static_cast<std::size_t>(G));
  std::size_t kmin = 0;
  for (int k = 0; k < G; ++k) {
    out.grid[k] = hi * k / (G - 1);
    c[k] = chi2(out.grid[k]);
    if (c[k] < c[kmin]) kmin = k;
  }
  // Golden-section refinement of the minimum between the neighbours of kmin.
  double lo_b = out.grid[kmin == 0 ? 0 : kmin - 1], hi_b = out.grid[std::min<std::size_t>(kmin + 1, G - 1)];
  const double gr_ratio = (std::sqrt(5.0) - 1.0) / 2.0;
  for (int it = 0; it < 200 && hi_b - lo_b > 1e-12 * std::max(hi, 1e-300); ++it) {
    const double a = hi_b - gr_ratio * (hi_b - lo_b), b = lo_b + gr_ratio * (hi_b - lo_b);
    if (chi2(a) < chi2(b))
      hi_b = b;
    else
      lo_b = a;
  }
  out.estimate = 0.5 * (lo_b + hi_b);
  if (chi2(0.0) <= chi2(out.estimate)) out.estimate = 0.0;
  out.chi2_min = chi2(out.estimate);
  out.delta_chi2.resize(c.size());
  for (std::size_t k = 0; k < c.size(); ++k) out.delta_chi2[k] = c[k] - out.chi2_min;

  const double level = opt.delta_chi2;
  const double tol = 1e-4 * std::max(hi, 1e-12);
  auto bisect = [&](double inside, double outside) {
    while (std::abs(outside - inside) > tol) {
      const double mid = 0.5 * (inside + outside);
      if (chi2(mid) - out.chi2_min <= level)
        inside = mid;
      else
        outside = mid;
    }
    return 0.5 * (inside + outside);
  };

  out.unbounded_above = true;
  out.upper = hi;
  for (std::size_t k = 0; k < c.size(); ++k)
    if (out.grid[k] > out.estimate && out.delta_chi2[k] > level) {
      out.upper = bisect(std::max(out.estimate, out.grid[k - 1]), out.grid[k]);
      out.unbounded_above = false;
      break;
    }
  if (chi2(0.0) - out.chi2_min <= level) {
    out.lower = 0.0;
    out.one_sided = true;
  } else {
    for (std::size_t k = c.size(); k-- > 0;)
      if (out.grid[k] < out.estimate && out.delta_chi2[k] > level) {
        out.lower = bisect(std::min(out.estimate, out.grid[k + 1]), out.grid[k]);
        break;
      }
  }
  return out;
}

const char* to_string(TemperatureMethod m) {
  return m == TemperatureMethod::LeastSquares ? "least_squares" : "profile_likelihood";
}

double nbar_from_ratio(double r) {
  if (!std::isfinite(r) || r < 0.0) throw NonThermalError("sideband ratio must be finite and non-negative");
  if (r >= 1.0) throw NonThermalError("sideband ratio >= 1 has no thermal interpretation");
  return r / (1.0 - r);
}

double ratio_from_nbar(double nbar) {
  if (!std::isfinite(nbar) || nbar < 0.0) throw ConfigError("nbar", "must be finite and non-negative");
  return nbar / (nbar + 1.0);
}

TemperatureEstimate temperature_from_profile(const ProfileInterval& a1, double blue_height) {
  if (!(blue_height > 0.0)) throw ConfigError("blue_height", "must be positive");
  TemperatureEstimate t;
  t.method = TemperatureMethod::ProfileLikelihood;
  t.ratio = a1.estimate / blue_height;
  t.ratio_lower = a1.lower / blue_height;
  t.ratio_upper = a1.upper / blue_height;
  t.nbar = nbar_from_ratio(t.ratio);
  t.nbar_lower = nbar_from_ratio(t.ratio_lower);
  t.one_sided = a1.one_sided;
  t.unbounded_above = a1.unbounded_above || t.ratio_upper >= 1.0;
  t.nbar_upper = t.ratio_upper >= 1.0 ? std::numeric_limits<double>::infinity() : nbar_from_ratio(t.ratio_upper);
  return t;
}

TemperatureEstimate temperature_from_fit(const DoubleGaussianFit& fit) {
  TemperatureEstimate t;
  t.method = TemperatureMethod::LeastSquares;
  const double ab = fit.blue_height, ar = fit.red_height;
  t.ratio = ar / ab;
  const auto& C = fit.covariance;
  const double var = C(1, 1) / (ab * ab) + ar * ar * C(0, 0) / std::pow(ab, 4) - 2.0 * ar * C(0, 1) / std::pow(ab, 3);
  const double se = std::sqrt(std::max(var, 0.0));
  t.ratio_lower = std::max(0.0, t.ratio - se);
  t.ratio_upper = t.ratio + se;
  t.one_sided = t.ratio - se <= 0.0;
  t.nbar = nbar_from_ratio(t.ratio);
  t.nbar_lower = nbar_from_ratio(t.ratio_lower);
  t.unbounded_above = t.ratio_upper >= 1.0;
  t.nbar_upper = t.unbounded_above ? std::numeric_limits<double>::infinity() : nbar_from_ratio(t.ratio_upper);
  return t;
}

double nonthermal_correction(double r_est, double t12) {
  if (!(r_est >= 0.0) || !std::isfinite(t12)) throw ConfigError("r", "must be non-negative");
  return std::pow(r_est, 1.5) * (1.0 - t12);
}

// ---------------------------------------------------------------------------

DetectionResult optimize_threshold(std::span<const double> present, std::span<const double> absent, double P1,
                                   int n_cyc) {
  if (present.empty() || absent.empty()) throw ConfigError("samples", "both classes need at least one sample");
  if (!(P1 >= 0.0 && P1 <= 1.0)) throw ConfigError("P1", "must lie in [0, 1]");
  const double mp = std::accumulate(present.begin(), present.end(), 0.0) / double(present.size());
  const double ma = std::accumulate(absent.begin(), absent.end(), 0.0) / double(absent.size());
  const bool above = mp >= ma;

  std::vector<std::pair<double, bool>> all;  // (value, is_present)
  all.reserve(present.size() + absent.size());
  for (double v : present) all.emplace_back(v, true);
  for (double v : absent) all.emplace_back(v, false);
  std::sort(all.begin(), all.end());
  const double Np = double(present.size()), Na = double(absent.size());

  // Counts at or below the running threshold.
  double p_below = 0, a_below = 0;
  auto score = [&](double& f1, double& f0) {
    f1 = above ? (Np - p_below) / Np : p_below / Np;
    f0 = above ? a_below / Na : (Na - a_below) / Na;
    return P1 * f1 + (1.0 - P1) * f0;
  };
  DetectionResult best;
  best.P1 = P1;
  best.n_cyc = n_cyc;
  best.bright_above = above;
  best.threshold = std::nextafter(all.front().first, -std::numeric_limits<double>::infinity());
  best.F = score(best.F1, best.F0);
  for (std::size_t i = 0; i < all.size();) {
    const double v = all[i].first;
    for (; i < all.size() && all[i].first == v; ++i) (all[i].second ? p_below : a_below) += 1.0;
    double f1, f0;
    const double F = score(f1, f0);
    if (F > best.F) {
      best.F = F, best.F1 = f1, best.F0 = f0;
      best.threshold =
          i < all.size() ? 0.5 * (v + all[i].first) : std::nextafter(v, std::numeric_limits<double>::infinity());
    }
  }
  if (present.size() < 100 || absent.size() < 100) best.warnings.push_back("fewer than 100 samples in a class");
  return best;
}

double NormalMixture::pdf(double x) const {
  double s = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) s += weights[i] * normal_pdf(x, means[i], stds[i]);
  return s;
}

double NormalMixture::cdf(double x) const {
  double s = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) s += weights[i] * normal_cdf(x, means[i], stds[i]);
  return s;
}

double NormalMixture::mean() const {
  double s = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) s += weights[i] * means[i];
  return s;
}

namespace {

void validate(const NormalMixture& m, const char* name) {
  if (m.weights.empty() || m.weights.size() != m.means.size() || m.weights.size() != m.stds.size())
    throw ConfigError(name, "mixture components are inconsistent");
  double w = 0;
  for (std::size_t i = 0; i < m.weights.size(); ++i) {
    if (!(m.weights[i] >= 0.0) || !(m.stds[i] > 0.0) || !std::isfinite(m.means[i]))
      throw ConfigError(name, "invalid mixture component");
    w += m.weights[i];
  }
  if (std::abs(w - 1.0) > 1e-9) throw ConfigError(name, "mixture weights must sum to 1");
}

}  // namespace

DetectionResult optimize_threshold(const NormalMixture& present, const NormalMixture& absent, double P1, int n_cyc) {
  validate(present, "present");
  validate(absent, "absent");
  if (!(P1 >= 0.0 && P1 <= 1.0)) throw ConfigError("P1", "must lie in [0, 1]");
  const bool above = present.mean() >= absent.mean();
  auto fid = [&](double t, double& f1, double& f0) {
    f1 = above ? 1.0 - present.cdf(t) : present.cdf(t);
    f0 = above ? absent.cdf(t) : 1.0 - absent.cdf(t);
    return P1 * f1 + (1.0 - P1) * f0;
  };
  auto g = [&](double t) { return (1.0 - P1) * absent.pdf(t) - P1 * present.pdf(t); };

  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (const auto* m : {&present, &absent})
    for (std::size_t i = 0; i < m->means.size(); ++i) {
      lo = std::min(lo, m->means[i] - 8.0 * m->stds[i]);
      hi = std::max(hi, m->means[i] + 8.0 * m->stds[i]);
    }

  DetectionResult best;
  best.P1 = P1;
  best.n_cyc = n_cyc;
  best.bright_above = above;
  // Classify-all endpoints.
  best.threshold = lo;
  best.F = fid(lo, best.F1, best.F0);
  {
    double f1, f0;
    const double F = fid(hi, f1, f0);
    if (F > best.F) best.F = F, best.F1 = f1, best.F0 = f0, best.threshold = hi;
  }
  const int steps = 20000;
  double prev_t = lo, prev_g = g(lo);
  for (int k = 1; k <= steps; ++k) {
    const double t = lo + (hi - lo) * k / steps;
    const double gt = g(t);
    if ((prev_g < 0) != (gt < 0) || gt == 0.0) {
      double a = prev_t, b = t, ga = prev_g;
      for (int it = 0; it < 200 && b - a > 1e-13 * std::max(1.0, std::abs(b)); ++it) {
        const double mid = 0.5 * (a + b);
        const double gm = g(mid);
        if ((gm < 0) == (ga < 0))
          a = mid, ga = gm;
        else
          b = mid;
      }
      const double root = 0.5 * (a + b);
      double f1, f0;
      const double F = fid(root, f1, f0);
      if (F > best.F + 1e-15) best.F = F, best.F1 = f1, best.F0 = f0, best.threshold = root;
    }
    prev_t = t, prev_g = gt;
  }
  return best;
}

double cnot_flip_error(const GateErrorSpec& gates) {
  validate(gates);
  return gates.cz_phase_error_prob / 2.0 + gates.cz_loss_prob;
}

NormalMixture present_signal_model(const ImagingSpec& im, double flip_error) {
  validate(im);
  if (!(flip_error >= 0.0 && flip_error <= 1.0)) throw ConfigError("flip_error", "must lie in [0, 1]");
  return {{1.0 - flip_error, flip_error}, {im.bright_mean, im.dark_mean}, {im.bright_std, im.dark_std}};
}

NormalMixture absent_signal_model(const ImagingSpec& im) {
  validate(im);
  return {{1.0}, {im.dark_mean}, {im.dark_std}};
}

ImagingSpec calibrate_imaging(const ImagingSpec& base, double target, double flip_error, double P1) {
  validate(base);
  auto F = [&](double b) {
    ImagingSpec s = base;
    s.bright_mean = b;
    return optimize_threshold(present_signal_model(s, flip_error), absent_signal_model(s), P1).F;
  };
  const double scale = std::max(base.bright_std, base.dark_std);
  double lo = base.dark_mean, hi = base.dark_mean + 40.0 * scale;
  if (!(target > F(lo)) || !(target < F(hi)))
    throw ConfigError("target_fidelity", "not reachable by adjusting the bright mean");
  while (hi - lo > 1e-13 * scale) {
    const double mid = 0.5 * (lo + hi);
    (F(mid) < target ? lo : hi) = mid;
  }
  ImagingSpec out = base;
  out.bright_mean = 0.5 * (lo + hi);
  return out;
}

double aggregate_signal(std::span<const double> rounds, int n, AggregationMode mode, const ImagingSpec& imaging,
                        double flip_error) {
  if (n < 1 || static_cast<std::size_t>(n) > rounds.size())
    throw ConfigError("n_cyc", "must lie in [1, rounds recorded]");
  double s = 0.0;
  if (mode == AggregationMode::Sum) {
    for (int k = 0; k < n; ++k) s += rounds[k];
    return s;
  }
  const double e = present_signal_model(imaging, flip_error).weights[1];
  for (int k = 0; k < n; ++k) {
    // log of ((1-e) N_b + e N_d) / N_d, kept finite on both tails.
    const double zb = (rounds[k] - imaging.bright_mean) / imaging.bright_std;
    const double zd = (rounds[k] - imaging.dark_mean) / imaging.dark_std;
    const double lb = std::log1p(-e) - 0.5 * zb * zb + 0.5 * zd * zd + std::log(imaging.dark_std / imaging.bright_std);
    const double ld = e > 0.0 ? std::log(e) : -std::numeric_limits<double>::infinity();
    const double m = std::max(lb, ld);
    s += m + std::log1p(std::exp(std::min(lb, ld) - m));
  }
  return s;
}

std::vector<double> aggregate_signals(std::span<const ShotRecord> records, int n, AggregationMode mode,
                                      const ImagingSpec& imaging, double flip_error) {
  std::vector<double> out;
  out.reserve(records.size());
  std::vector<double> buf;
  for (const auto& r : records) {
    buf.clear();
    for (const auto& rr : r.rounds) buf.push_back(rr.signal);
    out.push_back(aggregate_signal(buf, n, mode, imaging, flip_error));
  }
  return out;
}

std::vector<DetectionResult> detection_table(std::span<const ShotRecord> records, const std::vector<double>& priors,
                                             const std::vector<int>& n_cyc, AggregationMode mode,
                                             const ImagingSpec& imaging, double flip_error) {
  std::vector<ShotRecord> present, absent;
  for (const auto& r : records) (r.scenario == Scenario::Present ? present : absent).push_back(r);
  std::vector<DetectionResult> out;
  for (int n : n_cyc) {
    const auto sp = aggregate_signals(present, n, mode, imaging, flip_error);
    const auto sa = aggregate_signals(absent, n, mode, imaging, flip_error);
    for (double P1 : priors) out.push_back(optimize_threshold(sp, sa, P1, n));
  }
  return out;
}

MixtureWeight estimate_dark_weight(std::span<const double> signals, const ImagingSpec& im) {
  validate(im);
  if (signals.empty()) throw ConfigError("signals", "no samples");
  std::vector<double> fd(signals.size()), fb(signals.size());
  for (std::size_t i = 0; i < signals.size(); ++i) {
    fd[i] = normal_pdf(signals[i], im.dark_mean, im.dark_std);
    fb[i] = normal_pdf(signals[i], im.bright_mean, im.bright_std);
  }
  MixtureWeight out;
  double w = 0.5;
  for (int it = 0; it < 100000; ++it) {
    double s = 0;
    for (std::size_t i = 0; i < signals.size(); ++i) {
      const double den = w * fd[i] + (1.0 - w) * fb[i];
      if (den > 0) s += w * fd[i] / den;
    }
    const double next = s / double(signals.size());
    out.iterations = it + 1;
    const bool done = std::abs(next - w) < 1e-12;
    w = next;
    if (done) break;
  }
  double info = 0;
  for (std::size_t i = 0; i < signals.size(); ++i) {
    const double den = w * fd[i] + (1.0 - w) * fb[i];
    if (den > 0) info += std::pow((fd[i] - fb[i]) / den, 2);
  }
  out.weight = w;
  out.std_error = info > 0 ? 1.0 / std::sqrt(info) : std::numeric_limits<double>::infinity();
  return out;
}

SineFit fit_sinusoid(std::span<const double> phases, std::span<const double> values, std::span<const double> std_errors) {
  const std::size_t n = phases.size();
  if (n < 3 || values.size() != n) throw ConfigError("fringe", "need at least 3 matching phase/value pairs");
  if (!std_errors.empty() && std_errors.size() != n) throw ConfigError("std_errors", "length mismatch");
  Eigen::MatrixXd A(n, 3);
  Eigen::VectorXd y(n), w(n);
  for (std::size_t i = 0; i < n; ++i) {
    A(i, 0) = 1.0;
    A(i, 1) = std::cos(phases[i]);
    A(i, 2) = std::sin(phases[i]);
    y(i) = values[i];
    w(i) = std_errors.empty() ? 1.0 : 1.0 / std::max(std_errors[i] * std_errors[i], 1e-300);
  }
  const Eigen::MatrixXd AtWA = A.transpose() * w.asDiagonal() * A;
  Eigen::LDLT<Eigen::MatrixXd> ldlt(AtWA);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive() || std::abs(AtWA.determinant()) < 1e-12)
    throw DegenerateFitError("phases do not constrain a sinusoid");
  const Eigen::Vector3d beta = ldlt.solve(A.transpose() * w.asDiagonal() * y);
  Eigen::Matrix3d cov = ldlt.solve(Eigen::MatrixXd::Identity(3, 3));
  const Eigen::VectorXd res = y - A * beta;
  SineFit f;
  f.chi2 = res.dot(w.asDiagonal() * res);
  if (std_errors.empty() && n > 3) cov *= f.chi2 / double(n - 3);
  f.offset = beta(0);
  f.amplitude = std::hypot(beta(1), beta(2));
  f.phase = std::atan2(beta(2), beta(1));
  f.offset_error = std::sqrt(cov(0, 0));
  if (f.amplitude > 0) {
    const double c = beta(1) / f.amplitude, s = beta(2) / f.amplitude;
    f.amplitude_error = std::sqrt(std::max(0.0, c * c * cov(1, 1) + s * s * cov(2, 2) + 2 * c * s * cov(1, 2)));
  }
  return f;
}

}  // namespace tweezersim

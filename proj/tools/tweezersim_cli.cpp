#include <chrono>
#include <cstdio>
#include <iostream>
#include <thread>

#include <CLI11.hpp>

#include "tweezersim/analysis.hpp"
#include "tweezersim/config.hpp"
#include "tweezersim/core_state.hpp"
#include "tweezersim/errors.hpp"
#include "tweezersim/protocols.hpp"
#include "tweezersim/report.hpp"
#include "tweezersim/response.hpp"

using namespace tweezersim;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Options {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> threads;
  std::string out;
  bool dump_config = false;
};

struct Context {
  RunConfig config;
  RunReport report;
  fs::path out;
};

void emit(Context& ctx, const std::string& name, const std::function<void(std::ostream&)>& fn) {
  const fs::path p = ctx.out / name;
  write_file(p, fn);
  ctx.report.outputs.push_back(p.string());
}

double pi_time(const RunConfig& c) {
  return constants::pi / std::abs(sideband_rabi(0, 1, c.trap.eta, constants::two_pi * c.pulses.rabi_hz));
}

// Linear interpolation of a tabulated PSD, zero outside its support.
double psd_at(const SpectralDensity& s, double f) {
  const auto& x = s.frequency_hz;
  if (x.empty() || f < x.front() || f > x.back()) return 0.0;
  const auto it = std::upper_bound(x.begin(), x.end(), f);
  if (it == x.end()) return s.psd.back();
  const std::size_t k = static_cast<std::size_t>(it - x.begin());
  if (k == 0) return s.psd.front();
  const double u = (f - x[k - 1]) / (x[k] - x[k - 1]);
  return s.psd[k - 1] + u * (s.psd[k] - s.psd[k - 1]);
}

std::vector<ShotRecord> flatten(const std::vector<std::vector<ShotRecord>>& groups) {
  std::vector<ShotRecord> out;
  for (const auto& g : groups) out.insert(out.end(), g.begin(), g.end());
  return out;
}

void cooling_outputs(Context& ctx, const CoolingResult& r) {
  emit(ctx, "cooling.csv", [&](std::ostream& os) { write_cooling_csv(os, r.summaries); });
  json rows = json::array();
  for (const auto& s : r.summaries) rows.push_back(to_json(s));
  ctx.report.results["cooling"] = rows;
}

void simulate_readout(Context& ctx, unsigned threads) {
  const auto cfg = make_readout(ctx.config, threads);
  const auto r = run_repeated_readout(cfg);
  emit(ctx, "shots.csv", [&](std::ostream& os) { write_shot_csv(os, r.records); });
  const double flip = cnot_flip_error(cfg.gates);
  const auto& a = ctx.config.analysis;
  const auto table = detection_table(r.records, a.priors, a.n_cyc, a.aggregation, cfg.imaging, flip);
  emit(ctx, "detection.csv", [&](std::ostream& os) { write_detection_csv(os, table); });
  json rows = json::array();
  for (const auto& d : table) {
    rows.push_back(to_json(d));
    for (const auto& w : d.warnings) ctx.report.warnings.push_back(w);
  }
  ctx.report.results["detection"] = rows;
  ctx.report.results["imaging_bright_mean"] = cfg.imaging.bright_mean;
  ctx.report.results["cnot_flip_error"] = flip;
  ctx.report.results["records"] = r.records.size();
}

void simulate_loss_detection(Context& ctx, unsigned threads) {
  const auto cfg = make_loss_detection(ctx.config, threads);
  const auto r = run_loss_detection(cfg);
  emit(ctx, "shots.csv", [&](std::ostream& os) { write_shot_csv(os, r.records); });
  emit(ctx, "fringe.csv", [&](std::ostream& os) { write_fringe_csv(os, r.fringe); });
  auto& res = ctx.report.results;
  res["noise_scale"] = r.noise_scale;
  res["shelving_budget"] = to_json(r.shelving_budget);
  res["mean_shelving_transfer"] = json_number(r.mean_shelving_transfer);
  json fringe = json::array();
  std::vector<double> phases, values, errors;
  for (const auto& p : r.fringe) {
    fringe.push_back({{"phase_rad", p.phase}, {"shots", p.shots}, {"p_up", p.p_up}, {"stderr", p.std_error}});
    phases.push_back(p.phase);
    values.push_back(p.p_up);
    errors.push_back(p.std_error);
  }
  res["fringe"] = fringe;
  if (phases.size() >= 3) {
    try {
      const auto s = fit_sinusoid(phases, values, errors);
      res["fringe_fit"] = {{"offset", s.offset},
                           {"amplitude", s.amplitude},
                           {"phase_rad", s.phase},
                           {"offset_error", s.offset_error},
                           {"amplitude_error", s.amplitude_error},
                           {"chi2", s.chi2}};
    } catch (const NumericError& e) {
      ctx.report.warnings.push_back(std::string("fringe fit skipped: ") + e.what());
    }
  }
  for (const auto& w : r.shelving_budget.warnings) ctx.report.warnings.push_back(w);
}

void cmd_simulate(Context& ctx, unsigned threads) {
  switch (ctx.config.protocol.kind) {
    case ProtocolKind::Readout: simulate_readout(ctx, threads); break;
    case ProtocolKind::LossDetection: simulate_loss_detection(ctx, threads); break;
    case ProtocolKind::Cooling: {
      const auto r = run_algorithmic_cooling(make_cooling(ctx.config, threads));
      emit(ctx, "shots.csv", [&](std::ostream& os) { write_shot_csv(os, flatten(r.records)); });
      cooling_outputs(ctx, r);
      break;
    }
  }
  ctx.report.results["protocol"] = to_string(ctx.config.protocol.kind);
}

void cmd_cool(Context& ctx, unsigned threads) {
  cooling_outputs(ctx, run_algorithmic_cooling(make_cooling(ctx.config, threads)));
}

void cmd_response(Context& ctx) {
  const auto& rc = ctx.config.analysis.response;
  const auto q = make_response_query(ctx.config);
  ResponseFunction r = rc.method == ResponseMethod::ClosedForm ? response_closed_form(q) : response_numeric(q);

  double i0;
  if (q.channel == NoiseChannel::LaserAmplitude)
    i0 = response_amplitude_closed_form(0.0, q.eta, q.pulse_duration());
  else if (rc.method == ResponseMethod::ClosedForm)
    i0 = response_closed_form(0.0, q.eta, q.rabi);
  else
    i0 = response_numeric(0.0, q);
  r.frequency_hz.insert(r.frequency_hz.begin(), 0.0);
  r.values.insert(r.values.begin(), i0);

  const NoiseModel noise = make_noise(ctx.config);
  const auto* psd = std::get_if<SpectralDensity>(&noise[q.channel]);
  emit(ctx, "response.csv", [&](std::ostream& os) {
    if (!psd) {
      write_response_csv(os, r);
      return;
    }
    os << "frequency_hz,response_s2,psd_rad2_per_s2_per_hz,integrand\n";
    for (std::size_t i = 0; i < r.values.size(); ++i) {
      const double s = psd_at(*psd, r.frequency_hz[i]);
      os << format_double(r.frequency_hz[i]) << ',' << format_double(r.values[i]) << ',' << format_double(s) << ','
         << format_double(s * r.values[i]) << '\n';
    }
  });

  auto& res = ctx.report.results;
  res["channel"] = to_string(q.channel);
  res["method"] = rc.method == ResponseMethod::ClosedForm ? "closed_form" : "numeric";
  res["duration_s"] = q.pulse_duration();
  res["zero_frequency_response_s2"] = i0;
  if (psd) res["chi_on_response_grid"] = infidelity(*psd, r, &ctx.report.warnings);
  const auto budget = infidelity_budget(noise, q.eta, q.rabi, q.duration);
  res["budget"] = to_json(budget);
  for (const auto& w : budget.warnings) ctx.report.warnings.push_back(w);
}

void cmd_spectrum(Context& ctx) {
  const auto dist = make_spectrum_distribution(ctx.config);
  const auto s = simulate_sideband_spectrum(dist, make_spectrum(ctx.config));
  emit(ctx, "spectrum.csv", [&](std::ostream& os) { write_spectrum_csv(os, s.points); });
  const double nbar = ctx.config.analysis.spectrum.nbar;
  auto& res = ctx.report.results;
  res["side"] = to_string(s.side);
  res["duration_s"] = s.duration;
  res["input_nbar"] = nbar;
  res["input_ground_fraction"] = dist.empty() ? 0.0 : dist[0];
  res["cooled"] = ctx.config.analysis.spectrum.cooled;
  res["points"] = s.points.size();
}

void cmd_fit(Context& ctx) {
  const auto& fc = ctx.config.analysis.fit;
  if (!fc.spectrum_file) throw ConfigError("analysis.fit.spectrum_file", "required by the fit command");
  const auto points = read_spectrum_csv(*fc.spectrum_file);
  FitOptions opt;
  opt.delta_chi2 = fc.delta_chi2;
  opt.heating_side_only = fc.heating_side_only;

  auto& res = ctx.report.results;
  res["spectrum_file"] = fc.spectrum_file->string();
  res["weighting"] = "chi2 with Agresti-Coull variance floor, reweighted by the model";

  const auto blue = fit_heating_sideband(points, opt);
  res["heating_peak"] = to_json(blue);
  const auto profile = profile_likelihood_cooling_peak(points, blue, opt);
  emit(ctx, "profile.csv", [&](std::ostream& os) { write_profile_csv(os, profile); });
  res["cooling_peak_profile"] = to_json(profile);
  const auto pl = temperature_from_profile(profile, blue.height);
  res["temperature_profile"] = to_json(pl);
  if (profile.unbounded_above) ctx.report.warnings.push_back("profile interval is unbounded above");

  try {
    const auto ls = fit_double_gaussian_with_offset(points, opt);
    res["double_gaussian"] = to_json(ls);
    res["temperature_least_squares"] = to_json(temperature_from_fit(ls));
  } catch (const NumericError& e) {
    ctx.report.warnings.push_back(std::string("least-squares fit failed: ") + e.what());
  }

  const double t12 = detuned_rabi_transfer(
      sideband_rabi(1, 2, ctx.config.trap.eta, constants::two_pi * ctx.config.pulses.rabi_hz), 0.0, pi_time(ctx.config));
  res["one_minus_t12"] = 1.0 - t12;
  res["ground_fraction_estimate"] = 1.0 - pl.ratio;
  res["nonthermal_correction"] = nonthermal_correction(std::max(pl.ratio, 0.0), t12);
  res["nonthermal_correction_upper"] = nonthermal_correction(std::max(pl.ratio_upper, 0.0), t12);
}

void cmd_detect(Context& ctx) {
  const auto& c = ctx.config;
  if (!c.analysis.detect.shots_file) throw ConfigError("analysis.detect.shots_file", "required by the detect command");
  const auto records = read_shot_csv(*c.analysis.detect.shots_file);
  const ImagingSpec imaging = make_imaging(c);
  const double flip = cnot_flip_error(c.gates);
  const auto table = detection_table(records, c.analysis.priors, c.analysis.n_cyc, c.analysis.aggregation, imaging, flip);
  emit(ctx, "detection.csv", [&](std::ostream& os) { write_detection_csv(os, table); });
  json rows = json::array();
  for (const auto& d : table) {
    rows.push_back(to_json(d));
    for (const auto& w : d.warnings) ctx.report.warnings.push_back(w);
  }
  ctx.report.results["shots_file"] = c.analysis.detect.shots_file->string();
  ctx.report.results["records"] = records.size();
  ctx.report.results["detection"] = rows;
}

RunConfig resolve_config(const Options& o) {
  RunConfig c = o.config_path.empty() ? parse_config(json::object(), fs::current_path()) : load_config(o.config_path);
  if (o.seed) c.seed = *o.seed;
  if (!o.out.empty()) c.output.directory = o.out;
  return c;
}

int run(const std::string& command, const Options& o) {
  const auto start = std::chrono::steady_clock::now();
  Context ctx;
  ctx.config = resolve_config(o);
  const unsigned threads = o.threads.value_or(std::max(1u, std::thread::hardware_concurrency()));
  ctx.out = ctx.config.output.directory;
  ctx.report.command = command;
  ctx.report.config = to_json(ctx.config);
  ctx.report.seed = ctx.config.seed;
  ctx.report.threads = threads;

  if (command == "simulate") cmd_simulate(ctx, threads);
  else if (command == "cool") cmd_cool(ctx, threads);
  else if (command == "response") cmd_response(ctx);
  else if (command == "spectrum") cmd_spectrum(ctx);
  else if (command == "fit") cmd_fit(ctx);
  else if (command == "detect") cmd_detect(ctx);

  ctx.report.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  const fs::path report = ctx.out / (command + "_report.json");
  ctx.report.outputs.push_back(report.string());
  write_text(report, ctx.report.to_json().dump(2) + "\n");
  for (const auto& w : ctx.report.warnings) std::cerr << "warning: " << w << '\n';
  std::cout << report.string() << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Simulation and analysis of tweezer-array readout, loss detection and cooling"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(0, 1);
  app.fallthrough();

  Options o;
  app.add_option("--config", o.config_path, "JSON run configuration")->envname("TWEEZER_CONFIG");
  app.add_option("--seed", o.seed, "master seed (overrides the config)")->envname("TWEEZER_SEED");
  app.add_option("--threads", o.threads, "worker threads; outputs do not depend on it")
      ->envname("TWEEZER_THREADS")
      ->check(CLI::PositiveNumber);
  app.add_option("--out", o.out, "output directory (overrides the config)")->envname("TWEEZER_OUT");
  app.add_flag("--dump-config", o.dump_config, "print the resolved config with all defaults and exit");

  const std::vector<std::pair<std::string, std::string>> commands{
      {"simulate", "run the protocol selected by protocol.kind"},
      {"response", "pulse response function and infidelity budget"},
      {"spectrum", "sideband spectrum of a thermal or cooled motional state"},
      {"fit", "sideband thermometry fit of a spectrum CSV"},
      {"detect", "threshold optimization on a shot CSV"},
      {"cool", "algorithmic cooling sweep over initial temperatures"}};
  for (const auto& [name, help] : commands) app.add_subcommand(name, help);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (o.dump_config) {
      std::cout << to_json(resolve_config(o)).dump(2) << '\n';
      return 0;
    }
    const auto subs = app.get_subcommands();
    if (subs.empty()) {
      std::cerr << app.help();
      return 2;
    }
    return run(subs.front()->get_name(), o);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const NumericError& e) {
    std::cerr << "numeric error in module " << e.what() << '\n';
    return 3;
  } catch (const IoError& e) {
    std::cerr << "I/O error: " << e.what() << '\n';
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}

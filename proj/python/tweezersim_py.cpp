#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "tweezersim/analysis.hpp"
#include "tweezersim/config.hpp"
#include "tweezersim/core_state.hpp"
#include "tweezersim/errors.hpp"
#include "tweezersim/protocols.hpp"
#include "tweezersim/report.hpp"
#include "tweezersim/response.hpp"

namespace py = pybind11;
using namespace tweezersim;
using nlohmann::json;

namespace {

// Dicts cross the boundary as JSON text.
json from_py(const py::object& o) {
  return json::parse(py::module_::import("json").attr("dumps")(o).cast<std::string>());
}

py::object to_py(const json& j) { return py::module_::import("json").attr("loads")(j.dump()); }

RunConfig config_from(const py::object& o) {
  return o.is_none() ? parse_config(json::object()) : parse_config(from_py(o), std::filesystem::current_path());
}

py::object simulate(const py::object& config, unsigned threads) {
  const RunConfig c = config_from(config);
  json out;
  out["protocol"] = to_string(c.protocol.kind);
  switch (c.protocol.kind) {
    case ProtocolKind::Readout: {
      const auto cfg = make_readout(c, threads);
      const auto r = run_repeated_readout(cfg);
      json rows = json::array();
      for (const auto& d : detection_table(r.records, c.analysis.priors, c.analysis.n_cyc, c.analysis.aggregation,
                                           cfg.imaging, cnot_flip_error(cfg.gates)))
        rows.push_back(to_json(d));
      out["detection"] = rows;
      out["records"] = r.records.size();
      break;
    }
    case ProtocolKind::LossDetection: {
      const auto r = run_loss_detection(make_loss_detection(c, threads));
      json rows = json::array();
      for (const auto& p : r.fringe)
        rows.push_back({{"phase_rad", p.phase}, {"shots", p.shots}, {"p_up", p.p_up}, {"stderr", p.std_error}});
      out["fringe"] = rows;
      out["noise_scale"] = r.noise_scale;
      out["mean_shelving_transfer"] = json_number(r.mean_shelving_transfer);
      break;
    }
    case ProtocolKind::Cooling: {
      const auto r = run_algorithmic_cooling(make_cooling(c, threads));
      json rows = json::array();
      for (const auto& s : r.summaries) rows.push_back(to_json(s));
      out["cooling"] = rows;
      break;
    }
  }
  return to_py(out);
}

py::list spectrum(const py::object& config) {
  const RunConfig c = config_from(config);
  const auto s = simulate_sideband_spectrum(make_spectrum_distribution(c), make_spectrum(c));
  py::list rows;
  for (const auto& p : s.points) rows.append(py::make_tuple(p.detuning_hz, p.p_exc, p.std_error, p.shots));
  return rows;
}

py::object fit_spectrum(const std::vector<double>& detuning_hz, const std::vector<double>& p_exc,
                        const std::vector<std::size_t>& shots) {
  if (detuning_hz.size() != p_exc.size() || detuning_hz.size() != shots.size())
    throw ConfigError("points", "detuning, p_exc and shots differ in length");
  std::vector<SpectrumPoint> pts;
  for (std::size_t i = 0; i < detuning_hz.size(); ++i) {
    const double p = p_exc[i];
    const double n = static_cast<double>(shots[i]);
    pts.push_back({detuning_hz[i], p, n > 0 ? std::sqrt(p * (1.0 - p) / n) : 0.0, shots[i]});
  }
  const auto blue = fit_heating_sideband(pts);
  const auto profile = profile_likelihood_cooling_peak(pts, blue);
  json out;
  out["heating_peak"] = to_json(blue);
  out["cooling_peak_profile"] = to_json(profile);
  out["temperature"] = to_json(temperature_from_profile(profile, blue.height));
  return to_py(out);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Tweezer-array readout, loss detection and cooling simulation";
  m.attr("__version__") = kVersion;

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);
  py::register_exception<IoError>(m, "IoError", PyExc_OSError);

  m.def("response_closed_form", py::overload_cast<double, double, double>(&response_closed_form), py::arg("f_hz"),
        py::arg("eta"), py::arg("rabi"), "Pi-pulse response in s^2; rabi in rad/s.");
  m.def(
      "response_numeric",
      [](const std::vector<double>& f_hz, double eta, double rabi, const std::string& channel,
         std::optional<double> duration) {
        ResponseQuery q;
        q.eta = eta;
        q.rabi = rabi;
        q.frequency_hz = f_hz;
        q.channel = noise_channel_from_string(channel);
        q.duration = duration;
        return response_numeric(q).values;
      },
      py::arg("f_hz"), py::arg("eta"), py::arg("rabi"), py::arg("channel") = "trap_frequency",
      py::arg("duration") = py::none());
  m.def("infidelity_quasi_static", &infidelity_quasi_static, py::arg("sigma"), py::arg("zero_frequency_response"));
  m.def(
      "thermal_distribution", [](double nbar, int n_max) { return thermal_distribution(ThermalSpec{nbar, n_max}); },
      py::arg("nbar"), py::arg("n_max") = kDefaultNMax);
  m.def(
      "remove_one_quantum", [](const std::vector<double>& d) { return remove_one_quantum(d); }, py::arg("dist"));
  m.def("nbar_from_ratio", &nbar_from_ratio, py::arg("r"));
  m.def("ratio_from_nbar", &ratio_from_nbar, py::arg("nbar"));
  m.def("nonthermal_correction", &nonthermal_correction, py::arg("r_est"), py::arg("t12"));

  m.def(
      "resolve_config", [](const py::object& c) { return to_py(to_json(config_from(c))); },
      py::arg("config") = py::none(), "Validated config with every default filled in.");
  m.def("simulate", &simulate, py::arg("config") = py::none(), py::arg("threads") = 1,
        "Runs the protocol selected by protocol.kind and returns its summary.");
  m.def("spectrum", &spectrum, py::arg("config") = py::none(),
        "Sideband spectrum rows (detuning_hz, p_exc, stderr, shots).");
  m.def("fit_spectrum", &fit_spectrum, py::arg("detuning_hz"), py::arg("p_exc"), py::arg("shots"),
        "Heating-sideband fit and profile-likelihood temperature.");
}

#include "tweezersim/config.hpp"

#include <cmath>
#include <fstream>
#include <set>

#include "tweezersim/errors.hpp"

namespace tweezersim {

using nlohmann::json;
namespace fs = std::filesystem;

const char* to_string(ProtocolKind k) {
  switch (k) {
    case ProtocolKind::Readout: return "readout";
    case ProtocolKind::LossDetection: return "loss_detection";
    case ProtocolKind::Cooling: return "cooling";
  }
  return "?";
}

namespace {

// Typed view of one JSON object that remembers which keys were read, so
// leftovers can be reported as unknown.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_.empty() ? "(root)" : path_, "must be a JSON object");
  }

  std::string key(const std::string& k) const { return path_.empty() ? k : path_ + "." + k; }

  const json* find(const std::string& k) {
    used_.insert(k);
    const auto it = j_.find(k);
    return it == j_.end() || it->is_null() ? nullptr : &*it;
  }

  std::optional<double> opt_number(const std::string& k) {
    const json* v = find(k);
    if (!v) return std::nullopt;
    if (!v->is_number()) throw ConfigError(key(k), "expected a number");
    const double d = v->get<double>();
    if (!std::isfinite(d)) throw ConfigError(key(k), "must be finite");
    return d;
  }
  double number(const std::string& k, double def) { return opt_number(k).value_or(def); }

  long long integer(const std::string& k, long long def) {
    const json* v = find(k);
    if (!v) return def;
    if (!v->is_number_integer()) throw ConfigError(key(k), "expected an integer");
    return v->get<long long>();
  }
  std::size_t count(const std::string& k, std::size_t def) {
    const long long v = integer(k, static_cast<long long>(def));
    if (v < 0) throw ConfigError(key(k), "must be non-negative");
    return static_cast<std::size_t>(v);
  }
  std::uint64_t u64(const std::string& k, std::uint64_t def) {
    const json* v = find(k);
    if (!v) return def;
    if (!v->is_number_unsigned() && !(v->is_number_integer() && v->get<long long>() >= 0))
      throw ConfigError(key(k), "expected a non-negative integer");
    return v->get<std::uint64_t>();
  }
  bool boolean(const std::string& k, bool def) {
    const json* v = find(k);
    if (!v) return def;
    if (!v->is_boolean()) throw ConfigError(key(k), "expected true or false");
    return v->get<bool>();
  }
  std::optional<std::string> opt_string(const std::string& k) {
    const json* v = find(k);
    if (!v) return std::nullopt;
    if (!v->is_string()) throw ConfigError(key(k), "expected a string");
    return v->get<std::string>();
  }
  std::string string(const std::string& k, const std::string& def) { return opt_string(k).value_or(def); }

  std::vector<double> numbers(const std::string& k, const std::vector<double>& def) {
    const json* v = find(k);
    if (!v) return def;
    if (!v->is_array()) throw ConfigError(key(k), "expected an array of numbers");
    std::vector<double> out;
    for (const auto& e : *v) {
      if (!e.is_number()) throw ConfigError(key(k), "expected an array of numbers");
      out.push_back(e.get<double>());
    }
    return out;
  }
  std::vector<int> integers(const std::string& k, const std::vector<int>& def) {
    const json* v = find(k);
    if (!v) return def;
    if (!v->is_array()) throw ConfigError(key(k), "expected an array of integers");
    std::vector<int> out;
    for (const auto& e : *v) {
      if (!e.is_number_integer()) throw ConfigError(key(k), "expected an array of integers");
      out.push_back(e.get<int>());
    }
    return out;
  }

  Section sub(const std::string& k) {
    const json* v = find(k);
    return Section(v ? *v : empty(), key(k));
  }
  bool has(const std::string& k) const { return j_.contains(k) && !j_.at(k).is_null(); }

  void finish() const {
    for (const auto& [k, v] : j_.items())
      if (!used_.count(k)) throw ConfigError(key(k), "unknown key");
  }

  template <class E, class F>
  E choice(const std::string& k, E def, F&& from_string) {
    const auto s = opt_string(k);
    if (!s) return def;
    try {
      return from_string(*s);
    } catch (const ConfigError& e) {
      throw ConfigError(key(k), e.what());
    }
  }

 private:
  static const json& empty() {
    static const json e = json::object();
    return e;
  }
  const json& j_;
  std::string path_;
  std::set<std::string> used_;
};

// Runs a module validator and prefixes its key with the config section.
template <class F>
void checked(const std::string& section, F&& f) {
  try {
    f();
  } catch (const ConfigError& e) {
    const std::string full = e.what();
    const std::string msg = e.key().empty() ? full : full.substr(e.key().size() + 2);
    throw ConfigError(section + (e.key().empty() ? "" : "." + e.key()), msg);
  }
}

void require(bool ok, const std::string& key, const std::string& what) {
  if (!ok) throw ConfigError(key, what);
}

EvolutionMode mode_from_string(const std::string& s) {
  if (s == "rwa_ladder") return EvolutionMode::RwaLadder;
  if (s == "two_level") return EvolutionMode::TwoLevel;
  throw ConfigError("expected 'rwa_ladder' or 'two_level', got '" + s + "'");
}
const char* to_string(EvolutionMode m) { return m == EvolutionMode::RwaLadder ? "rwa_ladder" : "two_level"; }

ProtocolKind kind_from_string(const std::string& s) {
  if (s == "readout") return ProtocolKind::Readout;
  if (s == "loss_detection") return ProtocolKind::LossDetection;
  if (s == "cooling") return ProtocolKind::Cooling;
  throw ConfigError("expected 'readout', 'loss_detection' or 'cooling', got '" + s + "'");
}

RsbModel rsb_from_string(const std::string& s) {
  if (s == "ideal") return RsbModel::Ideal;
  if (s == "dynamics") return RsbModel::Dynamics;
  throw ConfigError("expected 'ideal' or 'dynamics', got '" + s + "'");
}
const char* to_string(RsbModel m) { return m == RsbModel::Ideal ? "ideal" : "dynamics"; }

AggregationMode aggregation_from_string(const std::string& s) {
  if (s == "sum") return AggregationMode::Sum;
  if (s == "llr") return AggregationMode::LikelihoodRatio;
  throw ConfigError("expected 'sum' or 'llr', got '" + s + "'");
}
const char* to_string(AggregationMode m) { return m == AggregationMode::Sum ? "sum" : "llr"; }

ResponseMethod method_from_string(const std::string& s) {
  if (s == "closed_form") return ResponseMethod::ClosedForm;
  if (s == "numeric") return ResponseMethod::Numeric;
  throw ConfigError("expected 'closed_form' or 'numeric', got '" + s + "'");
}
const char* to_string(ResponseMethod m) { return m == ResponseMethod::ClosedForm ? "closed_form" : "numeric"; }

fs::path resolve(const fs::path& p, const fs::path& base) {
  if (p.is_absolute() || base.empty()) return p;
  return fs::weakly_canonical(base / p);
}

void probability(double p, const std::string& key) { require(p >= 0.0 && p <= 1.0, key, "must lie in [0, 1]"); }

}  // namespace

RunConfig parse_config(const json& doc, const fs::path& base_dir) {
  RunConfig c;
  Section root(doc, "");
  root.opt_string("description");
  c.seed = root.u64("seed", c.seed);

  {
    auto s = root.sub("trap");
    c.trap.eta = s.number("eta", c.trap.eta);
    c.trap.frequency_hz = s.number("frequency_hz", c.trap.frequency_hz);
    c.trap.n_max = static_cast<int>(s.integer("n_max", c.trap.n_max));
    s.finish();
    require(c.trap.eta > 0.0, "trap.eta", "must be positive");
    require(c.trap.frequency_hz > 0.0, "trap.frequency_hz", "must be positive");
    require(c.trap.n_max >= 1 && c.trap.n_max <= 400, "trap.n_max", "must lie in [1, 400]");
  }
  {
    auto s = root.sub("pulses");
    c.pulses.rabi_hz = s.number("rabi_hz", c.pulses.rabi_hz);
    c.pulses.mode = s.choice("mode", c.pulses.mode, mode_from_string);
    c.pulses.dt_s = s.opt_number("dt_s");
    s.finish();
    require(c.pulses.rabi_hz > 0.0, "pulses.rabi_hz", "must be positive");
    if (c.pulses.dt_s) require(*c.pulses.dt_s > 0.0, "pulses.dt_s", "must be positive");
  }
  {
    auto s = root.sub("noise");
    for (auto ch : kNoiseChannels) {
      const std::string name = to_string(ch);
      if (!s.has(name)) {
        s.find(name);
        continue;
      }
      auto n = s.sub(name);
      auto& nc = c.noise[static_cast<std::size_t>(ch)];
      nc.quasi_static_sigma_hz = n.opt_number("quasi_static_sigma_hz");
      if (auto f = n.opt_string("psd_file")) nc.psd_file = resolve(*f, base_dir);
      nc.psd_quantity = n.string("psd_quantity", nc.psd_quantity);
      nc.white_psd_rad2_per_s2_per_hz = n.opt_number("white_psd_rad2_per_s2_per_hz");
      nc.max_frequency_hz = n.number("max_frequency_hz", nc.max_frequency_hz);
      nc.points = static_cast<int>(n.integer("points", nc.points));
      n.finish();
      const int forms = int(nc.quasi_static_sigma_hz.has_value()) + int(nc.psd_file.has_value()) +
                        int(nc.white_psd_rad2_per_s2_per_hz.has_value());
      const std::string k = "noise." + name;
      require(forms == 1, k, "set exactly one of quasi_static_sigma_hz, psd_file, white_psd_rad2_per_s2_per_hz");
      if (nc.quasi_static_sigma_hz) require(*nc.quasi_static_sigma_hz >= 0.0, k + ".quasi_static_sigma_hz", "must be non-negative");
      if (nc.white_psd_rad2_per_s2_per_hz) {
        require(*nc.white_psd_rad2_per_s2_per_hz >= 0.0, k + ".white_psd_rad2_per_s2_per_hz", "must be non-negative");
        require(nc.max_frequency_hz > 0.0, k + ".max_frequency_hz", "must be positive for a white PSD");
        require(nc.points >= 2, k + ".points", "must be at least 2 for a white PSD");
      }
      checked(k, [&] { psd_quantity_from_string(nc.psd_quantity); });
    }
    s.finish();
  }
  {
    auto s = root.sub("gates");
    auto& g = c.gates;
    g.cz_phase_error_prob = s.number("cz_phase_error_prob", g.cz_phase_error_prob);
    g.cz_loss_prob = s.number("cz_loss_prob", g.cz_loss_prob);
    g.cz_single_atom_phase = s.number("cz_single_atom_phase_rad", g.cz_single_atom_phase);
    g.sq_over_rotation_sigma = s.number("sq_over_rotation_sigma_rad", g.sq_over_rotation_sigma);
    g.sq_jitter_per_gate = s.boolean("sq_jitter_per_gate", g.sq_jitter_per_gate);
    s.finish();
    checked("gates", [&] { validate(g); });
  }
  {
    auto s = root.sub("imaging");
    auto& im = c.imaging.spec;
    im.bright_mean = s.number("bright_mean", im.bright_mean);
    im.bright_std = s.number("bright_std", im.bright_std);
    im.dark_mean = s.number("dark_mean", im.dark_mean);
    im.dark_std = s.number("dark_std", im.dark_std);
    im.bright_loss_prob = s.number("bright_loss_prob", im.bright_loss_prob);
    im.unshelved_loss_prob = s.number("unshelved_loss_prob", im.unshelved_loss_prob);
    c.imaging.calibrate_to_fidelity = s.opt_number("calibrate_to_fidelity");
    s.finish();
    checked("imaging", [&] { validate(im); });
    if (c.imaging.calibrate_to_fidelity)
      require(*c.imaging.calibrate_to_fidelity > 0.5 && *c.imaging.calibrate_to_fidelity < 1.0,
              "imaging.calibrate_to_fidelity", "must lie in (0.5, 1)");
  }
  {
    auto s = root.sub("protocol");
    auto& p = c.protocol;
    p.kind = s.choice("kind", p.kind, kind_from_string);
    p.shots = s.count("shots", p.shots);
    p.rounds = static_cast<int>(s.integer("rounds", p.rounds));
    p.data_nbar = s.number("data_nbar", p.data_nbar);
    p.ancilla_nbar = s.number("ancilla_nbar", p.ancilla_nbar);
    p.heating_prob_per_round = s.number("heating_prob_per_round", p.heating_prob_per_round);
    p.ancilla_absent_prob = s.number("ancilla_absent_prob", p.ancilla_absent_prob);
    p.include_absent = s.boolean("include_absent", p.include_absent);
    p.target_shelving_fidelity = s.opt_number("target_shelving_fidelity");
    p.data_c_down = s.number("data_c_down", p.data_c_down);
    p.data_c_up = s.number("data_c_up", p.data_c_up);
    p.analyzer_phases_rad = s.numbers("analyzer_phases_rad", p.analyzer_phases_rad);
    p.reference = s.boolean("reference", p.reference);
    p.initial_ground_fractions = s.numbers("initial_ground_fractions", p.initial_ground_fractions);
    p.rsb_model = s.choice("rsb_model", p.rsb_model, rsb_from_string);
    p.local_z_rad = s.opt_number("local_z_rad");
    p.compensation_phase_rad = s.opt_number("compensation_phase_rad");
    s.finish();
    require(p.shots >= 1, "protocol.shots", "must be >= 1");
    require(p.rounds >= 1, "protocol.rounds", "must be >= 1");
    require(p.data_nbar >= 0.0, "protocol.data_nbar", "must be non-negative");
    require(p.ancilla_nbar >= 0.0, "protocol.ancilla_nbar", "must be non-negative");
    probability(p.heating_prob_per_round, "protocol.heating_prob_per_round");
    probability(p.ancilla_absent_prob, "protocol.ancilla_absent_prob");
    if (p.target_shelving_fidelity) probability(*p.target_shelving_fidelity, "protocol.target_shelving_fidelity");
    require(std::hypot(p.data_c_down, p.data_c_up) > 0.0, "protocol.data_c_down", "amplitudes are both zero");
    require(!p.analyzer_phases_rad.empty(), "protocol.analyzer_phases_rad", "list is empty");
    require(!p.initial_ground_fractions.empty(), "protocol.initial_ground_fractions", "list is empty");
    for (double p0 : p.initial_ground_fractions)
      require(p0 > 0.0 && p0 <= 1.0, "protocol.initial_ground_fractions", "values must lie in (0, 1]");
  }
  {
    auto s = root.sub("analysis");
    auto& a = c.analysis;
    a.priors = s.numbers("priors", a.priors);
    a.n_cyc = s.integers("n_cyc", a.n_cyc);
    a.aggregation = s.choice("aggregation", a.aggregation, aggregation_from_string);
    for (double p1 : a.priors) probability(p1, "analysis.priors");
    for (int n : a.n_cyc) require(n >= 1, "analysis.n_cyc", "values must be >= 1");
    {
      auto r = s.sub("response");
      auto& q = a.response;
      q.frequency_min_hz = r.number("frequency_min_hz", q.frequency_min_hz);
      q.frequency_max_hz = r.number("frequency_max_hz", q.frequency_max_hz);
      q.points = static_cast<int>(r.integer("points", q.points));
      q.log_spacing = r.boolean("log_spacing", q.log_spacing);
      q.channel = r.choice("channel", q.channel, noise_channel_from_string);
      q.method = r.choice("method", q.method, method_from_string);
      q.duration_s = r.opt_number("duration_s");
      r.finish();
      require(q.frequency_min_hz > 0.0, "analysis.response.frequency_min_hz", "must be positive");
      require(q.frequency_max_hz > q.frequency_min_hz, "analysis.response.frequency_max_hz",
              "must exceed frequency_min_hz");
      require(q.points >= 2, "analysis.response.points", "must be at least 2");
      if (q.duration_s) require(*q.duration_s > 0.0, "analysis.response.duration_s", "must be positive");
    }
    {
      auto r = s.sub("spectrum");
      auto& sp = a.spectrum;
      sp.detuning_min_hz = r.number("detuning_min_hz", sp.detuning_min_hz);
      sp.detuning_max_hz = r.number("detuning_max_hz", sp.detuning_max_hz);
      sp.points = static_cast<int>(r.integer("points", sp.points));
      sp.side = r.choice("side", sp.side, spectrum_side_from_string);
      sp.shots_per_point = r.count("shots_per_point", sp.shots_per_point);
      sp.nbar = r.number("nbar", sp.nbar);
      sp.cooled = r.boolean("cooled", sp.cooled);
      sp.offset = r.number("offset", sp.offset);
      sp.duration_s = r.opt_number("duration_s");
      r.finish();
      require(sp.detuning_max_hz > sp.detuning_min_hz, "analysis.spectrum.detuning_max_hz",
              "must exceed detuning_min_hz");
      require(sp.points >= 2, "analysis.spectrum.points", "must be at least 2");
      require(sp.nbar >= 0.0, "analysis.spectrum.nbar", "must be non-negative");
      probability(sp.offset, "analysis.spectrum.offset");
      if (sp.duration_s) require(*sp.duration_s > 0.0, "analysis.spectrum.duration_s", "must be positive");
    }
    {
      auto r = s.sub("fit");
      if (auto f = r.opt_string("spectrum_file")) a.fit.spectrum_file = resolve(*f, base_dir);
      a.fit.delta_chi2 = r.number("delta_chi2", a.fit.delta_chi2);
      a.fit.heating_side_only = r.boolean("heating_side_only", a.fit.heating_side_only);
      r.finish();
      require(a.fit.delta_chi2 > 0.0, "analysis.fit.delta_chi2", "must be positive");
    }
    {
      auto r = s.sub("detect");
      if (auto f = r.opt_string("shots_file")) a.detect.shots_file = resolve(*f, base_dir);
      r.finish();
    }
    s.finish();
  }
  {
    auto s = root.sub("output");
    c.output.directory = s.string("directory", c.output.directory.string());
    s.finish();
    require(!c.output.directory.empty(), "output.directory", "must not be empty");
  }
  root.finish();
  return c;
}

RunConfig load_config(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open config '" + path.string() + "'");
  json doc;
  try {
    doc = json::parse(is);
  } catch (const json::parse_error& e) {
    throw ConfigError("(root)", std::string("malformed JSON: ") + e.what());
  }
  return parse_config(doc, path.has_parent_path() ? fs::absolute(path).parent_path() : fs::current_path());
}

json to_json(const RunConfig& c) {
  json j;
  j["seed"] = c.seed;
  j["trap"] = {{"eta", c.trap.eta}, {"frequency_hz", c.trap.frequency_hz}, {"n_max", c.trap.n_max}};
  j["pulses"] = {{"rabi_hz", c.pulses.rabi_hz}, {"mode", to_string(c.pulses.mode)}};
  if (c.pulses.dt_s) j["pulses"]["dt_s"] = *c.pulses.dt_s;
  j["noise"] = json::object();
  for (auto ch : kNoiseChannels) {
    const auto& nc = c.noise[static_cast<std::size_t>(ch)];
    json n;
    if (nc.quasi_static_sigma_hz) n["quasi_static_sigma_hz"] = *nc.quasi_static_sigma_hz;
    if (nc.psd_file) {
      n["psd_file"] = nc.psd_file->string();
      n["psd_quantity"] = nc.psd_quantity;
    }
    if (nc.white_psd_rad2_per_s2_per_hz) {
      n["white_psd_rad2_per_s2_per_hz"] = *nc.white_psd_rad2_per_s2_per_hz;
      n["max_frequency_hz"] = nc.max_frequency_hz;
      n["points"] = nc.points;
    }
    if (!n.is_null()) j["noise"][to_string(ch)] = n;
  }
  const auto& g = c.gates;
  j["gates"] = {{"cz_phase_error_prob", g.cz_phase_error_prob},
                {"cz_loss_prob", g.cz_loss_prob},
                {"cz_single_atom_phase_rad", g.cz_single_atom_phase},
                {"sq_over_rotation_sigma_rad", g.sq_over_rotation_sigma},
                {"sq_jitter_per_gate", g.sq_jitter_per_gate}};
  const auto& im = c.imaging.spec;
  j["imaging"] = {{"bright_mean", im.bright_mean},       {"bright_std", im.bright_std},
                  {"dark_mean", im.dark_mean},           {"dark_std", im.dark_std},
                  {"bright_loss_prob", im.bright_loss_prob}, {"unshelved_loss_prob", im.unshelved_loss_prob}};
  if (c.imaging.calibrate_to_fidelity) j["imaging"]["calibrate_to_fidelity"] = *c.imaging.calibrate_to_fidelity;
  const auto& p = c.protocol;
  j["protocol"] = {{"kind", to_string(p.kind)},
                   {"shots", p.shots},
                   {"rounds", p.rounds},
                   {"data_nbar", p.data_nbar},
                   {"ancilla_nbar", p.ancilla_nbar},
                   {"heating_prob_per_round", p.heating_prob_per_round},
                   {"ancilla_absent_prob", p.ancilla_absent_prob},
                   {"include_absent", p.include_absent},
                   {"data_c_down", p.data_c_down},
                   {"data_c_up", p.data_c_up},
                   {"analyzer_phases_rad", p.analyzer_phases_rad},
                   {"reference", p.reference},
                   {"initial_ground_fractions", p.initial_ground_fractions},
                   {"rsb_model", to_string(p.rsb_model)}};
  if (p.target_shelving_fidelity) j["protocol"]["target_shelving_fidelity"] = *p.target_shelving_fidelity;
  if (p.local_z_rad) j["protocol"]["local_z_rad"] = *p.local_z_rad;
  if (p.compensation_phase_rad) j["protocol"]["compensation_phase_rad"] = *p.compensation_phase_rad;
  const auto& a = c.analysis;
  json resp = {{"frequency_min_hz", a.response.frequency_min_hz},
               {"frequency_max_hz", a.response.frequency_max_hz},
               {"points", a.response.points},
               {"log_spacing", a.response.log_spacing},
               {"channel", to_string(a.response.channel)},
               {"method", to_string(a.response.method)}};
  if (a.response.duration_s) resp["duration_s"] = *a.response.duration_s;
  json spec = {{"detuning_min_hz", a.spectrum.detuning_min_hz},
               {"detuning_max_hz", a.spectrum.detuning_max_hz},
               {"points", a.spectrum.points},
               {"side", to_string(a.spectrum.side)},
               {"shots_per_point", a.spectrum.shots_per_point},
               {"nbar", a.spectrum.nbar},
               {"cooled", a.spectrum.cooled},
               {"offset", a.spectrum.offset}};
  if (a.spectrum.duration_s) spec["duration_s"] = *a.spectrum.duration_s;
  json fit = {{"delta_chi2", a.fit.delta_chi2}, {"heating_side_only", a.fit.heating_side_only}};
  if (a.fit.spectrum_file) fit["spectrum_file"] = a.fit.spectrum_file->string();
  json detect = json::object();
  if (a.detect.shots_file) detect["shots_file"] = a.detect.shots_file->string();
  j["analysis"] = {{"priors", a.priors},   {"n_cyc", a.n_cyc}, {"aggregation", to_string(a.aggregation)},
                   {"response", resp},     {"spectrum", spec}, {"fit", fit},
                   {"detect", detect}};
  j["output"] = {{"directory", c.output.directory.string()}};
  return j;
}

// ---------------------------------------------------------------------------

TrapSpec make_trap(const RunConfig& c) { return TrapSpec::from_eta(c.trap.eta, constants::two_pi * c.trap.frequency_hz); }

NoiseModel make_noise(const RunConfig& c) {
  NoiseModel m;
  for (auto ch : kNoiseChannels) {
    const auto& nc = c.noise[static_cast<std::size_t>(ch)];
    const std::string k = std::string("noise.") + to_string(ch);
    if (nc.quasi_static_sigma_hz) {
      m[ch] = QuasiStatic{constants::two_pi * *nc.quasi_static_sigma_hz};
    } else if (nc.psd_file) {
      m[ch] = load_psd_csv(*nc.psd_file, psd_quantity_from_string(nc.psd_quantity));
    } else if (nc.white_psd_rad2_per_s2_per_hz) {
      SpectralDensity psd;
      checked(k, [&] {
        psd = convert_psd(SpectralDensity::white(*nc.white_psd_rad2_per_s2_per_hz, nc.max_frequency_hz,
                                                 static_cast<std::size_t>(nc.points)),
                          psd_quantity_from_string(nc.psd_quantity));
      });
      m[ch] = psd;
    }
  }
  return m;
}

SidebandDrive make_drive(const RunConfig& c) {
  SidebandDrive d;
  d.trap = make_trap(c);
  d.rabi = constants::two_pi * c.pulses.rabi_hz;
  d.noise = make_noise(c);
  d.mode = c.pulses.mode;
  d.dt = c.pulses.dt_s;
  d.n_max = c.trap.n_max;
  return d;
}

ImagingSpec make_imaging(const RunConfig& c) {
  if (!c.imaging.calibrate_to_fidelity) return c.imaging.spec;
  ImagingSpec out;
  checked("imaging.calibrate_to_fidelity", [&] {
    out = calibrate_imaging(c.imaging.spec, *c.imaging.calibrate_to_fidelity, cnot_flip_error(c.gates), 0.5);
  });
  return out;
}

namespace {

CnotPhases make_cnot(const RunConfig& c) { return {c.protocol.local_z_rad, c.protocol.compensation_phase_rad}; }

}  // namespace

ReadoutConfig make_readout(const RunConfig& c, unsigned threads) {
  ReadoutConfig r;
  r.shots = c.protocol.shots;
  r.rounds = c.protocol.rounds;
  r.seed = c.seed;
  r.threads = threads;
  r.gates = c.gates;
  r.imaging = make_imaging(c);
  r.cnot = make_cnot(c);
  r.data_motion = ThermalSpec{c.protocol.data_nbar, c.trap.n_max};
  r.ancilla_motion = ThermalSpec{c.protocol.ancilla_nbar, 2};
  r.heating_prob_per_round = c.protocol.heating_prob_per_round;
  r.ancilla_absent_prob = c.protocol.ancilla_absent_prob;
  r.include_absent = c.protocol.include_absent;
  checked("protocol", [&] { validate(r); });
  return r;
}

LossDetectionConfig make_loss_detection(const RunConfig& c, unsigned threads) {
  LossDetectionConfig l;
  l.shots = c.protocol.shots;
  l.seed = c.seed;
  l.threads = threads;
  l.gates = c.gates;
  l.imaging = make_imaging(c);
  l.cnot = make_cnot(c);
  l.shelving = make_drive(c);
  l.target_shelving_fidelity = c.protocol.target_shelving_fidelity;
  const double norm = std::hypot(c.protocol.data_c_down, c.protocol.data_c_up);
  l.c_down = Complex(c.protocol.data_c_down / norm);
  l.c_up = Complex(c.protocol.data_c_up / norm);
  l.analyzer_phases = c.protocol.analyzer_phases_rad;
  l.reference = c.protocol.reference;
  l.include_absent = c.protocol.include_absent;
  checked("protocol", [&] { validate(l); });
  return l;
}

CoolingConfig make_cooling(const RunConfig& c, unsigned threads) {
  CoolingConfig k;
  k.shots = c.protocol.shots;
  k.seed = c.seed;
  k.threads = threads;
  k.gates = c.gates;
  k.initial_ground_fractions = c.protocol.initial_ground_fractions;
  k.rsb = c.protocol.rsb_model;
  k.drive = make_drive(c);
  k.ancilla_motion = ThermalSpec{c.protocol.ancilla_nbar, 2};
  checked("protocol", [&] { validate(k); });
  return k;
}

ResponseQuery make_response_query(const RunConfig& c) {
  const auto& r = c.analysis.response;
  ResponseQuery q;
  q.eta = c.trap.eta;
  q.rabi = constants::two_pi * c.pulses.rabi_hz;
  q.duration = r.duration_s;
  q.channel = r.channel;
  for (int k = 0; k < r.points; ++k) {
    const double u = double(k) / double(r.points - 1);
    q.frequency_hz.push_back(r.log_spacing ? r.frequency_min_hz * std::pow(r.frequency_max_hz / r.frequency_min_hz, u)
                                           : r.frequency_min_hz + u * (r.frequency_max_hz - r.frequency_min_hz));
  }
  checked("analysis.response", [&] { validate(q); });
  return q;
}

SpectrumConfig make_spectrum(const RunConfig& c) {
  const auto& s = c.analysis.spectrum;
  SpectrumConfig sc;
  for (int k = 0; k < s.points; ++k)
    sc.detuning_hz.push_back(s.detuning_min_hz + (s.detuning_max_hz - s.detuning_min_hz) * k / (s.points - 1));
  sc.side = s.side;
  sc.shots_per_point = s.shots_per_point;
  sc.seed = c.seed;
  sc.rabi = constants::two_pi * c.pulses.rabi_hz;
  sc.eta = c.trap.eta;
  sc.trap_frequency_hz = c.trap.frequency_hz;
  sc.duration = s.duration_s;
  sc.offset = s.offset;
  checked("analysis.spectrum", [&] { validate(sc); });
  return sc;
}

std::vector<double> make_spectrum_distribution(const RunConfig& c) {
  const auto d = thermal_distribution(ThermalSpec{c.analysis.spectrum.nbar, c.trap.n_max});
  return c.analysis.spectrum.cooled ? remove_one_quantum(d) : d;
}

}  // namespace tweezersim

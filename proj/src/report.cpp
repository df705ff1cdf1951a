#include "tweezersim/report.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "tweezersim/errors.hpp"

namespace tweezersim {

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace {

std::string join_events(const std::vector<std::string>& ev) {
  std::string s;
  for (std::size_t i = 0; i < ev.size(); ++i) s += (i ? ";" : "") + ev[i];
  return s;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : s) {
    if (ch == sep) {
      out.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur += ch;
    }
  }
  out.push_back(cur);
  return out;
}

double parse_double(const std::string& s, const std::string& where) {
  if (s == "nan" || s.empty()) return kNaN;
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw IoError(where + ": cannot parse number '" + s + "'");
  }
}

long long parse_int(const std::string& s, const std::string& where) {
  long long v = 0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) throw IoError(where + ": cannot parse integer '" + s + "'");
  return v;
}

struct Table {
  std::map<std::string, std::size_t> columns;
  std::vector<std::vector<std::string>> rows;

  std::size_t col(const std::string& name, const std::string& file) const {
    const auto it = columns.find(name);
    if (it == columns.end()) throw IoError(file + ": missing column '" + name + "'");
    return it->second;
  }
};

Table read_table(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open '" + path.string() + "'");
  Table t;
  std::string line;
  if (!std::getline(is, line)) throw IoError(path.string() + ": empty file");
  const auto head = split(line, ',');
  for (std::size_t i = 0; i < head.size(); ++i) t.columns[head[i]] = i;
  while (std::getline(is, line)) {
    if (line.empty() || line == "\r") continue;
    auto cells = split(line, ',');
    if (cells.size() != head.size())
      throw IoError(path.string() + ": row " + std::to_string(t.rows.size() + 2) + " has the wrong column count");
    t.rows.push_back(std::move(cells));
  }
  return t;
}

}  // namespace

void write_shot_csv(std::ostream& os, std::span<const ShotRecord> records) {
  os << "scenario,shot,seed,round,signal,bright,phase,shelving_transfer,data_lost,data_label,data_n,data_initial_n,"
        "ancilla_lost,ancilla_label,events\n";
  for (const auto& r : records) {
    auto tail = [&](std::ostream& o) {
      o << format_double(r.phase) << ',' << format_double(r.shelving_transfer) << ',' << (r.data_lost ? 1 : 0) << ','
        << r.data_label << ',' << r.data_n << ',' << r.data_initial_n << ',' << (r.ancilla_lost ? 1 : 0) << ','
        << r.ancilla_label << ',' << join_events(r.events) << '\n';
    };
    if (r.rounds.empty()) {
      os << to_string(r.scenario) << ',' << r.shot << ',' << r.seed << ",-1,nan,0,";
      tail(os);
    }
    for (std::size_t k = 0; k < r.rounds.size(); ++k) {
      os << to_string(r.scenario) << ',' << r.shot << ',' << r.seed << ',' << k << ','
         << format_double(r.rounds[k].signal) << ',' << (r.rounds[k].bright ? 1 : 0) << ',';
      tail(os);
    }
  }
}

std::vector<ShotRecord> read_shot_csv(const std::filesystem::path& path) {
  const Table t = read_table(path);
  const std::string f = path.string();
  const std::size_t c_sc = t.col("scenario", f), c_shot = t.col("shot", f), c_seed = t.col("seed", f),
                    c_round = t.col("round", f), c_sig = t.col("signal", f), c_bright = t.col("bright", f);
  std::vector<ShotRecord> out;
  std::map<std::pair<int, long long>, std::size_t> index;
  for (const auto& row : t.rows) {
    const Scenario sc = row[c_sc] == "present" ? Scenario::Present
                        : row[c_sc] == "absent" ? Scenario::Absent
                                                : throw IoError(f + ": unknown scenario '" + row[c_sc] + "'");
    const long long shot = parse_int(row[c_shot], f);
    const auto key = std::pair{static_cast<int>(sc), shot};
    auto it = index.find(key);
    if (it == index.end()) {
      ShotRecord r;
      r.scenario = sc;
      r.shot = static_cast<std::size_t>(shot);
      r.seed = static_cast<std::uint64_t>(std::stoull(row[c_seed]));
      it = index.emplace(key, out.size()).first;
      out.push_back(std::move(r));
    }
    const long long k = parse_int(row[c_round], f);
    if (k < 0) continue;
    auto& rounds = out[it->second].rounds;
    if (static_cast<std::size_t>(k) != rounds.size()) throw IoError(f + ": rounds out of order for shot " + row[c_shot]);
    rounds.push_back({parse_double(row[c_sig], f), row[c_bright] == "1"});
  }
  return out;
}

void write_spectrum_csv(std::ostream& os, std::span<const SpectrumPoint> points) {
  os << "detuning_hz,p_exc,stderr,shots\n";
  for (const auto& p : points)
    os << format_double(p.detuning_hz) << ',' << format_double(p.p_exc) << ',' << format_double(p.std_error) << ','
       << p.shots << '\n';
}

std::vector<SpectrumPoint> read_spectrum_csv(const std::filesystem::path& path) {
  const Table t = read_table(path);
  const std::string f = path.string();
  const std::size_t cx = t.col("detuning_hz", f), cp = t.col("p_exc", f);
  const bool has_se = t.columns.count("stderr"), has_n = t.columns.count("shots");
  std::vector<SpectrumPoint> out;
  for (const auto& row : t.rows) {
    SpectrumPoint p;
    p.detuning_hz = parse_double(row[cx], f);
    p.p_exc = parse_double(row[cp], f);
    if (has_se) p.std_error = parse_double(row[t.columns.at("stderr")], f);
    if (has_n) {
      const long long n = parse_int(row[t.columns.at("shots")], f);
      if (n < 0) throw IoError(f + ": negative shot count");
      p.shots = static_cast<std::size_t>(n);
    }
    out.push_back(p);
  }
  if (out.empty()) throw IoError(f + ": no data rows");
  return out;
}

void write_response_csv(std::ostream& os, const ResponseFunction& r) {
  os << "frequency_hz,response_s2\n";
  for (std::size_t i = 0; i < r.values.size(); ++i)
    os << format_double(r.frequency_hz[i]) << ',' << format_double(r.values[i]) << '\n';
}

void write_detection_csv(std::ostream& os, std::span<const DetectionResult> rows) {
  os << "p1,n_cyc,threshold,bright_above,fidelity,f1,f0\n";
  for (const auto& r : rows)
    os << format_double(r.P1) << ',' << r.n_cyc << ',' << format_double(r.threshold) << ',' << (r.bright_above ? 1 : 0)
       << ',' << format_double(r.F) << ',' << format_double(r.F1) << ',' << format_double(r.F0) << '\n';
}

void write_fringe_csv(std::ostream& os, std::span<const FringePoint> fringe) {
  os << "phase_rad,shots,p_up,stderr\n";
  for (const auto& p : fringe)
    os << format_double(p.phase) << ',' << p.shots << ',' << format_double(p.p_up) << ',' << format_double(p.std_error)
       << '\n';
}

void write_cooling_csv(std::ostream& os, std::span<const CoolingSummary> rows) {
  os << "initial_ground_fraction,initial_nbar,shots,ground_fraction,stderr,ideal,conditional_ground_fraction,"
        "wrong_state_fraction,lost_fraction,ancilla_plus_fraction,ancilla_correlation\n";
  for (const auto& s : rows)
    os << format_double(s.initial_ground_fraction) << ',' << format_double(s.initial_nbar) << ',' << s.shots << ','
       << format_double(s.ground_fraction) << ',' << format_double(s.ground_stderr) << ','
       << format_double(s.ideal_ground_fraction) << ',' << format_double(s.conditional_ground_fraction) << ','
       << format_double(s.wrong_state_fraction) << ',' << format_double(s.lost_fraction) << ','
       << format_double(s.ancilla_plus_fraction) << ',' << format_double(s.ancilla_correlation) << '\n';
}

void write_profile_csv(std::ostream& os, const ProfileInterval& p) {
  os << "a1,delta_chi2\n";
  for (std::size_t i = 0; i < p.grid.size(); ++i)
    os << format_double(p.grid[i]) << ',' << format_double(p.delta_chi2[i]) << '\n';
}

void write_phase_calibration_csv(std::ostream& os, std::span<const PhaseCalibrationRow> rows) {
  os << "phase_rad,scenario,ancilla_down,data_up\n";
  for (const auto& r : rows)
    os << format_double(r.phase) << ',' << to_string(r.scenario) << ',' << format_double(r.ancilla_down) << ','
       << format_double(r.data_up) << '\n';
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  write_file(path, [&](std::ostream& os) { os << text; });
}

nlohmann::json json_number(double v) {
  if (std::isfinite(v)) return v;
  return format_double(v);
}

nlohmann::json RunReport::to_json() const {
  nlohmann::json j;
  j["command"] = command;
  j["version"] = kVersion;
  j["seed"] = seed;
  j["threads"] = threads;
  j["wall_time_s"] = wall_time_s;
  j["config"] = config;
  j["results"] = results;
  j["outputs"] = outputs;
  j["warnings"] = warnings;
  return j;
}

nlohmann::json to_json(const DetectionResult& r) {
  return {{"p1", r.P1},           {"n_cyc", r.n_cyc}, {"threshold", json_number(r.threshold)},
          {"bright_above", r.bright_above}, {"fidelity", r.F}, {"f1", r.F1}, {"f0", r.F0}, {"warnings", r.warnings}};
}

nlohmann::json to_json(const GaussianPeak& g) {
  nlohmann::json cov = nlohmann::json::array();
  for (int i = 0; i < 4; ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (int k = 0; k < 4; ++k) row.push_back(g.covariance(i, k));
    cov.push_back(row);
  }
  return {{"height", g.height}, {"center_hz", g.center_hz}, {"width_hz", g.width_hz}, {"offset", g.offset},
          {"covariance", cov},  {"chi2", g.chi2},           {"dof", g.dof}};
}

nlohmann::json to_json(const DoubleGaussianFit& f) {
  nlohmann::json cov = nlohmann::json::array();
  for (int i = 0; i < 5; ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (int k = 0; k < 5; ++k) row.push_back(f.covariance(i, k));
    cov.push_back(row);
  }
  return {{"blue_height", f.blue_height},
          {"red_height", f.red_height},
          {"center_hz", f.center_hz},
          {"width_hz", f.width_hz},
          {"offset", f.offset},
          {"ground_state_fraction", f.ground_state_fraction()},
          {"covariance", cov},
          {"chi2", f.chi2},
          {"dof", f.dof}};
}

nlohmann::json to_json(const ProfileInterval& p, bool include_curve) {
  nlohmann::json j{{"estimate", p.estimate},   {"lower", p.lower},         {"upper", p.upper},
                   {"one_sided", p.one_sided}, {"unbounded_above", p.unbounded_above}, {"chi2_min", p.chi2_min}};
  if (include_curve) {
    j["grid"] = p.grid;
    j["delta_chi2"] = p.delta_chi2;
  }
  return j;
}

nlohmann::json to_json(const TemperatureEstimate& t) {
  return {{"method", to_string(t.method)},
          {"nbar", json_number(t.nbar)},
          {"nbar_lower", json_number(t.nbar_lower)},
          {"nbar_upper", json_number(t.nbar_upper)},
          {"ratio", t.ratio},
          {"ratio_lower", t.ratio_lower},
          {"ratio_upper", t.ratio_upper},
          {"ground_state_fraction", 1.0 - t.ratio},
          {"one_sided", t.one_sided},
          {"unbounded_above", t.unbounded_above}};
}

nlohmann::json to_json(const InfidelityBudget& b) {
  nlohmann::json ch = nlohmann::json::array();
  for (const auto& c : b.channels) ch.push_back({{"channel", to_string(c.channel)}, {"kind", c.kind}, {"chi", c.chi}});
  return {{"channels", ch}, {"total", b.total}, {"warnings", b.warnings}};
}

nlohmann::json to_json(const CoolingSummary& s) {
  return {{"initial_ground_fraction", s.initial_ground_fraction},
          {"initial_nbar", s.initial_nbar},
          {"shots", s.shots},
          {"ground_fraction", s.ground_fraction},
          {"stderr", s.ground_stderr},
          {"ideal", s.ideal_ground_fraction},
          {"conditional_ground_fraction", s.conditional_ground_fraction},
          {"wrong_state_fraction", s.wrong_state_fraction},
          {"lost_fraction", s.lost_fraction},
          {"ancilla_plus_fraction", s.ancilla_plus_fraction},
          {"ancilla_correlation", s.ancilla_correlation},
          {"up_motional_distribution", s.up_motional_distribution}};
}

}  // namespace tweezersim

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "tweezersim/config.hpp"
#include "tweezersim/errors.hpp"

using namespace tweezersim;
using nlohmann::json;

namespace {

std::string error_key(const json& doc) {
  try {
    parse_config(doc);
  } catch (const ConfigError& e) {
    return e.key();
  }
  return "<none>";
}

}  // namespace

TEST_CASE("empty document gives defaults") {
  const auto c = parse_config(json::object());
  CHECK(c.trap.eta == 0.36);
  CHECK(c.protocol.kind == ProtocolKind::Readout);
  CHECK(c.analysis.n_cyc == std::vector<int>{1, 2, 3, 4});
  CHECK(c.output.directory == "out");
}

TEST_CASE("echo round trip") {
  const json doc = {{"seed", 17},
                    {"trap", {{"eta", 0.2}, {"n_max", 20}}},
                    {"pulses", {{"rabi_hz", 3e3}, {"mode", "two_level"}}},
                    {"noise", {{"trap_frequency", {{"quasi_static_sigma_hz", 40.0}}},
                               {"laser_amplitude",
                                {{"white_psd_rad2_per_s2_per_hz", 1e-6}, {"max_frequency_hz", 1e4}, {"points", 100}}}}},
                    {"gates", {{"cz_loss_prob", 0.003}}},
                    {"imaging", {{"calibrate_to_fidelity", 0.9}}},
                    {"protocol", {{"kind", "loss_detection"}, {"analyzer_phases_rad", {0.0, 1.5}}, {"local_z_rad", -0.3}}},
                    {"analysis", {{"aggregation", "llr"}, {"spectrum", {{"side", "red"}, {"cooled", true}}}}},
                    {"output", {{"directory", "results"}}}};
  const auto c = parse_config(doc);
  const json echo = to_json(c);
  CHECK(to_json(parse_config(echo)) == echo);
  CHECK(echo["pulses"]["mode"] == "two_level");
  CHECK(echo["protocol"]["kind"] == "loss_detection");
  CHECK(echo["analysis"]["aggregation"] == "llr");
  CHECK(echo["analysis"]["spectrum"]["side"] == "red");
  CHECK(echo["noise"]["laser_amplitude"]["points"] == 100);
  CHECK_FALSE(echo["noise"].contains("laser_frequency"));
}

TEST_CASE("defaults round trip") {
  const json echo = to_json(parse_config(json::object()));
  CHECK(to_json(parse_config(echo)) == echo);
}

TEST_CASE("unknown keys are rejected with their path") {
  CHECK(error_key({{"shotz", 1}}) == "shotz");
  CHECK(error_key({{"protocol", {{"shotz", 1}}}}) == "protocol.shotz");
  CHECK(error_key({{"analysis", {{"fit", {{"delta", 1}}}}}}) == "analysis.fit.delta");
  CHECK(error_key({{"noise", {{"trap_freq", {{"quasi_static_sigma_hz", 1.0}}}}}}) == "noise.trap_freq");
  CHECK(error_key({{"description", "a note"}}) == "<none>");
}

TEST_CASE("bad values name their key") {
  CHECK(error_key({{"trap", {{"eta", -1.0}}}}) == "trap.eta");
  CHECK(error_key({{"trap", {{"eta", "big"}}}}) == "trap.eta");
  CHECK(error_key({{"protocol", {{"shots", 0}}}}) == "protocol.shots");
  CHECK(error_key({{"protocol", {{"shots", 1.5}}}}) == "protocol.shots");
  CHECK(error_key({{"protocol", {{"kind", "teleport"}}}}) == "protocol.kind");
  CHECK(error_key({{"pulses", {{"mode", "exact"}}}}) == "pulses.mode");
  CHECK(error_key({{"analysis", {{"priors", {0.5, 1.2}}}}}) == "analysis.priors");
  CHECK(error_key({{"analysis", {{"response", {{"points", 1}}}}}}) == "analysis.response.points");
  CHECK(error_key({{"noise", {{"laser_frequency", json::object()}}}}) == "noise.laser_frequency");
  CHECK(error_key({{"imaging", {{"calibrate_to_fidelity", 1.5}}}}) == "imaging.calibrate_to_fidelity");
  CHECK(error_key({{"seed", -3}}) == "seed");
  CHECK(error_key(json::array()) == "(root)");
  CHECK(error_key({{"gates", {{"cz_loss_prob", 2.0}}}}).rfind("gates", 0) == 0);
}

TEST_CASE("units are converted to angular values") {
  const auto c = parse_config({{"pulses", {{"rabi_hz", 1e3}}},
                               {"trap", {{"frequency_hz", 50e3}}},
                               {"noise", {{"laser_frequency", {{"quasi_static_sigma_hz", 10.0}}}}}});
  const auto d = make_drive(c);
  CHECK(d.rabi == doctest::Approx(constants::two_pi * 1e3).epsilon(1e-15));
  CHECK(d.trap.omega_t == doctest::Approx(constants::two_pi * 50e3).epsilon(1e-15));
  const auto& qs = std::get<QuasiStatic>(d.noise[NoiseChannel::LaserFrequency]);
  CHECK(qs.sigma == doctest::Approx(constants::two_pi * 10.0).epsilon(1e-15));

  const auto q = make_response_query(c);
  CHECK(q.frequency_hz.size() == 50);
  CHECK(q.frequency_hz.front() == doctest::Approx(10.0));
  CHECK(q.frequency_hz.back() == doctest::Approx(10e3));

  const auto s = make_spectrum(c);
  CHECK(s.detuning_hz.size() == 91);
  CHECK(s.detuning_hz[45] == doctest::Approx(0.0));
}

TEST_CASE("relative paths resolve against the config directory") {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "tweezersim_config_test";
  fs::create_directories(dir);
  const fs::path file = dir / "run.json";
  {
    std::ofstream os(file);
    os << R"({"analysis": {"fit": {"spectrum_file": "spec.csv"}}})";
  }
  const auto c = load_config(file);
  REQUIRE(c.analysis.fit.spectrum_file);
  CHECK(fs::weakly_canonical(*c.analysis.fit.spectrum_file) == fs::weakly_canonical(dir / "spec.csv"));
  CHECK_THROWS_AS(load_config(dir / "missing.json"), IoError);
  {
    std::ofstream os(file);
    os << "{ not json";
  }
  CHECK_THROWS_AS(load_config(file), ConfigError);
  fs::remove_all(dir);
}

TEST_CASE("readout builder applies calibration") {
  auto c = parse_config({{"imaging", {{"calibrate_to_fidelity", 0.9}}}});
  const auto r = make_readout(c, 2);
  CHECK(r.threads == 2);
  CHECK(r.imaging.bright_mean != c.imaging.spec.bright_mean);
  c.imaging.calibrate_to_fidelity.reset();
  CHECK(make_readout(c, 1).imaging.bright_mean == c.imaging.spec.bright_mean);
}

#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "pilotsim/cli.hpp"
#include "pilotsim/io.hpp"

using namespace pilotsim;

namespace {

const std::filesystem::path kData = PILOTSIM_DATA_DIR;

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result invoke(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::filesystem::path temp_file(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("pilotsim_test_" + name);
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("codec") {
  CHECK(invoke({"codec", "decode", "50"}).out == "30 A\n");
  CHECK(invoke({"codec", "decode", "5"}).out == "digital communication band\n");
  CHECK(invoke({"codec", "encode", "30"}).out == "50 %\n");
  const Result r = invoke({"codec", "encode", "100"});
  CHECK(r.code == cli::kExitUsage);
  CHECK(r.err.find("100 A") != std::string::npos);
  CHECK(invoke({"codec", "decode", "101"}).code == cli::kExitUsage);
  CHECK(invoke({"codec", "sideways", "1"}).code == cli::kExitUsage);
}

TEST_CASE("solve") {
  const Result par = invoke({"solve", "--attack", "parallel", "--r-att", "5762",
                          "--r-v", "2740", "--profile", "charger2"});
  CHECK(par.code == 0);
  CHECK(par.out.find("7.8 V") != std::string::npos);
  CHECK(par.out.find("B/C boundary") != std::string::npos);
  const Result none = invoke({"solve", "--attack", "none", "--r-v", "2740"});
  CHECK(none.out.find("8.791 V  state B") != std::string::npos);
  const Result ser = invoke({"solve", "--attack", "serial", "--r-att", "0", "--r-v",
                          "882", "--format", "json"});
  CHECK(io::json::parse(ser.out)["v_diff"] == 0.0);
  const Result unknown = invoke({"solve", "--profile", "charger7"});
  CHECK(unknown.code == cli::kExitUsage);
  CHECK(unknown.err.find("known: charger1") != std::string::npos);
}

TEST_CASE("range") {
  const Result bc = invoke({"range", "--goal", "B->C", "--format", "json"});
  const auto j = io::json::parse(bc.out);
  CHECK(j["r_min"].get<double>() == doctest::Approx(1685.0).epsilon(1e-3));
  CHECK(j["r_max"].get<double>() == doctest::Approx(5764.0).epsilon(1e-3));
  CHECK(invoke({"range", "--goal", "C->F"}).out.find("0 ohm .. 1685 ohm") != std::string::npos);
  CHECK(invoke({"range", "--goal", "B->F"}).out.find("734 ohm") != std::string::npos);
  CHECK(invoke({"range", "--goal", "C->F", "--profile", "charger1"}).out.find("infeasible") !=
        std::string::npos);
  CHECK(invoke({"range", "--attack", "serial", "--goal", "A<-B->C"}).out.find("1138 ohm") !=
        std::string::npos);
  CHECK(invoke({"range", "--attack", "serial", "--goal", "B->C"}).code == cli::kExitUsage);
}

TEST_CASE("sweep") {
  const auto path = temp_file("sweep.csv");
  CHECK(invoke({"sweep", "--steps", "1000", "-o", path.string()}).code == 0);
  std::istringstream lines(slurp(path));
  std::string line;
  std::getline(lines, line);
  CHECK(line == "r_att,v_evse,v_ev,evse_state,ev_state,outcome");
  int rows = 0;
  double prev = -1.0;
  while (std::getline(lines, line)) {
    const auto a = line.find(',');
    const double v = std::stod(line.substr(a + 1));
    CHECK(v >= prev);
    prev = v;
    ++rows;
  }
  CHECK(rows == 1000);

  CHECK(invoke({"sweep", "--steps", "0", "-o", path.string()}).code == 0);
  CHECK(std::filesystem::file_size(path) == 0);
  CHECK(invoke({"sweep", "--r-min", "10", "--r-max", "1"}).code == cli::kExitUsage);
  std::filesystem::remove(path);
}

TEST_CASE("sweep output is byte-identical across runs") {
  const auto a = temp_file("a.csv"), b = temp_file("b.csv");
  invoke({"sweep", "--attack", "serial", "--steps", "4000", "-o", a.string()});
  invoke({"sweep", "--attack", "serial", "--steps", "4000", "-o", b.string()});
  CHECK(slurp(a) == slurp(b));
  std::filesystem::remove(a);
  std::filesystem::remove(b);
}

TEST_CASE("waveform") {
  const auto path = temp_file("wave.csv");
  CHECK(invoke({"waveform", "synth", "--duty", "26.5", "--duration", "0.02", "-o",
             path.string()})
            .code == 0);
  const Result m = invoke({"waveform", "measure", "--input", path.string()});
  CHECK(m.out.find("duty 26.5 %") != std::string::npos);
  const Result t = invoke({"waveform", "transform", "--input", path.string(), "--attack",
                        "tlc555", "--format", "json"});
  std::istringstream lines(t.out);
  std::string evse, ev;
  std::getline(lines, evse);
  std::getline(lines, ev);
  CHECK(io::json::parse(ev)["duty"].get<double>() == doctest::Approx(17.41).epsilon(0.005));
  CHECK(invoke({"waveform", "transform", "--attack", "laser"}).code == cli::kExitUsage);
  std::filesystem::remove(path);
}

TEST_CASE("simulate bundled scenarios") {
  const auto scen = kData / "scenarios";
  const auto report = temp_file("report.json");
  const Result f = invoke({"simulate", (scen / "forced_charging.json").string(), "-o",
                        report.string()});
  CHECK(f.code == cli::kExitForcedCharging);
  CHECK(f.out.rfind("forced_charging: forced_charging", 0) == 0);
  CHECK(io::json::parse(slurp(report))["flags"]["unsolicited_energization"] == true);
  CHECK(invoke({"simulate", (scen / "serial_dos.json").string()}).code == cli::kExitDos);
  CHECK(invoke({"simulate", (scen / "benign.json").string()}).code == cli::kExitOk);
  CHECK(invoke({"simulate", (scen / "tlc555_rate.json").string()}).code ==
        cli::kExitRateReduced);
  CHECK(invoke({"simulate", (scen / "missing.json").string()}).code == cli::kExitUsage);
  std::filesystem::remove(report);
}

TEST_CASE("profiles file is merged over the bundled set") {
  const auto path = temp_file("profiles.json");
  std::ofstream(path) << R"({"chargers": {"slow": {"base": "charger2", "max_amps": 16}}})";
  const Result r = invoke({"--profiles", path.string(), "range", "--profile", "slow"});
  CHECK(r.code == 0);
  std::ofstream(path) << R"({"chargers": {"slow": {"max_amps": 52}}})";
  CHECK(invoke({"--profiles", path.string(), "range"}).code == cli::kExitUsage);
  std::filesystem::remove(path);
}

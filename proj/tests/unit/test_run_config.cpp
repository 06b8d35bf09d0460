#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "pontryagus/run_config.hpp"

#include <filesystem>
#include <fstream>

using namespace pontryagus;

namespace {

namespace fs = std::filesystem;

std::string write_ini(const std::string& name, const std::string& body) {
  const fs::path d = fs::temp_directory_path() / "pontryagus_test_run_config";
  fs::create_directories(d);
  const fs::path p = d / name;
  std::ofstream(p, std::ios::trunc) << body;
  return p.string();
}

}  // namespace

TEST_CASE("desk config loads with the documented values") {
  const RunConfig c = load_run_config(PONTRYAGUS_SOURCE_DIR "/configs/desk.ini");
  CHECK(c.seed == 42u);
  CHECK(c.mission.arrival.a_au == 1.5237);
  CHECK(c.mission.arrival.raan_deg == 49.56);
  CHECK(c.mission.tof_days == 407.0);
  CHECK(c.walk.n == 50);
  CHECK(c.walk.start_points == 10);
  CHECK(c.homotopy.alpha_tol == 0.99);
  CHECK(c.training.max_epochs == 100);
  CHECK(c.eval_transfers == 4);
  CHECK(c.rollout_update_fraction == 1e-3);
  CHECK(c.walk.seed == 42u);
  CHECK(c.training.seed == 42u);
}

TEST_CASE("missing keys keep their defaults") {
  const RunConfig c = load_run_config(write_ini("partial.ini", "[walk]\nn = 7\n"));
  CHECK(c.walk.n == 7);
  CHECK(c.walk.start_points == RunConfig{}.walk.start_points);
  CHECK(c.mission.m0_kg == 1000.0);
}

TEST_CASE("seed override reaches every consumer") {
  const std::string p = write_ini("seed.ini", "[run]\nseed = 5\n");
  CHECK(load_run_config(p).seed == 5u);
  const RunConfig c = load_run_config(p, "1234");
  CHECK(c.seed == 1234u);
  CHECK(c.walk.seed == 1234u);
  CHECK(c.training.seed == 1234u);
  CHECK(c.nominal_config().seed == 1234u);
  CHECK(load_run_config(p, "").seed == 5u);
  CHECK_THROWS_AS(load_run_config(p, "12x"), ConfigError);
  CHECK_THROWS_AS(load_run_config(p, "-3"), ConfigError);
}

TEST_CASE("bad files name the offending key") {
  auto message = [](const std::string& name, const std::string& body) {
    try {
      load_run_config(write_ini(name, body));
    } catch (const ConfigError& e) {
      return std::string(e.what());
    }
    return std::string("no error");
  };
  CHECK(message("unknown_key.ini", "[walk]\nsteps = 5\n").find("unknown key [walk] steps") != std::string::npos);
  CHECK(message("unknown_section.ini", "[extra]\nx = 1\n").find("unknown key [extra] x") != std::string::npos);
  CHECK(message("bad_int.ini", "[walk]\nn = 5.5\n").find("walk.n") != std::string::npos);
  CHECK(message("bad_real.ini", "[engine]\ntmax_N = fast\n").find("engine.tmax_N") != std::string::npos);
  CHECK(message("hyperbolic.ini", "[arrival]\ne = 1.2\n") != "no error");
  CHECK(message("no_threads.ini", "[run]\nthreads = -1\n").find("threads") != std::string::npos);
  CHECK(message("no_dir.ini", "[run]\noutput_dir =\n").find("output_dir") != std::string::npos);
  CHECK(message("fraction.ini", "[rollout]\nupdate_fraction = 2\n").find("update_fraction") != std::string::npos);
  CHECK(message("transfers.ini", "[evaluate]\ntransfers = 0\n").find("transfers") != std::string::npos);
  CHECK(message("lr.ini", "[training]\nlr0 = 0\n") != "no error");
  CHECK_THROWS_AS(load_run_config("/nonexistent/pontryagus.ini"), ConfigError);
}

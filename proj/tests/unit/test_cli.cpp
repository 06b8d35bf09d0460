#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

namespace {

namespace fs = std::filesystem;

struct Outcome {
  int code = -1;
  std::string output;  // stdout and stderr together
};

Outcome run_cli(const std::string& args) {
  const std::string cmd = std::string("'") + PONTRYAGUS_CLI + "' " + args + " 2>&1";
  Outcome o;
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  std::array<char, 4096> buf;
  while (std::fgets(buf.data(), buf.size(), pipe)) o.output += buf.data();
  const int status = pclose(pipe);
  o.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return o;
}

// Config whose output directory is a fresh scratch directory.
std::string scratch_config(const std::string& name, const std::string& extra = "") {
  const fs::path d = fs::temp_directory_path() / ("pontryagus_test_cli_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  const fs::path ini = d / "run.ini";
  std::ofstream(ini) << "[run]\noutput_dir = " << (d / "out").string() << "\n" << extra;
  return ini.string();
}

bool contains(const std::string& haystack, const std::string& needle) {
  return haystack.find(needle) != std::string::npos;
}

}  // namespace

TEST_CASE("help lists the subcommands") {
  const Outcome o = run_cli("--help");
  CHECK(o.code == 0);
  for (const char* sub : {"nominal", "generate", "train", "evaluate", "rollout", "export"}) {
    CHECK_MESSAGE(contains(o.output, sub), sub);
  }
  CHECK(run_cli("train --help").code == 0);
}

TEST_CASE("usage errors exit with 2") {
  const std::string ini = scratch_config("usage");
  CHECK(run_cli("").code == 2);
  CHECK(run_cli("nominal").code == 2);  // missing --config
  CHECK(run_cli("nominal -c " + ini + " --bogus").code == 2);
  CHECK(run_cli("frobnicate -c " + ini).code == 2);
  CHECK(run_cli("generate -c " + ini + " --alpha-label xoc").code == 2);
  CHECK(run_cli("nominal -c /nonexistent/run.ini").code == 2);
  CHECK(run_cli("rollout -c " + ini + " --update-fraction 2 --zero-thrust").code == 2);

  const Outcome t = run_cli("train -c " + ini + " --targets u,psi");
  CHECK(t.code == 2);
  CHECK(contains(t.output, "psi"));
}

TEST_CASE("invalid configs exit with 2") {
  const Outcome hyperbolic = run_cli("nominal -c " + scratch_config("hyperbolic", "[arrival]\ne = 1.2\n"));
  CHECK(hyperbolic.code == 2);
  CHECK(contains(hyperbolic.output, "config error"));
  const Outcome unknown = run_cli("nominal -c " + scratch_config("unknown", "[walk]\nsteps = 3\n"));
  CHECK(unknown.code == 2);
  CHECK(contains(unknown.output, "steps"));
}

TEST_CASE("missing prerequisites exit with 4") {
  const std::string ini = scratch_config("prereq");
  const Outcome moc = run_cli("generate -c " + ini + " --alpha-label moc");
  CHECK(moc.code == 4);
  CHECK(contains(moc.output, "qoc.csv"));
  CHECK(run_cli("generate -c " + ini + " --alpha-label qoc").code == 4);
  CHECK(run_cli("train -c " + ini).code == 4);
  CHECK(run_cli("evaluate -c " + ini + " --model nothing.txt").code == 4);
  CHECK(run_cli("rollout -c " + ini + " --zero-thrust").code == 4);
  CHECK(run_cli("export -c " + ini).code == 4);
}

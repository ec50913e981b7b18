#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <sys/wait.h>

#include "doctest.h"
#include "osvos/cli.hpp"
#include "osvos/error.hpp"

using namespace osvos;
using namespace osvos::cli;
namespace fs = std::filesystem;

namespace {

bool mentions(const std::vector<std::string>& errors, const std::string& needle) {
  for (const auto& e : errors) {
    if (e.find(needle) != std::string::npos) return true;
  }
  return false;
}

fs::path scratch() {
  const fs::path p = fs::temp_directory_path() / "osvos_test_cli";
  fs::create_directories(p);
  return p;
}

int run(const std::string& args) {
  const std::string cmd = std::string(OSVOS_BINARY) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("out-of-range momentum names the field and the legal range") {
  const auto r = parse_config("[parent]\nmomentum = 1.2\n");
  CHECK_FALSE(r.config.has_value());
  REQUIRE(r.errors.size() == 1);
  CHECK(r.errors[0].find("parent.momentum") != std::string::npos);
  CHECK(r.errors[0].find("[0, 1)") != std::string::npos);
}

TEST_CASE("a missing dataset root is reported with its path") {
  const auto r = parse_config("[data]\nroot = /nonexistent/osvos_data\n");
  REQUIRE(r.errors.size() == 1);
  CHECK(r.errors[0].find("/nonexistent/osvos_data") != std::string::npos);
  CHECK(r.errors[0].find("data.root") != std::string::npos);
}

TEST_CASE("a minimal config is completed with defaults") {
  const auto r = parse_config("# only a seed\n[run]\nseed = 42\n");
  REQUIRE(r.config.has_value());
  const protocol::ExperimentConfig defaults;
  CHECK(r.config->experiment.seed == 42);
  CHECK(r.config->experiment.n_train == defaults.n_train);
  CHECK(r.config->experiment.parent.iterations == defaults.parent.iterations);
  const auto j = to_json(*r.config);
  CHECK(j["experiment"]["seed"] == 42);
  CHECK(j["experiment"]["n_train"] == defaults.n_train);
  CHECK(j["experiment"]["timing_grid"].size() == defaults.timing_grid.size());
  CHECK(j["dataset_root"].is_null());
}

TEST_CASE("relative paths resolve against the config directory") {
  const fs::path dir = scratch();
  fs::create_directories(dir / "data");
  const auto r = parse_config("[data]\nroot = data\n[run]\nout = results\n", dir);
  REQUIRE(r.config.has_value());
  CHECK(*r.config->dataset_root == dir / "data");
  CHECK(r.config->out == dir / "results");
}

TEST_CASE("every error is collected, not just the first") {
  const std::string text =
      "seed = 1\n"
      "[bogus]\n"
      "[data]\n"
      "n_train = 0\n"
      "n_train = 3\n"
      "colour = red\n"
      "garbage line\n"
      "[snap]\n"
      "majority = 0\n"
      "contour_threshold = 1\n"
      "[eval]\n"
      "tau = abc\n";
  const auto r = parse_config(text);
  CHECK_FALSE(r.config.has_value());
  CHECK(mentions(r.errors, "before any [section]"));
  CHECK(mentions(r.errors, "bogus"));
  CHECK(mentions(r.errors, "more than once"));
  CHECK(mentions(r.errors, "colour"));
  CHECK(mentions(r.errors, "line 7"));
  CHECK(mentions(r.errors, "eval.tau"));
  CHECK(mentions(r.errors, "snap.majority"));
  CHECK(mentions(r.errors, "snap.contour_threshold"));
  CHECK(r.errors.size() >= 8);
}

TEST_CASE("check_config catches architecture and frame-size conflicts") {
  RunConfig c;
  c.experiment.frame_size = 34;
  c.experiment.arch.widths = {4, 8, 16};
  CHECK(mentions(check_config(c), "multiple of 4"));
  c = RunConfig{};
  c.experiment.arch.widths.clear();
  CHECK(mentions(check_config(c), "arch.widths"));
  CHECK(check_config(RunConfig{}).empty());
}

TEST_CASE("validate_config reads files and raises IoError when missing") {
  const fs::path file = scratch() / "ok.cfg";
  std::ofstream(file) << "[run]\nworkers = 2\n";
  const auto r = validate_config(file);
  REQUIRE(r.config.has_value());
  CHECK(r.config->experiment.workers == 2);
  CHECK_THROWS_AS(validate_config(scratch() / "missing.cfg"), IoError);
}

TEST_CASE("tool exit codes") {
  const fs::path dir = scratch();
  std::ofstream(dir / "bad.cfg") << "[parent]\nmomentum = 1.2\n";
  CHECK(run("--help") == 0);
  CHECK(run("generate --bogus-flag") == 2);
  CHECK(run("generate --config " + (dir / "bad.cfg").string() + " --out " + (dir / "o").string()) == 3);
  CHECK(run("generate --config " + (dir / "none.cfg").string() + " --out " + (dir / "o").string()) == 4);
  CHECK(run("evaluate --data " + (dir / "no_data").string() + " --pred " + (dir / "no_pred").string() + " --out " +
            (dir / "o").string()) != 0);
}

// Copyright 2026 The petcond Authors
// SPDX-License-Identifier: Apache-2.0

#include <catch_amalgamated.hpp>

#include <fstream>
#include <sstream>

#include "petcond/cli.hpp"
#include "petcond/ptf.hpp"
#include "support.hpp"

using namespace petcond;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

}  // namespace

TEST_CASE("usage errors exit with code 2", "[cli]") {
  CHECK(run({}).code == 2);
  CHECK(run({"frobnicate"}).code == 2);
  CHECK(run({"simulate"}).code == 2);  // no --config
  CHECK(run({"--config", "/nonexistent/run.json", "simulate"}).code == 2);
  CHECK(run({"denoise", "--input", "x.ptf"}).code == 2);
  CHECK(run({"--help"}).code == 0);
}

TEST_CASE("a decreasing denoise request is a constraint violation", "[cli]") {
  const auto r = run({"denoise", "--checkpoint", "/nonexistent", "--input", "x.ptf", "--level-in",
                      "1/2", "--level-out", "1/100", "--output", "y.ptf"});
  CHECK(r.code == 3);
  CHECK_THAT(r.err, Catch::Matchers::ContainsSubstring("must be higher"));
  CHECK(run({"denoise", "--checkpoint", "/nonexistent", "--input", "x.ptf", "--level-in", "1/2",
             "--output", "y.ptf"})
            .code == 4);
}

TEST_CASE("global options may follow the subcommand", "[cli]") {
  const auto dir = testing::scratch_dir("cli_sim");
  std::ofstream(dir / "run.json")
      << R"({"phantom": {"size": 16}, "simulate": {"n_phantoms": 3, "output_dir": "data"}})";
  const auto config = (dir / "run.json").string();
  CHECK(run({"simulate", "--config", config}).code == 0);
  CHECK(std::filesystem::exists(dir / "data" / "manifest.json"));
  CHECK(run({"--config", config, "simulate"}).code == 4);  // non-empty without --force
  CHECK(run({"--config", config, "simulate", "--force", "--seed", "5"}).code == 0);
}

TEST_CASE("report lists every missing input", "[cli]") {
  const auto dir = testing::scratch_dir("cli_report");
  std::ofstream(dir / "run.json") << R"({"evaluate": {"output_dir": "eval"}})";
  const auto r = run({"--config", (dir / "run.json").string(), "report"});
  CHECK(r.code == 4);
  CHECK_THAT(r.err, Catch::Matchers::ContainsSubstring("metrics.csv"));
  CHECK_THAT(r.err, Catch::Matchers::ContainsSubstring("comparison.csv"));
  CHECK_THAT(r.err, Catch::Matchers::ContainsSubstring("index.json"));
}

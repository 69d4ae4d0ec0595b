// Copyright 2026 The ClickSeg Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>

#include <sys/wait.h>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "clickseg/core/pnm.hpp"
#include "clickseg/eval/dataset.hpp"
#include "test_util.hpp"

namespace clickseg {
namespace {

namespace fs = std::filesystem;
using clickseg::testing::temp_dir;

int run(const std::string& args) {
  const std::string cmd = std::string(CLICKSEG_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int st = std::system(cmd.c_str());
  return WIFEXITED(st) ? WEXITSTATUS(st) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

TEST(Cli, ExitCodes) {
  EXPECT_EQ(run("--help"), 0);
  EXPECT_EQ(run("frobnicate"), 2);
  EXPECT_EQ(run("segment --image"), 2);
  EXPECT_EQ(run("segment --image /nonexistent.ppm --out /tmp/x.pgm"), 1);
}

TEST(Cli, SynthThenSegmentIsByteIdentical) {
  const fs::path dir = temp_dir("cli_segment");
  ASSERT_EQ(run("synth --out " + (dir / "data").string() + " --n 2 --kind two_color --seed 4"), 0);
  const auto data = eval::load_image_dataset(dir / "data");
  ASSERT_EQ(data.size(), 2u);
  const fs::path img = dir / "data" / "scene0000" / "image.ppm";

  std::ofstream(dir / "clicks.json") << nlohmann::json::array(
      {{{"x", 32}, {"y", 32}, {"polarity", "pos"}}, {{"x", 1}, {"y", 1}, {"polarity", "neg"}}});
  const std::string args = "segment --image " + img.string() + " --clicks " + (dir / "clicks.json").string() +
                           " --seed 9 --out ";
  ASSERT_EQ(run(args + (dir / "a.pgm").string()), 0);
  ASSERT_EQ(run(args + (dir / "b.pgm").string()), 0);
  const std::string a = slurp(dir / "a.pgm");
  EXPECT_FALSE(a.empty());
  EXPECT_EQ(a, slurp(dir / "b.pgm"));
  EXPECT_EQ(read_mask(dir / "a.pgm").dims(), data[0].image.dims());
}

TEST(Cli, EvalClicksWritesReport) {
  const fs::path dir = temp_dir("cli_eval");
  ASSERT_EQ(run("synth --out " + (dir / "data").string() + " --n 2 --kind two_color --seed 4"), 0);
  const std::string args = "eval clicks --root " + (dir / "data").string() + " --max-clicks 5 --report " +
                                  (dir / "r.json").string() + " --csv " + (dir / "r.csv").string();
  ASSERT_EQ(run(args), 0);
  const auto rep = nlohmann::json::parse(slurp(dir / "r.json"));
  EXPECT_EQ(rep.at("records").size(), 2u);
  EXPECT_EQ(slurp(dir / "r.csv").rfind(eval::csv_header(), 0), 0u);
  EXPECT_EQ(run("eval clicks --root " + (dir / "missing").string()), 1);
}

}  // namespace
}  // namespace clickseg

// Copyright 2026 The IKMR Authors.
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

#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "ikmr/io.hpp"

using namespace ikmr;
namespace fs = std::filesystem;

namespace {

struct RunResult {
  int code;
  std::string out;
  std::string err;
};

const std::string kCli = IKMR_CLI_PATH;
const std::string kConfigs = IKMR_CONFIG_DIR;

fs::path work_dir() {
  static const fs::path dir = [] {
    fs::path p = fs::temp_directory_path() / "ikmr_cli_test";
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
  }();
  return dir;
}

RunResult run(const std::string& args) {
  const std::string out_path = (work_dir() / "stdout.txt").string();
  const std::string err_path = (work_dir() / "stderr.txt").string();
  const std::string cmd =
      kCli + " " + args + " > " + out_path + " 2> " + err_path;
  const int raw = std::system(cmd.c_str());
  RunResult res;
  res.code = WEXITSTATUS(raw);
  res.out = read_text_file(out_path);
  res.err = read_text_file(err_path);
  return res;
}

std::string cfg(const std::string& name) {
  return (fs::path(kConfigs) / name).string();
}

std::string wp(const std::string& name) {
  return (work_dir() / name).string();
}

// Tiny but real training setup shared by the pipeline cases.
const std::string kTinyNet =
    " --window 8 --channels1 6 --channels2 8 --static-channels 4 --kernel 3";

void require_pipeline_artifacts() {
  static bool done = false;
  if (done) return;
  REQUIRE(run("datagen --skeleton-a " + cfg("toy_human.json") +
              " --skeleton-b " + cfg("toy_robot.json") +
              " --count 6 --seed 5 --window 8 --output " + wp("ds.json"))
              .code == 0);
  REQUIRE(run("pretrain --dataset " + wp("ds.json") + " --skeleton-a " +
              cfg("toy_human.json") + " --skeleton-b " + cfg("toy_robot.json") +
              " --model-out " + wp("model") + " --steps 8 --batch-size 2" +
              " --seed 3 --log " + wp("pretrain.jsonl") + kTinyNet)
              .code == 0);
  done = true;
}

}  // namespace

TEST_CASE("datagen is deterministic per seed and honors IKMR_SEED") {
  const RunResult r1 =
      run("datagen --skeleton-a " + cfg("toy_human.json") + " --skeleton-b " +
          cfg("toy_robot.json") + " --count 3 --seed 11 --window 8 --output " +
          wp("d1.json"));
  CHECK(r1.code == 0);
  const RunResult r2 =
      run("datagen --skeleton-a " + cfg("toy_human.json") + " --skeleton-b " +
          cfg("toy_robot.json") + " --count 3 --seed 11 --window 8 --output " +
          wp("d2.json"));
  CHECK(r2.code == 0);
  CHECK(read_text_file(wp("d1.json")) == read_text_file(wp("d2.json")));

  // Environment fallback produces the same bytes as --seed.
  const RunResult r3 = run("datagen --skeleton-a " + cfg("toy_human.json") +
                           " --skeleton-b " + cfg("toy_robot.json") +
                           " --count 3 --window 8 --output " + wp("d3.json"));
  (void)r3;  // no env set here; just verify CLI accepted the invocation
  setenv("IKMR_SEED", "11", 1);
  const RunResult r4 = run("datagen --skeleton-a " + cfg("toy_human.json") +
                           " --skeleton-b " + cfg("toy_robot.json") +
                           " --count 3 --window 8 --output " + wp("d4.json"));
  unsetenv("IKMR_SEED");
  CHECK(r4.code == 0);
  CHECK(read_text_file(wp("d4.json")) == read_text_file(wp("d1.json")));
}

TEST_CASE("unknown flags are rejected with exit code 1") {
  const RunResult r = run("datagen --no-such-flag 1");
  CHECK(r.code == 1);
}

TEST_CASE("pretrain writes model artifacts and a complete loss log") {
  require_pipeline_artifacts();
  CHECK(fs::exists(wp("model.json")));
  CHECK(fs::exists(wp("model.ckpt")));
  std::ifstream log(wp("pretrain.jsonl"));
  int lines = 0;
  std::string line;
  while (std::getline(log, line)) {
    CHECK(line.find("\"step\":" + std::to_string(lines + 1)) !=
          std::string::npos);
    CHECK(line.find("loss_total") != std::string::npos);
    CHECK(line.find("loss_recon") != std::string::npos);
    CHECK(line.find("loss_align") != std::string::npos);
    CHECK(line.find("loss_consis") != std::string::npos);
    ++lines;
  }
  CHECK(lines == 8);
}

TEST_CASE("pretrain resumes without a gap in step numbering") {
  require_pipeline_artifacts();
  const RunResult r =
      run("pretrain --dataset " + wp("ds.json") + " --skeleton-a " +
          cfg("toy_human.json") + " --skeleton-b " + cfg("toy_robot.json") +
          " --model-out " + wp("model_resumed") + " --resume " + wp("model") +
          " --steps 4 --batch-size 2 --seed 3 --log " + wp("pretrain.jsonl") +
          kTinyNet);
  CHECK(r.code == 0);
  std::ifstream log(wp("pretrain.jsonl"));
  std::string line;
  int expect = 1;
  while (std::getline(log, line)) {
    CHECK(line.find("\"step\":" + std::to_string(expect)) !=
          std::string::npos);
    ++expect;
  }
  CHECK(expect == 13);  // 8 original + 4 resumed, numbered 1..12
}

TEST_CASE("retarget: single clip, directory batch, corrupt input") {
  require_pipeline_artifacts();
  // Pull window-length clips out of the dataset for retarget inputs.
  const PairedDataset ds = load_dataset(wp("ds.json"));
  fs::create_directories(wp("clips"));
  for (int i = 0; i < 4; ++i) {
    save_motion(wp("clips/clip" + std::to_string(i) + ".json"),
                ds.pairs[i].first);
  }

  const std::string model_flags = " --model " + wp("model") +
                                  " --skeleton-a " + cfg("toy_human.json") +
                                  " --skeleton-b " + cfg("toy_robot.json");

  const RunResult single = run("retarget" + model_flags + " --input " +
                               wp("clips/clip0.json") + " --output " +
                               wp("out_single.json"));
  CHECK(single.code == 0);
  const MotionClip out = load_motion(wp("out_single.json"));
  CHECK(out.skeleton == "toy_robot");
  CHECK(out.frames() == 8);

  // Directory mode with 1 worker vs 2 workers: byte-identical outputs.
  CHECK(run("retarget" + model_flags + " --input " + wp("clips") +
            " --output " + wp("out_seq") + " --workers 1")
            .code == 0);
  CHECK(run("retarget" + model_flags + " --input " + wp("clips") +
            " --output " + wp("out_par") + " --workers 2")
            .code == 0);
  for (int i = 0; i < 4; ++i) {
    const std::string name = "clip" + std::to_string(i) + ".json";
    CHECK(read_text_file(wp("out_seq/" + name)) ==
          read_text_file(wp("out_par/" + name)));
  }
  // The single-clip output equals the batch output for the same clip.
  CHECK(read_text_file(wp("out_single.json")) ==
        read_text_file(wp("out_seq/clip0.json")));

  // Corrupt one quaternion row: the error names the file and frame.
  std::string text = read_text_file(wp("clips/clip1.json"));
  const auto at = text.find("\"rotations\"");
  const auto outer = text.find('[', at);
  const auto frame = text.find('[', outer + 1);
  const auto quat = text.find('[', frame + 1);
  const auto end = text.find(']', quat);
  text.replace(quat, end - quat + 1, "[9.0, 9.0, 9.0, 9.0]");
  write_text_file(wp("clips/clip1.json"), text);
  const RunResult bad = run("retarget" + model_flags + " --input " +
                            wp("clips/clip1.json") + " --output " +
                            wp("bad_out.json"));
  CHECK(bad.code == 1);
  CHECK(bad.err.find("clip1.json") != std::string::npos);
  CHECK(bad.err.find("frame 0") != std::string::npos);
  write_text_file(wp("clips/clip1.json"),
                  read_text_file(wp("out_seq/clip1.json")));
  fs::remove(wp("clips/clip1.json"));
}

TEST_CASE("clips longer than the window are split, retargeted, and blended") {
  require_pipeline_artifacts();
  // Build a 20-frame clip by repeating a window with smooth variation.
  const PairedDataset ds = load_dataset(wp("ds.json"));
  const SkeletonTopology human = load_skeleton(cfg("toy_human.json"));
  MotionClip long_clip = make_rest_clip(human, 20);
  for (int t = 0; t < 20; ++t) {
    for (int j = 0; j < human.joint_count(); ++j) {
      long_clip.rot(t, j) =
          quat_from_axis_angle(human.axes[j], 0.6 * std::sin(0.3 * t + j));
    }
  }
  save_motion(wp("long_in.json"), long_clip);
  const RunResult r = run("retarget --model " + wp("model") +
                          " --skeleton-a " + cfg("toy_human.json") +
                          " --skeleton-b " + cfg("toy_robot.json") +
                          " --input " + wp("long_in.json") + " --output " +
                          wp("long_out.json"));
  CHECK(r.code == 0);
  const MotionClip out = load_motion(wp("long_out.json"));
  CHECK(out.frames() == 20);
  CHECK(out.skeleton == "toy_robot");
  const SkeletonTopology robot = load_skeleton(cfg("toy_robot.json"));
  CHECK_NOTHROW(out.validate(&robot));
}

TEST_CASE("finetune trains decoder B and validates skeleton pairing") {
  require_pipeline_artifacts();
  const RunResult r =
      run("finetune --model " + wp("model") + " --skeleton-a " +
          cfg("toy_human.json") + " --skeleton-b " + cfg("toy_robot.json") +
          " --dataset " + wp("ds.json") + " --limits " +
          cfg("limits_toy_robot.json") + " --model-out " + wp("model_ft") +
          " --steps 3 --batch-size 2 --seed 4 --log " + wp("ft.jsonl"));
  CHECK(r.code == 0);
  CHECK(fs::exists(wp("model_ft.json")));
  std::ifstream log(wp("ft.jsonl"));
  std::string line;
  int lines = 0;
  while (std::getline(log, line)) {
    CHECK(line.find("loss_recon_b") != std::string::npos);
    CHECK(line.find("loss_ee") != std::string::npos);
    ++lines;
  }
  CHECK(lines == 3);

  // A dataset whose target skeleton differs from the sidecar is refused.
  REQUIRE(run("datagen --skeleton-a " + cfg("toy_human.json") +
              " --skeleton-b " + cfg("toy_human.json") +
              " --count 2 --seed 1 --window 8 --output " + wp("ds_bad.json"))
              .code == 0);
  const RunResult bad =
      run("finetune --model " + wp("model") + " --skeleton-a " +
          cfg("toy_human.json") + " --skeleton-b " + cfg("toy_robot.json") +
          " --dataset " + wp("ds_bad.json") + " --limits " +
          cfg("limits_toy_robot.json") + " --model-out " + wp("model_bad") +
          " --steps 1");
  CHECK(bad.code == 1);
}

TEST_CASE("eval writes deterministic reports") {
  require_pipeline_artifacts();
  const std::string common =
      "eval --model " + wp("model") + " --finetuned " + wp("model") +
      " --skeleton-a " + cfg("toy_human.json") + " --skeleton-b " +
      cfg("toy_robot.json") + " --dataset " + wp("ds.json") + " --limits " +
      cfg("limits_toy_robot.json") + " --noise-levels 0,0.02 --seed 9";
  CHECK(run(common + " --report " + wp("rep1")).code == 0);
  CHECK(run(common + " --report " + wp("rep2")).code == 0);
  for (const std::string name :
       {"smoothness.json", "noise_sweep.csv", "noise_sweep.json",
        "latent_correlation.json", "feasibility.json"}) {
    CHECK(read_text_file(wp("rep1/" + name)) ==
          read_text_file(wp("rep2/" + name)));
  }
  // Smoothness values are present and non-negative.
  const std::string sm = read_text_file(wp("rep1/smoothness.json"));
  CHECK(sm.find("mean_acc") != std::string::npos);
  CHECK(sm.find("\"mean_acc\": -") == std::string::npos);
  CHECK(sm.find("\"mean_jerk\": -") == std::string::npos);
  // The sweep CSV has a header plus one row per level.
  const std::string csv = read_text_file(wp("rep1/noise_sweep.csv"));
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);
}

TEST_CASE("the g1-like config trains and retargets end to end") {
  // 29-joint target skeleton: exercises pooling derivation, correspondence
  // across different joint counts, and the full pipeline at small scale.
  REQUIRE(run("datagen --skeleton-a " + cfg("toy_human.json") +
              " --skeleton-b " + cfg("g1_like.json") +
              " --count 2 --seed 6 --window 8 --output " + wp("ds_g1.json"))
              .code == 0);
  REQUIRE(run("pretrain --dataset " + wp("ds_g1.json") + " --skeleton-a " +
              cfg("toy_human.json") + " --skeleton-b " + cfg("g1_like.json") +
              " --model-out " + wp("model_g1") +
              " --steps 2 --batch-size 1 --seed 1" + kTinyNet)
              .code == 0);
  const PairedDataset ds = load_dataset(wp("ds_g1.json"));
  save_motion(wp("g1_in.json"), ds.pairs[0].first);
  const RunResult r = run("retarget --model " + wp("model_g1") +
                          " --skeleton-a " + cfg("toy_human.json") +
                          " --skeleton-b " + cfg("g1_like.json") +
                          " --input " + wp("g1_in.json") + " --output " +
                          wp("g1_out.json"));
  CHECK(r.code == 0);
  const MotionClip out = load_motion(wp("g1_out.json"));
  CHECK(out.skeleton == "g1_like");
  CHECK(out.joints() == 29);
}

TEST_CASE("bench emits one CSV row per batch size with positive fps") {
  require_pipeline_artifacts();
  const RunResult r =
      run("bench --model " + wp("model") + " --skeleton-a " +
          cfg("toy_human.json") + " --skeleton-b " + cfg("toy_robot.json") +
          " --batch-sizes 1,4 --repeats 2 --workers 2 --seed 2 --output " +
          wp("bench.csv"));
  CHECK(r.code == 0);
  const std::string csv = read_text_file(wp("bench.csv"));
  CHECK(csv.find("batch_size,workers,precision,frames_per_second,ms_per_clip") == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);
  CHECK(csv.find("f64") != std::string::npos);

  const RunResult f32 =
      run("bench --model " + wp("model") + " --skeleton-a " +
          cfg("toy_human.json") + " --skeleton-b " + cfg("toy_robot.json") +
          " --batch-sizes 1 --repeats 1 --f32 --seed 2 --output " +
          wp("bench32.csv"));
  CHECK(f32.code == 0);
  CHECK(read_text_file(wp("bench32.csv")).find("f32") != std::string::npos);
}

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

#include <CLI11.hpp>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>

#include "ikmr/io.hpp"
#include "ikmr/metrics.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace ikmr;

namespace {

constexpr int kExitValidation = 1;
constexpr int kExitRuntime = 2;

std::string strip_model_ext(std::string stem) {
  if (stem.size() > 5 && stem.substr(stem.size() - 5) == ".json") {
    stem.resize(stem.size() - 5);
  } else if (stem.size() > 5 && stem.substr(stem.size() - 5) == ".ckpt") {
    stem.resize(stem.size() - 5);
  }
  return stem;
}

OptimizerKind parse_optimizer(const std::string& name) {
  if (name == "adam") return OptimizerKind::Adam;
  if (name == "sgd") return OptimizerKind::Sgd;
  throw ConfigError("unknown optimizer '" + name + "' (use adam or sgd)");
}

std::vector<double> parse_levels(const std::string& csv) {
  std::vector<double> out;
  std::size_t at = 0;
  while (at < csv.size()) {
    const std::size_t comma = csv.find(',', at);
    out.push_back(std::stod(csv.substr(at, comma - at)));
    if (comma == std::string::npos) break;
    at = comma + 1;
  }
  return out;
}

std::vector<int> parse_ints(const std::string& csv) {
  std::vector<int> out;
  for (const double v : parse_levels(csv)) out.push_back(static_cast<int>(v));
  return out;
}

// Optimizer state <-> checkpoint extras.
std::vector<NamedTensorData> optimizer_extras(
    const OptimizerState& state,
    const std::vector<std::pair<std::string, Tensor>>& params) {
  std::vector<NamedTensorData> out;
  for (std::size_t i = 0; i < params.size(); ++i) {
    out.push_back({"opt_m/" + params[i].first, params[i].second.shape(),
                   state.m[i]});
    out.push_back({"opt_v/" + params[i].first, params[i].second.shape(),
                   state.v[i]});
  }
  out.push_back({"opt_t", Shape{},
                 ArrayXd::Constant(1, static_cast<double>(state.t))});
  return out;
}

bool optimizer_from_extras(const std::vector<NamedTensorData>& extras,
                           const std::vector<std::pair<std::string, Tensor>>& params,
                           OptimizerState& state) {
  std::map<std::string, const NamedTensorData*> by_name;
  for (const auto& e : extras) by_name[e.name] = &e;
  if (!by_name.count("opt_t")) return false;
  state.m.clear();
  state.v.clear();
  for (const auto& [name, p] : params) {
    const auto m = by_name.find("opt_m/" + name);
    const auto v = by_name.find("opt_v/" + name);
    if (m == by_name.end() || v == by_name.end()) return false;
    state.m.push_back(m->second->values);
    state.v.push_back(v->second->values);
  }
  state.t = static_cast<std::int64_t>(by_name["opt_t"]->values(0));
  return true;
}

void write_jsonl(const std::string& path, const std::vector<json>& records,
                 bool append) {
  std::ofstream out(path, append ? std::ios::app : std::ios::trunc);
  if (!out) throw FormatError("cannot write '" + path + "'");
  for (const auto& r : records) out << r.dump() << "\n";
}

json feasibility_json(const FeasibilityReport& rep) {
  return json{{"position_violations", rep.position_violations},
              {"velocity_violations", rep.velocity_violations},
              {"acceleration_violations", rep.acceleration_violations},
              {"ground_violations", rep.ground_violations},
              {"max_position_excess", rep.max_position_excess},
              {"max_velocity_excess", rep.max_velocity_excess},
              {"max_acceleration_excess", rep.max_acceleration_excess},
              {"max_ground_excess", rep.max_ground_excess}};
}

// Retarget a clip of any length: window-length clips go straight through,
// longer clips are windowed with an 8-frame overlap (less for tiny windows)
// and log-space seam blending.
MotionClip retarget_any(const RetargetModel& model, const MotionClip& clip,
                        int workers) {
  const int window = model.config.window;
  if (clip.frames() == window) return retarget(model, clip);
  const int overlap = std::min(8, window / 2);
  WindowSplit split = split_windows(clip, window, overlap);
  split.windows = retarget_batch(model, split.windows, workers);
  MotionClip out = blend_windows(split, clip.frames(), overlap);
  out.fps = clip.fps;
  return out;
}

struct ModelBundle {
  SkeletonTopology skel_a, skel_b;
  LoadedModel loaded;
};

ModelBundle load_bundle(const std::string& model_stem,
                        const std::string& skel_a_path,
                        const std::string& skel_b_path) {
  ModelBundle b;
  b.skel_a = load_skeleton(skel_a_path);
  b.skel_b = load_skeleton(skel_b_path);
  b.loaded = load_model(strip_model_ext(model_stem), b.skel_a, b.skel_b);
  return b;
}

// ---------------------------------------------------------------------------
// Subcommands
// ---------------------------------------------------------------------------

int cmd_datagen(const std::string& skel_a_path, const std::string& skel_b_path,
                int count, std::uint64_t seed, const std::string& output,
                int window, double fps, double amplitude_scale) {
  const SkeletonTopology a = load_skeleton(skel_a_path);
  const SkeletonTopology b = load_skeleton(skel_b_path);
  SyntheticOptions opts;
  opts.window = window;
  opts.fps = fps;
  opts.amplitude_scale = amplitude_scale;
  const PairedDataset ds = generate_synthetic_pairs(a, b, count, seed, opts);
  save_dataset(output, ds);
  std::cout << "wrote " << ds.size() << " pairs to " << output << "\n";
  return 0;
}

int cmd_pretrain(const std::string& dataset_path,
                 const std::string& skel_a_path, const std::string& skel_b_path,
                 const std::string& model_out, const std::string& resume,
                 TrainConfig cfg, const std::string& log_path, int window,
                 int channels1, int channels2, int static_channels, int kernel,
                 std::uint64_t init_seed, const std::string& optimizer_name) {
  cfg.optimizer = parse_optimizer(optimizer_name);
  const SkeletonTopology a = load_skeleton(skel_a_path);
  const SkeletonTopology b = load_skeleton(skel_b_path);
  const PairedDataset ds = load_dataset(dataset_path);
  if (ds.skeleton_a != a.name || ds.skeleton_b != b.name) {
    throw ConfigError("dataset skeletons (" + ds.skeleton_a + "/" +
                      ds.skeleton_b + ") do not match the supplied files");
  }

  RetargetModel model;
  OptimizerState state;
  bool has_state = false;
  int start_step = 0;
  if (!resume.empty()) {
    LoadedModel loaded = load_model(strip_model_ext(resume), a, b);
    model = std::move(loaded.model);
    start_step = loaded.meta.trained_steps;
    has_state =
        optimizer_from_extras(loaded.extras, named_parameters(model), state);
  } else {
    ModelConfig mc;
    mc.window = window;
    mc.conv_channels1 = channels1;
    mc.conv_channels2 = channels2;
    mc.static_channels = static_channels;
    mc.kernel = kernel;
    mc.init_seed = init_seed;
    model = make_model(a, b, mc);
  }
  if (ds.window != model.config.window) {
    throw ConfigError("dataset window " + std::to_string(ds.window) +
                      " does not match model window " +
                      std::to_string(model.config.window));
  }

  // When resuming without stored optimizer state, `state` is empty and the
  // optimizer starts from fresh moments.
  (void)has_state;
  const auto history = pretrain(model, ds, cfg, &state, start_step);

  if (!log_path.empty()) {
    std::vector<json> records;
    for (const auto& h : history) {
      records.push_back(json{{"step", h.step},
                             {"loss_total", h.total},
                             {"loss_recon", h.recon},
                             {"loss_align", h.align},
                             {"loss_consis", h.consis}});
    }
    write_jsonl(log_path, records, /*append=*/!resume.empty());
  }

  ModelMeta meta;
  meta.trained_steps = start_step + cfg.steps;
  save_model(strip_model_ext(model_out), model, meta,
             optimizer_extras(state, named_parameters(model)));
  std::cout << "pretrained " << cfg.steps << " steps (total "
            << meta.trained_steps << "), final loss "
            << (history.empty() ? 0.0 : history.back().total) << "\n";
  return 0;
}

int cmd_finetune(const std::string& model_stem, const std::string& skel_a_path,
                 const std::string& skel_b_path, const std::string& dataset_path,
                 const std::string& limits_path, const std::string& model_out,
                 TrainConfig cfg, const std::string& log_path,
                 const std::string& optimizer_name) {
  cfg.optimizer = parse_optimizer(optimizer_name);
  ModelBundle bundle = load_bundle(model_stem, skel_a_path, skel_b_path);
  RetargetModel& model = bundle.loaded.model;
  const PairedDataset ds = load_dataset(dataset_path);
  if (ds.skeleton_a != model.skel_a.name || ds.skeleton_b != model.skel_b.name) {
    throw ConfigError("dataset skeletons (" + ds.skeleton_a + "/" +
                      ds.skeleton_b + ") do not match the model sidecar (" +
                      model.skel_a.name + "/" + model.skel_b.name + ")");
  }
  const DynamicsLimits limits = load_limits(limits_path);

  // Feasible targets: dynamics-filtered retargets of the human clips using
  // the pretrained decoder, paired with the clips that produced them.
  std::vector<MotionClip> human, feasible;
  human.reserve(ds.size());
  for (const auto& [a, b] : ds.pairs) {
    human.push_back(a);
    feasible.push_back(
        dynamics_filter(model.skel_b, retarget(model, a), limits));
  }

  const auto history = finetune(model, human, feasible, cfg);

  if (!log_path.empty()) {
    std::vector<json> records;
    for (const auto& h : history) {
      records.push_back(json{{"step", h.step},
                             {"loss_recon_b", h.recon_b},
                             {"loss_ee", h.ee}});
    }
    write_jsonl(log_path, records, /*append=*/false);
  }

  ModelMeta meta = bundle.loaded.meta;
  meta.finetuned_steps += cfg.steps;
  save_model(strip_model_ext(model_out), model, meta);
  std::cout << "finetuned " << cfg.steps << " steps, final ee loss "
            << (history.empty() ? 0.0 : history.back().ee) << "\n";
  return 0;
}

int cmd_retarget(const std::string& model_stem, const std::string& skel_a_path,
                 const std::string& skel_b_path, const std::string& input,
                 const std::string& output, int workers) {
  const ModelBundle bundle = load_bundle(model_stem, skel_a_path, skel_b_path);
  const RetargetModel& model = bundle.loaded.model;

  if (fs::is_directory(input)) {
    fs::create_directories(output);
    std::vector<std::string> stems;
    std::vector<MotionClip> clips;
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(input)) {
      if (entry.path().extension() == ".json") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& path : files) {
      clips.push_back(load_motion(path.string()));
      stems.push_back(path.stem().string());
    }
    if (clips.empty()) throw ConfigError("no motion files in " + input);

    // Uniform window-length batches go through the parallel path; anything
    // longer is windowed per clip.
    std::vector<MotionClip> outputs(clips.size());
    bool all_window = true;
    for (const auto& c : clips) {
      all_window = all_window && c.frames() == model.config.window;
    }
    if (all_window) {
      outputs = retarget_batch(model, clips, workers);
    } else {
      for (std::size_t i = 0; i < clips.size(); ++i) {
        outputs[i] = retarget_any(model, clips[i], workers);
      }
    }
    for (std::size_t i = 0; i < clips.size(); ++i) {
      save_motion((fs::path(output) / (stems[i] + ".json")).string(),
                  outputs[i]);
    }
    std::cout << "retargeted " << clips.size() << " clips to " << output
              << "\n";
  } else {
    const MotionClip clip = load_motion(input);
    save_motion(output, retarget_any(model, clip, workers));
    std::cout << "retargeted " << input << " -> " << output << "\n";
  }
  return 0;
}

int cmd_eval(const std::string& model_stem, const std::string& finetuned_stem,
             const std::string& skel_a_path, const std::string& skel_b_path,
             const std::string& dataset_path, const std::string& levels_csv,
             const std::string& limits_path, const std::string& report_dir,
             std::uint64_t seed) {
  const ModelBundle bundle = load_bundle(model_stem, skel_a_path, skel_b_path);
  const RetargetModel& model = bundle.loaded.model;
  const PairedDataset ds = load_dataset(dataset_path);
  fs::create_directories(report_dir);

  std::vector<MotionClip> clips_a;
  for (const auto& [a, b] : ds.pairs) clips_a.push_back(a);

  // Smoothness of retargeted outputs, pretrained vs (optionally) finetuned.
  auto smoothness_of = [&](const RetargetModel& m) {
    SmoothnessReport acc;
    for (const auto& clip : clips_a) {
      const SmoothnessReport r = mean_angular_acc_jerk(retarget(m, clip));
      acc.mean_acc += r.mean_acc;
      acc.mean_jerk += r.mean_jerk;
    }
    acc.mean_acc /= static_cast<double>(clips_a.size());
    acc.mean_jerk /= static_cast<double>(clips_a.size());
    return acc;
  };
  const SmoothnessReport pre = smoothness_of(model);
  json smoothness{{"pretrained",
                   json{{"mean_acc", pre.mean_acc},
                        {"mean_jerk", pre.mean_jerk}}}};
  if (!finetuned_stem.empty()) {
    const ModelBundle ft = load_bundle(finetuned_stem, skel_a_path, skel_b_path);
    const SmoothnessReport post = smoothness_of(ft.loaded.model);
    smoothness["finetuned"] =
        json{{"mean_acc", post.mean_acc}, {"mean_jerk", post.mean_jerk}};
    smoothness["jerk_decreased"] = post.mean_jerk <= pre.mean_jerk;
  }
  write_text_file((fs::path(report_dir) / "smoothness.json").string(),
                  smoothness.dump(2) + "\n");

  // Noise sweep, JSON + CSV.
  const std::vector<double> levels = parse_levels(levels_csv);
  const auto sweep = noise_sweep(model, clips_a, levels, seed);
  std::string csv = "noise_std,akte,akja,akja_source_root\n";
  json sweep_json = json::array();
  for (const auto& p : sweep) {
    csv += json(p.noise_std).dump() + "," + json(p.akte).dump() + "," +
           json(p.akja).dump() + "," + json(p.akja_source_root).dump() + "\n";
    sweep_json.push_back(json{{"noise_std", p.noise_std},
                              {"akte", p.akte},
                              {"akja", p.akja},
                              {"akja_source_root", p.akja_source_root}});
  }
  write_text_file((fs::path(report_dir) / "noise_sweep.csv").string(), csv);
  write_text_file((fs::path(report_dir) / "noise_sweep.json").string(),
                  sweep_json.dump(2) + "\n");

  // Latent correlation matrix.
  const Eigen::MatrixXd corr = latent_correlation_matrix(model, ds);
  double diag = 0.0, off = 0.0;
  json matrix = json::array();
  for (Eigen::Index i = 0; i < corr.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < corr.cols(); ++j) {
      row.push_back(corr(i, j));
      (i == j ? diag : off) += corr(i, j);
    }
    matrix.push_back(std::move(row));
  }
  diag /= static_cast<double>(corr.rows());
  off /= static_cast<double>(corr.rows() * (corr.rows() - 1));
  write_text_file((fs::path(report_dir) / "latent_correlation.json").string(),
                  json{{"matrix", matrix},
                       {"mean_diagonal", diag},
                       {"mean_off_diagonal", off}}
                          .dump(2) +
                      "\n");

  // Feasibility of filtered retargets.
  const DynamicsLimits limits = load_limits(limits_path);
  int nonzero = 0;
  FeasibilityReport worst;
  for (const auto& clip : clips_a) {
    const MotionClip filtered =
        dynamics_filter(model.skel_b, retarget(model, clip), limits);
    const FeasibilityReport rep =
        feasibility_report(model.skel_b, filtered, limits);
    if (!rep.all_zero()) ++nonzero;
    worst.position_violations += rep.position_violations;
    worst.velocity_violations += rep.velocity_violations;
    worst.acceleration_violations += rep.acceleration_violations;
    worst.ground_violations += rep.ground_violations;
  }
  write_text_file((fs::path(report_dir) / "feasibility.json").string(),
                  json{{"clips", clips_a.size()},
                       {"clips_with_violations", nonzero},
                       {"totals", feasibility_json(worst)}}
                          .dump(2) +
                      "\n");

  std::cout << "eval reports written to " << report_dir << "\n";
  return 0;
}

int cmd_bench(const std::string& model_stem, const std::string& skel_a_path,
              const std::string& skel_b_path, const std::string& batches_csv,
              int repeats, int workers, bool f32, const std::string& output,
              std::uint64_t seed) {
  const ModelBundle bundle = load_bundle(model_stem, skel_a_path, skel_b_path);
  const RetargetModel& model = bundle.loaded.model;
  const std::vector<int> batch_sizes = parse_ints(batches_csv);
  if (batch_sizes.empty()) throw ConfigError("no batch sizes given");
  const int max_batch =
      *std::max_element(batch_sizes.begin(), batch_sizes.end());

  SyntheticOptions opts;
  opts.window = model.config.window;
  const PairedDataset ds =
      generate_synthetic_pairs(model.skel_a, model.skel_b, max_batch, seed,
                               opts);

  std::string csv = "batch_size,workers,precision,frames_per_second,ms_per_clip\n";
  auto run_rows = [&](bool use_f32) {
    for (const int batch : batch_sizes) {
      std::vector<MotionClip> clips;
      clips.reserve(batch);
      for (int i = 0; i < batch; ++i) clips.push_back(ds.pairs[i].first);
      const int w = std::max(1, std::min(workers, batch));
      // Warm-up pass, then timed repeats.
      if (use_f32) {
        retarget_batch_f32(model, clips, w);
      } else {
        retarget_batch(model, clips, w);
      }
      const auto t0 = std::chrono::steady_clock::now();
      for (int r = 0; r < repeats; ++r) {
        if (use_f32) {
          retarget_batch_f32(model, clips, w);
        } else {
          retarget_batch(model, clips, w);
        }
      }
      const double sec =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
              .count();
      const double frames =
          static_cast<double>(batch) * model.config.window * repeats;
      const double fps_rate = frames / sec;
      const double ms_per_clip = 1000.0 * sec / (batch * repeats);
      csv += std::to_string(batch) + "," + std::to_string(w) + "," +
             (use_f32 ? "f32" : "f64") + "," + json(fps_rate).dump() + "," +
             json(ms_per_clip).dump() + "\n";
    }
  };
  run_rows(false);
  if (f32) run_rows(true);

  if (output.empty()) {
    std::cout << csv;
  } else {
    write_text_file(output, csv);
    std::cout << "wrote " << output << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"skeleton-aware motion retargeting engine"};
  app.require_subcommand(1);

  std::uint64_t seed = 0;

  // datagen
  auto* datagen = app.add_subcommand("datagen", "generate a synthetic paired dataset");
  std::string dg_skel_a, dg_skel_b, dg_output;
  int dg_count = 256, dg_window = 64;
  double dg_fps = 30.0, dg_amp = 1.0;
  datagen->add_option("--skeleton-a", dg_skel_a, "source skeleton file")->required();
  datagen->add_option("--skeleton-b", dg_skel_b, "target skeleton file")->required();
  datagen->add_option("--count", dg_count, "number of window pairs");
  datagen->add_option("--seed", seed, "RNG seed")->envname("IKMR_SEED");
  datagen->add_option("--output", dg_output, "dataset file to write")->required();
  datagen->add_option("--window", dg_window, "frames per window");
  datagen->add_option("--fps", dg_fps, "frames per second");
  datagen->add_option("--amplitude-scale", dg_amp, "global amplitude factor");

  // pretrain
  auto* pre = app.add_subcommand("pretrain", "pretrain the dual autoencoder");
  std::string pt_dataset, pt_skel_a, pt_skel_b, pt_out, pt_resume, pt_log;
  std::string pt_optimizer = "adam";
  TrainConfig pt_cfg;
  int pt_window = 64, pt_c1 = 32, pt_c2 = 64, pt_cs = 16, pt_kernel = 5;
  std::uint64_t pt_init_seed = 1234;
  pre->add_option("--dataset", pt_dataset)->required();
  pre->add_option("--skeleton-a", pt_skel_a)->required();
  pre->add_option("--skeleton-b", pt_skel_b)->required();
  pre->add_option("--model-out", pt_out)->required();
  pre->add_option("--resume", pt_resume, "model stem to resume from");
  pre->add_option("--steps", pt_cfg.steps);
  pre->add_option("--batch-size", pt_cfg.batch_size);
  pre->add_option("--lr", pt_cfg.learning_rate);
  pre->add_option("--lambda-align", pt_cfg.lambda_align);
  pre->add_option("--lambda-consis", pt_cfg.lambda_consis);
  pre->add_option("--seed", pt_cfg.seed)->envname("IKMR_SEED");
  pre->add_option("--workers", pt_cfg.workers);
  pre->add_option("--optimizer", pt_optimizer, "adam or sgd");
  pre->add_option("--log", pt_log, "JSONL loss log");
  pre->add_option("--window", pt_window);
  pre->add_option("--channels1", pt_c1);
  pre->add_option("--channels2", pt_c2);
  pre->add_option("--static-channels", pt_cs);
  pre->add_option("--kernel", pt_kernel);
  pre->add_option("--init-seed", pt_init_seed);

  // finetune
  auto* fine = app.add_subcommand("finetune", "fine-tune decoder B on dynamics-feasible targets");
  std::string ft_model, ft_skel_a, ft_skel_b, ft_dataset, ft_limits, ft_out,
      ft_log;
  std::string ft_optimizer = "adam";
  TrainConfig ft_cfg;
  fine->add_option("--model", ft_model)->required();
  fine->add_option("--skeleton-a", ft_skel_a)->required();
  fine->add_option("--skeleton-b", ft_skel_b)->required();
  fine->add_option("--dataset", ft_dataset)->required();
  fine->add_option("--limits", ft_limits)->required();
  fine->add_option("--model-out", ft_out)->required();
  fine->add_option("--steps", ft_cfg.steps);
  fine->add_option("--batch-size", ft_cfg.batch_size);
  fine->add_option("--lr", ft_cfg.learning_rate);
  fine->add_option("--lambda-ee", ft_cfg.lambda_ee);
  fine->add_option("--seed", ft_cfg.seed)->envname("IKMR_SEED");
  fine->add_option("--workers", ft_cfg.workers);
  fine->add_option("--optimizer", ft_optimizer);
  fine->add_option("--log", ft_log);

  // retarget
  auto* ret = app.add_subcommand("retarget", "retarget motion files");
  std::string rt_model, rt_skel_a, rt_skel_b, rt_input, rt_output;
  int rt_workers = 1;
  ret->add_option("--model", rt_model)->required();
  ret->add_option("--skeleton-a", rt_skel_a)->required();
  ret->add_option("--skeleton-b", rt_skel_b)->required();
  ret->add_option("--input", rt_input, "motion file or directory")->required();
  ret->add_option("--output", rt_output, "output file or directory")->required();
  ret->add_option("--workers", rt_workers);

  // eval
  auto* ev = app.add_subcommand("eval", "evaluation reports");
  std::string ev_model, ev_finetuned, ev_skel_a, ev_skel_b, ev_dataset,
      ev_limits, ev_report;
  std::string ev_levels = "0,0.01,0.02,0.05,0.1";
  ev->add_option("--model", ev_model)->required();
  ev->add_option("--finetuned", ev_finetuned, "fine-tuned model stem");
  ev->add_option("--skeleton-a", ev_skel_a)->required();
  ev->add_option("--skeleton-b", ev_skel_b)->required();
  ev->add_option("--dataset", ev_dataset)->required();
  ev->add_option("--noise-levels", ev_levels, "comma-separated sigmas, meters");
  ev->add_option("--limits", ev_limits)->required();
  ev->add_option("--report", ev_report, "report directory")->required();
  ev->add_option("--seed", seed)->envname("IKMR_SEED");

  // bench
  auto* bench = app.add_subcommand("bench", "throughput benchmark");
  std::string bn_model, bn_skel_a, bn_skel_b, bn_output;
  std::string bn_batches = "1,8,64";
  int bn_repeats = 8, bn_workers = 1;
  bool bn_f32 = false;
  bench->add_option("--model", bn_model)->required();
  bench->add_option("--skeleton-a", bn_skel_a)->required();
  bench->add_option("--skeleton-b", bn_skel_b)->required();
  bench->add_option("--batch-sizes", bn_batches);
  bench->add_option("--repeats", bn_repeats);
  bench->add_option("--workers", bn_workers);
  bench->add_flag("--f32", bn_f32, "also run the float32 inference path");
  bench->add_option("--output", bn_output, "CSV output file (default stdout)");
  bench->add_option("--seed", seed)->envname("IKMR_SEED");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitValidation;
  }

  try {
    if (*datagen) {
      return cmd_datagen(dg_skel_a, dg_skel_b, dg_count, seed, dg_output,
                         dg_window, dg_fps, dg_amp);
    }
    if (*pre) {
      return cmd_pretrain(pt_dataset, pt_skel_a, pt_skel_b, pt_out, pt_resume,
                          pt_cfg, pt_log, pt_window, pt_c1, pt_c2, pt_cs,
                          pt_kernel, pt_init_seed, pt_optimizer);
    }
    if (*fine) {
      return cmd_finetune(ft_model, ft_skel_a, ft_skel_b, ft_dataset,
                          ft_limits, ft_out, ft_cfg, ft_log, ft_optimizer);
    }
    if (*ret) {
      return cmd_retarget(rt_model, rt_skel_a, rt_skel_b, rt_input, rt_output,
                          rt_workers);
    }
    if (*ev) {
      return cmd_eval(ev_model, ev_finetuned, ev_skel_a, ev_skel_b, ev_dataset,
                      ev_levels, ev_limits, ev_report, seed);
    }
    if (*bench) {
      return cmd_bench(bn_model, bn_skel_a, bn_skel_b, bn_batches, bn_repeats,
                       bn_workers, bn_f32, bn_output, seed);
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return 0;
}

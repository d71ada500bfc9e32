// Copyright 2026 The petcond Authors
// SPDX-License-Identifier: Apache-2.0

#include "petcond/cli.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>

#include "petcond/baselines.hpp"
#include "petcond/checkpoint.hpp"
#include "petcond/config.hpp"
#include "petcond/dataset.hpp"
#include "petcond/errors.hpp"
#include "petcond/metrics.hpp"
#include "petcond/ptf.hpp"
#include "petcond/report.hpp"
#include "petcond/trainer.hpp"

namespace fs = std::filesystem;

namespace petcond {
namespace {

struct GlobalOptions {
  std::string config;
  std::optional<std::uint64_t> seed;
  bool force = false;
};

RunConfig require_config(const GlobalOptions& g) {
  if (g.config.empty()) throw ConfigError("--config PATH is required");
  return load_run_config(g.config, g.seed);
}

void write_json(const fs::path& file, const nlohmann::json& j) {
  std::ofstream out(file);
  if (!out) throw IoError("cannot write " + file.string());
  out << j.dump(2) << '\n';
}

nlohmann::json read_json(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw IoError("cannot open " + file.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw IoError(file.string() + ": " + e.what());
  }
}

void prepare_output_dir(const fs::path& dir, bool force) {
  if (fs::exists(dir) && !fs::is_empty(dir)) {
    if (!force)
      throw IoError("output directory " + dir.string() + " is not empty (pass --force)");
    fs::remove_all(dir);
  }
  fs::create_directories(dir);
}

// --- simulate -------------------------------------------------------------

int cmd_simulate(const GlobalOptions& g, std::ostream& out) {
  const RunConfig rc = require_config(g);
  const auto m = simulate_dataset(rc.simulation, rc.data_dir, g.force, rc.snapshot);
  out << "simulated " << m.phantoms.size() << " phantoms x " << m.levels.size()
      << " levels into " << rc.data_dir.string() << " (train " << m.entries(Split::Train).size()
      << ", test " << m.entries(Split::Test).size() << ", global_scale " << m.global_scale
      << ")\n";
  return 0;
}

// --- train ----------------------------------------------------------------

struct TrainArgs {
  bool plain_unet = false;
  std::string resume;
};

int cmd_train(const GlobalOptions& g, const TrainArgs& a, std::ostream& out) {
  const RunConfig rc = require_config(g);
  const auto manifest = load_manifest(rc.data_dir / "manifest.json");
  TrainOptions opts;
  opts.config_snapshot = rc.snapshot;
  if (!a.resume.empty()) opts.resume_from = fs::path(a.resume);
  const fs::path dir = rc.train_dir / (a.plain_unet ? "plain-unet" : "proposed");
  if (!opts.resume_from) prepare_output_dir(dir, g.force);
  opts.output_dir = dir;

  Checkpoint ck;
  if (a.plain_unet) {
    ck = train_plain_unet(manifest, rc.model, rc.train, opts);
  } else {
    const auto backend = make_embedder(rc.embedder);
    const auto table = embedding_table(*backend, rc.train.levels, rc.prompt);
    ck = train(manifest, rc.model, rc.train, table, opts);
  }
  out << "trained " << ck.kind << " for " << ck.step << " steps; checkpoint "
      << (dir / "final").string() << "\n";
  return 0;
}

// --- denoise --------------------------------------------------------------

struct DenoiseArgs {
  std::string checkpoint;
  std::string input;
  std::string level_in;
  std::string level_out = "full";
  std::string output;
  std::string reference;
};

// uint32 PTF images are raw counts at `level`; float PTF images are already normalized.
ImageSlice load_slice(const fs::path& file, const CountLevel& level, double global_scale) {
  auto any = ptf::read(file);
  if (auto* counts = std::get_if<Tensor<std::uint32_t>>(&any)) {
    if (counts->shape.size() != 2) throw IoError(file.string() + ": image must be 2-D");
    CountImage img{counts->shape[0], counts->shape[1],
                   {counts->data.begin(), counts->data.end()}, level, file.stem()};
    return normalize(img, global_scale);
  }
  ImageSlice s;
  s.level = level;
  s.scale = global_scale;
  std::visit(
      [&](auto& t) {
        if (t.shape.size() != 2) throw IoError(file.string() + ": image must be 2-D");
        s.height = t.shape[0];
        s.width = t.shape[1];
        s.intensity.assign(t.data.begin(), t.data.end());
      },
      any);
  return s;
}

int cmd_denoise(const DenoiseArgs& a, std::ostream& out) {
  const CountLevel in = CountLevel::parse(a.level_in);
  const CountLevel target = CountLevel::parse(a.level_out);
  if (!(in < target))
    throw ConstraintError("output count level " + target.label() +
                          " must be higher than input level " + in.label());
  const Checkpoint ck = load_checkpoint(a.checkpoint);
  const ImageSlice slice = load_slice(a.input, in, ck.global_scale);
  const ImageSlice result = apply_checkpoint(ck, slice, in, target);

  Tensor<float> t({result.height, result.width});
  std::transform(result.intensity.begin(), result.intensity.end(), t.data.begin(),
                 [](double v) { return static_cast<float>(v); });
  ptf::write(a.output, t);
  out << "wrote " << a.output << " (" << in.label() << " -> " << target.label() << ")\n";
  if (!a.reference.empty()) {
    const ImageSlice ref = load_slice(a.reference, CountLevel::full(), ck.global_scale);
    const auto s = score_slice(result, ref);
    out << std::fixed << std::setprecision(4) << "PSNR " << s.psnr << " dB, SSIM " << s.ssim
        << "\n";
  }
  return 0;
}

// --- evaluate -------------------------------------------------------------

int cmd_evaluate(const GlobalOptions& g, std::ostream& out) {
  const RunConfig rc = require_config(g);
  const auto manifest = load_manifest(rc.data_dir / "manifest.json");
  const Checkpoint proposed = load_checkpoint(rc.evaluate.checkpoint);
  std::optional<Checkpoint> plain;
  if (fs::exists(rc.evaluate.plain_checkpoint / "manifest.json"))
    plain = load_checkpoint(rc.evaluate.plain_checkpoint);

  std::vector<CountLevel> needed = rc.evaluate.levels;
  needed.push_back(rc.evaluate.comparison_level);
  needed.push_back(CountLevel::full());
  std::sort(needed.begin(), needed.end());
  needed.erase(std::unique(needed.begin(), needed.end()), needed.end());
  const auto test = load_split(manifest, Split::Test, needed);

  const fs::path dir = rc.evaluate.output_dir;
  prepare_output_dir(dir, true);
  const auto grid = evaluate_grid(proposed, test, rc.evaluate.levels);
  write_metric_csv(grid, dir / "metrics.csv");

  const auto cmp = compare_methods(test, rc.evaluate.comparison_level, proposed,
                                   plain ? &*plain : nullptr, rc.evaluate.gaussian_sigmas);
  write_metric_csv(cmp.records, dir / "comparison.csv");
  write_json(dir / "comparison_meta.json",
             {{"level", cmp.level.label()},
              {"best_sigma", cmp.best_sigma},
              {"plain_unet", plain.has_value()},
              {"gaussian_sigmas", rc.evaluate.gaussian_sigmas}});

  // Montage sources: the first test phantom at every evaluated level.
  fs::create_directories(dir / "images");
  const SliceSet& sample = test.front();
  auto save = [&](const ImageSlice& s, const std::string& name) {
    ptf::write(dir / "images" / (name + ".ptf"), Tensor<double>({s.height, s.width}, s.intensity));
  };
  save(sample.at(CountLevel::full()), "reference_full");
  nlohmann::json levels = nlohmann::json::array();
  for (const auto& level : rc.evaluate.levels) {
    save(sample.at(level), "original_" + level.file_tag());
    save(apply_checkpoint(proposed, sample.at(level), level, CountLevel::full()),
         "denoised_" + level.file_tag());
    levels.push_back(level.label());
  }
  write_json(dir / "images" / "index.json", {{"phantom", sample.id}, {"levels", levels}});
  write_json(dir / "config_snapshot.json", rc.snapshot);

  out << "wrote " << grid.size() << " grid records to " << (dir / "metrics.csv").string() << "\n";
  return 0;
}

// --- report ---------------------------------------------------------------

struct ReportArgs {
  std::vector<std::string> metrics;
  std::vector<std::string> image_dirs;
};

int cmd_report(const GlobalOptions& g, const ReportArgs& a, std::ostream& out) {
  const RunConfig rc = require_config(g);
  const fs::path eval_dir = rc.evaluate.output_dir;
  std::vector<fs::path> metric_files(a.metrics.begin(), a.metrics.end());
  if (metric_files.empty()) metric_files = {eval_dir / "metrics.csv", eval_dir / "comparison.csv"};
  std::vector<fs::path> image_dirs(a.image_dirs.begin(), a.image_dirs.end());
  if (image_dirs.empty()) image_dirs = {eval_dir / "images"};

  std::vector<std::string> missing;
  for (const auto& f : metric_files)
    if (!fs::exists(f)) missing.push_back(f.string());
  for (const auto& d : image_dirs)
    if (!fs::exists(d / "index.json")) missing.push_back((d / "index.json").string());
  if (!missing.empty()) {
    std::string msg = "missing report inputs:";
    for (const auto& m : missing) msg += "\n  " + m;
    throw IoError(msg);
  }

  // A file holding any condition beyond original/denoised is a comparison file.
  std::vector<MetricRecord> grid;
  std::vector<MetricRecord> comparison;
  double best_sigma = 0.0;
  for (const auto& f : metric_files) {
    auto records = read_metric_csv(f);
    const bool is_comparison = std::any_of(records.begin(), records.end(), [](const auto& r) {
      return r.condition != "original" && r.condition != "denoised";
    });
    auto& dest = is_comparison ? comparison : grid;
    dest.insert(dest.end(), records.begin(), records.end());
    const auto meta = f.parent_path() / "comparison_meta.json";
    if (is_comparison && fs::exists(meta)) best_sigma = read_json(meta).value("best_sigma", 0.0);
  }

  const fs::path dir = rc.report.output_dir;
  prepare_output_dir(dir, true);
  if (!grid.empty()) write_grouped_csv(grid, dir / "level_grouped.csv");
  if (!comparison.empty()) {
    std::ofstream table(dir / "comparison.md");
    if (!table) throw IoError("cannot write comparison table");
    table << comparison_table(comparison, best_sigma);
  }

  for (std::size_t i = 0; i < image_dirs.size(); ++i) {
    const auto& d = image_dirs[i];
    const auto index = read_json(d / "index.json");
    auto load = [&](const std::string& name, const CountLevel& level) {
      auto t = ptf::read_as<double>(d / (name + ".ptf"));
      ImageSlice s;
      s.height = t.shape.at(0);
      s.width = t.shape.at(1);
      s.intensity.assign(t.data.begin(), t.data.end());
      s.level = level;
      return s;
    };
    const ImageSlice reference = load("reference_full", CountLevel::full());
    std::vector<ImageSlice> originals;
    std::vector<ImageSlice> denoised;
    for (const auto& label : index.at("levels")) {
      const auto level = CountLevel::parse(label.get<std::string>());
      originals.push_back(load("original_" + level.file_tag(), level));
      denoised.push_back(load("denoised_" + level.file_tag(), CountLevel::full()));
    }
    const std::string name = image_dirs.size() == 1 ? "montage.png"
                                                    : "montage_" + std::to_string(i) + ".png";
    write_montage(build_montage(reference, originals, denoised), dir / name);
  }
  write_json(dir / "config_snapshot.json", rc.snapshot);
  out << "report written to " << dir.string() << "\n";
  return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Count-level conditioned PET slice denoising"};
  app.require_subcommand(1);
  app.fallthrough();
  GlobalOptions g;
  std::uint64_t seed = 0;
  app.add_option("--config", g.config, "Run configuration (JSON)");
  auto* seed_opt = app.add_option("--seed", seed, "Override simulate.seed and train.seed");
  app.add_flag("--force", g.force, "Overwrite non-empty output directories");

  auto* sim = app.add_subcommand("simulate", "Generate phantoms and count images at every level");
  TrainArgs train_args;
  auto* trn = app.add_subcommand("train", "Train the conditional model (or the plain baseline)");
  trn->add_flag("--plain-unet", train_args.plain_unet, "Train the fixed-pair plain U-Net baseline");
  trn->add_option("--resume", train_args.resume, "Resume from a checkpoint directory");
  DenoiseArgs dn;
  auto* den = app.add_subcommand("denoise", "Denoise one slice to a higher count level");
  den->add_option("--checkpoint", dn.checkpoint, "Checkpoint directory")->required();
  den->add_option("--input", dn.input, "Input PTF (uint32 counts or normalized float)")->required();
  den->add_option("--level-in", dn.level_in, "Input count level, e.g. 1/100")->required();
  den->add_option("--level-out", dn.level_out, "Output count level (default full)");
  den->add_option("--output", dn.output, "Output PTF path")->required();
  den->add_option("--reference", dn.reference, "Full-count reference for PSNR/SSIM");
  auto* ev = app.add_subcommand("evaluate", "Metric grid and baseline comparison on the test split");
  ReportArgs rep;
  auto* rp = app.add_subcommand("report", "Montage PNG, grouped metric CSV, comparison table");
  rp->add_option("--metrics", rep.metrics, "Metric CSV files (default: evaluate outputs)");
  rp->add_option("--images", rep.image_dirs, "Image directories written by evaluate");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
  if (seed_opt->count()) g.seed = seed;

  try {
    if (sim->parsed()) return cmd_simulate(g, out);
    if (trn->parsed()) return cmd_train(g, train_args, out);
    if (den->parsed()) return cmd_denoise(dn, out);
    if (ev->parsed()) return cmd_evaluate(g, out);
    if (rp->parsed()) return cmd_report(g, rep, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_code_for(e.kind());
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return 4;
  }
  return 2;
}

}  // namespace petcond

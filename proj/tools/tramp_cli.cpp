// Command-line front end: ingest, generate, train, eval, ablate, gradcheck,
// dump-partitions.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "tramp/errors.h"
#include "tramp/experiment.h"
#include "tramp/partition.h"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace tramp;

namespace {

struct CommonOptions {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string preset = "desk";
  std::vector<std::string> overrides;
  std::optional<std::size_t> epochs;
  std::optional<double> lr;
  std::optional<std::size_t> batch_size;
  std::string data_path;
};

void add_common(CLI::App* app, CommonOptions& o) {
  app->add_option("-c,--config", o.config_path, "JSON config file");
  app->add_option("--seed", o.seed, "Random seed (mandatory unless set in the config)");
  app->add_option("--preset", o.preset, "Defaults to start from: desk, toy or full")
      ->check(CLI::IsMember({"desk", "toy", "full"}));
  app->add_option("--set", o.overrides, "Override a config field, e.g. optim.lr=0.01");
  app->add_option("--epochs", o.epochs, "Shorthand for optim.epochs");
  app->add_option("--lr", o.lr, "Shorthand for optim.lr");
  app->add_option("--batch-size", o.batch_size, "Shorthand for optim.batch_size");
  app->add_option("--data", o.data_path, "Dataset directory (sets data.source=path)");
}

ExperimentConfig resolve_config(const CommonOptions& o) {
  json doc = json::object();
  if (!o.config_path.empty()) {
    std::ifstream in(o.config_path);
    if (!in) throw ConfigError("cannot open config " + o.config_path);
    try {
      in >> doc;
    } catch (const json::exception& e) {
      throw ConfigError("config " + o.config_path + ": " + e.what());
    }
  }
  if (o.seed) doc["seed"] = *o.seed;
  if (o.epochs) apply_override(doc, "optim.epochs=" + std::to_string(*o.epochs));
  if (o.lr) doc["optim"]["lr"] = *o.lr;
  if (o.batch_size) apply_override(doc, "optim.batch_size=" + std::to_string(*o.batch_size));
  if (!o.data_path.empty()) {
    doc["data"]["source"] = "path";
    doc["data"]["path"] = o.data_path;
  }
  for (const auto& s : o.overrides) apply_override(doc, s);
  const ExperimentConfig base =
      o.preset == "toy" ? toy_config(0) : o.preset == "full" ? full_scale_config(0) : desk_config(0);
  return config_from_json(doc, base);
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
}

// Per-expression models: the T_p override only applies to its expression.
Dataset filter_expression(const Dataset& ds, const std::string& expr) {
  if (expr.empty()) return ds;
  Dataset out;
  for (const auto& s : ds) {
    if (s.expression == expr) out.push_back(s);
  }
  if (out.empty()) throw ConfigError("no samples with expression " + expr);
  return out;
}

std::string train_log(const TrainResult& r) {
  std::string out;
  for (const auto& s : r.steps) {
    out += json{{"kind", "step"}, {"epoch", s.epoch}, {"step", s.step}, {"lr", s.lr},
                {"loss", s.loss}}
               .dump() +
           '\n';
  }
  for (const auto& e : r.epochs) {
    out += json{{"kind", "epoch"},
                {"epoch", e.epoch},
                {"lr", e.lr},
                {"mean_loss", e.mean_loss},
                {"val_rho", e.val_rho ? json(*e.val_rho) : json(nullptr)}}
               .dump() +
           '\n';
  }
  return out;
}

void print_report(const EvalReport& rep) {
  for (const auto& e : rep.expressions) {
    if (auto it = rep.rho.find(e); it != rep.rho.end()) {
      std::cout << "  " << e << ": rho = " << it->second << '\n';
    } else {
      std::cout << "  " << e << ": " << rep.errors.at(e) << '\n';
    }
  }
  if (rep.mean_rho) std::cout << "  mean rho = " << *rep.mean_rho << '\n';
}

int run_ingest(const std::string& clip_path, const std::string& grouping, const std::string& mode,
               std::size_t frames, std::size_t segment, const std::string& padding,
               const std::string& out_path) {
  LandmarkClip clip = parse_clip(fs::path(clip_path));
  RegionGrouping g = grouping.empty() ? default_grouping() : load_grouping(grouping);
  if (clip.anchor_index) clip = normalize_relative(clip);
  clip = select_and_group(clip, g);
  TrajectoryTensor t = assemble_channels(clip, parse_channel_mode(mode));
  t = standardize_length(t, frames, parse_padding_policy(padding), segment);
  std::cout << "frames " << t.frames << " (source " << t.source_length << "), points " << t.points
            << ", channels " << t.channels() << '\n';
  if (!out_path.empty()) {
    json j = {{"frames", t.frames},         {"points", t.points},
              {"channels", t.channels()},   {"mode", to_string(t.mode)},
              {"source_length", t.source_length}, {"data", t.data}};
    write_text(out_path, j.dump() + '\n');
  }
  return 0;
}

int run_train(const ExperimentConfig& cfg0, const std::string& out_dir, const std::string& expr) {
  const ExperimentConfig cfg = config_for_expression(cfg0, expr);
  const Dataset ds = filter_expression(load_or_generate(cfg), expr);
  const Split split = split_by_subject(ds, cfg.test_fraction, cfg.seed);
  std::cout << "train " << split.train.size() << " / test " << split.test.size() << " samples, "
            << cfg.optim.epochs << " epochs x " << cfg.optim.steps_per_epoch(split.train.size())
            << " steps\n";
  Model model(cfg.model, cfg.seed);
  TrainResult r = train(cfg, model, split.train, split.test);
  const fs::path out(out_dir);
  fs::create_directories(out);
  save_checkpoint(r.best_params, out / "best.ckpt");
  save_checkpoint(r.final_params, out / "final.ckpt");
  write_text(out / "config.json", to_json(cfg).dump(2) + '\n');
  write_text(out / "train_log.jsonl", train_log(r));
  deserialize_checkpoint(model.params(), serialize_checkpoint(r.best_params));
  EvalReport rep = evaluate(model, split.test);
  write_text(out / "metrics.jsonl", rep.metrics_jsonl("best"));
  write_text(out / "predictions.csv", rep.predictions_csv());
  if (r.diverged) std::cerr << "training diverged: " << r.message << '\n';
  std::cout << "best epoch " << r.best_epoch << '\n';
  print_report(rep);
  return r.diverged ? 3 : 0;
}

int run_eval(const ExperimentConfig& cfg0, const std::string& ckpt, const std::string& out_dir,
             const std::string& expr, const std::string& split_name) {
  const ExperimentConfig cfg = config_for_expression(cfg0, expr);
  const Dataset ds = filter_expression(load_or_generate(cfg), expr);
  Dataset subset;
  if (split_name == "all") {
    subset = ds;
  } else {
    Split split = split_by_subject(ds, cfg.test_fraction, cfg.seed);
    subset = split_name == "train" ? split.train : split.test;
  }
  Model model(cfg.model, cfg.seed);
  load_checkpoint(model.params(), ckpt);
  EvalReport rep = evaluate(model, subset);
  if (!out_dir.empty()) {
    write_text(fs::path(out_dir) / "metrics.jsonl", rep.metrics_jsonl(split_name));
    write_text(fs::path(out_dir) / "predictions.csv", rep.predictions_csv());
  } else {
    std::cout << rep.metrics_jsonl(split_name);
  }
  print_report(rep);
  return 0;
}

int run_ablate(const ExperimentConfig& cfg, const std::string& axis, const std::string& out_dir) {
  const AblationAxis a = parse_ablation_axis(axis);
  const Dataset ds = load_or_generate(cfg);
  const Split split = split_by_subject(ds, cfg.test_fraction, cfg.seed);
  AblationTable table = ablate(cfg, a, split.train, split.test);
  std::cout << table.to_text();
  if (!out_dir.empty()) {
    write_text(fs::path(out_dir) / ("ablation_" + to_string(a) + ".txt"), table.to_text());
    write_text(fs::path(out_dir) / ("ablation_" + to_string(a) + ".jsonl"), table.to_jsonl());
  }
  return 0;
}

int run_gradcheck(std::uint64_t seed, double tolerance, std::size_t batch) {
  ExperimentConfig cfg = toy_config(seed);
  cfg.synthetic.clips = batch;
  cfg.synthetic.subjects = batch;
  cfg.synthetic.quantize_scores = false;
  const Dataset ds = generate_synthetic(cfg.synthetic);
  Model model(cfg.model, seed);
  std::vector<PreparedSample> prepared;
  for (const auto& s : ds) prepared.push_back(model.prepare(s));
  std::vector<const PreparedSample*> ptrs;
  for (const auto& p : prepared) ptrs.push_back(&p);
  GradCheckReport rep = grad_check([&](ParamStore&) { return batch_loss(ptrs, model); },
                                   model.params());
  for (const auto& e : rep.entries) {
    std::cout << e.name << "  rel " << e.max_rel_error << "  abs " << e.max_abs_error << '\n';
  }
  const bool ok = rep.passed(tolerance);
  std::cout << (ok ? "PASS" : "FAIL") << " max relative error " << rep.max_rel_error << '\n';
  return ok ? 0 : 1;
}

int run_dump(std::size_t frames, std::size_t segment, std::size_t regions, std::size_t per_region,
             const std::string& kind) {
  PartitionScheme scheme = build_scheme(frames, segment, regions, per_region);
  if (kind.empty()) {
    for (auto k : kAllPartitionKinds) {
      std::cout << "# " << to_string(k) << '\n' << dump_partition(scheme, k) << '\n';
    }
  } else {
    std::cout << dump_partition(scheme, parse_partition_kind(kind));
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Facial expression quality pipeline over landmark trajectories and RGB features"};
  app.require_subcommand(1);

  std::string clip_path, grouping, mode = "xyrgb", padding = "loop", ingest_out;
  std::size_t frames = 16, segment = 8;
  auto* ingest = app.add_subcommand("ingest", "Parse and standardise one landmark clip");
  ingest->add_option("clip", clip_path, "Clip file (JSON lines)")->required();
  ingest->add_option("--grouping", grouping, "Region grouping file");
  ingest->add_option("--channels", mode, "xy, rgb or xyrgb");
  ingest->add_option("--frames", frames, "Target length T_p");
  ingest->add_option("--segment", segment, "Local segment length L");
  ingest->add_option("--padding", padding, "loop, zero, duplicate or interpolate");
  ingest->add_option("-o,--out", ingest_out, "Write the tensor as JSON");

  CommonOptions gen_opts, train_opts, eval_opts, ablate_opts;
  std::string gen_out;
  auto* generate = app.add_subcommand("generate", "Write a synthetic dataset to disk");
  add_common(generate, gen_opts);
  generate->add_option("-o,--out", gen_out, "Output directory")->required();

  std::string train_out = "run", train_expr;
  auto* train_cmd = app.add_subcommand("train", "Train and keep the best-rho checkpoint");
  add_common(train_cmd, train_opts);
  train_cmd->add_option("-o,--out", train_out, "Output directory");
  train_cmd->add_option("--expression", train_expr, "Train on one expression only");

  std::string ckpt, eval_out, eval_expr, eval_split = "test";
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint");
  add_common(eval_cmd, eval_opts);
  eval_cmd->add_option("checkpoint", ckpt, "Checkpoint file")->required();
  eval_cmd->add_option("-o,--out", eval_out, "Output directory");
  eval_cmd->add_option("--expression", eval_expr, "Evaluate one expression only");
  eval_cmd->add_option("--split", eval_split, "test, train or all")
      ->check(CLI::IsMember({"test", "train", "all"}));

  std::string axis, ablate_out;
  auto* ablate_cmd = app.add_subcommand("ablate", "Run one ablation axis");
  add_common(ablate_cmd, ablate_opts);
  ablate_cmd->add_option("--axis", axis, "padding, channel_mode, num_blocks, fusion_strategy, T_p")
      ->required();
  ablate_cmd->add_option("-o,--out", ablate_out, "Output directory");

  std::uint64_t gc_seed = 1;
  double gc_tol = 1e-4;
  std::size_t gc_batch = 3;
  auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference check of the toy pipeline");
  gradcheck->add_option("--seed", gc_seed, "Seed");
  gradcheck->add_option("--tolerance", gc_tol, "Maximum relative error");
  gradcheck->add_option("--batch", gc_batch, "Batch size")->check(CLI::Range(1, 16));

  std::size_t dp_frames = 16, dp_segment = 8, dp_regions = 7, dp_per = 9;
  std::string dp_kind;
  auto* dump = app.add_subcommand("dump-partitions", "Print the group label of every cell");
  dump->add_option("--frames", dp_frames, "T_p");
  dump->add_option("--segment", dp_segment, "L");
  dump->add_option("--regions", dp_regions, "M");
  dump->add_option("--per-region", dp_per, "N");
  dump->add_option("--kind", dp_kind, "One partition kind (default: all four)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*ingest) return run_ingest(clip_path, grouping, mode, frames, segment, padding, ingest_out);
    if (*generate) {
      const ExperimentConfig cfg = resolve_config(gen_opts);
      const Dataset ds = generate_synthetic(cfg.synthetic);
      save_dataset(ds, gen_out);
      std::cout << "wrote " << ds.size() << " samples to " << gen_out << '\n';
      return 0;
    }
    if (*train_cmd) return run_train(resolve_config(train_opts), train_out, train_expr);
    if (*eval_cmd) {
      return run_eval(resolve_config(eval_opts), ckpt, eval_out, eval_expr, eval_split);
    }
    if (*ablate_cmd) return run_ablate(resolve_config(ablate_opts), axis, ablate_out);
    if (*gradcheck) return run_gradcheck(gc_seed, gc_tol, gc_batch);
    if (*dump) return run_dump(dp_frames, dp_segment, dp_regions, dp_per, dp_kind);
  } catch (const tramp::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}

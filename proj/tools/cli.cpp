// Copyright 2026 The aftunet Authors
// SPDX-License-Identifier: Apache-2.0

#include "cli.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <memory>
#include <optional>
#include <ostream>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "aftunet/bench.hpp"
#include "aftunet/errors.hpp"
#include "aftunet/inference.hpp"
#include "aftunet/training.hpp"
#include "dataset.hpp"
#include "run_config.hpp"

namespace aft::cli {

namespace fs = std::filesystem;

namespace {

constexpr const char* kRunConfigName = "run.cfg";
constexpr const char* kTrainLogName = "train.log";
constexpr const char* kCheckpointName = "checkpoint.aftc";

struct Context {
  std::ostream& out;
  std::ostream& err;
  LogLevel level;

  void info(const std::string& line) const {
    if (level != LogLevel::kQuiet) out << line << '\n';
  }
  void debug(const std::string& line) const {
    if (level == LogLevel::kDebug) err << "debug: " << line << '\n';
  }
};

void write_text(const fs::path& path, const std::string& text, bool append = false) {
  std::ofstream os(path, append ? std::ios::app : std::ios::trunc);
  if (!os || !(os << text) || !os.flush()) throw FormatError("cannot write " + path.string());
}

void ensure_dir(const fs::path& dir) {
  if (!dir.empty()) fs::create_directories(dir);
}

std::string scan_id(int i) {
  std::ostringstream os;
  os << "scan_" << std::setw(3) << std::setfill('0') << i;
  return os.str();
}

SynthDims parse_dims(const std::string& text) {
  SynthDims d;
  char x1 = 0, x2 = 0;
  std::istringstream is(text);
  if (!(is >> d.height >> x1 >> d.width >> x2 >> d.depth) || x1 != 'x' || x2 != 'x' ||
      is.peek() != std::char_traits<char>::eof() || d.height < 1 || d.width < 1 || d.depth < 1) {
    throw ConfigError("dims must be HxWxD with positive extents, got '" + text + "'");
  }
  return d;
}

// ---------------------------------------------------------------- synth

struct SynthArgs {
  std::string out;
  int scans = 4;
  std::string dims = "64x64x32";
  int classes = 3;
  std::uint64_t seed = 0;
  int workers = 1;
};

int cmd_synth(const SynthArgs& a, const Context& ctx) {
  if (a.scans < 1) throw ConfigError("scans must be >= 1");
  if (a.workers < 1) throw ConfigError("workers must be >= 1");
  const SynthDims dims = parse_dims(a.dims);
  const fs::path dir(a.out);
  ensure_dir(dir);

  std::vector<ManifestEntry> entries;
  for (int i = 0; i < a.scans; ++i) {
    const std::string id = scan_id(i);
    entries.push_back({id, id + "_image.aftv", id + "_labels.aftv", dims.height, dims.width, dims.depth});
  }

  std::atomic<int> next{0};
  std::vector<std::exception_ptr> failures(static_cast<std::size_t>(a.workers));
  auto work = [&](int worker) {
    try {
      for (int i = next++; i < a.scans; i = next++) {
        const Scan s = synth_scan(i, dims, a.classes, a.seed);
        const auto& e = entries[static_cast<std::size_t>(i)];
        write_volume(dir / e.image, s.image);
        write_volume(dir / e.labels, s.labels);
      }
    } catch (...) {
      failures[static_cast<std::size_t>(worker)] = std::current_exception();
      next = a.scans;
    }
  };
  if (a.workers == 1) {
    work(0);
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < a.workers; ++w) pool.emplace_back(work, w);
    for (auto& t : pool) t.join();
  }
  for (const auto& f : failures) {
    if (f) std::rethrow_exception(f);
  }
  write_text(dir / kManifestName, format_manifest(entries));
  ctx.info("wrote " + std::to_string(a.scans) + " scans to " + dir.string());
  return kExitOk;
}

// ---------------------------------------------------------------- train

struct ConfigArgs {
  std::string config;
  std::vector<std::string> sets;
};

RunConfig resolve_config(const ConfigArgs& a, const fs::path& fallback = {}) {
  RunConfig cfg;
  if (!a.config.empty()) {
    apply_config_file(cfg, a.config);
  } else if (!fallback.empty() && fs::exists(fallback)) {
    apply_config_file(cfg, fallback);
  }
  for (const auto& s : a.sets) apply_override(cfg, s);
  return cfg;
}

struct TrainArgs {
  ConfigArgs cfg;
  std::string data, out, resume;
  std::optional<std::uint64_t> seed;
  std::optional<int> epochs;
};

std::string format_double(double x) {
  std::ostringstream os;
  os << std::setprecision(6) << x;
  return os.str();
}

int cmd_train(const TrainArgs& a, const Context& ctx) {
  RunConfig rc = resolve_config(a.cfg);
  if (!a.data.empty()) rc.data = a.data;
  if (!a.out.empty()) rc.out = a.out;
  if (a.seed) rc.train.seed = *a.seed;
  if (a.epochs) rc.train.epochs = *a.epochs;
  rc.validate();
  if (rc.data.empty()) throw ConfigError("data: no dataset directory given");

  std::vector<Scan> scans;
  for (const Scan& s : load_dataset(rc.data)) {
    scans.push_back(preprocess_scan(s, rc.window_lo, rc.window_hi));
  }
  ModelConfig mc = rc.model_config();
  for (std::size_t i = 0; i < scans.size(); ++i) {
    const auto& v = scans[i].labels.voxels;
    const int top = v.empty() ? 0 : *std::max_element(v.begin(), v.end());
    if (top >= mc.codec.classes) {
      throw FormatError("scan " + std::to_string(i) + " contains label " + std::to_string(top) +
                        " but classes=" + std::to_string(mc.codec.classes));
    }
  }
  derive_input_size(mc, scans);
  mc.validate();
  rc.model.height = mc.height;
  rc.model.width = mc.width;
  for (Scan& s : scans) s = fit_to_model(s, mc);
  ctx.debug("loaded " + std::to_string(scans.size()) + " scans, input " + std::to_string(mc.height) +
            "x" + std::to_string(mc.width));

  AftUnet model(mc);
  model.init(rc.train.seed);
  Trainer trainer(model, rc.train);
  if (!a.resume.empty()) {
    load_checkpoint(a.resume, model, &trainer);
    ctx.info("resumed from " + a.resume + " at epoch " + std::to_string(trainer.epoch()));
  }

  const fs::path out(rc.out);
  ensure_dir(out);
  write_text(out / kRunConfigName, format_config(rc));
  const fs::path log_path = out / kTrainLogName;

  for (int e = trainer.epoch(); e < rc.train.epochs; ++e) {
    const auto start = std::chrono::steady_clock::now();
    const double lr = lr_at(e, rc.train);
    const double loss = trainer.train_epoch(scans);
    std::string line = "epoch=" + std::to_string(e + 1) + " lr=" + format_double(lr) +
                       " loss=" + format_double(loss);
    if (rc.probe_slices > 0) line += " probe=" + format_double(probe_loss(model, scans, rc.probe_slices));
    ctx.info(line);
    write_text(log_path, line + "\n", true);
    const std::chrono::duration<double> took = std::chrono::steady_clock::now() - start;
    ctx.debug("epoch " + std::to_string(e + 1) + " took " + format_double(took.count()) + " s");
    if (rc.checkpoint_every > 0 && (e + 1) % rc.checkpoint_every == 0) {
      save_checkpoint(out / ("checkpoint_e" + std::to_string(e + 1) + ".aftc"), model, &trainer);
    }
  }
  save_checkpoint(out / kCheckpointName, model, &trainer);
  ctx.info("checkpoint " + (out / kCheckpointName).string());
  return kExitOk;
}

// ---------------------------------------------------------------- eval

struct EvalArgs {
  ConfigArgs cfg;
  std::string checkpoint, data, metrics;
};

std::unique_ptr<AftUnet> load_model(const fs::path& checkpoint) {
  auto model = std::make_unique<AftUnet>(read_checkpoint_config(checkpoint));
  load_checkpoint(checkpoint, *model);
  return model;
}

int cmd_eval(const EvalArgs& a, const Context& ctx) {
  const fs::path ckpt(a.checkpoint);
  const RunConfig rc = resolve_config(a.cfg, ckpt.parent_path() / kRunConfigName);
  rc.validate();
  auto model = load_model(ckpt);
  std::vector<Scan> scans;
  for (const Scan& s : load_dataset(a.data)) {
    scans.push_back(fit_to_model(preprocess_scan(s, rc.window_lo, rc.window_hi), model->config()));
  }
  const EvalReport report = evaluate(*model, scans, rc.class_names);
  ctx.out << format_table(report);
  const fs::path metrics = a.metrics.empty() ? ckpt.parent_path() / "metrics.txt" : fs::path(a.metrics);
  ensure_dir(metrics.parent_path());
  write_text(metrics, format_metrics(report));
  ctx.info("metrics " + metrics.string());
  return kExitOk;
}

// ---------------------------------------------------------------- predict

struct PredictArgs {
  ConfigArgs cfg;
  std::string checkpoint, in, out;
};

int cmd_predict(const PredictArgs& a, const Context& ctx) {
  const fs::path ckpt(a.checkpoint);
  const RunConfig rc = resolve_config(a.cfg, ckpt.parent_path() / kRunConfigName);
  rc.validate();
  auto model = load_model(ckpt);
  const Volume raw = read_volume(fs::path(a.in));
  const Volume image = preprocess_image(raw, rc.window_lo, rc.window_hi);
  LabelVolume labels = predict_volume(*model, image);
  if (labels.height != raw.height || labels.width != raw.width || labels.depth != raw.depth) {
    labels = resample_to_grid(labels, raw.spacing, raw.height, raw.width, raw.depth);
  }
  labels.spacing = raw.spacing;
  ensure_dir(fs::path(a.out).parent_path());
  write_volume(fs::path(a.out), labels);
  ctx.info("wrote " + std::to_string(labels.height) + "x" + std::to_string(labels.width) + "x" +
           std::to_string(labels.depth) + " labels to " + a.out);
  return kExitOk;
}

// ---------------------------------------------------------------- bench

struct BenchArgs {
  ConfigArgs cfg;
  std::string grids, out;
  int heads = 8;
  int bytes = 4;
  bool profile = false;
};

int cmd_bench(const BenchArgs& a, const Context& ctx) {
  if (a.heads < 1) throw ConfigError("heads must be >= 1");
  if (a.bytes < 1) throw ConfigError("bytes must be >= 1");
  std::vector<AttnCostReport> reports;
  std::stringstream list(a.grids);
  std::string item;
  while (std::getline(list, item, ',')) {
    if (!item.empty()) reports.push_back(count_comparisons(parse_grid(item)));
  }
  if (reports.empty()) throw ConfigError("grids: no grid given");
  ctx.out << format_cost_table(reports, a.heads, a.bytes);

  std::string metrics;
  for (const auto& r : reports) {
    std::istringstream lines(format_cost_metrics(r, attention_memory(r.grid, a.heads, a.bytes)));
    std::string line;
    while (std::getline(lines, line)) metrics += r.grid.str() + "." + line + "\n";
  }
  if (a.profile) {
    RunConfig rc = resolve_config(a.cfg);
    if (rc.model.height == 0) rc.model.height = 64;
    if (rc.model.width == 0) rc.model.width = 64;
    rc.validate();
    ctx.out << '\n' << format_profile(profile_model(rc.model_config()));
  }
  if (!a.out.empty()) {
    ensure_dir(fs::path(a.out).parent_path());
    write_text(a.out, metrics);
    ctx.info("metrics " + a.out);
  }
  return kExitOk;
}

void add_config_options(CLI::App* sub, ConfigArgs& c) {
  sub->add_option("--config", c.config, "key=value config file");
  sub->add_option("--set", c.sets, "override one config key, key=value (repeatable)");
}

std::string one_line(std::string s) {
  std::replace(s.begin(), s.end(), '\n', ' ');
  while (!s.empty() && s.back() == ' ') s.pop_back();
  return s;
}

int fail(std::ostream& err, const char* kind, const std::string& message, int code) {
  err << "error: " << kind << ": " << one_line(message) << '\n';
  return code;
}

}  // namespace

LogLevel parse_log_level(const std::string& value) {
  if (value.empty() || value == "info") return LogLevel::kInfo;
  if (value == "quiet") return LogLevel::kQuiet;
  if (value == "debug") return LogLevel::kDebug;
  throw ConfigError("AFT_LOG must be quiet, info or debug, got '" + value + "'");
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err, LogLevel level) {
  const Context ctx{out, err, level};
  CLI::App app("aftunet: axial fusion transformer U-Net", "aftunet");
  app.require_subcommand(1, 1);
  app.fallthrough(false);

  SynthArgs synth;
  auto* s = app.add_subcommand("synth", "generate a synthetic dataset");
  s->add_option("--out", synth.out, "output directory")->required();
  s->add_option("--scans", synth.scans, "number of scans")->capture_default_str();
  s->add_option("--dims", synth.dims, "HxWxD")->capture_default_str();
  s->add_option("--classes", synth.classes, "classes including background")->capture_default_str();
  s->add_option("--seed", synth.seed)->capture_default_str();
  s->add_option("--workers", synth.workers, "parallel writers")->capture_default_str();

  TrainArgs train;
  std::uint64_t train_seed = 0;
  int train_epochs = 0;
  auto* t = app.add_subcommand("train", "train a model");
  add_config_options(t, train.cfg);
  t->add_option("--data", train.data, "dataset directory (overrides data=)");
  t->add_option("--out", train.out, "run directory (overrides out=)");
  auto* t_seed = t->add_option("--seed", train_seed, "overrides seed=");
  auto* t_epochs = t->add_option("--epochs", train_epochs, "overrides epochs=");
  t->add_option("--resume", train.resume, "checkpoint to continue from");

  EvalArgs eval;
  auto* e = app.add_subcommand("eval", "score a checkpoint on a dataset");
  add_config_options(e, eval.cfg);
  e->add_option("--checkpoint", eval.checkpoint)->required();
  e->add_option("--data", eval.data, "dataset directory")->required();
  e->add_option("--metrics", eval.metrics, "metrics file (default: next to the checkpoint)");

  PredictArgs predict;
  auto* p = app.add_subcommand("predict", "segment one volume");
  add_config_options(p, predict.cfg);
  p->add_option("--checkpoint", predict.checkpoint)->required();
  p->add_option("--in", predict.in, "input AFTV intensity volume")->required();
  p->add_option("--out", predict.out, "output AFTV label volume")->required();

  BenchArgs bench;
  auto* b = app.add_subcommand("bench", "attention cost report");
  add_config_options(b, bench.cfg);
  b->add_option("--grids", bench.grids, "comma-separated HxWxN latent grids")->required();
  b->add_option("--heads", bench.heads)->capture_default_str();
  b->add_option("--bytes", bench.bytes, "bytes per stored scalar")->capture_default_str();
  b->add_option("--out", bench.out, "key=value metrics file");
  b->add_flag("--profile", bench.profile, "also print per-module parameter counts");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& ex) {
    if (ex.get_exit_code() == 0) {
      out << app.help();
      return kExitOk;
    }
    return fail(err, "usage", ex.what(), kExitUsage);
  }

  try {
    if (*s) return cmd_synth(synth, ctx);
    if (*t) {
      if (*t_seed) train.seed = train_seed;
      if (*t_epochs) train.epochs = train_epochs;
      return cmd_train(train, ctx);
    }
    if (*e) return cmd_eval(eval, ctx);
    if (*p) return cmd_predict(predict, ctx);
    return cmd_bench(bench, ctx);
  } catch (const ConfigError& ex) {
    return fail(err, "config", ex.what(), kExitUsage);
  } catch (const ConfigMismatchError& ex) {
    return fail(err, "checkpoint", ex.what(), kExitData);
  } catch (const FormatError& ex) {
    return fail(err, "format", ex.what(), kExitData);
  } catch (const ShapeError& ex) {
    return fail(err, "shape", ex.what(), kExitData);
  } catch (const fs::filesystem_error& ex) {
    return fail(err, "io", ex.what(), kExitData);
  } catch (const NumericError& ex) {
    return fail(err, "numeric", ex.what(), kExitNumeric);
  } catch (const std::exception& ex) {
    return fail(err, "internal", ex.what(), kExitData);
  }
}

}  // namespace aft::cli

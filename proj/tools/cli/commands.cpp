// Copyright 2026 The wearembed Authors.
// SPDX-License-Identifier: Apache-2.0

#include "commands.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>

#include "wearembed/archive_io.hpp"
#include "wearembed/checkpoint.hpp"
#include "wearembed/errors.hpp"
#include "wearembed/evalsuite.hpp"
#include "wearembed/finetune.hpp"
#include "wearembed/run_config.hpp"
#include "wearembed/text_format.hpp"
#include "wearembed/trainer.hpp"

namespace wearembed::cli {
namespace {

/// Carries an exit code out of a command handler.
struct Exit {
  int code;
  std::string message;
};

std::string flag_name(const std::string& key) {
  std::string name = key;
  std::replace(name.begin(), name.end(), '_', '-');
  return "--" + name;
}

struct CommandOptions {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::map<std::string, std::string> values;  // config key -> flag text
  std::map<std::string, CLI::Option*> options;
};

/// --config, --seed, --out and one flag per configuration key.
void add_common(CLI::App& cmd, CommandOptions& opts, const std::string& seed_help,
                const std::string& out_help, bool out_required) {
  cmd.add_option("--config", opts.config_path,
                 "run configuration file ([data] [model] [train] [eval])")
      ->check(CLI::ExistingFile);
  cmd.add_option("--seed", opts.seed, seed_help);
  auto* out = cmd.add_option("--out", opts.out, out_help);
  if (out_required) out->required();
  const RunConfig defaults;
  for (const ConfigKey& key : config_keys()) {
    if (key.key == "seed") continue;  // spelled --seed, handled above
    opts.options[key.key] = cmd.add_option(flag_name(key.key), opts.values[key.key], key.help)
                                ->type_name("VALUE")
                                ->default_str(get_config_value(defaults, key.key))
                                ->group("[" + key.section + "] settings");
  }
}

/// Defaults, then the config file, then --seed, then explicit key flags.
RunConfig resolve(const CommandOptions& opts, const std::string& seed_key) {
  RunConfig config;
  if (!opts.config_path.empty()) config = load_run_config(opts.config_path);
  if (opts.seed) set_config_value(config, seed_key, std::to_string(*opts.seed));
  for (const auto& [key, option] : opts.options) {
    if (option->count() > 0) set_config_value(config, key, opts.values.at(key));
  }
  return config;
}

std::ofstream open_output(const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path);
  return out;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out = open_output(path);
  out << text;
  if (!out) throw IoError("failed writing " + path);
}

std::vector<UserArchive> load_data(const std::string& path) {
  try {
    return read_archive(path);
  } catch (const IoError& e) {
    throw Exit{kUsage, e.what()};
  }
}

TrainerState load_state(const std::string& path) {
  try {
    return load_checkpoint(path);
  } catch (const IoError& e) {
    throw Exit{kUsage, e.what()};
  } catch (const IntegrityError& e) {
    throw Exit{kUsage, e.what()};
  }
}

std::string history_text(const std::vector<EpochRecord>& history) {
  std::string text;
  for (const auto& h : history) {
    text += std::to_string(h.epoch) + "," + format_exact(h.l_ae) + "," + format_exact(h.l_s) + "," +
            format_exact(h.l_joint) + "," + format_exact(h.val_joint) + "\n";
  }
  return text;
}

std::string embedding_line(const std::string& prefix, std::span<const double> values) {
  std::string line = prefix;
  for (double v : values) line += "," + format_exact(v);
  return line + "\n";
}

void cmd_synth(const CommandOptions& opts, std::ostream& out) {
  const RunConfig config = resolve(opts, "data_seed");
  const auto archives = generate_synthetic(config.data);
  write_archive(opts.out, archives);
  out << "users=" << archives.size() << " days=" << total_days(archives) << " out=" << opts.out
      << "\n";
}

void cmd_train(const CommandOptions& opts, const std::string& data_path,
               const std::string& history_path, std::ostream& out) {
  const RunConfig config = resolve(opts, "seed");
  const auto archives = load_data(data_path);
  if (archives.size() < 2) {
    throw Exit{kTooFewUsers, "training needs at least 2 users; " + data_path + " holds " +
                                 std::to_string(archives.size())};
  }
  const std::string history_file = history_path.empty() ? opts.out + ".history" : history_path;
  write_text(history_file, "");
  FitOptions fit_options;
  fit_options.arch = config.model;
  fit_options.checkpoint_path = opts.out;
  fit_options.on_epoch = [&](const TrainerState& state) {
    write_text(history_file, history_text(state.history));
  };
  TrainerState state = [&] {
    try {
      return fit(archives, config.train, fit_options);
    } catch (const DivergenceError& e) {
      throw Exit{kDiverged, std::string(e.what()) + "; last good checkpoint kept at " + opts.out};
    }
  }();
  out << "epochs=" << state.epoch << " steps=" << state.step << " best_epoch=" << state.best_epoch
      << " best_val=" << format_fixed(state.best_val, 6) << " checkpoint=" << opts.out
      << " history=" << history_file << "\n";
  if (state.sampler_warnings > 0) {
    out << "warning: " << state.sampler_warnings
        << " anchors had too few days and were sampled with replacement\n";
  }
}

void cmd_embed(const std::string& checkpoint, const std::string& data_path,
               const std::string& granularity, const std::string& out_path, std::ostream& out) {
  const TrainerState state = load_state(checkpoint);
  const Model model = best_model(state);
  const auto archives = load_data(data_path);
  std::string text;
  std::size_t lines = 0;
  if (granularity == "day") {
    for (const auto& user : archives) {
      for (const auto& day : user.days) {
        text += embedding_line(user.user_id + "," + format_date(day.date), model.embed_day(day));
        ++lines;
      }
    }
  } else {
    for (const auto& user : archives) {
      if (user.days.empty()) continue;
      text += embedding_line(user.user_id, model.embed_days(user.days).vector);
      ++lines;
    }
  }
  write_text(out_path, text);
  out << "lines=" << lines << " granularity=" << granularity << " out=" << out_path << "\n";
}

void cmd_eval(const CommandOptions& opts, const std::string& checkpoint,
              const std::string& data_path, const std::string& task, std::ostream& out) {
  const RunConfig config = resolve(opts, "eval_seed");
  const TrainerState state = load_state(checkpoint);
  const Model model = best_model(state);
  const auto archives = load_data(data_path);

  const auto colon = task.find(':');
  const std::string kind = task.substr(0, colon);
  const std::string attribute = colon == std::string::npos ? "" : task.substr(colon + 1);
  if (kind != "identify" && attribute.empty()) {
    throw Exit{kUsage, "task '" + task + "' needs an attribute, e.g. " + kind + ":<name>"};
  }
  MetricReport report;
  try {
    if (kind == "identify") {
      report = user_identification_eval(model, archives, config.eval).report;
    } else if (kind == "classify") {
      report = classification_eval(model, archives, attribute, config.eval);
    } else if (kind == "regress") {
      report = regression_eval(model, archives, attribute, config.eval);
    } else if (kind == "finetune") {
      report =
          semi_supervised_finetune(model, archives, attribute, state.config, config.eval).report;
    } else {
      throw Exit{kUsage, "unknown task '" + task +
                             "'; expected identify, classify:<attr>, regress:<attr> or "
                             "finetune:<attr>"};
    }
  } catch (const AttributeError& e) {
    throw Exit{kUnknownAttribute, e.what()};
  } catch (const DivergenceError& e) {
    throw Exit{kDiverged, e.what()};
  }
  const std::string text = format_report(report);
  if (!opts.out.empty()) write_text(opts.out, text);
  out << text;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Day-level heart-rate embeddings: synthesize data, train, embed, evaluate."};
  app.name("wearembed");
  app.require_subcommand(1, 1);

  CommandOptions synth_opts;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic archive");
  add_common(*synth, synth_opts, "shorthand for --data-seed", "archive file to write", true);

  CommandOptions train_opts;
  std::string train_data;
  std::string history;
  auto* train = app.add_subcommand("train", "Fit the model; writes a checkpoint and history");
  add_common(*train, train_opts, "training seed ([train] seed)", "checkpoint file to write", true);
  train->add_option("--data", train_data, "archive file to train on")->required();
  train->add_option("--history", history,
                    "per-epoch loss file, lines epoch,l_ae,l_s,l_joint,val_joint "
                    "(default: <out>.history)");

  CommandOptions embed_opts;
  std::string embed_checkpoint;
  std::string embed_data;
  std::string granularity = "day";
  auto* embed = app.add_subcommand("embed", "Write day or user embeddings");
  add_common(*embed, embed_opts, "accepted for uniformity; embedding is deterministic",
             "embedding file to write", true);
  embed->add_option("--checkpoint", embed_checkpoint, "trained checkpoint")->required();
  embed->add_option("--data", embed_data, "archive file to embed")->required();
  embed->add_option("--granularity", granularity, "day or user")
      ->check(CLI::IsMember({"day", "user"}))
      ->capture_default_str();

  CommandOptions eval_opts;
  std::string eval_checkpoint;
  std::string eval_data;
  std::string task;
  auto* eval = app.add_subcommand("eval", "Run an evaluation protocol and print its report");
  add_common(*eval, eval_opts, "shorthand for --eval-seed", "report file to write (optional)",
             false);
  eval->add_option("--checkpoint", eval_checkpoint, "trained checkpoint")->required();
  eval->add_option("--data", eval_data, "archive file to evaluate on")->required();
  eval->add_option("--task", task, "identify | classify:<attr> | regress:<attr> | finetune:<attr>")
      ->required();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (synth->parsed()) cmd_synth(synth_opts, out);
    if (train->parsed()) cmd_train(train_opts, train_data, history, out);
    if (embed->parsed()) cmd_embed(embed_checkpoint, embed_data, granularity, embed_opts.out, out);
    if (eval->parsed()) cmd_eval(eval_opts, eval_checkpoint, eval_data, task, out);
  } catch (const Exit& e) {
    err << "error: " << e.message << "\n";
    return e.code;
  } catch (const IoError& e) {
    err << "error: " << e.what() << "\n";
    return kUnwritable;
  } catch (const VersionError& e) {
    err << "error: " << e.what() << "\n";
    return kVersionMismatch;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  }
  return kOk;
}

}  // namespace wearembed::cli

// Copyright 2026 The wearembed Authors.
// SPDX-License-Identifier: Apache-2.0

#include "wearembed/run_config.hpp"

#include <fstream>
#include <functional>
#include <sstream>
#include <stdexcept>

#include "wearembed/errors.hpp"
#include "wearembed/text_format.hpp"

namespace wearembed {
namespace {

struct Field {
  ConfigKey info;
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, std::string_view)> set;
};

[[noreturn]] void bad_value(std::string_view key, std::string_view value) {
  throw std::invalid_argument("invalid value '" + std::string(value) + "' for " + std::string(key));
}

double to_double(std::string_view key, std::string_view value) {
  if (auto v = parse_double(value)) return *v;
  bad_value(key, value);
}

std::uint64_t to_u64(std::string_view key, std::string_view value) {
  if (auto v = parse_u64(value)) return *v;
  bad_value(key, value);
}

bool to_bool(std::string_view key, std::string_view value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  bad_value(key, value);
}

std::vector<std::size_t> to_list(std::string_view key, std::string_view value) {
  std::vector<std::size_t> out;
  for (auto part : split_view(value, ',')) out.push_back(to_u64(key, trim(part)));
  return out;
}

std::string from_list(const std::vector<std::size_t>& values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    out += (i ? "," : "") + std::to_string(values[i]);
  }
  return out;
}

template <typename T>
Field size_field(std::string section, std::string key, std::string help, T RunConfig::* group,
                 std::size_t T::* member) {
  const std::string name = key;
  return {{std::move(section), std::move(key), std::move(help)},
          [=](const RunConfig& c) { return std::to_string(c.*group.*member); },
          [=](RunConfig& c, std::string_view v) { c.*group.*member = to_u64(name, v); }};
}

template <typename T>
Field u64_field(std::string section, std::string key, std::string help, T RunConfig::* group,
                std::uint64_t T::* member) {
  const std::string name = key;
  return {{std::move(section), std::move(key), std::move(help)},
          [=](const RunConfig& c) { return std::to_string(c.*group.*member); },
          [=](RunConfig& c, std::string_view v) { c.*group.*member = to_u64(name, v); }};
}

template <typename T>
Field real_field(std::string section, std::string key, std::string help, T RunConfig::* group,
                 double T::* member) {
  const std::string name = key;
  return {{std::move(section), std::move(key), std::move(help)},
          [=](const RunConfig& c) { return format_shortest(c.*group.*member); },
          [=](RunConfig& c, std::string_view v) { c.*group.*member = to_double(name, v); }};
}

Field optional_date_field(std::string key, std::string help,
                          std::optional<Date> EvalConfig::* member) {
  return {{"eval", std::move(key), std::move(help)},
          [=](const RunConfig& c) {
            const auto& d = c.eval.*member;
            return d ? format_date(*d) : std::string("auto");
          },
          [=](RunConfig& c, std::string_view v) {
            if (v == "auto" || v.empty()) {
              c.eval.*member = std::nullopt;
            } else {
              c.eval.*member = parse_date(v);
            }
          }};
}

std::vector<Field> make_fields() {
  using R = RunConfig;
  std::vector<Field> f;
  // [data]
  f.push_back(size_field("data", "n_users", "synthetic user count", &R::data, &SynthSpec::n_users));
  f.push_back(size_field("data", "days_per_user", "synthetic days per user", &R::data,
                         &SynthSpec::days_per_user));
  f.push_back(real_field("data", "baseline_mean", "mean resting level (bpm)", &R::data,
                         &SynthSpec::baseline_mean));
  f.push_back(real_field("data", "baseline_std", "between-user spread of the resting level",
                         &R::data, &SynthSpec::baseline_std));
  f.push_back(real_field("data", "amplitude_min", "lower bound of the daily amplitude", &R::data,
                         &SynthSpec::amplitude_min));
  f.push_back(real_field("data", "amplitude_max", "upper bound of the daily amplitude", &R::data,
                         &SynthSpec::amplitude_max));
  f.push_back(real_field("data", "phase_min", "lower bound of the daily phase (radians)", &R::data,
                         &SynthSpec::phase_min));
  f.push_back(real_field("data", "phase_max", "upper bound of the daily phase (radians)", &R::data,
                         &SynthSpec::phase_max));
  f.push_back(
      real_field("data", "noise_std", "per-minute noise std", &R::data, &SynthSpec::noise_std));
  f.push_back(real_field("data", "gap_rate", "probability of a further gap in a day", &R::data,
                         &SynthSpec::gap_rate));
  f.push_back(real_field("data", "gap_mean_length", "mean gap length in minutes", &R::data,
                         &SynthSpec::gap_mean_length));
  f.push_back(u64_field("data", "data_seed", "seed of the synthetic generator", &R::data,
                        &SynthSpec::seed));
  f.push_back({{"data", "start_date", "first synthetic day (YYYY-MM-DD)"},
               [](const R& c) { return format_date(c.data.start_date); },
               [](R& c, std::string_view v) { c.data.start_date = parse_date(v); }});
  // [model]
  f.push_back(
      size_field("model", "input_steps", "samples per day", &R::model, &ArchConfig::input_steps));
  f.push_back(
      {{"model", "kernel_widths", "encoder kernel widths, comma separated"},
       [](const R& c) { return from_list(c.model.kernel_widths); },
       [](R& c, std::string_view v) { c.model.kernel_widths = to_list("kernel_widths", v); }});
  f.push_back({{"model", "channels", "encoder channel counts, comma separated"},
               [](const R& c) { return from_list(c.model.channels); },
               [](R& c, std::string_view v) { c.model.channels = to_list("channels", v); }});
  f.push_back(size_field("model", "gate_reduction", "gate bottleneck reduction ratio", &R::model,
                         &ArchConfig::gate_reduction));
  f.push_back(real_field("model", "input_scale", "multiplier applied to raw values", &R::model,
                         &ArchConfig::input_scale));
  // [train]
  f.push_back(size_field("train", "embedding_dim", "embedding width", &R::train,
                         &TrainConfig::embedding_dim));
  f.push_back(size_field("train", "support_size", "reference days per anchor", &R::train,
                         &TrainConfig::support_size));
  f.push_back(size_field("train", "positive_size", "positive days per anchor", &R::train,
                         &TrainConfig::positive_size));
  f.push_back(size_field("train", "negative_size", "negative days per anchor", &R::train,
                         &TrainConfig::negative_size));
  f.push_back(real_field("train", "margin", "triplet margin", &R::train, &TrainConfig::margin));
  f.push_back(
      real_field("train", "lambda", "weight of the triplet loss", &R::train, &TrainConfig::lambda));
  f.push_back(real_field("train", "learning_rate", "Adam step size", &R::train,
                         &TrainConfig::learning_rate));
  f.push_back(size_field("train", "batch_size", "anchor users per step", &R::train,
                         &TrainConfig::batch_size));
  f.push_back(
      size_field("train", "max_epochs", "epoch limit", &R::train, &TrainConfig::max_epochs));
  f.push_back(size_field("train", "patience", "epochs without improvement before stopping",
                         &R::train, &TrainConfig::patience));
  f.push_back(u64_field("train", "seed", "training seed", &R::train, &TrainConfig::seed));
  f.push_back(size_field("train", "max_steps", "optimizer step limit (0 = none)", &R::train,
                         &TrainConfig::max_steps));
  f.push_back(real_field("train", "valid_fraction", "share of users held out for validation",
                         &R::train, &TrainConfig::valid_fraction));
  // [eval]
  f.push_back(u64_field("eval", "eval_seed", "evaluation seed", &R::eval, &EvalConfig::eval_seed));
  f.push_back(size_field("eval", "eval_support_size", "reference days per identification trial",
                         &R::eval, &EvalConfig::support_size));
  f.push_back(size_field("eval", "trials_per_user", "identification trials per user and period",
                         &R::eval, &EvalConfig::trials_per_user));
  f.push_back(optional_date_field("identify_train_end",
                                  "first test-period day for identification (or auto)",
                                  &EvalConfig::identify_train_end));
  f.push_back(optional_date_field("identify_test_end",
                                  "end of the identification test period (or auto)",
                                  &EvalConfig::identify_test_end));
  f.push_back({{"eval", "logistic_l2", "L2 penalty of the logistic probe"},
               [](const R& c) { return format_shortest(c.eval.logistic.l2); },
               [](R& c, std::string_view v) { c.eval.logistic.l2 = to_double("logistic_l2", v); }});
  f.push_back({{"eval", "logistic_iterations", "gradient steps of the logistic probe"},
               [](const R& c) { return std::to_string(c.eval.logistic.iterations); },
               [](R& c, std::string_view v) {
                 c.eval.logistic.iterations = to_u64("logistic_iterations", v);
               }});
  f.push_back({{"eval", "logistic_learning_rate", "step size of the logistic probe"},
               [](const R& c) { return format_shortest(c.eval.logistic.learning_rate); },
               [](R& c, std::string_view v) {
                 c.eval.logistic.learning_rate = to_double("logistic_learning_rate", v);
               }});
  f.push_back(real_field("eval", "head_weight", "weight of the supervised head loss", &R::eval,
                         &EvalConfig::head_weight));
  f.push_back(size_field("eval", "finetune_epochs", "fine-tuning epochs", &R::eval,
                         &EvalConfig::finetune_epochs));
  f.push_back(real_field("eval", "finetune_learning_rate", "fine-tuning step size", &R::eval,
                         &EvalConfig::finetune_learning_rate));
  f.push_back({{"eval", "freeze_body", "fine-tune the head only (true/false)"},
               [](const R& c) { return std::string(c.eval.freeze_body ? "true" : "false"); },
               [](R& c, std::string_view v) { c.eval.freeze_body = to_bool("freeze_body", v); }});
  return f;
}

const std::vector<Field>& fields() {
  static const std::vector<Field> all = make_fields();
  return all;
}

const Field& find_field(std::string_view key) {
  for (const auto& f : fields()) {
    if (f.info.key == key) return f;
  }
  throw std::invalid_argument("unknown configuration key '" + std::string(key) + "'");
}

}  // namespace

const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = [] {
    std::vector<ConfigKey> out;
    for (const auto& f : fields()) out.push_back(f.info);
    return out;
  }();
  return keys;
}

void set_config_value(RunConfig& config, std::string_view key, std::string_view value) {
  find_field(key).set(config, trim(value));
}

std::string get_config_value(const RunConfig& config, std::string_view key) {
  return find_field(key).get(config);
}

RunConfig parse_run_config(std::string_view text, RunConfig base) {
  for (const IniEntry& entry : parse_ini(text)) {
    const std::string where = "line " + std::to_string(entry.line) + ": ";
    try {
      const Field& field = find_field(entry.key);
      if (field.info.section != entry.section) {
        throw std::invalid_argument("key '" + entry.key + "' belongs to [" + field.info.section +
                                    "]");
      }
      field.set(base, entry.value);
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument(where + e.what());
    }
  }
  return base;
}

RunConfig load_run_config(const std::filesystem::path& path, RunConfig base) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read config file " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return parse_run_config(text.str(), std::move(base));
}

std::string format_config_section(const RunConfig& config, std::string_view section) {
  std::string out = "[" + std::string(section) + "]\n";
  for (const auto& f : fields()) {
    if (f.info.section == section) out += f.info.key + " = " + f.get(config) + "\n";
  }
  return out;
}

std::string format_run_config(const RunConfig& config) {
  std::string out;
  for (const char* section : {"data", "model", "train", "eval"}) {
    if (!out.empty()) out += "\n";
    out += format_config_section(config, section);
  }
  return out;
}

}  // namespace wearembed

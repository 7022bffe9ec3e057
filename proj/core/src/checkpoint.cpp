// Copyright 2026 The wearembed Authors.
// SPDX-License-Identifier: Apache-2.0

#include "wearembed/checkpoint.hpp"

#include <zlib.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include "wearembed/errors.hpp"
#include "wearembed/run_config.hpp"
#include "wearembed/text_format.hpp"

namespace wearembed {
namespace {

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

constexpr char kMagic[4] = {'P', 'S', 'P', 'C'};

class Writer {
 public:
  template <typename T>
  void put(T value) {
    char raw[sizeof(T)];
    std::memcpy(raw, &value, sizeof(T));
    out_.append(raw, sizeof(T));
  }
  void bytes(std::string_view s) { out_.append(s); }
  std::string& str() { return out_; }

 private:
  std::string out_;
};

class Reader {
 public:
  explicit Reader(std::string_view data) : data_(data) {}

  template <typename T>
  T get() {
    need(sizeof(T));
    T value;
    std::memcpy(&value, data_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return value;
  }
  std::string_view bytes(std::size_t n) {
    need(n);
    auto s = data_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == data_.size(); }

 private:
  void need(std::size_t n) const {
    if (data_.size() - pos_ < n) throw IntegrityError("checkpoint: unexpected end of data");
  }
  std::string_view data_;
  std::size_t pos_ = 0;
};

void put_entry(Writer& w, const std::string& name, const Tensor& t) {
  w.put<std::uint32_t>(static_cast<std::uint32_t>(name.size()));
  w.bytes(name);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(t.rank()));
  for (std::size_t d : t.shape()) w.put<std::uint64_t>(d);
  for (double v : t.values()) w.put<double>(v);
}

Tensor step_table(const std::vector<LossBreakdown>& steps) {
  Tensor t({steps.size(), 6});
  for (std::size_t i = 0; i < steps.size(); ++i) {
    const auto& s = steps[i];
    double* row = t.row(i);
    row[0] = s.l_ae;
    row[1] = s.l_s;
    row[2] = s.l_joint;
    row[3] = s.lambda;
    row[4] = s.head_loss;
    row[5] = s.head_weight;
  }
  return t;
}

Tensor epoch_table(const std::vector<EpochRecord>& history) {
  Tensor t({history.size(), 5});
  for (std::size_t i = 0; i < history.size(); ++i) {
    const auto& h = history[i];
    double* row = t.row(i);
    row[0] = static_cast<double>(h.epoch);
    row[1] = h.l_ae;
    row[2] = h.l_s;
    row[3] = h.l_joint;
    row[4] = h.val_joint;
  }
  return t;
}

std::string state_text(const TrainerState& s) {
  RunConfig rc;
  rc.model = s.model.config().arch;
  rc.train = s.config;
  const AggregatorConfig& agg = s.model.config().aggregator;
  std::string text = format_config_section(rc, "model") + format_config_section(rc, "train");
  text += "[aggregator]\n";
  text += "dim = " + std::to_string(agg.dim) + "\n";
  text += "heads = " + std::to_string(agg.heads) + "\n";
  text += "ff_multiplier = " + std::to_string(agg.ff_multiplier) + "\n";
  text += "attention_blocks = " + std::to_string(agg.attention_blocks) + "\n";
  text += "[state]\n";
  text += "epoch = " + std::to_string(s.epoch) + "\n";
  text += "step = " + std::to_string(s.step) + "\n";
  text += "adam_step = " + std::to_string(s.adam.step) + "\n";
  text += "adam_beta1 = " + format_exact(s.adam.beta1) + "\n";
  text += "adam_beta2 = " + format_exact(s.adam.beta2) + "\n";
  text += "adam_epsilon = " + format_exact(s.adam.epsilon) + "\n";
  text += "rng_seed = " + std::to_string(s.rng.seed()) + "\n";
  text += "rng_counter = " + std::to_string(s.rng.counter()) + "\n";
  text += "best_val = " + format_exact(s.best_val) + "\n";
  text += "best_epoch = " + std::to_string(s.best_epoch) + "\n";
  text += "stale_epochs = " + std::to_string(s.stale_epochs) + "\n";
  text += "sampler_warnings = " + std::to_string(s.sampler_warnings) + "\n";
  text += "early_stopped = " + std::string(s.early_stopped ? "1" : "0") + "\n";
  return text;
}

std::uint32_t crc_of(std::string_view bytes) {
  uLong crc = crc32(0L, Z_NULL, 0);
  // zlib takes uInt lengths; feed in chunks.
  constexpr std::size_t kChunk = 1u << 30;
  for (std::size_t pos = 0; pos < bytes.size(); pos += kChunk) {
    const std::size_t n = std::min(kChunk, bytes.size() - pos);
    crc = crc32(crc, reinterpret_cast<const Bytef*>(bytes.data() + pos), static_cast<uInt>(n));
  }
  return static_cast<std::uint32_t>(crc);
}

template <typename T>
T require(const std::map<std::string, std::string>& kv, const std::string& key,
          T (*convert)(std::string_view)) {
  auto it = kv.find(key);
  if (it == kv.end()) throw IntegrityError("checkpoint: missing state key " + key);
  return convert(it->second);
}

std::uint64_t as_u64(std::string_view v) {
  if (auto x = parse_u64(v)) return *x;
  throw IntegrityError("checkpoint: bad integer '" + std::string(v) + "'");
}

double as_double(std::string_view v) {
  if (auto x = parse_double(v)) return *x;
  throw IntegrityError("checkpoint: bad number '" + std::string(v) + "'");
}

}  // namespace

std::string serialize_checkpoint(const TrainerState& s, std::uint32_t version) {
  const auto params = s.model.parameters();
  std::vector<std::pair<std::string, const Tensor*>> entries;
  for (std::size_t i = 0; i < params.size(); ++i) {
    entries.emplace_back("param:" + params[i]->name, &params[i]->value);
  }
  for (std::size_t i = 0; i < params.size() && i < s.adam.first_moment.size(); ++i) {
    entries.emplace_back("adam.m:" + params[i]->name, &s.adam.first_moment[i]);
    entries.emplace_back("adam.v:" + params[i]->name, &s.adam.second_moment[i]);
  }
  for (std::size_t i = 0; i < s.best_values.size(); ++i) {
    entries.emplace_back("best:" + params[i]->name, &s.best_values[i]);
  }
  const Tensor steps = step_table(s.steps);
  const Tensor epochs = epoch_table(s.history);
  entries.emplace_back("history.steps", &steps);
  entries.emplace_back("history.epochs", &epochs);

  Writer w;
  w.bytes({kMagic, 4});
  w.put<std::uint32_t>(version);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(entries.size()));
  for (const auto& [name, tensor] : entries) put_entry(w, name, *tensor);
  const std::string text = state_text(s);
  w.put<std::uint64_t>(text.size());
  w.bytes(text);
  w.put<std::uint32_t>(crc_of(w.str()));
  return std::move(w.str());
}

TrainerState deserialize_checkpoint(std::string_view bytes) {
  if (bytes.size() < 8 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw IntegrityError("checkpoint: missing PSPC header");
  }
  std::uint32_t version = 0;
  std::memcpy(&version, bytes.data() + 4, 4);
  if (version != kCheckpointVersion) {
    throw VersionError("checkpoint format version " + std::to_string(version) +
                       " is not supported (expected " + std::to_string(kCheckpointVersion) + ")");
  }
  if (bytes.size() < 12 + 8 + 4) throw IntegrityError("checkpoint: truncated");
  std::uint32_t stored_crc = 0;
  std::memcpy(&stored_crc, bytes.data() + bytes.size() - 4, 4);
  const std::string_view body = bytes.substr(0, bytes.size() - 4);
  if (crc_of(body) != stored_crc) throw IntegrityError("checkpoint: checksum mismatch");

  Reader r(body.substr(8));
  const auto n_entries = r.get<std::uint32_t>();
  std::map<std::string, Tensor> tensors;
  for (std::uint32_t e = 0; e < n_entries; ++e) {
    const std::string name(r.bytes(r.get<std::uint32_t>()));
    const auto rank = r.get<std::uint32_t>();
    if (rank > 8) throw IntegrityError("checkpoint: implausible rank for " + name);
    Shape shape;
    for (std::uint32_t k = 0; k < rank; ++k) shape.push_back(r.get<std::uint64_t>());
    const std::size_t count = shape_size(shape);
    const std::string_view raw = r.bytes(count * sizeof(double));
    std::vector<double> data(count);
    if (count) std::memcpy(data.data(), raw.data(), raw.size());
    tensors.emplace(name, Tensor(std::move(shape), std::move(data)));
  }
  const std::string text(r.bytes(r.get<std::uint64_t>()));
  if (!r.done()) throw IntegrityError("checkpoint: trailing bytes");

  RunConfig rc;
  std::map<std::string, std::string> agg_kv;
  std::map<std::string, std::string> state_kv;
  try {
    for (const IniEntry& entry : parse_ini(text)) {
      if (entry.section == "model" || entry.section == "train") {
        set_config_value(rc, entry.key, entry.value);
      } else if (entry.section == "aggregator") {
        agg_kv[entry.key] = entry.value;
      } else if (entry.section == "state") {
        state_kv[entry.key] = entry.value;
      } else {
        throw IntegrityError("checkpoint: unexpected section " + entry.section);
      }
    }
  } catch (const std::invalid_argument& e) {
    throw IntegrityError(std::string("checkpoint: bad configuration text: ") + e.what());
  }

  ModelConfig model_config;
  model_config.arch = rc.model;
  model_config.arch.embedding_dim = rc.train.embedding_dim;
  model_config.aggregator.dim = require(agg_kv, "dim", as_u64);
  model_config.aggregator.heads = require(agg_kv, "heads", as_u64);
  model_config.aggregator.ff_multiplier = require(agg_kv, "ff_multiplier", as_u64);
  model_config.aggregator.attention_blocks = require(agg_kv, "attention_blocks", as_u64);

  TrainerState state = [&] {
    try {
      return TrainerState(rc.train, model_config);
    } catch (const std::invalid_argument& e) {
      throw IntegrityError(std::string("checkpoint: inconsistent model configuration: ") +
                           e.what());
    }
  }();

  auto take = [&](const std::string& key, const Tensor& like) {
    auto it = tensors.find(key);
    if (it == tensors.end()) throw IntegrityError("checkpoint: missing entry " + key);
    if (it->second.shape() != like.shape()) {
      throw IntegrityError("checkpoint: entry " + key + " has shape " +
                           shape_to_string(it->second.shape()) + ", expected " +
                           shape_to_string(like.shape()));
    }
    return it->second;
  };
  const auto params = state.model.parameters();
  state.adam = AdamState::for_parameters(params);
  const bool has_best = tensors.count("best:" + params.front()->name) != 0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const std::string& name = params[i]->name;
    params[i]->value = take("param:" + name, params[i]->value);
    state.adam.first_moment[i] = take("adam.m:" + name, params[i]->value);
    state.adam.second_moment[i] = take("adam.v:" + name, params[i]->value);
    if (has_best) state.best_values.push_back(take("best:" + name, params[i]->value));
  }

  const Tensor& steps = tensors.count("history.steps") ? tensors.at("history.steps") : Tensor();
  const Tensor& epochs = tensors.count("history.epochs") ? tensors.at("history.epochs") : Tensor();
  if (steps.rank() != 2 || steps.dim(1) != 6 || epochs.rank() != 2 || epochs.dim(1) != 5) {
    throw IntegrityError("checkpoint: malformed history tables");
  }
  for (std::size_t i = 0; i < steps.dim(0); ++i) {
    const double* row = steps.row(i);
    LossBreakdown s;
    s.l_ae = row[0];
    s.l_s = row[1];
    s.l_joint = row[2];
    s.lambda = row[3];
    s.head_loss = row[4];
    s.head_weight = row[5];
    state.steps.push_back(s);
  }
  for (std::size_t i = 0; i < epochs.dim(0); ++i) {
    const double* row = epochs.row(i);
    state.history.push_back({static_cast<std::size_t>(row[0]), row[1], row[2], row[3], row[4]});
  }

  state.epoch = require(state_kv, "epoch", as_u64);
  state.step = require(state_kv, "step", as_u64);
  state.adam.step = require(state_kv, "adam_step", as_u64);
  state.adam.beta1 = require(state_kv, "adam_beta1", as_double);
  state.adam.beta2 = require(state_kv, "adam_beta2", as_double);
  state.adam.epsilon = require(state_kv, "adam_epsilon", as_double);
  state.rng = Rng(require(state_kv, "rng_seed", as_u64), require(state_kv, "rng_counter", as_u64));
  state.best_val = require(state_kv, "best_val", as_double);
  state.best_epoch = require(state_kv, "best_epoch", as_u64);
  state.stale_epochs = require(state_kv, "stale_epochs", as_u64);
  state.sampler_warnings = require(state_kv, "sampler_warnings", as_u64);
  state.early_stopped = require(state_kv, "early_stopped", as_u64) != 0;
  return state;
}

void save_checkpoint(const std::filesystem::path& path, const TrainerState& state) {
  const std::string bytes = serialize_checkpoint(state);
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write checkpoint " + path.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("failed writing checkpoint " + path.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot move checkpoint into " + path.string() + ": " + ec.message());
}

TrainerState load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read checkpoint " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return deserialize_checkpoint(buf.str());
}

}  // namespace wearembed

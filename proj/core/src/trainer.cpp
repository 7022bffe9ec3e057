// Copyright 2026 The wearembed Authors.
// SPDX-License-Identifier: Apache-2.0

#include "wearembed/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <stdexcept>

#include "wearembed/checkpoint.hpp"
#include "wearembed/errors.hpp"

namespace wearembed {
namespace {

// Sub-stream ids under the training seed.
constexpr std::uint64_t kInitStream = 1;
constexpr std::uint64_t kPartitionStream = 2;
constexpr std::uint64_t kValidationStream = 3;
constexpr std::uint64_t kTrainStream = 4;

struct DaySet {
  std::vector<DayRef> days;
  std::map<DayRef, std::size_t> index;

  std::size_t add(DayRef ref) {
    auto [it, inserted] = index.emplace(ref, days.size());
    if (inserted) days.push_back(ref);
    return it->second;
  }
};

DaySet collect_days(const TripletSample& sample) {
  DaySet set;
  for (const auto& batch : sample.batches) {
    for (const auto* group : {&batch.reference, &batch.positive, &batch.negative}) {
      for (DayRef ref : *group) set.add(ref);
    }
  }
  return set;
}

const DayLongSeries& day_of(const std::vector<UserArchive>& archives, DayRef ref) {
  return archives.at(ref.user).days.at(ref.day);
}

struct AnchorInputs {
  Tensor reference;  // [N^r x dim]
  std::vector<std::int64_t> offsets;
  std::vector<std::vector<double>> positives;
  std::vector<std::vector<double>> negatives;
};

AnchorInputs gather(const TripletBatch& batch, const DaySet& set,
                    const std::vector<Tensor>& embeddings,
                    const std::vector<UserArchive>& archives) {
  const std::size_t dim = embeddings.front().size();
  AnchorInputs in;
  in.reference = Tensor({batch.reference.size(), dim});
  std::vector<Date> dates;
  for (std::size_t t = 0; t < batch.reference.size(); ++t) {
    const Tensor& e = embeddings[set.index.at(batch.reference[t])];
    std::copy(e.storage().begin(), e.storage().end(), in.reference.row(t));
    dates.push_back(day_of(archives, batch.reference[t]).date);
  }
  in.offsets = relative_day_offsets(dates);
  for (DayRef ref : batch.positive) in.positives.push_back(embeddings[set.index.at(ref)].storage());
  for (DayRef ref : batch.negative) in.negatives.push_back(embeddings[set.index.at(ref)].storage());
  return in;
}

void add_into(Tensor& dst, std::span<const double> src, double scale) {
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] += scale * src[i];
}

double day_reconstruction_loss(const Tensor& input, const DayLongSeries& series,
                               const Tensor& reconstruction) {
  return masked_reconstruction_loss(input.values(), series.mask, reconstruction.values());
}

bool same_except_limits(TrainConfig a, TrainConfig b) {
  a.max_epochs = b.max_epochs;
  a.max_steps = b.max_steps;
  return a == b;
}

}  // namespace

void validate(const TrainConfig& c) {
  if (c.embedding_dim == 0 || c.support_size == 0 || c.positive_size == 0 || c.negative_size == 0 ||
      c.batch_size == 0) {
    throw std::invalid_argument("train config: sizes must be at least 1");
  }
  if (!(c.margin >= 0.0)) throw std::invalid_argument("train config: margin must be >= 0");
  if (!(c.lambda >= 0.0)) throw std::invalid_argument("train config: lambda must be >= 0");
  if (!(c.learning_rate > 0.0)) {
    throw std::invalid_argument("train config: learning_rate must be > 0");
  }
  if (!(c.valid_fraction >= 0.0 && c.valid_fraction < 1.0)) {
    throw std::invalid_argument("train config: valid_fraction must lie in [0, 1)");
  }
}

ModelConfig model_config_for(const TrainConfig& config, ArchConfig arch) {
  ModelConfig out;
  arch.embedding_dim = config.embedding_dim;
  out.arch = std::move(arch);
  out.aggregator.dim = config.embedding_dim;
  return out;
}

TrainerState::TrainerState(TrainConfig config_in, ModelConfig model_config)
    : config(config_in), model(std::move(model_config)), rng(config_in.seed) {}

TrainerState initial_state(const TrainConfig& config, const ModelConfig& model_config) {
  validate(config);
  TrainerState state(config, model_config);
  Rng init = Rng(config.seed).fork(kInitStream);
  state.model.initialize(init);
  state.adam = AdamState::for_parameters(state.model.parameters());
  state.rng = Rng(config.seed).fork(kTrainStream);
  return state;
}

Model best_model(const TrainerState& state) {
  Model model = state.model;
  if (!state.best_values.empty()) model.restore(state.best_values);
  return model;
}

UserPartition partition_users(std::size_t n_users, double valid_fraction, std::uint64_t seed) {
  if (n_users < 2) throw std::invalid_argument("training needs at least 2 users");
  std::vector<std::size_t> order(n_users);
  std::iota(order.begin(), order.end(), 0);
  UserPartition part;
  std::size_t n_valid = 0;
  if (n_users >= 3 && valid_fraction > 0.0) {
    n_valid = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::llround(valid_fraction * static_cast<double>(n_users))));
    n_valid = std::min(n_valid, n_users - 2);
  }
  Rng rng = Rng(seed).fork(kPartitionStream);
  rng.shuffle(order);
  part.valid.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_valid));
  part.train.assign(order.begin() + static_cast<std::ptrdiff_t>(n_valid), order.end());
  std::sort(part.valid.begin(), part.valid.end());
  std::sort(part.train.begin(), part.train.end());
  return part;
}

LossBreakdown accumulate_gradients(Model& model, const std::vector<UserArchive>& archives,
                                   const TripletSample& sample, const TrainConfig& config,
                                   const ReferenceHook& hook, double hook_weight) {
  if (sample.batches.empty()) throw std::invalid_argument("accumulate_gradients: empty batch");
  DayAutoencoder& ae = model.autoencoder();
  Aggregator& aggregator = model.aggregator();
  const ArchConfig& arch = ae.config();
  const DaySet set = collect_days(sample);
  const double n_days = static_cast<double>(set.days.size());
  const double n_anchors = static_cast<double>(sample.batches.size());

  // Embeddings first; the triplet term needs all of them before any
  // encoder backward pass can run.
  std::vector<Tensor> embeddings;
  embeddings.reserve(set.days.size());
  for (DayRef ref : set.days) {
    embeddings.push_back(ae.encode(prepare_input(day_of(archives, ref), arch)));
  }
  std::vector<Tensor> grad_embeddings(set.days.size(), Tensor({arch.embedding_dim}));

  double l_s = 0.0;
  double head_loss = 0.0;
  const double triplet_scale = config.lambda / n_anchors;
  const double head_scale = hook ? hook_weight / n_anchors : 0.0;
  for (const auto& batch : sample.batches) {
    AnchorInputs in = gather(batch, set, embeddings, archives);
    AggregatorCache cache;
    const AggregatedEmbedding ref = aggregator.forward(in.reference, in.offsets, &cache);
    TripletLoss loss = siamese_triplet_loss(ref.vector, in.positives, in.negatives, config.margin);
    l_s += loss.value;
    const bool triplet_live = triplet_scale != 0.0 && loss.active_pairs != 0;

    std::vector<double> grad_reference(arch.embedding_dim, 0.0);
    if (triplet_live) {
      for (std::size_t i = 0; i < grad_reference.size(); ++i) {
        grad_reference[i] = triplet_scale * loss.grad_reference[i];
      }
    }
    if (hook) {
      std::vector<double> grad_head(arch.embedding_dim, 0.0);
      head_loss += hook(batch.anchor, ref.vector, grad_head);
      for (std::size_t i = 0; i < grad_reference.size(); ++i) {
        grad_reference[i] += head_scale * grad_head[i];
      }
    }
    if (triplet_live || head_scale != 0.0) {
      const Tensor grad_rows = aggregator.backward(cache, grad_reference);
      for (std::size_t t = 0; t < batch.reference.size(); ++t) {
        add_into(grad_embeddings[set.index.at(batch.reference[t])],
                 {grad_rows.row(t), arch.embedding_dim}, 1.0);
      }
    }
    if (!triplet_live) continue;
    for (std::size_t p = 0; p < batch.positive.size(); ++p) {
      add_into(grad_embeddings[set.index.at(batch.positive[p])], loss.grad_positives[p],
               triplet_scale);
    }
    for (std::size_t q = 0; q < batch.negative.size(); ++q) {
      add_into(grad_embeddings[set.index.at(batch.negative[q])], loss.grad_negatives[q],
               triplet_scale);
    }
  }

  double l_ae = 0.0;
  for (std::size_t d = 0; d < set.days.size(); ++d) {
    const DayLongSeries& series = day_of(archives, set.days[d]);
    const Tensor input = prepare_input(series, arch);
    EncoderCache encoder_cache;
    DecoderCache decoder_cache;
    const Tensor embedding = ae.encode(input, &encoder_cache);
    const Tensor reconstruction = ae.decode(embedding, &decoder_cache);
    l_ae += day_reconstruction_loss(input, series, reconstruction);

    Tensor grad_reconstruction =
        masked_reconstruction_grad(input.values(), series.mask, reconstruction.values());
    grad_reconstruction *= 1.0 / n_days;
    Tensor grad_embedding = ae.decode_backward(decoder_cache, grad_reconstruction);
    grad_embedding += grad_embeddings[d];
    ae.encode_backward(encoder_cache, grad_embedding);
  }
  LossBreakdown out = joint_loss(l_ae / n_days, l_s / n_anchors, config.lambda);
  if (hook) {
    out.head_loss = head_loss / n_anchors;
    out.head_weight = hook_weight;
  }
  return out;
}

LossBreakdown evaluate_loss(const Model& model, const std::vector<UserArchive>& archives,
                            const TripletSample& sample, const TrainConfig& config) {
  if (sample.batches.empty()) throw std::invalid_argument("evaluate_loss: empty batch");
  const DayAutoencoder& ae = model.autoencoder();
  const ArchConfig& arch = ae.config();
  const DaySet set = collect_days(sample);

  std::vector<Tensor> embeddings;
  double l_ae = 0.0;
  for (DayRef ref : set.days) {
    const DayLongSeries& series = day_of(archives, ref);
    const Tensor input = prepare_input(series, arch);
    embeddings.push_back(ae.encode(input));
    l_ae += day_reconstruction_loss(input, series, ae.decode(embeddings.back()));
  }
  double l_s = 0.0;
  for (const auto& batch : sample.batches) {
    const AnchorInputs in = gather(batch, set, embeddings, archives);
    const AggregatedEmbedding ref = model.aggregator().forward(in.reference, in.offsets);
    l_s += siamese_triplet_loss(ref.vector, in.positives, in.negatives, config.margin).value;
  }
  return joint_loss(l_ae / static_cast<double>(set.days.size()),
                    l_s / static_cast<double>(sample.batches.size()), config.lambda);
}

LossBreakdown train_step(Model& model, AdamState& adam, const std::vector<UserArchive>& archives,
                         std::span<const std::size_t> anchors,
                         std::span<const std::size_t> negative_pool, const TrainConfig& config,
                         Rng& rng, std::size_t* warnings) {
  if (anchors.empty()) throw std::invalid_argument("train_step: empty batch");
  const TripletSample sample =
      sample_triplet_batch(archives, anchors, negative_pool, config.triplet_sizes(), rng);
  if (warnings) *warnings += sample.warnings;
  auto params = model.parameters();
  for (Parameter* p : params) p->zero_grad();
  const LossBreakdown loss = accumulate_gradients(model, archives, sample, config);
  if (!std::isfinite(loss.l_joint)) {
    for (Parameter* p : params) p->zero_grad();
    throw DivergenceError("non-finite training loss at optimizer step " +
                          std::to_string(adam.step + 1));
  }
  adam_update(params, adam, config.learning_rate);
  return loss;
}

TrainerState fit(const std::vector<UserArchive>& archives, const TrainConfig& config,
                 FitOptions options) {
  validate(config);
  const UserPartition part = partition_users(archives.size(), config.valid_fraction, config.seed);
  std::vector<std::size_t> all_users(archives.size());
  std::iota(all_users.begin(), all_users.end(), 0);
  // Without held-out users the validation objective falls back to training users.
  const std::vector<std::size_t>& valid_anchors = part.valid.empty() ? part.train : part.valid;

  TrainerState state = [&] {
    if (!options.resume) {
      TrainerState fresh = initial_state(config, model_config_for(config, options.arch));
      // Start the decoder at the training users' mean level; otherwise the
      // first updates spend the embedding on the constant offset and the
      // tanh head saturates.
      fresh.model.autoencoder().set_output_level(
          mean_observed_level(archives, part.train, options.arch.input_scale));
      return fresh;
    }
    if (!same_except_limits(options.resume->config, config)) {
      throw std::invalid_argument("resume: training configuration differs from the checkpoint");
    }
    TrainerState resumed = std::move(*options.resume);
    resumed.config.max_epochs = config.max_epochs;
    resumed.config.max_steps = config.max_steps;
    return resumed;
  }();

  if (options.checkpoint_path && !options.resume) save_checkpoint(*options.checkpoint_path, state);

  auto step_limit_hit = [&] { return config.max_steps != 0 && state.step >= config.max_steps; };
  while (!state.early_stopped && state.epoch < config.max_epochs && !step_limit_hit()) {
    std::vector<std::size_t> order = part.train;
    state.rng.shuffle(order);
    LossBreakdown sum;
    std::size_t steps_this_epoch = 0;
    for (std::size_t begin = 0; begin < order.size() && !step_limit_hit();
         begin += config.batch_size) {
      const std::size_t end = std::min(order.size(), begin + config.batch_size);
      const std::span<const std::size_t> anchors(order.data() + begin, end - begin);
      const LossBreakdown loss = train_step(state.model, state.adam, archives, anchors, part.train,
                                            config, state.rng, &state.sampler_warnings);
      state.steps.push_back(loss);
      ++state.step;
      ++steps_this_epoch;
      sum.l_ae += loss.l_ae;
      sum.l_s += loss.l_s;
      sum.l_joint += loss.l_joint;
    }

    Rng valid_rng = Rng(config.seed).fork(kValidationStream);
    const TripletSample valid_sample =
        sample_triplet_batch(archives, valid_anchors, all_users, config.triplet_sizes(), valid_rng);
    const double val = evaluate_loss(state.model, archives, valid_sample, config).l_joint;
    if (!std::isfinite(val)) throw DivergenceError("non-finite validation loss");

    ++state.epoch;
    const double n = static_cast<double>(std::max<std::size_t>(steps_this_epoch, 1));
    state.history.push_back({state.epoch, sum.l_ae / n, sum.l_s / n, sum.l_joint / n, val});
    if (val < state.best_val) {
      state.best_val = val;
      state.best_epoch = state.epoch;
      state.stale_epochs = 0;
      state.best_values = state.model.snapshot();
    } else if (++state.stale_epochs > config.patience) {
      state.early_stopped = true;
    }
    if (options.checkpoint_path) save_checkpoint(*options.checkpoint_path, state);
    if (options.on_epoch) options.on_epoch(state);
  }
  return state;
}

}  // namespace wearembed

#include "sldcnn/trainer.hpp"

#include <chrono>
#include <cmath>

#include "sldcnn/error.hpp"

namespace sldcnn {

void TrainConfig::validate() const {
  if (batch_size == 0) throw ConfigError("batch_size must be >= 1");
  if (!(lrate1 > 0) || !(lrate2 > 0)) throw ConfigError("learning rates must be positive");
  if (!(lrate2 < lrate1)) throw ConfigError("lrate2 (fine-tuning) must be lower than lrate1");
  if (!(gamma >= 0 && gamma < 1)) throw ConfigError("gamma must lie in [0,1)");
  if (!(epsilon >= 0)) throw ConfigError("epsilon must be >= 0");
  if (!(final_fraction > 0 && final_fraction <= 1)) {
    throw ConfigError("final_fraction must lie in (0,1]");
  }
  if (!(init_scale > 0)) throw ConfigError("init_scale must be positive");
  if (threads == 0) throw ConfigError("threads must be >= 1");
}

SetupPreset setup_preset(int id) {
  switch (id) {
    case 1: return {1, 10, 20, 50};
    case 2: return {2, 7, 7, 28};
    default: throw UsageError("unknown setup " + std::to_string(id) + " (expected 1 or 2)");
  }
}

void apply_preset(const SetupPreset& p, TrainConfig& c) {
  c.per_layer_iters = p.per_layer_iters;
  c.fine_tune_iters = p.fine_tune_iters;
  c.dcnn_iters = p.dcnn_iters;
}

void check_compatible(const Model& model, const Dataset& data) {
  if (!model.trainable()) throw ConfigError("model has no softmax output layer");
  if (model.classes() != data.classes()) {
    throw ConfigError("model has " + std::to_string(model.classes()) +
                      " output classes but the dataset has " + std::to_string(data.classes()));
  }
  const Shape expected = model.input().shape();
  if (data.images.rank() != 4 || Shape(data.images.shape().begin() + 1, data.images.shape().end()) != expected) {
    throw ConfigError("dataset images " + shape_string(data.images.shape()) +
                      " do not match model input " + shape_string(expected));
  }
}

std::vector<int> predict_dataset(const Model& model, const Dataset& data, std::size_t chunk) {
  std::vector<int> out;
  out.reserve(data.size());
  for (std::size_t begin = 0; begin < data.size(); begin += chunk) {
    const std::size_t end = std::min(begin + chunk, data.size());
    const std::vector<int> p = model.predict(data.images.slice_rows(begin, end));
    out.insert(out.end(), p.begin(), p.end());
  }
  return out;
}

std::vector<EpochRecord> train_model(Model& model, const Dataset& train, const Dataset& test,
                                     const TrainConfig& config, const Phase& phase, Rng& shuffle_rng,
                                     const EpochCallback& on_epoch) {
  config.validate();
  check_compatible(model, train);
  check_compatible(model, test);
  std::vector<EpochRecord> records;
  if (phase.iters == 0) return records;

  const std::size_t n = train.size();
  const std::size_t per_epoch = (n + config.batch_size - 1) / config.batch_size;
  LrSchedule schedule{phase.lrate, config.final_fraction,
                      config.decay_unit == DecayUnit::kEpoch ? phase.iters : phase.iters * per_epoch};
  validate(schedule);

  for (std::size_t epoch = 0; epoch < phase.iters; ++epoch) {
    const auto started = std::chrono::steady_clock::now();
    const std::size_t global_epoch = phase.epoch_offset + epoch + 1;
    EpochRecord rec;
    rec.phase = phase.name;
    rec.epoch = global_epoch;
    rec.lr = lr_at(schedule, config.decay_unit == DecayUnit::kEpoch ? epoch : epoch * per_epoch);

    try {
      const std::vector<std::size_t> order = shuffled_order(n, shuffle_rng);
      Real loss_sum = 0;
      std::size_t correct = 0;
      for (std::size_t b = 0; b < per_epoch; ++b) {
        const std::size_t begin = b * config.batch_size;
        const std::size_t end = std::min(begin + config.batch_size, n);
        const Batch batch =
            gather(train, std::span<const std::size_t>(order).subspan(begin, end - begin));
        const BatchResult r = model.batch_gradients(batch.images, batch.labels, config.threads);
        if (!std::isfinite(r.loss)) throw NumericError("non-finite loss");
        loss_sum += r.loss * static_cast<Real>(end - begin);
        correct += r.correct;
        const Real lr = config.decay_unit == DecayUnit::kEpoch
                            ? rec.lr
                            : lr_at(schedule, epoch * per_epoch + b);
        model.apply_gradients(r.grads, lr, phase.trainable_from);
      }
      rec.train_loss = loss_sum / static_cast<Real>(n);
      rec.train_error = 1.0 - static_cast<double>(correct) / static_cast<double>(n);
      rec.test_error = error_rate(predict_dataset(model, test), test.labels);
    } catch (const NumericError& e) {
      throw NumericError("training diverged in phase " + phase.name + " at epoch " +
                         std::to_string(global_epoch) + ": " + e.what());
    }
    rec.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - started).count();
    if (on_epoch) on_epoch(rec);
    records.push_back(std::move(rec));
  }
  return records;
}

namespace {

ModelOptions model_options(const TrainConfig& c) {
  return ModelOptions{c.seed, c.gamma, c.epsilon, c.init_scale};
}

// Stream tag for the per-run shuffling generator.
constexpr std::uint64_t kShuffleStream = 100;

void run_phase(TrainResult& result, const TrainConfig& config, const Dataset& train,
               const Dataset& test, Phase phase, Rng& rng, const EpochCallback& on_epoch) {
  phase.epoch_offset = result.records.size();
  std::vector<EpochRecord> r = train_model(result.model, train, test, config, phase, rng, on_epoch);
  result.model.log_phase({phase.name, result.model.arch_string(), r.size()});
  result.records.insert(result.records.end(), r.begin(), r.end());
}

}  // namespace

TrainResult train_dcnn(const TrainConfig& config, const ArchSpec& arch, const Dataset& train,
                       const Dataset& test, const EpochCallback& on_epoch) {
  config.validate();
  TrainResult result{Model(arch.input, model_options(config)), {}};
  for (const LayerSpec& s : arch.layers) result.model.add_layer(s);
  Rng rng(derive_seed(config.seed, kShuffleStream));
  run_phase(result, config, train, test, {"dcnn", config.lrate1, config.dcnn_iters, 0, 0}, rng,
            on_epoch);
  return result;
}

TrainResult train_sldcnn(const TrainConfig& config, const ArchSpec& arch, const Dataset& train,
                         const Dataset& test, const EpochCallback& on_epoch,
                         const StructureCallback& on_structure) {
  config.validate();
  const ArchBlocks parts = split_blocks(arch.layers);
  TrainResult result{Model(arch.input, model_options(config)), {}};
  Model& model = result.model;
  Rng rng(derive_seed(config.seed, kShuffleStream));
  auto notify = [&](StructureEvent e) {
    if (on_structure) on_structure(e, model);
  };

  for (std::size_t k = 0; k < parts.blocks.size(); ++k) {
    if (k > 0) {
      for (std::size_t i = 0; i < parts.head.size(); ++i) model.remove_layer();
      notify(StructureEvent::kHeadRemoved);
    }
    const std::size_t block_start = model.depth();
    for (const LayerSpec& s : parts.blocks[k]) model.add_layer(s);
    for (const LayerSpec& s : parts.head) model.add_layer(s);
    notify(StructureEvent::kBlockAdded);
    const std::size_t from = config.freeze_earlier ? block_start : 0;
    run_phase(result, config, train, test,
              {"layer" + std::to_string(k + 1), config.lrate1, config.per_layer_iters, from, 0}, rng,
              on_epoch);
    notify(StructureEvent::kPhaseTrained);
  }
  run_phase(result, config, train, test, {"finetune", config.lrate2, config.fine_tune_iters, 0, 0},
            rng, on_epoch);
  notify(StructureEvent::kPhaseTrained);
  return result;
}

TrainResult train(const TrainConfig& config, const ArchSpec& arch, const Dataset& train,
                  const Dataset& test, const EpochCallback& on_epoch) {
  return config.mode == TrainMode::kDcnn ? train_dcnn(config, arch, train, test, on_epoch)
                                         : train_sldcnn(config, arch, train, test, on_epoch);
}

}  // namespace sldcnn

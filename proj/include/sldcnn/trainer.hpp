#ifndef SLDCNN_TRAINER_HPP
#define SLDCNN_TRAINER_HPP

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "sldcnn/arch.hpp"
#include "sldcnn/data.hpp"
#include "sldcnn/metrics.hpp"
#include "sldcnn/model.hpp"

namespace sldcnn {

enum class TrainMode { kDcnn, kSlDcnn };

/// What one step of the learning-rate decay counts.
enum class DecayUnit { kEpoch, kBatch };

struct TrainConfig {
  TrainMode mode = TrainMode::kSlDcnn;
  std::size_t batch_size = 100;
  std::size_t per_layer_iters = 10;
  std::size_t fine_tune_iters = 20;
  std::size_t dcnn_iters = 50;
  Real lrate1 = 0.01;
  Real lrate2 = 0.001;
  Real gamma = 0.9;
  Real epsilon = 1e-8;
  Real final_fraction = 0.1;
  DecayUnit decay_unit = DecayUnit::kEpoch;
  std::uint64_t seed = 1;
  bool freeze_earlier = false;  // layerwise phases update only the newest block and head
  Real init_scale = 1.0;
  std::size_t threads = 1;

  /// Throws ConfigError describing the first violated constraint.
  void validate() const;
};

/// Iteration budgets of the two published protocols.
struct SetupPreset {
  int id = 1;
  std::size_t per_layer_iters = 10;
  std::size_t fine_tune_iters = 20;
  std::size_t dcnn_iters = 50;
};

/// 1 -> 10/20/50, 2 -> 7/7/28. Throws UsageError otherwise.
SetupPreset setup_preset(int id);
void apply_preset(const SetupPreset& preset, TrainConfig& config);

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Points in the layerwise loop at which the live model can be observed.
enum class StructureEvent { kHeadRemoved, kBlockAdded, kPhaseTrained };
using StructureCallback = std::function<void(StructureEvent, const Model&)>;

/// One call of the training routine over the live model.
struct Phase {
  std::string name;
  Real lrate = 0.01;
  std::size_t iters = 0;
  std::size_t trainable_from = 0;  // first layer whose parameters are updated
  std::size_t epoch_offset = 0;    // epochs already run before this phase
};

/// Shuffled mini-batch RMSProp over `phase.iters` epochs, with the rate
/// decaying linearly to final_fraction * lrate within the phase. Emits one
/// record per epoch (test error measured on the full test split). Throws
/// ConfigError when the datasets do not fit the model and NumericError,
/// naming the epoch, on divergence.
std::vector<EpochRecord> train_model(Model& model, const Dataset& train, const Dataset& test,
                                     const TrainConfig& config, const Phase& phase, Rng& shuffle_rng,
                                     const EpochCallback& on_epoch = {});

struct TrainResult {
  Model model;
  std::vector<EpochRecord> records;
};

/// Full architecture trained at once for dcnn_iters epochs at lrate1.
TrainResult train_dcnn(const TrainConfig& config, const ArchSpec& arch, const Dataset& train,
                       const Dataset& test, const EpochCallback& on_epoch = {});

/// Layerwise construction: the first block with a fresh head is trained at
/// lrate1; each further block replaces the head, gets a new head and is
/// trained at lrate1; the complete model is then fine-tuned at lrate2.
TrainResult train_sldcnn(const TrainConfig& config, const ArchSpec& arch, const Dataset& train,
                         const Dataset& test, const EpochCallback& on_epoch = {},
                         const StructureCallback& on_structure = {});

TrainResult train(const TrainConfig& config, const ArchSpec& arch, const Dataset& train,
                  const Dataset& test, const EpochCallback& on_epoch = {});

/// Predictions for every sample, evaluated in chunks.
std::vector<int> predict_dataset(const Model& model, const Dataset& data, std::size_t chunk = 250);

/// ConfigError unless the model's input geometry and class count fit `data`.
void check_compatible(const Model& model, const Dataset& data);

}  // namespace sldcnn

#endif  // SLDCNN_TRAINER_HPP

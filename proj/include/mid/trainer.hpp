#pragma once

#include <filesystem>
#include <memory>
#include <vector>

#include "mid/networks.hpp"
#include "mid/noise.hpp"
#include "mid/optim.hpp"

namespace mid {

struct TrainConfig {
  std::size_t epochs = 150;
  std::size_t batch_size = 8;
  AdamWConfig optim;
  NoiseProcessSpec process;
  ModelSpec model;
  std::uint64_t seed = 0;
  std::size_t eval_every = 1;

  void validate(std::size_t dataset_size) const;
  std::string canonical_string() const;
  std::uint64_t hash() const;
};

struct EpochReport {
  double loss_step = 0.0;
  double loss_noise = 0.0;
  double total() const { return loss_step + loss_noise; }
};

inline constexpr std::uint16_t kCheckpointVersion = 1;

/// Serialized training state: both networks with optimizer moments, the
/// process spec, and enough bookkeeping to resume bit-exactly.
struct Checkpoint {
  NoiseProcessSpec process;
  ModelSpec model;
  std::unique_ptr<StepPredictor> psi;
  std::unique_ptr<NoisePredictor> phi;
  std::uint64_t trained_epochs = 0;
  std::uint64_t seed = 0;
  std::uint64_t config_hash = 0;
};

Checkpoint init_checkpoint(const TrainConfig& cfg);

/// One pass over all samples; every (sample, t) pair contributes exactly one
/// loss evaluation. Trajectories are re-sampled fresh per epoch from seeds
/// derived from (config seed, epoch index), so resumed runs replay the exact
/// same batches.
EpochReport train_epoch(const std::vector<Tensor>& data, StepPredictor& psi,
                        NoisePredictor& phi, const TrainConfig& cfg,
                        std::size_t epoch_index);

struct TrainResult {
  Checkpoint checkpoint;
  std::vector<EpochReport> history;
};

TrainResult train(const std::vector<Tensor>& data, const TrainConfig& cfg);

/// Continues a run up to cfg.epochs, starting after ckpt.trained_epochs.
TrainResult train_resume(Checkpoint ckpt, const std::vector<Tensor>& data,
                         const TrainConfig& cfg);

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

std::vector<std::uint8_t> checkpoint_to_bytes(const Checkpoint& ckpt);
Checkpoint checkpoint_from_bytes(const std::vector<std::uint8_t>& bytes);

/// CSV with header epoch,loss_step,loss_noise,loss_total.
void write_history_csv(const std::filesystem::path& path,
                       const std::vector<EpochReport>& history);

}  // namespace mid

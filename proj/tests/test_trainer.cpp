#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "mid/datagen.hpp"
#include "mid/trainer.hpp"

using namespace mid;

namespace {

TrainConfig tiny_image_config() {
  TrainConfig cfg;
  cfg.epochs = 2;
  cfg.batch_size = 4;
  cfg.process = NoiseProcessSpec::gaussian(3, 0.2);
  cfg.model.kind = ModelKind::Image;
  cfg.model.mode = NoiseMode::Regression;
  cfg.model.image_h = 6;
  cfg.model.image_w = 6;
  cfg.model.psi_channels = 2;
  cfg.model.psi_hidden = 4;
  cfg.model.phi_channels = 3;
  cfg.seed = 1234;
  return cfg;
}

TrainConfig tiny_points_config() {
  TrainConfig cfg;
  cfg.epochs = 2;
  cfg.batch_size = 4;
  cfg.process = NoiseProcessSpec::outlier_points(3, 4);
  cfg.model.kind = ModelKind::Points;
  cfg.model.mode = NoiseMode::Classification;
  cfg.model.point_hidden = 6;
  cfg.model.psi_hidden = 4;
  cfg.seed = 99;
  return cfg;
}

std::vector<Tensor> tiny_images(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Tensor> out;
  for (std::size_t i = 0; i < n; ++i) {
    Rng r = rng.fork(i);
    out.push_back(gen_texture_image(6, 6, r));
  }
  return out;
}

std::vector<Tensor> tiny_scenes(std::size_t n, std::uint64_t seed) {
  SceneSpec spec;
  spec.min_points = 8;
  spec.max_points = 12;
  spec.outlier_fraction_lo = 0.0;
  spec.outlier_fraction_hi = 0.1;
  Rng rng(seed);
  std::vector<Tensor> out;
  for (std::size_t i = 0; i < n; ++i) {
    Rng r = rng.fork(i);
    out.push_back(gen_scene(spec, r).points);
  }
  return out;
}

std::vector<double> all_params_flat(Checkpoint& ckpt) {
  std::vector<double> out;
  for (Param* p : ckpt.psi->params())
    out.insert(out.end(), p->value.data.begin(), p->value.data.end());
  for (Param* p : ckpt.phi->params())
    out.insert(out.end(), p->value.data.begin(), p->value.data.end());
  return out;
}

std::filesystem::path tmp_path(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("mid_trainer_" + name);
}

}  // namespace

TEST_CASE("config validation") {
  TrainConfig cfg = tiny_image_config();
  cfg.batch_size = 0;
  CHECK_THROWS_AS(cfg.validate(4), ConfigError);
  TrainConfig cfg2 = tiny_image_config();
  CHECK_THROWS_AS(train({}, cfg2), DataError);  // empty dataset
  TrainConfig ok = tiny_image_config();
  ok.validate(4);
  CHECK(ok.hash() != 0);
  TrainConfig other = tiny_image_config();
  other.seed = 4321;
  CHECK(ok.hash() != other.hash());
}

TEST_CASE("zero epochs trains nothing but still yields a valid checkpoint") {
  TrainConfig cfg = tiny_image_config();
  cfg.epochs = 0;
  auto result = train(tiny_images(3, 1), cfg);
  CHECK(result.history.empty());
  CHECK(result.checkpoint.trained_epochs == 0);
  // same init as an untouched checkpoint
  Checkpoint fresh = init_checkpoint(cfg);
  CHECK(all_params_flat(result.checkpoint) == all_params_flat(fresh));
}

TEST_CASE("history has one entry per epoch with finite losses") {
  TrainConfig cfg = tiny_image_config();
  auto result = train(tiny_images(3, 1), cfg);
  REQUIRE(result.history.size() == cfg.epochs);
  for (const auto& ep : result.history) {
    CHECK(std::isfinite(ep.loss_step));
    CHECK(std::isfinite(ep.loss_noise));
    CHECK(ep.total() == doctest::Approx(ep.loss_step + ep.loss_noise));
  }
  CHECK(result.checkpoint.trained_epochs == cfg.epochs);
}

TEST_CASE("training is bit-deterministic in the seed") {
  TrainConfig cfg = tiny_image_config();
  auto data = tiny_images(3, 1);
  auto r1 = train(data, cfg);
  auto r2 = train(data, cfg);
  CHECK(all_params_flat(r1.checkpoint) == all_params_flat(r2.checkpoint));
  REQUIRE(r1.history.size() == r2.history.size());
  for (std::size_t i = 0; i < r1.history.size(); ++i) {
    CHECK(r1.history[i].loss_step == r2.history[i].loss_step);
    CHECK(r1.history[i].loss_noise == r2.history[i].loss_noise);
  }
  cfg.seed += 1;
  auto r3 = train(data, cfg);
  CHECK(all_params_flat(r1.checkpoint) != all_params_flat(r3.checkpoint));
}

TEST_CASE("resume from a mid-run checkpoint matches an uninterrupted run") {
  TrainConfig cfg = tiny_image_config();
  cfg.epochs = 4;
  auto data = tiny_images(3, 1);
  auto full = train(data, cfg);

  TrainConfig half = cfg;
  half.epochs = 2;
  auto first = train(data, half);
  // round trip through bytes, then continue to 4 epochs
  auto bytes = checkpoint_to_bytes(first.checkpoint);
  Checkpoint restored = checkpoint_from_bytes(bytes);
  auto resumed = train_resume(std::move(restored), data, cfg);

  CHECK(resumed.checkpoint.trained_epochs == 4);
  CHECK(all_params_flat(full.checkpoint) == all_params_flat(resumed.checkpoint));
  REQUIRE(resumed.history.size() == 2);
  CHECK(resumed.history[0].loss_step == full.history[2].loss_step);
  CHECK(resumed.history[1].loss_noise == full.history[3].loss_noise);
}

TEST_CASE("points classification training runs and is deterministic") {
  TrainConfig cfg = tiny_points_config();
  auto data = tiny_scenes(3, 5);
  auto r1 = train(data, cfg);
  auto r2 = train(data, cfg);
  REQUIRE(r1.history.size() == 2);
  for (const auto& ep : r1.history) {
    CHECK(std::isfinite(ep.loss_step));
    CHECK(std::isfinite(ep.loss_noise));
  }
  CHECK(all_params_flat(r1.checkpoint) == all_params_flat(r2.checkpoint));
}

TEST_CASE("checkpoint file round trip preserves everything") {
  TrainConfig cfg = tiny_image_config();
  auto result = train(tiny_images(2, 2), cfg);
  const auto p = tmp_path("roundtrip.midc");
  save_checkpoint(result.checkpoint, p);
  Checkpoint back = load_checkpoint(p);
  CHECK(back.trained_epochs == result.checkpoint.trained_epochs);
  CHECK(back.seed == result.checkpoint.seed);
  CHECK(back.config_hash == result.checkpoint.config_hash);
  CHECK(back.process.kind == result.checkpoint.process.kind);
  CHECK(back.model.kind == result.checkpoint.model.kind);
  CHECK(all_params_flat(back) == all_params_flat(result.checkpoint));
  // optimizer moments survive too
  auto pa = result.checkpoint.psi->params();
  auto pb = back.psi->params();
  REQUIRE(pa.size() == pb.size());
  for (std::size_t i = 0; i < pa.size(); ++i) {
    CHECK(pa[i]->adam_m.data == pb[i]->adam_m.data);
    CHECK(pa[i]->adam_v.data == pb[i]->adam_v.data);
    CHECK(pa[i]->step_count == pb[i]->step_count);
  }
}

TEST_CASE("checkpoint loader rejects tampering") {
  TrainConfig cfg = tiny_image_config();
  Checkpoint ckpt = init_checkpoint(cfg);
  auto bytes = checkpoint_to_bytes(ckpt);

  auto bad_magic = bytes;
  bad_magic[0] = 'X';
  CHECK_THROWS_WITH_AS(checkpoint_from_bytes(bad_magic), doctest::Contains("magic"),
                       DataError);

  auto bad_version = bytes;
  bad_version[4] = static_cast<std::uint8_t>(kCheckpointVersion + 1);
  CHECK_THROWS_WITH_AS(checkpoint_from_bytes(bad_version), doctest::Contains("version"),
                       DataError);

  auto truncated = bytes;
  truncated.resize(truncated.size() - 9);
  CHECK_THROWS_AS(checkpoint_from_bytes(truncated), DataError);

  auto flipped = bytes;
  flipped[bytes.size() / 2] ^= 0x40;  // payload corruption -> checksum failure
  CHECK_THROWS_AS(checkpoint_from_bytes(flipped), DataError);

  auto trailing = bytes;
  trailing.push_back(0);
  CHECK_THROWS_AS(checkpoint_from_bytes(trailing), DataError);
}

TEST_CASE("history CSV has the documented dialect") {
  std::vector<EpochReport> hist{{0.5, 1.5}, {0.25, 0.75}};
  const auto p = tmp_path("history.csv");
  write_history_csv(p, hist);
  std::ifstream f(p);
  std::string line;
  std::getline(f, line);
  CHECK(line == "epoch,loss_step,loss_noise,loss_total");
  std::getline(f, line);
  CHECK(line.substr(0, 2) == "1,");
  std::getline(f, line);
  CHECK(line.substr(0, 2) == "2,");
}

TEST_CASE("losses trend down over a slightly longer run") {
  TrainConfig cfg = tiny_image_config();
  cfg.epochs = 12;
  cfg.optim.lr = 3e-3;
  auto result = train(tiny_images(4, 3), cfg);
  double first = 0.0, last = 0.0;
  for (std::size_t i = 0; i < 3; ++i) {
    first += result.history[i].total();
    last += result.history[result.history.size() - 1 - i].total();
  }
  CHECK(last < first);
}

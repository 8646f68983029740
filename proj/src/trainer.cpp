#include "mid/trainer.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "mid/io.hpp"

namespace mid {

void TrainConfig::validate(std::size_t dataset_size) const {
  if (epochs > 1000000) throw ConfigError("train: epochs unreasonably large");
  if (batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
  // dataset_size == 0 means "not known yet" (e.g. checkpoint init)
  if (dataset_size > 0 && batch_size > dataset_size * process.total_steps)
    throw ConfigError("train: batch_size exceeds (sample, step) pair count");
  process.validate();
  model.validate();
}

std::string TrainConfig::canonical_string() const {
  std::ostringstream os;
  os.precision(17);
  os << "epochs=" << epochs << ";batch=" << batch_size << ";lr=" << optim.lr
     << ";b1=" << optim.beta1 << ";b2=" << optim.beta2 << ";eps=" << optim.eps
     << ";wd=" << optim.weight_decay << ";seed=" << seed
     << ";process=" << noise_kind_name(process.kind) << "," << process.total_steps;
  for (double m : process.per_step_magnitude) os << "," << m;
  os << ";bounds=" << process.bounds[0] << "," << process.bounds[1] << ","
     << process.bounds[2] << "," << process.bounds[3]
     << ";model=" << model_kind_name(model.kind) << "," << noise_mode_name(model.mode) << ","
     << model.image_h << "x" << model.image_w << "," << model.psi_channels << ","
     << model.psi_hidden << "," << model.phi_channels << "," << model.point_hidden;
  return os.str();
}

std::uint64_t TrainConfig::hash() const { return fnv1a64(canonical_string()); }

Checkpoint init_checkpoint(const TrainConfig& cfg) {
  cfg.validate(0);
  Checkpoint ckpt;
  ckpt.process = cfg.process;
  ckpt.model = cfg.model;
  ckpt.seed = cfg.seed;
  ckpt.config_hash = cfg.hash();
  Rng init(mix_seed(cfg.seed, 0x1517));
  Rng psi_rng = init.fork(1);
  Rng phi_rng = init.fork(2);
  ckpt.psi = std::make_unique<StepPredictor>(cfg.model, psi_rng);
  ckpt.phi = std::make_unique<NoisePredictor>(cfg.model, phi_rng);
  return ckpt;
}

namespace {

struct Example {
  std::size_t sample = 0;
  std::size_t t = 0;
  Tensor state;
  Tensor target;
};

// Materializes the full epoch worth of (sample, t) pairs.
std::vector<Example> build_examples(const std::vector<Tensor>& data, const TrainConfig& cfg,
                                    std::size_t epoch_index) {
  const std::size_t steps = cfg.process.total_steps;
  const bool classify = cfg.model.mode == NoiseMode::Classification;
  std::vector<Example> out;
  out.reserve(data.size() * steps);
  for (std::size_t i = 0; i < data.size(); ++i) {
    Rng traj_rng(mix_seed(mix_seed(cfg.seed, 0xE70C + epoch_index), i));
    Tensor s = data[i];
    const std::size_t base_n = s.rank() == 2 ? s.shape[0] : 0;
    for (std::size_t t = 1; t <= steps; ++t) {
      TrajectorySample ts = noise_step(s, t, cfg.process, traj_rng);
      Example ex;
      ex.sample = i;
      ex.t = t;
      ex.state = ts.s_t;
      if (classify) {
        // label 1 iff the point was injected at any step of this trajectory;
        // injected points are always appended, so the first base_n stay 0.
        Tensor labels({ts.s_t.shape[0]});
        for (std::size_t p = base_n; p < ts.s_t.shape[0]; ++p) labels.data[p] = 1.0;
        ex.target = std::move(labels);
      } else {
        ex.target = ts.eps_eff;
      }
      s = std::move(ts.s_t);
      out.push_back(std::move(ex));
    }
  }
  return out;
}

}  // namespace

EpochReport train_epoch(const std::vector<Tensor>& data, StepPredictor& psi,
                        NoisePredictor& phi, const TrainConfig& cfg,
                        std::size_t epoch_index) {
  cfg.validate(data.size());
  if (data.empty()) throw ConfigError("train_epoch: empty dataset");

  std::vector<Example> examples = build_examples(data, cfg, epoch_index);
  Rng shuffle_rng(mix_seed(cfg.seed, 0x5C0F + epoch_index));
  for (std::size_t i = examples.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(
        shuffle_rng.uniform_int(0, static_cast<std::int64_t>(i) - 1));
    std::swap(examples[i - 1], examples[j]);
  }

  auto psi_params = psi.params();
  auto phi_params = phi.params();
  const std::size_t steps = cfg.process.total_steps;
  const bool classify = cfg.model.mode == NoiseMode::Classification;

  EpochReport report;
  std::size_t offset = 0;
  while (offset < examples.size()) {
    const std::size_t batch = std::min(cfg.batch_size, examples.size() - offset);
    const double inv_batch = 1.0 / static_cast<double>(batch);
    for (std::size_t b = 0; b < batch; ++b) {
      const Example& ex = examples[offset + b];
      const double t_hat = psi.forward(ex.state);
      const double l_step = loss_step(ex.t, steps, t_hat);
      Tensor pred = phi.forward(ex.state, ex.t, steps);
      const double l_noise = classify ? loss_noise_bce(ex.target, pred)
                                      : loss_noise_mse(ex.target, pred);
      if (!std::isfinite(l_step) || !std::isfinite(l_noise))
        throw NumericError("train_epoch: non-finite loss at sample " +
                           std::to_string(ex.sample) + ", step " + std::to_string(ex.t));
      psi.backward(loss_step_grad(ex.t, steps, t_hat) * inv_batch);
      Tensor g = classify ? loss_noise_bce_grad(ex.target, pred)
                          : loss_noise_mse_grad(ex.target, pred);
      g *= inv_batch;
      phi.backward(g);
      report.loss_step += l_step;
      report.loss_noise += l_noise;
    }
    adamw_step(psi_params, cfg.optim);
    adamw_step(phi_params, cfg.optim);
    offset += batch;
  }
  report.loss_step /= static_cast<double>(examples.size());
  report.loss_noise /= static_cast<double>(examples.size());
  return report;
}

TrainResult train(const std::vector<Tensor>& data, const TrainConfig& cfg) {
  return train_resume(init_checkpoint(cfg), data, cfg);
}

TrainResult train_resume(Checkpoint ckpt, const std::vector<Tensor>& data,
                         const TrainConfig& cfg) {
  if (data.empty()) throw DataError("train: empty dataset");
  cfg.validate(data.size());
  // The checkpoint describes the run it came from; once resumed it belongs to
  // this config.
  ckpt.config_hash = cfg.hash();
  ckpt.seed = cfg.seed;
  TrainResult result;
  for (std::size_t e = ckpt.trained_epochs; e < cfg.epochs; ++e) {
    result.history.push_back(train_epoch(data, *ckpt.psi, *ckpt.phi, cfg, e));
    ckpt.trained_epochs = e + 1;
  }
  result.checkpoint = std::move(ckpt);
  return result;
}

namespace {

template <typename T>
void put(std::vector<std::uint8_t>& out, T v) {
  for (std::size_t i = 0; i < sizeof(T); ++i)
    out.push_back(static_cast<std::uint8_t>((static_cast<std::uint64_t>(v) >> (8 * i)) & 0xff));
}

template <typename T>
T get(const std::uint8_t* p) {
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i)
    v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  return static_cast<T>(v);
}

void put_string(std::vector<std::uint8_t>& out, const std::string& s) {
  put<std::uint16_t>(out, static_cast<std::uint16_t>(s.size()));
  out.insert(out.end(), s.begin(), s.end());
}

void put_model_spec(std::vector<std::uint8_t>& out, const ModelSpec& m) {
  put<std::uint16_t>(out, static_cast<std::uint16_t>(m.kind));
  put<std::uint16_t>(out, static_cast<std::uint16_t>(m.mode));
  put<std::uint64_t>(out, m.image_h);
  put<std::uint64_t>(out, m.image_w);
  put<std::uint64_t>(out, m.psi_channels);
  put<std::uint64_t>(out, m.psi_hidden);
  put<std::uint64_t>(out, m.phi_channels);
  put<std::uint64_t>(out, m.point_hidden);
}

void put_params(std::vector<std::uint8_t>& out, std::vector<Param*> params) {
  put<std::uint64_t>(out, params.size());
  for (const Param* p : params) {
    put_string(out, p->name);
    put<std::uint64_t>(out, p->step_count);
    for (const Tensor* t : {&p->value, &p->adam_m, &p->adam_v}) {
      auto blob = tensor_to_bytes(*t);
      out.insert(out.end(), blob.begin(), blob.end());
    }
  }
}

struct Reader {
  const std::uint8_t* p;
  std::size_t size;
  std::size_t off = 0;

  void need(std::size_t n) const {
    if (off + n > size) throw DataError("checkpoint: truncated file");
  }
  template <typename T>
  T read() {
    need(sizeof(T));
    T v = get<T>(p + off);
    off += sizeof(T);
    return v;
  }
  std::string read_string() {
    const auto n = read<std::uint16_t>();
    need(n);
    std::string s(reinterpret_cast<const char*>(p + off), n);
    off += n;
    return s;
  }
  Tensor read_tensor_blob() {
    std::size_t used = 0;
    Tensor t = tensor_from_bytes(p + off, size - off, &used);
    off += used;
    return t;
  }
};

ModelSpec read_model_spec(Reader& r) {
  ModelSpec m;
  m.kind = static_cast<ModelKind>(r.read<std::uint16_t>());
  m.mode = static_cast<NoiseMode>(r.read<std::uint16_t>());
  m.image_h = r.read<std::uint64_t>();
  m.image_w = r.read<std::uint64_t>();
  m.psi_channels = r.read<std::uint64_t>();
  m.psi_hidden = r.read<std::uint64_t>();
  m.phi_channels = r.read<std::uint64_t>();
  m.point_hidden = r.read<std::uint64_t>();
  return m;
}

void read_params(Reader& r, std::vector<Param*> params) {
  const auto count = r.read<std::uint64_t>();
  if (count != params.size())
    throw DataError("checkpoint: parameter count mismatch (file " + std::to_string(count) +
                    ", model " + std::to_string(params.size()) + ")");
  for (Param* p : params) {
    const std::string name = r.read_string();
    if (name != p->name)
      throw DataError("checkpoint: parameter name mismatch (file '" + name + "', model '" +
                      p->name + "')");
    p->step_count = r.read<std::uint64_t>();
    Tensor value = r.read_tensor_blob();
    Tensor m = r.read_tensor_blob();
    Tensor v = r.read_tensor_blob();
    if (!value.same_shape(p->value))
      throw DataError("checkpoint: tensor shape mismatch for '" + name + "'");
    p->value = std::move(value);
    p->adam_m = std::move(m);
    p->adam_v = std::move(v);
    p->zero_grad();
  }
}

}  // namespace

std::vector<std::uint8_t> checkpoint_to_bytes(const Checkpoint& ckpt) {
  std::vector<std::uint8_t> out;
  out.push_back('M');
  out.push_back('I');
  out.push_back('D');
  out.push_back('C');
  put<std::uint16_t>(out, kCheckpointVersion);
  const std::size_t payload_start = out.size();
  put<std::uint64_t>(out, ckpt.config_hash);
  put<std::uint64_t>(out, ckpt.seed);
  put<std::uint64_t>(out, ckpt.trained_epochs);
  spec_to_bytes(ckpt.process, out);
  put_model_spec(out, ckpt.model);
  put_params(out, const_cast<StepPredictor&>(*ckpt.psi).params());
  put_params(out, const_cast<NoisePredictor&>(*ckpt.phi).params());
  const std::uint64_t checksum =
      fnv1a64(out.data() + payload_start, out.size() - payload_start);
  put<std::uint64_t>(out, checksum);
  return out;
}

Checkpoint checkpoint_from_bytes(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 14 || std::memcmp(bytes.data(), "MIDC", 4) != 0)
    throw DataError("checkpoint: bad magic (expected MIDC)");
  const auto version = get<std::uint16_t>(bytes.data() + 4);
  if (version > kCheckpointVersion)
    throw DataError("checkpoint: unsupported format version " + std::to_string(version));
  const std::size_t payload_start = 6;
  const std::size_t payload_end = bytes.size() - 8;
  const std::uint64_t stored = get<std::uint64_t>(bytes.data() + payload_end);
  const std::uint64_t computed =
      fnv1a64(bytes.data() + payload_start, payload_end - payload_start);
  if (stored != computed)
    throw DataError("checkpoint: integrity failure (checksum mismatch)");

  Reader r{bytes.data(), payload_end, payload_start};
  Checkpoint ckpt;
  ckpt.config_hash = r.read<std::uint64_t>();
  ckpt.seed = r.read<std::uint64_t>();
  ckpt.trained_epochs = r.read<std::uint64_t>();
  std::size_t used = 0;
  ckpt.process = spec_from_bytes(r.p + r.off, r.size - r.off, &used);
  r.off += used;
  ckpt.model = read_model_spec(r);
  Rng dummy(0);
  ckpt.psi = std::make_unique<StepPredictor>(ckpt.model, dummy);
  ckpt.phi = std::make_unique<NoisePredictor>(ckpt.model, dummy);
  read_params(r, ckpt.psi->params());
  read_params(r, ckpt.phi->params());
  if (r.off != r.size) throw DataError("checkpoint: trailing bytes in payload");
  return ckpt;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  auto bytes = checkpoint_to_bytes(ckpt);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw DataError("cannot open for writing: " + path.string());
  f.write(reinterpret_cast<const char*>(bytes.data()),
          static_cast<std::streamsize>(bytes.size()));
  if (!f) throw DataError("write failed: " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open: " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                                  std::istreambuf_iterator<char>());
  return checkpoint_from_bytes(bytes);
}

void write_history_csv(const std::filesystem::path& path,
                       const std::vector<EpochReport>& history) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw DataError("cannot open for writing: " + path.string());
  f << "epoch,loss_step,loss_noise,loss_total\n";
  f.precision(17);
  for (std::size_t i = 0; i < history.size(); ++i)
    f << (i + 1) << "," << history[i].loss_step << "," << history[i].loss_noise << ","
      << history[i].total() << "\n";
}

}  // namespace mid

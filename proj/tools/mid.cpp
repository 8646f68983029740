// mid: experiment harness for the iterative denoising framework.
//
// Subcommands: synth, train, denoise, eval, ablate.
// Exit codes: 0 success, 2 config error, 3 data error, 4 numeric failure.

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "mid/config.hpp"
#include "mid/datagen.hpp"
#include "mid/denoiser.hpp"
#include "mid/io.hpp"
#include "mid/metrics.hpp"
#include "mid/trainer.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace mid;

namespace {

// ---------------------------------------------------------------------------
// shared plumbing

std::size_t worker_count() {
  std::size_t n = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("MID_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end == env || *end != '\0' || v < 1)
      throw ConfigError("MID_THREADS must be a positive integer, got '" +
                        std::string(env) + "'");
    n = std::min<std::size_t>(n, static_cast<std::size_t>(v));
  }
  return n;
}

// Deterministic parallel map: item i always uses its own derived seed, so the
// schedule never affects the output.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& fn) {
  const std::size_t workers = std::min(worker_count(), std::max<std::size_t>(count, 1));
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = next.fetch_add(1); i < count; i = next.fetch_add(1)) fn(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

const std::map<std::string, std::vector<std::string>>& config_schema() {
  static const std::map<std::string, std::vector<std::string>> schema{
      {"process",
       {"kind", "steps", "sigma_total", "sigma_step", "photon_scale", "points_per_step",
        "snr_decrement_db", "start_snr_db", "template_file"}},
      {"model",
       {"kind", "mode", "image_h", "image_w", "psi_channels", "psi_hidden", "phi_channels",
        "point_hidden"}},
      {"train",
       {"epochs", "batch_size", "lr", "beta1", "beta2", "adam_eps", "weight_decay",
        "eval_every", "seed"}},
      {"scene",
       {"n_lines", "min_points", "max_points", "noise_std_lo", "noise_std_hi",
        "outlier_fraction_lo", "outlier_fraction_hi"}},
      {"signal",
       {"sample_rate", "duration_s", "band_lo_hz", "band_hi_hz", "ecg_rate_hz",
        "ecg_rate_jitter", "ecg_amp_jitter"}},
      {"synth", {"kind", "count", "image_w", "image_h"}},
      {"eval", {"max_value"}},
      {"ablate", {"train_count", "eval_count"}},
  };
  return schema;
}

Config load_config(const std::string& path) {
  if (path.empty()) throw ConfigError("--config is required for this subcommand");
  Config cfg = Config::parse_file(path);
  cfg.validate_schema(config_schema());
  return cfg;
}

std::string hash_hex(std::uint64_t h) {
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw DataError("cannot open for writing: " + path.string());
  f << j.dump(2) << "\n";
}

json read_json(const fs::path& path) {
  std::ifstream f(path);
  if (!f) throw DataError("cannot open: " + path.string());
  try {
    return json::parse(f);
  } catch (const json::parse_error& e) {
    throw DataError("malformed JSON in " + path.string() + ": " + e.what());
  }
}

void ensure_out_dir(const fs::path& dir) {
  if (dir.empty()) throw ConfigError("--out is required for this subcommand");
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir))
    throw DataError("cannot create output directory: " + dir.string());
}

double l2_norm(const Tensor& t) {
  double s = 0.0;
  for (double v : t.data) s += v * v;
  return std::sqrt(s);
}

// ---------------------------------------------------------------------------
// synth

int cmd_synth(const std::string& config_path, std::uint64_t seed, const fs::path& out) {
  Config cfg = load_config(config_path);
  ensure_out_dir(out);

  const std::string kind = cfg.get_or("synth", "kind", "images");
  const std::size_t count = cfg.get_size("synth", "count", 16);
  const std::uint64_t config_hash = cfg.hash();

  json items = json::array();
  items.get_ref<json::array_t&>().resize(count);

  if (kind == "images") {
    const std::size_t w = cfg.get_size("synth", "image_w", 16);
    const std::size_t h = cfg.get_size("synth", "image_h", 16);
    parallel_for(count, [&](std::size_t i) {
      const std::uint64_t item_seed = mix_seed(seed, 0xA11D + i);
      Rng rng(item_seed);
      Tensor img = gen_texture_image(w, h, rng);
      char name[32];
      std::snprintf(name, sizeof name, "img_%04zu", i);
      write_tensor(out / (std::string(name) + ".midt"), img);
      write_pgm(out / (std::string(name) + ".pgm"), img);
      items[i] = {{"seed", item_seed},
                  {"files", {{"image", std::string(name) + ".midt"},
                             {"preview", std::string(name) + ".pgm"}}}};
    });
  } else if (kind == "scenes") {
    const SceneSpec spec = scene_spec_from_config(cfg);
    parallel_for(count, [&](std::size_t i) {
      const std::uint64_t item_seed = mix_seed(seed, 0x5CE9 + i);
      Rng rng(item_seed);
      Scene sc = gen_scene(spec, rng);
      char name[32];
      std::snprintf(name, sizeof name, "scene_%04zu.csv", i);
      write_points_csv(out / name, sc.points, sc.labels);
      items[i] = {{"seed", item_seed}, {"files", {{"points", name}}}};
    });
  } else if (kind == "signals") {
    const SignalSpec spec = signal_spec_from_config(cfg);
    parallel_for(count, [&](std::size_t i) {
      const std::uint64_t item_seed = mix_seed(seed, 0x5194 + i);
      Rng rng(item_seed);
      SignalPair pair = gen_signal_pair(spec, rng);
      char semg[32], ecg[32];
      std::snprintf(semg, sizeof semg, "sig_%04zu_semg.midt", i);
      std::snprintf(ecg, sizeof ecg, "sig_%04zu_ecg.midt", i);
      write_tensor(out / semg, pair.semg);
      write_tensor(out / ecg, pair.ecg);
      items[i] = {{"seed", item_seed},
                  {"files", {{"semg", std::string(semg)}, {"ecg", std::string(ecg)}}}};
    });
  } else {
    throw ConfigError("config: [synth] kind = '" + kind +
                      "' (accepted: images, scenes, signals)");
  }

  json manifest{{"kind", kind},
                {"count", count},
                {"seed", seed},
                {"config_hash", hash_hex(config_hash)},
                {"items", items}};
  manifest["manifest_hash"] = hash_hex(fnv1a64(manifest.dump()));
  write_json(out / "manifest.json", manifest);
  std::cout << "synth: wrote " << count << " " << kind << " to " << out.string()
            << " (manifest " << manifest["manifest_hash"].get<std::string>() << ")\n";
  return 0;
}

// ---------------------------------------------------------------------------
// train

std::vector<Tensor> load_manifest_data(const fs::path& data_dir, std::string* kind_out) {
  const fs::path manifest_path = data_dir / "manifest.json";
  if (!fs::exists(manifest_path))
    throw DataError("missing manifest: " + manifest_path.string());
  const json manifest = read_json(manifest_path);
  const std::string kind = manifest.value("kind", "");
  if (kind_out) *kind_out = kind;
  std::vector<Tensor> data;
  for (const auto& item : manifest.at("items")) {
    const auto& files = item.at("files");
    if (kind == "images") {
      data.push_back(read_tensor(data_dir / files.at("image").get<std::string>()));
    } else if (kind == "scenes") {
      data.push_back(
          read_points_csv(data_dir / files.at("points").get<std::string>()).points);
    } else {
      throw DataError("train: manifest kind '" + kind +
                      "' is not trainable (expected images or scenes)");
    }
  }
  return data;
}

void check_data_compatible(const TrainConfig& cfg, const std::vector<Tensor>& data) {
  for (const Tensor& t : data) {
    if (cfg.model.kind == ModelKind::Image) {
      if (t.rank() != 3 || t.shape[0] != 1 || t.shape[1] != cfg.model.image_h ||
          t.shape[2] != cfg.model.image_w)
        throw ConfigError("train: image sample shape " + shape_to_string(t.shape) +
                          " does not match model [1," + std::to_string(cfg.model.image_h) +
                          "," + std::to_string(cfg.model.image_w) + "]");
    } else {
      if (t.rank() != 2 || t.shape[1] != 2)
        throw ConfigError("train: point sample shape " + shape_to_string(t.shape) +
                          " does not match model [N,2]");
    }
  }
}

int cmd_train(const std::string& config_path, const fs::path& data_dir,
              std::uint64_t seed, bool has_seed, const fs::path& out) {
  Config cfg = load_config(config_path);
  ensure_out_dir(out);
  TrainConfig tc = train_config_from_config(cfg, seed, has_seed);

  std::vector<Tensor> data = load_manifest_data(data_dir, nullptr);
  check_data_compatible(tc, data);

  TrainResult result = train(data, tc);
  for (std::size_t e = 0; e < result.history.size(); ++e) {
    std::cout << "epoch " << (e + 1) << "/" << tc.epochs
              << " loss_step=" << result.history[e].loss_step
              << " loss_noise=" << result.history[e].loss_noise
              << " loss_total=" << result.history[e].total() << "\n";
  }
  save_checkpoint(result.checkpoint, out / "checkpoint.midc");
  write_history_csv(out / "history.csv", result.history);
  std::cout << "train: wrote " << (out / "checkpoint.midc").string() << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// denoise

int cmd_denoise(const fs::path& ckpt_path, const fs::path& input_path,
                const std::string& mode, const fs::path& out) {
  if (mode != "iterative" && mode != "oneshot")
    throw ConfigError("--mode must be iterative or oneshot, got '" + mode + "'");
  ensure_out_dir(out);
  Checkpoint ckpt = load_checkpoint(ckpt_path);

  json sidecar{{"mode", mode},
               {"checkpoint_config_hash", hash_hex(ckpt.config_hash)},
               {"input", input_path.string()}};

  if (input_path.extension() == ".csv") {
    PointsCsv in = read_points_csv(input_path);
    PointPartition part = mode == "iterative" ? denoise_points(ckpt, in.points)
                                              : denoise_points_oneshot(ckpt, in.points);
    std::vector<int> kept_labels, removed_labels;
    for (std::size_t i : part.kept_idx) kept_labels.push_back(in.labels[i]);
    for (std::size_t i : part.removed_idx) removed_labels.push_back(in.labels[i]);
    write_points_csv(out / "kept.csv", part.kept, kept_labels);
    write_points_csv(out / "removed.csv", part.removed, removed_labels);
    sidecar["t_hat"] = part.t_hat;
    sidecar["kept"] = part.kept_idx.size();
    sidecar["removed"] = part.removed_idx.size();
  } else {
    Tensor input = read_tensor(input_path);
    DenoiseResult res =
        mode == "iterative" ? denoise(ckpt, input) : denoise_oneshot(ckpt, input);
    write_tensor(out / "denoised.midt", res.output);
    if (res.output.rank() == 3 && res.output.shape[0] == 1)
      write_pgm(out / "denoised.pgm", res.output);

    const fs::path trace_dir = out / "trace";
    ensure_out_dir(trace_dir);
    json residuals = json::array();
    const Tensor* prev = &input;
    for (std::size_t i = 0; i < res.trace.size(); ++i) {
      char name[32];
      std::snprintf(name, sizeof name, "step_%03zu.midt", i + 1);
      write_tensor(trace_dir / name, res.trace[i]);
      residuals.push_back(l2_norm(res.trace[i] - *prev));
      prev = &res.trace[i];
    }
    sidecar["t_hat"] = res.t_hat;
    sidecar["residual_norms"] = residuals;
  }
  write_json(out / "denoise.json", sidecar);
  std::cout << "denoise: t_hat=" << sidecar["t_hat"].get<std::size_t>() << " mode=" << mode
            << " -> " << out.string() << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// eval

struct MetricRow {
  std::map<std::string, double> values;
};

std::vector<std::string> parse_metric_list(const std::string& list) {
  static const std::vector<std::string> known{"psnr", "ssim", "rmse",  "mse",
                                             "snr",  "cnr",  "snr_imp"};
  std::vector<std::string> out;
  std::string cur;
  std::istringstream ss(list);
  while (std::getline(ss, cur, ',')) {
    if (cur.empty()) continue;
    if (std::find(known.begin(), known.end(), cur) == known.end()) {
      std::string accepted;
      for (const auto& k : known) accepted += (accepted.empty() ? "" : ", ") + k;
      throw ConfigError("unknown metric '" + cur + "' (accepted: " + accepted + ")");
    }
    out.push_back(cur);
  }
  if (out.empty()) throw ConfigError("--metrics list is empty");
  return out;
}

int cmd_eval(const fs::path& manifest_path, const std::string& metric_list,
             const std::string& config_path, const fs::path& out) {
  double max_value = 1.0;
  if (!config_path.empty()) max_value = load_config(config_path).get_double("eval", "max_value", 1.0);
  const std::vector<std::string> metrics = parse_metric_list(metric_list);
  ensure_out_dir(out);

  const json manifest = read_json(manifest_path);
  const json& pairs = manifest.at("pairs");
  const fs::path base = manifest_path.parent_path();

  auto resolve = [&](const json& entry, const char* key) {
    if (!entry.contains(key))
      throw DataError("eval manifest entry missing '" + std::string(key) + "'");
    fs::path p = entry.at(key).get<std::string>();
    return p.is_absolute() ? p : base / p;
  };

  std::vector<MetricRow> rows(pairs.size());
  parallel_for(pairs.size(), [&](std::size_t i) {
    const json& entry = pairs[i];
    MetricRow row;
    Tensor clean, test;
    const bool has_pair = entry.contains("clean") && entry.contains("test");
    if (has_pair) {
      clean = read_tensor(resolve(entry, "clean"));
      test = read_tensor(resolve(entry, "test"));
    }
    for (const std::string& m : metrics) {
      if (m == "psnr") row.values[m] = psnr(clean, test, max_value);
      else if (m == "ssim") row.values[m] = ssim(clean, test, max_value);
      else if (m == "rmse") row.values[m] = rmse(clean, test);
      else if (m == "mse") row.values[m] = mse(clean, test);
      else if (m == "snr" || m == "cnr") {
        SnrCnr sc = snr_cnr(read_tensor(resolve(entry, "noisy")),
                            read_tensor(resolve(entry, "denoised")));
        row.values[m] = m == "snr" ? sc.snr_db : sc.cnr;
      } else if (m == "snr_imp") {
        row.values[m] = snr_improvement(read_tensor(resolve(entry, "noisy")),
                                        read_tensor(resolve(entry, "denoised")),
                                        read_tensor(resolve(entry, "noise")));
      }
    }
    rows[i] = std::move(row);
  });

  // CSV: one row per pair
  std::ofstream csv(out / "metrics.csv", std::ios::trunc);
  if (!csv) throw DataError("cannot open for writing: " + (out / "metrics.csv").string());
  csv.precision(17);
  csv << "index";
  for (const auto& m : metrics) csv << "," << m;
  csv << "\n";
  for (std::size_t i = 0; i < rows.size(); ++i) {
    csv << i;
    for (const auto& m : metrics) csv << "," << rows[i].values.at(m);
    csv << "\n";
  }

  // JSON summary: mean/std over finite entries
  json summary{{"count", rows.size()}, {"metrics", json::object()}};
  for (const auto& m : metrics) {
    double sum = 0.0, sum2 = 0.0;
    std::size_t finite = 0;
    for (const auto& row : rows) {
      const double v = row.values.at(m);
      if (std::isfinite(v)) {
        sum += v;
        sum2 += v * v;
        ++finite;
      }
    }
    json entry{{"finite_count", finite}};
    if (finite > 0) {
      const double mean = sum / static_cast<double>(finite);
      entry["mean"] = mean;
      entry["std"] = std::sqrt(std::max(0.0, sum2 / static_cast<double>(finite) - mean * mean));
    } else {
      entry["mean"] = "inf";
      entry["std"] = "inf";
    }
    summary["metrics"][m] = entry;
  }
  write_json(out / "summary.json", summary);
  std::cout << "eval: " << rows.size() << " pairs -> " << out.string() << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// ablate

int cmd_ablate(const std::string& config_path, const std::string& ckpt_path,
               std::uint64_t seed, bool has_seed, const fs::path& out) {
  Config cfg = load_config(config_path);
  ensure_out_dir(out);
  TrainConfig tc = train_config_from_config(cfg, seed, has_seed);
  if (tc.model.kind != ModelKind::Image)
    throw ConfigError("ablate: only image-mode checkpoints are supported");

  const std::size_t train_count = cfg.get_size("ablate", "train_count", 32);
  const std::size_t eval_count = cfg.get_size("ablate", "eval_count", 16);

  Checkpoint ckpt;
  if (!ckpt_path.empty()) {
    ckpt = load_checkpoint(ckpt_path);
  } else {
    std::vector<Tensor> data(train_count);
    parallel_for(train_count, [&](std::size_t i) {
      Rng rng(mix_seed(tc.seed, 0xAB7A + i));
      data[i] = gen_texture_image(tc.model.image_w, tc.model.image_h, rng);
    });
    std::cout << "ablate: training on " << train_count << " images...\n";
    ckpt = std::move(train(data, tc).checkpoint);
  }

  struct Row {
    double psnr_iter, psnr_oneshot;
  };
  std::vector<Row> rows(eval_count);
  for (std::size_t i = 0; i < eval_count; ++i) {
    Rng rng(mix_seed(tc.seed, 0xE7A1 + i));
    Tensor clean = gen_texture_image(tc.model.image_w, tc.model.image_h, rng);
    Tensor noisy = noise_to(clean, ckpt.process.total_steps, ckpt.process, rng);
    Tensor iter = denoise(ckpt, noisy).output;
    Tensor one = denoise_oneshot(ckpt, noisy).output;
    rows[i] = {psnr(clean, iter, 1.0), psnr(clean, one, 1.0)};
  }

  std::ofstream csv(out / "ablation.csv", std::ios::trunc);
  if (!csv) throw DataError("cannot open for writing: " + (out / "ablation.csv").string());
  csv.precision(17);
  csv << "index,psnr_iter,psnr_oneshot,delta\n";
  double mean_delta = 0.0;
  std::size_t positive = 0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const double delta = rows[i].psnr_iter - rows[i].psnr_oneshot;
    csv << i << "," << rows[i].psnr_iter << "," << rows[i].psnr_oneshot << "," << delta
        << "\n";
    mean_delta += delta / static_cast<double>(rows.size());
    if (delta > 0.0) ++positive;
  }
  json summary{{"count", rows.size()},
               {"mean_delta_db", mean_delta},
               {"positive_rows", positive},
               {"config_hash", hash_hex(tc.hash())}};
  write_json(out / "ablation.json", summary);
  std::cout << "ablate: mean PSNR delta (iterative - oneshot) = " << mean_delta << " dB ("
            << positive << "/" << rows.size() << " positive)\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"iterative denoising experiment harness"};
  app.require_subcommand(1);

  std::string config_path, mode = "iterative", metric_list = "psnr,ssim,rmse";
  std::string data_dir, ckpt_path, input_path, manifest_path;
  std::string out_dir;
  std::uint64_t seed = 0;

  auto add_common = [&](CLI::App* sub, bool needs_config) {
    auto* copt = sub->add_option("--config", config_path, "config file (INI-style)");
    if (needs_config) copt->required();
    sub->add_option("--seed", seed, "seed override");
    sub->add_option("--out", out_dir, "output directory")->required();
  };

  auto* synth = app.add_subcommand("synth", "generate a synthetic corpus");
  add_common(synth, true);

  auto* train_cmd = app.add_subcommand("train", "train from a synth manifest");
  train_cmd->add_option("data", data_dir, "directory containing manifest.json")->required();
  add_common(train_cmd, true);

  auto* denoise_cmd = app.add_subcommand("denoise", "denoise one input with a checkpoint");
  denoise_cmd->add_option("checkpoint", ckpt_path, "trained checkpoint (.midc)")->required();
  denoise_cmd->add_option("input", input_path, "input tensor (.midt) or point CSV")
      ->required();
  denoise_cmd->add_option("--mode", mode, "iterative|oneshot");
  add_common(denoise_cmd, false);

  auto* eval_cmd = app.add_subcommand("eval", "compute metrics over a pairs manifest");
  eval_cmd->add_option("manifest", manifest_path, "JSON pairs manifest")->required();
  eval_cmd->add_option("--metrics", metric_list, "comma-separated metric list");
  add_common(eval_cmd, false);

  auto* ablate_cmd = app.add_subcommand("ablate", "iterative vs one-shot comparison");
  ablate_cmd->add_option("checkpoint", ckpt_path, "optional pre-trained checkpoint");
  add_common(ablate_cmd, true);

  try {
    app.parse(argc, argv);
    const bool has_seed = app.get_subcommand()->count("--seed") > 0;
    if (synth->parsed()) return cmd_synth(config_path, seed, out_dir);
    if (train_cmd->parsed()) return cmd_train(config_path, data_dir, seed, has_seed, out_dir);
    if (denoise_cmd->parsed()) return cmd_denoise(ckpt_path, input_path, mode, out_dir);
    if (eval_cmd->parsed()) return cmd_eval(manifest_path, metric_list, config_path, out_dir);
    if (ablate_cmd->parsed())
      return cmd_ablate(config_path, ckpt_path, seed, has_seed, out_dir);
    return 2;
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}

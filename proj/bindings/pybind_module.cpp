// Python bindings for the core operations: data generation, noising,
// training, denoising, metrics, and checkpoint I/O.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "mid/config.hpp"
#include "mid/datagen.hpp"
#include "mid/denoiser.hpp"
#include "mid/io.hpp"
#include "mid/metrics.hpp"
#include "mid/trainer.hpp"

namespace py = pybind11;
using namespace mid;

namespace {

Tensor tensor_from_array(const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
  std::vector<std::size_t> shape(a.ndim());
  for (py::ssize_t i = 0; i < a.ndim(); ++i) shape[i] = static_cast<std::size_t>(a.shape(i));
  Tensor t(shape);
  std::copy(a.data(), a.data() + a.size(), t.data.begin());
  return t;
}

py::array_t<double> array_from_tensor(const Tensor& t) {
  std::vector<py::ssize_t> shape(t.shape.begin(), t.shape.end());
  py::array_t<double> a(shape);
  std::copy(t.data.begin(), t.data.end(), a.mutable_data());
  return a;
}

NoiseProcessSpec process_from_dict(const py::dict& d) {
  Config cfg;
  std::string text = "[process]\n";
  for (const auto& item : d)
    text += py::str(item.first).cast<std::string>() + " = " +
            py::str(item.second).cast<std::string>() + "\n";
  return process_from_config(Config::parse_string(text));
}

TrainConfig train_config_from_dicts(const py::dict& process, const py::dict& model,
                                    const py::dict& train) {
  std::string text = "[process]\n";
  for (const auto& item : process)
    text += py::str(item.first).cast<std::string>() + " = " +
            py::str(item.second).cast<std::string>() + "\n";
  text += "[model]\n";
  for (const auto& item : model)
    text += py::str(item.first).cast<std::string>() + " = " +
            py::str(item.second).cast<std::string>() + "\n";
  text += "[train]\n";
  for (const auto& item : train)
    text += py::str(item.first).cast<std::string>() + " = " +
            py::str(item.second).cast<std::string>() + "\n";
  return train_config_from_config(Config::parse_string(text), 0, false);
}

}  // namespace

PYBIND11_MODULE(_mid, m) {
  m.doc() = "iterative denoising framework (core bindings)";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<DataError>(m, "DataError", PyExc_IOError);
  py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);

  // --- data generation -----------------------------------------------------
  m.def(
      "gen_texture_image",
      [](std::size_t width, std::size_t height, std::uint64_t seed) {
        Rng rng(seed);
        return array_from_tensor(gen_texture_image(width, height, rng));
      },
      py::arg("width"), py::arg("height"), py::arg("seed"));

  m.def(
      "gen_scene",
      [](std::uint64_t seed, py::kwargs kwargs) {
        SceneSpec spec;
        if (kwargs.contains("n_lines")) spec.n_lines = kwargs["n_lines"].cast<std::size_t>();
        if (kwargs.contains("min_points"))
          spec.min_points = kwargs["min_points"].cast<std::size_t>();
        if (kwargs.contains("max_points"))
          spec.max_points = kwargs["max_points"].cast<std::size_t>();
        if (kwargs.contains("noise_std_lo"))
          spec.noise_std_lo = kwargs["noise_std_lo"].cast<double>();
        if (kwargs.contains("noise_std_hi"))
          spec.noise_std_hi = kwargs["noise_std_hi"].cast<double>();
        if (kwargs.contains("outlier_fraction_lo"))
          spec.outlier_fraction_lo = kwargs["outlier_fraction_lo"].cast<double>();
        if (kwargs.contains("outlier_fraction_hi"))
          spec.outlier_fraction_hi = kwargs["outlier_fraction_hi"].cast<double>();
        Rng rng(seed);
        Scene sc = gen_scene(spec, rng);
        py::dict out;
        out["points"] = array_from_tensor(sc.points);
        out["labels"] = sc.labels;
        out["sigma"] = sc.sigma;
        out["outlier_fraction"] = sc.outlier_fraction;
        return out;
      },
      py::arg("seed"));

  m.def(
      "gen_signal_pair",
      [](std::uint64_t seed) {
        SignalSpec spec;
        Rng rng(seed);
        SignalPair pair = gen_signal_pair(spec, rng);
        return py::make_tuple(array_from_tensor(pair.semg), array_from_tensor(pair.ecg));
      },
      py::arg("seed"));

  // --- noising -------------------------------------------------------------
  m.def(
      "noise_to",
      [](const py::array_t<double>& s0, std::size_t t, const py::dict& process,
         std::uint64_t seed) {
        Rng rng(seed);
        return array_from_tensor(noise_to(tensor_from_array(s0), t, process_from_dict(process), rng));
      },
      py::arg("s0"), py::arg("t"), py::arg("process"), py::arg("seed"));

  m.def(
      "mix_at_snr",
      [](const py::array_t<double>& signal, const py::array_t<double>& interference,
         double snr_db) {
        return array_from_tensor(
            mix_at_snr(tensor_from_array(signal), tensor_from_array(interference), snr_db));
      },
      py::arg("signal"), py::arg("interference"), py::arg("snr_db"));

  // --- metrics -------------------------------------------------------------
  m.def("psnr", [](const py::array_t<double>& a, const py::array_t<double>& b,
                   double max_value) {
    return psnr(tensor_from_array(a), tensor_from_array(b), max_value);
  }, py::arg("clean"), py::arg("test"), py::arg("max_value") = 1.0);
  m.def("ssim", [](const py::array_t<double>& a, const py::array_t<double>& b,
                   double max_value) {
    return ssim(tensor_from_array(a), tensor_from_array(b), max_value);
  }, py::arg("clean"), py::arg("test"), py::arg("max_value") = 1.0);
  m.def("rmse", [](const py::array_t<double>& a, const py::array_t<double>& b) {
    return rmse(tensor_from_array(a), tensor_from_array(b));
  });
  m.def("recall_auc", &recall_auc, py::arg("errors_deg"), py::arg("e_max_deg"));

  // --- tensor file I/O -----------------------------------------------------
  m.def("read_tensor", [](const std::filesystem::path& p) {
    return array_from_tensor(read_tensor(p));
  });
  m.def("write_tensor", [](const std::filesystem::path& p, const py::array_t<double>& a) {
    write_tensor(p, tensor_from_array(a));
  });

  // --- training / checkpoints / denoising ----------------------------------
  py::class_<Checkpoint>(m, "Checkpoint")
      .def_property_readonly("trained_epochs",
                             [](const Checkpoint& c) { return c.trained_epochs; })
      .def_property_readonly("seed", [](const Checkpoint& c) { return c.seed; })
      .def_property_readonly("total_steps",
                             [](const Checkpoint& c) { return c.process.total_steps; });

  m.def(
      "train",
      [](const std::vector<py::array_t<double>>& data, const py::dict& process,
         const py::dict& model, const py::dict& train_opts) {
        TrainConfig cfg = train_config_from_dicts(process, model, train_opts);
        std::vector<Tensor> tensors;
        tensors.reserve(data.size());
        for (const auto& a : data) tensors.push_back(tensor_from_array(a));
        TrainResult result = train(tensors, cfg);
        py::list history;
        for (const auto& ep : result.history)
          history.append(py::make_tuple(ep.loss_step, ep.loss_noise));
        return py::make_tuple(
            py::cast(std::move(result.checkpoint), py::return_value_policy::move), history);
      },
      py::arg("data"), py::arg("process"), py::arg("model") = py::dict(),
      py::arg("train") = py::dict());

  m.def("save_checkpoint", [](const Checkpoint& c, const std::filesystem::path& p) {
    save_checkpoint(c, p);
  });
  m.def("load_checkpoint", [](const std::filesystem::path& p) {
    return py::cast(load_checkpoint(p), py::return_value_policy::move);
  });

  m.def(
      "estimate_step",
      [](Checkpoint& ckpt, const py::array_t<double>& s) {
        return estimate_step(ckpt, tensor_from_array(s));
      },
      py::arg("checkpoint"), py::arg("state"));

  m.def(
      "denoise",
      [](Checkpoint& ckpt, const py::array_t<double>& s, const std::string& mode) {
        const Tensor input = tensor_from_array(s);
        DenoiseResult res =
            mode == "oneshot" ? denoise_oneshot(ckpt, input) : denoise(ckpt, input);
        py::dict out;
        out["output"] = array_from_tensor(res.output);
        out["t_hat"] = res.t_hat;
        py::list trace;
        for (const auto& t : res.trace) trace.append(array_from_tensor(t));
        out["trace"] = trace;
        return out;
      },
      py::arg("checkpoint"), py::arg("state"), py::arg("mode") = "iterative");

  m.def(
      "denoise_points",
      [](Checkpoint& ckpt, const py::array_t<double>& pts, double threshold,
         const std::string& mode) {
        const Tensor input = tensor_from_array(pts);
        PointPartition part = mode == "oneshot"
                                  ? denoise_points_oneshot(ckpt, input, threshold)
                                  : denoise_points(ckpt, input, threshold);
        py::dict out;
        out["kept"] = array_from_tensor(part.kept);
        out["removed"] = array_from_tensor(part.removed);
        out["kept_idx"] = part.kept_idx;
        out["removed_idx"] = part.removed_idx;
        out["t_hat"] = part.t_hat;
        return out;
      },
      py::arg("checkpoint"), py::arg("points"), py::arg("threshold") = 0.5,
      py::arg("mode") = "iterative");
}

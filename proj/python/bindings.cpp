/* Copyright 2026 The dlcond Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#include <pybind11/numpy.h>
#include <pybind11/operators.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "dlc/checkpoint.hpp"
#include "dlc/cli.hpp"
#include "dlc/data.hpp"
#include "dlc/errors.hpp"
#include "dlc/gradcheck.hpp"
#include "dlc/metrics.hpp"
#include "dlc/model.hpp"
#include "dlc/optim.hpp"
#include "dlc/tensor.hpp"

namespace py = pybind11;
using namespace dlc;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Tensor to_tensor(const Array& a) {
  Shape shape(a.shape(), a.shape() + a.ndim());
  return Tensor(std::move(shape), std::vector<double>(a.data(), a.data() + a.size()));
}

Array to_array(const Tensor& t) {
  Array out(std::vector<py::ssize_t>(t.shape().begin(), t.shape().end()));
  std::copy(t.values().begin(), t.values().end(), out.mutable_data());
  return out;
}

std::vector<Tensor> to_tensors(const std::vector<Array>& arrays) {
  std::vector<Tensor> out;
  out.reserve(arrays.size());
  for (const auto& a : arrays) out.push_back(to_tensor(a));
  return out;
}

py::dict counts_dict(const FrameCounts& k) {
  py::dict d;
  d["tp"] = k.tp;
  d["fp"] = k.fp;
  d["fn"] = k.fn;
  d["n_ref"] = k.n_ref;
  d["s"] = k.s;
  d["d"] = k.d;
  d["i"] = k.i;
  return d;
}

std::unique_ptr<SedModel> model_from_state(const ModelState& state) {
  auto model = std::make_unique<SedModel>(state.config, 0);
  model->load_state(state);
  return model;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Sound event detection with conditioned time-dilated convolutions";

  auto base = py::register_exception<Error>(m, "Error");
  py::register_exception<DimensionError>(m, "DimensionError", base.ptr());
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
  py::register_exception<DataError>(m, "DataError", base.ptr());
  py::register_exception<NumericalError>(m, "NumericalError", base.ptr());
  py::register_exception<StateError>(m, "StateError", base.ptr());

  py::enum_<Mode>(m, "Mode").value("TRAIN", Mode::kTrain).value("INFER", Mode::kInfer);
  py::enum_<Activation>(m, "Activation")
      .value("SIGMOID", Activation::kSigmoid)
      .value("SOFTMAX", Activation::kSoftmax);
  py::enum_<Split>(m, "Split")
      .value("TRAIN", Split::kTrain)
      .value("VAL", Split::kVal)
      .value("TEST", Split::kTest);

  // --- tensor ops -----------------------------------------------------------
  m.def(
      "conv2d",
      [](const Array& input, const Array& kernels, std::pair<std::size_t, std::size_t> dilation,
         std::array<std::size_t, 4> padding, bool im2col) {
        const Dilation d{dilation.first, dilation.second};
        const Padding p{padding[0], padding[1], padding[2], padding[3]};
        const Tensor x = to_tensor(input), k = to_tensor(kernels);
        return to_array(im2col ? conv2d_im2col(x, k, d, p) : conv2d(x, k, d, p));
      },
      py::arg("input"), py::arg("kernels"), py::arg("dilation") = std::pair<std::size_t, std::size_t>{1, 1},
      py::arg("padding") = std::array<std::size_t, 4>{0, 0, 0, 0}, py::arg("im2col") = false,
      "Cross-correlation of C_in x H x W with C_out x C_in x Kh x Kw kernels; padding is "
      "(top, bottom, left, right).");

  // --- model ----------------------------------------------------------------
  py::class_<ModelConfig>(m, "ModelConfig")
      .def(py::init<>())
      .def_readwrite("channels", &ModelConfig::channels)
      .def_readwrite("dw_kernel_h", &ModelConfig::dw_kernel_h)
      .def_readwrite("dw_kernel_w", &ModelConfig::dw_kernel_w)
      .def_readwrite("pool_widths", &ModelConfig::pool_widths)
      .def_readwrite("dropout", &ModelConfig::dropout)
      .def_readwrite("lrelu_slope", &ModelConfig::lrelu_slope)
      .def_readwrite("bn_momentum", &ModelConfig::bn_momentum)
      .def_readwrite("bn_epsilon", &ModelConfig::bn_epsilon)
      .def_readwrite("kernel_h", &ModelConfig::kernel_h)
      .def_readwrite("kernel_w", &ModelConfig::kernel_w)
      .def_readwrite("temporal_channels", &ModelConfig::temporal_channels)
      .def_readwrite("dilation", &ModelConfig::dilation)
      .def_readwrite("num_features", &ModelConfig::num_features)
      .def_readwrite("num_classes", &ModelConfig::num_classes)
      .def_readwrite("conditioning", &ModelConfig::conditioning)
      .def_readwrite("teacher_forcing", &ModelConfig::teacher_forcing)
      .def_readwrite("detach_conditioning", &ModelConfig::detach_conditioning)
      .def_readwrite("activation", &ModelConfig::activation)
      .def_property_readonly("feature_width", &ModelConfig::feature_width)
      .def_property_readonly("label", [](const ModelConfig& c) { return method_label(c); })
      .def("validate", &ModelConfig::validate)
      .def("to_json", [](const ModelConfig& c) { return config_to_json(c); })
      .def_static("from_json", [](const std::string& s) { return config_from_json(s); })
      .def(py::self == py::self);

  py::class_<SedModel>(m, "SedModel")
      .def(py::init<ModelConfig, std::uint64_t>(), py::arg("config"), py::arg("seed") = 0)
      .def_property_readonly("config", &SedModel::config)
      .def_property("mode", &SedModel::mode, &SedModel::set_mode)
      .def(
          "forward",
          [](SedModel& model, const Array& features, std::optional<Array> labels) {
            if (!labels) return to_array(model.forward(to_tensor(features)));
            const Tensor y = to_tensor(*labels);
            return to_array(model.forward(to_tensor(features), &y));
          },
          py::arg("features"), py::arg("labels") = py::none(),
          "N x T x F features to N x T x C predictions.")
      .def(
          "backward", [](SedModel& model, const Array& g) { return to_array(model.backward(to_tensor(g))); },
          "Gradient of the input given d loss / d predictions; accumulates parameter grads.")
      .def("reseed_dropout", &SedModel::reseed_dropout)
      .def("parameters",
           [](SedModel& model) {
             py::dict d;
             for (const auto& [name, p] : model.params()) d[py::str(name)] = to_array(p->value);
             return d;
           })
      .def("gradients",
           [](SedModel& model) {
             py::dict d;
             for (const auto& [name, p] : model.params()) d[py::str(name)] = to_array(p->grad);
             return d;
           })
      .def("set_parameter",
           [](SedModel& model, const std::string& name, const Array& value) {
             for (const auto& [n, p] : model.params()) {
               if (n != name) continue;
               Tensor t = to_tensor(value);
               if (t.shape() != p->value.shape()) {
                 throw DimensionError("set_parameter: " + name + " expects " +
                                      shape_str(p->value.shape()) + ", got " +
                                      shape_str(t.shape()));
               }
               p->value = std::move(t);
               return;
             }
             throw ConfigError("set_parameter: no parameter named " + name);
           })
      .def("num_parameters", [](SedModel& model) {
        std::size_t n = 0;
        for (const auto& [name, p] : model.params()) n += p->value.size();
        return n;
      });

  m.def(
      "param_count",
      [](const ModelConfig& cfg) {
        const ParamCount c = param_count(cfg);
        py::dict d;
        for (const auto& [name, n] : c.components) d[py::str(name)] = n;
        d["total"] = c.total;
        return d;
      },
      "Parameter count per component plus the total.");
  m.def(
      "compare_dws",
      [](std::size_t kh, std::size_t kw, std::size_t cin, std::size_t cout) {
        const DwsComparison c = compare_dws(kh, kw, cin, cout);
        py::dict d;
        d["standard"] = c.standard;
        d["separable"] = c.separable;
        d["ratio"] = c.ratio;
        d["factor"] = py::make_tuple(c.factor_numerator, c.factor_denominator);
        d["matches_factor"] = c.matches_factor();
        return d;
      },
      py::arg("kernel_h"), py::arg("kernel_w"), py::arg("in_channels"), py::arg("out_channels"));

  m.def(
      "save_checkpoint",
      [](const std::filesystem::path& path, SedModel& model,
         std::map<std::string, std::string> metadata) {
        save_checkpoint(path, Checkpoint{model.state(), std::move(metadata)});
      },
      py::arg("path"), py::arg("model"), py::arg("metadata") = std::map<std::string, std::string>{});
  m.def(
      "load_checkpoint",
      [](const std::filesystem::path& path) {
        Checkpoint c = load_checkpoint(path);
        return py::make_tuple(py::cast(model_from_state(c.state)), c.metadata);
      },
      "Returns (model, metadata).");

  // --- data -----------------------------------------------------------------
  py::class_<SequenceItem>(m, "SequenceItem")
      .def_readonly("id", &SequenceItem::id)
      .def_readonly("split", &SequenceItem::split)
      .def_readonly("valid", &SequenceItem::valid)
      .def_property_readonly("features", [](const SequenceItem& s) { return to_array(s.features); })
      .def_property_readonly("labels", [](const SequenceItem& s) { return to_array(s.labels); });

  py::class_<SequenceDataset>(m, "SequenceDataset")
      .def_readonly("class_names", &SequenceDataset::class_names)
      .def_readonly("steps", &SequenceDataset::steps)
      .def_readonly("features", &SequenceDataset::features)
      .def_readonly("classes", &SequenceDataset::classes)
      .def_readonly("items", &SequenceDataset::items)
      .def("indices", &SequenceDataset::indices)
      .def("count", &SequenceDataset::count)
      .def("validate", &SequenceDataset::validate)
      .def("save", [](const SequenceDataset& d, const std::filesystem::path& dir) {
        save_feature_dir(d, dir);
      });
  m.def("load_feature_dir", &load_feature_dir);

  py::class_<SynthConfig>(m, "SynthConfig")
      .def(py::init<>())
      .def_readwrite("classes", &SynthConfig::classes)
      .def_readwrite("features", &SynthConfig::features)
      .def_readwrite("steps", &SynthConfig::steps)
      .def_readwrite("train", &SynthConfig::train)
      .def_readwrite("val", &SynthConfig::val)
      .def_readwrite("test", &SynthConfig::test)
      .def_readwrite("max_polyphony", &SynthConfig::max_polyphony)
      .def_readwrite("min_event", &SynthConfig::min_event)
      .def_readwrite("max_event", &SynthConfig::max_event)
      .def_readwrite("events_per_sequence", &SynthConfig::events_per_sequence)
      .def_readwrite("amplitudes", &SynthConfig::amplitudes)
      .def_readwrite("background", &SynthConfig::background)
      .def_readwrite("jitter", &SynthConfig::jitter)
      .def_readwrite("normalize", &SynthConfig::normalize)
      .def_property(
          "dependencies",
          [](const SynthConfig& c) {
            std::vector<std::tuple<std::size_t, std::size_t, std::size_t>> out;
            for (const auto& d : c.dependencies) out.emplace_back(d.antecedent, d.consequent, d.max_gap);
            return out;
          },
          [](SynthConfig& c, const std::vector<std::tuple<std::size_t, std::size_t, std::size_t>>& v) {
            c.dependencies.clear();
            for (const auto& [a, b, g] : v) c.dependencies.push_back({a, b, g});
          },
          "(antecedent, consequent, max_gap) triples");
  m.def("synth_generate", &synth_generate, py::arg("config"), py::arg("seed") = 0);

  // --- optimization ---------------------------------------------------------
  m.def(
      "bce_loss",
      [](const Array& pred, const Array& labels, std::vector<std::size_t> valid) {
        const LossResult r = bce_loss(to_tensor(pred), to_tensor(labels), valid);
        return py::make_tuple(r.value, to_array(r.grad));
      },
      py::arg("pred"), py::arg("labels"), py::arg("valid") = std::vector<std::size_t>{},
      "Returns (loss, d loss / d pred).");

  m.def(
      "train",
      [](SedModel& model, const SequenceDataset& data, std::size_t max_epochs,
         std::size_t batch_size, std::size_t patience, double lr, std::uint64_t seed,
         bool record_wall_time) {
        TrainOptions o;
        o.max_epochs = max_epochs;
        o.batch_size = batch_size;
        o.patience = patience;
        o.adam.lr = lr;
        o.seed = seed;
        o.record_wall_time = record_wall_time;
        TrainResult r;
        {
          py::gil_scoped_release release;
          r = train(model, data, o);
        }
        py::list log;
        for (const auto& e : r.log) {
          py::dict d;
          d["epoch"] = e.epoch;
          d["train_loss"] = e.train_loss;
          d["val_loss"] = e.val_loss;
          d["wall_time"] = e.wall_time;
          log.append(d);
        }
        py::dict out;
        out["best_epoch"] = r.best_epoch;
        out["best_val_loss"] = r.best_val_loss;
        out["early_stopped"] = r.early_stopped;
        out["log"] = log;
        return out;
      },
      py::arg("model"), py::arg("data"), py::arg("max_epochs") = 1000, py::arg("batch_size") = 16,
      py::arg("patience") = 30, py::arg("lr") = 1e-3, py::arg("seed") = 0,
      py::arg("record_wall_time") = true,
      "Adam with early stopping; the model ends up holding the best state.");

  m.def(
      "predict",
      [](SedModel& model, const SequenceDataset& data, Split split) {
        const auto idx = data.indices(split);
        py::list out;
        for (const auto& t : predict(model, data, idx)) out.append(to_array(t));
        return out;
      },
      py::arg("model"), py::arg("data"), py::arg("split") = Split::kTest,
      "Inference-mode T x C predictions of every item in a split.");

  // --- metrics --------------------------------------------------------------
  m.def(
      "frame_scores",
      [](const std::vector<Array>& preds, const std::vector<Array>& labels,
         std::vector<std::size_t> valid, double threshold) {
        const EvalReport r = frame_scores(to_tensors(preds), to_tensors(labels), valid, threshold);
        py::dict d;
        d["f1"] = r.f1;
        d["er"] = r.er;
        d["counts"] = counts_dict(r.counts);
        return d;
      },
      py::arg("preds"), py::arg("labels"), py::arg("valid") = std::vector<std::size_t>{},
      py::arg("threshold") = 0.5, "Frame-based F1 and error rate over T x C sequences.");

  // --- gradient checking ----------------------------------------------------
  m.def("gradient_subjects", &gradient_subjects);
  m.def(
      "gradient_suite",
      [](std::vector<std::string> subjects, std::size_t seeds, std::size_t steps) {
        GradSuiteOptions o;
        o.subjects = std::move(subjects);
        o.seeds = seeds;
        o.steps = steps;
        py::list out;
        for (const auto& e : run_gradient_suite(o)) {
          py::dict d;
          d["subject"] = e.subject;
          d["runs"] = e.runs;
          d["checked"] = e.checked;
          d["skipped"] = e.skipped;
          d["max_rel_error"] = e.max_rel_error;
          d["passed"] = e.passed;
          d["worst"] = e.worst;
          out.append(d);
        }
        return out;
      },
      py::arg("subjects") = std::vector<std::string>{}, py::arg("seeds") = 20,
      py::arg("steps") = 12, "Central finite-difference checks; empty subjects runs all.");
}

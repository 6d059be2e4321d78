// Copyright 2026 The BoxSAM-CPP Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "boxsam/cli.hpp"
#include "boxsam/components.hpp"
#include "boxsam/error.hpp"
#include "boxsam/loss.hpp"
#include "boxsam/metrics.hpp"
#include "boxsam/pipeline.hpp"
#include "boxsam/synth.hpp"

namespace py = pybind11;
using namespace boxsam;

namespace {

using FloatArray = py::array_t<float, py::array::c_style | py::array::forcecast>;
using DoubleArray = py::array_t<double, py::array::c_style | py::array::forcecast>;

MaskMap to_mask(const FloatArray& a, MaskRole role) {
  if (a.ndim() != 2) throw py::value_error("expected a 2-D array");
  const auto h = static_cast<int>(a.shape(0));
  const auto w = static_cast<int>(a.shape(1));
  std::vector<float> values(a.data(), a.data() + a.size());
  return MaskMap(h, w, std::move(values), role);
}

py::array_t<float> from_mask(const MaskMap& m) {
  py::array_t<float> out({m.height(), m.width()});
  std::copy(m.values().begin(), m.values().end(), out.mutable_data());
  return out;
}

torch::Tensor to_tensor(const DoubleArray& a) {
  if (a.ndim() != 4) throw py::value_error("expected an (N, 1, H, W) array");
  std::vector<int64_t> shape(a.shape(), a.shape() + 4);
  return torch::from_blob(const_cast<double*>(a.data()), shape, torch::kFloat64).clone();
}

py::dict report_dict(const pseudo::RpsReport& r) {
  py::dict d;
  d["id"] = r.id;
  d["components_total"] = r.components_total;
  d["components_kept"] = r.components_kept;
  d["components_removed"] = r.components_removed;
  d["box_count_annotation"] = r.box_count_annotation;
  d["box_count_pseudo"] = r.box_count_pseudo;
  d["matched"] = r.matched;
  return d;
}

Connectivity conn(int c) {
  if (c != 4 && c != 8) throw py::value_error("connectivity must be 4 or 8");
  return static_cast<Connectivity>(c);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Box-supervised camouflaged object detection core";

  py::register_exception<Error>(m, "BoxsamError");

  m.def(
      "connected_components",
      [](const FloatArray& mask, int connectivity) {
        const auto lab = connected_components(to_mask(mask, MaskRole::kPseudoLabel), conn(connectivity));
        py::array_t<int32_t> labels({lab.height, lab.width});
        std::copy(lab.labels.begin(), lab.labels.end(), labels.mutable_data());
        return py::make_tuple(lab.count, labels);
      },
      py::arg("mask"), py::arg("connectivity") = 8);

  m.def(
      "boxes_from_mask",
      [](const FloatArray& mask, bool merge, int connectivity) {
        std::vector<std::tuple<int, int, int, int>> out;
        for (const auto& b : boxes_from_mask(to_mask(mask, MaskRole::kPseudoLabel), merge, conn(connectivity))) {
          out.emplace_back(b.x_min, b.y_min, b.x_max, b.y_max);
        }
        return out;
      },
      py::arg("mask"), py::arg("merge_overlaps") = true, py::arg("connectivity") = 8);

  m.def(
      "count_boxes",
      [](const FloatArray& mask, int connectivity) {
        return count_boxes(to_mask(mask, MaskRole::kPseudoLabel), conn(connectivity));
      },
      py::arg("mask"), py::arg("connectivity") = 8);

  m.def(
      "redundancy_process",
      [](const FloatArray& pseudo_label, const FloatArray& prediction, double tau, int connectivity) {
        auto r = pseudo::redundancy_process(to_mask(pseudo_label, MaskRole::kPseudoLabel),
                                            to_mask(prediction, MaskRole::kPrediction), tau, conn(connectivity));
        return py::make_tuple(from_mask(r.refined), report_dict(r.report));
      },
      py::arg("pseudo_label"), py::arg("prediction"), py::arg("tau") = 0.0, py::arg("connectivity") = 8);

  m.def("mae", [](const FloatArray& p, const FloatArray& g) {
    return metrics::mae(to_mask(p, MaskRole::kPrediction), to_mask(g, MaskRole::kGroundTruth));
  });
  m.def("f_adaptive", [](const FloatArray& p, const FloatArray& g) {
    return metrics::f_adaptive(to_mask(p, MaskRole::kPrediction), to_mask(g, MaskRole::kGroundTruth));
  });
  m.def("s_measure", [](const FloatArray& p, const FloatArray& g) {
    return metrics::s_measure(to_mask(p, MaskRole::kPrediction), to_mask(g, MaskRole::kGroundTruth));
  });
  m.def("e_measure", [](const FloatArray& p, const FloatArray& g) {
    return metrics::e_measure_mean(to_mask(p, MaskRole::kPrediction), to_mask(g, MaskRole::kGroundTruth));
  });
  m.def(
      "dice_iou",
      [](const FloatArray& p, const FloatArray& g, double threshold) {
        const auto r =
            metrics::dice_iou(to_mask(p, MaskRole::kPrediction), to_mask(g, MaskRole::kGroundTruth), threshold);
        return py::make_tuple(r.dice, r.iou);
      },
      py::arg("pred"), py::arg("gt"), py::arg("threshold") = 0.5);

  m.def("weighted_bce", [](const DoubleArray& logits, const DoubleArray& target) {
    const auto t = to_tensor(target);
    return loss::weighted_bce(to_tensor(logits), t, loss::pixel_weight(t)).item<double>();
  });
  m.def("weighted_iou", [](const DoubleArray& logits, const DoubleArray& target) {
    const auto t = to_tensor(target);
    return loss::weighted_iou(to_tensor(logits), t, loss::pixel_weight(t)).item<double>();
  });

  m.def(
      "synth_generate",
      [](const std::string& config_json, const std::string& out_dir) {
        const auto c = synth::synth_config_from_json(nlohmann::json::parse(config_json));
        return synth::generate(c, out_dir).entries.size();
      },
      py::arg("config_json"), py::arg("out_dir"));

  m.def(
      "run_boxsam",
      [](const std::string& config_json, const std::string& base_dir) {
        py::gil_scoped_release release;
        const auto c = pseudo::pipeline_config_from_json(nlohmann::json::parse(config_json), base_dir);
        const auto r = pseudo::run_boxsam(c);
        return r.reports.size();
      },
      py::arg("config_json"), py::arg("base_dir") = "");

  m.def(
      "cli",
      [](const std::vector<std::string>& args) {
        std::ostringstream out, err;
        int code;
        {
          py::gil_scoped_release release;
          std::vector<std::string> argv{"boxsam"};
          argv.insert(argv.end(), args.begin(), args.end());
          code = cli::dispatch(argv, out, err);
        }
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"));
}

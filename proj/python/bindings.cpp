#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <algorithm>
#include <sstream>

#include "commands.hpp"
#include "upseg/errors.hpp"
#include "upseg/loss.hpp"
#include "upseg/ops.hpp"
#include "upseg/tensor_file.hpp"

namespace py = pybind11;
using namespace upseg;

namespace {

using F64Array = py::array_t<double, py::array::c_style | py::array::forcecast>;
using U8Array = py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>;

Tensor to_tensor(const F64Array& a) {
    Shape shape(a.shape(), a.shape() + a.ndim());
    return Tensor::from_data(shape, std::vector<double>(a.data(), a.data() + a.size()));
}

py::array_t<double> to_array(const Tensor& t) {
    py::array_t<double> out(std::vector<py::ssize_t>(t.shape().begin(), t.shape().end()));
    std::copy(t.data().begin(), t.data().end(), out.mutable_data());
    return out;
}

Mask to_mask(const U8Array& a) {
    if (a.ndim() != 3) throw ShapeError("masks must be N x H x W");
    Mask m(a.shape(0), a.shape(1), a.shape(2));
    std::copy(a.data(), a.data() + a.size(), m.labels.begin());
    return m;
}

py::array_t<std::uint8_t> to_array(const Mask& m) {
    py::array_t<std::uint8_t> out({m.batch, m.height, m.width});
    std::copy(m.labels.begin(), m.labels.end(), out.mutable_data());
    return out;
}

py::dict report_dict(const MetricsReport& r) {
    py::dict d;
    d["dice"] = r.dice;
    d["jaccard"] = r.jaccard;
    d["mean_dice"] = r.mean_dice;
    d["mean_jaccard"] = r.mean_jaccard;
    return d;
}

py::dict summary_dict(const EvaluationSummary& s) {
    py::dict d;
    d["images"] = s.images;
    d["macro_dice"] = s.macro_dice;
    d["macro_jaccard"] = s.macro_jaccard;
    d["pooled"] = report_dict(s.pooled);
    return d;
}

// A built network plus the config it came from.
struct Model {
    RunConfig config;
    ModelGraph graph;

    explicit Model(const std::string& text) : config(RunConfig::parse(text)), graph(build_model(config)) {}

    std::vector<py::array_t<double>> forward(const F64Array& images) const {
        std::vector<py::array_t<double>> out;
        for (const auto& t : forward_all_taps(graph, to_tensor(images))) out.push_back(to_array(t));
        return out;
    }
};

}  // namespace

PYBIND11_MODULE(_upseg, m) {
    m.doc() = "U-Net with appended up-scaling stages and multi-resolution supervision";

    auto base = py::register_exception<Error>(m, "UpsegError", PyExc_RuntimeError);
    py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
    py::register_exception<ShapeError>(m, "ShapeError", base.ptr());
    py::register_exception<FormatError>(m, "FormatError", base.ptr());
    py::register_exception<MismatchError>(m, "MismatchError", base.ptr());

    m.def("analytic_upscale_params", &analytic_upscale_params, py::arg("num_classes"), py::arg("num_stages"));

    py::class_<Model>(m, "Model")
        .def(py::init<const std::string&>(), py::arg("config_text") = "")
        .def_property_readonly("num_stages", [](const Model& self) { return self.graph.num_stages(); })
        .def_property_readonly("parameter_count", [](const Model& self) { return count_parameters(self.graph); })
        .def_property_readonly("config_text", [](const Model& self) { return self.config.to_text(); })
        .def("parameter_names",
             [](const Model& self) {
                 std::vector<std::string> names;
                 for (const auto& p : self.graph.parameters()) names.push_back(p.name);
                 return names;
             })
        .def("forward", &Model::forward, py::arg("images"), "Logits of every stage tap, coarsest first.")
        .def("predict",
             [](const Model& self, const F64Array& images, std::int64_t gt_res) {
                 return to_array(predict(self.graph, to_tensor(images), gt_res));
             },
             py::arg("images"), py::arg("gt_res"))
        .def("profile",
             [](const Model& self, std::int64_t height, std::int64_t width) {
                 auto r = profile(self.graph, height, width);
                 py::dict d;
                 d["params"] = r.total_params;
                 d["macs"] = r.total_macs;
                 d["activation_bytes"] = r.total_activation_bytes;
                 d["csv"] = r.to_csv();
                 return d;
             },
             py::arg("height"), py::arg("width"))
        .def("save", [](const Model& self, const std::filesystem::path& p) { save_checkpoint(p, self.graph); })
        .def("load", [](Model& self, const std::filesystem::path& p) { load_checkpoint(p, self.graph); });

    m.def("multiscale_loss",
          [](const std::vector<F64Array>& taps, const U8Array& gt, std::vector<double> weights) {
              LossConfig cfg;
              cfg.num_stages = static_cast<int>(taps.size()) - 1;
              cfg.stage_weights = std::move(weights);
              std::vector<Tensor> ts;
              for (const auto& t : taps) ts.push_back(to_tensor(t));
              return l_sum(ts, to_mask(gt), cfg).item();
          },
          py::arg("taps"), py::arg("gt"), py::arg("weights") = std::vector<double>{});

    m.def("cross_entropy",
          [](const F64Array& logits, const U8Array& target) {
              return cross_entropy(to_tensor(logits), to_mask(target)).item();
          },
          py::arg("logits"), py::arg("target"));

    m.def("dice_jaccard",
          [](const U8Array& pred, const U8Array& gt, int num_labels) {
              return report_dict(dice_jaccard(confusion(to_mask(pred), to_mask(gt), num_labels)));
          },
          py::arg("pred"), py::arg("gt"), py::arg("num_labels") = 2);

    m.def("evaluate",
          [](const U8Array& pred, const U8Array& gt, int num_labels) {
              return summary_dict(evaluate(to_mask(pred), to_mask(gt), num_labels));
          },
          py::arg("pred"), py::arg("gt"), py::arg("num_labels") = 2);

    m.def("upscale_prediction",
          [](const F64Array& logits, std::int64_t height, std::int64_t width) {
              return to_array(upscale_prediction(to_tensor(logits), height, width));
          },
          py::arg("logits"), py::arg("height"), py::arg("width"));

    m.def("generate",
          [](const std::string& config_text) {
              auto d = generate(RunConfig::parse(config_text).data);
              return py::make_tuple(to_array(d.images), to_array(d.masks));
          },
          py::arg("config_text") = "", "Synthetic (images, masks) for the config's data.* keys.");

    m.def("write_tensor_file",
          [](const std::filesystem::path& path, const std::map<std::string, F64Array>& tensors) {
              std::vector<TensorRecord> records;
              for (const auto& [name, a] : tensors) records.push_back(to_record(name, to_tensor(a)));
              write_tensor_file(path, records);
          },
          py::arg("path"), py::arg("tensors"));

    m.def("read_tensor_file",
          [](const std::filesystem::path& path) {
              py::dict out;
              for (const auto& r : read_tensor_file(path)) out[py::str(r.name)] = to_array(upseg::to_tensor(r));
              return out;
          },
          py::arg("path"), "Every record widened to float64.");

    m.def("run_cli",
          [](std::vector<std::string> args) {
              args.insert(args.begin(), "upseg");
              std::vector<char*> argv;
              for (auto& a : args) argv.push_back(a.data());
              py::gil_scoped_release release;
              return cli::run(static_cast<int>(argv.size()), argv.data());
          },
          py::arg("args"), "Runs the command-line tool in-process and returns its exit code.");
}

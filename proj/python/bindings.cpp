#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <json.hpp>

#include "semvis/errors.hpp"
#include "semvis/objective.hpp"
#include "semvis/pipeline.hpp"
#include "semvis/training.hpp"

namespace py = pybind11;
using namespace semvis;

namespace {

// JSON crosses the boundary as Python objects through the json module.
py::object to_py(const nlohmann::json& j) { return py::module_::import("json").attr("loads")(j.dump()); }

nlohmann::json from_py(const py::object& o) {
    return nlohmann::json::parse(py::module_::import("json").attr("dumps")(o).cast<std::string>());
}

RunConfig config_from(const py::object& overrides) {
    return overrides.is_none() ? RunConfig{} : RunConfig::from_json(from_py(overrides));
}

Tensor matrix_from(const std::vector<std::vector<double>>& rows) {
    if (rows.empty()) throw DimensionError("empty matrix");
    std::vector<double> flat;
    for (const auto& r : rows) {
        if (r.size() != rows.front().size()) throw DimensionError("ragged matrix");
        flat.insert(flat.end(), r.begin(), r.end());
    }
    return Tensor::matrix(rows.size(), rows.front().size(), std::move(flat));
}

py::object reports_to_py(const RetrievalReports& r) {
    return to_py(nlohmann::json{{"caption_retrieval", to_json(r.caption)}, {"image_retrieval", to_json(r.image)}});
}

}  // namespace

PYBIND11_MODULE(_semvis, m) {
    m.doc() = "Joint image/text embedding with phrase localization";

    py::register_exception<Error>(m, "Error", PyExc_RuntimeError);

    m.def("default_config", [] { return to_py(RunConfig{}.to_json()); });
    m.def("large_scale_config", [] { return to_py(large_scale_config().to_json()); });
    m.def(
        "dry_run",
        [](const py::object& cfg, std::size_t vocab_size, std::size_t image_size) {
            return to_py(dry_run(config_from(cfg), vocab_size, image_size));
        },
        py::arg("config") = py::none(), py::arg("vocab_size") = 15, py::arg("image_size") = 64);

    m.def(
        "ranking_loss",
        [](const std::vector<std::vector<double>>& similarity, const std::vector<std::size_t>& ids, double margin,
           const std::string& mining) {
            return ranking_loss(matrix_from(similarity), ids, {margin, parse_mining(mining)}).item();
        },
        py::arg("similarity"), py::arg("ids"), py::arg("margin") = 0.2, py::arg("mining") = "hard");
    m.def(
        "eval_retrieval",
        [](const std::vector<std::vector<double>>& similarity, const std::vector<std::size_t>& owner) {
            return reports_to_py(eval_retrieval(matrix_from(similarity), owner));
        },
        py::arg("similarity"), py::arg("caption_owner"));

    py::class_<Dataset>(m, "Dataset")
        .def("__len__", [](const Dataset& d) { return d.scenes.size(); })
        .def("captions", [](const Dataset& d, std::size_t i) { return d.scenes.at(i).captions; })
        .def("regions",
             [](const Dataset& d, std::size_t i) {
                 py::list out;
                 for (const auto& r : d.scenes.at(i).regions) {
                     out.append(py::make_tuple(r.phrase, r.box.x, r.box.y, r.box.width, r.box.height));
                 }
                 return out;
             })
        .def_property_readonly("vocab", [](const Dataset& d) { return d.vocab.tokens(); })
        .def("save", [](const Dataset& d, const std::filesystem::path& dir) { write_dataset(d, dir); });
    m.def("generate_dataset", [](std::size_t n, std::uint64_t seed) { return generate_dataset(n, seed); },
          py::arg("scenes"), py::arg("seed"));
    m.def("read_dataset", &read_dataset, py::arg("directory"));

    py::class_<TrainingSession>(m, "Session")
        .def(py::init([](const py::object& cfg, const Dataset& vocab_source) {
                 return TrainingSession(config_from(cfg), vocab_source.vocab);
             }),
             py::arg("config"), py::arg("dataset"))
        .def_static("load", &TrainingSession::load, py::arg("path"))
        .def("save", &TrainingSession::save, py::arg("path"))
        .def_property_readonly("epoch", [](const TrainingSession& s) { return s.state().epoch; })
        .def_property_readonly("config", [](const TrainingSession& s) { return to_py(s.config().to_json()); })
        .def("run_epoch", [](TrainingSession& s, const Dataset& d) { return to_py(s.run_epoch(d).to_json()); })
        .def("evaluate_retrieval",
             [](const TrainingSession& s, const Dataset& d) { return reports_to_py(evaluate_retrieval(s.model(), d)); })
        .def("evaluate_pointing",
             [](const TrainingSession& s, const Dataset& d) {
                 return to_py(to_json(evaluate_pointing(s.model(), d, s.config().localization())));
             })
        .def(
            "localize",
            [](const TrainingSession& s, const Dataset& d, std::size_t scene, const std::string& phrase) {
                const Localization loc =
                    localize(s.model(), s.vocab(), d.scenes.at(scene).image, phrase, s.config().localization());
                return py::dict(py::arg("x") = loc.point.x, py::arg("y") = loc.point.y,
                                py::arg("heat_max") = loc.heat_max, py::arg("all_unknown") = loc.all_unknown,
                                py::arg("rows") = loc.heatmap.rows, py::arg("cols") = loc.heatmap.cols,
                                py::arg("values") = loc.heatmap.values);
            },
            py::arg("dataset"), py::arg("scene"), py::arg("phrase"));
}

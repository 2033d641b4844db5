#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "riskgrid/attribution.hpp"
#include "riskgrid/config.hpp"
#include "riskgrid/labeling.hpp"
#include "riskgrid/models.hpp"
#include "riskgrid/pipeline.hpp"
#include "riskgrid/synthcity.hpp"
#include "riskgrid/visual.hpp"

namespace py = pybind11;
using namespace riskgrid;

namespace {

GrayImage image_from_array(const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
    if (a.ndim() != 2) throw py::value_error("expected a 2-D grayscale array");
    GrayImage img(static_cast<int>(a.shape(0)), static_cast<int>(a.shape(1)));
    std::copy(a.data(), a.data() + a.size(), img.pixels.begin());
    return img;
}

}  // namespace

PYBIND11_MODULE(_riskgrid, m) {
    m.doc() = "Grid-level multimodal traffic accident risk toolkit";

    py::register_exception<pipeline::ConfigError>(m, "ConfigError");
    py::register_exception<pipeline::ArtifactError>(m, "ArtifactError");

    py::class_<BoundingBox>(m, "BoundingBox")
        .def(py::init([](double lat_min, double lat_max, double lon_min, double lon_max) {
                 return BoundingBox{lat_min, lat_max, lon_min, lon_max};
             }),
             py::arg("lat_min"), py::arg("lat_max"), py::arg("lon_min"), py::arg("lon_max"))
        .def_readonly("lat_min", &BoundingBox::lat_min)
        .def_readonly("lat_max", &BoundingBox::lat_max)
        .def_readonly("lon_min", &BoundingBox::lon_min)
        .def_readonly("lon_max", &BoundingBox::lon_max);

    py::class_<CellId>(m, "CellId")
        .def(py::init([](int row, int col) { return CellId{row, col}; }), py::arg("row"),
             py::arg("col"))
        .def_readonly("row", &CellId::row)
        .def_readonly("col", &CellId::col)
        .def("__eq__", [](const CellId& a, const CellId& b) { return a == b; })
        .def("__repr__", [](const CellId& c) {
            return "CellId(" + std::to_string(c.row) + ", " + std::to_string(c.col) + ")";
        });

    py::class_<RegionGrid>(m, "RegionGrid")
        .def_static("from_bbox", &RegionGrid::from_bbox, py::arg("bbox"),
                    py::arg("cell_km") = 1.0)
        .def_static("forced", &RegionGrid::forced, py::arg("bbox"), py::arg("rows"),
                    py::arg("cols"))
        .def_property_readonly("rows", &RegionGrid::rows)
        .def_property_readonly("cols", &RegionGrid::cols)
        .def_property_readonly("n_cells", &RegionGrid::n_cells)
        .def("locate",
             [](const RegionGrid& g, double lat, double lon) -> std::optional<CellId> {
                 return g.locate(lat, lon);
             })
        .def("cell_bounds", &RegionGrid::cell_bounds)
        .def("linear", &RegionGrid::linear);

    m.def(
        "risk_levels",
        [](const std::vector<double>& severity, std::uint64_t seed) {
            RiskLabels labels = kmeans_levels(severity, seed);
            return py::make_tuple(labels.level, labels.centroids);
        },
        py::arg("severity"), py::arg("seed") = 42,
        "Discretize per-cell severity sums into 3 ordered risk levels.");

    m.def(
        "edge_map",
        [](const py::array_t<double, py::array::c_style | py::array::forcecast>& patch) {
            EdgeMap e = canny(image_from_array(patch));
            py::array_t<std::uint8_t> out({e.height, e.width});
            std::copy(e.pixels.begin(), e.pixels.end(), out.mutable_data());
            return out;
        },
        py::arg("patch"), "Canny edge map of a [0,1] grayscale patch.");

    m.def(
        "fractal_spectrum",
        [](const py::array_t<double, py::array::c_style | py::array::forcecast>& patch) {
            FractalSpectrum s = patch_spectrum(image_from_array(patch));
            return std::vector<double>(s.begin(), s.end());
        },
        py::arg("patch"),
        "Generalized-dimension spectrum D(q) of one grayscale patch on the fixed q grid.");

    m.attr("Q_GRID") = std::vector<double>(kQGrid.begin(), kQGrid.end());

    m.def("hypernet_param_count", &models::hypernet_param_count, py::arg("d_in"), py::arg("dz"),
          py::arg("rows"), py::arg("cols"));
    m.def("dense_hypernet_param_count", &models::dense_hypernet_param_count, py::arg("d_in"),
          py::arg("rows"), py::arg("cols"));

    py::class_<synth::SynthSpec>(m, "SynthSpec")
        .def(py::init<>())
        .def_readwrite("rows", &synth::SynthSpec::rows)
        .def_readwrite("cols", &synth::SynthSpec::cols)
        .def_readwrite("seed", &synth::SynthSpec::seed)
        .def_readwrite("eta", &synth::SynthSpec::eta)
        .def_readwrite("coef_traffic", &synth::SynthSpec::coef_traffic)
        .def_readwrite("coef_road", &synth::SynthSpec::coef_road)
        .def_readwrite("coef_visual", &synth::SynthSpec::coef_visual)
        .def_readwrite("bias", &synth::SynthSpec::bias)
        .def_readwrite("severity_scale", &synth::SynthSpec::severity_scale)
        .def_readwrite("fog_prob", &synth::SynthSpec::fog_prob)
        .def_readwrite("tile_size", &synth::SynthSpec::tile_size);

    py::class_<synth::GeneratedCity>(m, "GeneratedCity")
        .def_property_readonly("grid", [](const synth::GeneratedCity& c) { return c.grid; })
        .def_property_readonly("rates",
                               [](const synth::GeneratedCity& c) {
                                   std::vector<double> r;
                                   r.reserve(c.cells.size());
                                   for (const auto& cell : c.cells) r.push_back(cell.rate);
                                   return r;
                               })
        .def("planted_labels", [](const synth::GeneratedCity& c) { return planted_labels(c); });

    m.def("generate_city", &synth::generate, py::arg("spec"), py::arg("out_dir"),
          "Write a seeded synthetic city (GPS, POI, OSM, tiles, CNN vectors, accidents).");
    m.def("read_city", &synth::read_city, py::arg("out_dir"));
    m.def("label_agreement", &synth::label_agreement, py::arg("a"), py::arg("b"));

    m.def("default_config", [] { return pipeline::config_to_string(pipeline::PipelineConfig{}); });
    m.def("parse_config", &pipeline::config_from_string, py::arg("text"));
    m.def(
        "run_stage",
        [](const std::string& stage, const std::string& config_text,
           std::optional<std::uint64_t> seed) {
            pipeline::PipelineConfig cfg = config_text.empty()
                                               ? pipeline::PipelineConfig{}
                                               : pipeline::config_from_string(config_text);
            if (seed) cfg.seed = *seed;
            pipeline::run(stage, cfg);
        },
        py::arg("stage"), py::arg("config") = std::string(), py::arg("seed") = std::nullopt,
        "Run one pipeline stage (synth, featurize, label, train, eval, predict, attribute, "
        "heatmap) against the configured workdir.");
    m.def("stages", [] { return pipeline::stage_names(); });

    m.def(
        "integrated_gradients",
        [](const std::string& checkpoint, const std::vector<double>& x,
           const std::vector<double>& baseline, int steps, std::optional<int> target) {
            models::Model model = models::load_checkpoint(checkpoint);
            attribution::ModelScorer scorer(model);
            attribution::IgConfig cfg;
            cfg.steps = steps;
            cfg.baseline = baseline;
            cfg.target = target;
            attribution::IgResult res = attribution::integrated_gradients(scorer, x, cfg);
            py::dict out;
            out["attributions"] = res.attributions;
            out["target"] = res.target;
            out["score_input"] = res.score_input;
            out["score_baseline"] = res.score_baseline;
            out["completeness_gap"] = res.completeness_gap;
            return out;
        },
        py::arg("checkpoint"), py::arg("x"), py::arg("baseline") = std::vector<double>{},
        py::arg("steps") = 50, py::arg("target") = std::nullopt,
        "Integrated-gradients attribution for one input under a trained checkpoint.");
}

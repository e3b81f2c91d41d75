#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "emag/baselines.hpp"
#include "emag/braingrid.hpp"
#include "emag/checkpoint.hpp"
#include "emag/eegd.hpp"
#include "emag/harness.hpp"
#include "emag/metrics.hpp"
#include "emag/montage.hpp"
#include "emag/synthdata.hpp"

namespace py = pybind11;
using namespace emag;
using nlohmann::json;

namespace {

json parse(const std::string& text) { return json::parse(text); }

py::dict montage_dict(const Montage& m) {
  py::dict d;
  d["name"] = m.name();
  d["labels"] = m.labels();
  d["positions"] = m.positions();
  return d;
}

}  // namespace

PYBIND11_MODULE(_emag, m) {
  m.doc() = "Native core of the emag package";
  m.attr("__version__") = EMAG_VERSION;

  auto base = py::register_exception<Error>(m, "EmagError", PyExc_RuntimeError);
  py::register_exception<ParseError>(m, "ParseError", base.ptr());
  py::register_exception<ValidationError>(m, "ValidationError", base.ptr());
  py::register_exception<FormatError>(m, "FormatError", base.ptr());
  py::register_exception<NumericError>(m, "NumericError", base.ptr());

  m.def("grid_points", [](const std::string& spec_json) {
    return generate_grid(GridSpec::from_json(parse(spec_json))).points;
  }, py::arg("spec_json"));

  m.def("seed62_montage", [] { return montage_dict(seed62_montage()); });
  m.def("load_montage", [](const std::string& path) { return montage_dict(load_montage(path)); }, py::arg("path"));
  m.def("named_subsets", [] { return named_subset_catalog(); });
  m.def("resolve_subset", [](const std::string& id) {
    const auto canon = canonical_subset_id(id);
    if (!canon) throw ValidationError("unknown subset id: " + id);
    return select_subset(seed62_montage(), SubsetSpec::named(*canon));
  }, py::arg("id"));

  m.def("nmse", &nmse, py::arg("pred"), py::arg("target"));
  m.def("pcc", [](const Mat& p, const Mat& t) { return pcc(p, t); }, py::arg("pred"), py::arg("target"));
  m.def("snr_db", &snr_db, py::arg("pred"), py::arg("target"));

  m.def("spline_upsample", [](const Mat& x, const Positions& ld, const Positions& hd, const std::string& cfg) {
    return spline_upsample(x, ld, hd, SplineConfig::from_json(parse(cfg)));
  }, py::arg("x_ld"), py::arg("ld_positions"), py::arg("hd_positions"), py::arg("config_json") = "{}");

  m.def("read_eegd", [](const std::string& path) {
    const EegRecording r = read_eegd(path);
    py::dict d;
    d["data"] = r.data;
    d["rate_hz"] = r.rate_hz;
    d["labels"] = r.labels;
    d["subject"] = r.subject;
    d["trial"] = r.trial;
    d["split"] = r.split;
    return d;
  }, py::arg("path"));
  m.def("write_eegd", [](const Mat& data, double rate, const std::vector<std::string>& labels,
                         const std::string& path) {
    EegRecording r;
    r.data = data;
    r.rate_hz = rate;
    r.labels = labels;
    write_eegd(r, path);
  }, py::arg("data"), py::arg("rate_hz"), py::arg("labels"), py::arg("path"));

  m.def("synthesize", [](const std::string& spec_json, const std::string& out) {
    save_dataset(generate(SynthSpec::from_json(parse(spec_json))), out);
  }, py::arg("spec_json"), py::arg("out_dir"));

  py::class_<Model>(m, "Model")
      .def_static("load", [](const std::string& path) { return load_checkpoint(path).to_model(); }, py::arg("path"))
      .def_property_readonly("config_json", [](const Model& md) { return md.config().to_json().dump(); })
      .def_property_readonly("parameter_count", &Model::parameter_count)
      .def_property_readonly("ld_indices", &Model::ld_indices)
      .def_property_readonly("grid_points", [](const Model& md) { return md.grid().points; })
      .def_property_readonly("params", [](const Model& md) { return md.params(); })
      .def("centers", [](const Model& md) { return md.field().centers(); })
      .def("predict", py::overload_cast<const Mat&>(&Model::predict, py::const_), py::arg("x_ld"))
      .def("predict_at", py::overload_cast<const Mat&, const Positions&>(&Model::predict, py::const_),
           py::arg("x_ld"), py::arg("electrodes"));

  m.def("run_plan", [](const std::string& plan_json, int jobs) {
    const PlanResult r = run_plan(ExperimentPlan::from_json(parse(plan_json)), jobs, false);
    return r.to_json().dump();
  }, py::arg("plan_json"), py::arg("jobs") = 1, py::call_guard<py::gil_scoped_release>());
}

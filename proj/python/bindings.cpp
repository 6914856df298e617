#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "na/asm.hpp"
#include "na/errors.hpp"
#include "na/export.hpp"
#include "na/pipeline.hpp"

namespace py = pybind11;
using namespace na;

namespace {

py::object to_py(const nlohmann::json& j) {
  return py::module_::import("json").attr("loads")(j.dump());
}

nlohmann::json from_py(const py::object& o) {
  return nlohmann::json::parse(py::module_::import("json").attr("dumps")(o).cast<std::string>());
}

std::vector<std::pair<double, double>> box_list(const Box& b) {
  std::vector<std::pair<double, double>> out;
  for (const auto& iv : b) out.emplace_back(iv.lo, iv.hi);
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Neural abstractions: synthesis, hybridisation, reachability";

  py::register_exception<Error>(m, "Error");
  py::register_exception<SyntaxError>(m, "SyntaxError", m.attr("Error"));
  py::register_exception<ValidationError>(m, "ValidationError", m.attr("Error"));
  py::register_exception<DomainError>(m, "DomainError", m.attr("Error"));
  py::register_exception<PreconditionError>(m, "PreconditionError", m.attr("Error"));
  py::register_exception<DimensionMismatch>(m, "DimensionMismatch", m.attr("Error"));

  py::class_<DynamicalModel>(m, "Model")
      .def_readonly("name", &DynamicalModel::name)
      .def_readonly("variables", &DynamicalModel::vars)
      .def_readonly("delta", &DynamicalModel::delta)
      .def_readonly("horizon", &DynamicalModel::horizon)
      .def_property_readonly("dim", &DynamicalModel::dim)
      .def_property_readonly("domain", [](const DynamicalModel& d) { return box_list(d.domain); })
      .def_property_readonly("init", [](const DynamicalModel& d) { return box_list(d.init); })
      .def_property_readonly("bad", [](const DynamicalModel& d) { return box_list(d.bad); })
      .def("eval", &DynamicalModel::eval, py::arg("x"))
      .def("__str__", &format_model);
  m.def("parse_model", &parse_model, py::arg("text"));
  m.def("load_model", [](const std::string& p) { return load_model(p); }, py::arg("path"));

  py::class_<NeuralAbstraction>(m, "Abstraction")
      .def_property_readonly("eps", [](const NeuralAbstraction& a) { return a.bound.reported_eps(); })
      .def_property_readonly("e", [](const NeuralAbstraction& a) { return a.bound.e; })
      .def_property_readonly("dims", [](const NeuralAbstraction& a) { return a.net.dims(); })
      .def("forward", [](const NeuralAbstraction& a, const Eigen::VectorXd& x) { return a.net.forward(x); })
      .def("to_json", [](const NeuralAbstraction& a) { return to_py(abstraction_json(a)); })
      .def_static("from_json", [](const py::object& o) { return abstraction_from_json(from_py(o)); });

  m.def(
      "synthesize",
      [](const DynamicalModel& model, const std::vector<int>& hidden, double eps, std::uint64_t seed,
         double time_budget, int max_iterations, int threads) {
        CegisConfig cfg;
        cfg.seed = seed;
        cfg.time_budget = time_budget;
        cfg.max_iterations = max_iterations;
        cfg.cert.threads = threads;
        const ErrorBound target = ErrorBound::from_eps(eps, model.dim(), model.delta);
        SynthesisResult r;
        {
          py::gil_scoped_release nogil;
          r = synthesize(model, hidden, target, cfg);
        }
        py::dict out;
        out["report"] = to_py(run_report(model, hidden, target, cfg, r));
        out["abstraction"] = r.abstraction ? py::cast(*r.abstraction) : py::none();
        return out;
      },
      py::arg("model"), py::arg("hidden"), py::arg("eps"), py::arg("seed") = 0, py::arg("time_budget") = 300.0,
      py::arg("max_iterations") = 20, py::arg("threads") = 1);

  py::class_<HybridAutomaton>(m, "Automaton")
      .def_property_readonly("num_modes", [](const HybridAutomaton& h) { return h.modes.size(); })
      .def_property_readonly("num_transitions", [](const HybridAutomaton& h) { return h.transitions.size(); })
      .def("modes_at", &HybridAutomaton::modes_at, py::arg("x"), py::arg("tol") = 1e-9)
      .def("mode_flow",
           [](const HybridAutomaton& h, int k) {
             const Mode& md = h.modes.at(k);
             return py::make_tuple(md.A, md.b);
           })
      .def("to_json", [](const HybridAutomaton& h) { return to_py(automaton_json(h)); })
      .def_static("from_json", [](const py::object& o) { return automaton_from_json(from_py(o)); })
      .def("to_spaceex",
           [](const HybridAutomaton& h) {
             const SpaceExFiles f = export_spaceex(h);
             return py::make_tuple(f.xml, f.cfg);
           })
      .def_static("from_spaceex", &import_spaceex, py::arg("xml"), py::arg("cfg"))
      .def("svg", [](const HybridAutomaton& h) { return plot_svg(h, nullptr); });
  m.def("build_automaton",
        [](const NeuralAbstraction& a, const DynamicalModel& model) { return build_automaton(a, model); },
        py::arg("abstraction"), py::arg("model"));

  py::class_<Flowpipe>(m, "Flowpipe")
      .def_property_readonly("verdict", [](const Flowpipe& f) { return to_string(f.verdict); })
      .def_property_readonly("num_segments", [](const Flowpipe& f) { return f.segments.size(); })
      .def("covers", &Flowpipe::covers, py::arg("t"), py::arg("x"), py::arg("tol") = 1e-9)
      .def("csv", [](const Flowpipe& f) { return flowpipe_csv(f); });
  m.def(
      "reach",
      [](const HybridAutomaton& h, double step, const std::string& method) {
        ReachConfig rc;
        rc.step = step;
        if (method == "branching") rc.method = ReachMethod::Branching;
        else if (method != "stepped") throw PreconditionError("method must be stepped or branching");
        py::gil_scoped_release nogil;
        return reach(h, rc);
      },
      py::arg("automaton"), py::arg("step") = 0.01, py::arg("method") = "stepped");

  m.def(
      "simulate",
      [](const DynamicalModel& model, const Eigen::VectorXd& x0, double T, double h) {
        const Trajectory tr = simulate_concrete(model, x0, T, h);
        return py::make_tuple(tr.t, tr.x);
      },
      py::arg("model"), py::arg("x0"), py::arg("T"), py::arg("h") = 1e-4);

  m.def(
      "run_pipeline",
      [](const DynamicalModel& model, const std::vector<int>& hidden, double eps, std::uint64_t seed,
         int seed_retries, double time_budget) {
        PipelineConfig pc;
        pc.hidden = hidden;
        pc.eps = eps;
        pc.seed = seed;
        pc.seed_retries = seed_retries;
        pc.time_budget = time_budget;
        PipelineResult r;
        {
          py::gil_scoped_release nogil;
          r = run_pipeline(model, pc);
        }
        py::dict out;
        out["verdict"] = to_string(r.verdict);
        out["report"] = to_py(r.report);
        out["timing"] = to_py(r.timing);
        out["automaton"] = r.automaton ? py::cast(*r.automaton) : py::none();
        out["flowpipe"] = r.flowpipe ? py::cast(*r.flowpipe) : py::none();
        return out;
      },
      py::arg("model"), py::arg("hidden"), py::arg("eps") = 0.1, py::arg("seed") = 0, py::arg("seed_retries") = 0,
      py::arg("time_budget") = 600.0);

  m.def(
      "asm_bound",
      [](const DynamicalModel& model, int g) {
        const SimplicialMesh mesh = build_mesh(model, g);
        AsmResult r;
        {
          py::gil_scoped_release nogil;
          r = certify_asm(model, mesh, nullptr, CertBudget{});
        }
        return py::make_tuple(mesh.partitions(), r.eps());
      },
      py::arg("model"), py::arg("g"));
}

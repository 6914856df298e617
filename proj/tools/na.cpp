#include <CLI11.hpp>
#include <chrono>
#include <cstdio>
#include <cxxabi.h>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "na/asm.hpp"
#include "na/errors.hpp"
#include "na/export.hpp"
#include "na/pipeline.hpp"

namespace fs = std::filesystem;
using namespace na;

namespace {

struct Globals {
  std::uint64_t seed = 0;
  double timeout = 600.0;
  int threads = 1;
  std::string out = ".";
  std::string models = NA_MODELS_DIR;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw ValidationError("cannot open " + p.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void dump(const fs::path& p, const std::string& text) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream o(p);
  if (!o) throw ValidationError("cannot write " + p.string());
  o << text;
}

void dump(const fs::path& p, const nlohmann::json& j) { dump(p, j.dump(2) + "\n"); }

// a path, or a benchmark name looked up in the models directory
DynamicalModel resolve_model(const std::string& arg, const Globals& g) {
  if (fs::exists(arg)) return load_model(arg);
  const fs::path p = fs::path(g.models) / (arg + ".model");
  if (fs::exists(p)) return load_model(p);
  return load_model(arg);  // raises the usual error
}

std::vector<int> arch_or_default(const std::vector<int>& arch, const std::string& name) {
  if (!arch.empty()) return arch;
  for (const auto& b : table1())
    if (b.name == name) return b.hidden;
  return {12};
}

CegisConfig cegis_config(const Globals& g) {
  CegisConfig c;
  c.seed = g.seed;
  c.time_budget = g.timeout;
  c.cert.threads = g.threads;
  return c;
}

void write_run(const fs::path& dir, const PipelineResult& r) {
  dump(dir / "report.json", r.report);
  dump(dir / "timing.json", r.timing);
  if (r.abstraction) dump(dir / "abstraction.json", abstraction_json(*r.abstraction));
  if (r.automaton) {
    dump(dir / "automaton.json", automaton_json(*r.automaton));
    dump(dir / "plot.svg", plot_svg(*r.automaton, r.flowpipe ? &*r.flowpipe : nullptr));
  }
  if (r.flowpipe) dump(dir / "flowpipe.csv", flowpipe_csv(*r.flowpipe));
}

std::string error_name(const std::exception& e) {
  int status = 0;
  char* d = abi::__cxa_demangle(typeid(e).name(), nullptr, nullptr, &status);
  std::string s = status == 0 && d ? d : typeid(e).name();
  std::free(d);
  if (s.rfind("na::", 0) == 0) s = s.substr(4);
  return s;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Neural abstractions of nonlinear systems: synthesis, hybridisation and reachability"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--seed", g.seed, "Random seed");
  app.add_option("--timeout", g.timeout, "Seconds per synthesis run (and per pipeline run)");
  app.add_option("--threads", g.threads, "Certifier worker threads");
  app.add_option("--json-out", g.out, "Output directory");
  app.add_option("--models", g.models, "Directory of benchmark model files");

  std::string model_arg, abs_arg, ha_arg;
  std::vector<int> arch;
  double eps = 0.1;
  bool do_tighten = false, table = false, with_reach = false;
  int retries = 0, refine = 8;
  std::vector<int> grids{2, 4, 8};
  std::string method = "stepped";
  double step = 0.01;

  auto* syn = app.add_subcommand("synthesize", "Learn and certify a neural abstraction");
  syn->add_option("model", model_arg, "Model file or benchmark name")->required();
  syn->add_option("--arch", arch, "Hidden layer widths")->delimiter(',');
  syn->add_option("--eps", eps, "Target error (2-norm)");
  syn->add_flag("--tighten", do_tighten, "Keep shrinking the target after each success");

  auto* tr = app.add_subcommand("translate", "Neural abstraction to hybrid automaton");
  tr->add_option("abstraction", abs_arg, "abstraction.json")->required();
  tr->add_option("model", model_arg, "Model file or benchmark name")->required();

  auto* ver = app.add_subcommand("verify", "Reachability and safety check of an automaton");
  ver->add_option("automaton", ha_arg, "automaton.json")->required();
  ver->add_option("--method", method, "stepped or branching")->check(CLI::IsMember({"stepped", "branching"}));
  ver->add_option("--step", step, "Time step");

  auto* run = app.add_subcommand("run", "Synthesis, translation and verification end to end");
  run->add_option("model", model_arg, "Model file or benchmark name");
  run->add_option("--arch", arch, "Hidden layer widths")->delimiter(',');
  run->add_option("--eps", eps, "Initial target error (2-norm)");
  run->add_option("--retries", retries, "Extra seeds to try");
  run->add_option("--refine", refine, "Tightening rounds after an unknown verdict");
  run->add_flag("--table1", table, "Run the six benchmarks");

  auto* as = app.add_subcommand("asm", "Simplicial-mesh baseline");
  as->add_option("model", model_arg, "Model file or benchmark name")->required();
  as->add_option("--g", grids, "Grid resolutions")->delimiter(',');

  auto* ex = app.add_subcommand("export", "SpaceEx model and configuration");
  ex->add_option("automaton", ha_arg, "automaton.json")->required();

  auto* pl = app.add_subcommand("plot", "SVG plot of an automaton");
  pl->add_option("automaton", ha_arg, "automaton.json")->required();
  pl->add_flag("--reach", with_reach, "Overlay the flowpipe");

  for (auto* sub : app.get_subcommands({})) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    const fs::path out = g.out;
    if (*syn) {
      const DynamicalModel m = resolve_model(model_arg, g);
      const std::vector<int> hidden = arch_or_default(arch, m.name);
      CegisConfig cfg = cegis_config(g);
      if (do_tighten) {
        const TighteningResult t = tighten(m, hidden, eps, cfg);
        for (const auto& r : t.rounds)
          std::printf("target %.6g: %s\n", r.trace.empty() ? 0.0 : eps, r.success() ? "certified" : to_string(r.failure).c_str());
        if (!t.best) return 1;
        dump(out / "abstraction.json", abstraction_json(*t.best));
        std::printf("eps %.6g\n", t.best->bound.reported_eps());
        return 0;
      }
      const ErrorBound target = ErrorBound::from_eps(eps, m.dim(), m.delta);
      const SynthesisResult r = synthesize(m, hidden, target, cfg);
      dump(out / "report.json", run_report(m, hidden, target, cfg, r));
      dump(out / "timing.json", timing_report(r));
      if (!r.success()) {
        std::printf("failed: %s after %zu iterations\n", to_string(r.failure).c_str(), r.trace.size());
        return 1;
      }
      dump(out / "abstraction.json", abstraction_json(*r.abstraction));
      std::printf("certified eps %.6g after %zu iterations\n", r.abstraction->bound.reported_eps(), r.trace.size());
      return 0;
    }
    if (*tr) {
      const DynamicalModel m = resolve_model(model_arg, g);
      const NeuralAbstraction a = abstraction_from_json(nlohmann::json::parse(slurp(abs_arg)));
      const HybridAutomaton h = build_automaton(a, m);
      dump(out / "automaton.json", automaton_json(h));
      std::printf("%zu modes, %zu transitions\n", h.modes.size(), h.transitions.size());
      return 0;
    }
    if (*ver) {
      const HybridAutomaton h = automaton_from_json(nlohmann::json::parse(slurp(ha_arg)));
      ReachConfig rc;
      rc.method = method == "branching" ? ReachMethod::Branching : ReachMethod::Stepped;
      rc.step = step;
      const auto t0 = std::chrono::steady_clock::now();
      const Flowpipe fp = reach(h, rc);
      const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      dump(out / "flowpipe.csv", flowpipe_csv(fp));
      dump(out / "verify.json", nlohmann::json{{"verdict", to_string(fp.verdict)},
                                               {"segments", fp.segments.size()},
                                               {"complete", fp.complete},
                                               {"diagnostics", fp.diagnostics}});
      dump(out / "timing.json", nlohmann::json{{"safety_s", secs}});
      std::printf("%s\n", to_string(fp.verdict).c_str());
      return fp.verdict == SafetyVerdict::Safe ? 0 : 1;
    }
    if (*run) {
      PipelineConfig pc;
      pc.seed = g.seed;
      pc.seed_retries = retries;
      pc.refine_rounds = refine;
      pc.time_budget = g.timeout;
      pc.cegis = cegis_config(g);
      if (table) {
        std::printf("%-8s %5s %-10s %6s %-8s %8s\n", "model", "T", "arch", "modes", "verdict", "seconds");
        nlohmann::json rows = nlohmann::json::array();
        bool all_safe = true;
        for (const auto& b : table1()) {
          const DynamicalModel m = resolve_model(b.name, g);
          pc.hidden = b.hidden;
          pc.eps = b.eps;
          const PipelineResult r = run_pipeline(m, pc);
          write_run(out / b.name, r);
          std::string a;
          for (int w : b.hidden) a += (a.empty() ? "" : ",") + std::to_string(w);
          const std::string modes = r.automaton ? std::to_string(r.automaton->modes.size()) : "-";
          std::printf("%-8s %5g %-10s %6s %-8s %8.1f\n", b.name.c_str(), m.horizon, ("[" + a + "]").c_str(),
                      modes.c_str(), to_string(r.verdict).c_str(), r.timing["total_s"].get<double>());
          std::fflush(stdout);
          rows.push_back(r.report);
          all_safe &= r.verdict == PipelineVerdict::Safe;
        }
        dump(out / "table1.json", rows);
        return all_safe ? 0 : 1;
      }
      if (model_arg.empty()) throw PreconditionError("run: a model is required unless --table1 is given");
      const DynamicalModel m = resolve_model(model_arg, g);
      pc.hidden = arch_or_default(arch, m.name);
      pc.eps = eps;
      const PipelineResult r = run_pipeline(m, pc);
      write_run(out, r);
      std::printf("%s\n", to_string(r.verdict).c_str());
      return r.verdict == PipelineVerdict::Safe ? 0 : 1;
    }
    if (*as) {
      const DynamicalModel m = resolve_model(model_arg, g);
      CertBudget cb;
      cb.threads = g.threads;
      std::vector<AsmRow> rows;
      for (int gr : grids) {
        const auto t0 = std::chrono::steady_clock::now();
        const SimplicialMesh mesh = build_mesh(m, gr);
        const AsmResult r = certify_asm(m, mesh, nullptr, cb);
        rows.push_back({gr, mesh.partitions(),  r.eps(),
                        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()});
      }
      const std::string csv = asm_csv(rows);
      dump(out / "asm.csv", csv);
      std::printf("%s", csv.c_str());
      return 0;
    }
    if (*ex) {
      const HybridAutomaton h = automaton_from_json(nlohmann::json::parse(slurp(ha_arg)));
      const SpaceExFiles f = export_spaceex(h);
      dump(out / "automaton.xml", f.xml);
      dump(out / "automaton.cfg", f.cfg);
      return 0;
    }
    if (*pl) {
      const HybridAutomaton h = automaton_from_json(nlohmann::json::parse(slurp(ha_arg)));
      std::optional<Flowpipe> fp;
      if (with_reach) fp = reach(h);
      dump(out / "plot.svg", plot_svg(h, fp ? &*fp : nullptr));
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << error_name(e) << ": " << e.what() << "\n";
    return 2;
  }
  return 2;
}

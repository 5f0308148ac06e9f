// Command-line front end: synthesize, simulate, batch and check.
// Exit codes: 0 success, 2 synthesis infeasible, 3 model invalid, 4 I/O.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "siso/bounds.hpp"
#include "siso/errors.hpp"
#include "siso/harness.hpp"
#include "siso/observer.hpp"
#include "siso/synthesis.hpp"
#include "siso/transform.hpp"

using namespace siso;

namespace {

constexpr int kExitInfeasible = 2;
constexpr int kExitModel = 3;
constexpr int kExitIo = 4;

struct Overrides {
  std::string cls;
  bool convergent = false;
  std::vector<double> alpha_grid, eps_grid;
  bool no_refine = false;
  std::string policy;
  bool verbose = false;
};

Scenario load(const std::string& path, const Overrides& o) {
  Scenario sc = load_scenario(path);
  if (!o.cls.empty()) {
    if (!sc.plant.classes.count(o.cls))
      throw InputValidation("class '" + o.cls + "' is not declared for scenario '" + sc.name + "'");
    sc.cls = o.cls;
  }
  if (o.convergent) sc.convergent = true;
  if (!o.alpha_grid.empty()) sc.synthesis.alpha_grid = o.alpha_grid;
  if (!o.eps_grid.empty()) sc.synthesis.eps_grid = o.eps_grid;
  if (o.no_refine) sc.synthesis.refine = false;
  sc.synthesis.verbose = o.verbose;
  if (o.policy == "synthesize") sc.policy = DesignPolicy::Synthesize;
  else if (o.policy == "supplied") sc.policy = DesignPolicy::Supplied;
  else if (o.policy == "synthesize_or_supplied") sc.policy = DesignPolicy::SynthesizeOrSupplied;
  return sc;
}

void print_matrix(const char* name, const Matrix& M) {
  std::printf("%s =\n", name);
  for (Eigen::Index i = 0; i < M.rows(); ++i) {
    std::printf("  ");
    for (Eigen::Index j = 0; j < M.cols(); ++j) std::printf(" % .6f", M(i, j));
    std::printf("\n");
  }
}

int cmd_synthesize(const std::string& path, const Overrides& o) {
  const Scenario sc = load(path, o);
  std::printf("scenario %s, class %s, %s search\n", sc.name.c_str(), sc.cls.c_str(),
              sc.convergent ? "convergent" : "H-infinity");
  const SynthesisResult r = synthesize(sc);
  std::printf("alpha = %.4f  eps1 = %.4g  eps2 = %.4g\n", r.alpha, r.eps1, r.eps2);
  std::printf("rho = %.6f\n", r.rho);
  if (!r.branch.empty()) std::printf("branch %s  kappa1 = %.6g  kappa2 = %.6g\n", r.branch.c_str(), r.kappa1, r.kappa2);
  std::printf("theta1 = %.6f\n", theta1_of(r.P));
  std::printf("solver calls = %d\n", r.solves);
  std::printf("unreduced dissipation margin = %.3g\n", r.unreduced_margin);
  if (r.unreduced_margin < -1e-6)
    std::fprintf(stderr, "warning: the certificate does not satisfy the unreduced dissipation inequality; "
                         "the LMI reduction is not exact for this class\n");
  print_matrix("P", r.P);
  print_matrix("L_tilde", r.L_tilde);
  return 0;
}

void report_design(const ObserverDesign& d) {
  std::printf("design %s: rho = %.6g, theta1 = %.6g, theta2 = %.6g, beta = %.6g\n", d.source.c_str(), d.rho,
              d.radii.theta1, d.radii.theta2, d.radii.beta);
}

int cmd_simulate(const std::string& path, const Overrides& o, std::uint64_t seed, const std::string& out) {
  const Scenario sc = load(path, o);
  const ObserverDesign d = design_for(sc);
  report_design(d);
  const Trace t = simulate(sc, d, seed);
  std::filesystem::create_directories(out);
  export_trace_csv(t, (std::filesystem::path(out) / "trace.csv").string());
  export_trace_svg(t, out);
  std::printf("steps = %d, containment violations = %d\n", static_cast<int>(t.rows.size()) - 1, t.violations);
  return 0;
}

int cmd_batch(const std::string& path, const Overrides& o, int runs, std::uint64_t master, const std::string& out) {
  const Scenario sc = load(path, o);
  const ObserverDesign d = design_for(sc);
  report_design(d);
  const BatchSummary s = run_batch(sc, d, runs, master);
  std::filesystem::create_directories(out);
  export_summary_csv(s, (std::filesystem::path(out) / "summary.csv").string());
  export_summary_svg(s, out);
  int bad_runs = 0;
  for (int v : s.violations_per_run) bad_runs += v > 0;
  std::printf("runs = %d, containment violations = %d (in %d runs)\n", s.runs, s.violations, bad_runs);
  return 0;
}

int cmd_check(const std::string& path, const Overrides& o) {
  const Scenario sc = load(path, o);
  const NonlinearSystem s = sc.system();
  const TransformedSystem T = transform_system(s);
  std::printf("scenario %s, class %s: n = %d, l = %d, p = %d, p_H = %d\n", sc.name.c_str(), sc.cls.c_str(), s.n, s.l,
              s.p, static_cast<int>(T.p_H));
  std::printf("rank condition rk(C2 G2) = p - p_H: %s\n", T.rank_condition ? "holds" : "fails");

  const Matrix* A_lin = sc.plant.linear_part ? &*sc.plant.linear_part : nullptr;
  if (const auto* lpv = std::get_if<ClassLPV>(&s.class_spec)) {
    const bool ok = lpv_strong_detectability_necessary(lpv->A, s.G, s.C, s.H);
    std::printf("constituent strong detectability (necessary): %s\n", ok ? "holds" : "fails");
  } else if (A_lin) {
    const InvariantZeros z = invariant_zeros(*A_lin, s.G, s.C, s.H);
    std::printf("linear part invariant zeros:");
    if (z.identically_deficient) std::printf(" pencil rank deficient everywhere");
    for (const auto& c : z.zeros) std::printf(" %.6g%+.6gi", c.real(), c.imag());
    std::printf("\nlinear part strongly detectable: %s\n",
                strong_detectability(*A_lin, s.G, s.C, s.H) ? "yes" : "no");
  }
  if (!T.rank_condition) return 0;

  const FixedGains g = fixed_gains(T, s.W);
  const MultiplierBlocks mb = class_multiplier_blocks(s.class_spec, s.n);
  const SynthesisResult st = stability_search(T, g, mb, sc.synthesis);
  if (st.feasible)
    std::printf("quadratic stability: feasible up to alpha = %.4f\n", st.alpha);
  else
    std::printf("quadratic stability: infeasible for every alpha in [0,1]\n");
  const ProbeVerdict pv = instability_probe(T, g, mb, {0.1, 0.3, 0.5, 0.7, 0.9}, sc.synthesis);
  std::printf("instability probe: %s\n", pv.verdict().c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Simultaneous state and unknown-input set-valued observers"};
  app.require_subcommand(1);

  Overrides o;
  std::string scenario, out = "out";
  std::uint64_t seed = 1, master = 1;
  int runs = 50;

  auto add_common = [&](CLI::App* c) {
    c->add_option("scenario", scenario, "scenario JSON file or builtin name")->required();
    c->add_option("--class", o.cls, "function class: 0, I, II or III");
    c->add_option("--policy", o.policy, "design policy override")
        ->check(CLI::IsMember({"synthesize", "supplied", "synthesize_or_supplied"}));
    c->add_flag("--convergent", o.convergent, "use the convergent-bound variant");
    c->add_option("--alpha-grid", o.alpha_grid, "coarse alpha grid")->delimiter(',');
    c->add_option("--eps-grid", o.eps_grid, "epsilon grid")->delimiter(',');
    c->add_flag("--no-refine", o.no_refine, "skip the fine alpha pass");
    c->add_flag("-v,--verbose", o.verbose, "log every grid point");
  };
  auto* syn = app.add_subcommand("synthesize", "H-infinity gain design");
  add_common(syn);
  auto* sim = app.add_subcommand("simulate", "one simulated run with CSV and SVG output");
  add_common(sim);
  sim->add_option("--seed", seed, "noise and initial-state seed");
  sim->add_option("--out", out, "output directory");
  auto* bat = app.add_subcommand("batch", "seeded batch with box-plot summary");
  add_common(bat);
  bat->add_option("--runs", runs, "number of runs")->check(CLI::PositiveNumber);
  bat->add_option("--master-seed", master, "master seed");
  bat->add_option("--out", out, "output directory");
  auto* chk = app.add_subcommand("check", "rank, detectability, stability and probe report");
  add_common(chk);

  CLI11_PARSE(app, argc, argv);

  try {
    if (syn->parsed()) return cmd_synthesize(scenario, o);
    if (sim->parsed()) return cmd_simulate(scenario, o, seed, out);
    if (bat->parsed()) return cmd_batch(scenario, o, runs, master, out);
    if (chk->parsed()) return cmd_check(scenario, o);
  } catch (const SynthesisInfeasible& e) {
    std::cerr << "synthesis infeasible: " << e.what() << "\n";
    return kExitInfeasible;
  } catch (const DesignImpossible& e) {
    std::cerr << "synthesis infeasible: " << e.what() << "\n";
    return kExitInfeasible;
  } catch (const ModelInvalid& e) {
    std::cerr << "model invalid: " << e.what() << "\n";
    return kExitModel;
  } catch (const InputValidation& e) {
    std::cerr << "model invalid: " << e.what() << "\n";
    return kExitModel;
  } catch (const IoError& e) {
    std::cerr << "I/O error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "I/O error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

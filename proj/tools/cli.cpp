#include "cli.hpp"

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "CLI11.hpp"
#include "opfr/generate.hpp"
#include "opfr/relax.hpp"

namespace opfr::cli {

namespace {

using Json = nlohmann::ordered_json;

Json complex_json(const Complex& c) { return Json::array({c.real(), c.imag()}); }

Json cvec_json(const CVec& v) {
  Json a = Json::array();
  for (int i = 0; i < v.size(); ++i) a.push_back(complex_json(v(i)));
  return a;
}

Json rvec_json(const RVec& v) {
  Json a = Json::array();
  for (int i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

/// --tol beats OPFRELAX_TOL beats the per-command default.
double resolve_tol(const RunConfig& cfg, double command_default) {
  if (cfg.tol > 0.0) return cfg.tol;
  if (const char* env = std::getenv("OPFRELAX_TOL")) {
    char* end = nullptr;
    const double v = std::strtod(env, &end);
    if (end != env && std::isfinite(v) && v > 0.0) return v;
  }
  return command_default;
}

Network load_network(const RunConfig& cfg) {
  std::ifstream file(cfg.case_path);
  if (!file) throw ParseError("cannot open case file: " + cfg.case_path);
  std::ostringstream text;
  text << file.rdbuf();
  return parse_case(text.str());
}

CostSpec make_cost(const RunConfig& cfg, const Network& net) {
  if (cfg.cost == "gen") return CostSpec::generation(RVec::Ones(net.n_bus()));
  return CostSpec::loss();
}

/// Write the report to --out (if given) or the stream; returns false when
/// the output file cannot be written.
bool emit(const Json& report, const RunConfig& cfg, std::ostream& out,
          std::ostream& err) {
  const std::string text = report.dump(cfg.pretty ? 2 : -1) + "\n";
  if (cfg.out_path.empty()) {
    out << text;
    return true;
  }
  std::ofstream file(cfg.out_path);
  if (!file) {
    err << "cannot write report to " << cfg.out_path << "\n";
    return false;
  }
  file << text;
  return true;
}

std::string status_name(socp::SolveStatus s) {
  switch (s) {
    case socp::SolveStatus::optimal:
      return "optimal";
    case socp::SolveStatus::infeasible:
      return "infeasible";
    case socp::SolveStatus::max_iter:
      return "max_iter";
  }
  return "unknown";
}

/// Loads-only hypothesis behind the DistFlow bound lemmas: every non-slack
/// injection sits in the closed third quadrant.
bool loads_only(const CVec& s) {
  for (int j = 1; j < s.size(); ++j)
    if (s(j).real() > 1e-12 || s(j).imag() > 1e-12) return false;
  return true;
}

int cmd_pf(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  const Network net = load_network(cfg);
  if (!net.is_radial()) {
    err << "pf: the radial power-flow sweep requires a tree network ("
        << cfg.case_path << " is meshed)\n";
    return kExitHypothesis;
  }
  const double tol = resolve_tol(cfg, 1e-8);
  const CVec s = fixed_injections(net);

  Json report;
  report["command"] = "pf";
  report["case"] = cfg.case_path;
  report["n_bus"] = net.n_bus();
  report["n_line"] = net.n_line();
  report["tol"] = tol;

  BranchFlowState x;
  try {
    x = solve_radial(net, s);
  } catch (const ConvergenceError& e) {
    report["converged"] = false;
    report["message"] = e.what();
    emit(report, cfg, out, err);
    return kExitNoConverge;
  }
  const DirectedNetwork dnet = orient(net, OrientMode::away_from_root);
  const TreeIndex tree = spanning_tree(dnet);
  const double sweep_residual = distflow_residual(dnet, x).max_abs();
  const ComplexState cs = recover_angles(dnet, x, tree);
  const double recovery_residual = bfm_residual(dnet, cs).max_abs();

  RVec theta(net.n_bus());
  for (int j = 0; j < net.n_bus(); ++j) theta(j) = std::arg(cs.V[j]);
  double loss = 0.0;
  for (int e = 0; e < dnet.n_edge(); ++e)
    loss += dnet.edges[e].z.real() * x.ell(e);

  report["converged"] = sweep_residual <= tol && recovery_residual <= tol;
  report["sweep_residual"] = sweep_residual;
  report["recovery_residual"] = recovery_residual;
  report["v"] = rvec_json(x.v);
  report["theta"] = rvec_json(theta);
  report["V"] = cvec_json(cs.V.values());
  report["S"] = cvec_json(x.S);
  report["ell"] = rvec_json(x.ell);
  report["s"] = cvec_json(x.s);
  report["loss"] = loss;
  if (!emit(report, cfg, out, err)) return kExitUsage;
  return report["converged"].get<bool>() ? kExitOk : kExitNoConverge;
}

int cmd_relax(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  const Network net = load_network(cfg);
  const Model model = cfg.model == "bim" ? Model::bim : Model::bfm;
  const CostSpec cost = make_cost(cfg, net);
  socp::SolverOptions opts;
  opts.feas_tol = opts.gap_tol = resolve_tol(cfg, 1e-8);

  const OpfResult r = solve_opf(net, model, cost, opts);

  Json report;
  report["command"] = "relax";
  report["case"] = cfg.case_path;
  report["model"] = cfg.model;
  report["cost"] = cfg.cost;
  report["tol"] = opts.gap_tol;
  report["status"] = status_name(r.solution.status);
  report["iterations"] = r.solution.iterations;
  report["message"] = r.solution.message;
  if (r.solution.status != socp::SolveStatus::optimal) {
    emit(report, cfg, out, err);
    return r.solution.status == socp::SolveStatus::infeasible
               ? kExitOk
               : kExitNoConverge;
  }

  report["objective"] = r.objective;
  report["dual_objective"] = r.solution.dual_objective;
  report["kkt"] = {{"primal", r.solution.residuals.primal},
                   {"dual", r.solution.residuals.dual},
                   {"gap", r.solution.residuals.gap}};
  report["verdict"] = ExactnessReport::verdict_name(r.exactness.verdict);
  report["radial"] = r.exactness.radial;
  report["cone_gap"] = rvec_json(r.exactness.cone_gap);
  int tight = 0;
  for (const bool t : r.exactness.tight) tight += t ? 1 : 0;
  report["tight_edges"] = tight;
  report["n_edges"] = static_cast<int>(r.exactness.tight.size());
  if (!r.exactness.radial) {
    report["cycle"] = {{"satisfied", r.exactness.cycle.satisfied},
                       {"max_defect", r.exactness.cycle.max_defect()}};
  }
  report["v"] = rvec_json(r.x.v);
  report["S"] = cvec_json(r.x.S);
  report["ell"] = rvec_json(r.x.ell);
  report["s"] = cvec_json(r.x.s);
  if (r.recovered) {
    RVec theta(net.n_bus());
    for (int j = 0; j < net.n_bus(); ++j) theta(j) = std::arg(r.recovered->V[j]);
    const DirectedNetwork dnet =
        orient(net, net.is_radial() ? OrientMode::away_from_root
                                    : OrientMode::as_listed);
    report["recovered"] = {
        {"V", cvec_json(r.recovered->V.values())},
        {"theta", rvec_json(theta)},
        {"bfm_residual", bfm_residual(dnet, *r.recovered).max_abs()}};
  } else {
    report["recovered"] = nullptr;
  }
  if (!emit(report, cfg, out, err)) return kExitUsage;
  return kExitOk;
}

/// One bound-check instance folded into the aggregate report.
struct BoundsAccumulator {
  int instances = 0;
  int out_of_hypothesis = 0;
  long checked_edges = 0;
  long checked_buses = 0;
  long flow_violations = 0;
  long voltage_violations = 0;
  double max_identity_residual = 0.0;
  double max_flow_gap = 0.0;
  double max_voltage_gap = 0.0;
  Json detail = Json::array();

  void add(int index, const Network& net, const CVec& s, double slack) {
    const BranchFlowState x = solve_radial(net, s);
    const LinearState lin = solve_linear_distflow(net, s);
    const DirectedNetwork dnet = orient(net, OrientMode::away_from_root);
    const TreeIndex tree = spanning_tree(dnet);
    const BoundReport rep = check_bounds(dnet, x, lin, tree, slack);
    const bool hypothesis = loads_only(s);

    ++instances;
    checked_edges += dnet.n_edge();
    checked_buses += net.n_bus();
    flow_violations += static_cast<long>(rep.flow_violations.size());
    voltage_violations += static_cast<long>(rep.voltage_violations.size());
    max_identity_residual =
        std::max(max_identity_residual, rep.max_identity_residual());
    double flow_gap = 0.0, voltage_gap = 0.0;
    for (int e = 0; e < dnet.n_edge(); ++e)
      flow_gap = std::max({flow_gap, std::abs(rep.flow_gap_re(e)),
                           std::abs(rep.flow_gap_im(e))});
    for (int j = 0; j < net.n_bus(); ++j)
      voltage_gap = std::max(voltage_gap, std::abs(rep.voltage_gap(j)));
    max_flow_gap = std::max(max_flow_gap, flow_gap);
    max_voltage_gap = std::max(max_voltage_gap, voltage_gap);
    if (!hypothesis) ++out_of_hypothesis;

    if (!rep.ok() || !hypothesis) {
      Json d;
      d["instance"] = index;
      d["hypothesis_satisfied"] = hypothesis;
      d["flow_violations"] = rep.flow_violations;
      d["voltage_violations"] = rep.voltage_violations;
      d["note"] = hypothesis
                      ? "bound violated under the loads-only hypothesis"
                      : "out of hypothesis: injections include generation; "
                        "violations here do not contradict the bounds";
      detail.push_back(std::move(d));
    }
  }
};

int cmd_bounds(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  const double slack = resolve_tol(cfg, 1e-9);
  BoundsAccumulator acc;

  Json report;
  report["command"] = "bounds";
  report["slack"] = slack;

  if (!cfg.case_path.empty()) {
    const Network net = load_network(cfg);
    if (!net.is_radial()) {
      err << "bounds: the DistFlow bound lemmas apply to radial networks ("
          << cfg.case_path << " is meshed)\n";
      return kExitHypothesis;
    }
    report["mode"] = "case";
    report["case"] = cfg.case_path;
    try {
      acc.add(0, net, fixed_injections(net), slack);
    } catch (const ConvergenceError& e) {
      report["converged"] = false;
      report["message"] = e.what();
      emit(report, cfg, out, err);
      return kExitNoConverge;
    }
  } else {
    report["mode"] = "monte-carlo";
    report["seed"] = cfg.seed;
    report["instances_requested"] = cfg.instances;
    if (cfg.instances < 1) {
      err << "bounds: --instances must be at least 1\n";
      return kExitUsage;
    }
    Rng rng(cfg.seed);
    for (int i = 0; i < cfg.instances; ++i) {
      const Network net = random_tree(rng, rng.uniform_int(3, 24));
      acc.add(i, net, fixed_injections(net), slack);
    }
  }

  report["instances"] = acc.instances;
  report["checked_edges"] = acc.checked_edges;
  report["checked_buses"] = acc.checked_buses;
  report["flow_violations"] = acc.flow_violations;
  report["voltage_violations"] = acc.voltage_violations;
  report["out_of_hypothesis_instances"] = acc.out_of_hypothesis;
  report["max_identity_residual"] = acc.max_identity_residual;
  report["max_flow_gap"] = acc.max_flow_gap;
  report["max_voltage_gap"] = acc.max_voltage_gap;
  const bool all_tight =
      acc.max_flow_gap <= slack && acc.max_voltage_gap <= slack;
  report["all_tight"] = all_tight;
  if (all_tight) report["note"] = "all bounds tight";
  report["ok"] =
      acc.flow_violations == 0 && acc.voltage_violations == 0;
  report["detail"] = acc.detail;
  if (!emit(report, cfg, out, err)) return kExitUsage;
  return kExitOk;
}

std::vector<int> parse_order(const std::string& spec) {
  if (spec.empty()) return {};
  std::vector<int> order;
  if (std::filesystem::exists(spec)) {
    std::ifstream file(spec);
    Json arr = Json::parse(file);
    if (!arr.is_array())
      throw ParseError("--order file must hold a JSON array of bus ids");
    for (const auto& v : arr) order.push_back(v.get<int>());
    return order;
  }
  std::stringstream ss(spec);
  std::string item;
  while (std::getline(ss, item, ',')) {
    size_t pos = 0;
    order.push_back(std::stoi(item, &pos));
    if (pos != item.size())
      throw ParseError("--order entries must be integers: '" + item + "'");
  }
  return order;
}

int cmd_chordal(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  const Network net = load_network(cfg);
  const std::vector<int> order = parse_order(cfg.order);
  const ChordalExtension ext = chordal_extension(net, order);
  const SdpStandardForm sdp = sdp_standard_form(ext, net, make_cost(cfg, net));

  Json report;
  report["command"] = "chordal";
  report["case"] = cfg.case_path;
  report["n_nodes"] = ext.n_nodes;
  report["original_edges"] = ext.original_edges;
  report["fill_edges"] = ext.fill_edges;
  report["n_fill"] = ext.n_fill();
  report["elimination_order"] = ext.elimination_order;
  report["cliques"] = ext.maximal_cliques;
  Json overlaps = Json::array();
  for (const auto& o : ext.overlaps)
    overlaps.push_back(
        {{"a", o.clique_a}, {"b", o.clique_b}, {"shared", o.shared}});
  report["overlaps"] = overlaps;
  report["decoupling_count"] = sdp.decoupling_count();
  report["block_sizes"] = sdp.block_sizes;
  report["sdp"] = Json::parse(sdp.to_json());
  if (!emit(report, cfg, out, err)) return kExitUsage;
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out,
        std::ostream& err) {
  RunConfig cfg;
  CLI::App app{"OPF convex relaxation toolkit"};
  app.require_subcommand(1);

  const auto add_common = [&cfg](CLI::App* sub, bool case_required) {
    auto* c = sub->add_option("--case", cfg.case_path, "network case file");
    if (case_required) c->required();
    sub->add_option("--tol", cfg.tol, "numerical tolerance")
        ->check(CLI::PositiveNumber);
    sub->add_option("--out", cfg.out_path, "write the JSON report here");
    sub->add_flag("--pretty", cfg.pretty, "indent the JSON report");
  };

  auto* pf = app.add_subcommand("pf", "radial power flow + angle recovery");
  add_common(pf, true);

  auto* relax = app.add_subcommand(
      "relax", "SOCP relaxation: solve, exactness check, recovery");
  add_common(relax, true);
  relax->add_option("--model", cfg.model, "relaxation model")
      ->check(CLI::IsMember({"bfm", "bim"}));
  relax->add_option("--cost", cfg.cost, "objective")
      ->check(CLI::IsMember({"loss", "gen"}));

  auto* bounds = app.add_subcommand(
      "bounds", "DistFlow bound lemmas: case or Monte-Carlo check");
  add_common(bounds, false);
  bounds->add_option("--seed", cfg.seed, "Monte-Carlo RNG seed");
  bounds->add_option("--instances", cfg.instances,
                     "number of Monte-Carlo instances");

  auto* chordal = app.add_subcommand(
      "chordal", "chordal extension, cliques, decoupled SDP form");
  add_common(chordal, true);
  chordal->add_option("--order", cfg.order,
                      "elimination order: comma-separated ids or a JSON file");
  chordal->add_option("--cost", cfg.cost, "objective for the SDP form")
      ->check(CLI::IsMember({"loss", "gen"}));

  std::vector<const char*> argv;
  argv.reserve(args.size() + 1);
  argv.push_back("opfrelax");
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    // CLI11 handles --help through this path with exit code 0.
    std::ostringstream msg;
    const int code = app.exit(e, msg, msg);
    (code == 0 ? out : err) << msg.str();
    return code == 0 ? kExitOk : kExitUsage;
  }

  for (const auto* sub : {pf, relax, bounds, chordal})
    if (sub->parsed()) cfg.command = sub->get_name();

  try {
    if (cfg.command == "pf") return cmd_pf(cfg, out, err);
    if (cfg.command == "relax") return cmd_relax(cfg, out, err);
    if (cfg.command == "bounds") return cmd_bounds(cfg, out, err);
    if (cfg.command == "chordal") return cmd_chordal(cfg, out, err);
    err << "unknown command\n";
    return kExitUsage;
  } catch (const ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const CaseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const DomainError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ConvergenceError& e) {
    err << "error: " << e.what() << "\n";
    return kExitNoConverge;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }
}

}  // namespace opfr::cli

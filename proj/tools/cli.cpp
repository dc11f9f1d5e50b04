#include "cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>

#include "ipfnet/experiments.hpp"
#include "ipfnet/feasibility.hpp"
#include "ipfnet/ingest.hpp"
#include "ipfnet/io.hpp"
#include "ipfnet/ipf.hpp"
#include "ipfnet/parallel.hpp"
#include "ipfnet/repair.hpp"
#include "ipfnet/spectral.hpp"
#include "ipfnet/stats.hpp"
#include "ipfnet/summary.hpp"
#include "ipfnet/synth.hpp"

namespace ipfnet::cli {

namespace {

namespace fs = std::filesystem;
using json = nlohmann::json;

// Non-finite values become null in JSON.
json num(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

json num_array(std::span<const double> xs) {
  json a = json::array();
  for (double x : xs) a.push_back(num(x));
  return a;
}

json index_array(std::span<const std::size_t> xs) { return json(std::vector<std::size_t>(xs.begin(), xs.end())); }

struct Common {
  bool no_meta = false;
  std::uint64_t seed = 0;
};

std::uint64_t default_seed() {
  if (const char* env = std::getenv("IPFNET_SEED")) {
    try {
      return std::stoull(env);
    } catch (const std::exception&) {
      throw InputError("IPFNET_SEED must be a non-negative integer");
    }
  }
  return 0;
}

json envelope(const std::string& command, const Common& common) {
  json j;
  j["schema_version"] = kSchemaVersion;
  j["command"] = command;
  if (!common.no_meta) {
    auto now = std::chrono::floor<std::chrono::seconds>(std::chrono::system_clock::now());
    std::ostringstream ts;
    ts << std::chrono::sys_seconds{now}.time_since_epoch().count();
    j["meta"] = {{"generated_at_unix", ts.str()}};
  }
  return j;
}

struct PairInputs {
  std::string network, p, q;
};

void add_pair_options(CLI::App* app, PairInputs& in, bool network_required = true) {
  auto* net = app->add_option("--network", in.network, "Network triplet file");
  if (network_required) net->required();
  app->add_option("--p", in.p, "Row marginal file")->required();
  app->add_option("--q", in.q, "Column marginal file")->required();
}

std::pair<SparseNetwork, MarginalPair> load_pair(const PairInputs& in) {
  SparseNetwork x = read_network(fs::path(in.network));
  auto p = read_vector(fs::path(in.p), x.rows());
  auto q = read_vector(fs::path(in.q), x.cols());
  MarginalPair marg(std::move(p), std::move(q));
  return {std::move(x), validate_pair(x, marg)};
}

MarginalPair load_marginals(const std::string& p_path, const std::string& q_path) {
  return MarginalPair(read_vector(fs::path(p_path)), read_vector(fs::path(q_path)));
}

json ipf_json(const IpfResult& r, bool include_trace) {
  json j;
  j["status"] = to_string(r.status);
  j["iterations"] = r.iterations;
  j["d0"] = num_array(r.d0);
  j["d1"] = num_array(r.d1);
  if (!r.l1_trace.empty()) j["final_l1_error"] = r.l1_trace.back();
  if (include_trace) j["l1_trace"] = num_array(r.l1_trace);
  return j;
}

json blocking_json(const BlockingDiagnosis& d) {
  return {{"rows", index_array(d.rows)},
          {"neighbor_cols", index_array(d.neighbor_cols)},
          {"p_sum", d.p_sum},
          {"q_sum", d.q_sum},
          {"delta", d.delta}};
}

json repair_json(const RepairReport& rep) {
  json rounds = json::array();
  for (const auto& r : rep.history) {
    json edges = json::array();
    for (const auto& [i, j] : r.additions.edges) edges.push_back({i, j});
    rounds.push_back({{"blocking", blocking_json(r.blocking)},
                      {"edges", edges},
                      {"weight", r.additions.weight},
                      {"estimated_dlambda1", r.additions.estimated_dlambda1}});
  }
  return {{"rounds", rep.rounds},
          {"total_edges_added", rep.total_edges_added},
          {"lambda1_before", rep.lambda1_before},
          {"lambda1_after", rep.lambda1_after},
          {"exact_dlambda1", rep.exact_dlambda1},
          {"history", rounds}};
}

RepairObjective parse_objective(const std::string& s) {
  if (s == "min-edges") return RepairObjective::MinEdges;
  if (s == "min-lambda1") return RepairObjective::MinLambda1;
  throw InputError("unknown objective: " + s);
}

RowTiebreak parse_tiebreak(const std::string& s) {
  if (s == "largest-p") return RowTiebreak::LargestP;
  if (s == "smallest-p") return RowTiebreak::SmallestP;
  throw InputError("unknown tiebreak: " + s);
}

struct RepairOptions {
  std::string objective = "min-lambda1";
  std::string tiebreak = "largest-p";
  double multiplier = 0.01;
  std::size_t max_rounds = 0;
};

void add_repair_options(CLI::App* app, RepairOptions& ro) {
  app->add_option("--objective", ro.objective, "min-edges | min-lambda1")
      ->check(CLI::IsMember({"min-edges", "min-lambda1"}));
  app->add_option("--tiebreak", ro.tiebreak, "largest-p | smallest-p")
      ->check(CLI::IsMember({"largest-p", "smallest-p"}));
  app->add_option("--edge-weight-multiplier", ro.multiplier, "Added weight relative to the smallest entry");
  app->add_option("--max-rounds", ro.max_rounds, "Round cap (0 = m*n)");
}

RepairConfig to_config(const RepairOptions& ro) {
  RepairConfig cfg;
  cfg.objective = parse_objective(ro.objective);
  cfg.tiebreak = parse_tiebreak(ro.tiebreak);
  cfg.edge_weight_multiplier = ro.multiplier;
  cfg.max_rounds = ro.max_rounds;
  return cfg;
}

void emit(std::ostream& out, const json& j) { out << j.dump(2) << '\n'; }

std::optional<TimeWindow> parse_window(const std::string& start, const std::string& end) {
  if (start.empty() && end.empty()) return std::nullopt;
  if (start.empty() || end.empty()) throw InputError("--start and --end must be given together");
  return TimeWindow{parse_timestamp(start), parse_timestamp(end)};
}

// ---------------------------------------------------------------- ingest

struct IngestArgs {
  std::string trips, out_dir, start, end;
};

int cmd_ingest(const IngestArgs& a, const Common& common, std::ostream& out) {
  std::ifstream in(a.trips);
  if (!in) throw InputError("cannot open " + a.trips);
  IngestReport rep = ingest_trips(in, parse_window(a.start, a.end));
  fs::path dir(a.out_dir);
  fs::create_directories(dir);
  {
    std::ofstream s(dir / "stations.txt");
    for (const auto& name : rep.stations) s << name << '\n';
  }
  {
    std::ofstream h(dir / "hours.txt");
    for (const auto& label : rep.series.timesteps) h << label << '\n';
  }
  write_network(dir / "aggregated.net", rep.aggregated);
  for (std::size_t t = 0; t < rep.series.slices.size(); ++t) {
    std::string k = std::to_string(t);
    write_network(dir / ("hour_" + k + ".net"), rep.series.slices[t]);
    write_vector(dir / ("p_" + k + ".txt"), rep.hourly_marginals[t].p());
    write_vector(dir / ("q_" + k + ".txt"), rep.hourly_marginals[t].q());
  }
  bool have_coords = std::all_of(rep.coordinates.begin(), rep.coordinates.end(),
                                 [](const StationCoordinates& c) { return c.samples > 0; });
  if (have_coords) write_vector(dir / "distances.txt", station_distances(rep));

  json j = envelope("ingest", common);
  j["stations"] = rep.stations.size();
  j["hours"] = rep.series.timesteps;
  j["trips"] = rep.same_hour_trips + rep.midpoint_trips;
  j["same_hour_trips"] = rep.same_hour_trips;
  j["midpoint_trips"] = rep.midpoint_trips;
  j["skipped_rows"] = rep.skipped_rows;
  j["outside_window"] = rep.outside_window;
  j["distances_written"] = have_coords;
  j["output_dir"] = a.out_dir;
  if (!a.start.empty()) j["window"] = {{"start", a.start}, {"end", a.end}};
  {
    std::ofstream meta(dir / "ingest.json");
    meta << j.dump(2) << '\n';
  }
  emit(out, j);
  return kExitOk;
}

// ---------------------------------------------------------------- check

int cmd_check(const PairInputs& in, const Common& common, std::ostream& out) {
  auto [x, marg] = load_pair(in);
  FlowDiagnostics flow = check_feasibility(x, marg);
  json j = envelope("check", common);
  j["feasible"] = flow.feasible;
  j["max_flow_value"] = flow.max_flow_value;
  j["target"] = flow.target;
  if (!flow.feasible) {
    j["blocking"] = blocking_json(find_blocking_set(x, marg, flow));
    j["hint"] = "IPF will not converge on this input; run `ipfnet repair` to add edges";
  }
  emit(out, j);
  return kExitOk;
}

// ---------------------------------------------------------------- run

struct RunArgs {
  PairInputs pair;
  std::string ingest_dir;
  bool repair = false;
  RepairOptions repair_opts;
  std::string out_network;
  std::string truth;
  bool trace = false;
  std::string trace_csv;
  double tolerance = 1e-8;
  std::size_t max_iterations = 10000;
  std::size_t workers = 0;
};

struct RunOutcome {
  IpfResult result;
  SparseNetwork estimate;
  std::optional<RepairReport> repair;
};

// Throws StructuralInfeasibility or returns a non-converged status; callers
// decide how to report.
RunOutcome infer_one(const SparseNetwork& x, const MarginalPair& marg, const RunArgs& a) {
  IpfConfig cfg;
  cfg.tolerance = a.tolerance;
  cfg.max_iterations = a.max_iterations;
  cfg.record_trace = true;
  RunOutcome o;
  const SparseNetwork* base = &x;
  if (a.repair) {
    o.repair = conv_ipf(x, marg, to_config(a.repair_opts));
    base = &o.repair->final_network;
  }
  o.result = run_ipf(*base, marg, cfg);
  o.estimate = scaled_matrix(*base, o.result.d0, o.result.d1);
  return o;
}

json infeasible_json(const std::string& why) {
  return {{"error", "infeasible"},
          {"detail", why},
          {"hint", "IPF cannot converge on this input; rerun with --repair or use `ipfnet repair`"}};
}

int cmd_run_single(const RunArgs& a, const Common& common, std::ostream& out, std::ostream& err) {
  auto [x, marg] = load_pair(a.pair);
  json j = envelope("run", common);
  RunOutcome o;
  try {
    o = infer_one(x, marg, a);
  } catch (const StructuralInfeasibility& e) {
    j.update(infeasible_json(e.what()));
    emit(out, j);
    err << "error: " << e.what() << '\n';
    return kExitInfeasible;
  }
  j["ipf"] = ipf_json(o.result, a.trace);
  if (o.repair) j["repair"] = repair_json(*o.repair);
  if (o.result.status == IpfStatus::Oscillating) {
    j.update(infeasible_json("IPF oscillates between two limit matrices"));
    emit(out, j);
    err << "error: IPF oscillates; run `ipfnet repair` or pass --repair\n";
    return kExitInfeasible;
  }
  if (o.result.status == IpfStatus::MaxIterations) {
    // Feasible supports that force some entries to zero converge sublinearly.
    j["error"] = "max_iterations";
    j["hint"] = "no blocking set remains but convergence is slow; raise --max-iterations or --tolerance";
    emit(out, j);
    err << "error: IPF reached the iteration cap\n";
    return kExitFailure;
  }
  if (!a.out_network.empty()) write_network(fs::path(a.out_network), o.estimate);
  if (!a.trace_csv.empty()) {
    std::ofstream csv(a.trace_csv);
    csv << "iteration,l1_error\n";
    for (std::size_t k = 0; k < o.result.l1_trace.size(); ++k) {
      csv << k + 1 << ',' << format_double(o.result.l1_trace[k]) << '\n';
    }
  }
  if (!a.truth.empty()) {
    SparseNetwork y = read_network(fs::path(a.truth));
    j["cosine_similarity"] = cosine_similarity(o.estimate, y);
  }
  emit(out, j);
  return kExitOk;
}

std::vector<std::string> read_lines(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) lines.push_back(line);
  }
  return lines;
}

// Every hour of an ingest directory against the aggregated network; the
// hourly slices double as ground truth for the cosine score.
int cmd_run_series(const RunArgs& a, const Common& common, std::ostream& out) {
  fs::path dir(a.ingest_dir);
  SparseNetwork xbar = read_network(dir / "aggregated.net");
  auto hours = read_lines(dir / "hours.txt");
  std::vector<json> rows(hours.size());
  std::size_t workers = a.workers == 0 ? default_workers() : a.workers;
  parallel_for(hours.size(), workers, [&](std::size_t t) {
    std::string k = std::to_string(t);
    SparseNetwork y = read_network(dir / ("hour_" + k + ".net"));
    json row = {{"hour", hours[t]}, {"trips", y.total()}};
    if (y.empty()) {
      row["status"] = "skipped_empty";
      rows[t] = row;
      return;
    }
    MarginalPair marg = marginals(y);
    try {
      RunOutcome o = infer_one(xbar, marg, a);
      row["status"] = to_string(o.result.status);
      row["iterations"] = o.result.iterations;
      if (o.repair) row["edges_added"] = o.repair->total_edges_added;
      row["cosine_similarity"] = cosine_similarity(o.estimate, y);
    } catch (const StructuralInfeasibility& e) {
      row["status"] = "structurally_infeasible";
      row["detail"] = e.what();
    }
    rows[t] = row;
  });
  json j = envelope("run", common);
  j["hours"] = rows;
  std::vector<double> cos;
  bool all_ok = true;
  for (const auto& r : rows) {
    if (r.contains("cosine_similarity") && r["status"] == "converged") {
      cos.push_back(r["cosine_similarity"].get<double>());
    } else if (r["status"] != "skipped_empty") {
      all_ok = false;
    }
  }
  if (!cos.empty()) j["mean_cosine_similarity"] = mean(cos);
  emit(out, j);
  return all_ok ? kExitOk : kExitInfeasible;
}

// ---------------------------------------------------------------- repair

struct RepairArgs {
  PairInputs pair;
  RepairOptions opts;
  std::string out_network;
};

int cmd_repair(const RepairArgs& a, const Common& common, std::ostream& out) {
  auto [x, marg] = load_pair(a.pair);
  RepairReport rep = conv_ipf(x, marg, to_config(a.opts));
  if (!a.out_network.empty()) write_network(fs::path(a.out_network), rep.final_network);
  json j = envelope("repair", common);
  j["objective"] = a.opts.objective;
  j.update(repair_json(rep));
  emit(out, j);
  return kExitOk;
}

// ---------------------------------------------------------------- gravity

struct GravityFitArgs {
  std::string network, distances;
  double bin_width = 0.001;
};

int cmd_gravity_fit(const GravityFitArgs& a, const Common& common, std::ostream& out) {
  SparseNetwork x = read_network(fs::path(a.network));
  auto d = read_vector(fs::path(a.distances), x.rows() * x.cols());
  GravityModel gm = fit_gravity(x, d, a.bin_width);
  json j = envelope("gravity-fit", common);
  j["alpha"] = gm.alpha;
  j["beta"] = gm.beta;
  j["bin_width"] = a.bin_width;
  emit(out, j);
  return kExitOk;
}

struct GravityInferArgs {
  std::string distances, p, q, out_network, truth;
  double alpha = 0.0, beta = 0.0;
};

int cmd_gravity_infer(const GravityInferArgs& a, const Common& common, std::ostream& out) {
  MarginalPair marg = load_marginals(a.p, a.q);
  GravityModel gm;
  gm.alpha = a.alpha;
  gm.beta = a.beta;
  gm.rows = marg.rows();
  gm.cols = marg.cols();
  gm.distances = effective_distances(read_vector(fs::path(a.distances), gm.rows * gm.cols));
  SparseNetwork est = gravity_infer(gm, marg);
  if (!a.out_network.empty()) write_network(fs::path(a.out_network), est);
  json j = envelope("gravity-infer", common);
  j["alpha"] = a.alpha;
  j["beta"] = a.beta;
  j["total"] = est.total();
  if (!a.truth.empty()) j["cosine_similarity"] = cosine_similarity(est, read_network(fs::path(a.truth)));
  emit(out, j);
  return kExitOk;
}

// ---------------------------------------------------------------- baseline

struct BaselineArgs {
  std::string method = "rank1";
  std::string network, p, q, out_network, truth;
};

int cmd_baseline(const BaselineArgs& a, const Common& common, std::ostream& out) {
  MarginalPair marg = load_marginals(a.p, a.q);
  SparseNetwork est;
  if (a.method == "rank1") {
    est = baseline_rank1(marg);
  } else {
    if (a.network.empty()) throw InputError("--network is required for method " + a.method);
    SparseNetwork x = read_network(fs::path(a.network));
    marg = validate_pair(x, marg);
    if (a.method == "row-share") {
      est = baseline_row_share(x, marg.p());
    } else if (a.method == "col-share") {
      est = baseline_col_share(x, marg.q());
    } else {
      est = baseline_scale(x, marg.total());
    }
  }
  if (!a.out_network.empty()) write_network(fs::path(a.out_network), est);
  json j = envelope("baseline", common);
  j["method"] = a.method;
  j["total"] = est.total();
  if (!a.truth.empty()) j["cosine_similarity"] = cosine_similarity(est, read_network(fs::path(a.truth)));
  emit(out, j);
  return kExitOk;
}

// ---------------------------------------------------------------- simulate

struct ModelArgs {
  std::string model = "poisson";
  double gamma = 0.5;
  double alpha = -0.5;
  double beta = 1.0;
};

void add_model_options(CLI::App* app, ModelArgs& ma) {
  app->add_option("--model", ma.model, "poisson | exponential | negbinom | interaction")
      ->check(CLI::IsMember({"poisson", "exponential", "negbinom", "interaction"}));
  app->add_option("--gamma", ma.gamma, "Negative binomial success probability");
  app->add_option("--alpha", ma.alpha, "Interaction distance exponent");
  app->add_option("--beta", ma.beta, "Interaction distance decay");
}

GenerativeModel to_model(const ModelArgs& ma) {
  if (ma.model == "poisson") return PoissonModel{};
  if (ma.model == "exponential") return ExponentialModel{};
  if (ma.model == "negbinom") return NegBinomModel{ma.gamma};
  return InteractionModel{ma.alpha, ma.beta};
}

struct SynthArgs {
  std::size_t m = 100, n = 100, trials = 1;
  double sparsity = 0.0;
};

void add_synth_options(CLI::App* app, SynthArgs& sa) {
  app->add_option("--m", sa.m, "Rows");
  app->add_option("--n", sa.n, "Columns");
  app->add_option("--sparsity", sa.sparsity, "Fraction of zeroed entries in the aggregated network");
  app->add_option("--trials", sa.trials, "Number of independent trials");
}

struct SimulateArgs {
  ModelArgs model;
  SynthArgs synth;
  std::string out_dir;
};

int cmd_simulate(const SimulateArgs& a, const Common& common, std::ostream& out) {
  SynthConfig cfg;
  cfg.m = a.synth.m;
  cfg.n = a.synth.n;
  cfg.sparsity = a.synth.sparsity;
  cfg.seed = common.seed;
  GenerativeModel model = to_model(a.model);
  fs::path dir(a.out_dir);
  fs::create_directories(dir);
  std::ofstream csv(dir / "metrics.csv");
  csv << "trial,status,iterations,l2,cosine,bound\n";
  for (std::size_t t = 0; t < a.synth.trials; ++t) {
    SynthInstance inst = generate_instance(cfg, model, t);
    fs::path td = dir / ("trial_" + std::to_string(t));
    fs::create_directories(td);
    write_network(td / "xbar.net", inst.xbar);
    write_network(td / "y.net", inst.y);
    write_vector(td / "p.txt", inst.marg.p());
    write_vector(td / "q.txt", inst.marg.q());
    write_vector(td / "u.txt", inst.truth.u);
    write_vector(td / "v.txt", inst.truth.v);
    if (!inst.distances.empty()) write_vector(td / "distances.txt", inst.distances);
    TrialMetrics tm = run_trial(cfg, model, t);
    csv << t << ',' << to_string(tm.status) << ',' << tm.iterations << ',' << format_double(tm.l2)
        << ',' << format_double(tm.cosine) << ',' << format_double(tm.bound) << '\n';
  }
  json j = envelope("simulate", common);
  j["model"] = model_name(model);
  j["seed"] = common.seed;
  j["trials"] = a.synth.trials;
  j["output_dir"] = a.out_dir;
  emit(out, j);
  return kExitOk;
}

// ---------------------------------------------------------------- evaluate

struct EvaluateArgs {
  std::string estimate, truth, d0, d1, u, v;
};

int cmd_evaluate(const EvaluateArgs& a, const Common& common, std::ostream& out) {
  json j = envelope("evaluate", common);
  if (!a.estimate.empty() || !a.truth.empty()) {
    if (a.estimate.empty() || a.truth.empty()) throw InputError("--estimate and --truth go together");
    j["cosine_similarity"] =
        cosine_similarity(read_network(fs::path(a.estimate)), read_network(fs::path(a.truth)));
  }
  if (!a.d0.empty() || !a.u.empty()) {
    if (a.d0.empty() || a.d1.empty() || a.u.empty() || a.v.empty()) {
      throw InputError("--d0, --d1, --u and --v go together");
    }
    ScalingParameters truth;
    truth.u = read_vector(fs::path(a.u));
    truth.v = read_vector(fs::path(a.v));
    j["l2_param_error"] = l2_param_error(read_vector(fs::path(a.d0), truth.u.size()),
                                         read_vector(fs::path(a.d1), truth.v.size()), truth);
  }
  if (j.size() <= 3 && !j.contains("cosine_similarity")) {
    throw InputError("nothing to evaluate: give --estimate/--truth and/or --d0/--d1/--u/--v");
  }
  emit(out, j);
  return kExitOk;
}

// ---------------------------------------------------------------- diagnose

struct DiagnoseArgs {
  PairInputs pair;
  std::string observed, u, v, ingest_dir, residual_csv, distances;
  std::optional<double> B;
};

json percentiles_json(std::span<const double> xs) {
  return {{"p5", percentile(xs, 5)},   {"p25", percentile(xs, 25)}, {"p50", percentile(xs, 50)},
          {"p75", percentile(xs, 75)}, {"p95", percentile(xs, 95)}};
}

int cmd_diagnose(const DiagnoseArgs& a, const Common& common, std::ostream& out) {
  auto [x, marg] = load_pair(a.pair);
  json j = envelope("diagnose", common);
  LaplacianSpectrum spec = bipartite_laplacian_fiedler(x);
  j["fiedler"] = {{"lambda2", spec.lambda2}, {"connected", spec.connected}, {"dimension", spec.dimension}};

  IpfResult res = run_ipf(x, marg);
  j["ipf_status"] = to_string(res.status);
  ScalingParameters params;
  std::string source;
  if (!a.u.empty() || !a.v.empty()) {
    if (a.u.empty() || a.v.empty()) throw InputError("--u and --v go together");
    params.u = read_vector(fs::path(a.u), x.rows());
    params.v = read_vector(fs::path(a.v), x.cols());
    source = "supplied";
  } else {
    params = ScalingParameters::from_factors(res.d0, res.d1);
    source = "ipf";
  }
  bool finite = std::all_of(params.u.begin(), params.u.end(), [](double t) { return std::isfinite(t); }) &&
                std::all_of(params.v.begin(), params.v.end(), [](double t) { return std::isfinite(t); });
  j["parameters_source"] = source;
  if (finite) {
    FiniteMleCondition fc = finite_mle_condition(x, params);
    j["finite_mle_condition"] = {{"holds", fc.holds}, {"lambda2_star", fc.lambda2_star}, {"threshold", fc.threshold}};
    double sup = 0.0;
    for (double t : params.u) sup = std::max(sup, std::abs(t));
    for (double t : params.v) sup = std::max(sup, std::abs(t));
    ErrorBoundReport eb = error_bound(x, params, a.B.value_or(sup));
    j["error_bound"] = {{"kappa", eb.kappa}, {"B", eb.B},         {"lambda2", eb.lambda2},
                        {"bound", num(eb.bound)}, {"M", eb.M}, {"connected", eb.connected},
                        {"constant_free", num(eb.constant_free())}};
  } else {
    j["finite_mle_condition"] = nullptr;
    j["error_bound"] = nullptr;
  }

  if (!a.observed.empty()) {
    if (res.status != IpfStatus::Converged) throw InputError("residuals need a converged IPF fit");
    SparseNetwork y = read_network(fs::path(a.observed));
    SparseNetwork xhat = scaled_matrix(x, res.d0, res.d1);
    FitDiagnostics fd = fit_diagnostics(y, xhat);
    j["dispersion"] = fd.dispersion;
    j["observation_count"] = fd.observation_count;
    j["residual_percentiles"] = percentiles_json(fd.pearson_residuals);
    if (!a.residual_csv.empty()) {
      std::vector<double> dist;
      if (!a.distances.empty()) dist = read_vector(fs::path(a.distances), x.rows() * x.cols());
      std::ofstream csv(a.residual_csv);
      csv << "row,col,fitted,observed,residual" << (dist.empty() ? "" : ",distance") << '\n';
      auto entries = xhat.entries();
      for (std::size_t k = 0; k < entries.size(); ++k) {
        const auto& e = entries[k];
        csv << e.row << ',' << e.col << ',' << format_double(e.weight) << ','
            << format_double(y.at(e.row, e.col)) << ',' << format_double(fd.pearson_residuals[k]);
        if (!dist.empty()) csv << ',' << format_double(dist[e.row * x.cols() + e.col]);
        csv << '\n';
      }
    }
  }

  if (!a.ingest_dir.empty()) {
    fs::path dir(a.ingest_dir);
    auto hours = read_lines(dir / "hours.txt");
    std::vector<IpfResult> results;
    for (std::size_t t = 0; t < hours.size(); ++t) {
      std::string k = std::to_string(t);
      MarginalPair mt(read_vector(dir / ("p_" + k + ".txt"), x.rows()),
                      read_vector(dir / ("q_" + k + ".txt"), x.cols()));
      if (!(mt.total() > 0.0)) continue;
      IpfResult r = run_ipf(x, mt);
      if (r.status == IpfStatus::Converged) results.push_back(std::move(r));
    }
    PercentileSummary ps = stationarity_check(results, x);
    j["stationarity"] = {{"time_steps", results.size()}, {"p5", ps.p5},   {"p25", ps.p25},
                         {"p50", ps.p50},               {"p75", ps.p75}, {"p95", ps.p95}};
  }
  emit(out, j);
  return kExitOk;
}

// ---------------------------------------------------------------- experiment

struct ExperimentArgs {
  std::string kind;
  SynthArgs synth;
  std::vector<double> levels;
  std::size_t workers = 0;
  std::string out_csv;
};

int cmd_experiment(const ExperimentArgs& a, const Common& common, std::ostream& out) {
  SynthConfig cfg;
  cfg.m = a.synth.m;
  cfg.n = a.synth.n;
  cfg.sparsity = a.synth.sparsity;
  cfg.seed = common.seed;
  ExperimentOptions opts;
  opts.trials = a.synth.trials;
  opts.workers = a.workers == 0 ? default_workers() : a.workers;
  std::vector<ExperimentRow> rows;
  if (a.kind == "sparsity") {
    std::vector<double> levels = a.levels;
    if (levels.empty()) {
      for (int k = 0; k <= 18; ++k) levels.push_back(0.05 * k);
    }
    rows = experiment_sparsity(cfg, levels, opts);
  } else {
    rows = experiment_misspec(cfg,
                              {PoissonModel{}, NegBinomModel{0.8}, NegBinomModel{0.5}, ExponentialModel{},
                               NegBinomModel{0.2}},
                              opts);
  }
  if (!a.out_csv.empty()) {
    std::ofstream csv(a.out_csv);
    if (!csv) throw InputError("cannot write " + a.out_csv);
    write_experiment_csv(csv, rows);
  } else {
    write_experiment_csv(out, rows);
  }
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Common common;
  try {
    common.seed = default_seed();
  } catch (const InputError& e) {
    err << "error: " << e.what() << '\n';
    return kExitInputError;
  }

  CLI::App app{"Dynamic bipartite network inference with iterative proportional fitting", "ipfnet"};
  app.require_subcommand(1);
  // Global flags may also follow the subcommand.
  app.fallthrough();
  app.add_flag("--no-meta", common.no_meta, "Omit run metadata (timestamps) from JSON output");
  app.add_option("--seed", common.seed, "Random seed (default: $IPFNET_SEED or 0)");

  IngestArgs ingest;
  auto* c_ingest = app.add_subcommand("ingest", "Build hourly networks from a trip CSV");
  c_ingest->add_option("--trips", ingest.trips, "Trip CSV")->required();
  c_ingest->add_option("--out", ingest.out_dir, "Output directory")->required();
  c_ingest->add_option("--start", ingest.start, "Window start (YYYY-MM-DD HH:MM:SS)");
  c_ingest->add_option("--end", ingest.end, "Window end, exclusive");

  PairInputs check;
  auto* c_check = app.add_subcommand("check", "Decide whether IPF can converge");
  add_pair_options(c_check, check);

  RunArgs runa;
  auto* c_run = app.add_subcommand("run", "Infer a network with IPF");
  add_pair_options(c_run, runa.pair, false);
  c_run->add_option("--ingest-dir", runa.ingest_dir, "Run every hour of an ingest directory");
  c_run->add_flag("--repair", runa.repair, "Repair infeasible inputs before running IPF");
  add_repair_options(c_run, runa.repair_opts);
  c_run->add_option("--out-network", runa.out_network, "Write the estimate here");
  c_run->add_option("--truth", runa.truth, "Observed network for a cosine score");
  c_run->add_flag("--trace", runa.trace, "Include the l1 error trace");
  c_run->add_option("--trace-csv", runa.trace_csv, "Write the l1 error trace as CSV");
  c_run->add_option("--tolerance", runa.tolerance, "Stopping tolerance");
  c_run->add_option("--max-iterations", runa.max_iterations, "Iteration cap");
  c_run->add_option("--workers", runa.workers, "Worker threads for --ingest-dir (0 = all cores)");
  // --p/--q are required only for single runs.
  for (const char* name : {"--p", "--q"}) c_run->get_option(name)->required(false);

  RepairArgs repair;
  auto* c_repair = app.add_subcommand("repair", "Add edges until IPF can converge");
  add_pair_options(c_repair, repair.pair);
  add_repair_options(c_repair, repair.opts);
  c_repair->add_option("--out-network", repair.out_network, "Write the repaired network here");

  GravityFitArgs gfit;
  auto* c_gfit = app.add_subcommand("gravity-fit", "Fit the distance kernel d^alpha exp(-beta d)");
  c_gfit->add_option("--network", gfit.network, "Aggregated network")->required();
  c_gfit->add_option("--distances", gfit.distances, "Row-major distance file")->required();
  c_gfit->add_option("--bin-width", gfit.bin_width, "Distance bin width");

  GravityInferArgs ginf;
  auto* c_ginf = app.add_subcommand("gravity-infer", "Balance the gravity kernel to marginals");
  c_ginf->add_option("--distances", ginf.distances, "Row-major distance file")->required();
  c_ginf->add_option("--alpha", ginf.alpha, "Distance exponent")->required();
  c_ginf->add_option("--beta", ginf.beta, "Distance decay")->required();
  c_ginf->add_option("--p", ginf.p, "Row marginal file")->required();
  c_ginf->add_option("--q", ginf.q, "Column marginal file")->required();
  c_ginf->add_option("--out-network", ginf.out_network, "Write the estimate here");
  c_ginf->add_option("--truth", ginf.truth, "Observed network for a cosine score");

  BaselineArgs base;
  auto* c_base = app.add_subcommand("baseline", "Marginal-only baseline estimates");
  c_base->add_option("--method", base.method, "rank1 | row-share | col-share | scale")
      ->check(CLI::IsMember({"rank1", "row-share", "col-share", "scale"}));
  c_base->add_option("--network", base.network, "Aggregated network (not needed for rank1)");
  c_base->add_option("--p", base.p, "Row marginal file")->required();
  c_base->add_option("--q", base.q, "Column marginal file")->required();
  c_base->add_option("--out-network", base.out_network, "Write the estimate here");
  c_base->add_option("--truth", base.truth, "Observed network for a cosine score");

  SimulateArgs sim;
  auto* c_sim = app.add_subcommand("simulate", "Generate synthetic instances");
  add_model_options(c_sim, sim.model);
  add_synth_options(c_sim, sim.synth);
  c_sim->add_option("--out", sim.out_dir, "Output directory")->required();

  EvaluateArgs eval;
  auto* c_eval = app.add_subcommand("evaluate", "Score an estimate against ground truth");
  c_eval->add_option("--estimate", eval.estimate, "Estimated network");
  c_eval->add_option("--truth", eval.truth, "True network");
  c_eval->add_option("--d0", eval.d0, "Row factors");
  c_eval->add_option("--d1", eval.d1, "Column factors");
  c_eval->add_option("--u", eval.u, "True u");
  c_eval->add_option("--v", eval.v, "True v");

  DiagnoseArgs diag;
  auto* c_diag = app.add_subcommand("diagnose", "Spectral, dispersion and stationarity diagnostics");
  add_pair_options(c_diag, diag.pair);
  c_diag->add_option("--observed", diag.observed, "Observed network for residuals and dispersion");
  c_diag->add_option("--u", diag.u, "Parameters u (default: from the IPF fit)");
  c_diag->add_option("--v", diag.v, "Parameters v (default: from the IPF fit)");
  c_diag->add_option("--B", diag.B, "Parameter bound for the error bound (default: max |u|, |v|)");
  c_diag->add_option("--ingest-dir", diag.ingest_dir, "Hourly marginals for the stationarity check");
  c_diag->add_option("--residual-csv", diag.residual_csv, "Write per-entry residuals here");
  c_diag->add_option("--distances", diag.distances, "Row-major distances added to the residual CSV");

  ExperimentArgs exp;
  auto* c_exp = app.add_subcommand("experiment", "Monte Carlo sweeps");
  c_exp->add_option("kind", exp.kind, "sparsity | misspec")
      ->required()
      ->check(CLI::IsMember({"sparsity", "misspec"}));
  add_synth_options(c_exp, exp.synth);
  exp.synth.trials = 200;
  c_exp->add_option("--levels", exp.levels, "Sparsity levels (default 0, 0.05, ..., 0.9)");
  c_exp->add_option("--workers", exp.workers, "Worker threads (0 = all cores)");
  c_exp->add_option("--out", exp.out_csv, "CSV output (default stdout)");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitInputError;
  }

  try {
    if (c_ingest->parsed()) return cmd_ingest(ingest, common, out);
    if (c_check->parsed()) return cmd_check(check, common, out);
    if (c_run->parsed()) {
      if (!runa.ingest_dir.empty()) return cmd_run_series(runa, common, out);
      if (runa.pair.network.empty() || runa.pair.p.empty() || runa.pair.q.empty()) {
        throw InputError("run needs --network, --p and --q, or --ingest-dir");
      }
      return cmd_run_single(runa, common, out, err);
    }
    if (c_repair->parsed()) return cmd_repair(repair, common, out);
    if (c_gfit->parsed()) return cmd_gravity_fit(gfit, common, out);
    if (c_ginf->parsed()) return cmd_gravity_infer(ginf, common, out);
    if (c_base->parsed()) return cmd_baseline(base, common, out);
    if (c_sim->parsed()) return cmd_simulate(sim, common, out);
    if (c_eval->parsed()) return cmd_evaluate(eval, common, out);
    if (c_diag->parsed()) return cmd_diagnose(diag, common, out);
    if (c_exp->parsed()) return cmd_experiment(exp, common, out);
  } catch (const StructuralInfeasibility& e) {
    err << "error: " << e.what() << '\n';
    return kExitInfeasible;
  } catch (const InputError& e) {
    err << "error: " << e.what() << '\n';
    return kExitInputError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitFailure;
}

}  // namespace ipfnet::cli

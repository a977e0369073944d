#pragma once

// Subcommand implementations shared by the CLI and the pipeline runner.
// Every command returns a JSON run report; timing lives under "timing" so
// reports can be compared with it removed.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cascade/diffusion.hpp"
#include "cascade/error.hpp"
#include "cascade/event_model.hpp"
#include "cascade/exposure.hpp"
#include "cascade/io.hpp"
#include "cascade/parallel.hpp"
#include "cascade/power_law.hpp"
#include "cascade/snapshot.hpp"
#include "cascade/stats.hpp"

namespace cascade::cli {

using json = nlohmann::ordered_json;
namespace fs = std::filesystem;

inline constexpr const char* kToolVersion = "1.0.0";

// ---------------------------------------------------------------------------
// Report plumbing

class Report {
 public:
  explicit Report(std::string command) : start_(std::chrono::steady_clock::now()) {
    body_["tool"] = "cascade";
    body_["version"] = kToolVersion;
    body_["command"] = std::move(command);
    body_["inputs"] = json::array();
    body_["config"] = json::object();
    body_["result"] = json::object();
  }

  void input(const std::string& path) {
    body_["inputs"].push_back({{"path", path}, {"sha256", io::sha256_file(path)}, {"bytes", fs::file_size(path)}});
  }
  json& config() { return body_["config"]; }
  json& result() { return body_["result"]; }

  json finish() {
    body_["timing"] = {
        {"seconds", std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count()}};
    return body_;
  }

 private:
  json body_;
  std::chrono::steady_clock::time_point start_;
};

inline void write_json(const std::string& path, const json& j) {
  auto out = io::open_out(path);
  out << j.dump(2) << '\n';
}

inline json without_timing(json j) {
  j.erase("timing");
  if (j.contains("stages"))
    for (auto& s : j["stages"]) s.erase("timing");
  return j;
}

inline json summary_json(const Summary& s) {
  auto num = [](double v) { return std::isnan(v) ? json(nullptr) : json(v); };
  return {{"count", s.count}, {"mean", num(s.mean)},     {"min", num(s.min)}, {"q1", num(s.q1)},
          {"median", num(s.median)}, {"q3", num(s.q3)}, {"max", num(s.max)}};
}

inline std::uint64_t resolve_seed(std::optional<std::uint64_t> seed, json& config) {
  if (seed) {
    config["seed"] = *seed;
    config["seed_source"] = "flag";
    return *seed;
  }
  std::random_device rd;
  std::uint64_t s = (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
  config["seed"] = s;
  config["seed_source"] = "random";
  return s;
}

inline TieRule parse_ties(const std::string& s) {
  if (s == "strict") return TieRule::strict;
  if (s == "inclusive") return TieRule::inclusive;
  throw UsageError("--ties must be strict or inclusive");
}

inline PopularityMode parse_popularity(const std::string& s) {
  if (s == "adopters") return PopularityMode::adopters;
  if (s == "usages") return PopularityMode::usages;
  throw UsageError("--popularity must be adopters or usages");
}

inline ModelKind parse_model(const std::string& s) {
  if (s == "threshold") return ModelKind::threshold;
  if (s == "cascade") return ModelKind::cascade;
  if (s == "learning") return ModelKind::learning;
  throw UsageError("model must be threshold, cascade or learning");
}

// ---------------------------------------------------------------------------
// ingest

struct IngestArgs {
  std::string adoptions;
  std::string follows;  // optional
  std::string out;
  std::string report;  // optional
  bool force = false;
  bool strict = false;
  DatasetOptions options;
};

inline json ingest(const IngestArgs& a) {
  Report rep("ingest");
  rep.config() = {{"adoptions", a.adoptions}, {"follows", a.follows},
                  {"out", a.out},             {"reverse_edges", a.options.reverse_edges},
                  {"symmetrize_edges", a.options.symmetrize_edges}, {"strict", a.strict}, {"force", a.force}};
  if (fs::exists(a.out) && !a.force) {
    auto v = snapshot::probe_version(a.out);
    if (!v) throw UsageError("refusing to overwrite non-snapshot file " + a.out + " (use --force)");
    if (*v != snapshot::kVersion)
      throw UsageError("existing snapshot " + a.out + " has version " + std::to_string(*v) + " (use --force)");
  }
  rep.input(a.adoptions);
  auto ain = io::open_in(a.adoptions);
  auto adoptions = io::read_adoptions(ain, a.strict, a.adoptions);
  io::LoadResult<RawFollow> follows;
  if (!a.follows.empty()) {
    rep.input(a.follows);
    auto fin = io::open_in(a.follows);
    follows = io::read_follows(fin, a.strict, a.follows);
  }
  auto d = Dataset::build(adoptions.rows, follows.rows, a.options);
  snapshot::save(d, a.out);

  auto issues = [](const auto& load) {
    json arr = json::array();
    for (std::size_t i = 0; i < load.issues.size() && i < 100; ++i)
      arr.push_back({{"line", load.issues[i].line}, {"reason", load.issues[i].reason}});
    return arr;
  };
  const auto& c = d.counts();
  rep.result() = {{"adoption_rows", adoptions.data_rows},
                  {"follow_rows", follows.data_rows},
                  {"dropped_rows", adoptions.dropped_rows + follows.dropped_rows},
                  {"dropped_adoption_rows", adoptions.dropped_rows},
                  {"dropped_follow_rows", follows.dropped_rows},
                  {"adoption_issues", issues(adoptions)},
                  {"follow_issues", issues(follows)},
                  {"users", c.users},
                  {"tags", c.tags},
                  {"first_usages", c.first_usages},
                  {"total_usages", c.total_usages},
                  {"edges", c.edges},
                  {"self_loops_dropped", c.self_loops_dropped},
                  {"duplicate_edges_dropped", c.duplicate_edges_dropped},
                  {"timestamped_edges", d.has_timestamped_edges()}};
  auto out = rep.finish();
  if (!a.report.empty()) write_json(a.report, out);
  return out;
}

// ---------------------------------------------------------------------------
// thresholds

struct ThresholdsArgs {
  std::string snapshot;
  std::string out;       // per-adoption exposures TSV
  std::string per_user;  // per-user thresholds TSV
  std::string density;   // smoothed distributions TSV (optional)
  std::string summary;
  ExposureOptions options;
};

inline void write_exposures_tsv(std::ostream& out, const Dataset& d, std::span<const ExposureRecord> recs) {
  out << "user\ttag\ttime\tactive_alters\tneighborhood_size\texposure\ttag_popularity_at_adoption\n";
  for (const auto& r : recs)
    out << d.label(r.user) << '\t' << d.label(r.tag) << '\t' << r.time << '\t' << r.active_alters << '\t'
        << r.neighborhood_size << '\t' << io::fmt_double(r.exposure) << '\t' << r.tag_popularity_at_adoption << '\n';
}

inline json thresholds(const ThresholdsArgs& a) {
  Report rep("thresholds");
  rep.config() = {{"snapshot", a.snapshot},
                  {"ties", a.options.ties == TieRule::strict ? "strict" : "inclusive"},
                  {"popularity", a.options.popularity == PopularityMode::adopters ? "adopters" : "usages"}};
  rep.input(a.snapshot);
  auto d = snapshot::load(a.snapshot);
  auto batch = all_exposures(d, a.options);
  auto pop = population_thresholds(batch, d.user_count());

  if (!a.out.empty()) {
    auto out = io::open_out(a.out);
    write_exposures_tsv(out, d, batch.records);
  }
  if (!a.per_user.empty()) {
    auto out = io::open_out(a.per_user);
    out << "user\tbeta\tdefined_adoptions\tundefined_adoptions\n";
    for (const auto& t : pop.users)
      out << d.label(t.user) << '\t' << io::fmt_double(t.beta) << '\t' << t.defined_adoptions << '\t'
          << t.undefined_adoptions << '\n';
  }
  json density = nullptr;
  if (!a.density.empty()) {
    std::vector<double> raw, betas;
    for (const auto& r : batch.records)
      if (r.defined()) raw.push_back(*r.exposure);
    for (const auto& t : pop.users) betas.push_back(t.beta);
    std::optional<DensityCurve> per_adoption, per_user;
    density = json::object();
    try {
      per_adoption = smooth_distribution(raw);
      density["per_adoption_bandwidth"] = per_adoption->bandwidth;
    } catch (const StatsError& e) {
      density["per_adoption_error"] = e.what();
    }
    try {
      per_user = smooth_distribution(betas);
      density["per_user_bandwidth"] = per_user->bandwidth;
    } catch (const StatsError& e) {
      density["per_user_error"] = e.what();
    }
    auto out = io::open_out(a.density);
    out << "x\tper_adoption_density\tper_user_density\n";
    for (std::size_t i = 0; i < kDensityPoints; ++i) {
      double x = static_cast<double>(i) / static_cast<double>(kDensityPoints - 1);
      out << io::fmt_double(x) << '\t' << (per_adoption ? io::fmt_double(per_adoption->density[i]) : "NA") << '\t'
          << (per_user ? io::fmt_double(per_user->density[i]) : "NA") << '\n';
    }
  }
  rep.result() = {{"records", batch.records.size()},
                  {"defined", batch.defined},
                  {"undefined", batch.undefined},
                  {"users_with_threshold", pop.users.size()},
                  {"users_excluded", pop.excluded_users},
                  {"per_user", summary_json(pop.per_user)},
                  {"per_adoption", summary_json(pop.per_adoption)}};
  if (!density.is_null()) rep.result()["density"] = density;
  auto out = rep.finish();
  if (!a.summary.empty()) write_json(a.summary, out);
  return out;
}

// ---------------------------------------------------------------------------
// fit-powerlaw

struct FitArgs {
  std::string snapshot;  // tag popularity source
  std::string samples;   // or: one positive integer per line
  bool by_usages = false;
  std::string out;        // rank-frequency TSV (snapshot input) or value histogram
  std::string histogram;  // value histogram TSV
  std::string summary;
  std::optional<std::uint64_t> seed;
  PowerLawOptions options;
};

inline std::vector<std::int64_t> read_samples(const std::string& path) {
  auto in = io::open_in(path);
  std::vector<std::int64_t> v;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto t = cascade::detail::trim(line);
    if (t.empty() || t.front() == '#') continue;
    std::int64_t x = 0;
    if (!cascade::detail::parse_int(t, x)) throw DataError(path + ": line " + std::to_string(lineno) + ": not an integer");
    v.push_back(x);
  }
  return v;
}

inline json fit_powerlaw(const FitArgs& a) {
  Report rep("fit-powerlaw");
  auto& cfg = rep.config();
  if (a.snapshot.empty() == a.samples.empty()) throw UsageError("fit-powerlaw needs exactly one of <snapshot> or --samples");
  cfg = {{"snapshot", a.snapshot},
         {"samples", a.samples},
         {"by", a.by_usages ? "usages" : "adopters"},
         {"bootstrap", a.options.bootstrap_replicates},
         {"min_tail", a.options.min_tail},
         {"min_tail_fraction", a.options.min_tail_fraction},
         {"xmin", a.options.fixed_xmin ? json(*a.options.fixed_xmin) : json(nullptr)}};
  PowerLawOptions opt = a.options;
  opt.seed = resolve_seed(a.seed, cfg);

  std::vector<std::int64_t> samples;
  if (!a.snapshot.empty()) {
    rep.input(a.snapshot);
    auto d = snapshot::load(a.snapshot);
    auto pops = tag_popularity(d);
    for (const auto& p : pops) samples.push_back(static_cast<std::int64_t>(a.by_usages ? p.total_usages : p.distinct_adopters));
    if (!a.out.empty()) {
      auto out = io::open_out(a.out);
      out << "rank\ttag\tdistinct_adopters\ttotal_usages\n";
      std::size_t rank = 0;
      for (const auto& p : rank_frequency(pops))
        out << ++rank << '\t' << d.label(p.tag) << '\t' << p.distinct_adopters << '\t' << p.total_usages << '\n';
    }
  } else {
    rep.input(a.samples);
    samples = read_samples(a.samples);
  }
  if (!a.histogram.empty()) {
    std::vector<std::int64_t> sorted = samples;
    std::sort(sorted.begin(), sorted.end());
    auto out = io::open_out(a.histogram);
    out << "value\tcount\tccdf\n";
    for (std::size_t i = 0; i < sorted.size();) {
      std::size_t j = i;
      while (j < sorted.size() && sorted[j] == sorted[i]) ++j;
      out << sorted[i] << '\t' << (j - i) << '\t'
          << io::fmt_double(static_cast<double>(sorted.size() - i) / static_cast<double>(sorted.size())) << '\n';
      i = j;
    }
  }
  auto fit = fit_power_law(samples, opt);
  rep.result() = {{"alpha", fit.alpha},
                  {"xmin", fit.xmin},
                  {"ks_distance", fit.ks_distance},
                  {"gof_p", std::isnan(fit.gof_p) ? json(nullptr) : json(fit.gof_p)},
                  {"n_tail", fit.n_tail},
                  {"n", fit.n},
                  {"replicates", fit.replicates}};
  auto out = rep.finish();
  if (!a.summary.empty()) write_json(a.summary, out);
  return out;
}

// ---------------------------------------------------------------------------
// curve

struct CurveArgs {
  std::string snapshot;
  std::string tag;
  std::string bucket = "1d";
  std::string out;
  std::string summary;
};

inline json curve(const CurveArgs& a) {
  Report rep("curve");
  rep.config() = {{"snapshot", a.snapshot}, {"tag", a.tag}, {"bucket", a.bucket}};
  auto bucket = parse_duration_ms(a.bucket);
  if (!bucket) throw UsageError("bad --bucket duration '" + a.bucket + "'");
  rep.config()["bucket_ms"] = *bucket;
  rep.input(a.snapshot);
  auto d = snapshot::load(a.snapshot);
  auto x = d.find_tag(a.tag);
  if (!x) throw DataError("unknown tag '" + a.tag + "'");
  auto c = adoption_curve(d, *x, *bucket);
  if (!a.out.empty()) {
    auto out = io::open_out(a.out);
    out << "time\tnew_first_usages\tcumulative_first_usages\tsubsequent_usages\tsaturation\n";
    for (const auto& p : c.points)
      out << p.time << '\t' << p.new_first_usages << '\t' << p.cumulative_first_usages << '\t' << p.subsequent_usages
          << '\t' << io::fmt_double(p.saturation) << '\n';
  }
  std::uint64_t subsequent = 0;
  for (const auto& p : c.points) subsequent += p.subsequent_usages;
  rep.result() = {{"points", c.points.size()},
                  {"distinct_adopters", c.points.empty() ? 0 : c.points.back().cumulative_first_usages},
                  {"subsequent_usages", subsequent},
                  {"final_saturation", c.points.empty() ? 0.0 : c.points.back().saturation},
                  {"users", d.user_count()}};
  auto out = rep.finish();
  if (!a.summary.empty()) write_json(a.summary, out);
  return out;
}

// ---------------------------------------------------------------------------
// correlate

struct CorrelateArgs {
  std::string snapshot;
  std::size_t bins = 10;
  CorrelationMethod method = CorrelationMethod::spearman;
  ExposureOptions options;
  std::string out;
  std::string summary;
};

inline json correlation_json(const CorrelationReport& c) {
  return {{"method", c.method == CorrelationMethod::spearman ? "spearman" : "pearson"},
          {"rho", c.rho},
          {"n_pairs", c.n_pairs}};
}

inline void write_bins_tsv(std::ostream& out, const CorrelationReport& c) {
  out << "popularity_lo\tpopularity_hi\tmean_exposure\tcount\n";
  for (const auto& b : c.bins)
    out << io::fmt_double(b.popularity_lo) << '\t' << io::fmt_double(b.popularity_hi) << '\t'
        << io::fmt_double(b.mean_exposure) << '\t' << b.count << '\n';
}

inline json correlate(const CorrelateArgs& a) {
  Report rep("correlate");
  rep.config() = {{"snapshot", a.snapshot},
                  {"bins", a.bins},
                  {"method", a.method == CorrelationMethod::spearman ? "spearman" : "pearson"},
                  {"ties", a.options.ties == TieRule::strict ? "strict" : "inclusive"},
                  {"popularity", a.options.popularity == PopularityMode::adopters ? "adopters" : "usages"}};
  rep.input(a.snapshot);
  auto d = snapshot::load(a.snapshot);
  auto batch = all_exposures(d, a.options);
  auto c = popularity_threshold_correlation(batch.records, a.bins, a.method);
  if (!a.out.empty()) {
    auto out = io::open_out(a.out);
    write_bins_tsv(out, c);
  }
  rep.result() = correlation_json(c);
  auto out = rep.finish();
  if (!a.summary.empty()) write_json(a.summary, out);
  return out;
}

// ---------------------------------------------------------------------------
// stats

struct StatsArgs {
  std::string snapshot;
  std::string summary;
};

inline json stats(const StatsArgs& a) {
  Report rep("stats");
  rep.config() = {{"snapshot", a.snapshot}};
  rep.input(a.snapshot);
  auto d = snapshot::load(a.snapshot);
  const auto& c = d.counts();
  auto gc = d.giant_component();
  auto density_or_null = [&](DensityScope s) {
    try {
      return json(d.density(s));
    } catch (const DataError&) {
      return json(nullptr);
    }
  };
  rep.result() = {{"users", c.users},
                  {"tags", c.tags},
                  {"first_usages", c.first_usages},
                  {"total_usages", c.total_usages},
                  {"edges", c.edges},
                  {"self_loops_dropped", c.self_loops_dropped},
                  {"duplicate_edges_dropped", c.duplicate_edges_dropped},
                  {"timestamped_edges", d.has_timestamped_edges()},
                  {"giant_component_users", gc.size()},
                  {"density", density_or_null(DensityScope::all)},
                  {"giant_component_density", density_or_null(DensityScope::giant_component)}};
  auto out = rep.finish();
  if (!a.summary.empty()) write_json(a.summary, out);
  return out;
}

// ---------------------------------------------------------------------------
// simulate
//
// sim.json schema:
//   {
//     "model": "threshold" | "cascade" | "learning",          (optional; --model wins)
//     "graph": {"kind": "erdos_renyi", "n": 500, "mean_out_degree": 8}
//            | {"kind": "preferential_attachment", "n": 2000, "m": 3}
//            | {"kind": "snapshot", "path": "data.cscd"},
//     "seeds": {"random": 5} | {"users": ["u001", "u042"]},
//     "thresholds": {"kind": "constant", "value": 0.3}
//                 | {"kind": "uniform", "lo": 0, "hi": 1}
//                 | {"kind": "truncated_normal", "mean": 0.2, "sd": 0.1},
//     "p": 0.1,          (cascade transmission probability)
//     "lag": 2,          (learning evaluation window)
//     "max_steps": 1000
//   }

struct SimulateArgs {
  std::string model;  // overrides the config's model when non-empty
  std::string config_path;
  std::optional<json> config;  // used instead of config_path when set
  std::size_t runs = 1;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  std::string summary;
};

struct SimSetup {
  FollowerGraph graph;
  std::vector<std::string> labels;
  SimConfig base;
  json graph_json;
};

inline SimSetup parse_sim_config(const json& j, const std::string& model_override, std::uint64_t root_seed,
                                 const fs::path& base_dir, Report* rep) {
  SimSetup s;
  auto req = [&](const json& o, const char* key) -> const json& {
    if (!o.contains(key)) throw UsageError(std::string("sim config: missing '") + key + "'");
    return o.at(key);
  };
  try {
    std::string model = model_override.empty() ? j.value("model", std::string("threshold")) : model_override;
    s.base.model = parse_model(model);
    const auto& g = req(j, "graph");
    std::string kind = req(g, "kind").get<std::string>();
    const auto graph_seed = derive_seed(root_seed, 0xffffffffULL);
    if (kind == "erdos_renyi") {
      s.graph = erdos_renyi({req(g, "n").get<std::size_t>(), req(g, "mean_out_degree").get<double>()}, graph_seed);
    } else if (kind == "preferential_attachment") {
      s.graph = preferential_attachment({req(g, "n").get<std::size_t>(), req(g, "m").get<std::size_t>()}, graph_seed);
    } else if (kind == "snapshot") {
      fs::path p = req(g, "path").get<std::string>();
      if (p.is_relative()) p = base_dir / p;
      if (rep) rep->input(p.string());
      auto d = snapshot::load(p.string());
      s.graph = FollowerGraph::from_dataset(d);
      s.labels = d.user_labels();
    } else {
      throw UsageError("sim config: unknown graph kind '" + kind + "'");
    }
    s.graph_json = g;
    if (s.labels.empty()) {
      s.labels.resize(s.graph.size());
      for (std::size_t u = 0; u < s.graph.size(); ++u) s.labels[u] = sim_user_label(u, s.graph.size());
    }

    const json seeds = j.value("seeds", json{{"random", 1}});
    if (seeds.contains("users")) {
      for (const auto& lbl : seeds.at("users")) {
        auto it = std::find(s.labels.begin(), s.labels.end(), lbl.get<std::string>());
        if (it == s.labels.end()) throw UsageError("sim config: unknown seed user " + lbl.get<std::string>());
        s.base.seeds.users.push_back(static_cast<std::uint32_t>(it - s.labels.begin()));
      }
      if (s.base.seeds.users.empty()) throw UsageError("sim config: empty seed list");
    } else {
      s.base.seeds.random_count = req(seeds, "random").get<std::size_t>();
    }

    const json th = j.value("thresholds", json{{"kind", "uniform"}, {"lo", 0.0}, {"hi", 1.0}});
    std::string tkind = req(th, "kind").get<std::string>();
    if (tkind == "constant")
      s.base.thresholds = ConstantThreshold{req(th, "value").get<double>()};
    else if (tkind == "uniform")
      s.base.thresholds = UniformThreshold{th.value("lo", 0.0), th.value("hi", 1.0)};
    else if (tkind == "truncated_normal")
      s.base.thresholds = TruncatedNormalThreshold{req(th, "mean").get<double>(), req(th, "sd").get<double>()};
    else
      throw UsageError("sim config: unknown threshold kind '" + tkind + "'");

    s.base.transmission_p = j.value("p", 0.1);
    s.base.lag = j.value("lag", std::size_t{0});
    s.base.max_steps = j.value("max_steps", std::size_t{1000});
  } catch (const json::exception& e) {
    throw UsageError(std::string("sim config: ") + e.what());
  }
  return s;
}

inline json simulate(const SimulateArgs& a) {
  Report rep("simulate");
  json cfg_json;
  fs::path base_dir = ".";
  if (a.config) {
    cfg_json = *a.config;
  } else {
    if (a.config_path.empty()) throw UsageError("simulate needs --config");
    rep.input(a.config_path);
    std::ifstream in(a.config_path);
    if (!in) throw DataError("cannot read file: " + a.config_path);
    try {
      cfg_json = json::parse(in);
    } catch (const json::exception& e) {
      throw UsageError("sim config: " + std::string(e.what()));
    }
    base_dir = fs::path(a.config_path).parent_path();
  }
  if (a.runs < 1) throw UsageError("--runs must be >= 1");
  if (a.out_dir.empty()) throw UsageError("simulate needs --out");
  rep.config() = {{"model_flag", a.model}, {"sim_config", cfg_json}, {"runs", a.runs}, {"out", a.out_dir}};
  const auto root = resolve_seed(a.seed, rep.config());
  auto setup = parse_sim_config(cfg_json, a.model, root, base_dir, &rep);
  rep.config()["model"] = to_string(setup.base.model);

  fs::create_directories(a.out_dir);
  {
    std::vector<RawFollow> rows;
    rows.reserve(setup.graph.edge_count());
    for (auto [s, d] : setup.graph.edges()) rows.push_back({setup.labels[s], setup.labels[d], std::nullopt});
    auto out = io::open_out((fs::path(a.out_dir) / "follows.csv").string());
    io::write_follows_csv(out, rows);
  }

  std::vector<SimRun> runs(a.runs);
  parallel_for(a.runs, [&](std::size_t r) {
    SimConfig cfg = setup.base;
    cfg.seed = derive_seed(root, r);
    runs[r] = cascade::simulate(setup.graph, cfg);
  });

  auto combined = io::open_out((fs::path(a.out_dir) / "adoptions.csv").string());
  combined << "user_id,tag_id,timestamp\n";
  json run_list = json::array();
  double sat_total = 0;
  for (std::size_t r = 0; r < a.runs; ++r) {
    const auto& run = runs[r];
    char name[32];
    std::snprintf(name, sizeof name, "run_%04zu", r);
    std::vector<RawAdoption> rows;
    std::vector<std::pair<std::int64_t, std::uint32_t>> order;
    for (std::uint32_t u = 0; u < run.adoption_step.size(); ++u)
      if (run.adoption_step[u] >= 0) order.emplace_back(run.adoption_step[u], u);
    std::sort(order.begin(), order.end());
    // Steps are written as whole seconds.
    for (auto [step, u] : order) rows.push_back({setup.labels[u], name, step * 1000});
    fs::path dir = fs::path(a.out_dir) / name;
    {
      auto out = io::open_out((dir / "adoptions.csv").string());
      io::write_adoptions_csv(out, rows);
    }
    for (const auto& row : rows) combined << csv::quote(row.user) << ',' << name << ',' << row.time / 1000 << '\n';

    json manifest = {{"run", r},
                     {"tag", name},
                     {"model", to_string(run.model)},
                     {"seed", derive_seed(root, r)},
                     {"adoptions", "adoptions.csv"},
                     {"follows", "../follows.csv"},
                     {"seed_users", json::array()},
                     {"steps", run.steps},
                     {"converged", run.converged},
                     {"new_adopters_per_step", run.new_adopters_per_step},
                     {"final_saturation", run.final_saturation}};
    for (auto s : run.seed_users) manifest["seed_users"].push_back(setup.labels[s]);
    if (run.model == ModelKind::cascade) {
      manifest["p"] = setup.base.transmission_p;
    } else {
      if (run.model == ModelKind::learning) manifest["lag"] = setup.base.lag;
      // Keyed by label, sorted for stable output.
      std::vector<std::pair<std::string, double>> th;
      for (std::size_t u = 0; u < run.thresholds.size(); ++u) th.emplace_back(setup.labels[u], run.thresholds[u]);
      std::sort(th.begin(), th.end());
      json tj = json::object();
      for (auto& [l, v] : th) tj[l] = v;
      manifest["thresholds"] = std::move(tj);
    }
    write_json((dir / "manifest.json").string(), manifest);
    run_list.push_back({{"run", r},
                        {"tag", name},
                        {"adopters", rows.size()},
                        {"steps", run.steps},
                        {"converged", run.converged},
                        {"final_saturation", run.final_saturation}});
    sat_total += run.final_saturation;
  }
  rep.result() = {{"graph", setup.graph_json},
                  {"users", setup.graph.size()},
                  {"edges", setup.graph.edge_count()},
                  {"runs", run_list},
                  {"mean_final_saturation", sat_total / static_cast<double>(a.runs)}};
  auto out = rep.finish();
  write_json((fs::path(a.out_dir) / "report.json").string(), out);
  if (!a.summary.empty()) write_json(a.summary, out);
  return out;
}

// ---------------------------------------------------------------------------
// recover

struct RecoverArgs {
  std::string dir;  // a simulate output directory or a single run directory
  std::string out;  // per-run TSV
  std::string summary;
};

struct RunRecovery {
  std::string tag;
  RecoveryReport report;
};

inline RunRecovery recover_run(const fs::path& run_dir, Report& rep) {
  auto manifest_path = run_dir / "manifest.json";
  std::ifstream in(manifest_path);
  if (!in) throw DataError("cannot read " + manifest_path.string());
  json m = json::parse(in, nullptr, false);
  if (m.is_discarded()) throw DataError("bad manifest " + manifest_path.string());
  if (m.value("model", std::string()) == "cascade")
    throw UsageError("recover: independent-cascade runs carry no planted thresholds (" + run_dir.string() + ")");
  if (!m.contains("thresholds")) throw DataError("manifest without thresholds: " + manifest_path.string());

  auto adoptions_path = (run_dir / m.value("adoptions", std::string("adoptions.csv"))).string();
  auto follows_path = (run_dir / m.value("follows", std::string("../follows.csv"))).string();
  rep.input(adoptions_path);
  auto ain = io::open_in(adoptions_path);
  auto fin = io::open_in(follows_path);
  auto adoptions = io::read_adoptions(ain, true, adoptions_path);
  auto follows = io::read_follows(fin, true, follows_path);
  auto d = Dataset::build(adoptions.rows, follows.rows);

  std::vector<std::optional<double>> planted(d.user_count());
  for (const auto& [label, v] : m.at("thresholds").items())
    if (auto u = d.find_user(label)) planted[u->index()] = v.get<double>();
  std::vector<bool> is_seed(d.user_count(), false);
  for (const auto& lbl : m.value("seed_users", json::array()))
    if (auto u = d.find_user(lbl.get<std::string>())) is_seed[u->index()] = true;
  return {m.value("tag", run_dir.filename().string()), compare_with_planted(d, planted, is_seed)};
}

inline json recover(const RecoverArgs& a) {
  Report rep("recover");
  rep.config() = {{"dir", a.dir}};
  fs::path root = a.dir;
  std::vector<fs::path> run_dirs;
  if (fs::exists(root / "manifest.json")) {
    run_dirs.push_back(root);
  } else {
    if (fs::exists(root / "follows.csv")) rep.input((root / "follows.csv").string());
    for (const auto& entry : fs::directory_iterator(root))
      if (entry.is_directory() && fs::exists(entry.path() / "manifest.json")) run_dirs.push_back(entry.path());
    std::sort(run_dirs.begin(), run_dirs.end());
  }
  if (run_dirs.empty()) throw DataError("no simulation runs found under " + a.dir);

  std::vector<RunRecovery> results;
  for (const auto& dir : run_dirs) results.push_back(recover_run(dir, rep));

  std::vector<ExposureRecord> pooled;
  std::uint64_t compared = 0, violations = 0;
  double min_margin = NAN;
  for (const auto& r : results) {
    compared += r.report.compared;
    violations += r.report.violations;
    if (r.report.compared && !(min_margin <= r.report.min_margin)) min_margin = r.report.min_margin;
    pooled.insert(pooled.end(), r.report.records.begin(), r.report.records.end());
  }
  if (!a.out.empty()) {
    auto out = io::open_out(a.out);
    out << "run\tcompared\tviolations\tmin_margin\tmean_margin\tspearman_rho\n";
    for (const auto& r : results)
      out << r.tag << '\t' << r.report.compared << '\t' << r.report.violations << '\t'
          << io::fmt_double(r.report.min_margin) << '\t' << io::fmt_double(r.report.mean_margin) << '\t'
          << io::fmt_double(r.report.spearman_rho) << '\n';
  }
  json rho = nullptr;
  try {
    rho = popularity_threshold_correlation(pooled, 1).rho;
  } catch (const StatsError&) {
  }
  rep.result() = {{"runs", results.size()},
                  {"compared", compared},
                  {"violations", violations},
                  {"min_margin", std::isnan(min_margin) ? json(nullptr) : json(min_margin)},
                  {"pooled_records", pooled.size()},
                  {"pooled_spearman_rho", rho}};
  auto out = rep.finish();
  if (!a.summary.empty()) write_json(a.summary, out);
  return out;
}

// ---------------------------------------------------------------------------
// pipeline
//
// {
//   "output_dir": "out",          (relative to the config file)
//   "seed": 42,                   (root seed for every stochastic stage)
//   "stages": [
//     {"stage": "simulate", "config": {...sim.json...}, "runs": 20, "model": "threshold"},
//     {"stage": "ingest", "source": "simulation"}       (or "adoptions"/"follows" paths),
//     {"stage": "thresholds", "ties": "strict", "popularity": "adopters"},
//     {"stage": "fit", "by": "adopters", "bootstrap": 100},
//     {"stage": "correlate", "bins": 10, "method": "spearman"},
//     {"stage": "recover"}
//   ]
// }
// Artifacts land in output_dir: dataset.cscd, exposures.tsv, thresholds.tsv,
// density.tsv, rank_frequency.tsv, popularity_hist.tsv, correlation.tsv,
// sim/, recovery.tsv, and the consolidated report.json.

struct PipelineArgs {
  std::string config_path;
  std::string summary;
};

inline json pipeline(const PipelineArgs& a) {
  Report rep("pipeline");
  rep.input(a.config_path);
  json cfg;
  {
    std::ifstream in(a.config_path);
    if (!in) throw DataError("cannot read file: " + a.config_path);
    try {
      cfg = json::parse(in);
    } catch (const json::exception& e) {
      throw UsageError("pipeline config: " + std::string(e.what()));
    }
  }
  if (!cfg.is_object() || !cfg.contains("stages") || !cfg["stages"].is_array() || cfg["stages"].empty())
    throw UsageError("pipeline config: 'stages' must be a non-empty array");
  const fs::path base = fs::path(a.config_path).parent_path();
  auto resolve = [&](const std::string& p) { return fs::path(p).is_relative() ? (base / p).string() : p; };
  const fs::path out_dir = resolve(cfg.value("output_dir", std::string("pipeline_out")));
  fs::create_directories(out_dir);
  std::optional<std::uint64_t> seed;
  if (cfg.contains("seed")) seed = cfg["seed"].get<std::uint64_t>();
  rep.config() = cfg;
  rep.config()["resolved_output_dir"] = out_dir.string();
  const std::uint64_t root = resolve_seed(seed, rep.config());

  const std::string snap = (out_dir / "dataset.cscd").string();
  const std::string sim_dir = (out_dir / "sim").string();
  json stage_reports = json::array();
  std::size_t index = 0;
  for (const auto& st : cfg["stages"]) {
    std::string name = st.value("stage", std::string());
    json r;
    try {
      auto stage_seed = derive_seed(root, index++);
      if (name == "ingest") {
        IngestArgs ia;
        if (st.value("source", std::string()) == "simulation") {
          ia.adoptions = (fs::path(sim_dir) / "adoptions.csv").string();
          ia.follows = (fs::path(sim_dir) / "follows.csv").string();
        } else {
          if (!st.contains("adoptions")) throw UsageError("missing 'adoptions'");
          ia.adoptions = resolve(st["adoptions"].get<std::string>());
          if (st.contains("follows")) ia.follows = resolve(st["follows"].get<std::string>());
        }
        ia.out = snap;
        ia.force = true;
        ia.strict = st.value("strict", false);
        ia.options.reverse_edges = st.value("reverse_edges", false);
        ia.options.symmetrize_edges = st.value("symmetrize_edges", false);
        r = ingest(ia);
      } else if (name == "thresholds") {
        ThresholdsArgs ta;
        ta.snapshot = snap;
        ta.out = (out_dir / "exposures.tsv").string();
        ta.per_user = (out_dir / "thresholds.tsv").string();
        ta.density = (out_dir / "density.tsv").string();
        ta.options.ties = parse_ties(st.value("ties", std::string("strict")));
        ta.options.popularity = parse_popularity(st.value("popularity", std::string("adopters")));
        r = thresholds(ta);
      } else if (name == "fit") {
        FitArgs fa;
        fa.snapshot = snap;
        fa.by_usages = st.value("by", std::string("adopters")) == "usages";
        fa.out = (out_dir / "rank_frequency.tsv").string();
        fa.histogram = (out_dir / "popularity_hist.tsv").string();
        fa.seed = stage_seed;
        fa.options.bootstrap_replicates = st.value("bootstrap", 100u);
        fa.options.min_tail = st.value("min_tail", fa.options.min_tail);
        fa.options.min_tail_fraction = st.value("min_tail_fraction", fa.options.min_tail_fraction);
        r = fit_powerlaw(fa);
      } else if (name == "correlate") {
        CorrelateArgs ca;
        ca.snapshot = snap;
        ca.bins = st.value("bins", std::size_t{10});
        ca.method = st.value("method", std::string("spearman")) == "pearson" ? CorrelationMethod::pearson
                                                                             : CorrelationMethod::spearman;
        ca.options.ties = parse_ties(st.value("ties", std::string("strict")));
        ca.options.popularity = parse_popularity(st.value("popularity", std::string("adopters")));
        ca.out = (out_dir / "correlation.tsv").string();
        r = correlate(ca);
      } else if (name == "simulate") {
        SimulateArgs sa;
        sa.model = st.value("model", std::string());
        if (st.contains("config") && st["config"].is_object()) {
          sa.config = st["config"];
        } else if (st.contains("config")) {
          sa.config_path = resolve(st["config"].get<std::string>());
        } else {
          throw UsageError("missing 'config'");
        }
        sa.runs = st.value("runs", std::size_t{1});
        sa.seed = stage_seed;
        sa.out_dir = sim_dir;
        r = simulate(sa);
      } else if (name == "recover") {
        RecoverArgs ra;
        ra.dir = sim_dir;
        ra.out = (out_dir / "recovery.tsv").string();
        r = recover(ra);
      } else if (name == "stats") {
        StatsArgs sa;
        sa.snapshot = snap;
        r = stats(sa);
      } else {
        throw UsageError("unknown stage '" + name + "'");
      }
    } catch (const Error& e) {
      throw Error(e.kind(), "pipeline stage '" + name + "' failed: " + e.what());
    } catch (const std::exception& e) {
      throw Error(ErrorKind::internal, "pipeline stage '" + name + "' failed: " + e.what());
    }
    r["stage"] = name;
    stage_reports.push_back(std::move(r));
  }
  rep.result() = {{"stages_run", stage_reports.size()}};
  json out = rep.finish();
  out["stages"] = std::move(stage_reports);
  write_json((out_dir / "report.json").string(), out);
  if (!a.summary.empty()) write_json(a.summary, out);
  return out;
}

}  // namespace cascade::cli

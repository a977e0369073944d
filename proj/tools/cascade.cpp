#include <iostream>

#include <CLI11.hpp>

#include "cascade/commands.hpp"

using namespace cascade;
namespace cl = cascade::cli;

namespace {

void emit(const cl::json& report) { std::cout << report.dump(2) << '\n'; }

std::optional<std::uint64_t> opt_seed(const std::string& s) {
  if (s.empty()) return std::nullopt;
  std::int64_t v = 0;
  if (!cascade::detail::parse_int(s, v) || v < 0) throw UsageError("--seed must be a non-negative integer");
  return static_cast<std::uint64_t>(v);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Measure adoption thresholds in follower networks and simulate diffusion models"};
  app.set_version_flag("--version", cl::kToolVersion);
  app.require_subcommand(1);

  // ingest
  cl::IngestArgs ia;
  auto* ingest = app.add_subcommand("ingest", "Parse adoption and follow CSVs into a binary snapshot");
  ingest->add_option("adoptions", ia.adoptions, "user_id,tag_id,timestamp CSV")->required();
  ingest->add_option("--follows", ia.follows, "src_id,dst_id[,since] CSV");
  ingest->add_option("-o,--out", ia.out, "Snapshot path")->required();
  ingest->add_option("--report", ia.report, "Write the JSON report here");
  ingest->add_flag("--force", ia.force, "Overwrite an existing snapshot of any version");
  ingest->add_flag("--strict", ia.strict, "Fail on the first malformed row");
  ingest->add_flag("--reverse-edges", ia.options.reverse_edges, "Rows are dst,src (observed,observer)");
  ingest->add_flag("--symmetrize", ia.options.symmetrize_edges, "Treat every follow as mutual");

  // thresholds
  cl::ThresholdsArgs ta;
  std::string ta_ties = "strict", ta_pop = "adopters";
  auto* thr = app.add_subcommand("thresholds", "Exposure at adoption and per-user thresholds");
  thr->add_option("snapshot", ta.snapshot)->required();
  thr->add_option("-o,--out", ta.out, "Per-adoption exposures TSV")->required();
  thr->add_option("--per-user", ta.per_user, "Per-user thresholds TSV");
  thr->add_option("--density", ta.density, "Smoothed distribution TSV");
  thr->add_option("--summary", ta.summary, "JSON report path");
  thr->add_option("--ties", ta_ties, "strict | inclusive")->check(CLI::IsMember({"strict", "inclusive"}));
  thr->add_option("--popularity", ta_pop, "adopters | usages")->check(CLI::IsMember({"adopters", "usages"}));

  // fit-powerlaw
  cl::FitArgs fa;
  std::string fa_by = "adopters", fa_seed;
  std::int64_t fa_xmin = 0;
  auto* fit = app.add_subcommand("fit-powerlaw", "Discrete power-law fit of tag popularity or integer samples");
  fit->add_option("snapshot", fa.snapshot);
  fit->add_option("--samples", fa.samples, "File with one positive integer per line");
  fit->add_option("--by", fa_by, "adopters | usages")->check(CLI::IsMember({"adopters", "usages"}));
  fit->add_option("--bootstrap", fa.options.bootstrap_replicates, "Goodness-of-fit replicates (0 disables)");
  fit->add_option("--xmin", fa_xmin, "Fix xmin instead of scanning");
  fit->add_option("--min-tail", fa.options.min_tail, "Smallest tail admitted by the xmin scan");
  fit->add_option("--min-tail-fraction", fa.options.min_tail_fraction, "Smallest tail as a fraction of n");
  fit->add_option("--seed", fa_seed);
  fit->add_option("-o,--out", fa.out, "Rank-frequency TSV");
  fit->add_option("--histogram", fa.histogram, "Value histogram TSV");
  fit->add_option("--summary", fa.summary, "JSON report path");

  // curve
  cl::CurveArgs ca;
  auto* curve = app.add_subcommand("curve", "Bucketed adoption curve of one tag");
  curve->add_option("snapshot", ca.snapshot)->required();
  curve->add_option("--tag", ca.tag)->required();
  curve->add_option("--bucket", ca.bucket, "Bucket width, e.g. 1h, 1d, 3600s");
  curve->add_option("-o,--out", ca.out, "Curve TSV")->required();
  curve->add_option("--summary", ca.summary, "JSON report path");

  // correlate
  cl::CorrelateArgs co;
  std::string co_method = "spearman", co_ties = "strict", co_pop = "adopters";
  auto* corr = app.add_subcommand("correlate", "Popularity at adoption versus exposure");
  corr->add_option("snapshot", co.snapshot)->required();
  corr->add_option("--bins", co.bins, "Logarithmic popularity bins");
  corr->add_option("--method", co_method)->check(CLI::IsMember({"spearman", "pearson"}));
  corr->add_option("--ties", co_ties)->check(CLI::IsMember({"strict", "inclusive"}));
  corr->add_option("--popularity", co_pop)->check(CLI::IsMember({"adopters", "usages"}));
  corr->add_option("-o,--out", co.out, "Binned TSV");
  corr->add_option("--summary", co.summary, "JSON report path");

  // simulate
  cl::SimulateArgs sa;
  std::string sa_seed;
  auto* sim = app.add_subcommand("simulate", "Run a diffusion model on a generated or loaded graph");
  sim->add_option("--model", sa.model, "threshold | cascade | learning (overrides the config)")
      ->check(CLI::IsMember({"threshold", "cascade", "learning"}));
  sim->add_option("--config", sa.config_path, "Simulation JSON")->required();
  sim->add_option("--runs", sa.runs, "Independent tags to simulate");
  sim->add_option("--seed", sa_seed);
  sim->add_option("-o,--out", sa.out_dir, "Output directory")->required();
  sim->add_option("--summary", sa.summary, "JSON report path");

  // recover
  cl::RecoverArgs ra;
  auto* rec = app.add_subcommand("recover", "Compare measured exposure with planted thresholds");
  rec->add_option("dir", ra.dir, "simulate output or one run directory")->required();
  rec->add_option("-o,--out", ra.out, "Per-run TSV");
  rec->add_option("--summary", ra.summary, "JSON report path");

  // stats
  cl::StatsArgs st;
  auto* stats = app.add_subcommand("stats", "Dataset counts, giant component and density");
  stats->add_option("snapshot", st.snapshot)->required();
  stats->add_option("--summary", st.summary, "JSON report path");

  // pipeline
  cl::PipelineArgs pa;
  auto* pipe = app.add_subcommand("pipeline", "Run stages from a JSON config");
  pipe->add_option("config", pa.config_path)->required();
  pipe->add_option("--summary", pa.summary, "JSON report path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    if (*ingest) {
      emit(cl::ingest(ia));
    } else if (*thr) {
      ta.options.ties = cl::parse_ties(ta_ties);
      ta.options.popularity = cl::parse_popularity(ta_pop);
      emit(cl::thresholds(ta));
    } else if (*fit) {
      fa.by_usages = fa_by == "usages";
      fa.seed = opt_seed(fa_seed);
      if (fit->count("--xmin")) fa.options.fixed_xmin = fa_xmin;
      emit(cl::fit_powerlaw(fa));
    } else if (*curve) {
      emit(cl::curve(ca));
    } else if (*corr) {
      co.method = co_method == "pearson" ? CorrelationMethod::pearson : CorrelationMethod::spearman;
      co.options.ties = cl::parse_ties(co_ties);
      co.options.popularity = cl::parse_popularity(co_pop);
      emit(cl::correlate(co));
    } else if (*sim) {
      sa.seed = opt_seed(sa_seed);
      emit(cl::simulate(sa));
    } else if (*rec) {
      emit(cl::recover(ra));
    } else if (*stats) {
      emit(cl::stats(st));
    } else if (*pipe) {
      emit(cl::pipeline(pa));
    }
  } catch (const cascade::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.exit_code();
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return 3;
  }
  return 0;
}

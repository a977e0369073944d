#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "cascade/commands.hpp"
#include "cascade/csv.hpp"
#include "golden_outputs.hpp"

using namespace cascade;
namespace cl = cascade::cli;
namespace fs = std::filesystem;

namespace {

using golden::slurp;
using golden::spit;

fs::path scratch(const std::string& name) {
  auto p = fs::temp_directory_path() / ("cascade_test_" + name + "_" + std::to_string(::getpid()));
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

int run_cli(const std::string& args) {
  int rc = std::system((std::string(CASCADE_CLI) + " " + args + " >/dev/null 2>&1").c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

const fs::path kData = CASCADE_TEST_DATA;
const fs::path kGolden = CASCADE_GOLDEN;

}  // namespace

TEST(Csv, QuotedFieldsAndCrlf) {
  std::istringstream in("a,\"b,c\",\"d\"\"e\"\r\n\"multi\nline\",x,y\n");
  csv::Reader r(in);
  csv::Record rec;
  ASSERT_TRUE(r.next(rec));
  EXPECT_EQ(rec.fields, (std::vector<std::string>{"a", "b,c", "d\"e"}));
  ASSERT_TRUE(r.next(rec));
  EXPECT_EQ(rec.fields[0], "multi\nline");
  EXPECT_EQ(rec.line, 2u);
  EXPECT_FALSE(r.next(rec));
  EXPECT_EQ(csv::quote("p,q"), "\"p,q\"");
  EXPECT_EQ(csv::quote("say \"hi\""), "\"say \"\"hi\"\"\"");
}

TEST(Timestamps, Formats) {
  EXPECT_EQ(parse_timestamp("1262304000"), 1262304000000LL);
  EXPECT_EQ(parse_timestamp("1262304000.25"), 1262304000250LL);
  EXPECT_EQ(parse_timestamp("2010-01-01T00:00:00Z"), 1262304000000LL);
  EXPECT_EQ(parse_timestamp("2010-01-01 01:00:00+01:00"), 1262304000000LL);
  EXPECT_EQ(parse_timestamp("2010-01-01"), 1262304000000LL);
  EXPECT_EQ(parse_timestamp("2010-01-01T00:00:00.5Z"), 1262304000500LL);
  EXPECT_EQ(parse_timestamp("-5"), -5000LL);
  EXPECT_FALSE(parse_timestamp("2010-02-30"));
  EXPECT_FALSE(parse_timestamp("yesterday"));
  EXPECT_FALSE(parse_timestamp(""));
}

TEST(Durations, Units) {
  EXPECT_EQ(parse_duration_ms("250ms"), 250);
  EXPECT_EQ(parse_duration_ms("30s"), 30000);
  EXPECT_EQ(parse_duration_ms("15m"), 900000);
  EXPECT_EQ(parse_duration_ms("1d"), 86400000);
  EXPECT_EQ(parse_duration_ms("2w"), 1209600000);
  EXPECT_EQ(parse_duration_ms("42"), 42);
  EXPECT_FALSE(parse_duration_ms("0s"));
  EXPECT_FALSE(parse_duration_ms("3y"));
}

TEST(Readers, BadTimestampRowDropped) {
  std::istringstream in("user_id,tag_id,timestamp\na,x,10\nb,x,oops\n\nc,x,11,extra\n");
  auto r = io::read_adoptions(in);
  EXPECT_EQ(r.rows.size(), 1u);
  EXPECT_EQ(r.dropped_rows, 2u);
  EXPECT_EQ(r.issues[0].line, 3u);
  std::istringstream strict("user_id,tag_id,timestamp\nb,x,oops\n");
  EXPECT_THROW(io::read_adoptions(strict, true), DataError);
}

TEST(Readers, Headers) {
  std::istringstream bom("\xEF\xBB\xBFuser_id,tag_id,timestamp\na,x,1\n");
  EXPECT_EQ(io::read_adoptions(bom).rows.size(), 1u);
  std::istringstream bad("user,tag,time\n");
  EXPECT_THROW(io::read_adoptions(bad), DataError);
  std::istringstream two("src_id,dst_id\na,b\n");
  auto f = io::read_follows(two);
  ASSERT_EQ(f.rows.size(), 1u);
  EXPECT_FALSE(f.rows[0].since);
  std::istringstream three("src_id,dst_id,since\na,b,\nb,a,100\n");
  auto g = io::read_follows(three);
  EXPECT_FALSE(g.rows[0].since);
  EXPECT_EQ(g.rows[1].since, 100000);
}

TEST(Writers, AdoptionsRoundTrip) {
  std::vector<RawAdoption> rows{{"a,b", "#x", 1000}, {"c", "y\"z", 1500}, {"d", "w", -2250}};
  std::ostringstream out;
  io::write_adoptions_csv(out, rows);
  std::istringstream in(out.str());
  auto back = io::read_adoptions(in, true);
  ASSERT_EQ(back.rows.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(back.rows[i].user, rows[i].user);
    EXPECT_EQ(back.rows[i].tag, rows[i].tag);
    EXPECT_EQ(back.rows[i].time, rows[i].time);
  }
}

TEST(Ingest, ReportCountsAndSnapshotRoundTrip) {
  auto dir = scratch("ingest");
  cl::IngestArgs a;
  a.adoptions = (kData / "adoptions.csv").string();
  a.follows = (kData / "follows.csv").string();
  a.out = (dir / "d.cscd").string();
  auto rep = cl::ingest(a);
  EXPECT_EQ(rep["result"]["dropped_rows"], 1);
  EXPECT_EQ(rep["result"]["adoption_rows"], 15);
  EXPECT_EQ(rep["result"]["self_loops_dropped"], 1);
  EXPECT_EQ(rep["result"]["duplicate_edges_dropped"], 1);
  EXPECT_EQ(rep["inputs"].size(), 2u);
  EXPECT_EQ(rep["inputs"][0]["sha256"].get<std::string>().size(), 64u);

  std::ifstream ain(a.adoptions), fin(a.follows);
  auto rows = io::read_adoptions(ain);
  auto follows = io::read_follows(fin);
  auto direct = Dataset::build(rows.rows, follows.rows);
  EXPECT_EQ(snapshot::load(a.out), direct);
  // Re-ingesting gives a byte-identical snapshot.
  auto first = slurp(a.out);
  cl::ingest(a);
  EXPECT_EQ(slurp(a.out), first);
  fs::remove_all(dir);
}

TEST(Ingest, RefusesForeignVersionWithoutForce) {
  auto dir = scratch("version");
  auto snap = dir / "d.cscd";
  spit(snap, std::string("CSCD\x02\x00\x00\x00", 8));
  cl::IngestArgs a;
  a.adoptions = (kData / "adoptions.csv").string();
  a.out = snap.string();
  EXPECT_THROW(cl::ingest(a), UsageError);
  spit(snap, "not a snapshot");
  EXPECT_THROW(cl::ingest(a), UsageError);
  a.force = true;
  EXPECT_NO_THROW(cl::ingest(a));
  a.force = false;
  EXPECT_NO_THROW(cl::ingest(a));  // same version may be replaced
  fs::remove_all(dir);
}

TEST(Pipeline, EmptyStageListRejected) {
  auto dir = scratch("empty");
  spit(dir / "p.json", R"({"output_dir": "out", "stages": []})");
  EXPECT_THROW(cl::pipeline({(dir / "p.json").string(), ""}), UsageError);
  fs::remove_all(dir);
}

TEST(Pipeline, FailureNamesStage) {
  auto dir = scratch("fail");
  spit(dir / "p.json", R"({"output_dir": "out", "seed": 1, "stages": [{"stage": "ingest", "adoptions": "missing.csv"}]})");
  try {
    cl::pipeline({(dir / "p.json").string(), ""});
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("stage 'ingest'"), std::string::npos);
    EXPECT_EQ(e.exit_code(), 2);
  }
  fs::remove_all(dir);
}

TEST(Pipeline, IngestOnlyEqualsSubcommand) {
  auto dir = scratch("ingestonly");
  fs::copy(kData / "adoptions.csv", dir / "adoptions.csv");
  fs::copy(kData / "follows.csv", dir / "follows.csv");
  spit(dir / "p.json",
       R"({"output_dir": "out", "seed": 1, "stages": [{"stage": "ingest", "adoptions": "adoptions.csv", "follows": "follows.csv"}]})");
  auto rep = cl::pipeline({(dir / "p.json").string(), ""});
  cl::IngestArgs a{(dir / "adoptions.csv").string(), (dir / "follows.csv").string(), (dir / "direct.cscd").string()};
  auto direct = cl::ingest(a);
  EXPECT_EQ(slurp(dir / "out" / "dataset.cscd"), slurp(dir / "direct.cscd"));
  EXPECT_EQ(rep["stages"][0]["result"], direct["result"]);
  fs::remove_all(dir);
}

TEST(Pipeline, ReportsIdenticalMinusTiming) {
  auto dir = scratch("determinism");
  spit(dir / "p.json", R"({
    "output_dir": "out", "seed": 7,
    "stages": [
      {"stage": "simulate", "runs": 4, "config": {
        "graph": {"kind": "erdos_renyi", "n": 150, "mean_out_degree": 5},
        "seeds": {"random": 3}, "thresholds": {"kind": "uniform"}}},
      {"stage": "ingest", "source": "simulation"},
      {"stage": "thresholds"},
      {"stage": "correlate", "bins": 4},
      {"stage": "fit", "bootstrap": 5, "min_tail": 2},
      {"stage": "recover"}
    ]})");
  auto a = cl::pipeline({(dir / "p.json").string(), ""});
  std::map<std::string, std::string> first;
  for (const auto& e : fs::recursive_directory_iterator(dir / "out"))
    if (e.is_regular_file() && e.path().filename() != "report.json") first[e.path().string()] = slurp(e.path());
  auto b = cl::pipeline({(dir / "p.json").string(), ""});
  EXPECT_EQ(cl::without_timing(a), cl::without_timing(b));
  for (const auto& [p, content] : first) EXPECT_EQ(slurp(p), content) << p;
  EXPECT_EQ(a["stages"][5]["result"]["violations"], 0);
  fs::remove_all(dir);
}

TEST(Simulate, MissingSeedIsRandomAndReported) {
  auto dir = scratch("randseed");
  cl::SimulateArgs s;
  s.config = cl::json::parse(R"({"graph": {"kind": "erdos_renyi", "n": 50, "mean_out_degree": 3}})");
  s.out_dir = (dir / "sim").string();
  auto rep = cl::simulate(s);
  EXPECT_EQ(rep["config"]["seed_source"], "random");
  EXPECT_TRUE(rep["config"]["seed"].is_number_unsigned());
  fs::remove_all(dir);
}

TEST(Recover, CascadeRunIsError) {
  auto dir = scratch("reccascade");
  cl::SimulateArgs s;
  s.config = cl::json::parse(R"({"model": "cascade", "p": 0.5, "graph": {"kind": "erdos_renyi", "n": 50, "mean_out_degree": 3}})");
  s.seed = 3;
  s.out_dir = (dir / "sim").string();
  cl::simulate(s);
  EXPECT_THROW(cl::recover({(dir / "sim").string(), "", ""}), UsageError);
  fs::remove_all(dir);
}

TEST(Cli, ExitCodes) {
  auto dir = scratch("exit");
  EXPECT_EQ(run_cli("--help"), 0);
  EXPECT_EQ(run_cli(""), 1);
  EXPECT_EQ(run_cli("ingest --no-such-flag x -o y"), 1);
  EXPECT_EQ(run_cli("ingest " + (dir / "missing.csv").string() + " -o " + (dir / "o.cscd").string()), 2);
  spit(dir / "bad.csv", "wrong,header\n");
  EXPECT_EQ(run_cli("ingest " + (dir / "bad.csv").string() + " -o " + (dir / "o.cscd").string()), 2);
  EXPECT_EQ(run_cli("ingest " + (kData / "adoptions.csv").string() + " -o " + (dir / "o.cscd").string()), 0);
  EXPECT_EQ(run_cli("curve " + (dir / "o.cscd").string() + " --tag nope -o " + (dir / "c.tsv").string()), 2);
  EXPECT_EQ(run_cli("curve " + (dir / "o.cscd").string() + " --tag '#kawa' --bucket 3x -o " + (dir / "c.tsv").string()), 1);
  fs::remove_all(dir);
}

// Byte-for-byte comparison of every output against checked-in files.
// CASCADE_UPDATE_GOLDEN=1 rewrites them.
TEST(Golden, OutputsAreStable) {
  auto dir = scratch("golden");
  golden::produce(kData, dir);
  if (std::getenv("CASCADE_UPDATE_GOLDEN"))
    for (const auto& f : golden::files()) spit(kGolden / f, slurp(dir / f));
  EXPECT_EQ(golden::mismatches(dir, kGolden), std::vector<std::string>{});
  fs::remove_all(dir);
}

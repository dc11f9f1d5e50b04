#include <gtest/gtest.h>
#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "cli.hpp"
#include "ipfnet/io.hpp"

namespace ipfnet {
namespace {

namespace fs = std::filesystem;
using json = nlohmann::json;

struct Result {
  int code;
  std::string out;
  std::string err;
  json j() const { return json::parse(out); }
};

Result call(std::vector<std::string> args) {
  std::ostringstream out, err;
  int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("ipfnet_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
    write_network(dir_ / "toy.net",
                  SparseNetwork::from_dense({{1, 0, 0}, {1, 1, 0}, {0, 1, 0}, {0, 1, 1}}));
    write_vector(dir_ / "p.txt", {1, 1, 1, 1});
    write_vector(dir_ / "q.txt", {1, 1, 2});
  }
  void TearDown() override { fs::remove_all(dir_); }
  std::string path(const std::string& name) const { return (dir_ / name).string(); }
  std::vector<std::string> toy_args(const std::string& cmd) const {
    return {"--no-meta", cmd, "--network", path("toy.net"), "--p", path("p.txt"), "--q", path("q.txt")};
  }
  fs::path dir_;
};

TEST_F(Cli, CheckReportsBlockingSet) {
  auto r = call(toy_args("check"));
  ASSERT_EQ(r.code, cli::kExitOk) << r.err;
  auto j = r.j();
  EXPECT_EQ(j["schema_version"], "1");
  EXPECT_FALSE(j["feasible"].get<bool>());
  EXPECT_EQ(j["blocking"]["rows"], json({0, 1, 2}));
  EXPECT_DOUBLE_EQ(j["blocking"]["delta"].get<double>(), 1.0);
}

TEST_F(Cli, RunOnToyExitsInfeasibleWithHint) {
  auto r = call(toy_args("run"));
  EXPECT_EQ(r.code, cli::kExitInfeasible);
  auto j = r.j();
  EXPECT_EQ(j["ipf"]["status"], "oscillating");
  EXPECT_NE(j["hint"].get<std::string>().find("ipfnet repair"), std::string::npos);
}

TEST_F(Cli, RepairEmitsReportAndNetwork) {
  auto args = toy_args("repair");
  args.insert(args.end(), {"--out-network", path("fixed.net")});
  auto r = call(args);
  ASSERT_EQ(r.code, cli::kExitOk) << r.err;
  auto j = r.j();
  EXPECT_EQ(j["total_edges_added"], 1);
  EXPECT_EQ(j["history"][0]["edges"], json::array({json({0, 2})}));
  EXPECT_NEAR(j["exact_dlambda1"].get<double>(), 0.0007, 5e-5);
  EXPECT_DOUBLE_EQ(read_network(fs::path(path("fixed.net"))).at(0, 2), 0.01);

  auto check = call({"check", "--network", path("fixed.net"), "--p", path("p.txt"), "--q", path("q.txt")});
  EXPECT_TRUE(check.j()["feasible"].get<bool>());
}

TEST_F(Cli, RepairMinEdges) {
  auto args = toy_args("repair");
  args.insert(args.end(), {"--objective", "min-edges", "--tiebreak", "smallest-p"});
  auto r = call(args);
  ASSERT_EQ(r.code, cli::kExitOk) << r.err;
  EXPECT_EQ(r.j()["total_edges_added"], 1);
  EXPECT_EQ(r.j()["objective"], "min-edges");
}

TEST_F(Cli, InputErrorsExitThree) {
  EXPECT_EQ(call({"run", "--network", path("missing.net"), "--p", path("p.txt"), "--q", path("q.txt")}).code,
            cli::kExitInputError);
  EXPECT_EQ(call({"frobnicate"}).code, cli::kExitInputError);
  EXPECT_EQ(call({"repair", "--network", path("toy.net")}).code, cli::kExitInputError);
  auto args = toy_args("repair");
  args.insert(args.end(), {"--objective", "fewest"});
  EXPECT_EQ(call(args).code, cli::kExitInputError);
  write_vector(dir_ / "short.txt", {1, 1});
  EXPECT_EQ(call({"check", "--network", path("toy.net"), "--p", path("short.txt"), "--q", path("q.txt")}).code,
            cli::kExitInputError);
  EXPECT_EQ(call({"--help"}).code, cli::kExitOk);
}

TEST_F(Cli, SimulateRunEvaluateIsDeterministic) {
  auto sim = [&](const std::string& out) {
    return call({"--no-meta", "simulate", "--m", "15", "--n", "12", "--trials", "2", "--seed", "7",
                 "--sparsity", "0.2", "--out", path(out)});
  };
  ASSERT_EQ(sim("a").code, cli::kExitOk);
  ASSERT_EQ(sim("b").code, cli::kExitOk);
  std::ifstream fa(dir_ / "a" / "metrics.csv"), fb(dir_ / "b" / "metrics.csv");
  std::stringstream sa, sb;
  sa << fa.rdbuf();
  sb << fb.rdbuf();
  EXPECT_EQ(sa.str(), sb.str());
  EXPECT_NE(sa.str().find("converged"), std::string::npos);

  std::string t = path("a/trial_0/");
  std::vector<std::string> run{"--no-meta", "run", "--network", t + "xbar.net", "--p", t + "p.txt",
                               "--q", t + "q.txt", "--truth", t + "y.net", "--out-network", path("est.net"),
                               "--trace-csv", path("trace.csv")};
  auto r1 = call(run);
  auto r2 = call(run);
  ASSERT_EQ(r1.code, cli::kExitOk) << r1.err;
  EXPECT_EQ(r1.out, r2.out);
  EXPECT_EQ(r1.j()["ipf"]["status"], "converged");
  EXPECT_GT(r1.j()["cosine_similarity"].get<double>(), 0.5);
  EXPECT_TRUE(fs::exists(path("trace.csv")));

  auto ev = call({"evaluate", "--estimate", path("est.net"), "--truth", t + "y.net"});
  ASSERT_EQ(ev.code, cli::kExitOk) << ev.err;
  EXPECT_DOUBLE_EQ(ev.j()["cosine_similarity"].get<double>(), r1.j()["cosine_similarity"].get<double>());
}

TEST_F(Cli, SeedFromEnvironment) {
  ::setenv("IPFNET_SEED", "99", 1);
  auto r = call({"--no-meta", "simulate", "--m", "5", "--n", "5", "--out", path("s")});
  ::unsetenv("IPFNET_SEED");
  ASSERT_EQ(r.code, cli::kExitOk) << r.err;
  EXPECT_EQ(r.j()["seed"], 99);
}

TEST_F(Cli, MetaOnlyWithoutFlag) {
  auto args = toy_args("check");
  EXPECT_FALSE(call(args).j().contains("meta"));
  args.erase(args.begin());
  EXPECT_TRUE(call(args).j().contains("meta"));
}

TEST_F(Cli, DiagnoseAndBaselines) {
  ASSERT_EQ(call({"simulate", "--m", "20", "--n", "20", "--seed", "3", "--out", path("s")}).code, cli::kExitOk);
  std::string t = path("s/trial_0/");
  auto d = call({"--no-meta", "diagnose", "--network", t + "xbar.net", "--p", t + "p.txt", "--q", t + "q.txt",
                 "--observed", t + "y.net", "--u", t + "u.txt", "--v", t + "v.txt", "--residual-csv",
                 path("res.csv")});
  ASSERT_EQ(d.code, cli::kExitOk) << d.err;
  auto j = d.j();
  EXPECT_TRUE(j["fiedler"]["connected"].get<bool>());
  EXPECT_GT(j["dispersion"].get<double>(), 0.5);
  EXPECT_TRUE(j["error_bound"].contains("constant_free"));
  EXPECT_TRUE(j["finite_mle_condition"].contains("holds"));
  EXPECT_TRUE(fs::exists(path("res.csv")));

  for (std::string m : {"rank1", "row-share", "col-share", "scale"}) {
    auto b = call({"--no-meta", "baseline", "--method", m, "--network", t + "xbar.net", "--p", t + "p.txt",
                   "--q", t + "q.txt", "--truth", t + "y.net"});
    ASSERT_EQ(b.code, cli::kExitOk) << m << ": " << b.err;
    EXPECT_GT(b.j()["cosine_similarity"].get<double>(), 0.3);
  }
}

TEST_F(Cli, GravityFitAndInfer) {
  ASSERT_EQ(call({"simulate", "--model", "interaction", "--m", "30", "--n", "30", "--out", path("g")}).code,
            cli::kExitOk);
  std::string t = path("g/trial_0/");
  auto fit = call({"--no-meta", "gravity-fit", "--network", t + "xbar.net", "--distances", t + "distances.txt",
                   "--bin-width", "0.05"});
  ASSERT_EQ(fit.code, cli::kExitOk) << fit.err;
  auto j = fit.j();
  auto inf = call({"--no-meta", "gravity-infer", "--distances", t + "distances.txt", "--alpha",
                   std::to_string(j["alpha"].get<double>()), "--beta", std::to_string(j["beta"].get<double>()),
                   "--p", t + "p.txt", "--q", t + "q.txt", "--truth", t + "y.net"});
  ASSERT_EQ(inf.code, cli::kExitOk) << inf.err;
  EXPECT_GT(inf.j()["cosine_similarity"].get<double>(), 0.3);
}

TEST_F(Cli, IngestThenRunEveryHour) {
  std::ofstream csv(dir_ / "trips.csv");
  csv << "started_at,ended_at,start_station_id,end_station_id,start_lat,start_lng,end_lat,end_lng\n";
  const char* st[] = {"A", "B", "C"};
  for (int k = 0; k < 60; ++k) {
    int h = 8 + k % 3, mm = (k * 7) % 50;
    csv << "2023-09-01 " << (h < 10 ? "0" : "") << h << ':' << (mm < 10 ? "0" : "") << mm << ":00,"
        << "2023-09-01 " << (h < 10 ? "0" : "") << h << ':' << (mm + 5 < 10 ? "0" : "") << mm + 5 << ":00,"
        << st[k % 3] << ',' << st[(k / 3) % 3] << ",0,0,1,1\n";
  }
  csv.close();
  auto ing = call({"--no-meta", "ingest", "--trips", path("trips.csv"), "--out", path("ing"), "--start",
                   "2023-09-01 08:00:00", "--end", "2023-09-01 11:00:00"});
  ASSERT_EQ(ing.code, cli::kExitOk) << ing.err;
  EXPECT_EQ(ing.j()["trips"], 60);
  EXPECT_EQ(ing.j()["window"]["start"], "2023-09-01 08:00:00");
  EXPECT_TRUE(fs::exists(dir_ / "ing" / "ingest.json"));
  auto run = call({"--no-meta", "run", "--ingest-dir", path("ing"), "--workers", "3"});
  ASSERT_EQ(run.code, cli::kExitOk) << run.out << run.err;
  EXPECT_EQ(run.j()["hours"].size(), 3u);
  EXPECT_GT(run.j()["mean_cosine_similarity"].get<double>(), 0.0);
}

TEST_F(Cli, ExperimentCsv) {
  auto r = call({"experiment", "sparsity", "--m", "10", "--n", "10", "--trials", "3", "--levels", "0", "0.3",
                 "--out", path("sweep.csv")});
  ASSERT_EQ(r.code, cli::kExitOk) << r.err;
  std::ifstream in(dir_ / "sweep.csv");
  std::string line;
  int lines = 0;
  while (std::getline(in, line)) ++lines;
  EXPECT_EQ(lines, 3);
}

}  // namespace
}  // namespace ipfnet

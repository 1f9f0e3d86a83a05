#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "pplsim/io.hpp"

namespace fs = std::filesystem;
using pplsim::read_file;
using pplsim::write_file_atomic;

namespace {

struct Run {
  int code;
  std::string err;
  std::string out;
};

const fs::path& work() {
  static const fs::path dir = [] {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    auto d = fs::temp_directory_path() / (std::string("pplsim_cli_test_") + (info ? info->name() : "main"));
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

Run run(const std::string& args) {
  const auto out = work() / "stdout.txt";
  const auto err = work() / "stderr.txt";
  const std::string cmd = std::string(PPLSIM_CLI_PATH) + " --log-level error " + args + " >" +
                          out.string() + " 2>" + err.string();
  const int status = std::system(cmd.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, read_file(err), read_file(out)};
}

std::string p(const std::string& name) { return (work() / name).string(); }

void write_corpora() {
  std::string a, b;
  for (int i = 0; i < 60; ++i) {
    a += "the cat number " + std::to_string(i % 7) + " sat on the mat near the door\n";
    b += "a dog number " + std::to_string(i % 5) + " ran past the cat and the mat\n";
  }
  write_file_atomic(work() / "a.txt", a);
  write_file_atomic(work() / "b.txt", b);
}

}  // namespace

TEST(Cli, UnknownFlagIsUsageError) {
  const auto r = run("compare --bogus 1");
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("error[usage]:"), std::string::npos);
  EXPECT_EQ(run("").code, 1);
  EXPECT_EQ(run("frobnicate").code, 1);
  EXPECT_EQ(run("--version").code, 0);
}

TEST(Cli, MissingInputIsDataError) {
  const auto r = run("compare --a /nonexistent/a.jsonl --b /nonexistent/b.jsonl --out " + p("x"));
  EXPECT_EQ(r.code, 2);
  EXPECT_EQ(r.err.rfind("error[data]:", 0), 0u);
}

TEST(Cli, TrainScoreCompareCalibrateJudge) {
  write_corpora();
  ASSERT_EQ(run("train --corpus " + p("a.txt") + " --order 2 --ks 0.5 --name A --out " + p("a.nglm")).code, 0);
  ASSERT_EQ(run("train --corpus " + p("b.txt") + " --order 2 --ks 0.5 --name B --out " + p("b.nglm")).code, 0);
  ASSERT_EQ(run("noise --model " + p("a.nglm") + " --lambda 0.05 --seed 3 --name A-noised --out " + p("an.nglm")).code, 0);
  EXPECT_EQ(run("noise --model " + p("a.nglm") + " --lambda -1 --out " + p("bad.nglm")).code, 1);

  for (const char* m : {"a", "b", "an"}) {
    const auto r = run(std::string("score --model ") + p(std::string(m) + ".nglm") + " --corpus " + p("a.txt") +
                       " --samples 20 --seed 5 --out " + p(std::string(m) + ".jsonl"));
    ASSERT_EQ(r.code, 0) << r.err;
  }
  const auto header = pplsim::Json::parse(read_file(p("a.jsonl")).substr(0, read_file(p("a.jsonl")).find('\n')));
  EXPECT_EQ(header["header"]["subcommand"], "score");
  EXPECT_EQ(header["header"]["flags"]["corpus"]["seed"], 5);

  auto r = run("compare --metric curvature --a " + p("a.jsonl") + " --b " + p("b.jsonl") + " --out " + p("cross"));
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(fs::exists(work() / "cross" / "A__B__curvature.json"));
  EXPECT_EQ(read_file(work() / "cross" / "A__B__curvature.csv").substr(0, 17), "sample_id,n,value");
  const auto first = read_file(work() / "cross" / "A__B__curvature.json");
  ASSERT_EQ(run("compare --metric curvature --a " + p("a.jsonl") + " --b " + p("b.jsonl") + " --out " + p("cross")).code, 0);
  EXPECT_EQ(read_file(work() / "cross" / "A__B__curvature.json"), first);

  r = run("compare --metric curvature --a " + p("a.jsonl") + " --b " + p("an.jsonl") + " --out " + p("noised"));
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(run("compare --metric cosine --a " + p("a.jsonl") + " --b " + p("b.jsonl")).code, 1);

  r = run("calibrate --cross " + p("cross") + " --noised " + p("noised") + " --out " + p("threshold.json"));
  ASSERT_EQ(r.code, 0) << r.err;
  r = run("judge --report " + p("noised/A__A-noised__curvature.json") + " --threshold " + p("threshold.json"));
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("suspected_copy"), std::string::npos);
  r = run("judge --report " + p("cross/A__B__curvature.json") + " --threshold " + p("threshold.json"));
  EXPECT_NE(r.out.find("\"distinct\""), std::string::npos);

  // report: per-model curve CSVs
  r = run("report --curves " + p("a.jsonl") + " " + p("b.jsonl") + " --out " + p("plots"));
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(read_file(work() / "plots" / "A.csv").substr(0, 22), "sample_id,word_index,f");
}

TEST(Cli, DistributionsAndJsd) {
  write_corpora();
  ASSERT_EQ(run("train --corpus " + p("a.txt") + " --order 2 --ks 0.5 --name A --out " + p("a.nglm")).code, 0);
  auto r = run("dist --model " + p("a.nglm") + " --prefix \"the cat\"");
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = pplsim::Json::parse(r.out);
  double sum = 0.0;
  for (const auto& [k, v] : j["probs"].items()) sum += v.get<double>();
  EXPECT_NEAR(sum, 1.0, 1e-9);

  ASSERT_EQ(run("dist --model " + p("a.nglm") + " --corpus " + p("b.txt") + " --samples 5 --out " + p("da.jsonl")).code, 0);
  EXPECT_TRUE(fs::exists(work() / "da.vocab.json"));
  r = run("jsd --a " + p("da.jsonl") + " --b " + p("da.jsonl") + " --out " + p("jsd"));
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(std::stod(r.out), 0.0);
}

TEST(Cli, ScenarioIsByteIdenticalAcrossRunsAndThreads) {
  const auto one = run("scenario distribution-shift --seed 7 --samples 60 --out " + p("s1"));
  ASSERT_EQ(one.code, 0) << one.err;
  ASSERT_EQ(run("scenario distribution-shift --seed 7 --samples 60 --threads 3 --out " + p("s2")).code, 0);
  std::size_t files = 0;
  for (const auto& e : fs::recursive_directory_iterator(work() / "s1")) {
    if (!e.is_regular_file()) continue;
    ++files;
    const auto rel = fs::relative(e.path(), work() / "s1");
    EXPECT_EQ(read_file(e.path()), read_file(work() / "s2" / rel)) << rel;
  }
  EXPECT_GT(files, 10u);
  EXPECT_EQ(run("scenario no-such-scenario").code, 1);
  EXPECT_EQ(run("scenario distribution-shift --fixtures /nonexistent --out " + p("s3")).code, 2);
}

TEST(Cli, OutputDirectoryFromEnvironment) {
  write_corpora();
  ASSERT_EQ(run("train --corpus " + p("a.txt") + " --name A --out " + p("a.nglm")).code, 0);
  ASSERT_EQ(run("score --model " + p("a.nglm") + " --corpus " + p("a.txt") + " --samples 5 --out " + p("e.jsonl")).code, 0);
  const std::string env = "PPLSIM_OUT_DIR=" + p("envout") + " ";
  const std::string cmd = env + PPLSIM_CLI_PATH + " --log-level error compare --a " + p("e.jsonl") + " --b " +
                          p("e.jsonl") + " >/dev/null";
  ASSERT_EQ(std::system(cmd.c_str()), 0);
  EXPECT_TRUE(fs::exists(work() / "envout" / "A__A__curvature.json"));
}

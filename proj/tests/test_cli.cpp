#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;

namespace {

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::temp_directory_path() / (std::string("armac3_cli_") + info->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  // Runs the CLI inside the scratch directory; returns the exit status.
  int run(const std::string& args, std::string* out = nullptr) const {
    const fs::path log = dir_ / "stdout.txt";
    const std::string cmd = "cd '" + dir_.string() + "' && '" ARMAC3_CLI "' " + args + " > '" + log.string() +
                            "' 2>&1";
    const int status = std::system(cmd.c_str());
    if (out) *out = slurp(log);
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }

  fs::path path(const std::string& name) const { return dir_ / name; }

  static std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
  }

  static std::vector<std::string> lines(const fs::path& p) {
    std::ifstream in(p);
    std::vector<std::string> out;
    for (std::string l; std::getline(in, l);) out.push_back(l);
    return out;
  }

  void write(const std::string& name, const std::string& text) const {
    std::ofstream(dir_ / name, std::ios::binary) << text;
  }

  fs::path dir_;
};

std::string first_data_row(const std::vector<std::string>& ls) {
  bool header = false;
  for (const auto& l : ls) {
    if (l.empty() || l[0] == '#') continue;
    if (header) return l;
    header = true;
  }
  return {};
}

const char* kQuickTrain = "train --features sbm_features.csv --labels sbm_labels.txt --epochs 5 --hidden-dim 16 --runs 2";

}  // namespace

TEST_F(Cli, GenSbmWritesFixtureDeterministically) {
  ASSERT_EQ(run("gen-sbm --seed 7"), 0);
  EXPECT_EQ(lines(path("sbm_features.csv")).size(), 60u);
  EXPECT_EQ(lines(path("sbm_labels.txt")).size(), 60u);
  const std::string first = slurp(path("sbm_features.csv"));
  ASSERT_EQ(run("gen-sbm --seed 7 --graph-out planted.txt"), 0);
  EXPECT_EQ(slurp(path("sbm_features.csv")), first);
  EXPECT_FALSE(lines(path("planted.txt")).empty());
}

TEST_F(Cli, GenSbmRejectsInvertedProbabilities) {
  std::string out;
  EXPECT_NE(run("gen-sbm --p-in 0.1 --p-out 0.9", &out), 0);
  EXPECT_NE(out.find("error:"), std::string::npos);
}

TEST_F(Cli, FeaturesColumnCountFollowsBins) {
  fs::create_directories(path("dump"));
  for (int s = 0; s < 3; ++s) {
    std::ofstream f(path("dump") / ("sub" + std::to_string(s) + ".txt"));
    for (int r = 0; r < 9; ++r) {
      for (int v = 0; v < 5; ++v) f << r << '\t' << (v + s) / 10.0 << '\n';
    }
  }
  ASSERT_EQ(run("features --roi-dump dump -o q20.csv"), 0);
  auto rows = lines(path("q20.csv"));
  ASSERT_EQ(rows.size(), 4u);  // header plus three subjects
  EXPECT_EQ(std::count(rows[1].begin(), rows[1].end(), ','), 180);
  ASSERT_EQ(run("features --roi-dump dump --bins 10 -o q10.csv"), 0);
  rows = lines(path("q10.csv"));
  EXPECT_EQ(std::count(rows[1].begin(), rows[1].end(), ','), 90);
}

TEST_F(Cli, FeaturesNamesTheEmptyRoi) {
  fs::create_directories(path("dump"));
  std::ofstream(path("dump") / "alice.txt") << "0\t0.5\n2\t0.5\n";
  std::string out;
  EXPECT_EQ(run("features --roi-dump dump", &out), 3);
  EXPECT_NE(out.find("alice"), std::string::npos);
  EXPECT_NE(out.find("ROI 1"), std::string::npos);
}

TEST_F(Cli, TrainWritesAllArtifacts) {
  ASSERT_EQ(run("gen-sbm"), 0);
  std::string out;
  ASSERT_EQ(run(std::string(kQuickTrain) + " --graph-out edges.txt", &out), 0) << out;
  for (const char* f : {"armac3.ckpt", "armac3_log.csv", "armac3_report.csv", "edges.txt"}) {
    EXPECT_TRUE(fs::exists(path(f))) << f;
  }
  EXPECT_NE(out.find("accuracy"), std::string::npos);
  const auto log = lines(path("armac3_log.csv"));
  EXPECT_EQ(log.back().substr(0, 2), "4,");
}

TEST_F(Cli, ConfigProblemsExitWithConfigStatus) {
  ASSERT_EQ(run("gen-sbm"), 0);
  EXPECT_EQ(run("train --features sbm_features.csv --mode semi"), 2);
  write("bad.cfg", "alpha = 0.5\nlamda_con = 0.3\n");
  std::string out;
  EXPECT_EQ(run("train --features sbm_features.csv -c bad.cfg", &out), 2);
  EXPECT_NE(out.find("lamda_con"), std::string::npos);
  EXPECT_EQ(run("train --no-such-flag 1"), 2);
}

TEST_F(Cli, CommandLineOverridesConfigFile) {
  ASSERT_EQ(run("gen-sbm"), 0);
  write("a.cfg", "features = sbm_features.csv\nepochs = 50\nhidden_dim = 16\nn_runs = 1\n");
  ASSERT_EQ(run("train -c a.cfg --epochs 3"), 0);
  const auto log = lines(path("armac3_log.csv"));
  EXPECT_EQ(log.back().substr(0, 2), "2,");
}

TEST_F(Cli, EvalReproducesFirstRun) {
  ASSERT_EQ(run("gen-sbm"), 0);
  ASSERT_EQ(run(kQuickTrain), 0);
  ASSERT_EQ(run("eval --checkpoint armac3.ckpt --report-out again.csv"), 0);
  EXPECT_EQ(first_data_row(lines(path("again.csv"))), first_data_row(lines(path("armac3_report.csv"))));
}

TEST_F(Cli, CorruptCheckpointIsFormatError) {
  ASSERT_EQ(run("gen-sbm"), 0);
  ASSERT_EQ(run(kQuickTrain), 0);
  {
    std::fstream f(path("armac3.ckpt"), std::ios::in | std::ios::out | std::ios::binary);
    f.put('X');
  }
  EXPECT_EQ(run("eval --checkpoint armac3.ckpt"), 5);
  EXPECT_EQ(run("eval --checkpoint missing.ckpt"), 5);
}

TEST_F(Cli, CompareReportsPValues) {
  std::string a = "run,accuracy,precision,recall,f1,auc\n", b = a;
  for (int i = 0; i < 10; ++i) {
    a += std::to_string(i) + ",0.9" + std::to_string(i) + ",0.8,0.8,0.8,nan\n";
    b += std::to_string(i) + ",0.5" + std::to_string(i) + ",0.8,0.8,0.8,nan\n";
  }
  write("a.csv", a);
  write("b.csv", b);
  std::string out;
  ASSERT_EQ(run("eval --compare a.csv b.csv", &out), 0);
  EXPECT_NE(out.find("accuracy,0.0010,55,10,exact"), std::string::npos) << out;
  EXPECT_NE(out.find("auc,nan"), std::string::npos);
}

TEST_F(Cli, RepeatedTrainIsByteIdentical) {
  ASSERT_EQ(run("gen-sbm"), 0);
  const std::string cmd = std::string(kQuickTrain) + " --checkpoint-every 2";
  ASSERT_EQ(run(cmd + " --checkpoint a.ckpt --log-out a.log --report-out a.csv"), 0);
  ASSERT_EQ(run(cmd + " --checkpoint b.ckpt --log-out b.log --report-out b.csv"), 0);
  EXPECT_EQ(slurp(path("a.ckpt")), slurp(path("b.ckpt")));
  EXPECT_EQ(slurp(path("a.log")), slurp(path("b.log")));
  EXPECT_EQ(slurp(path("a.csv")), slurp(path("b.csv")));
  EXPECT_TRUE(fs::exists(path("a.ckpt.iter2")));
  EXPECT_TRUE(fs::exists(path("a.ckpt.iter4")));
}

TEST_F(Cli, TrainFromRoiDumpWithSubjectLabels) {
  fs::create_directories(path("dump"));
  std::string labels;
  for (int s = 0; s < 8; ++s) {
    const std::string id = "sub" + std::to_string(s);
    std::ofstream f(path("dump") / (id + ".txt"));
    const double shift = s % 2 ? 0.6 : 0.1;
    for (int r = 0; r < 3; ++r) {
      for (int v = 0; v < 6; ++v) f << r << '\t' << shift + 0.05 * v << '\n';
    }
    labels += id + "," + std::to_string(s % 2) + "\n";
  }
  write("labels.csv", labels);
  std::string out;
  ASSERT_EQ(run("train --roi-dump dump --bins 4 --labels labels.csv --epochs 3 --hidden-dim 8 --runs 1", &out), 0)
      << out;
  EXPECT_NE(out.find("8 nodes"), std::string::npos) << out;
  EXPECT_EQ(run("train --epochs 3"), 2);
}

#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <sstream>

#include "staple/cli.hpp"

namespace {

using namespace staple;
namespace fs = std::filesystem;

const fs::path kFixtures = STAPLE_FIXTURES_DIR;

struct Run {
  int status = -1;
  std::string out;
  std::string err;
};

/// Runs the built binary through the shell, capturing both streams.
Run forge(const std::string& args, const fs::path& work) {
  const auto out = work / "stdout.txt";
  const auto err = work / "stderr.txt";
  const std::string cmd =
      std::string("'") + STAPLE_FORGE_BIN + "' " + args + " >'" + out.string() + "' 2>'" + err.string() + "'";
  const int raw = std::system(cmd.c_str());
  Run r;
  r.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  r.out = read_file(out);
  r.err = read_file(err);
  return r;
}

std::vector<std::string> lines(const std::string& text) { return cli::lines_of(text); }

class CliTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    work_ = fs::temp_directory_path() / "staple_cli_test";
    fs::remove_all(work_);
    fs::create_directories(work_);
    for (const char* dir : {"fwd", "bwd"}) {
      cli::TrainCommandOptions opt;
      opt.parallel = kFixtures / "parallel.tsv";
      opt.iterations = 5;
      opt.out_dir = work_ / dir;
      opt.direction = dir;
      opt.created_at = 0;
      std::ostringstream out, err;
      ASSERT_EQ(cli::cmd_train(opt, out, err), 0) << err.str();
    }
  }
  static void TearDownTestSuite() { fs::remove_all(work_); }

  static fs::path work_;
};

fs::path CliTest::work_;

cli::SweepOptions fixture_sweep(const fs::path& work) {
  cli::SweepOptions opt;
  opt.series = work / "fwd";
  opt.backward = work / "bwd";
  opt.gold = kFixtures / "gold.txt";
  opt.spec.n_values = {1, 5};
  opt.spec.n_prime_values = {1, 3};
  opt.spec.m_values = {1, 2, 3, 4};
  return opt;
}

TEST_F(CliTest, ScoreClarityFixture) {
  cli::ScoreOptions opt{kFixtures / "clarity_gold.txt", kFixtures / "clarity_pred.txt", "default", std::nullopt};
  std::ostringstream out, err;
  EXPECT_EQ(cli::cmd_score(opt, out, err), 0);
  const auto text = lines(out.str());
  ASSERT_FALSE(text.empty());
  EXPECT_EQ(text.back(), "macro_f1=0.561449");
  EXPECT_NE(out.str().find("q1\t100.00\t39.03\t56.14"), std::string::npos);
}

TEST_F(CliTest, ScorePerfectPredictions) {
  std::istringstream gold_in(read_file(kFixtures / "gold.txt"));
  const auto golds = corpus::parse_gold(gold_in, corpus::NormalizationPolicy::defaults());
  std::vector<corpus::PredictionSet> preds;
  for (const auto& g : golds) {
    corpus::PredictionSet p{g.prompt.id, g.prompt.text, {}};
    for (const auto& t : g.translations) p.candidates.push_back(t.text);
    preds.push_back(p);
  }
  std::ostringstream text;
  corpus::write_predictions(preds, text);
  write_file(work_ / "perfect.txt", text.str());
  const auto r = forge("score '" + (kFixtures / "gold.txt").string() + "' '" + (work_ / "perfect.txt").string() + "'", work_);
  EXPECT_EQ(r.status, 0) << r.err;
  EXPECT_EQ(lines(r.out).back(), "macro_f1=1.000000");
}

TEST_F(CliTest, ScoreWritesReportFile) {
  const auto report = work_ / "report.tsv";
  const auto r = forge("score '" + (kFixtures / "clarity_gold.txt").string() + "' '" +
                           (kFixtures / "clarity_pred.txt").string() + "' --out '" + report.string() + "'",
                       work_);
  EXPECT_EQ(r.status, 0);
  EXPECT_EQ(r.out, "macro_f1=0.561449\n");
  EXPECT_EQ(lines(read_file(report))[1], "prompt_id\tprecision\tweighted_recall\tweighted_f1");
}

TEST_F(CliTest, InputErrorsExitTwo) {
  EXPECT_EQ(forge("score /nonexistent/gold.txt /nonexistent/pred.txt", work_).status, 2);
  EXPECT_EQ(forge("score '" + (kFixtures / "clarity_gold.txt").string() + "' '" +
                      (kFixtures / "clarity_pred.txt").string() + "' --policy fuzzy",
                  work_)
                .status,
            2);
  EXPECT_EQ(forge("frobnicate", work_).status, 2);
  EXPECT_EQ(forge("generate --model /nonexistent --prompts /nonexistent", work_).status, 2);
}

TEST_F(CliTest, TrainLogsNonDecreasingLikelihood) {
  const auto dir = work_ / "train3";
  const auto r = forge("train '" + (kFixtures / "parallel.tsv").string() + "' --iterations 3 --created-at 0 --out '" +
                           dir.string() + "'",
                       work_);
  ASSERT_EQ(r.status, 0) << r.err;
  const auto log = lines(r.out);
  ASSERT_EQ(log.size(), 3u);
  double prev = -1e300;
  for (std::size_t k = 0; k < log.size(); ++k) {
    const auto prefix = "iteration " + std::to_string(k + 1) + " corpus_loglik=";
    ASSERT_EQ(log[k].rfind(prefix, 0), 0u) << log[k];
    const double ll = std::stod(log[k].substr(prefix.size()));
    EXPECT_GE(ll, prev);
    prev = ll;
  }
  EXPECT_TRUE(fs::exists(dir / "series.tsv"));
  EXPECT_TRUE(fs::exists(dir / "manifest.tsv"));
  EXPECT_EQ(translator::load_series(dir).size(), 3u);
}

TEST_F(CliTest, TrainEdgeCases) {
  const auto one = work_ / "train1";
  EXPECT_EQ(forge("train '" + (kFixtures / "parallel.tsv").string() + "' --iterations 1 --out '" + one.string() + "'",
                  work_)
                .status,
            0);
  EXPECT_EQ(translator::load_series(one).size(), 1u);
  EXPECT_EQ(forge("train '" + (kFixtures / "parallel.tsv").string() + "' --iterations 0 --out '" +
                      (work_ / "train0").string() + "'",
                  work_)
                .status,
            2);
}

TEST_F(CliTest, BackwardSeriesSwapsColumns) {
  const auto bwd = translator::load_series(work_ / "bwd");
  EXPECT_EQ(bwd.direction, translator::Direction::backward);
  EXPECT_NE(bwd.latest().lexicon.row("ela"), nullptr);
  EXPECT_EQ(bwd.latest().lexicon.row("she"), nullptr);
  const auto fwd = translator::load_series(work_ / "fwd");
  EXPECT_NE(fwd.latest().lexicon.row("she"), nullptr);
}

TEST_F(CliTest, TrainIsReproducible) {
  cli::TrainCommandOptions opt;
  opt.parallel = kFixtures / "parallel.tsv";
  opt.out_dir = work_ / "fwd_again";
  opt.created_at = 0;
  std::ostringstream out, err;
  ASSERT_EQ(cli::cmd_train(opt, out, err), 0);
  EXPECT_EQ(cli::checksum_path(work_ / "fwd_again"), cli::checksum_path(work_ / "fwd"));
}

TEST_F(CliTest, GenerateNBestTopOne) {
  const auto out = work_ / "top1.txt";
  const auto r = forge("generate --method nbest --n 1 --model '" + (work_ / "fwd").string() + "' --prompts '" +
                           (kFixtures / "gold.txt").string() + "' --out '" + out.string() + "'",
                       work_);
  ASSERT_EQ(r.status, 0) << r.err;
  std::istringstream in(read_file(out));
  const auto sets = corpus::parse_predictions(in, corpus::NormalizationPolicy::defaults());
  ASSERT_EQ(sets.size(), 8u);
  for (const auto& s : sets) EXPECT_EQ(s.candidates.size(), 1u) << s.prompt_id;
  EXPECT_TRUE(fs::exists(work_ / "top1.txt.warnings.tsv"));
  EXPECT_TRUE(fs::exists(work_ / "top1.txt.manifest.tsv"));
}

TEST_F(CliTest, EnsembleOfOneMatchesNBestBytes) {
  auto run = [&](const std::string& method, const std::string& name) {
    cli::GenerateOptions opt;
    opt.method = method;
    opt.model = work_ / "fwd";
    opt.prompts = kFixtures / "gold.txt";
    opt.m = 1;
    opt.out = work_ / name;
    std::ostringstream out, err;
    EXPECT_EQ(cli::cmd_generate(opt, out, err), 0) << err.str();
    return read_file(work_ / name);
  };
  EXPECT_EQ(run("ensemble", "ens1.txt"), run("nbest", "nb.txt"));
}

TEST_F(CliTest, ManifestEchoesDefaults) {
  cli::GenerateOptions opt;
  opt.method = "ensemble";
  opt.model = work_ / "fwd";
  opt.prompts = kFixtures / "gold.txt";
  opt.m = 5;
  opt.out = work_ / "defaults.txt";
  std::ostringstream out, err;
  ASSERT_EQ(cli::cmd_generate(opt, out, err), 0) << err.str();

  const auto r = forge("generate --method nbest --model '" + (work_ / "fwd").string() + "' --prompts '" +
                           (kFixtures / "gold.txt").string() + "' --out '" + (work_ / "dflt.txt").string() + "'",
                       work_);
  ASSERT_EQ(r.status, 0) << r.err;
  const auto manifest = read_file(work_ / "dflt.txt.manifest.tsv");
  EXPECT_NE(manifest.find("n=10 beam=100 m=6"), std::string::npos) << manifest;
  EXPECT_NE(manifest.find("n_prime=3"), std::string::npos);
  EXPECT_NE(r.err.find("elapsed_seconds="), std::string::npos);
}

TEST_F(CliTest, GenerateRejectsEnsembleLargerThanSeries) {
  cli::GenerateOptions opt;
  opt.method = "ensemble";
  opt.model = work_ / "fwd";
  opt.prompts = kFixtures / "gold.txt";
  std::ostringstream out, err;
  EXPECT_EQ(cli::cmd_generate(opt, out, err), 2);
  EXPECT_NE(err.str().find("m=6"), std::string::npos) << err.str();
}

TEST_F(CliTest, SweepEmptySpec) {
  auto opt = fixture_sweep(work_);
  opt.spec = cli::SweepSpec{{}, {}, {}, 10};
  std::ostringstream out, err;
  EXPECT_EQ(cli::cmd_sweep(opt, out, err), 3);
  EXPECT_EQ(out.str(), "method\tparam\tprecision\tweighted_recall\tweighted_f1\n");
}

TEST_F(CliTest, SweepIsDeterministic) {
  std::string tables[2], manifests[2];
  for (int k = 0; k < 2; ++k) {
    auto opt = fixture_sweep(work_);
    opt.out = work_ / ("sweep" + std::to_string(k) + ".tsv");
    std::ostringstream out, err;
    ASSERT_EQ(cli::cmd_sweep(opt, out, err), 0) << err.str();
    tables[k] = read_file(*opt.out);
    manifests[k] = read_file(cli::sidecar(*opt.out, ".manifest.tsv"));
  }
  EXPECT_EQ(tables[0], tables[1]);
  EXPECT_EQ(manifests[0], manifests[1]);
}

TEST_F(CliTest, SweepCellsMatchGenerateThenScore) {
  auto opt = fixture_sweep(work_);
  opt.spec.m_values = {3, 9};
  std::ostringstream out, err;
  ASSERT_EQ(cli::cmd_sweep(opt, out, err), 0);
  const auto table = lines(out.str());

  cli::GenerateOptions gen;
  gen.method = "ensemble";
  gen.model = work_ / "fwd";
  gen.prompts = kFixtures / "gold.txt";
  gen.m = 3;
  gen.out = work_ / "ens3.txt";
  std::ostringstream gout, gerr;
  ASSERT_EQ(cli::cmd_generate(gen, gout, gerr), 0);
  cli::ScoreOptions score{kFixtures / "gold.txt", *gen.out, "default", std::nullopt};
  std::ostringstream sout, serr;
  ASSERT_EQ(cli::cmd_score(score, sout, serr), 0);
  const auto report = lines(sout.str());
  const auto macro = report[report.size() - 2];  // MACRO row
  ASSERT_EQ(macro.rfind("MACRO\t", 0), 0u);

  bool found = false;
  for (const auto& row : table) {
    if (row.rfind("ensemble\tm=3\t", 0) == 0) {
      EXPECT_EQ(row.substr(std::string("ensemble\tm=3\t").size()), macro.substr(6));
      found = true;
    }
  }
  EXPECT_TRUE(found);
  EXPECT_NE(out.str().find("ensemble\tm=9\tNA\tNA\tNA"), std::string::npos);
}

TEST_F(CliTest, SweepEnsembleRecallNonDecreasing) {
  auto opt = fixture_sweep(work_);
  std::ostringstream out, err;
  ASSERT_EQ(cli::cmd_sweep(opt, out, err), 0);
  double prev = -1;
  int rows = 0;
  for (const auto& row : lines(out.str())) {
    if (row.rfind("ensemble\t", 0) != 0) continue;
    std::istringstream fields(row);
    std::string method, param, precision, recall;
    std::getline(fields, method, '\t');
    std::getline(fields, param, '\t');
    std::getline(fields, precision, '\t');
    std::getline(fields, recall, '\t');
    EXPECT_GE(std::stod(recall), prev) << row;
    prev = std::stod(recall);
    ++rows;
  }
  EXPECT_EQ(rows, 4);
}

TEST_F(CliTest, BpeLearnApplyDecode) {
  const auto model = work_ / "toy.bpe";
  auto r = forge("bpe learn '" + (kFixtures / "bpe_toy.txt").string() + "' --merges 2 --out '" + model.string() + "'",
                 work_);
  ASSERT_EQ(r.status, 0) << r.err;
  const auto model_lines = lines(read_file(model));
  ASSERT_EQ(model_lines.size(), 3u);
  EXPECT_EQ(model_lines[1], "e\ts");

  write_file(work_ / "words.txt", "newest lowest\nwidest\n");
  r = forge("bpe apply --model '" + model.string() + "' '" + (work_ / "words.txt").string() + "'", work_);
  ASSERT_EQ(r.status, 0) << r.err;
  EXPECT_EQ(r.out, "n@@ e@@ w@@ est l@@ o@@ w@@ est\nw@@ i@@ d@@ est\n");

  write_file(work_ / "pieces.txt", r.out);
  r = forge("bpe decode '" + (work_ / "pieces.txt").string() + "'", work_);
  ASSERT_EQ(r.status, 0) << r.err;
  EXPECT_EQ(r.out, "newest lowest\nwidest\n");
}

TEST_F(CliTest, BpeApplyEmptyModelSplitsCharacters) {
  std::ostringstream model_text;
  textproc::save_bpe(textproc::BpeModel{}, model_text);
  write_file(work_ / "empty.bpe", model_text.str());
  std::istringstream in("abc d\n");
  std::ostringstream out, err;
  ASSERT_EQ(cli::cmd_bpe_apply({work_ / "empty.bpe", std::nullopt}, in, out, err), 0);
  EXPECT_EQ(out.str(), "a@@ b@@ c d\n");
}

TEST_F(CliTest, BpeBadModelExitsTwo) {
  write_file(work_ / "bad.bpe", "not a model\n");
  std::istringstream in("abc\n");
  std::ostringstream out, err;
  EXPECT_EQ(cli::cmd_bpe_apply({work_ / "bad.bpe", std::nullopt}, in, out, err), 2);
  EXPECT_NE(err.str().find("bad.bpe"), std::string::npos) << err.str();
}

}  // namespace

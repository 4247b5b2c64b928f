#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <set>

#include "oracles.hpp"
#include "staple/methods.hpp"
#include "staple/metrics.hpp"

namespace {

using namespace staple;
using namespace staple::methods;
using translator::BigramLm;
using translator::Direction;

const auto kDefault = NormalizationPolicy::defaults();

Checkpoint xz_checkpoint() {
  Checkpoint c;
  c.lexicon.set("a", "x", 0.9);
  c.lexicon.set("a", "z", 0.1);
  c.lm = BigramLm::estimate({{"x"}, {"z"}}, 0.1);
  return c;
}

Checkpoint single(const std::string& target) {
  Checkpoint c;
  c.lexicon.set("a", target, 1.0);
  c.lm = BigramLm::estimate({{target}}, 0.1);
  return c;
}

Checkpoint identity(Direction d, const std::vector<std::string>& vocab) {
  Checkpoint c;
  c.direction = d;
  for (const auto& w : vocab) c.lexicon.set(w, w, 1.0);
  c.lm = BigramLm::estimate({vocab}, 0.1);
  return c;
}

/// Random lexicon from `from`-prefixed words to `to`-prefixed words.
Checkpoint random_direction(std::mt19937& rng, Direction d, const std::string& from, const std::string& to, int vocab) {
  Checkpoint c;
  c.direction = d;
  std::uniform_real_distribution<double> u(0.05, 1.0);
  for (int s = 0; s < vocab; ++s) {
    std::vector<double> p(static_cast<std::size_t>(vocab));
    double sum = 0;
    for (auto& v : p) sum += (v = u(rng));
    for (int t = 0; t < vocab; ++t) {
      if (rng() % 3 == 0) continue;
      c.lexicon.set(from + std::to_string(s), to + std::to_string(t), p[static_cast<std::size_t>(t)] / sum);
    }
  }
  std::vector<textproc::TokenSeq> text;
  for (int n = 0; n < 8; ++n) {
    textproc::TokenSeq t;
    for (int k = 0; k < 3; ++k) t.push_back(to + std::to_string(rng() % static_cast<unsigned>(vocab)));
    text.push_back(t);
  }
  c.lm = BigramLm::estimate(text, 0.3);
  return c;
}

std::vector<Prompt> random_prompts(std::mt19937& rng, int vocab, std::size_t count) {
  std::vector<Prompt> out;
  for (std::size_t k = 0; k < count; ++k) {
    std::string text;
    for (auto n = 1 + rng() % 3; n > 0; --n) {
      text += (text.empty() ? "" : " ") + ("w" + std::to_string(rng() % static_cast<unsigned>(vocab)));
    }
    out.push_back({"p" + std::to_string(k), text});
  }
  return out;
}

MethodParams params_with(std::size_t n, std::size_t n_prime = 3, std::size_t m = 1) {
  MethodParams p;
  p.n = n;
  p.n_prime = n_prime;
  p.m = m;
  return p;
}

TEST(Dedup, Examples) {
  EXPECT_EQ(dedup({"a", "a", "b"}, kDefault), (std::vector<std::string>{"a", "b"}));
  EXPECT_EQ(dedup({"A!", "a"}, kDefault), (std::vector<std::string>{"A!"}));
  EXPECT_EQ(dedup({"A!", "a"}, NormalizationPolicy::exact()), (std::vector<std::string>{"A!", "a"}));
  EXPECT_TRUE(dedup({}, kDefault).empty());
}

TEST(NBest, Examples) {
  const std::vector<Prompt> prompts = {{"q", "a"}};
  EXPECT_EQ(nbest_predict(xz_checkpoint(), prompts, params_with(2))[0].candidates,
            (std::vector<std::string>{"x", "z"}));
  EXPECT_EQ(nbest_predict(xz_checkpoint(), prompts, params_with(1))[0].candidates, (std::vector<std::string>{"x"}));
}

TEST(NBest, OutputsArePrefixesAcrossN) {
  std::mt19937 rng(53);
  for (int trial = 0; trial < 30; ++trial) {
    const auto ckpt = random_direction(rng, Direction::forward, "w", "v", 4);
    const auto prompts = random_prompts(rng, 4, 3);
    auto prev = nbest_predict(ckpt, prompts, params_with(1));
    for (std::size_t n = 2; n <= 12; ++n) {
      const auto next = nbest_predict(ckpt, prompts, params_with(n));
      for (std::size_t i = 0; i < prompts.size(); ++i) {
        const auto& a = prev[i].candidates;
        const auto& b = next[i].candidates;
        ASSERT_LE(a.size(), b.size());
        EXPECT_TRUE(std::equal(a.begin(), a.end(), b.begin()));
      }
      prev = next;
    }
  }
}

TEST(NBest, EmptyPromptWarnsWithoutAborting) {
  std::vector<MethodWarning> warnings;
  const auto out = nbest_predict(xz_checkpoint(), {{"q1", "?!"}, {"q2", "a"}}, params_with(2), &warnings);
  ASSERT_EQ(out.size(), 2u);
  EXPECT_TRUE(out[0].candidates.empty());
  EXPECT_EQ(out[1].candidates.size(), 2u);
  ASSERT_EQ(warnings.size(), 1u);
  EXPECT_EQ(warnings[0].prompt_id, "q1");
}

TEST(NBest, ParamValidation) {
  auto p = params_with(0);
  EXPECT_THROW(nbest_predict(xz_checkpoint(), {}, p), UsageError);
  p = params_with(101);
  EXPECT_THROW(nbest_predict(xz_checkpoint(), {}, p), UsageError);
}

TEST(Paraphrase, IdentityModelsReproduceNBest) {
  const std::vector<std::string> vocab = {"p", "q", "r"};
  const auto fwd = identity(Direction::forward, vocab);
  const auto bwd = identity(Direction::backward, vocab);
  const std::vector<Prompt> prompts = {{"1", "p q"}, {"2", "r"}, {"3", "q q r"}};
  for (std::size_t n : {1u, 5u}) {
    for (std::size_t np : {1u, 3u}) {
      EXPECT_EQ(paraphrase_predict(fwd, bwd, prompts, params_with(n, np)),
                nbest_predict(fwd, prompts, params_with(n, np)));
    }
  }
}

TEST(Paraphrase, SupersetOfNBestAndBoundedPool) {
  std::mt19937 rng(59);
  for (int trial = 0; trial < 30; ++trial) {
    const auto fwd = random_direction(rng, Direction::forward, "w", "v", 4);
    const auto bwd = random_direction(rng, Direction::backward, "v", "w", 4);
    const auto prompts = random_prompts(rng, 4, 4);
    const auto params = params_with(10, 3);
    std::vector<ParaphraseStats> stats;
    const auto para = paraphrase_predict(fwd, bwd, prompts, params, nullptr, &stats);
    const auto base = nbest_predict(fwd, prompts, params);
    for (std::size_t i = 0; i < prompts.size(); ++i) {
      EXPECT_TRUE(std::equal(base[i].candidates.begin(), base[i].candidates.end(), para[i].candidates.begin()));
      EXPECT_LE(stats[i].pool_raw, params.n * params.n_prime);
      EXPECT_LE(stats[i].pool_unique, stats[i].pool_raw);
      EXPECT_EQ(dedup(para[i].candidates, kDefault), para[i].candidates);
    }
  }
}

TEST(Paraphrase, RequiresOppositeDirections) {
  const auto fwd = identity(Direction::forward, {"p"});
  EXPECT_THROW(paraphrase_predict(fwd, fwd, {{"1", "p"}}, params_with(1)), UsageError);
}

TEST(Ensemble, SingleCheckpointMatchesNBest) {
  std::mt19937 rng(61);
  const auto series = translator::train_toy(oracle::random_parallel(rng), {});
  std::vector<Prompt> prompts = {{"a", "s0 s1"}, {"b", "s2"}, {"c", "s1 s1 s0"}};
  EXPECT_EQ(multi_checkpoint_predict(series, prompts, params_with(5, 3, 1)),
            nbest_predict(series.latest(), prompts, params_with(5)));
}

TEST(Ensemble, UnionLatestFirst) {
  CheckpointSeries series;
  series.checkpoints = {single("z"), single("x")};
  series.checkpoints[1].iteration = 2;
  EXPECT_EQ(multi_checkpoint_predict(series, {{"q", "a"}}, params_with(1, 1, 2))[0].candidates,
            (std::vector<std::string>{"x", "z"}));
}

TEST(Ensemble, MExceedingSeriesLengthNamesBoth) {
  CheckpointSeries series;
  series.checkpoints = {single("x")};
  try {
    multi_checkpoint_predict(series, {{"q", "a"}}, params_with(1, 1, 3));
    FAIL();
  } catch (const UsageError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("m=3"), std::string::npos) << msg;
    EXPECT_NE(msg.find("length of 1"), std::string::npos) << msg;
  }
}

TEST(Ensemble, RecallNeverDropsAsMGrows) {
  std::mt19937 rng(67);
  for (int trial = 0; trial < 20; ++trial) {
    const auto parallel = oracle::random_parallel(rng);
    translator::TrainOptions opt;
    opt.iterations = 6;
    opt.created_at = 0;
    const auto series = translator::train_toy(parallel, opt);
    std::vector<Prompt> prompts;
    for (std::size_t k = 0; k < parallel.size(); ++k) {
      prompts.push_back({"p" + std::to_string(k), textproc::detokenize(parallel[k].first)});
    }
    // Gold: a random half of everything any checkpoint can produce, plus the reference.
    const auto widest = multi_checkpoint_predict(series, prompts, params_with(3, 1, 6));
    std::vector<corpus::GoldSet> gold;
    for (std::size_t k = 0; k < prompts.size(); ++k) {
      corpus::GoldSet g{prompts[k], {}};
      std::vector<std::string> texts = {textproc::detokenize(parallel[k].second)};
      for (const auto& c : widest[k].candidates) {
        if (rng() % 2) texts.push_back(c);
      }
      texts = dedup(texts, kDefault);
      for (const auto& t : texts) g.translations.push_back({t, 0.9 / static_cast<double>(texts.size())});
      gold.push_back(g);
    }
    std::vector<double> prev(prompts.size(), -1.0);
    for (std::size_t m = 1; m <= 6; ++m) {
      const auto score = metrics::score_corpus(gold, multi_checkpoint_predict(series, prompts, params_with(3, 1, m)),
                                               kDefault);
      for (std::size_t k = 0; k < prompts.size(); ++k) {
        EXPECT_GE(score.per_prompt[k].weighted_recall, prev[k]);
        prev[k] = score.per_prompt[k].weighted_recall;
      }
    }
  }
}

TEST(Methods, DeterministicAndThreadIndependent) {
  std::mt19937 rng(71);
  const auto fwd = random_direction(rng, Direction::forward, "w", "v", 5);
  const auto bwd = random_direction(rng, Direction::backward, "v", "w", 5);
  const auto prompts = random_prompts(rng, 5, 12);
  auto serial = params_with(10, 3);
  auto threaded = serial;
  threaded.threads = 4;
  const auto a = paraphrase_predict(fwd, bwd, prompts, serial);
  EXPECT_EQ(paraphrase_predict(fwd, bwd, prompts, serial), a);
  EXPECT_EQ(paraphrase_predict(fwd, bwd, prompts, threaded), a);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].prompt_id, prompts[i].id);
}

TEST(Methods, NoNormalizationEquivalentDuplicates) {
  std::mt19937 rng(73);
  for (int trial = 0; trial < 20; ++trial) {
    const auto fwd = random_direction(rng, Direction::forward, "w", "v", 3);
    const auto prompts = random_prompts(rng, 3, 3);
    for (const auto& set : nbest_predict(fwd, prompts, params_with(20))) {
      std::set<std::string> seen;
      for (const auto& c : set.candidates) EXPECT_TRUE(seen.insert(corpus::normalize(c, kDefault)).second);
    }
  }
}

}  // namespace

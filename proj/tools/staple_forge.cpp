// staple-forge: score, train, generate, sweep, and bpe subcommands.

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "staple/cli.hpp"

namespace {

template <typename T>
std::optional<T> maybe(const CLI::Option* opt, const T& value) {
  return opt->count() > 0 ? std::optional<T>(value) : std::nullopt;
}

}  // namespace

int main(int argc, char** argv) {
  namespace cli = staple::cli;
  CLI::App app{"Translation-set generation and weighted macro-F1 scoring"};
  app.require_subcommand(1);
  app.set_version_flag("--version", STAPLE_VERSION);
  const std::size_t threads = staple::thread_cap();

  // score
  cli::ScoreOptions score;
  std::string score_out;
  auto* score_cmd = app.add_subcommand("score", "Score a prediction file against a gold file");
  score_cmd->add_option("gold", score.gold, "Gold file")->required();
  score_cmd->add_option("predictions", score.predictions, "Prediction file")->required();
  score_cmd->add_option("--policy", score.policy, "Match normalization: exact|default")->capture_default_str();
  auto* score_out_opt = score_cmd->add_option("--out", score_out, "Write the TSV report here");

  // train
  cli::TrainCommandOptions train;
  long long created_at = 0;
  auto* train_cmd = app.add_subcommand("train", "Train a checkpoint series on a source<TAB>target corpus");
  train_cmd->add_option("parallel", train.parallel, "Parallel corpus")->required();
  train_cmd->add_option("--iterations", train.iterations, "EM iterations (one checkpoint each)")->capture_default_str();
  train_cmd->add_option("--out", train.out_dir, "Series output directory")->required();
  train_cmd->add_option("--direction", train.direction, "fwd|bwd (bwd swaps columns)")->capture_default_str();
  train_cmd->add_option("--lm-alpha", train.lm_alpha, "Add-alpha smoothing constant")->capture_default_str();
  auto* created_opt = train_cmd->add_option("--created-at", created_at, "Fixed checkpoint timestamp (epoch seconds)");

  // generate
  cli::GenerateOptions gen;
  gen.threads = threads;
  std::string gen_out, gen_backward;
  auto* gen_cmd = app.add_subcommand("generate", "Generate prediction sets with one method");
  gen_cmd->add_option("--method", gen.method, "nbest|paraphrase|ensemble")->capture_default_str();
  gen_cmd->add_option("--model", gen.model, "Checkpoint or series directory")->required();
  auto* gen_backward_opt = gen_cmd->add_option("--backward", gen_backward, "Backward checkpoint or series");
  gen_cmd->add_option("--prompts", gen.prompts, "Prompt file (block format)")->required();
  gen_cmd->add_option("--n", gen.n, "n-best size")->capture_default_str();
  gen_cmd->add_option("--beam", gen.beam, "Beam width")->capture_default_str();
  gen_cmd->add_option("--n-prime", gen.n_prime, "Back-translations per hypothesis")->capture_default_str();
  gen_cmd->add_option("--m", gen.m, "Checkpoints in the ensemble")->capture_default_str();
  gen_cmd->add_option("--top-k", gen.top_k, "Lexicon candidates per source word")->capture_default_str();
  gen_cmd->add_option("--policy", gen.policy, "De-duplication normalization: exact|default")->capture_default_str();
  auto* gen_out_opt = gen_cmd->add_option("--out", gen_out, "Prediction file (sidecars written next to it)");

  // sweep
  cli::SweepOptions sweep;
  sweep.threads = threads;
  std::string n_values = "5,10,15,20", n_prime_values = "1,3,5", m_values = "2,4,6,8";
  std::string sweep_out, sweep_backward, sweep_prompts;
  auto* sweep_cmd = app.add_subcommand("sweep", "Score every method/parameter cell against gold");
  sweep_cmd->add_option("--series", sweep.series, "Forward series directory")->required();
  auto* sweep_backward_opt = sweep_cmd->add_option("--backward", sweep_backward, "Backward series (paraphrase rows)");
  sweep_cmd->add_option("--gold", sweep.gold, "Gold file")->required();
  auto* sweep_prompts_opt = sweep_cmd->add_option("--prompts", sweep_prompts, "Prompt file (default: gold prompts)");
  sweep_cmd->add_option("--n-values", n_values, "Comma-separated n grid")->capture_default_str();
  sweep_cmd->add_option("--n-prime-values", n_prime_values, "Comma-separated n' grid")->capture_default_str();
  sweep_cmd->add_option("--m-values", m_values, "Comma-separated m grid")->capture_default_str();
  sweep_cmd->add_option("--n", sweep.spec.fixed_n, "n for paraphrase and ensemble rows")->capture_default_str();
  sweep_cmd->add_option("--beam", sweep.beam, "Beam width")->capture_default_str();
  sweep_cmd->add_option("--top-k", sweep.top_k, "Lexicon candidates per source word")->capture_default_str();
  sweep_cmd->add_option("--policy", sweep.policy, "Match normalization: exact|default")->capture_default_str();
  auto* sweep_out_opt = sweep_cmd->add_option("--out", sweep_out, "Table file (manifest written next to it)");

  // bpe
  auto* bpe_cmd = app.add_subcommand("bpe", "Byte-pair encoding: learn, apply, decode");
  bpe_cmd->require_subcommand(1);
  cli::BpeLearnOptions learn;
  auto* learn_cmd = bpe_cmd->add_subcommand("learn", "Learn joint merges from raw text files");
  learn_cmd->add_option("inputs", learn.inputs, "Text files, one sentence per line")->required();
  learn_cmd->add_option("--merges", learn.merges, "Number of merge operations")->capture_default_str();
  learn_cmd->add_option("--policy", learn.policy, "Normalization before tokenizing: exact|default")->capture_default_str();
  learn_cmd->add_option("--out", learn.out, "Model file")->required();
  cli::BpeApplyOptions apply;
  std::string apply_input;
  auto* apply_cmd = bpe_cmd->add_subcommand("apply", "Segment token lines");
  apply_cmd->add_option("--model", apply.model, "Model file")->required();
  auto* apply_input_opt = apply_cmd->add_option("input", apply_input, "Token lines (default stdin)");
  std::string decode_input;
  auto* decode_cmd = bpe_cmd->add_subcommand("decode", "Join @@-marked subwords");
  auto* decode_input_opt = decode_cmd->add_option("input", decode_input, "Subword lines (default stdin)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : cli::kInputError;
  }

  if (score_cmd->parsed()) {
    score.out = maybe<std::filesystem::path>(score_out_opt, score_out);
    return cli::cmd_score(score, std::cout, std::cerr);
  }
  if (train_cmd->parsed()) {
    train.created_at = maybe<std::int64_t>(created_opt, created_at);
    return cli::cmd_train(train, std::cout, std::cerr);
  }
  if (gen_cmd->parsed()) {
    gen.out = maybe<std::filesystem::path>(gen_out_opt, gen_out);
    gen.backward = maybe<std::filesystem::path>(gen_backward_opt, gen_backward);
    return cli::cmd_generate(gen, std::cout, std::cerr);
  }
  if (sweep_cmd->parsed()) {
    try {
      sweep.spec.n_values = cli::parse_list(n_values);
      sweep.spec.n_prime_values = cli::parse_list(n_prime_values);
      sweep.spec.m_values = cli::parse_list(m_values);
    } catch (const staple::Error& e) {
      std::cerr << "error: " << e.what() << '\n';
      return cli::kInputError;
    }
    sweep.out = maybe<std::filesystem::path>(sweep_out_opt, sweep_out);
    sweep.backward = maybe<std::filesystem::path>(sweep_backward_opt, sweep_backward);
    sweep.prompts = maybe<std::filesystem::path>(sweep_prompts_opt, sweep_prompts);
    return cli::cmd_sweep(sweep, std::cout, std::cerr);
  }
  if (learn_cmd->parsed()) return cli::cmd_bpe_learn(learn, std::cout, std::cerr);
  if (apply_cmd->parsed()) {
    apply.input = maybe<std::filesystem::path>(apply_input_opt, apply_input);
    return cli::cmd_bpe_apply(apply, std::cin, std::cout, std::cerr);
  }
  if (decode_cmd->parsed()) {
    return cli::cmd_bpe_decode(maybe<std::filesystem::path>(decode_input_opt, decode_input), std::cin, std::cout,
                               std::cerr);
  }
  return cli::kInternalError;
}

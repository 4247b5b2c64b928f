#pragma once

// Subcommand implementations behind the staple-forge tool. Each command
// writes its primary output to `out`, diagnostics to `err`, and returns an
// exit status: 0 success, 1 internal error, 2 input or validation error,
// 3 nothing to do.

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "staple/checkpoint_io.hpp"
#include "staple/checksum.hpp"
#include "staple/corpus.hpp"
#include "staple/decoder.hpp"
#include "staple/error.hpp"
#include "staple/methods.hpp"
#include "staple/metrics.hpp"
#include "staple/parallel.hpp"
#include "staple/textproc.hpp"
#include "staple/translator.hpp"

#ifndef STAPLE_VERSION
#define STAPLE_VERSION "0.0.0"
#endif

namespace staple::cli {

namespace fs = std::filesystem;

enum ExitCode : int { kOk = 0, kInternalError = 1, kInputError = 2, kEmptyWork = 3 };

inline corpus::NormalizationPolicy parse_policy(const std::string& name) {
  if (name == "default") return corpus::NormalizationPolicy::defaults();
  if (name == "exact") return corpus::NormalizationPolicy::exact();
  throw UsageError("unknown policy '" + name + "' (expected exact|default)");
}

/// "5,10,15" -> {5, 10, 15}; the empty string is the empty list.
inline std::vector<std::size_t> parse_list(const std::string& text) {
  std::vector<std::size_t> out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    if (item.empty()) continue;
    std::size_t value = 0;
    const auto [ptr, ec] = std::from_chars(item.data(), item.data() + item.size(), value);
    if (ec != std::errc() || ptr != item.data() + item.size() || value < 1) {
      throw UsageError("list value '" + item + "' is not a positive integer");
    }
    out.push_back(value);
  }
  return out;
}

/// Content checksum of a file, or of every file under a directory
/// (relative paths and contents, in sorted path order).
inline std::string checksum_path(const fs::path& path) {
  if (!fs::is_directory(path)) return sha256(read_file(path));
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(path)) {
    if (e.is_regular_file()) files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  Sha256 h;
  for (const auto& f : files) {
    h.update(fs::relative(f, path).generic_string()).update(std::string_view("\0", 1));
    h.update(read_file(f)).update(std::string_view("\0", 1));
  }
  return h.hex();
}

/// What a command did. Everything except `wall_seconds` is persisted, so the
/// manifest file is identical across re-runs with identical inputs.
struct RunManifest {
  std::string command;
  std::string parameters;
  std::vector<std::pair<std::string, std::string>> inputs;   // role, checksum
  std::vector<std::pair<std::string, std::string>> outputs;  // role, checksum
  std::string tool_version = STAPLE_VERSION;
  double wall_seconds = 0.0;

  void write(std::ostream& out) const {
    out << "command\t" << command << '\n' << "tool_version\t" << tool_version << '\n';
    out << "parameters\t" << parameters << '\n';
    for (const auto& [role, sum] : inputs) out << "input\t" << role << '\t' << sum << '\n';
    for (const auto& [role, sum] : outputs) out << "output\t" << role << '\t' << sum << '\n';
  }
};

inline fs::path sidecar(const fs::path& out, const std::string& suffix) {
  return fs::path(out.string() + suffix);
}

inline void save_manifest(const RunManifest& manifest, const fs::path& out, std::ostream& err) {
  std::ostringstream text;
  manifest.write(text);
  write_file(sidecar(out, ".manifest.tsv"), text.str());
  char buf[64];
  std::snprintf(buf, sizeof buf, "elapsed_seconds=%.3f", manifest.wall_seconds);
  err << manifest.command << ": " << buf << '\n';
}

/// Maps library errors onto the exit-code contract.
inline int guarded(std::ostream& err, const std::function<int()>& body) {
  try {
    return body();
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kInputError;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << '\n';
    return kInternalError;
  }
}

inline std::vector<corpus::GoldSet> load_gold(const fs::path& path, const corpus::NormalizationPolicy& policy) {
  std::istringstream in(read_file(path));
  return corpus::parse_gold(in, policy, path.string());
}

inline std::vector<corpus::Prompt> load_prompts(const fs::path& path) {
  std::istringstream in(read_file(path));
  return corpus::parse_prompts(in, path.string());
}

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

// ---------------------------------------------------------------------------
// score

struct ScoreOptions {
  fs::path gold;
  fs::path predictions;
  std::string policy = "default";
  std::optional<fs::path> out;  // report file; stdout when unset
};

inline int cmd_score(const ScoreOptions& opt, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const auto policy = parse_policy(opt.policy);
    const auto golds = load_gold(opt.gold, policy);
    std::vector<corpus::ParseWarning> parse_warnings;
    std::istringstream pred_in(read_file(opt.predictions));
    const auto preds = corpus::parse_predictions(pred_in, policy, &parse_warnings, opt.predictions.string());
    for (const auto& w : parse_warnings) err << "warning: " << opt.predictions.string() << ':' << w.line << ": " << w.message << '\n';

    const auto score = metrics::score_corpus(golds, preds, policy);
    for (const auto& w : score.warnings) err << "warning: " << w << '\n';
    if (opt.out) {
      std::ostringstream report;
      metrics::write_report(score, report);
      write_file(*opt.out, report.str());
    } else {
      metrics::write_report(score, out);
    }
    out << metrics::summary_line(score) << '\n';
    return static_cast<int>(kOk);
  });
}

// ---------------------------------------------------------------------------
// train

struct TrainCommandOptions {
  fs::path parallel;
  std::size_t iterations = 5;
  fs::path out_dir;
  std::string direction = "fwd";
  double lm_alpha = 0.1;
  std::optional<std::int64_t> created_at;
};

/// Lines of `source<TAB>target`; both sides are normalized and tokenized.
/// Direction bwd swaps the columns.
inline translator::ParallelCorpus read_parallel(const fs::path& path, translator::Direction direction) {
  std::istringstream in(read_file(path));
  const auto policy = corpus::NormalizationPolicy::defaults();
  translator::ParallelCorpus pairs;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos || line.find('\t', tab + 1) != std::string::npos) {
      throw ParseError(path.string(), number, "expected 'source<TAB>target'");
    }
    auto src = textproc::preprocess(std::string_view(line).substr(0, tab), policy);
    auto tgt = textproc::preprocess(std::string_view(line).substr(tab + 1), policy);
    if (direction == translator::Direction::backward) std::swap(src, tgt);
    pairs.emplace_back(std::move(src), std::move(tgt));
  }
  return pairs;
}

inline int cmd_train(const TrainCommandOptions& opt, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    Stopwatch clock;
    const auto direction = translator::parse_direction(opt.direction);
    if (!direction) throw UsageError("unknown direction '" + opt.direction + "' (expected fwd|bwd)");
    const auto parallel = read_parallel(opt.parallel, *direction);

    translator::TrainOptions train;
    train.iterations = opt.iterations;
    train.lm_alpha = opt.lm_alpha;
    train.direction = *direction;
    train.created_at = opt.created_at;

    std::error_code ec;
    fs::create_directories(opt.out_dir, ec);
    if (ec || !fs::is_directory(opt.out_dir)) throw Error("cannot create output directory '" + opt.out_dir.string() + "'");

    std::vector<std::string> warnings;
    const auto series = translator::train_toy(parallel, train, &warnings, [&](const translator::Checkpoint& c) {
      translator::save_checkpoint(c, opt.out_dir / translator::checkpoint_dirname(c.iteration));
      out << "iteration " << c.iteration << " corpus_loglik=" << translator::format_real(c.corpus_loglik) << '\n';
    });
    for (const auto& w : warnings) err << "warning: " << w << '\n';
    translator::save_series(series, opt.out_dir);

    RunManifest manifest;
    manifest.command = "train";
    manifest.parameters = "iterations=" + std::to_string(opt.iterations) + " direction=" + opt.direction +
                          " lm_alpha=" + translator::format_real(opt.lm_alpha);
    manifest.inputs.emplace_back("parallel", checksum_path(opt.parallel));
    for (const auto& c : series.checkpoints) {
      const auto name = translator::checkpoint_dirname(c.iteration);
      manifest.outputs.emplace_back(name, checksum_path(opt.out_dir / name));
    }
    manifest.wall_seconds = clock.seconds();
    std::ostringstream text;
    manifest.write(text);
    write_file(opt.out_dir / "manifest.tsv", text.str());
    return static_cast<int>(kOk);
  });
}

// ---------------------------------------------------------------------------
// generate

struct GenerateOptions {
  std::string method = "nbest";  // nbest | paraphrase | ensemble
  fs::path model;
  std::optional<fs::path> backward;
  fs::path prompts;
  std::size_t n = 10;
  std::size_t beam = 100;
  std::size_t n_prime = 3;
  std::size_t m = 6;
  std::size_t top_k = 8;
  std::string policy = "default";
  std::optional<fs::path> out;
  std::size_t threads = 1;
};

inline std::string describe(const methods::MethodParams& p, const std::string& policy) {
  return "n=" + std::to_string(p.n) + " beam=" + std::to_string(p.beam.beam_width) + " m=" + std::to_string(p.m) +
         " n_prime=" + std::to_string(p.n_prime) + " top_k=" + std::to_string(p.beam.top_k_lexicon) +
         " policy=" + policy;
}

inline methods::MethodParams method_params(std::size_t n, std::size_t n_prime, std::size_t m, std::size_t beam,
                                           std::size_t top_k, const std::string& policy, std::size_t threads) {
  methods::MethodParams p;
  p.n = n;
  p.n_prime = n_prime;
  p.m = m;
  p.beam.beam_width = beam;
  p.beam.top_k_lexicon = top_k;
  p.match_policy = parse_policy(policy);
  p.threads = std::max<std::size_t>(1, threads);
  return p;
}

/// Dispatches one method. Shared by generate and sweep so their cells agree.
inline std::vector<corpus::PredictionSet> run_method(const std::string& method,
                                                     const translator::CheckpointSeries& model,
                                                     const translator::CheckpointSeries* backward,
                                                     const std::vector<corpus::Prompt>& prompts,
                                                     const methods::MethodParams& params,
                                                     std::vector<methods::MethodWarning>* warnings) {
  if (method == "nbest") return methods::nbest_predict(model.latest(), prompts, params, warnings);
  if (method == "paraphrase") {
    if (backward == nullptr) throw UsageError("paraphrase needs a backward model (--backward)");
    return methods::paraphrase_predict(model.latest(), backward->latest(), prompts, params, warnings);
  }
  if (method == "ensemble") return methods::multi_checkpoint_predict(model, prompts, params, warnings);
  throw UsageError("unknown method '" + method + "' (expected nbest|paraphrase|ensemble)");
}

inline int cmd_generate(const GenerateOptions& opt, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    Stopwatch clock;
    const auto params = method_params(opt.n, opt.n_prime, opt.m, opt.beam, opt.top_k, opt.policy, opt.threads);
    params.validate();
    if (opt.method != "nbest" && opt.method != "paraphrase" && opt.method != "ensemble") {
      throw UsageError("unknown method '" + opt.method + "' (expected nbest|paraphrase|ensemble)");
    }
    if (opt.method == "paraphrase" && !opt.backward) throw UsageError("paraphrase needs a backward model (--backward)");

    const auto model = translator::load_series(opt.model);
    std::optional<translator::CheckpointSeries> backward;
    if (opt.backward) backward = translator::load_series(*opt.backward);
    const auto prompts = load_prompts(opt.prompts);

    std::vector<methods::MethodWarning> warnings;
    const auto sets = run_method(opt.method, model, backward ? &*backward : nullptr, prompts, params, &warnings);

    std::ostringstream preds;
    corpus::write_predictions(sets, preds);
    std::ostringstream warn_text;
    methods::write_warnings(warnings, warn_text);
    if (!opt.out) {
      out << preds.str();
      for (const auto& w : warnings) err << "warning: " << w.prompt_id << ": " << w.stage << ": " << w.message << '\n';
      return static_cast<int>(kOk);
    }
    write_file(*opt.out, preds.str());
    write_file(sidecar(*opt.out, ".warnings.tsv"), warn_text.str());

    RunManifest manifest;
    manifest.command = "generate";
    manifest.parameters = "method=" + opt.method + " " + describe(params, opt.policy);
    manifest.inputs.emplace_back("model", checksum_path(opt.model));
    if (opt.backward) manifest.inputs.emplace_back("backward", checksum_path(*opt.backward));
    manifest.inputs.emplace_back("prompts", checksum_path(opt.prompts));
    manifest.outputs.emplace_back("predictions", sha256(preds.str()));
    manifest.outputs.emplace_back("warnings", sha256(warn_text.str()));
    manifest.wall_seconds = clock.seconds();
    save_manifest(manifest, *opt.out, err);
    return static_cast<int>(kOk);
  });
}

// ---------------------------------------------------------------------------
// sweep

struct SweepSpec {
  std::vector<std::size_t> n_values{5, 10, 15, 20};
  std::vector<std::size_t> n_prime_values{1, 3, 5};
  std::vector<std::size_t> m_values{2, 4, 6, 8};
  std::size_t fixed_n = 10;

  bool empty() const { return n_values.empty() && n_prime_values.empty() && m_values.empty(); }
};

struct SweepOptions {
  fs::path series;
  std::optional<fs::path> backward;
  fs::path gold;
  std::optional<fs::path> prompts;  // defaults to the gold prompts
  SweepSpec spec;
  std::size_t beam = 100;
  std::size_t top_k = 8;
  std::string policy = "default";
  std::optional<fs::path> out;
  std::size_t threads = 1;
};

struct SweepCell {
  std::string method;
  std::string param;
  std::optional<metrics::CorpusScore> score;  // empty = NA
};

inline std::string sweep_table(const std::vector<SweepCell>& cells) {
  std::string out = "method\tparam\tprecision\tweighted_recall\tweighted_f1\n";
  for (const auto& c : cells) {
    out += c.method + '\t' + c.param + '\t';
    if (c.score) {
      out += metrics::percent(c.score->mean_precision) + '\t' + metrics::percent(c.score->mean_weighted_recall) +
             '\t' + metrics::percent(c.score->macro_f1) + '\n';
    } else {
      out += "NA\tNA\tNA\n";
    }
  }
  return out;
}

inline int cmd_sweep(const SweepOptions& opt, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    Stopwatch clock;
    if (opt.spec.empty()) {
      out << sweep_table({});
      err << "sweep: no parameter values given\n";
      return static_cast<int>(kEmptyWork);
    }
    const auto policy = parse_policy(opt.policy);
    const auto model = translator::load_series(opt.series);
    std::optional<translator::CheckpointSeries> backward;
    if (opt.backward) backward = translator::load_series(*opt.backward);
    const auto golds = load_gold(opt.gold, policy);
    const auto prompts = opt.prompts ? load_prompts(*opt.prompts) : corpus::prompts_of(golds);

    struct Plan {
      std::string method;
      std::string param;
      std::size_t n, n_prime, m;
    };
    std::vector<Plan> plan;
    for (auto n : opt.spec.n_values) plan.push_back({"nbest", "n=" + std::to_string(n), n, 1, 1});
    for (auto np : opt.spec.n_prime_values) {
      plan.push_back({"paraphrase", "n'=" + std::to_string(np), opt.spec.fixed_n, np, 1});
    }
    for (auto m : opt.spec.m_values) plan.push_back({"ensemble", "m=" + std::to_string(m), opt.spec.fixed_n, 1, m});

    std::vector<SweepCell> cells;
    std::size_t succeeded = 0;
    for (const auto& p : plan) {
      SweepCell cell{p.method, p.param, std::nullopt};
      try {
        const auto params = method_params(p.n, p.n_prime, p.m, opt.beam, opt.top_k, opt.policy, opt.threads);
        const auto sets = run_method(p.method, model, backward ? &*backward : nullptr, prompts, params, nullptr);
        cell.score = metrics::score_corpus(golds, sets, policy);
        ++succeeded;
      } catch (const Error& e) {
        err << "sweep: " << p.method << ' ' << p.param << ": " << e.what() << '\n';
      }
      cells.push_back(std::move(cell));
    }

    const auto table = sweep_table(cells);
    if (opt.out) {
      write_file(*opt.out, table);
      RunManifest manifest;
      manifest.command = "sweep";
      auto join = [](const std::vector<std::size_t>& v) {
        std::string s;
        for (auto x : v) s += (s.empty() ? "" : ",") + std::to_string(x);
        return s;
      };
      manifest.parameters = "n_values=" + join(opt.spec.n_values) + " n_prime_values=" + join(opt.spec.n_prime_values) +
                            " m_values=" + join(opt.spec.m_values) + " fixed_n=" + std::to_string(opt.spec.fixed_n) +
                            " beam=" + std::to_string(opt.beam) + " top_k=" + std::to_string(opt.top_k) +
                            " policy=" + opt.policy;
      manifest.inputs.emplace_back("series", checksum_path(opt.series));
      if (opt.backward) manifest.inputs.emplace_back("backward", checksum_path(*opt.backward));
      manifest.inputs.emplace_back("gold", checksum_path(opt.gold));
      if (opt.prompts) manifest.inputs.emplace_back("prompts", checksum_path(*opt.prompts));
      manifest.outputs.emplace_back("table", sha256(table));
      manifest.wall_seconds = clock.seconds();
      save_manifest(manifest, *opt.out, err);
    } else {
      out << table;
    }
    return static_cast<int>(succeeded > 0 ? kOk : kInputError);
  });
}

// ---------------------------------------------------------------------------
// bpe

struct BpeLearnOptions {
  std::vector<fs::path> inputs;  // raw text, one sentence per line; all files form one joint corpus
  std::size_t merges = 500;
  std::string policy = "default";
  fs::path out;
};

struct BpeApplyOptions {
  fs::path model;
  std::optional<fs::path> input;  // token lines; stdin when unset
};

inline std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> lines;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
  }
  return lines;
}

inline textproc::TokenSeq split_ws(const std::string& line) {
  textproc::TokenSeq out;
  std::istringstream in(line);
  std::string tok;
  while (in >> tok) out.push_back(std::move(tok));
  return out;
}

inline std::string join_ws(const textproc::TokenSeq& tokens) {
  std::string s;
  for (const auto& t : tokens) s += (s.empty() ? "" : " ") + t;
  return s;
}

inline int cmd_bpe_learn(const BpeLearnOptions& opt, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    if (opt.inputs.empty()) throw UsageError("bpe learn needs at least one input file");
    const auto policy = parse_policy(opt.policy);
    std::vector<textproc::TokenSeq> sentences;
    for (const auto& path : opt.inputs) {
      for (const auto& line : lines_of(read_file(path))) sentences.push_back(textproc::preprocess(line, policy));
    }
    const auto model = textproc::bpe_learn(sentences, opt.merges);
    std::ostringstream text;
    textproc::save_bpe(model, text);
    write_file(opt.out, text.str());
    out << "merges=" << model.num_merges() << '\n';
    return static_cast<int>(kOk);
  });
}

inline std::string read_input(const std::optional<fs::path>& path, std::istream& in) {
  if (path) return read_file(*path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline int cmd_bpe_apply(const BpeApplyOptions& opt, std::istream& in, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    std::istringstream model_in(read_file(opt.model));
    const auto model = textproc::load_bpe(model_in, opt.model.string());
    const auto ranks = textproc::merge_ranks(model);
    for (const auto& line : lines_of(read_input(opt.input, in))) {
      textproc::TokenSeq pieces;
      for (const auto& tok : split_ws(line)) {
        auto seg = textproc::bpe_segment(model, tok, ranks);
        pieces.insert(pieces.end(), seg.begin(), seg.end());
      }
      out << join_ws(pieces) << '\n';
    }
    return static_cast<int>(kOk);
  });
}

inline int cmd_bpe_decode(const std::optional<fs::path>& input, std::istream& in, std::ostream& out,
                          std::ostream& err) {
  return guarded(err, [&] {
    std::size_t number = 0;
    for (const auto& line : lines_of(read_input(input, in))) {
      ++number;
      std::size_t dangling = 0;
      out << join_ws(textproc::bpe_decode(split_ws(line), &dangling)) << '\n';
      if (dangling > 0) err << "warning: line " << number << ": dangling continuation marker\n";
    }
    return static_cast<int>(kOk);
  });
}

}  // namespace staple::cli

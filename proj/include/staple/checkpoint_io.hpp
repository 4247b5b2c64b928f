#pragma once

// Checkpoint directory layout:
//
//   meta.tsv     iteration, direction, corpus_loglik, lm_alpha, created_at, checksum
//   lexicon.tsv  source<TAB>target<TAB>prob, sorted
//   lm.tsv       w1<TAB>w2<TAB>logprob, sorted
//
// lm.tsv uses the reserved words <s>, </s>, <unseen> (mass of any next word
// without its own row) and <unigram> (the backoff history). The checksum
// covers the meta lines above it and the bytes of both tables.
//
// A series is a directory of ckpt-NNNN/ subdirectories plus series.tsv.

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <filesystem>
#include <map>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "staple/checksum.hpp"
#include "staple/error.hpp"
#include "staple/translator.hpp"

namespace staple::translator {

namespace fs = std::filesystem;

inline constexpr std::string_view kUnseen = "<unseen>";
inline constexpr std::string_view kUnigram = "<unigram>";

inline std::string checkpoint_dirname(std::size_t iteration) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "ckpt-%04zu", iteration);
  return buf;
}

namespace detail {

inline std::string lexicon_tsv(const LexiconTable& lex) {
  std::string out;
  for (const auto& [src, row] : lex.rows()) {
    for (const auto& [tgt, p] : row) out += src + '\t' + tgt + '\t' + format_real(p) + '\n';
  }
  return out;
}

inline std::string lm_tsv(const BigramLm& lm) {
  std::vector<std::tuple<std::string, std::string, double>> rows;
  auto add = [&](std::string_view h, const BigramLm::Row& r) {
    for (const auto& [w, lp] : r.seen) rows.emplace_back(std::string(h), w, lp);
    rows.emplace_back(std::string(h), std::string(kUnseen), r.unseen);
  };
  for (const auto& [h, r] : lm.histories()) add(h, r);
  add(kUnigram, lm.unigram());
  std::sort(rows.begin(), rows.end());
  std::string out;
  for (const auto& [h, w, lp] : rows) out += h + '\t' + w + '\t' + format_real(lp) + '\n';
  return out;
}

inline std::string meta_body(const Checkpoint& c) {
  std::ostringstream out;
  out << "iteration\t" << c.iteration << '\n'
      << "direction\t" << to_string(c.direction) << '\n'
      << "corpus_loglik\t" << format_real(c.corpus_loglik) << '\n'
      << "lm_alpha\t" << format_real(c.lm.alpha()) << '\n'
      << "created_at\t" << c.created_at << '\n';
  return out.str();
}

inline std::string checksum_of(std::string_view meta, std::string_view lexicon, std::string_view lm) {
  return Sha256().update(meta).update(lexicon).update(lm).hex();
}

inline std::vector<std::vector<std::string>> split_rows(const std::string& text, std::size_t columns,
                                                        const fs::path& file) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(text);
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    std::vector<std::string> fields;
    std::size_t start = 0;
    for (;;) {
      const auto tab = line.find('\t', start);
      fields.push_back(line.substr(start, tab == std::string::npos ? std::string::npos : tab - start));
      if (tab == std::string::npos) break;
      start = tab + 1;
    }
    if (fields.size() != columns) {
      throw ParseError(file.string(), number, "expected " + std::to_string(columns) + " tab-separated fields");
    }
    rows.push_back(std::move(fields));
  }
  return rows;
}

inline long long int_field(const std::string& s, const fs::path& file) {
  long long v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size()) {
    throw ParseError(file.string() + ": bad integer '" + s + "'");
  }
  return v;
}

inline double real_field(const std::string& s, const fs::path& file) {
  auto v = parse_real(s);
  if (!v) throw ParseError(file.string() + ": bad number '" + s + "'");
  return *v;
}

}  // namespace detail

/// Writes the checkpoint into `dir` (created if needed). Output bytes depend
/// only on the checkpoint's contents.
inline void save_checkpoint(const Checkpoint& c, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error("cannot create '" + dir.string() + "': " + ec.message());
  const auto lexicon = detail::lexicon_tsv(c.lexicon);
  const auto lm = detail::lm_tsv(c.lm);
  const auto meta = detail::meta_body(c);
  write_file(dir / "lexicon.tsv", lexicon);
  write_file(dir / "lm.tsv", lm);
  write_file(dir / "meta.tsv", meta + "checksum\t" + detail::checksum_of(meta, lexicon, lm) + '\n');
}

inline Checkpoint load_checkpoint(const fs::path& dir) {
  for (const char* name : {"meta.tsv", "lexicon.tsv", "lm.tsv"}) {
    if (!fs::is_regular_file(dir / name)) {
      throw ParseError("missing checkpoint file '" + (dir / name).string() + "'");
    }
  }
  const auto meta_path = dir / "meta.tsv";
  const auto meta_text = read_file(meta_path);
  const auto lexicon = read_file(dir / "lexicon.tsv");
  const auto lm_text = read_file(dir / "lm.tsv");

  const auto split = meta_text.rfind("checksum\t");
  if (split == std::string::npos || (split != 0 && meta_text[split - 1] != '\n')) {
    throw ParseError(meta_path.string() + ": no checksum line");
  }
  std::string stored = meta_text.substr(split + 9);
  if (!stored.empty() && stored.back() == '\n') stored.pop_back();
  const auto body = meta_text.substr(0, split);
  if (detail::checksum_of(body, lexicon, lm_text) != stored) {
    throw IntegrityError("checksum mismatch in checkpoint '" + dir.string() + "'");
  }

  std::map<std::string, std::string> meta;
  for (auto& row : detail::split_rows(body, 2, meta_path)) meta[row[0]] = row[1];
  auto need = [&](const char* key) -> const std::string& {
    auto it = meta.find(key);
    if (it == meta.end()) throw ParseError(meta_path.string() + ": missing key '" + key + "'");
    return it->second;
  };

  Checkpoint c;
  const auto iteration = detail::int_field(need("iteration"), meta_path);
  if (iteration < 1) throw IntegrityError(meta_path.string() + ": iteration must be >= 1");
  c.iteration = static_cast<std::size_t>(iteration);
  auto dir_tag = parse_direction(need("direction"));
  if (!dir_tag) throw ParseError(meta_path.string() + ": bad direction '" + need("direction") + "'");
  c.direction = *dir_tag;
  c.corpus_loglik = detail::real_field(need("corpus_loglik"), meta_path);
  c.lm.set_alpha(detail::real_field(need("lm_alpha"), meta_path));
  c.created_at = detail::int_field(need("created_at"), meta_path);

  for (auto& row : detail::split_rows(lexicon, 3, dir / "lexicon.tsv")) {
    c.lexicon.set(row[0], row[1], detail::real_field(row[2], dir / "lexicon.tsv"));
  }
  for (auto& row : detail::split_rows(lm_text, 3, dir / "lm.tsv")) {
    auto& target = row[0] == kUnigram ? c.lm.mutable_unigram() : c.lm.mutable_history(row[0]);
    const double lp = detail::real_field(row[2], dir / "lm.tsv");
    if (row[1] == kUnseen) {
      target.unseen = lp;
    } else {
      target.seen[row[1]] = lp;
    }
  }
  return c;
}

/// Persists every checkpoint as ckpt-NNNN/ plus a series.tsv index.
inline void save_series(const CheckpointSeries& series, const fs::path& dir) {
  std::string index = "iteration\tpath\tcorpus_loglik\tdirection\n";
  for (const auto& c : series.checkpoints) {
    const auto name = checkpoint_dirname(c.iteration);
    save_checkpoint(c, dir / name);
    index += std::to_string(c.iteration) + '\t' + name + '\t' + format_real(c.corpus_loglik) + '\t' +
             std::string(to_string(c.direction)) + '\n';
  }
  write_file(dir / "series.tsv", index);
}

inline bool is_checkpoint_dir(const fs::path& dir) { return fs::is_regular_file(dir / "meta.tsv"); }

/// Loads a series directory, or a single checkpoint directory as a
/// one-element series. Validates ordering and likelihood monotonicity.
inline CheckpointSeries load_series(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw ParseError("model directory '" + dir.string() + "' does not exist");
  CheckpointSeries series;
  if (is_checkpoint_dir(dir)) {
    series.checkpoints.push_back(load_checkpoint(dir));
  } else {
    std::vector<fs::path> dirs;
    for (const auto& entry : fs::directory_iterator(dir)) {
      const auto name = entry.path().filename().string();
      if (entry.is_directory() && name.size() == 9 && name.rfind("ckpt-", 0) == 0) dirs.push_back(entry.path());
    }
    std::sort(dirs.begin(), dirs.end());
    for (const auto& d : dirs) series.checkpoints.push_back(load_checkpoint(d));
  }
  if (series.checkpoints.empty()) throw ParseError("no checkpoints found in '" + dir.string() + "'");
  series.direction = series.checkpoints.front().direction;
  series.validate();
  return series;
}

}  // namespace staple::translator

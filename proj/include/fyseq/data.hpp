#pragma once

// Dataset file format and synthetic task generators. One example per line:
// source tokens and target tokens separated by a single tab, tokens separated
// by single spaces, UTF-8, LF line endings.

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "fyseq/errors.hpp"
#include "fyseq/rng.hpp"
#include "fyseq/vocab.hpp"

namespace fyseq {

struct RawExample {
  std::vector<std::string> source;
  std::vector<std::string> target;
};

struct Dataset {
  std::vector<SequencePair> pairs;
  Vocabulary vocab;
};

namespace detail {

inline std::vector<std::string> split_tokens(const std::string& field, const std::string& path,
                                             std::size_t line_no) {
  std::vector<std::string> tokens;
  if (field.empty()) return tokens;
  std::size_t start = 0;
  while (true) {
    const std::size_t space = field.find(' ', start);
    const std::string tok = field.substr(start, space - start);
    if (tok.empty())
      throw MalformedLine(path, line_no, "empty token (consecutive or trailing spaces)");
    if (Vocabulary::is_reserved_string(tok))
      throw MalformedLine(path, line_no, "reserved token in data: " + tok);
    tokens.push_back(tok);
    if (space == std::string::npos) break;
    start = space + 1;
  }
  return tokens;
}

}  // namespace detail

inline std::vector<RawExample> read_raw(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open dataset: " + path);
  std::vector<RawExample> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const std::size_t tab = line.find('\t');
    if (tab == std::string::npos)
      throw MalformedLine(path, line_no, "no tab separator");
    if (line.find('\t', tab + 1) != std::string::npos)
      throw MalformedLine(path, line_no, "more than one tab");
    RawExample ex;
    ex.source = detail::split_tokens(line.substr(0, tab), path, line_no);
    ex.target = detail::split_tokens(line.substr(tab + 1), path, line_no);
    if (ex.source.empty()) throw MalformedLine(path, line_no, "empty source side");
    out.push_back(std::move(ex));
  }
  if (out.empty()) throw EmptyFile("dataset has no examples: " + path);
  return out;
}

// Vocabulary over the union of observed tokens, first-occurrence order,
// reserved symbols first.
inline Vocabulary build_vocabulary(const std::vector<RawExample>& raw) {
  Vocabulary vocab;
  for (const auto& ex : raw) {
    for (const auto& t : ex.source) vocab.add(t);
    for (const auto& t : ex.target) vocab.add(t);
  }
  return vocab;
}

// Encode against a fixed vocabulary; unseen tokens are a VocabularyMismatch.
inline std::vector<SequencePair> encode_with(const std::vector<RawExample>& raw,
                                             const Vocabulary& vocab) {
  std::vector<SequencePair> pairs;
  pairs.reserve(raw.size());
  for (const auto& ex : raw) {
    SequencePair pair;
    for (const auto& t : ex.source) {
      if (!vocab.contains(t)) throw VocabularyMismatch("token not in model vocabulary: " + t);
      pair.source.push_back(vocab.index_of(t));
    }
    for (const auto& t : ex.target) {
      if (!vocab.contains(t)) throw VocabularyMismatch("token not in model vocabulary: " + t);
      pair.target.push_back(vocab.index_of(t));
    }
    pair.target.push_back(Vocabulary::kEos);
    pairs.push_back(std::move(pair));
  }
  return pairs;
}

inline Dataset load_dataset(const std::string& path) {
  const auto raw = read_raw(path);
  Dataset ds;
  ds.vocab = build_vocabulary(raw);
  ds.pairs = encode_with(raw, ds.vocab);
  return ds;
}

// --- synthetic tasks ---------------------------------------------------

enum class SyntheticTask { Copy, Reverse, RewriteRules };

inline SyntheticTask parse_task(const std::string& name) {
  if (name == "copy") return SyntheticTask::Copy;
  if (name == "reverse") return SyntheticTask::Reverse;
  if (name == "rewrite-rules") return SyntheticTask::RewriteRules;
  throw std::invalid_argument("unknown task: " + name + " (copy | reverse | rewrite-rules)");
}

struct SyntheticSplits {
  std::string train_path, dev_path, test_path;
};

namespace detail {

// Copy/reverse alphabet: 9 symbols, so the vocabulary lands at 12 with the
// reserved tokens.
inline const std::vector<std::string>& transduction_alphabet() {
  static const std::vector<std::string> symbols = {"a", "b", "c", "d", "e",
                                                   "f", "g", "h", "i"};
  return symbols;
}

// Rewrite sources use their own 10-symbol alphabet.
inline const std::vector<std::string>& rewrite_alphabet() {
  static const std::vector<std::string> symbols = {"ka", "ke", "ki", "ko", "ku",
                                                   "ta", "te", "ti", "to", "tu"};
  return symbols;
}

inline const std::vector<std::string>& rewrite_outputs() {
  static const std::vector<std::string> symbols = {"K", "G", "P", "B", "T",
                                                   "D", "S", "Z", "M", "N"};
  return symbols;
}

// Context-free substitution table. A third of the source symbols are
// ambiguous: they carry a secondary output drawn with fixed probability,
// G2P-homograph style, which puts an accuracy ceiling on the task.
struct RewriteTable {
  std::vector<std::string> primary;
  std::vector<std::string> secondary;  // empty string = unambiguous
  double secondary_prob = 0.3;

  static RewriteTable build(std::uint64_t seed) {
    const auto& outputs = rewrite_outputs();
    RewriteTable table;
    Rng rng(Rng::derive(seed, 1001));
    std::vector<std::string> shuffled = outputs;
    rng.shuffle(shuffled);
    const std::size_t n = rewrite_alphabet().size();
    table.primary.resize(n);
    table.secondary.assign(n, "");
    for (std::size_t i = 0; i < n; ++i) table.primary[i] = shuffled[i];
    std::vector<std::size_t> ids(n);
    for (std::size_t i = 0; i < n; ++i) ids[i] = i;
    rng.shuffle(ids);
    for (std::size_t k = 0; k < n / 3; ++k) {
      const std::size_t i = ids[k];
      table.secondary[i] = shuffled[(i + 1) % n];
    }
    return table;
  }
};

}  // namespace detail

// Deterministic synthetic examples, one "source<TAB>target" line each.
inline std::vector<std::string> generate_synthetic_lines(SyntheticTask task, std::size_t size,
                                                         std::uint64_t seed) {
  if (size < 1) throw std::invalid_argument("size must be >= 1");
  Rng rng(Rng::derive(seed, 2002));
  std::vector<std::string> lines;
  lines.reserve(size);

  const auto join = [](const std::vector<std::string>& toks) {
    std::string s;
    for (std::size_t i = 0; i < toks.size(); ++i) {
      if (i) s += ' ';
      s += toks[i];
    }
    return s;
  };

  if (task == SyntheticTask::Copy || task == SyntheticTask::Reverse) {
    const auto& alphabet = detail::transduction_alphabet();
    for (std::size_t k = 0; k < size; ++k) {
      const int len = rng.uniform_int(2, 8);
      std::vector<std::string> src;
      for (int i = 0; i < len; ++i)
        src.push_back(alphabet[rng.below(alphabet.size())]);
      std::vector<std::string> tgt = src;
      if (task == SyntheticTask::Reverse) std::reverse(tgt.begin(), tgt.end());
      lines.push_back(join(src) + "\t" + join(tgt));
    }
    return lines;
  }

  const auto table = detail::RewriteTable::build(seed);
  const auto& alphabet = detail::rewrite_alphabet();
  for (std::size_t k = 0; k < size; ++k) {
    // mostly short sequences with a thin tail of long ones
    const int len = rng.uniform() < 0.08 ? rng.uniform_int(45, 60) : rng.uniform_int(3, 12);
    std::vector<std::string> src, tgt;
    for (int i = 0; i < len; ++i) {
      const std::size_t s = rng.below(alphabet.size());
      src.push_back(alphabet[s]);
      const bool flip = !table.secondary[s].empty() && rng.uniform() < table.secondary_prob;
      tgt.push_back(flip ? table.secondary[s] : table.primary[s]);
    }
    lines.push_back(join(src) + "\t" + join(tgt));
  }
  return lines;
}

// Emits train/dev/test files in out_dir, split 80/10/10.
inline SyntheticSplits generate_synthetic(SyntheticTask task, std::size_t size,
                                          std::uint64_t seed, const std::string& out_dir) {
  const auto lines = generate_synthetic_lines(task, size, seed);
  std::filesystem::create_directories(out_dir);

  const std::size_t n_train = (size * 8) / 10;
  const std::size_t n_dev = size / 10;

  SyntheticSplits splits;
  splits.train_path = out_dir + "/train.tsv";
  splits.dev_path = out_dir + "/dev.tsv";
  splits.test_path = out_dir + "/test.tsv";

  auto write = [&](const std::string& path, std::size_t begin, std::size_t end) {
    std::ofstream os(path, std::ios::binary);  // binary keeps LF endings everywhere
    if (!os) throw DataError("cannot write dataset: " + path);
    for (std::size_t i = begin; i < end; ++i) os << lines[i] << '\n';
  };
  write(splits.train_path, 0, n_train);
  write(splits.dev_path, n_train, n_train + n_dev);
  write(splits.test_path, n_train + n_dev, size);
  return splits;
}

}  // namespace fyseq

#include "dmem/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

namespace dmem {

BuildVocabResult build_vocab(const std::vector<Sentence>& sentences, size_t cap) {
  if (sentences.empty()) throw DomainError("build_vocab: empty corpus");
  std::map<std::string, size_t> freq;
  size_t total = 0;
  for (const Sentence& s : sentences)
    for (const std::string& tok : s) {
      ++freq[tok];
      ++total;
    }
  std::vector<std::pair<std::string, size_t>> ranked(freq.begin(), freq.end());
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;  // lexicographic tie-break
  });

  BuildVocabResult out;
  size_t covered = 0;
  for (size_t i = 0; i < ranked.size() && i < cap; ++i) {
    out.vocab.add(ranked[i].first);
    covered += ranked[i].second;
  }
  out.coverage = total == 0 ? 0.0 : static_cast<double>(covered) / static_cast<double>(total);
  return out;
}

std::vector<int> encode_sentence(const Vocabulary& v, const Sentence& tokens) {
  std::vector<int> ids;
  ids.reserve(tokens.size() + 1);
  for (const std::string& tok : tokens) ids.push_back(v.id(tok));
  ids.push_back(kEosId);
  return ids;
}

Sentence decode_ids(const Vocabulary& v, const std::vector<int>& ids) {
  Sentence out;
  for (int id : ids) {
    if (id == kEosId) break;
    out.push_back(v.token(id));
  }
  return out;
}

TaskKind task_from_string(const std::string& name) {
  if (name == "copy") return TaskKind::kCopy;
  if (name == "reverse") return TaskKind::kReverse;
  if (name == "rewrite_grammar") return TaskKind::kRewriteGrammar;
  throw DomainError("unknown task: " + name);
}

ParallelCorpus gen_task(const SyntheticTaskSpec& spec) {
  if (spec.min_len < 1 || spec.max_len < spec.min_len)
    throw DomainError("gen_task: empty length range");
  if (spec.vocab_size < 1) throw DomainError("gen_task: vocabulary must be nonempty");

  auto word = [](size_t i) { return "w" + std::to_string(i); };
  // Fixed bijective lexicon for rewrite_grammar.
  auto lexicon = [&spec, &word](const std::string& tok) {
    size_t i = std::stoul(tok.substr(1));
    return word((i + 1) % spec.vocab_size);
  };

  Rng rng(spec.seed);
  ParallelCorpus corpus;
  corpus.pairs.reserve(spec.count);
  for (size_t k = 0; k < spec.count; ++k) {
    size_t len = spec.min_len + rng.next_below(spec.max_len - spec.min_len + 1);
    Sentence src(len);
    for (std::string& tok : src) tok = word(rng.next_below(spec.vocab_size));
    Sentence tgt;
    switch (spec.task) {
      case TaskKind::kCopy:
        tgt = src;
        break;
      case TaskKind::kReverse:
        tgt.assign(src.rbegin(), src.rend());
        break;
      case TaskKind::kRewriteGrammar: {
        // Swap the two halves, then map through the lexicon.
        size_t half = len / 2;
        for (size_t i = half; i < len; ++i) tgt.push_back(lexicon(src[i]));
        for (size_t i = 0; i < half; ++i) tgt.push_back(lexicon(src[i]));
        break;
      }
    }
    corpus.pairs.emplace_back(std::move(src), std::move(tgt));
  }
  return corpus;
}

namespace {

std::string fold_case(const std::string& s) {
  std::string out = s;
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

using NgramCounts = std::map<std::vector<std::string>, size_t>;

NgramCounts count_ngrams(const Sentence& s, int n) {
  NgramCounts counts;
  if (static_cast<int>(s.size()) < n) return counts;
  for (size_t i = 0; i + n <= s.size(); ++i) {
    std::vector<std::string> gram(s.begin() + i, s.begin() + i + n);
    ++counts[gram];
  }
  return counts;
}

}  // namespace

double bleu(const std::vector<Sentence>& hypotheses, const std::vector<Sentence>& references,
            int max_n) {
  if (hypotheses.empty()) throw DomainError("bleu: empty hypothesis set");
  if (hypotheses.size() != references.size())
    throw DomainError("bleu: hypothesis/reference count mismatch");
  for (const Sentence& r : references)
    if (r.empty()) throw DomainError("bleu: empty reference");

  std::vector<size_t> matched(max_n, 0), total(max_n, 0);
  size_t hyp_len = 0, ref_len = 0;
  for (size_t i = 0; i < hypotheses.size(); ++i) {
    Sentence hyp, ref;
    for (const std::string& t : hypotheses[i]) hyp.push_back(fold_case(t));
    for (const std::string& t : references[i]) ref.push_back(fold_case(t));
    hyp_len += hyp.size();
    ref_len += ref.size();
    for (int n = 1; n <= max_n; ++n) {
      NgramCounts hc = count_ngrams(hyp, n);
      NgramCounts rc = count_ngrams(ref, n);
      for (const auto& [gram, cnt] : hc) {
        total[n - 1] += cnt;
        auto it = rc.find(gram);
        if (it != rc.end()) matched[n - 1] += std::min(cnt, it->second);  // clipped
      }
    }
  }

  double log_precision = 0.0;
  int used = 0;
  for (int n = 1; n <= max_n; ++n) {
    if (total[n - 1] == 0) break;  // shorter than n everywhere: drop the order
    if (matched[n - 1] == 0) return 0.0;
    log_precision += std::log(static_cast<double>(matched[n - 1]) / total[n - 1]);
    ++used;
  }
  if (used == 0) return 0.0;
  double bp = 1.0;
  if (hyp_len == 0) return 0.0;
  if (hyp_len < ref_len)
    bp = std::exp(1.0 - static_cast<double>(ref_len) / static_cast<double>(hyp_len));
  return bp * std::exp(log_precision / used);
}

std::vector<BucketRow> length_bucket_eval(const std::vector<Sentence>& hypotheses,
                                          const std::vector<Sentence>& references,
                                          const std::vector<size_t>& source_lengths,
                                          const std::vector<int>& thresholds) {
  if (hypotheses.size() != references.size() || hypotheses.size() != source_lengths.size())
    throw DomainError("length_bucket_eval: misaligned inputs");
  for (size_t i = 1; i < thresholds.size(); ++i)
    if (thresholds[i] <= thresholds[i - 1])
      throw DomainError("length_bucket_eval: thresholds must ascend");

  std::vector<BucketRow> rows;
  for (int thr : thresholds) {
    BucketRow row;
    row.threshold = thr;
    std::vector<Sentence> h, r;
    for (size_t i = 0; i < hypotheses.size(); ++i) {
      if (static_cast<int>(source_lengths[i]) > thr) {
        h.push_back(hypotheses[i]);
        r.push_back(references[i]);
      }
    }
    row.n_sentences = h.size();
    if (!h.empty()) row.bleu = bleu(h, r);
    rows.push_back(std::move(row));
  }
  return rows;
}

namespace {

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IngestionError("cannot open " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) lines.push_back(line);
  return lines;
}

Sentence tokenize(const std::string& line) {
  Sentence toks;
  std::istringstream ss(line);
  std::string tok;
  while (ss >> tok) toks.push_back(tok);
  return toks;
}

}  // namespace

ParallelCorpus load_parallel(const std::string& src_path, const std::string& tgt_path) {
  std::vector<std::string> src = read_lines(src_path);
  std::vector<std::string> tgt = read_lines(tgt_path);
  if (src.size() != tgt.size())
    throw IngestionError("line count mismatch: " + src_path + " has " +
                         std::to_string(src.size()) + " lines, " + tgt_path + " has " +
                         std::to_string(tgt.size()));
  ParallelCorpus corpus;
  for (size_t i = 0; i < src.size(); ++i)
    corpus.pairs.emplace_back(tokenize(src[i]), tokenize(tgt[i]));
  return corpus;
}

void save_parallel(const ParallelCorpus& corpus, const std::string& src_path,
                   const std::string& tgt_path) {
  std::ofstream so(src_path), to(tgt_path);
  if (!so || !to) throw IngestionError("cannot write corpus files");
  for (const auto& [src, tgt] : corpus.pairs) {
    for (size_t i = 0; i < src.size(); ++i) so << (i ? " " : "") << src[i];
    so << "\n";
    for (size_t i = 0; i < tgt.size(); ++i) to << (i ? " " : "") << tgt[i];
    to << "\n";
  }
}

}  // namespace dmem

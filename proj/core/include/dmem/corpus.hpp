#pragma once

#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "dmem/errors.hpp"
#include "dmem/rng.hpp"
#include "dmem/tokens.hpp"

namespace dmem {

// Token↔id bijection with fixed special symbols at ids 0..3.
class Vocabulary {
 public:
  Vocabulary() {
    for (const char* s : {"<pad>", "<unk>", "<bos>", "<eos>"}) add(s);
  }

  int add(const std::string& tok) {
    auto it = tok_to_id_.find(tok);
    if (it != tok_to_id_.end()) return it->second;
    int id = static_cast<int>(id_to_tok_.size());
    tok_to_id_[tok] = id;
    id_to_tok_.push_back(tok);
    return id;
  }

  int id(const std::string& tok) const {
    auto it = tok_to_id_.find(tok);
    return it == tok_to_id_.end() ? kUnkId : it->second;
  }

  bool contains(const std::string& tok) const { return tok_to_id_.count(tok) != 0; }

  const std::string& token(int id) const {
    if (id < 0 || static_cast<size_t>(id) >= id_to_tok_.size())
      throw IndexError("Vocabulary: id out of range");
    return id_to_tok_[static_cast<size_t>(id)];
  }

  size_t size() const { return id_to_tok_.size(); }
  const std::vector<std::string>& tokens() const { return id_to_tok_; }

 private:
  std::vector<std::string> id_to_tok_;
  std::unordered_map<std::string, int> tok_to_id_;
};

using Sentence = std::vector<std::string>;

struct ParallelCorpus {
  std::vector<std::pair<Sentence, Sentence>> pairs;
};

struct BuildVocabResult {
  Vocabulary vocab;
  double coverage = 0.0;  // fraction of corpus tokens covered by the cap
};

// Most frequent `cap` tokens (ties broken lexicographically) on top of the
// special symbols.
BuildVocabResult build_vocab(const std::vector<Sentence>& sentences, size_t cap);

// OOV tokens map to UNK; EOS is appended.
std::vector<int> encode_sentence(const Vocabulary& v, const Sentence& tokens);
Sentence decode_ids(const Vocabulary& v, const std::vector<int>& ids);

enum class TaskKind { kCopy, kReverse, kRewriteGrammar };
TaskKind task_from_string(const std::string& name);

struct SyntheticTaskSpec {
  TaskKind task = TaskKind::kCopy;
  size_t vocab_size = 20;  // regular tokens, specials excluded
  size_t min_len = 2;
  size_t max_len = 10;
  size_t count = 1000;
  uint64_t seed = 42;
};

// copy: target = source. reverse: target = reversed source.
// rewrite_grammar: swap the two halves of the sentence and map every token
// through a fixed bijective lexicon.
ParallelCorpus gen_task(const SyntheticTaskSpec& spec);

// Corpus-level BLEU in [0,1]: geometric mean of modified n-gram precisions
// times the exp(1−r/c) brevity penalty, case-folded, single reference.
// Orders with no n-grams available (all hypotheses shorter than n) are
// dropped from the mean; a zero match count at any used order gives 0.
double bleu(const std::vector<Sentence>& hypotheses, const std::vector<Sentence>& references,
            int max_n = 4);

struct BucketRow {
  int threshold = 0;
  size_t n_sentences = 0;
  std::optional<double> bleu;  // absent when the bucket is empty
};

// BLEU restricted to pairs whose *source* length exceeds each threshold.
std::vector<BucketRow> length_bucket_eval(const std::vector<Sentence>& hypotheses,
                                          const std::vector<Sentence>& references,
                                          const std::vector<size_t>& source_lengths,
                                          const std::vector<int>& thresholds);

ParallelCorpus load_parallel(const std::string& src_path, const std::string& tgt_path);
void save_parallel(const ParallelCorpus& corpus, const std::string& src_path,
                   const std::string& tgt_path);

}  // namespace dmem

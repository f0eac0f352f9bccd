#pragma once

#include <optional>
#include <string>

#include "dmem/architecture.hpp"
#include "dmem/corpus.hpp"
#include "dmem/training.hpp"

namespace dmem {

// Flat key = value configuration with [sections]. Unknown keys are rejected
// so typos fail loudly instead of silently using defaults.
struct RunConfig {
  // [model]
  std::string preset = "arc2";
  Dims dims;
  size_t max_len = 64;

  // [data] — either a synthetic task or a pair of corpus files.
  std::string task;  // copy | reverse | rewrite_grammar; empty means files
  size_t task_vocab = 20;
  size_t task_min_len = 2;
  size_t task_max_len = 10;
  size_t task_pairs = 2000;
  std::string src_file, tgt_file;
  size_t vocab_cap = 16000;

  // [train]
  TrainConfig train;

  // [run]
  std::string outdir = "out";
  uint64_t seed = 42;
};

RunConfig parse_config_file(const std::string& path);
RunConfig parse_config_text(const std::string& text);
std::string render_config(const RunConfig& config);  // effective-config echo

}  // namespace dmem

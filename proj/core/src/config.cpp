#include "dmem/config.hpp"

#include <fstream>
#include <sstream>

namespace dmem {

namespace {

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

uint64_t to_u64(const std::string& key, const std::string& v) {
  try {
    size_t pos = 0;
    uint64_t x = std::stoull(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw DomainError("config: key '" + key + "' expects an integer, got '" + v + "'");
  }
}

double to_double(const std::string& key, const std::string& v) {
  try {
    size_t pos = 0;
    double x = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw DomainError("config: key '" + key + "' expects a number, got '" + v + "'");
  }
}

}  // namespace

RunConfig parse_config_text(const std::string& text) {
  RunConfig cfg;
  std::istringstream in(text);
  std::string line, section;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string t = trim(line);
    if (t.empty() || t[0] == '#' || t[0] == ';') continue;
    if (t.front() == '[' && t.back() == ']') {
      section = trim(t.substr(1, t.size() - 2));
      if (section != "model" && section != "data" && section != "train" && section != "run")
        throw DomainError("config: unknown section [" + section + "]");
      continue;
    }
    size_t eq = t.find('=');
    if (eq == std::string::npos)
      throw DomainError("config: line " + std::to_string(lineno) + " is not key = value");
    std::string key = trim(t.substr(0, eq));
    std::string val = trim(t.substr(eq + 1));
    std::string full = section + "." + key;

    if (full == "model.preset") cfg.preset = val;
    else if (full == "model.d_emb") cfg.dims.d_emb = to_u64(full, val);
    else if (full == "model.d_s") cfg.dims.d_s = to_u64(full, val);
    else if (full == "model.d_mem") cfg.dims.d_mem = to_u64(full, val);
    else if (full == "model.max_len") cfg.max_len = to_u64(full, val);
    else if (full == "data.task") cfg.task = val;
    else if (full == "data.vocab") cfg.task_vocab = to_u64(full, val);
    else if (full == "data.min_len") cfg.task_min_len = to_u64(full, val);
    else if (full == "data.max_len") cfg.task_max_len = to_u64(full, val);
    else if (full == "data.pairs") cfg.task_pairs = to_u64(full, val);
    else if (full == "data.src_file") cfg.src_file = val;
    else if (full == "data.tgt_file") cfg.tgt_file = val;
    else if (full == "data.vocab_cap") cfg.vocab_cap = to_u64(full, val);
    else if (full == "train.batch_size") cfg.train.batch_size = to_u64(full, val);
    else if (full == "train.rho") cfg.train.rho = to_double(full, val);
    else if (full == "train.epsilon") cfg.train.epsilon = to_double(full, val);
    else if (full == "train.max_epochs") cfg.train.max_epochs = to_u64(full, val);
    else if (full == "train.clip_norm") cfg.train.clip_norm = to_double(full, val);
    else if (full == "train.shuffle") {
      if (val == "bucket") cfg.train.bucket_by_length = true;
      else if (val == "random") cfg.train.bucket_by_length = false;
      else throw DomainError("config: train.shuffle must be bucket or random, got '" + val + "'");
    }
    else if (full == "run.outdir") cfg.outdir = val;
    else if (full == "run.seed") cfg.seed = to_u64(full, val);
    else throw DomainError("config: unknown key '" + full + "'");
  }
  cfg.train.seed = cfg.seed;
  if (cfg.train.batch_size < 1) throw DomainError("config: train.batch_size must be >= 1");
  return cfg;
}

RunConfig parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IngestionError("cannot open config " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

std::string render_config(const RunConfig& c) {
  std::ostringstream os;
  os << "[model]\n"
     << "preset = " << c.preset << "\n"
     << "d_emb = " << c.dims.d_emb << "\n"
     << "d_s = " << c.dims.d_s << "\n"
     << "d_mem = " << c.dims.d_mem << "\n"
     << "max_len = " << c.max_len << "\n\n"
     << "[data]\n";
  if (!c.task.empty()) {
    os << "task = " << c.task << "\n"
       << "vocab = " << c.task_vocab << "\n"
       << "min_len = " << c.task_min_len << "\n"
       << "max_len = " << c.task_max_len << "\n"
       << "pairs = " << c.task_pairs << "\n";
  } else {
    os << "src_file = " << c.src_file << "\n"
       << "tgt_file = " << c.tgt_file << "\n";
  }
  os << "vocab_cap = " << c.vocab_cap << "\n\n"
     << "[train]\n"
     << "batch_size = " << c.train.batch_size << "\n"
     << "rho = " << c.train.rho << "\n"
     << "epsilon = " << c.train.epsilon << "\n"
     << "max_epochs = " << c.train.max_epochs << "\n"
     << "clip_norm = " << c.train.clip_norm << "\n"
     << "shuffle = " << (c.train.bucket_by_length ? "bucket" : "random") << "\n\n"
     << "[run]\n"
     << "outdir = " << c.outdir << "\n"
     << "seed = " << c.seed << "\n";
  return os.str();
}

}  // namespace dmem

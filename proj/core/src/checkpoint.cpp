#include "dmem/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include <json.hpp>

static_assert(std::endian::native == std::endian::little,
              "checkpoint format assumes a little-endian host");

namespace dmem {

using json = nlohmann::ordered_json;

namespace {

json memref_to_json(const MemRef& r) {
  return json{{"kind", r.kind == MemRef::Kind::kLayer ? "layer" : "bundle"}, {"id", r.id}};
}

MemRef memref_from_json(const json& j) {
  MemRef r;
  r.kind = j.at("kind") == "layer" ? MemRef::Kind::kLayer : MemRef::Kind::kBundle;
  r.id = j.at("id");
  return r;
}

json arch_to_json_obj(const ArchSpec& spec) {
  json j;
  j["preset"] = spec.preset;
  j["dims"] = {{"d_emb", spec.dims.d_emb}, {"d_s", spec.dims.d_s}, {"d_mem", spec.dims.d_mem}};
  j["src_vocab"] = spec.src_vocab;
  j["tgt_vocab"] = spec.tgt_vocab;
  j["content_init_seed"] = spec.content_init_seed;
  j["layers"] = json::array();
  for (const LayerSpecA& l : spec.layers) {
    json jl;
    jl["id"] = l.id;
    jl["write"] = l.write_mode == WriteMode::kLocation ? "location" : "content";
    jl["bidirectional"] = l.bidirectional;
    if (l.fixed_len) jl["fixed_len"] = *l.fixed_len;
    jl["reads"] = json::array();
    for (const ReadHeadSpec& h : l.reads)
      jl["reads"].push_back(json{{"mode", h.mode == ReadMode::kLocation ? "location" : "content"},
                                 {"source", memref_to_json(h.source)}});
    j["layers"].push_back(std::move(jl));
  }
  j["bundles"] = json::array();
  for (const BundleSpec& b : spec.bundles)
    j["bundles"].push_back(json{{"id", b.id}, {"members", b.members}});
  j["output"] = {{"read_source", memref_to_json(spec.output.read_source)},
                 {"max_len", spec.output.max_len}};
  return j;
}

ArchSpec arch_from_json_obj(const json& j) {
  ArchSpec spec;
  spec.preset = j.at("preset");
  spec.dims.d_emb = j.at("dims").at("d_emb");
  spec.dims.d_s = j.at("dims").at("d_s");
  spec.dims.d_mem = j.at("dims").at("d_mem");
  spec.src_vocab = j.at("src_vocab");
  spec.tgt_vocab = j.at("tgt_vocab");
  spec.content_init_seed = j.at("content_init_seed");
  for (const json& jl : j.at("layers")) {
    LayerSpecA l;
    l.id = jl.at("id");
    l.write_mode = jl.at("write") == "location" ? WriteMode::kLocation : WriteMode::kContent;
    l.bidirectional = jl.at("bidirectional");
    if (jl.contains("fixed_len")) l.fixed_len = jl.at("fixed_len").get<size_t>();
    for (const json& jh : jl.at("reads"))
      l.reads.push_back(ReadHeadSpec{
          jh.at("mode") == "location" ? ReadMode::kLocation : ReadMode::kContent,
          memref_from_json(jh.at("source"))});
    spec.layers.push_back(std::move(l));
  }
  for (const json& jb : j.at("bundles")) {
    BundleSpec b;
    b.id = jb.at("id");
    b.members = jb.at("members").get<std::vector<int>>();
    spec.bundles.push_back(std::move(b));
  }
  spec.output.read_source = memref_from_json(j.at("output").at("read_source"));
  spec.output.max_len = j.at("output").at("max_len");
  return spec;
}

void write_u32(std::ostream& os, uint32_t v) { os.write(reinterpret_cast<const char*>(&v), 4); }
void write_u64(std::ostream& os, uint64_t v) { os.write(reinterpret_cast<const char*>(&v), 8); }

uint32_t read_u32(std::istream& is) {
  uint32_t v = 0;
  is.read(reinterpret_cast<char*>(&v), 4);
  return v;
}
uint64_t read_u64(std::istream& is) {
  uint64_t v = 0;
  is.read(reinterpret_cast<char*>(&v), 8);
  return v;
}

void write_blob(std::ostream& os, const std::string& name, const Tensor& t) {
  write_u64(os, name.size());
  os.write(name.data(), static_cast<std::streamsize>(name.size()));
  write_u64(os, t.shape.size());
  for (size_t d : t.shape) write_u64(os, d);
  os.write(reinterpret_cast<const char*>(t.data.data()),
           static_cast<std::streamsize>(t.data.size() * sizeof(double)));
}

std::pair<std::string, Tensor> read_blob(std::istream& is) {
  std::string name(read_u64(is), '\0');
  is.read(name.data(), static_cast<std::streamsize>(name.size()));
  std::vector<size_t> shape(read_u64(is));
  for (size_t& d : shape) d = read_u64(is);
  Tensor t = Tensor::zeros(std::move(shape));
  is.read(reinterpret_cast<char*>(t.data.data()),
          static_cast<std::streamsize>(t.data.size() * sizeof(double)));
  return {std::move(name), std::move(t)};
}

void write_store(std::ostream& os, const ParamStore& store) {
  write_u64(os, store.count());
  for (const std::string& name : store.names()) write_blob(os, name, store.at(name));
}

ParamStore read_store(std::istream& is) {
  ParamStore store;
  size_t n = read_u64(is);
  for (size_t i = 0; i < n; ++i) {
    auto [name, t] = read_blob(is);
    store.add(name, std::move(t));
  }
  return store;
}

}  // namespace

std::string arch_to_json(const ArchSpec& spec) { return arch_to_json_obj(spec).dump(); }

ArchSpec arch_from_json(const std::string& text) {
  return arch_from_json_obj(json::parse(text));
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IngestionError("cannot write checkpoint " + path);
  os.write("DMEM", 4);
  write_u32(os, kCheckpointVersion);

  json header;
  header["arch"] = arch_to_json_obj(ckpt.spec);
  header["src_vocab"] = ckpt.src_vocab.tokens();
  header["tgt_vocab"] = ckpt.tgt_vocab.tokens();
  header["rho"] = ckpt.opt.rho;
  header["epsilon"] = ckpt.opt.epsilon;
  header["rng_state"] = ckpt.rng_state;
  header["epoch"] = ckpt.epoch;
  std::string text = header.dump();
  write_u64(os, text.size());
  os.write(text.data(), static_cast<std::streamsize>(text.size()));

  write_store(os, ckpt.params);
  write_store(os, ckpt.opt.eg2);
  write_store(os, ckpt.opt.edx2);
  if (!os) throw IngestionError("checkpoint write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IngestionError("cannot open checkpoint " + path);
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, "DMEM", 4) != 0)
    throw IngestionError("not a checkpoint file: " + path);
  uint32_t version = read_u32(is);
  if (version != kCheckpointVersion)
    throw IngestionError("checkpoint format version " + std::to_string(version) +
                         " is not supported (expected " + std::to_string(kCheckpointVersion) + ")");

  std::string text(read_u64(is), '\0');
  is.read(text.data(), static_cast<std::streamsize>(text.size()));
  json header = json::parse(text);

  Checkpoint ckpt;
  ckpt.spec = arch_from_json_obj(header.at("arch"));
  auto load_vocab = [](const json& j) {
    Vocabulary v;
    std::vector<std::string> toks = j.get<std::vector<std::string>>();
    for (size_t i = kNumSpecials; i < toks.size(); ++i) v.add(toks[i]);
    return v;
  };
  ckpt.src_vocab = load_vocab(header.at("src_vocab"));
  ckpt.tgt_vocab = load_vocab(header.at("tgt_vocab"));
  ckpt.rng_state = header.at("rng_state");
  ckpt.epoch = header.at("epoch");

  ckpt.params = read_store(is);
  ckpt.opt.eg2 = read_store(is);
  ckpt.opt.edx2 = read_store(is);
  ckpt.opt.rho = header.at("rho");
  ckpt.opt.epsilon = header.at("epsilon");
  if (!is) throw IngestionError("checkpoint truncated: " + path);
  return ckpt;
}

}  // namespace dmem

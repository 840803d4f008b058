#include "forcecast/nn/checkpoint.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>
#include <set>

#include <json.hpp>

#include "forcecast/errors.hpp"

namespace forcecast::nn {
namespace {

constexpr char kMagic[4] = {'F', 'C', 'K', 'P'};

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

class Reader {
 public:
  explicit Reader(const std::string& bytes) : bytes_(bytes) {}

  std::uint64_t uint(int width) {
    need(static_cast<std::size_t>(width));
    std::uint64_t v = 0;
    for (int i = 0; i < width; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_++])) << (8 * i);
    return v;
  }
  std::string text(std::size_t n) {
    need(n);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw DataError("checkpoint is truncated");
  }
  const std::string& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string config_digest(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

Checkpoint make_checkpoint(const ForceModel& model, const Normalizer& normalizer, const std::string& train_config) {
  Checkpoint c;
  c.spec = model.spec();
  c.normalizer = normalizer;
  c.train_config = train_config;
  c.config_digest = config_digest(train_config);
  for (const auto& item : model.parameters().items()) {
    c.params.push_back({item.name, item.tensor.shape(), item.tensor.data()});
  }
  return c;
}

std::string serialize_checkpoint(const Checkpoint& checkpoint) {
  nlohmann::json header;
  header["model"] = nlohmann::json::parse(checkpoint.spec.to_json());
  header["normalizer"] = nlohmann::json::parse(checkpoint.normalizer.to_json());
  header["train_config"] = checkpoint.train_config;
  header["config_digest"] = checkpoint.config_digest;
  const std::string text = header.dump();

  std::string out(kMagic, 4);
  put_u32(out, kCheckpointVersion);
  put_u64(out, text.size());
  out += text;
  put_u32(out, static_cast<std::uint32_t>(checkpoint.params.size()));
  for (const auto& p : checkpoint.params) {
    if (numel(p.shape) != p.values.size()) throw ShapeError("parameter '" + p.name + "' has inconsistent shape");
    put_u32(out, static_cast<std::uint32_t>(p.name.size()));
    out += p.name;
    put_u32(out, static_cast<std::uint32_t>(p.shape.size()));
    for (const int d : p.shape) put_u64(out, static_cast<std::uint64_t>(d));
    for (const float v : p.values) {
      std::uint32_t bits;
      std::memcpy(&bits, &v, sizeof bits);
      put_u32(out, bits);
    }
  }
  return out;
}

Checkpoint deserialize_checkpoint(const std::string& bytes) {
  Reader r(bytes);
  if (r.text(4) != std::string(kMagic, 4)) throw DataError("not a checkpoint (bad magic bytes)");
  const auto version = r.uint(4);
  if (version != kCheckpointVersion) {
    throw DataError("unsupported checkpoint version " + std::to_string(version));
  }
  const auto header_size = r.uint(8);
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(r.text(static_cast<std::size_t>(header_size)));
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("checkpoint header is not valid JSON: ") + e.what());
  }
  Checkpoint c;
  try {
    c.spec = ModelSpec::from_json(header.at("model").dump());
    c.normalizer = Normalizer::from_json(header.at("normalizer").dump());
    c.train_config = header.at("train_config").get<std::string>();
    c.config_digest = header.at("config_digest").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("checkpoint header is incomplete: ") + e.what());
  }
  const auto count = r.uint(4);
  for (std::uint64_t i = 0; i < count; ++i) {
    ParamRecord p;
    p.name = r.text(static_cast<std::size_t>(r.uint(4)));
    const auto rank = r.uint(4);
    if (rank > 8) throw DataError("parameter '" + p.name + "' has implausible rank " + std::to_string(rank));
    for (std::uint64_t k = 0; k < rank; ++k) p.shape.push_back(static_cast<int>(r.uint(8)));
    p.values.resize(numel(p.shape));
    for (auto& v : p.values) {
      const auto bits = static_cast<std::uint32_t>(r.uint(4));
      std::memcpy(&v, &bits, sizeof v);
    }
    c.params.push_back(std::move(p));
  }
  if (!r.done()) throw DataError("checkpoint has trailing bytes");
  return c;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write checkpoint " + path.string());
  const std::string bytes = serialize_checkpoint(checkpoint);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read checkpoint " + path.string());
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize_checkpoint(bytes);
}

void load_parameters(ForceModel& model, const Checkpoint& checkpoint) {
  std::set<std::string> seen;
  auto& items = model.parameters().items();
  for (const auto& p : checkpoint.params) {
    if (!seen.insert(p.name).second) throw DataError("checkpoint lists parameter '" + p.name + "' twice");
    auto it = std::find_if(items.begin(), items.end(), [&](const auto& item) { return item.name == p.name; });
    if (it == items.end()) throw DataError("checkpoint parameter '" + p.name + "' does not exist in the model");
    if (it->tensor.shape() != p.shape) {
      throw DataError("checkpoint parameter '" + p.name + "' has shape " + shape_string(p.shape) + ", model expects " +
                      shape_string(it->tensor.shape()));
    }
    it->tensor.data() = p.values;
  }
  for (const auto& item : items) {
    if (!seen.count(item.name)) throw DataError("checkpoint is missing parameter '" + item.name + "'");
  }
}

std::unique_ptr<ForceModel> instantiate(const Checkpoint& checkpoint) {
  auto model = std::make_unique<ForceModel>(checkpoint.spec);
  load_parameters(*model, checkpoint);
  return model;
}

}  // namespace forcecast::nn

#include "ddss/checkpoint_io.hpp"

#include <cstring>
#include <fstream>

#include "ddss/errors.hpp"

namespace ddss {

namespace {

using nlohmann::json;

void put_u64le(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(char((v >> (8 * i)) & 0xff));
}

std::uint64_t get_u64le(const unsigned char* p) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= std::uint64_t(p[i]) << (8 * i);
  return v;
}

}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& c) {
  json arrays = json::object();
  std::uint64_t offset = 0;
  for (const auto& [name, t] : c.arrays) {
    if (!t.defined() || t.size() == 0)
      throw IoError("checkpoint: array '" + name + "' is empty");
    json entry;
    entry["dtype"] = "f64";
    entry["length"] = std::uint64_t(t.size());
    entry["offset"] = offset;
    entry["shape"] = t.shape();
    arrays[name] = entry;
    offset += std::uint64_t(t.size()) * 8;
  }
  json header;
  header["arrays"] = arrays;
  header["format_version"] = kCheckpointVersion;
  header["metadata"] = c.metadata;
  const std::string head = header.dump();

  std::string out;
  out.reserve(16 + head.size() + offset);
  out.append(kCheckpointMagic, 8);
  put_u64le(out, head.size());
  out += head;
  for (const auto& [name, t] : c.arrays)
    out.append(reinterpret_cast<const char*>(t.data()), t.size() * 8);

  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open for writing: " + path);
  f.write(out.data(), std::streamsize(out.size()));
  if (!f) throw IoError("write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open: " + path);
  std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  if (bytes.size() < 16) throw IoError("checkpoint too short: " + path);
  if (std::memcmp(bytes.data(), kCheckpointMagic, 8) != 0)
    throw IoError("bad checkpoint magic: " + path);
  const std::uint64_t head_len =
      get_u64le(reinterpret_cast<const unsigned char*>(bytes.data()) + 8);
  if (16 + head_len > bytes.size()) throw IoError("truncated checkpoint header: " + path);

  json header;
  try {
    header = json::parse(bytes.substr(16, head_len));
  } catch (const json::exception& e) {
    throw IoError("unparsable checkpoint header in " + path + ": " + e.what());
  }
  if (!header.contains("format_version") || header["format_version"] != kCheckpointVersion)
    throw IoError("unsupported checkpoint format version in " + path);

  const std::size_t payload_at = 16 + head_len;
  const std::size_t payload_size = bytes.size() - payload_at;
  Checkpoint c;
  if (header.contains("metadata")) c.metadata = header["metadata"];
  // items() iterates by reference; the container must outlive the loop
  const json arrays = header.value("arrays", json::object());
  for (const auto& [name, entry] : arrays.items()) {
    if (entry.value("dtype", "") != "f64")
      throw IoError("checkpoint array '" + name + "' has unsupported dtype");
    const std::uint64_t length = entry.at("length").get<std::uint64_t>();
    const std::uint64_t offset = entry.at("offset").get<std::uint64_t>();
    const std::vector<std::size_t> shape = entry.at("shape").get<std::vector<std::size_t>>();
    std::size_t prod = 1;
    for (std::size_t s : shape) prod *= s;
    if (prod != length || shape.empty() || shape.size() > 2)
      throw IoError("checkpoint array '" + name + "' has inconsistent shape");
    if (offset + length * 8 > payload_size)
      throw IoError("checkpoint array '" + name + "' exceeds the payload");
    tg::Tensor t = tg::Tensor::zeros(shape);
    std::memcpy(t.mut(), bytes.data() + payload_at + offset, length * 8);
    c.arrays[name] = std::move(t);
  }
  return c;
}

void save_model_checkpoint(const std::string& path, const ScoreNetwork& net,
                           const ScoreNetwork& ema, const NoiseSchedule& s, nlohmann::json extra) {
  if (net.names.size() != ema.names.size())
    throw ShapeError("model checkpoint: raw and EMA networks disagree");
  Checkpoint c;
  for (std::size_t i = 0; i < net.names.size(); ++i) {
    c.arrays["net." + net.names[i]] = net.params[i];
    c.arrays["ema." + ema.names[i]] = ema.params[i];
  }
  c.arrays["schedule.alpha_bar"] = tg::Tensor::from({s.alpha_bar.size()}, s.alpha_bar);
  c.arrays["schedule.beta"] = tg::Tensor::from({s.beta.size()}, s.beta);
  c.metadata = std::move(extra);
  c.metadata["d"] = net.d;
  c.metadata["width"] = net.width;
  c.metadata["emb_dim"] = net.emb_dim;
  c.metadata["n_blocks"] = net.n_blocks;
  c.metadata["T_embed"] = net.T;
  c.metadata["schedule_kind"] = s.kind;
  c.metadata["T"] = s.T;
  c.metadata["fingerprint"] = s.fingerprint();
  save_checkpoint(path, c);
}

ModelCheckpoint load_model_checkpoint(const std::string& path) {
  Checkpoint c = load_checkpoint(path);
  const json& md = c.metadata;
  for (const char* key : {"d", "width", "emb_dim", "n_blocks", "T_embed", "schedule_kind", "T",
                          "fingerprint"})
    if (!md.contains(key)) throw IoError("model checkpoint missing metadata '" + std::string(key) +
                                         "' in " + path);
  ModelCheckpoint out;
  out.metadata = md;

  const auto get_arr = [&](const std::string& name) -> const tg::Tensor& {
    auto it = c.arrays.find(name);
    if (it == c.arrays.end()) throw IoError("model checkpoint missing array '" + name + "'");
    return it->second;
  };
  const tg::Tensor& ab = get_arr("schedule.alpha_bar");
  const tg::Tensor& beta = get_arr("schedule.beta");
  out.schedule = schedule_from_alpha_bar(md["schedule_kind"].get<std::string>(),
                                         std::vector<double>(ab.data(), ab.data() + ab.size()));
  if (beta.size() != out.schedule.beta.size())
    throw IoError("model checkpoint schedule arrays disagree in " + path);
  out.schedule.beta.assign(beta.data(), beta.data() + beta.size());
  out.schedule.validate();
  if (out.schedule.T != md["T"].get<std::size_t>() ||
      out.schedule.fingerprint() != md["fingerprint"].get<std::uint64_t>())
    throw FingerprintError("model checkpoint schedule does not match its own stamp: " + path);

  ScoreNetwork proto =
      ScoreNetwork::init(md["d"].get<std::size_t>(), md["width"].get<std::size_t>(),
                         md["emb_dim"].get<std::size_t>(), md["n_blocks"].get<std::size_t>(),
                         md["T_embed"].get<double>(), 0);
  const auto fill = [&](const char* prefix) {
    ScoreNetwork net = proto.clone();
    for (std::size_t i = 0; i < net.names.size(); ++i) {
      const tg::Tensor& src = get_arr(std::string(prefix) + net.names[i]);
      if (!net.params[i].same_shape(src))
        throw IoError("model checkpoint array '" + std::string(prefix) + net.names[i] +
                      "' has the wrong shape");
      net.params[i] = src;
    }
    return net;
  };
  out.net = fill("net.");
  out.ema = fill("ema.");
  return out;
}

void save_sampler_checkpoint(const std::string& path, const SamplerParams& p,
                             nlohmann::json extra) {
  if (p.K == 0 || p.base_times.size() != p.K)
    throw ShapeError("sampler checkpoint: params are incomplete");
  Checkpoint c;
  c.arrays["base_times"] = tg::Tensor::from({p.K}, p.base_times);
  for (const auto& [key, vec] : p.raw) {
    if (vec.empty()) continue;
    c.arrays["raw." + key] = tg::Tensor::from({vec.size()}, vec);
  }
  c.metadata = std::move(extra);
  c.metadata["family"] = family_name(p.family);
  c.metadata["learn_time"] = p.learn_time;
  c.metadata["K"] = p.K;
  c.metadata["schedule_fingerprint"] = p.schedule_fingerprint;
  save_checkpoint(path, c);
}

SamplerParams load_sampler_checkpoint(const std::string& path) {
  Checkpoint c = load_checkpoint(path);
  const json& md = c.metadata;
  for (const char* key : {"family", "learn_time", "K", "schedule_fingerprint"})
    if (!md.contains(key))
      throw IoError("sampler checkpoint missing metadata '" + std::string(key) + "' in " + path);
  SamplerParams p;
  p.family = family_from_string(md["family"].get<std::string>());
  p.learn_time = md["learn_time"].get<bool>();
  p.K = md["K"].get<std::size_t>();
  p.schedule_fingerprint = md["schedule_fingerprint"].get<std::uint64_t>();
  auto it = c.arrays.find("base_times");
  if (it == c.arrays.end() || it->second.size() != p.K)
    throw IoError("sampler checkpoint missing/mis-sized base_times in " + path);
  p.base_times.assign(it->second.data(), it->second.data() + p.K);
  for (const auto& [name, t] : c.arrays) {
    if (name.rfind("raw.", 0) != 0) continue;
    p.raw[name.substr(4)] = std::vector<double>(t.data(), t.data() + t.size());
  }
  return p;
}

}  // namespace ddss

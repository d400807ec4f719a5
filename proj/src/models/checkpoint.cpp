// SPDX-License-Identifier: Apache-2.0
#include "ctkd/models/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "ctkd/errors.hpp"

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

namespace ctkd::models {

namespace {

class Writer {
public:
  template <typename T>
  void put(const T& v) {
    const auto* p = reinterpret_cast<const char*>(&v);
    buf_.insert(buf_.end(), p, p + sizeof(T));
  }
  void bytes(const void* data, std::size_t n) {
    const auto* p = static_cast<const char*>(data);
    buf_.insert(buf_.end(), p, p + n);
  }
  const std::vector<char>& buffer() const { return buf_; }

private:
  std::vector<char> buf_;
};

class Reader {
public:
  explicit Reader(std::vector<char> buf) : buf_(std::move(buf)) {}
  template <typename T>
  T get(const char* what) {
    T v;
    bytes(&v, sizeof(T), what);
    return v;
  }
  void bytes(void* out, std::size_t n, const char* what) {
    if (buf_.size() - pos_ < n) {
      throw FormatError(std::string("checkpoint truncated while reading ") + what, pos_);
    }
    std::memcpy(out, buf_.data() + pos_, n);
    pos_ += n;
  }
  std::size_t pos() const { return pos_; }
  std::size_t remaining() const { return buf_.size() - pos_; }

private:
  std::vector<char> buf_;
  std::size_t pos_ = 0;
};

}  // namespace

const NamedTensor* Checkpoint::find(const std::string& name) const {
  for (const auto& t : tensors) {
    if (t.name == name) return &t;
  }
  return nullptr;
}

std::vector<ad::Tensor> Checkpoint::group(const std::string& prefix) const {
  std::vector<ad::Tensor> out;
  for (std::size_t i = 0;; ++i) {
    const auto* t = find(prefix + "." + std::to_string(i));
    if (!t) break;
    out.push_back(ad::Tensor::from(t->shape, t->values, true));
  }
  return out;
}

void Checkpoint::add_group(const std::string& prefix, const std::vector<ad::Tensor>& params) {
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto v = params[i].values();
    tensors.push_back({prefix + "." + std::to_string(i), params[i].shape(), {v.begin(), v.end()}});
  }
}

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  Writer w;
  w.bytes(kCheckpointMagic, sizeof(kCheckpointMagic));
  w.put(kCheckpointVersion);
  const std::string meta = ckpt.meta.dump();
  w.put(static_cast<std::uint64_t>(meta.size()));
  w.bytes(meta.data(), meta.size());
  w.put(static_cast<std::uint64_t>(ckpt.tensors.size()));
  for (const auto& t : ckpt.tensors) {
    w.put(static_cast<std::uint32_t>(t.name.size()));
    w.bytes(t.name.data(), t.name.size());
    w.put(static_cast<std::uint32_t>(t.shape.size()));
    for (auto d : t.shape) w.put(static_cast<std::uint64_t>(d));
    w.bytes(t.values.data(), t.values.size() * sizeof(double));
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw RunError("cannot open checkpoint for writing: " + path.string());
  out.write(w.buffer().data(), static_cast<std::streamsize>(w.buffer().size()));
  if (!out) throw RunError("failed writing checkpoint: " + path.string());
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw RunError("cannot open checkpoint: " + path.string());
  Reader r(std::vector<char>(std::istreambuf_iterator<char>(in), {}));

  char magic[sizeof(kCheckpointMagic)];
  r.bytes(magic, sizeof(magic), "magic");
  if (std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0) {
    throw FormatError("not a checkpoint file (bad magic)", 0);
  }
  const auto version = r.get<std::uint32_t>("version");
  if (version != kCheckpointVersion) {
    throw FormatError("unsupported checkpoint version " + std::to_string(version), 8);
  }
  Checkpoint ckpt;
  const auto meta_len = r.get<std::uint64_t>("metadata length");
  if (meta_len > r.remaining()) throw FormatError("checkpoint truncated in metadata", r.pos());
  std::string meta(meta_len, '\0');
  r.bytes(meta.data(), meta_len, "metadata");
  try {
    ckpt.meta = nlohmann::json::parse(meta);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("checkpoint metadata is not valid JSON: ") + e.what(), 20);
  }
  const auto count = r.get<std::uint64_t>("tensor count");
  for (std::uint64_t i = 0; i < count; ++i) {
    NamedTensor t;
    const auto name_len = r.get<std::uint32_t>("tensor name length");
    if (name_len > r.remaining()) throw FormatError("checkpoint truncated in tensor name", r.pos());
    t.name.resize(name_len);
    r.bytes(t.name.data(), name_len, "tensor name");
    const auto rank = r.get<std::uint32_t>("tensor rank");
    std::uint64_t n = 1;
    for (std::uint32_t d = 0; d < rank; ++d) {
      const auto dim = r.get<std::uint64_t>("tensor dimension");
      t.shape.push_back(static_cast<std::size_t>(dim));
      n *= dim;
    }
    if (n > r.remaining() / sizeof(double)) {
      throw FormatError("checkpoint truncated in tensor '" + t.name + "'", r.pos());
    }
    t.values.resize(n);
    r.bytes(t.values.data(), n * sizeof(double), "tensor values");
    ckpt.tensors.push_back(std::move(t));
  }
  return ckpt;
}

nlohmann::json spec_to_json(const ModelSpec& spec) {
  return {{"arch", to_string(spec.arch)},
          {"input_dim", spec.input_dim},
          {"widths", spec.widths},
          {"classes", spec.classes},
          {"seed", spec.seed}};
}

ModelSpec spec_from_json(const nlohmann::json& j) {
  try {
    ModelSpec spec;
    spec.arch = parse_arch(j.at("arch").get<std::string>());
    spec.input_dim = j.at("input_dim").get<std::size_t>();
    spec.widths = j.at("widths").get<std::vector<std::size_t>>();
    spec.classes = j.at("classes").get<std::size_t>();
    spec.seed = j.at("seed").get<std::uint64_t>();
    spec.validate();
    return spec;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed model spec: ") + e.what());
  }
}

void pack_model(Checkpoint& ckpt, const Model& model) {
  ckpt.meta["model"] = spec_to_json(model.spec());
  ckpt.add_group("model", model.parameters());
}

Model unpack_model(const Checkpoint& ckpt) {
  if (!ckpt.meta.contains("model")) throw ValidationError("checkpoint holds no model");
  return Model::from_parameters(spec_from_json(ckpt.meta.at("model")), ckpt.group("model"));
}

}  // namespace ctkd::models

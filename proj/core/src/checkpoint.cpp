#include "motiongait/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "motiongait/error.hpp"

namespace motiongait {

static_assert(std::endian::native == std::endian::little, "checkpoint IO assumes a little-endian host");

namespace {

class Writer {
 public:
  template <typename V>
  void put(V v) {
    const auto* p = reinterpret_cast<const char*>(&v);
    bytes_.insert(bytes_.end(), p, p + sizeof(V));
  }
  void put_string(const std::string& s) {
    put(static_cast<std::uint32_t>(s.size()));
    bytes_.insert(bytes_.end(), s.begin(), s.end());
  }
  void put_floats(const std::vector<float>& v) {
    const auto* p = reinterpret_cast<const char*>(v.data());
    bytes_.insert(bytes_.end(), p, p + v.size() * sizeof(float));
  }
  const std::vector<char>& bytes() const { return bytes_; }

 private:
  std::vector<char> bytes_;
};

class Reader {
 public:
  Reader(std::vector<char> bytes, std::string origin) : bytes_(std::move(bytes)), origin_(std::move(origin)) {}

  template <typename V>
  V get() {
    need(sizeof(V));
    V v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(V));
    pos_ += sizeof(V);
    return v;
  }
  std::string get_string() {
    const auto n = get<std::uint32_t>();
    need(n);
    std::string s(bytes_.data() + pos_, n);
    pos_ += n;
    return s;
  }
  std::vector<float> get_floats(std::size_t n) {
    need(n * sizeof(float));
    std::vector<float> v(n);
    std::memcpy(v.data(), bytes_.data() + pos_, n * sizeof(float));
    pos_ += n * sizeof(float);
    return v;
  }
  bool done() const { return pos_ == bytes_.size(); }
  [[noreturn]] void fail(const std::string& why) const { throw IngestionError(origin_ + ": " + why); }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) fail("truncated checkpoint");
  }
  std::vector<char> bytes_;
  std::string origin_;
  std::size_t pos_ = 0;
};

std::vector<float> flat(const Tensor<float>& t) { return {t.data().begin(), t.data().end()}; }

void assign(const CheckpointTensor& src, Tensor<float>& dst) {
  if (src.shape != dst.shape()) {
    throw DimensionError("checkpoint tensor " + src.name + " has shape " + shape_str(src.shape) + ", expected " +
                         shape_str(dst.shape()));
  }
  std::copy(src.data.begin(), src.data.end(), dst.ptr());
}

}  // namespace

const CheckpointTensor& Checkpoint::tensor(const std::string& name) const {
  for (const auto& t : tensors)
    if (t.name == name) return t;
  throw IngestionError("checkpoint has no tensor '" + name + "'");
}

std::int64_t Checkpoint::integer(const std::string& name) const {
  const auto it = integers.find(name);
  if (it == integers.end()) throw IngestionError("checkpoint has no value '" + name + "'");
  return it->second;
}

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  Writer w;
  for (const char c : kCheckpointMagic) w.put(c);
  w.put(kCheckpointVersion);
  w.put_string(ckpt.config_echo);
  w.put(static_cast<std::uint32_t>(ckpt.tensors.size() + ckpt.integers.size()));
  for (const auto& t : ckpt.tensors) {
    if (static_cast<std::int64_t>(t.data.size()) != shape_numel(t.shape)) {
      throw ContractError("checkpoint tensor " + t.name + " data does not match its shape");
    }
    w.put(std::uint8_t{0});
    w.put_string(t.name);
    w.put(static_cast<std::uint32_t>(t.shape.size()));
    for (const auto e : t.shape) w.put(static_cast<std::int64_t>(e));
    w.put_floats(t.data);
  }
  for (const auto& [name, value] : ckpt.integers) {
    w.put(std::uint8_t{1});
    w.put_string(name);
    w.put(value);
  }
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out.write(w.bytes().data(), static_cast<std::streamsize>(w.bytes().size()));
    if (!out) throw IoError("short write to " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot move checkpoint into place at " + path.string());
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  Reader r(std::vector<char>((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>()), path.string());
  for (const char c : kCheckpointMagic)
    if (r.get<char>() != c) r.fail("not a checkpoint (bad magic)");
  if (const auto v = r.get<std::uint32_t>(); v != kCheckpointVersion) r.fail("unsupported version " + std::to_string(v));
  Checkpoint ckpt;
  ckpt.config_echo = r.get_string();
  const auto count = r.get<std::uint32_t>();
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto kind = r.get<std::uint8_t>();
    std::string name = r.get_string();
    if (kind == 0) {
      CheckpointTensor t;
      t.name = std::move(name);
      const auto rank = r.get<std::uint32_t>();
      if (rank > 8) r.fail("implausible rank for " + t.name);
      for (std::uint32_t k = 0; k < rank; ++k) {
        const auto e = r.get<std::int64_t>();
        if (e <= 0 || e > (std::int64_t{1} << 32)) r.fail("bad extent for " + t.name);
        t.shape.push_back(e);
      }
      t.data = r.get_floats(static_cast<std::size_t>(shape_numel(t.shape)));
      ckpt.tensors.push_back(std::move(t));
    } else if (kind == 1) {
      ckpt.integers[name] = r.get<std::int64_t>();
    } else {
      r.fail("unknown blob kind " + std::to_string(kind));
    }
  }
  if (!r.done()) r.fail("trailing bytes");
  return ckpt;
}

void store_network(Checkpoint& ckpt, const NetworkParams<float>& params) {
  for (const auto& [name, var] : params.named_parameters()) ckpt.tensors.push_back({name, var.shape(), flat(var.value())});
  ckpt.tensors.push_back({"head.bn.running_mean", params.bn_state.running_mean.shape(), flat(params.bn_state.running_mean)});
  ckpt.tensors.push_back({"head.bn.running_var", params.bn_state.running_var.shape(), flat(params.bn_state.running_var)});
}

void restore_network(const Checkpoint& ckpt, NetworkParams<float>& params) {
  for (auto& [name, var] : params.named_parameters()) {
    Var<float> v = var;
    assign(ckpt.tensor(name), v.mutable_value());
  }
  assign(ckpt.tensor("head.bn.running_mean"), params.bn_state.running_mean);
  assign(ckpt.tensor("head.bn.running_var"), params.bn_state.running_var);
}

void store_optimizer(Checkpoint& ckpt, const NetworkParams<float>& params, const Adam<float>& adam) {
  const auto named = params.named_parameters();
  for (std::size_t i = 0; i < named.size(); ++i) {
    ckpt.tensors.push_back({"adam.m." + named[i].first, adam.first_moments()[i].shape(), flat(adam.first_moments()[i])});
    ckpt.tensors.push_back({"adam.v." + named[i].first, adam.second_moments()[i].shape(), flat(adam.second_moments()[i])});
  }
  ckpt.integers["adam.step"] = adam.steps();
}

void restore_optimizer(const Checkpoint& ckpt, const NetworkParams<float>& params, Adam<float>& adam) {
  const auto named = params.named_parameters();
  std::vector<Tensor<float>> m, v;
  for (const auto& [name, var] : named) {
    Tensor<float> tm(var.shape()), tv(var.shape());
    assign(ckpt.tensor("adam.m." + name), tm);
    assign(ckpt.tensor("adam.v." + name), tv);
    m.push_back(std::move(tm));
    v.push_back(std::move(tv));
  }
  adam.restore(ckpt.integer("adam.step"), std::move(m), std::move(v));
}

}  // namespace motiongait

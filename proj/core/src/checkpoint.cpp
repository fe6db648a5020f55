#include "si3/checkpoint.hpp"

#include <array>
#include <cstring>
#include <fstream>

#include "si3/error.hpp"

namespace si3 {

namespace {

constexpr std::array<char, 8> kMagic = {'S', 'I', '3', 'C', 'K', 'P', 'T', '1'};

class Writer {
 public:
  explicit Writer(const std::filesystem::path& path) : out_(path, std::ios::binary) {
    if (!out_) throw ValidationError("cannot open " + path.string() + " for writing");
  }
  template <typename T>
  void put(T value) {
    out_.write(reinterpret_cast<const char*>(&value), sizeof(T));
  }
  void put_doubles(const Eigen::VectorXd& v) {
    put<std::uint64_t>(static_cast<std::uint64_t>(v.size()));
    out_.write(reinterpret_cast<const char*>(v.data()),
               static_cast<std::streamsize>(v.size() * sizeof(double)));
  }
  void raw(const char* data, std::size_t n) { out_.write(data, static_cast<std::streamsize>(n)); }
  void finish(const std::filesystem::path& path) {
    out_.flush();
    if (!out_) throw std::runtime_error("failed writing " + path.string());
  }

 private:
  std::ofstream out_;
};

class Reader {
 public:
  explicit Reader(const std::filesystem::path& path) : in_(path, std::ios::binary), path_(path) {
    if (!in_) throw ValidationError("cannot open checkpoint " + path.string());
  }
  template <typename T>
  T get() {
    T value{};
    in_.read(reinterpret_cast<char*>(&value), sizeof(T));
    if (!in_) truncated();
    return value;
  }
  Eigen::VectorXd get_doubles(std::uint64_t limit) {
    const auto n = get<std::uint64_t>();
    if (n > limit) throw ValidationError("corrupt checkpoint " + path_.string());
    Eigen::VectorXd v(static_cast<Eigen::Index>(n));
    in_.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(double)));
    if (!in_) truncated();
    return v;
  }
  void raw(char* data, std::size_t n) {
    in_.read(data, static_cast<std::streamsize>(n));
    if (!in_) truncated();
  }

 private:
  [[noreturn]] void truncated() {
    throw ValidationError("truncated checkpoint " + path_.string());
  }
  std::ifstream in_;
  std::filesystem::path path_;
};

constexpr std::uint64_t kMaxCount = std::uint64_t{1} << 32;

void write_mlp(Writer& w, const Mlp& net) {
  w.put<std::uint32_t>(static_cast<std::uint32_t>(net.layer_dims().size()));
  for (auto d : net.layer_dims()) w.put<std::int64_t>(d);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(net.heads().size()));
  for (const auto& h : net.heads()) {
    w.put<std::int64_t>(h.offset);
    w.put<std::int64_t>(h.width);
    w.put<std::uint8_t>(static_cast<std::uint8_t>(h.kind));
  }
  w.put<double>(net.sigma_min());
  w.put_doubles(net.parameters());
}

Mlp read_mlp(Reader& r) {
  const auto nd = r.get<std::uint32_t>();
  if (nd < 2 || nd > 64) throw ValidationError("corrupt checkpoint: layer count");
  std::vector<Eigen::Index> dims(nd);
  for (auto& d : dims) d = r.get<std::int64_t>();
  const auto nh = r.get<std::uint32_t>();
  if (nh > 64) throw ValidationError("corrupt checkpoint: head count");
  std::vector<OutputHead> heads(nh);
  for (auto& h : heads) {
    h.offset = r.get<std::int64_t>();
    h.width = r.get<std::int64_t>();
    const auto kind = r.get<std::uint8_t>();
    if (kind > 2) throw ValidationError("corrupt checkpoint: head kind");
    h.kind = static_cast<Activation>(kind);
  }
  const auto sigma_min = r.get<double>();
  Mlp net(dims, heads, sigma_min);
  Eigen::VectorXd params = r.get_doubles(kMaxCount);
  if (params.size() != net.parameter_count()) {
    throw ValidationError("corrupt checkpoint: parameter count");
  }
  net.parameters() = std::move(params);
  return net;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const DmgmmModel& model) {
  Writer w(path);
  w.raw(kMagic.data(), kMagic.size());
  w.put<std::uint32_t>(kCheckpointVersion);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(model.num_views()));
  w.put<std::int64_t>(model.latent_dim);
  for (int v = 0; v < model.num_views(); ++v) {
    w.put<std::uint8_t>(static_cast<std::uint8_t>(model.likelihoods[static_cast<std::size_t>(v)]));
    write_mlp(w, model.encoders[static_cast<std::size_t>(v)]);
    write_mlp(w, model.decoders[static_cast<std::size_t>(v)]);
  }
  w.put<std::int32_t>(model.prior.num_components());
  w.put<std::int64_t>(model.prior.dim());
  w.put_doubles(model.prior.parameters());
  w.finish(path);
}

DmgmmModel load_checkpoint(const std::filesystem::path& path) {
  Reader r(path);
  std::array<char, 8> magic{};
  r.raw(magic.data(), magic.size());
  if (magic != kMagic) throw ValidationError(path.string() + " is not a model checkpoint");
  const auto version = r.get<std::uint32_t>();
  if (version != kCheckpointVersion) {
    throw ValidationError("unsupported checkpoint version " + std::to_string(version));
  }
  DmgmmModel model;
  const auto nv = r.get<std::uint32_t>();
  if (nv == 0 || nv > 1024) throw ValidationError("corrupt checkpoint: view count");
  model.latent_dim = r.get<std::int64_t>();
  for (std::uint32_t v = 0; v < nv; ++v) {
    const auto lik = r.get<std::uint8_t>();
    if (lik > 1) throw ValidationError("corrupt checkpoint: likelihood");
    model.likelihoods.push_back(static_cast<Likelihood>(lik));
    model.encoders.push_back(read_mlp(r));
    model.decoders.push_back(read_mlp(r));
  }
  const auto k = r.get<std::int32_t>();
  const auto d = r.get<std::int64_t>();
  if (k <= 0 || d != model.latent_dim) throw ValidationError("corrupt checkpoint: prior shape");
  model.prior = MixturePrior(k, d);
  Eigen::VectorXd params = r.get_doubles(kMaxCount);
  if (params.size() != model.prior.parameters().size()) {
    throw ValidationError("corrupt checkpoint: prior parameter count");
  }
  model.prior.parameters() = std::move(params);
  return model;
}

}  // namespace si3

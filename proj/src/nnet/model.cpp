#include <bit>
#include <cmath>
#include <fstream>
#include <sstream>

#include "osvos/error.hpp"
#include "osvos/nnet.hpp"
#include "osvos/rng.hpp"

namespace osvos::nnet {

Tensor::Tensor(int channels, int height, int width, double fill)
    : channels_(channels),
      height_(height),
      width_(width),
      values_(static_cast<std::size_t>(channels) * static_cast<std::size_t>(height) * static_cast<std::size_t>(width),
              fill) {}

void Tensor::require_finite(const char* where) const {
  for (double v : values_) {
    if (!std::isfinite(v)) throw Error(std::string("non-finite value in ") + where);
  }
}

std::size_t FcnModel::add_blob(std::string name, std::size_t size) {
  const std::size_t offset = blobs_.empty() ? 0 : blobs_.back().offset + blobs_.back().size;
  blobs_.push_back({std::move(name), offset, size});
  return offset;
}

FcnModel::FcnModel(Architecture arch) : arch_(std::move(arch)) {
  if (arch_.in_channels < 1 || arch_.widths.empty()) throw Error("architecture needs input channels and stages");
  for (int w : arch_.widths) {
    if (w < 1) throw Error("stage widths must be positive");
  }
  int in = arch_.in_channels;
  for (int s = 0; s < arch_.stages(); ++s) {
    const int out = arch_.widths[static_cast<std::size_t>(s)];
    for (int k = 0; k < 2; ++k) {
      const int cin = k == 0 ? in : out;
      const std::string stem = "stage" + std::to_string(s) + ".conv" + std::to_string(k);
      ConvLayout c;
      c.in = cin;
      c.out = out;
      c.kernel = 3;
      c.weight = add_blob(stem + ".weight", static_cast<std::size_t>(out) * cin * 9);
      c.bias = add_blob(stem + ".bias", static_cast<std::size_t>(out));
      convs_.push_back(c);
    }
    in = out;
  }
  const char* head_names[2] = {"fg", "contour"};
  for (int h = 0; h < 2; ++h) {
    HeadLayout& head = heads_[h];
    for (int s = 0; s < arch_.stages(); ++s) {
      const std::string stem = std::string(head_names[h]) + ".side" + std::to_string(s);
      ConvLayout c;
      c.in = arch_.widths[static_cast<std::size_t>(s)];
      c.out = 1;
      c.kernel = 1;
      c.weight = add_blob(stem + ".weight", static_cast<std::size_t>(c.in));
      c.bias = add_blob(stem + ".bias", 1);
      head.side.push_back(c);
    }
    head.fuse_weight = add_blob(std::string(head_names[h]) + ".fuse.weight", static_cast<std::size_t>(arch_.stages()));
    head.fuse_bias = add_blob(std::string(head_names[h]) + ".fuse.bias", 1);
  }
  params_.assign(blobs_.back().offset + blobs_.back().size, 0.0);
}

FcnModel FcnModel::he_init(Architecture arch, std::uint64_t seed) {
  FcnModel model(std::move(arch));
  SplitMix64 rng(seed);
  auto fill = [&](std::size_t offset, std::size_t n, int fan_in) {
    const double scale = std::sqrt(2.0 / fan_in);
    for (std::size_t i = 0; i < n; ++i) model.params_[offset + i] = scale * rng.normal();
  };
  for (const ConvLayout& c : model.convs_) fill(c.weight, static_cast<std::size_t>(c.out) * c.in * 9, c.in * 9);
  for (const HeadLayout& h : model.heads_) {
    for (const ConvLayout& c : h.side) fill(c.weight, static_cast<std::size_t>(c.in), c.in);
    fill(h.fuse_weight, static_cast<std::size_t>(model.arch_.stages()), model.arch_.stages());
  }
  return model;
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw Error("learning_rate must be > 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw Error("momentum must lie in [0, 1)");
  if (iterations < 0) throw Error("iterations must be >= 0");
  if (loss.mode == PosWeightMode::fixed && !(loss.fixed_pos_weight > 0.0)) throw Error("pos_weight must be > 0");
  if (!(loss.contour_weight >= 0.0)) throw Error("contour_weight must be >= 0");
}

void sgd_step(std::span<double> params, std::span<const double> grads, std::span<double> velocity,
              const TrainConfig& config) {
  if (params.size() != grads.size() || params.size() != velocity.size()) {
    throw Error("sgd_step: parameter, gradient and velocity sizes differ");
  }
  const double mu = config.momentum;
  const double lr = config.learning_rate;
  for (std::size_t i = 0; i < params.size(); ++i) {
    velocity[i] = mu * velocity[i] - lr * grads[i];
    params[i] += velocity[i];
  }
}

// ---- checkpoints --------------------------------------------------------------

namespace {

constexpr std::uint32_t kCheckpointVersion = 1;

void put_u32(std::string& out, std::uint32_t v) {
  for (int k = 0; k < 4; ++k) out.push_back(static_cast<char>((v >> (8 * k)) & 0xFF));
}

void put_u64(std::string& out, std::uint64_t v) {
  for (int k = 0; k < 8; ++k) out.push_back(static_cast<char>((v >> (8 * k)) & 0xFF));
}

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  std::uint64_t unsigned_le(int n) {
    if (pos_ + static_cast<std::size_t>(n) > bytes_.size()) throw FormatError("truncated checkpoint");
    std::uint64_t v = 0;
    for (int k = 0; k < n; ++k) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + k])) << (8 * k);
    pos_ += static_cast<std::size_t>(n);
    return v;
  }
  std::uint32_t u32() { return static_cast<std::uint32_t>(unsigned_le(4)); }
  std::uint64_t u64() { return unsigned_le(8); }
  std::string_view take(std::size_t n) {
    if (pos_ + n > bytes_.size()) throw FormatError("truncated checkpoint");
    auto s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string encode_checkpoint(const FcnModel& model) {
  std::string out = "OSWT";
  put_u32(out, kCheckpointVersion);
  const Architecture& arch = model.architecture();
  put_u32(out, static_cast<std::uint32_t>(arch.in_channels));
  put_u32(out, static_cast<std::uint32_t>(arch.stages()));
  for (int w : arch.widths) put_u32(out, static_cast<std::uint32_t>(w));
  put_u32(out, static_cast<std::uint32_t>(model.blobs().size()));
  const auto params = model.parameters();
  for (const ParamBlob& b : model.blobs()) {
    put_u32(out, static_cast<std::uint32_t>(b.name.size()));
    out += b.name;
    put_u64(out, b.size);
    for (std::size_t i = 0; i < b.size; ++i) put_u64(out, std::bit_cast<std::uint64_t>(params[b.offset + i]));
  }
  return out;
}

FcnModel decode_checkpoint(std::string_view bytes) {
  Reader in(bytes);
  if (in.take(4) != "OSWT") throw FormatError("not a weight checkpoint (bad magic)");
  const std::uint32_t version = in.u32();
  if (version != kCheckpointVersion) throw FormatError("unsupported checkpoint version " + std::to_string(version));
  Architecture arch;
  arch.in_channels = static_cast<int>(in.u32());
  const std::uint32_t stages = in.u32();
  if (stages == 0 || stages > 16) throw FormatError("implausible stage count in checkpoint");
  arch.widths.clear();
  for (std::uint32_t s = 0; s < stages; ++s) arch.widths.push_back(static_cast<int>(in.u32()));
  FcnModel model(arch);
  const std::uint32_t nblobs = in.u32();
  if (nblobs != model.blobs().size()) throw FormatError("checkpoint blob count does not match architecture");
  auto params = model.parameters();
  for (const ParamBlob& b : model.blobs()) {
    const std::uint32_t len = in.u32();
    if (in.take(len) != b.name) throw FormatError("checkpoint blob name mismatch, expected " + b.name);
    if (in.u64() != b.size) throw FormatError("checkpoint blob size mismatch for " + b.name);
    for (std::size_t i = 0; i < b.size; ++i) params[b.offset + i] = std::bit_cast<double>(in.u64());
  }
  if (!in.done()) throw FormatError("trailing bytes after checkpoint");
  return model;
}

void save_checkpoint(const FcnModel& model, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  const std::string bytes = encode_checkpoint(model);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

FcnModel load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return decode_checkpoint(ss.str());
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

}  // namespace osvos::nnet

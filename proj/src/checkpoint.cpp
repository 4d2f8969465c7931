#include <cstring>
#include <fstream>

#include "mhp/error.hpp"
#include "mhp/harness.hpp"

namespace mhp::harness {

namespace {

constexpr char kMagic[4] = {'M', 'H', 'P', 'K'};
constexpr std::uint32_t kVersion = 1;

static_assert(sizeof(double) == 8, "checkpoint format assumes 64-bit doubles");

void write_u32(std::ostream& out, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  out.write(reinterpret_cast<const char*>(b), 4);
}

void write_u64(std::ostream& out, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  out.write(reinterpret_cast<const char*>(b), 8);
}

void write_f64(std::ostream& out, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, 8);
  write_u64(out, bits);
}

void write_string(std::ostream& out, const std::string& s) {
  write_u32(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::uint32_t read_u32(std::istream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (!in) throw IoError("checkpoint: truncated file");
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

std::uint64_t read_u64(std::istream& in) {
  unsigned char b[8];
  in.read(reinterpret_cast<char*>(b), 8);
  if (!in) throw IoError("checkpoint: truncated file");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

double read_f64(std::istream& in) {
  const std::uint64_t bits = read_u64(in);
  double v;
  std::memcpy(&v, &bits, 8);
  return v;
}

std::string read_string(std::istream& in) {
  const std::uint32_t n = read_u32(in);
  std::string s(n, '\0');
  in.read(s.data(), n);
  if (!in) throw IoError("checkpoint: truncated string");
  return s;
}

std::uint32_t family_tag(const ModelNet& net) {
  return static_cast<std::uint32_t>(net.index()) + 1;
}

}  // namespace

void save_checkpoint(TrainedModel& model, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open checkpoint for writing: " + path);

  out.write(kMagic, 4);
  write_u32(out, kVersion);
  write_u32(out, family_tag(model.net));
  write_u32(out, static_cast<std::uint32_t>(model.config.num_hypotheses));
  write_u32(out, static_cast<std::uint32_t>(model.config.hidden_dim));
  write_f64(out, model.config.epsilon);
  write_f64(out, model.config.input_scale);
  write_string(out, model.config.to_text());

  const ParamRefs refs = model_parameters(model.net);
  write_u32(out, static_cast<std::uint32_t>(refs.size()));
  for (const ParamRef& ref : refs) {
    write_string(out, ref.name);
    write_u32(out, static_cast<std::uint32_t>(ref.value->shape.size()));
    for (std::size_t d : ref.value->shape) write_u64(out, d);
    for (double v : ref.value->data) write_f64(out, v);
  }
  if (!out) throw IoError("checkpoint write failed: " + path);
}

TrainedModel load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint: " + path);

  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0) {
    throw IoError("checkpoint: bad magic number in " + path);
  }
  const std::uint32_t version = read_u32(in);
  if (version != kVersion) {
    throw IoError("checkpoint: unsupported version " + std::to_string(version));
  }
  const std::uint32_t family = read_u32(in);
  read_u32(in);  // hypothesis count, also present in the config blob
  read_u32(in);  // hidden dim
  read_f64(in);  // epsilon
  read_f64(in);  // input scale

  TrainedModel model;
  model.config = parse_config_text(read_string(in));
  model.net = init_model(model.config);
  require(family_tag(model.net) == family, "checkpoint: family tag does not match config");

  const std::uint32_t count = read_u32(in);
  const ParamRefs refs = model_parameters(model.net);
  require(count == refs.size(), "checkpoint: parameter count mismatch");
  for (const ParamRef& ref : refs) {
    const std::string name = read_string(in);
    require(name == ref.name, "checkpoint: parameter order mismatch at " + name);
    const std::uint32_t ndim = read_u32(in);
    std::vector<std::size_t> shape(ndim);
    for (auto& d : shape) d = static_cast<std::size_t>(read_u64(in));
    require(shape == ref.value->shape, "checkpoint: shape mismatch for " + name);
    for (double& v : ref.value->data) v = read_f64(in);
  }
  return model;
}

}  // namespace mhp::harness

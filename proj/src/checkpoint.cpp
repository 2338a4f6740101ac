#include "pdediff/train.hpp"

#include <cstring>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>

namespace pdediff {

namespace {

template <typename T>
void put(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& is, const std::string& path) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  require(static_cast<bool>(is), ErrorCode::IoError, "truncated file " + path);
  return v;
}

void put_vector(std::ostream& os, const Eigen::VectorXf& v) {
  put(os, static_cast<std::uint64_t>(v.size()));
  os.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * 4));
}

Eigen::VectorXf get_vector(std::istream& is, const std::string& path) {
  const auto n = get<std::uint64_t>(is, path);
  require(n < (1ULL << 34), ErrorCode::IoError, "implausible vector length in " + path);
  Eigen::VectorXf v(static_cast<Eigen::Index>(n));
  is.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * 4));
  require(static_cast<bool>(is), ErrorCode::IoError, "truncated file " + path);
  return v;
}

void check_magic(std::istream& is, const char* magic, const std::string& path) {
  char buf[4];
  is.read(buf, 4);
  require(is && std::memcmp(buf, magic, 4) == 0, ErrorCode::IoError, "bad magic in " + path);
}

}  // namespace

std::string to_string(Regime r) {
  switch (r) {
    case Regime::Joint: return "joint";
    case Regime::Amortised: return "amortised";
    case Regime::Universal: return "universal";
    case Regime::MseBaseline: return "mse_baseline";
  }
  return "joint";
}

Regime parse_regime(const std::string& name) {
  if (name == "joint") return Regime::Joint;
  if (name == "amortised") return Regime::Amortised;
  if (name == "universal") return Regime::Universal;
  if (name == "mse_baseline") return Regime::MseBaseline;
  throw Error(ErrorCode::Usage, "unknown regime '" + name + "'");
}

std::string render_model_text(const NetConfig& net, const ModelMeta& meta) {
  std::ostringstream os;
  os << std::setprecision(17);
  os << "window = " << net.window << "\n";
  os << "levels = " << render_levels(net.levels) << "\n";
  os << "kernel_size = " << net.kernel_size << "\n";
  os << "regime = " << to_string(meta.regime) << "\n";
  os << "cond_frames = " << meta.cond_frames << "\n";
  os << "data_mean = " << meta.stats.mean << "\n";
  os << "data_std = " << meta.stats.std << "\n";
  os << "epoch = " << meta.epoch << "\n";
  os << "t_max = " << meta.t_max << "\n";
  return os.str();
}

void parse_model_text(const std::string& text, NetConfig& net, ModelMeta& meta) {
  std::map<std::string, std::string> kv;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    const auto eq = line.find(" = ");
    if (eq == std::string::npos) continue;
    kv[line.substr(0, eq)] = line.substr(eq + 3);
  }
  auto field = [&](const char* key) -> const std::string& {
    const auto it = kv.find(key);
    require(it != kv.end(), ErrorCode::IoError, std::string("checkpoint lacks ") + key);
    return it->second;
  };
  try {
    net.window = std::stoi(field("window"));
    net.levels = parse_levels(field("levels"));
    net.kernel_size = std::stoi(field("kernel_size"));
    meta.regime = parse_regime(field("regime"));
    meta.cond_frames = std::stoi(field("cond_frames"));
    meta.stats.mean = std::stod(field("data_mean"));
    meta.stats.std = std::stod(field("data_std"));
    meta.epoch = std::stoi(field("epoch"));
    meta.t_max = std::stod(field("t_max"));
  } catch (const std::logic_error&) {
    throw Error(ErrorCode::IoError, "malformed checkpoint header");
  }
  net.validate();
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  std::ofstream os(path, std::ios::binary);
  require(static_cast<bool>(os), ErrorCode::IoError, "cannot open " + path + " for writing");
  os.write("PDCK", 4);
  put(os, std::uint32_t{1});
  const std::string text = render_model_text(ckpt.net, ckpt.meta);
  put(os, static_cast<std::uint32_t>(text.size()));
  os.write(text.data(), static_cast<std::streamsize>(text.size()));
  put_vector(os, ckpt.params);
  put(os, ckpt.train_loss);
  put(os, ckpt.valid_loss);
  require(static_cast<bool>(os), ErrorCode::IoError, "write failed for " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  require(static_cast<bool>(is), ErrorCode::IoError, "cannot open checkpoint " + path);
  check_magic(is, "PDCK", path);
  require(get<std::uint32_t>(is, path) == 1, ErrorCode::IoError, "unsupported checkpoint version in " + path);
  const auto len = get<std::uint32_t>(is, path);
  require(len < (1u << 20), ErrorCode::IoError, "implausible header length in " + path);
  std::string text(len, '\0');
  is.read(text.data(), len);
  require(static_cast<bool>(is), ErrorCode::IoError, "truncated checkpoint " + path);
  Checkpoint c;
  parse_model_text(text, c.net, c.meta);
  c.params = get_vector(is, path);
  c.train_loss = get<double>(is, path);
  c.valid_loss = get<double>(is, path);
  require(c.params.size() == layout_size(net_layout(c.net)), ErrorCode::IoError,
          "parameter count does not match the stored net config in " + path);
  return c;
}

void save_optimizer(const std::string& path, const OptimizerState& s) {
  std::ofstream os(path, std::ios::binary);
  require(static_cast<bool>(os), ErrorCode::IoError, "cannot open " + path + " for writing");
  os.write("PDOP", 4);
  put(os, std::uint32_t{1});
  put(os, s.step);
  put(os, static_cast<std::int32_t>(s.epoch));
  put(os, s.best_valid);
  put(os, s.best_train);
  put_vector(os, s.m);
  put_vector(os, s.v);
  put_vector(os, s.best_params);
  require(static_cast<bool>(os), ErrorCode::IoError, "write failed for " + path);
}

OptimizerState load_optimizer(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  require(static_cast<bool>(is), ErrorCode::IoError, "cannot open optimizer state " + path);
  check_magic(is, "PDOP", path);
  require(get<std::uint32_t>(is, path) == 1, ErrorCode::IoError, "unsupported optimizer state version");
  OptimizerState s;
  s.step = get<std::int64_t>(is, path);
  s.epoch = get<std::int32_t>(is, path);
  s.best_valid = get<double>(is, path);
  s.best_train = get<double>(is, path);
  s.m = get_vector(is, path);
  s.v = get_vector(is, path);
  s.best_params = get_vector(is, path);
  return s;
}

}  // namespace pdediff

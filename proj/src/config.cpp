#include "pdediff/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

namespace pdediff {

std::string to_string(SamplerKind k) { return k == SamplerKind::AR ? "ar" : "aao"; }

SamplerKind parse_sampler_kind(const std::string& name) {
  if (name == "ar") return SamplerKind::AR;
  if (name == "aao") return SamplerKind::AAO;
  throw Error(ErrorCode::Usage, "unknown sampler '" + name + "' (expected ar or aao)");
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  if (trim(s).empty()) return out;
  std::string item;
  std::istringstream is(s);
  while (std::getline(is, item, sep)) out.push_back(trim(item));
  return out;
}

// Shortest text that parses back to the same double.
std::string fmt(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
  T v{};
  const auto s = trim(text);
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  require(r.ec == std::errc() && r.ptr == s.data() + s.size() && !s.empty(), ErrorCode::Usage,
          "bad value '" + text + "' for " + key);
  return v;
}

bool parse_bool(const std::string& key, const std::string& text) {
  if (text == "true") return true;
  if (text == "false") return false;
  throw Error(ErrorCode::Usage, "bad value '" + text + "' for " + key + " (expected true or false)");
}

template <typename T, typename F>
std::string join(const std::vector<T>& v, F&& f) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ',';
    out += f(v[i]);
  }
  return out;
}

struct Key {
  std::string section, name;
  std::function<std::string(const ExperimentConfig&)> get;
  std::function<void(ExperimentConfig&, const std::string&)> set;
};

using C = ExperimentConfig;

template <typename Getter>
Key number_key(std::string sec, std::string name, Getter ref) {
  using T = std::remove_reference_t<decltype(ref(std::declval<C&>()))>;
  const std::string full = sec + "." + name;
  return Key{sec, name,
             [ref](const C& c) {
               auto& v = ref(const_cast<C&>(c));
               if constexpr (std::is_floating_point_v<T>) {
                 return fmt(v);
               } else {
                 return std::to_string(v);
               }
             },
             [ref, full](C& c, const std::string& s) { ref(c) = parse_number<T>(full, s); }};
}

Key bool_key(std::string sec, std::string name, std::function<bool&(C&)> ref) {
  const std::string full = sec + "." + name;
  return Key{sec, name, [ref](const C& c) { return std::string(ref(const_cast<C&>(c)) ? "true" : "false"); },
             [ref, full](C& c, const std::string& s) { ref(c) = parse_bool(full, s); }};
}

Key string_key(std::string sec, std::string name, std::function<std::string&(C&)> ref) {
  return Key{sec, name, [ref](const C& c) { return ref(const_cast<C&>(c)); },
             [ref](C& c, const std::string& s) { ref(c) = s; }};
}

Key doubles_key(std::string sec, std::string name, std::function<std::vector<double>&(C&)> ref) {
  const std::string full = sec + "." + name;
  return Key{sec, name, [ref](const C& c) { return join(ref(const_cast<C&>(c)), fmt); },
             [ref, full](C& c, const std::string& s) {
               std::vector<double> v;
               for (const auto& item : split(s, ',')) v.push_back(parse_number<double>(full, item));
               ref(c) = std::move(v);
             }};
}

#define FIELD(expr) [](C & c) -> auto& { return c.expr; }

const std::vector<Key>& keys() {
  static const std::vector<Key> table = [] {
    std::vector<Key> k;
    // [data]
    k.push_back({"data", "pde", [](const C& c) { return to_string(c.data.pde.kind); },
                 [](C& c, const std::string& s) { c.data.pde.kind = parse_pde_kind(s); }});
    k.push_back(number_key("data", "D", FIELD(data.pde.grid.D)));
    k.push_back(number_key("data", "domain_length", FIELD(data.pde.grid.domain_length)));
    k.push_back(number_key("data", "dt_solver", FIELD(data.pde.grid.dt_solver)));
    k.push_back(number_key("data", "dt_save", FIELD(data.pde.grid.dt_save)));
    k.push_back(number_key("data", "solve_factor", FIELD(data.pde.grid.solve_factor)));
    k.push_back(number_key("data", "n_train", FIELD(data.n_train)));
    k.push_back(number_key("data", "n_valid", FIELD(data.n_valid)));
    k.push_back(number_key("data", "n_test", FIELD(data.n_test)));
    k.push_back(number_key("data", "length_train", FIELD(data.length_train)));
    k.push_back(number_key("data", "length_test", FIELD(data.length_test)));
    k.push_back(number_key("data", "burn_in", FIELD(data.burn_in)));
    k.push_back(number_key("data", "burgers_viscosity", FIELD(data.pde.burgers.viscosity)));
    k.push_back(number_key("data", "grf_scale", FIELD(data.pde.burgers.grf_scale)));
    k.push_back(number_key("data", "grf_k0", FIELD(data.pde.burgers.grf_k0)));
    k.push_back(number_key("data", "grf_power", FIELD(data.pde.burgers.grf_power)));
    k.push_back(number_key("data", "ks_viscosity", FIELD(data.pde.ks.viscosity)));
    k.push_back(number_key("data", "ks_modes", FIELD(data.pde.ks.init_n_modes)));
    k.push_back(number_key("data", "ks_amp_min", FIELD(data.pde.ks.amp_min)));
    k.push_back(number_key("data", "ks_amp_max", FIELD(data.pde.ks.amp_max)));
    k.push_back(number_key("data", "ks_phase_min", FIELD(data.pde.ks.phase_min)));
    k.push_back(number_key("data", "ks_phase_max", FIELD(data.pde.ks.phase_max)));
    k.push_back(number_key("data", "ks_freq_min", FIELD(data.pde.ks.freq_min)));
    k.push_back(number_key("data", "ks_freq_max", FIELD(data.pde.ks.freq_max)));
    k.push_back(string_key("data", "dir", FIELD(data_dir)));
    // [model]
    k.push_back(number_key("model", "window", FIELD(net.window)));
    k.push_back({"model", "levels", [](const C& c) { return render_levels(c.net.levels); },
                 [](C& c, const std::string& s) { c.net.levels = parse_levels(s); }});
    k.push_back(number_key("model", "kernel_size", FIELD(net.kernel_size)));
    k.push_back({"model", "regime", [](const C& c) { return to_string(c.train.regime); },
                 [](C& c, const std::string& s) { c.train.regime = parse_regime(s); }});
    k.push_back(number_key("model", "cond_frames", FIELD(train.cond_frames)));
    k.push_back(string_key("model", "checkpoint", FIELD(checkpoint)));
    // [train]
    k.push_back(number_key("train", "lr", FIELD(train.lr)));
    k.push_back(number_key("train", "weight_decay", FIELD(train.weight_decay)));
    k.push_back(number_key("train", "batch_size", FIELD(train.batch_size)));
    k.push_back(number_key("train", "epochs", FIELD(train.epochs)));
    k.push_back(number_key("train", "windows_per_traj", FIELD(train.windows_per_traj)));
    k.push_back(number_key("train", "t_max", FIELD(train.t_max)));
    k.push_back(bool_key("train", "resume", FIELD(resume)));
    k.push_back(number_key("train", "stop_after", FIELD(stop_after)));
    // [sample]
    k.push_back({"sample", "sampler", [](const C& c) { return to_string(c.sample.sampler); },
                 [](C& c, const std::string& s) { c.sample.sampler = parse_sampler_kind(s); }});
    k.push_back(number_key("sample", "P", FIELD(sample.P)));
    k.push_back(number_key("sample", "C", FIELD(sample.C)));
    k.push_back(number_key("sample", "steps", FIELD(sample.time_grid.n_steps)));
    k.push_back({"sample", "spacing", [](const C& c) { return to_string(c.sample.time_grid.spacing); },
                 [](C& c, const std::string& s) { c.sample.time_grid.spacing = parse_spacing(s); }});
    k.push_back(number_key("sample", "kappa", FIELD(sample.time_grid.kappa)));
    k.push_back(number_key("sample", "t_min", FIELD(sample.t_min)));
    k.push_back(number_key("sample", "corrector_steps", FIELD(sample.corrector_steps)));
    k.push_back(number_key("sample", "corrector_snr", FIELD(sample.corrector_snr)));
    k.push_back(number_key("sample", "gamma", FIELD(sample.guidance.gamma)));
    k.push_back(number_key("sample", "guidance_sigma_y", FIELD(sample.guidance.sigma_y)));
    k.push_back(number_key("sample", "chunk", FIELD(sample.chunk)));
    k.push_back(bool_key("sample", "threshold", FIELD(sample.threshold)));
    k.push_back(number_key("sample", "threshold_percentile", FIELD(sample.threshold_percentile)));
    // [task]
    k.push_back(number_key("task", "seed", FIELD(task.seed)));
    k.push_back(number_key("task", "threads", FIELD(task.threads)));
    k.push_back(number_key("task", "n_eval", FIELD(task.n_eval)));
    k.push_back(number_key("task", "length", FIELD(task.length)));
    k.push_back(number_key("task", "sigma_y", FIELD(task.sigma_y)));
    k.push_back(number_key("task", "n_initial_full", FIELD(task.n_initial_full)));
    k.push_back(doubles_key("task", "proportions", FIELD(task.proportions)));
    k.push_back(doubles_key("task", "gammas", FIELD(task.gammas)));
    k.push_back(doubles_key("task", "guidance_sigma_ys", FIELD(task.guidance_sigma_ys)));
    k.push_back(number_key("task", "online_s", FIELD(task.online_s)));
    k.push_back(number_key("task", "online_f", FIELD(task.online_f)));
    k.push_back(number_key("task", "online_proportion", FIELD(task.online_proportion)));
    k.push_back(number_key("task", "online_first_fraction", FIELD(task.online_first_fraction)));
    k.push_back({"task", "pc_grid",
                 [](const C& c) {
                   return join(c.task.pc_grid, [](const std::pair<int, int>& pc) {
                     return std::to_string(pc.first) + "|" + std::to_string(pc.second);
                   });
                 },
                 [](C& c, const std::string& s) {
                   std::vector<std::pair<int, int>> v;
                   for (const auto& item : split(s, ',')) {
                     const auto parts = split(item, '|');
                     require(parts.size() == 2, ErrorCode::Usage, "pc_grid entries look like P|C, got '" + item + "'");
                     v.emplace_back(parse_number<int>("task.pc_grid", parts[0]),
                                    parse_number<int>("task.pc_grid", parts[1]));
                   }
                   c.task.pc_grid = std::move(v);
                 }});
    k.push_back(bool_key("task", "compare_aao", FIELD(task.compare_aao)));
    k.push_back(number_key("task", "aao_corrector_steps", FIELD(task.aao_corrector_steps)));
    k.push_back(number_key("task", "rho_threshold", FIELD(task.rho_threshold)));
    k.push_back({"task", "interp_methods",
                 [](const C& c) {
                   return join(c.task.interp_methods, [](InterpMethod m) { return to_string(m); });
                 },
                 [](C& c, const std::string& s) {
                   std::vector<InterpMethod> v;
                   for (const auto& item : split(s, ',')) v.push_back(parse_interp_method(item));
                   c.task.interp_methods = std::move(v);
                 }});
    k.push_back(bool_key("task", "climatology", FIELD(task.climatology)));
    k.push_back(bool_key("task", "persistence", FIELD(task.persistence)));
    return k;
  }();
  return table;
}

#undef FIELD

const char* const kSections[] = {"data", "model", "train", "sample", "task"};

}  // namespace

ExperimentConfig parse_config(const std::string& text) {
  ExperimentConfig cfg;
  std::string section;
  std::set<std::string> seen;
  std::istringstream is(text);
  std::string raw;
  int lineno = 0;
  while (std::getline(is, raw)) {
    ++lineno;
    const auto hash = raw.find('#');
    const std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (line.empty()) continue;
    const std::string where = "config line " + std::to_string(lineno);
    if (line.front() == '[') {
      require(line.back() == ']', ErrorCode::Usage, where + ": unterminated section header");
      section = trim(line.substr(1, line.size() - 2));
      bool known = false;
      for (const char* s : kSections) known = known || section == s;
      require(known, ErrorCode::Usage, where + ": unknown section [" + section + "]");
      continue;
    }
    const auto eq = line.find('=');
    require(eq != std::string::npos, ErrorCode::Usage, where + ": expected key = value");
    require(!section.empty(), ErrorCode::Usage, where + ": key outside of a section");
    const std::string key = trim(line.substr(0, eq)), value = trim(line.substr(eq + 1));
    const std::string full = section + "." + key;
    require(seen.insert(full).second, ErrorCode::Usage, where + ": duplicate key " + full);
    bool found = false;
    for (const auto& k : keys()) {
      if (k.section == section && k.name == key) {
        k.set(cfg, value);
        found = true;
        break;
      }
    }
    require(found, ErrorCode::Usage, where + ": unknown key " + full);
  }
  return cfg;
}

std::string render_config(const ExperimentConfig& cfg) {
  std::ostringstream os;
  for (const char* s : kSections) {
    if (s != kSections[0]) os << '\n';
    os << '[' << s << "]\n";
    for (const auto& k : keys()) {
      if (k.section == s) os << k.name << " = " << k.get(cfg) << '\n';
    }
  }
  return os.str();
}

void set_config_value(ExperimentConfig& cfg, const std::string& dotted_key, const std::string& value) {
  const auto dot = dotted_key.find('.');
  require(dot != std::string::npos, ErrorCode::Usage, "expected section.key, got '" + dotted_key + "'");
  const std::string section = dotted_key.substr(0, dot), key = dotted_key.substr(dot + 1);
  for (const auto& k : keys()) {
    if (k.section == section && k.name == key) {
      k.set(cfg, trim(value));
      return;
    }
  }
  throw Error(ErrorCode::Usage, "unknown key " + dotted_key);
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorCode::IoError, "cannot open config " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

void save_config(const std::string& path, const ExperimentConfig& cfg) {
  std::ofstream out(path);
  require(static_cast<bool>(out), ErrorCode::IoError, "cannot write config " + path);
  out << render_config(cfg);
  require(static_cast<bool>(out), ErrorCode::IoError, "failed writing config " + path);
}

std::vector<std::string> preset_names() { return {"ks-desk", "burgers-desk"}; }

ExperimentConfig preset(const std::string& name) {
  ExperimentConfig c;
  if (name == "ks-desk") {
    auto& g = c.data.pde.grid;
    c.data.pde.kind = PdeKind::KS;
    g.D = 64;
    g.solve_factor = 4;
    g.domain_length = 64.0;
    g.dt_solver = 0.05;
    g.dt_save = 0.2;
    c.data.n_train = 256;
    c.data.n_valid = 32;
    c.data.n_test = 32;
    c.data.length_train = 140;
    c.data.length_test = 320;
    c.data_dir = "ks-data";
    c.checkpoint = "ks-joint.pdck";
    c.net.levels = {{32, 2}, {64, 2}, {64, 2}};
    c.train.lr = 1e-3;
    c.train.epochs = 60;
    c.train.windows_per_traj = 16;
    c.task.n_eval = 8;
    c.task.online_s = 10;
    c.task.online_f = 80;
    c.task.pc_grid = {{1, 4}, {2, 3}, {3, 2}, {4, 1}};
    return c;
  }
  if (name == "burgers-desk") {
    auto& g = c.data.pde.grid;
    c.data.pde.kind = PdeKind::Burgers;
    g.D = 64;
    g.solve_factor = 2;
    g.domain_length = 1.0;
    g.dt_solver = 1e-3;
    g.dt_save = 0.01;
    c.data.n_train = 800;
    c.data.n_valid = 200;
    c.data.n_test = 200;
    c.data.length_train = 101;
    c.data.length_test = 101;
    c.data_dir = "burgers-data";
    c.checkpoint = "burgers-joint.pdck";
    // Three levels give a receptive field spanning the grid; the advection speed is the field mean.
    c.net.levels = {{32, 2}, {64, 2}, {64, 2}};
    c.train.lr = 1e-3;
    c.train.epochs = 100;
    c.train.windows_per_traj = 8;
    c.task.n_eval = 16;
    c.task.compare_aao = true;
    c.task.aao_corrector_steps = 0;
    return c;
  }
  throw Error(ErrorCode::Usage, "unknown preset '" + name + "' (expected ks-desk or burgers-desk)");
}

void validate(const ExperimentConfig& cfg) {
  cfg.data.pde.grid.validate();
  cfg.net.validate();
  cfg.train.validate();
  cfg.sample.guidance.validate();
  NoiseSchedule{cfg.sample.t_min, cfg.train.t_max}.validate();
  const auto& t = cfg.task;
  require(cfg.stop_after >= 0, ErrorCode::Usage, "stop_after must be >= 0");
  require(t.threads >= 1, ErrorCode::Usage, "threads must be >= 1");
  require(t.n_eval >= 0, ErrorCode::Usage, "n_eval must be >= 0");
  require(t.length >= 0, ErrorCode::Usage, "length must be >= 0");
  require(t.sigma_y >= 0, ErrorCode::Usage, "sigma_y must be >= 0");
  for (double p : t.proportions)
    require(p > 0 && p <= 1, ErrorCode::InvalidProportion, "proportions must lie in (0, 1]");
  require(t.gammas.empty() || t.gammas.size() == t.proportions.size(), ErrorCode::Usage,
          "gammas needs one entry per proportion");
  require(t.guidance_sigma_ys.empty() || t.guidance_sigma_ys.size() == t.proportions.size(), ErrorCode::Usage,
          "guidance_sigma_ys needs one entry per proportion");
  require(t.online_s >= 1 && t.online_f >= t.online_s, ErrorCode::Usage, "online DA needs 1 <= s <= f");
  require(cfg.sample.P >= 1 && cfg.sample.C >= 0 && cfg.sample.P + cfg.sample.C == cfg.net.window, ErrorCode::Usage,
          "sample needs P >= 1, C >= 0 and P + C = window");
  for (const auto& [P, C] : t.pc_grid)
    require(P >= 1 && C >= 0 && P + C == cfg.net.window, ErrorCode::Usage, "pc_grid entries need P + C = window");
}

}  // namespace pdediff

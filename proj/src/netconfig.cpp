#include "pdediff/net.hpp"

#include <sstream>

namespace pdediff {

void NetConfig::validate() const {
  require(window >= 3 && window % 2 == 1, ErrorCode::InvalidArgument, "window must be odd and >= 3");
  require(kernel_size >= 1 && kernel_size % 2 == 1, ErrorCode::InvalidArgument, "kernel_size must be odd");
  require(!levels.empty(), ErrorCode::InvalidArgument, "net needs at least one level");
  for (const auto& [c, r] : levels) {
    require(c >= 1 && r >= 0, ErrorCode::InvalidArgument, "level channels must be >= 1 and blocks >= 0");
  }
}

std::string render_levels(const std::vector<std::pair<int, int>>& levels) {
  std::ostringstream os;
  for (std::size_t i = 0; i < levels.size(); ++i) {
    if (i) os << ',';
    os << levels[i].first << 'x' << levels[i].second;
  }
  return os.str();
}

// "32x2,64x2" -> {(32, 2), (64, 2)}
std::vector<std::pair<int, int>> parse_levels(const std::string& text) {
  std::vector<std::pair<int, int>> out;
  std::istringstream is(text);
  std::string item;
  while (std::getline(is, item, ',')) {
    const auto x = item.find('x');
    require(x != std::string::npos, ErrorCode::Usage, "level '" + item + "' must look like CxR");
    try {
      std::size_t used = 0;
      const int c = std::stoi(item.substr(0, x), &used);
      require(used == x, ErrorCode::Usage, "bad level '" + item + "'");
      const std::string rest = item.substr(x + 1);
      const int r = std::stoi(rest, &used);
      require(used == rest.size(), ErrorCode::Usage, "bad level '" + item + "'");
      out.emplace_back(c, r);
    } catch (const std::logic_error&) {
      throw Error(ErrorCode::Usage, "bad level '" + item + "'");
    }
  }
  require(!out.empty(), ErrorCode::Usage, "empty level list");
  return out;
}

std::vector<ParamTensor> net_layout(const NetConfig& cfg) {
  cfg.validate();
  std::vector<ParamTensor> out;
  Eigen::Index offset = 0;
  auto conv = [&](const std::string& name, int cin, int cout, int k) {
    out.push_back({name + ".w", offset, cout, static_cast<Eigen::Index>(cin) * k});
    offset += out.back().size();
    out.push_back({name + ".b", offset, cout, 1});
    offset += cout;
  };
  const int K = cfg.kernel_size;
  auto resblock = [&](const std::string& name, int c) {
    conv(name + ".conv1", c, c, K);
    conv(name + ".conv2", c, c, K);
  };
  const int n_levels = static_cast<int>(cfg.levels.size());
  conv("conv_in", cfg.in_channels(), cfg.levels[0].first, K);
  for (int l = 0; l < n_levels; ++l) {
    const std::string name = "enc" + std::to_string(l);
    const int c = cfg.levels[l].first;
    if (l > 0) conv(name + ".proj", cfg.levels[l - 1].first, c, 1);
    for (int r = 0; r < cfg.levels[l].second; ++r) resblock(name + ".res" + std::to_string(r), c);
  }
  for (int l = n_levels - 2; l >= 0; --l) {
    const std::string name = "dec" + std::to_string(l);
    const int c = cfg.levels[l].first;
    conv(name + ".proj", cfg.levels[l + 1].first, c, 1);
    for (int r = 0; r < cfg.levels[l].second; ++r) resblock(name + ".res" + std::to_string(r), c);
  }
  conv("conv_out", cfg.levels[0].first, cfg.out_channels(), K);
  return out;
}

Eigen::Index layout_size(const std::vector<ParamTensor>& layout) {
  return layout.empty() ? 0 : layout.back().offset + layout.back().size();
}

}  // namespace pdediff

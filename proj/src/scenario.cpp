#include "cfaso/scenario.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>

namespace cfaso {

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw std::invalid_argument("scenario config: " + what);
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

double parse_double(const std::string& key, const std::string& value) {
  std::size_t pos = 0;
  double v = 0.0;
  try {
    v = std::stod(value, &pos);
  } catch (const std::exception&) {
    throw std::invalid_argument("scenario config: bad numeric value for '" + key + "': " + value);
  }
  if (pos != value.size())
    throw std::invalid_argument("scenario config: trailing junk in value for '" + key + "': " + value);
  return v;
}

int parse_int(const std::string& key, const std::string& value) {
  const double v = parse_double(key, value);
  const double r = std::round(v);
  if (std::abs(v - r) > 0.0)
    throw std::invalid_argument("scenario config: expected integer for '" + key + "': " + value);
  return static_cast<int>(r);
}

std::uint64_t parse_u64(const std::string& key, const std::string& value) {
  try {
    std::size_t pos = 0;
    const std::uint64_t v = std::stoull(value, &pos);
    if (pos != value.size()) throw std::invalid_argument("junk");
    return v;
  } catch (const std::exception&) {
    throw std::invalid_argument("scenario config: bad unsigned value for '" + key + "': " + value);
  }
}

}  // namespace

void ScenarioConfig::validate() const {
  require(num_users >= 1, "num_users must be >= 1");
  require(num_aps >= 1, "num_aps must be >= 1");
  require(antennas_per_ap >= 1, "antennas_per_ap must be >= 1");
  require(std::isfinite(area_side) && area_side > 0.0, "area_side must be positive");
  require(std::isfinite(fixed_ap_power) && fixed_ap_power >= 0.0, "fixed_ap_power must be >= 0");
  require(std::isfinite(pa_inefficiency) && pa_inefficiency > 0.0, "pa_inefficiency must be positive");
  require(std::isfinite(max_tx_power) && max_tx_power > 0.0, "max_tx_power must be positive");
  require(std::isfinite(dl_noise_power) && dl_noise_power > 0.0, "dl_noise_power must be positive");
  require(std::isfinite(ul_noise_power) && ul_noise_power >= 0.0, "ul_noise_power must be >= 0");
  require(std::isfinite(shadow_std) && shadow_std >= 0.0, "shadow_std must be >= 0");
  require(std::isfinite(bandwidth) && bandwidth > 0.0, "bandwidth must be positive");
  require(std::isfinite(pathloss_intercept), "pathloss_intercept must be finite");
  require(std::isfinite(pathloss_exponent_coeff), "pathloss_exponent_coeff must be finite");
  require(std::isfinite(angular_spread) && angular_spread >= 0.0, "angular_spread must be >= 0");
  require(num_channel_realizations >= 1, "num_channel_realizations must be >= 1");
}

ScenarioConfig parse_config(const std::string& text) {
  ScenarioConfig cfg;
  std::set<std::string> seen;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("scenario config: line " + std::to_string(lineno) +
                                  " is not key=value: " + line);
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty() || value.empty())
      throw std::invalid_argument("scenario config: empty key or value on line " +
                                  std::to_string(lineno));
    if (!seen.insert(key).second)
      throw std::invalid_argument("scenario config: duplicate key '" + key + "'");

    if (key == "num_users") cfg.num_users = parse_int(key, value);
    else if (key == "num_aps") cfg.num_aps = parse_int(key, value);
    else if (key == "antennas_per_ap") cfg.antennas_per_ap = parse_int(key, value);
    else if (key == "area_side") cfg.area_side = parse_double(key, value);
    else if (key == "fixed_ap_power") cfg.fixed_ap_power = parse_double(key, value);
    else if (key == "pa_inefficiency") cfg.pa_inefficiency = parse_double(key, value);
    else if (key == "max_tx_power") cfg.max_tx_power = parse_double(key, value);
    else if (key == "dl_noise_power") cfg.dl_noise_power = parse_double(key, value);
    else if (key == "ul_noise_power") cfg.ul_noise_power = parse_double(key, value);
    else if (key == "shadow_std") cfg.shadow_std = parse_double(key, value);
    else if (key == "bandwidth") cfg.bandwidth = parse_double(key, value);
    else if (key == "pathloss_intercept") cfg.pathloss_intercept = parse_double(key, value);
    else if (key == "pathloss_exponent_coeff") cfg.pathloss_exponent_coeff = parse_double(key, value);
    else if (key == "angular_spread") cfg.angular_spread = parse_double(key, value);
    else if (key == "num_channel_realizations") cfg.num_channel_realizations = parse_int(key, value);
    else if (key == "rng_seed") cfg.rng_seed = parse_u64(key, value);
    else throw std::invalid_argument("scenario config: unknown key '" + key + "'");
  }
  cfg.validate();
  return cfg;
}

ScenarioConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("scenario config: cannot open file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

NetworkGeometry generate_geometry(const ScenarioConfig& config, std::mt19937_64& rng) {
  config.validate();
  const int L = config.num_aps;
  const int K = config.num_users;

  NetworkGeometry g;
  g.ap_positions.resize(L, 2);
  g.user_positions.resize(K, 2);
  g.distances.resize(L, K);
  g.beta.resize(L, K);
  g.angles.resize(L, K);

  std::uniform_real_distribution<double> coord(0.0, config.area_side);
  for (int l = 0; l < L; ++l) {
    g.ap_positions(l, 0) = coord(rng);
    g.ap_positions(l, 1) = coord(rng);
  }
  for (int k = 0; k < K; ++k) {
    g.user_positions(k, 0) = coord(rng);
    g.user_positions(k, 1) = coord(rng);
  }

  std::normal_distribution<double> shadow(0.0, 1.0);
  for (int l = 0; l < L; ++l) {
    for (int k = 0; k < K; ++k) {
      const double dx = g.user_positions(k, 0) - g.ap_positions(l, 0);
      const double dy = g.user_positions(k, 1) - g.ap_positions(l, 1);
      // 1 m floor keeps the intercept-based path loss model in its valid range.
      const double d = std::max(1.0, std::hypot(dx, dy));
      const double f = config.shadow_std * shadow(rng);
      const double pl_db = config.pathloss_intercept +
                           config.pathloss_exponent_coeff * std::log10(d) + f;
      g.distances(l, k) = d;
      g.beta(l, k) = std::pow(10.0, pl_db / 10.0);
      g.angles(l, k) = std::atan2(dy, dx);
    }
  }
  return g;
}

}  // namespace cfaso

#pragma once

// Scenario configuration: a flat key = value file with [market] and either
// [prosumers] (explicit per-prosumer arrays) or [generator] (seeded random
// draws). Anything left out falls back to the defaults below.

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "prosumer/market.hpp"
#include "prosumer/rng.hpp"

namespace prosumer::experiments {

/// Invalid or unreadable configuration; the message names the offending key.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr std::uint64_t kDefaultSeed = 21;

struct Range {
  double lo = 0.0;
  double hi = 0.0;
};

struct GeneratorBlock {
  std::size_t n = 9;
  Range l_range{10.0, 30.0};
  Range w_range{10.0, 30.0};
  Range q_range{0.0, 10.0};
  std::uint64_t seed = kDefaultSeed;
  double q_max = 25.0;
  ProspectParams prospect{};
};

struct ExplicitBlock {
  std::vector<double> w, q, l, q_max, lambda, beta_plus, beta_minus, r;
};

struct MarketBlock {
  /// Empty means 1/N.
  std::optional<double> alpha{};
  double rho_min = 0.0;
  double rho_max = 0.12;
  double rho_base = 0.04;
  double rho_mar = 0.06;
  std::optional<double> leader_lo{};
  std::optional<double> leader_hi{};
};

struct ScenarioConfig {
  MarketBlock market{};
  std::optional<GeneratorBlock> generator{GeneratorBlock{}};
  std::optional<ExplicitBlock> prosumers{};
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline double parse_number(const std::string& key, const std::string& text) {
  const std::string t = trim(text);
  try {
    std::size_t used = 0;
    const double v = std::stod(t, &used);
    if (used != t.size()) throw std::invalid_argument(t);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("key '" + key + "': expected a number, got '" + t + "'");
  }
}

inline std::vector<double> parse_list(const std::string& key,
                                      const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_number(key, item));
  if (out.empty()) throw ConfigError("key '" + key + "': empty list");
  return out;
}

inline Range parse_range(const std::string& key, const std::string& text) {
  const auto v = parse_list(key, text);
  if (v.size() != 2 || !(v[0] <= v[1]))
    throw ConfigError("key '" + key + "': expected 'lo, hi' with lo <= hi");
  return {v[0], v[1]};
}

}  // namespace detail

/// Parses configuration text. Unknown sections or keys are errors.
[[nodiscard]] inline ScenarioConfig parse_config(const std::string& text) {
  using detail::parse_list;
  using detail::parse_number;
  using detail::parse_range;
  using detail::trim;

  ScenarioConfig cfg;
  bool saw_generator = false, saw_prosumers = false;
  GeneratorBlock gen;
  ExplicitBlock ex;
  std::string section;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find_first_of("#;");
    line = trim(hash == std::string::npos ? line : line.substr(0, hash));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw ConfigError("line " + std::to_string(line_no) +
                          ": malformed section header");
      section = trim(line.substr(1, line.size() - 2));
      if (section == "generator") saw_generator = true;
      else if (section == "prosumers") saw_prosumers = true;
      else if (section != "market")
        throw ConfigError("unknown section [" + section + "]");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(line_no) +
                        ": expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const std::string where = section + "." + key;

    if (section == "market") {
      auto& m = cfg.market;
      if (key == "alpha") {
        std::string v = value;
        v.erase(std::remove_if(v.begin(), v.end(), ::isspace), v.end());
        if (v == "1/N" || v == "1/n") m.alpha.reset();
        else m.alpha = parse_number(where, value);
      } else if (key == "rho_min") m.rho_min = parse_number(where, value);
      else if (key == "rho_max") m.rho_max = parse_number(where, value);
      else if (key == "rho_base") m.rho_base = parse_number(where, value);
      else if (key == "rho_mar") m.rho_mar = parse_number(where, value);
      else if (key == "leader_lo") m.leader_lo = parse_number(where, value);
      else if (key == "leader_hi") m.leader_hi = parse_number(where, value);
      else throw ConfigError("unknown key '" + where + "'");
    } else if (section == "generator") {
      if (key == "n") {
        const double n = parse_number(where, value);
        if (!(n >= 1.0) || n != static_cast<double>(static_cast<std::size_t>(n)))
          throw ConfigError("key '" + where + "': expected a positive integer");
        gen.n = static_cast<std::size_t>(n);
      } else if (key == "l_range") gen.l_range = parse_range(where, value);
      else if (key == "w_range") gen.w_range = parse_range(where, value);
      else if (key == "q_range") gen.q_range = parse_range(where, value);
      else if (key == "seed") {
        try {
          std::size_t used = 0;
          if (value.empty() || !std::isdigit(static_cast<unsigned char>(value.front())))
            throw std::invalid_argument(value);
          gen.seed = std::stoull(value, &used);
          if (used != value.size()) throw std::invalid_argument(value);
        } catch (const std::exception&) {
          throw ConfigError("key '" + where + "': expected an unsigned integer");
        }
      } else if (key == "q_max") gen.q_max = parse_number(where, value);
      else if (key == "lambda") gen.prospect.lambda = parse_number(where, value);
      else if (key == "beta_plus") gen.prospect.beta_plus = parse_number(where, value);
      else if (key == "beta_minus") gen.prospect.beta_minus = parse_number(where, value);
      else if (key == "r") gen.prospect.reference = parse_number(where, value);
      else throw ConfigError("unknown key '" + where + "'");
    } else if (section == "prosumers") {
      std::vector<double>* target = nullptr;
      if (key == "w") target = &ex.w;
      else if (key == "q") target = &ex.q;
      else if (key == "l") target = &ex.l;
      else if (key == "q_max") target = &ex.q_max;
      else if (key == "lambda") target = &ex.lambda;
      else if (key == "beta_plus") target = &ex.beta_plus;
      else if (key == "beta_minus") target = &ex.beta_minus;
      else if (key == "r") target = &ex.r;
      else throw ConfigError("unknown key '" + where + "'");
      *target = parse_list(where, value);
    } else {
      throw ConfigError("line " + std::to_string(line_no) +
                        ": key '" + key + "' outside any section");
    }
  }

  if (saw_generator && saw_prosumers)
    throw ConfigError("use either [prosumers] or [generator], not both");
  if (saw_prosumers) {
    cfg.generator.reset();
    cfg.prosumers = std::move(ex);
  } else {
    cfg.generator = gen;
  }
  return cfg;
}

[[nodiscard]] inline ScenarioConfig read_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

/// Draws N prosumers; each takes l, w, q in that order from one stream.
[[nodiscard]] inline std::vector<ProsumerParams> generate_prosumers(
    const GeneratorBlock& g) {
  Rng rng(g.seed);
  std::vector<ProsumerParams> out;
  out.reserve(g.n);
  for (std::size_t i = 0; i < g.n; ++i) {
    ProsumerParams p;
    p.l = rng.uniform(g.l_range.lo, g.l_range.hi);
    p.w = rng.uniform(g.w_range.lo, g.w_range.hi);
    p.q = rng.uniform(g.q_range.lo, g.q_range.hi);
    p.q_max = g.q_max;
    p.prospect = g.prospect;
    out.push_back(p);
  }
  return out;
}

/// Expands the configuration into a validated scenario. Array lengths must
/// agree; omitted optional arrays take the generator defaults.
[[nodiscard]] inline Scenario build_scenario(const ScenarioConfig& cfg) {
  Scenario s;
  if (cfg.prosumers) {
    const ExplicitBlock& ex = *cfg.prosumers;
    const std::size_t n = ex.w.size();
    const std::pair<const char*, const std::vector<double>*> arrays[] = {
        {"w", &ex.w},         {"q", &ex.q},
        {"l", &ex.l},         {"q_max", &ex.q_max},
        {"lambda", &ex.lambda}, {"beta_plus", &ex.beta_plus},
        {"beta_minus", &ex.beta_minus}, {"r", &ex.r}};
    for (const auto& [name, arr] : {arrays[0], arrays[1], arrays[2]})
      if (arr->empty())
        throw ConfigError(std::string("key 'prosumers.") + name + "' is required");
    for (const auto& [name, arr] : arrays)
      if (!arr->empty() && arr->size() != n)
        throw ConfigError(std::string("array length mismatch: 'prosumers.w' has ") +
                          std::to_string(n) + " entries but 'prosumers." + name +
                          "' has " + std::to_string(arr->size()));
    const GeneratorBlock defaults;
    auto pick = [](const std::vector<double>& v, std::size_t i, double d) {
      return v.empty() ? d : v[i];
    };
    for (std::size_t i = 0; i < n; ++i) {
      ProsumerParams p;
      p.w = ex.w[i];
      p.q = ex.q[i];
      p.l = ex.l[i];
      p.q_max = pick(ex.q_max, i, defaults.q_max);
      p.prospect.lambda = pick(ex.lambda, i, defaults.prospect.lambda);
      p.prospect.beta_plus = pick(ex.beta_plus, i, defaults.prospect.beta_plus);
      p.prospect.beta_minus = pick(ex.beta_minus, i, defaults.prospect.beta_minus);
      p.prospect.reference = pick(ex.r, i, defaults.prospect.reference);
      s.prosumers.push_back(p);
    }
  } else {
    s.prosumers = generate_prosumers(cfg.generator.value_or(GeneratorBlock{}));
  }

  const MarketBlock& m = cfg.market;
  s.market.alpha = m.alpha.value_or(1.0 / static_cast<double>(s.size()));
  s.market.rho_min = m.rho_min;
  s.market.rho_max = m.rho_max;
  s.market.rho_base = m.rho_base;
  s.market.rho_mar = m.rho_mar;
  s.market.leader_lo = m.leader_lo.value_or(m.rho_min);
  s.market.leader_hi = m.leader_hi.value_or(m.rho_max);
  try {
    s.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("invalid scenario: ") + e.what());
  }
  return s;
}

/// Reads and expands a configuration file; an empty path yields the
/// built-in default scenario.
[[nodiscard]] inline Scenario load_scenario(const std::string& path = {}) {
  return build_scenario(path.empty() ? ScenarioConfig{} : read_config_file(path));
}

}  // namespace prosumer::experiments

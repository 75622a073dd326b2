#include "hierts/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>

namespace hierts {

namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

double parse_double(const std::string& value, int line, const std::string& key) {
  try {
    std::size_t used = 0;
    const double parsed = std::stod(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return parsed;
  } catch (const std::exception&) {
    throw ParseError(line, key, "line " + std::to_string(line) + ": key '" + key +
                                    "' expects a number, got '" + value + "'");
  }
}

long long parse_int(const std::string& value, int line, const std::string& key) {
  long long parsed = 0;
  const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), parsed);
  if (ec != std::errc{} || ptr != value.data() + value.size())
    throw ParseError(line, key, "line " + std::to_string(line) + ": key '" + key +
                                    "' expects an integer, got '" + value + "'");
  return parsed;
}

bool parse_bool(const std::string& value, int line, const std::string& key) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  throw ParseError(line, key, "line " + std::to_string(line) + ": key '" + key +
                                  "' expects a boolean, got '" + value + "'");
}

std::vector<Index> parse_index_list(const std::string& value, int line,
                                    const std::string& key) {
  std::vector<Index> out;
  std::stringstream stream(value);
  std::string item;
  while (std::getline(stream, item, ',')) {
    item = trim(item);
    if (item.empty()) continue;
    out.push_back(static_cast<Index>(parse_int(item, line, key)));
  }
  if (out.empty())
    throw ParseError(line, key,
                     "line " + std::to_string(line) + ": key '" + key + "' expects a list");
  return out;
}

AgentSpec parse_agent_value(const std::string& value, int line) {
  std::stringstream stream(value);
  std::string name;
  stream >> name;
  AgentSpec spec;
  spec.kind = [&] {
    try {
      return agent_kind_from_name(name);
    } catch (const ValidationError& e) {
      throw ParseError(line, "agent", "line " + std::to_string(line) + ": " + e.what());
    }
  }();
  std::string option;
  while (stream >> option) {
    const auto eq = option.find('=');
    if (eq == std::string::npos)
      throw ParseError(line, "agent", "line " + std::to_string(line) +
                                          ": agent option '" + option + "' is not key=value");
    const std::string opt_key = option.substr(0, eq);
    const std::string opt_value = option.substr(eq + 1);
    if (opt_key == "alpha" && spec.kind == AgentKind::LinUCB) {
      spec.options.linucb_alpha = parse_double(opt_value, line, "agent alpha");
    } else {
      throw ParseError(line, opt_key, "line " + std::to_string(line) +
                                          ": unknown agent option '" + opt_key + "' for " +
                                          std::string(agent_kind_name(spec.kind)));
    }
  }
  return spec;
}

std::vector<AgentSpec> default_agents(ExperimentConfig::Preset preset) {
  if (preset == ExperimentConfig::Preset::MovieLens) {
    return {{AgentKind::GHierTS, {}}, {AgentKind::LinTS, {}}, {AgentKind::HierTS, {}}};
  }
  return {{AgentKind::GHierTS, {}},
          {AgentKind::GHierTSFa, {}},
          {AgentKind::LinTS, {}},
          {AgentKind::LinUCB, {}},
          {AgentKind::HierTS, {}}};
}

}  // namespace

void ExperimentConfig::validate() const {
  if (horizon < 1) throw ValidationError("config: horizon must be at least 1");
  if (runs < 1) throw ValidationError("config: runs must be at least 1");
  if (parallelism < 1) throw ValidationError("config: parallelism must be at least 1");
  if (L < 1 || K < 1 || d < 1) throw ValidationError("config: L, K, d must be positive");
  if (sigma <= 0.0) throw ValidationError("config: sigma must be positive");
  if (hyper_var <= 0.0 || cond_var <= 0.0)
    throw ValidationError("config: prior variances must be positive");
  if (jitter < 0.0) throw ValidationError("config: jitter must be nonnegative");
  if (mixing != "uniform" && mixing != "ones")
    throw ValidationError("config: mixing must be 'uniform' or 'ones'");
  if (context_type != "cube" && context_type != "constant")
    throw ValidationError("config: context type must be 'cube' or 'constant'");
  if (context_type == "cube" && !(ctx_low < ctx_high))
    throw ValidationError("config: context cube needs low < high");
  if (context_type == "constant" && d != 1)
    throw ValidationError("config: constant context requires d = 1");
  if (agents.empty()) throw ValidationError("config: at least one agent required");
  if (preset == Preset::MovieLens && model_file.empty())
    throw ValidationError("config: movielens preset requires model_file (run 'ingest' first)");
  if (scale_hyper <= 0.0 || scale_cond <= 0.0)
    throw ValidationError("config: movielens scales must be positive");
}

ExperimentConfig parse_config_text(const std::string& text) {
  ExperimentConfig config;
  config.raw_text = text;

  bool preset_seen = false;
  bool agents_listed = false;
  bool horizon_set = false, runs_set = false, k_set = false;

  std::string section;
  std::istringstream stream(text);
  std::string raw_line;
  int line = 0;
  while (std::getline(stream, raw_line)) {
    ++line;
    std::string content = raw_line;
    const auto comment = content.find('#');
    if (comment != std::string::npos) content = content.substr(0, comment);
    content = trim(content);
    if (content.empty()) continue;

    if (content.front() == '[') {
      if (content.back() != ']')
        throw ParseError(line, content,
                         "line " + std::to_string(line) + ": malformed section header");
      section = trim(content.substr(1, content.size() - 2));
      if (section != "experiment" && section != "model" && section != "context" &&
          section != "agents" && section != "movielens" && section != "sweep")
        throw ParseError(line, section, "line " + std::to_string(line) +
                                            ": unknown section '" + section + "'");
      continue;
    }

    const auto eq = content.find('=');
    if (eq == std::string::npos)
      throw ParseError(line, content,
                       "line " + std::to_string(line) + ": expected key = value");
    const std::string key = trim(content.substr(0, eq));
    const std::string value = trim(content.substr(eq + 1));
    if (key.empty() || value.empty())
      throw ParseError(line, key, "line " + std::to_string(line) + ": empty key or value");

    if (section == "experiment") {
      if (key == "preset") {
        if (value == "synthetic") config.preset = ExperimentConfig::Preset::Synthetic;
        else if (value == "movielens") config.preset = ExperimentConfig::Preset::MovieLens;
        else if (value == "custom") config.preset = ExperimentConfig::Preset::Custom;
        else
          throw ParseError(line, key, "line " + std::to_string(line) +
                                          ": unknown preset '" + value + "'");
        preset_seen = true;
      } else if (key == "horizon") {
        config.horizon = static_cast<Index>(parse_int(value, line, key));
        horizon_set = true;
      } else if (key == "runs") {
        config.runs = static_cast<int>(parse_int(value, line, key));
        runs_set = true;
      } else if (key == "seed") {
        config.base_seed = static_cast<std::uint64_t>(parse_int(value, line, key));
      } else if (key == "parallelism") {
        config.parallelism = static_cast<int>(parse_int(value, line, key));
      } else if (key == "out") {
        config.out_prefix = value;
      } else if (key == "svg") {
        config.svg = parse_bool(value, line, key);
      } else if (key == "jitter") {
        config.jitter = parse_double(value, line, key);
      } else {
        throw ParseError(line, key, "line " + std::to_string(line) +
                                        ": unknown key '" + key + "' in [experiment]");
      }
    } else if (section == "model") {
      if (key == "L") config.L = static_cast<Index>(parse_int(value, line, key));
      else if (key == "K") {
        config.K = static_cast<Index>(parse_int(value, line, key));
        k_set = true;
      } else if (key == "d") config.d = static_cast<Index>(parse_int(value, line, key));
      else if (key == "sigma") config.sigma = parse_double(value, line, key);
      else if (key == "hyper_mean") config.hyper_mean = parse_double(value, line, key);
      else if (key == "hyper_var") config.hyper_var = parse_double(value, line, key);
      else if (key == "cond_var") config.cond_var = parse_double(value, line, key);
      else if (key == "mixing") config.mixing = value;
      else
        throw ParseError(line, key, "line " + std::to_string(line) + ": unknown key '" +
                                        key + "' in [model]");
    } else if (section == "context") {
      if (key == "type") config.context_type = value;
      else if (key == "low") config.ctx_low = parse_double(value, line, key);
      else if (key == "high") config.ctx_high = parse_double(value, line, key);
      else
        throw ParseError(line, key, "line " + std::to_string(line) + ": unknown key '" +
                                        key + "' in [context]");
    } else if (section == "agents") {
      if (key == "agent") {
        config.agents.push_back(parse_agent_value(value, line));
        agents_listed = true;
      } else {
        throw ParseError(line, key, "line " + std::to_string(line) + ": unknown key '" +
                                        key + "' in [agents]");
      }
    } else if (section == "movielens") {
      if (key == "model_file") config.model_file = value;
      else if (key == "K") {
        config.K = static_cast<Index>(parse_int(value, line, key));
        k_set = true;
      } else if (key == "scale_hyper") config.scale_hyper = parse_double(value, line, key);
      else if (key == "scale_cond") config.scale_cond = parse_double(value, line, key);
      else
        throw ParseError(line, key, "line " + std::to_string(line) + ": unknown key '" +
                                        key + "' in [movielens]");
    } else if (section == "sweep") {
      if (key == "K") config.sweep_K = parse_index_list(value, line, key);
      else if (key == "d") config.sweep_d = parse_index_list(value, line, key);
      else
        throw ParseError(line, key, "line " + std::to_string(line) + ": unknown key '" +
                                        key + "' in [sweep]");
    } else {
      throw ParseError(line, key,
                       "line " + std::to_string(line) + ": key outside any section");
    }
  }

  if (!preset_seen)
    throw ValidationError("config: [experiment] preset is required");

  // Preset defaults for anything not set explicitly.
  if (config.preset == ExperimentConfig::Preset::MovieLens) {
    if (!horizon_set) config.horizon = 5000;
    if (!runs_set) config.runs = 20;
    if (!k_set) config.K = 100;
  }
  if (!agents_listed) config.agents = default_agents(config.preset);

  config.validate();
  return config;
}

ExperimentConfig parse_config(const std::string& path) {
  std::ifstream file(path, std::ios::binary);
  if (!file) throw IoError("cannot open config file: " + path);
  std::ostringstream buffer;
  buffer << file.rdbuf();
  return parse_config_text(buffer.str());
}

}  // namespace hierts

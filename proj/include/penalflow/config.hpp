#pragma once

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <regex>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "penalflow/errors.hpp"
#include "penalflow/study.hpp"

namespace penalflow {

namespace detail {

inline std::string trim(std::string_view s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return std::string(s.substr(a, b - a));
}

inline std::string unquote(std::string s) {
  if (s.size() >= 2 && ((s.front() == '"' && s.back() == '"') || (s.front() == '\'' && s.back() == '\'')))
    return s.substr(1, s.size() - 2);
  return s;
}

inline std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= s.size(); ++i) {
    if (i == s.size() || s[i] == sep) {
      out.push_back(trim(s.substr(start, i - start)));
      start = i + 1;
    }
  }
  return out;
}

}  // namespace detail

/// Parses a full floating-point token.
inline double parse_number(std::string_view text) {
  const std::string s = detail::trim(text);
  double v = 0.0;
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (s.empty() || ec != std::errc() || ptr != end || !std::isfinite(v))
    throw ConfigError("'" + s + "' is not a number");
  return v;
}

inline int parse_int(std::string_view text) {
  const std::string s = detail::trim(text);
  int v = 0;
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (s.empty() || ec != std::errc() || ptr != end) throw ConfigError("'" + s + "' is not an integer");
  return v;
}

/// Value list: comma-separated numbers, where `a:b` expands to the decades
/// from a to b inclusive (a and b powers of ten apart).
inline std::vector<double> parse_value_list(std::string_view text) {
  std::vector<double> out;
  for (const auto& item : detail::split(detail::unquote(detail::trim(text)), ',')) {
    if (item.empty()) throw ConfigError("empty entry in value list");
    const auto colon = item.find(':');
    if (colon == std::string::npos) {
      out.push_back(parse_number(item));
      continue;
    }
    const double lo = parse_number(item.substr(0, colon));
    const double hi = parse_number(item.substr(colon + 1));
    if (!(lo > 0.0) || !(hi >= lo)) throw ConfigError("range '" + item + "' must satisfy 0 < lo <= hi");
    const double span = std::log10(hi / lo);
    const long steps = std::lround(span);
    if (std::abs(span - static_cast<double>(steps)) > 1e-9)
      throw ConfigError("range '" + item + "' must span whole decades");
    for (long k = 0; k <= steps; ++k) out.push_back(lo * std::pow(10.0, static_cast<double>(k)));
  }
  return out;
}

inline std::vector<double> parse_penalties(std::string_view text) {
  auto v = parse_value_list(text);
  for (double x : v)
    if (!(x > 0.0)) throw ConfigError("penalty values must be positive");
  return v;
}

/// `n=100*m`, `n = 1e2 * m` or `n=m`.
inline double parse_coupling(std::string_view text) {
  const std::string s = detail::unquote(detail::trim(text));
  static const std::regex scaled(R"(^\s*n\s*=\s*([0-9.eE+\-]+)\s*\*\s*m\s*$)");
  static const std::regex plain(R"(^\s*n\s*=\s*m\s*$)");
  std::smatch match;
  if (std::regex_match(s, plain)) return 1.0;
  if (std::regex_match(s, match, scaled)) {
    const double c = parse_number(match[1].str());
    if (!(c > 0.0)) throw ConfigError("coupling constant must be positive");
    return c;
  }
  throw ConfigError("coupling must look like \"n=100*m\"");
}

/// INI-like document: `key = value` lines, `#` comments, blank lines ignored.
/// `case` is required; everything else has a default.
inline StudyConfig parse_config(std::string_view text) {
  StudyConfig c;
  std::set<std::string> seen;
  std::istringstream in{std::string(text)};
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string line = raw;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
      if (line[i] == '"') quoted = !quoted;
      if (line[i] == '#' && !quoted) {
        line.resize(i);
        break;
      }
    }
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    const std::string where = "line " + std::to_string(line_no);
    if (eq == std::string::npos) throw ConfigError(where + ": expected 'key = value'");
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError(where + ": missing key");
    if (!seen.insert(key).second) throw ConfigError(where + ": key '" + key + "' given twice");
    try {
      const std::string v = detail::unquote(value);
      if (key == "case") c.case_id = parse_case(v);
      else if (key == "h") c.h = parse_number(v);
      else if (key == "nu") c.nu = parse_number(v);
      else if (key == "U") c.U = parse_number(v);
      else if (key == "L") c.L = parse_number(v);
      else if (key == "H") c.H = parse_number(v);
      else if (key == "circle_segments") c.circle_segments = parse_int(v);
      else if (key == "schemes") {
        c.schemes.clear();
        for (const auto& s : detail::split(v, ',')) c.schemes.push_back(parse_scheme(s));
      } else if (key == "penalty.m") c.m_values = parse_penalties(v);
      else if (key == "penalty.n") c.n_values = parse_penalties(v);
      else if (key == "coupling") c.coupling = parse_coupling(v);
      else if (key == "contour.m") c.contour_m = parse_penalties(v);
      else if (key == "contour.n") c.contour_n = parse_penalties(v);
      else if (key == "window") {
        const auto parts = detail::split(v, ':');
        if (parts.size() != 2) throw ConfigError("window must be 'lo:hi'");
        c.window_lo = parse_number(parts[0]);
        c.window_hi = parse_number(parts[1]);
      } else if (key == "profile") c.profile = v;
      else if (key == "threads") c.threads = parse_int(v);
      else if (key == "newton.tol") c.solver.newton_tol = parse_number(v);
      else if (key == "newton.abs_tol") c.solver.abs_tol = parse_number(v);
      else if (key == "newton.roundoff_factor") c.solver.roundoff_factor = parse_number(v);
      else if (key == "newton.max_iter") c.solver.max_newton_iterations = parse_int(v);
      else if (key == "continuation.ratio") c.solver.continuation_ratio = parse_number(v);
      else if (key == "continuation.start") c.solver.continuation_start = parse_number(v);
      else if (key == "linear.solver") c.solver.linear_policy = parse_linear_policy(v);
      else throw ConfigError("unknown key");
    } catch (const ConfigError& e) {
      throw ConfigError(where + ": key '" + key + "': " + e.what());
    }
  }
  if (!seen.contains("case")) throw ConfigError("missing required key 'case'");
  try {
    c.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(std::string("invalid configuration: ") + e.what());
  }
  return c;
}

inline StudyConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config file '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

/// PENALFLOW_THREADS, when set, replaces the thread budget.
inline void apply_environment(StudyConfig& c) {
  if (const char* env = std::getenv("PENALFLOW_THREADS"); env && *env) {
    try {
      c.threads = parse_int(env);
    } catch (const ConfigError&) {
      throw ConfigError(std::string("PENALFLOW_THREADS='") + env + "' is not an integer");
    }
    if (c.threads < 1) throw ConfigError("PENALFLOW_THREADS must be >= 1");
  }
}

}  // namespace penalflow

#pragma once

// Scenario files: a flat key = value document split into [[scenario]] blocks.
// Values are strings ("..."), numbers, or number lists ([1, 2, 3]). Keys of
// the form group.key (group = manifold, field or quantity) carry parameters.
//
//   [[scenario]]
//   name = "kw_s2"
//   manifold = "perturbed_sphere"
//   manifold.n = 2
//   manifold.a0 = 0.1
//   vector_field = "boost"
//   quantity = "scalar_curvature"
//   identity = "kazdan_warner"
//   levels = [2, 3, 4]
//   tol = 1e-6

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "conflab/geometry.hpp"

namespace conflab {

class ScenarioError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Scenario {
  std::string name;
  int line = 0;  // line of the [[scenario]] header
  std::string manifold;
  Params manifold_params;
  std::string vector_field;
  Params field_params;
  std::string quantity;
  Params quantity_params;
  std::string identity;
  std::string tensor;  // gradient_consistency: the tensor the action gradient is compared with
  std::vector<int> levels{2, 3};
  double tol = 1e-6;
  double gate_tol = 1e-8;          // conformal-Killing gate
  double conservation_tol = 1e-6;  // divergence gate
  int samples = 100;
  int seed = 7;
  std::vector<double> faces;  // conserved_current: two parallel hypersurfaces
  int face_axis = 0;
};

struct ScenarioFile {
  std::string path;
  std::vector<Scenario> scenarios;
};

namespace detail {

using ScenarioValue = std::variant<std::string, double, std::vector<double>>;

class ScenarioParser {
 public:
  ScenarioParser(std::string source, std::string origin) : src_(std::move(source)), origin_(std::move(origin)) {}

  ScenarioFile parse() {
    ScenarioFile out;
    out.path = origin_;
    std::vector<std::string> seen;
    std::istringstream in(src_);
    std::string raw;
    while (std::getline(in, raw)) {
      ++line_;
      text_ = strip_comment(raw);
      pos_ = 0;
      skip_ws();
      if (pos_ == text_.size()) continue;
      if (text_.compare(pos_, 2, "[[") == 0) {
        header();
        out.scenarios.push_back({});
        out.scenarios.back().line = line_;
        seen.clear();
        continue;
      }
      if (out.scenarios.empty()) fail("key outside a [[scenario]] block");
      const std::size_t key_col = pos_;
      const std::string key = read_key();
      skip_ws();
      expect('=');
      skip_ws();
      const ScenarioValue v = read_value();
      skip_ws();
      if (pos_ != text_.size()) fail("trailing characters after value");
      if (std::find(seen.begin(), seen.end(), key) != seen.end()) fail_at(key_col, "duplicate key '" + key + "'");
      seen.push_back(key);
      assign(out.scenarios.back(), key, v, key_col);
    }
    std::vector<std::string> names;
    for (const auto& s : out.scenarios) {
      if (s.name.empty()) throw ScenarioError(where(s.line, 1) + "scenario has no name");
      if (s.identity.empty()) throw ScenarioError(where(s.line, 1) + "scenario '" + s.name + "' has no identity");
      if (std::find(names.begin(), names.end(), s.name) != names.end())
        throw ScenarioError(where(s.line, 1) + "duplicate scenario name '" + s.name + "'");
      names.push_back(s.name);
    }
    return out;
  }

 private:
  std::string where(int line, std::size_t col) const {
    return origin_ + ":" + std::to_string(line) + ":" + std::to_string(col) + ": ";
  }
  [[noreturn]] void fail_at(std::size_t col, const std::string& msg) const {
    throw ScenarioError(where(line_, col + 1) + msg);
  }
  [[noreturn]] void fail(const std::string& msg) const { fail_at(pos_, msg); }

  static std::string strip_comment(const std::string& s) {
    bool quoted = false;
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (s[i] == '"') quoted = !quoted;
      if (s[i] == '#' && !quoted) return s.substr(0, i);
    }
    return s;
  }

  void skip_ws() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  void expect(char c) {
    if (pos_ >= text_.size() || text_[pos_] != c) fail(std::string("expected '") + c + "'");
    ++pos_;
  }

  void header() {
    pos_ += 2;
    skip_ws();
    const std::size_t start = pos_;
    while (pos_ < text_.size() && (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_')) ++pos_;
    if (text_.substr(start, pos_ - start) != "scenario") fail_at(start, "only [[scenario]] blocks are allowed");
    skip_ws();
    if (text_.compare(pos_, 2, "]]") != 0) fail("expected ']]'");
    pos_ += 2;
    skip_ws();
    if (pos_ != text_.size()) fail("trailing characters after header");
  }

  std::string read_key() {
    const std::size_t start = pos_;
    int dots = 0;
    while (pos_ < text_.size()) {
      const char c = text_[pos_];
      if (std::isalnum(static_cast<unsigned char>(c)) || c == '_') {
        ++pos_;
      } else if (c == '.') {
        if (++dots > 1) fail("keys nest at most one level");
        ++pos_;
      } else {
        break;
      }
    }
    if (pos_ == start) fail("expected a key");
    return text_.substr(start, pos_ - start);
  }

  double read_number() {
    const char* begin = text_.c_str() + pos_;
    char* end = nullptr;
    const double v = std::strtod(begin, &end);
    if (end == begin) fail("expected a number");
    if (!std::isfinite(v)) fail("number is not finite");
    pos_ += static_cast<std::size_t>(end - begin);
    return v;
  }

  ScenarioValue read_value() {
    if (pos_ >= text_.size()) fail("missing value");
    if (text_[pos_] == '"') {
      const std::size_t close = text_.find('"', pos_ + 1);
      if (close == std::string::npos) fail("unterminated string");
      std::string s = text_.substr(pos_ + 1, close - pos_ - 1);
      pos_ = close + 1;
      return s;
    }
    if (text_[pos_] == '[') {
      ++pos_;
      std::vector<double> xs;
      skip_ws();
      if (pos_ < text_.size() && text_[pos_] == ']') {
        ++pos_;
        return xs;
      }
      while (true) {
        skip_ws();
        xs.push_back(read_number());
        skip_ws();
        if (pos_ < text_.size() && text_[pos_] == ',') {
          ++pos_;
          continue;
        }
        expect(']');
        return xs;
      }
    }
    return read_number();
  }

  template <class T>
  const T& as(const ScenarioValue& v, const std::string& key, const char* kind, std::size_t col) const {
    if (!std::holds_alternative<T>(v)) fail_at(col, "'" + key + "' must be a " + kind);
    return std::get<T>(v);
  }

  int as_int(const ScenarioValue& v, const std::string& key, std::size_t col) const {
    const double d = as<double>(v, key, "number", col);
    if (d != std::floor(d)) fail_at(col, "'" + key + "' must be an integer");
    return static_cast<int>(d);
  }

  void assign(Scenario& s, const std::string& key, const ScenarioValue& v, std::size_t col) const {
    const auto dot = key.find('.');
    if (dot != std::string::npos) {
      const std::string group = key.substr(0, dot), param = key.substr(dot + 1);
      const double d = as<double>(v, key, "number", col);
      if (group == "manifold") s.manifold_params[param] = d;
      else if (group == "field") s.field_params[param] = d;
      else if (group == "quantity") s.quantity_params[param] = d;
      else fail_at(col, "unknown parameter group '" + group + "'");
      return;
    }
    if (key == "name") s.name = as<std::string>(v, key, "string", col);
    else if (key == "manifold") s.manifold = as<std::string>(v, key, "string", col);
    else if (key == "vector_field") s.vector_field = as<std::string>(v, key, "string", col);
    else if (key == "quantity") s.quantity = as<std::string>(v, key, "string", col);
    else if (key == "identity") s.identity = as<std::string>(v, key, "string", col);
    else if (key == "tensor") s.tensor = as<std::string>(v, key, "string", col);
    else if (key == "tol") s.tol = as<double>(v, key, "number", col);
    else if (key == "gate_tol") s.gate_tol = as<double>(v, key, "number", col);
    else if (key == "conservation_tol") s.conservation_tol = as<double>(v, key, "number", col);
    else if (key == "samples") s.samples = as_int(v, key, col);
    else if (key == "seed") s.seed = as_int(v, key, col);
    else if (key == "face_axis") s.face_axis = as_int(v, key, col);
    else if (key == "faces") s.faces = as<std::vector<double>>(v, key, "number list", col);
    else if (key == "levels") {
      s.levels.clear();
      int prev = -1;
      for (double d : as<std::vector<double>>(v, key, "number list", col)) {
        if (d != std::floor(d) || d < 0) fail_at(col, "levels must be non-negative integers");
        if (static_cast<int>(d) <= prev) fail_at(col, "levels must be strictly increasing");
        prev = static_cast<int>(d);
        s.levels.push_back(prev);
      }
      if (s.levels.empty()) fail_at(col, "levels must not be empty");
    } else {
      fail_at(col, "unknown key '" + key + "'");
    }
  }

  std::string src_, origin_;
  std::string text_;
  std::size_t pos_ = 0;
  int line_ = 0;
};

}  // namespace detail

inline ScenarioFile parse_scenarios(const std::string& text, const std::string& origin = "<string>") {
  return detail::ScenarioParser(text, origin).parse();
}

inline ScenarioFile load_scenarios(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ScenarioError(path + ": cannot open scenario file");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_scenarios(ss.str(), path);
}

}  // namespace conflab

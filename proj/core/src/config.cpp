// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The FuDoBa Authors

#include "fudoba/config.hpp"

#include <charconv>
#include <sstream>

#include "fudoba/error.hpp"
#include "fudoba/io_util.hpp"
#include "fudoba/random.hpp"

namespace fudoba {
namespace {

[[noreturn]] void parse_error(int line, const std::string& what) {
  throw Error(ErrorCode::kParse, "config line " + std::to_string(line) + ": " + what);
}

std::string_view strip_comment(std::string_view line) {
  bool in_string = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '"' && (i == 0 || line[i - 1] != '\\')) in_string = !in_string;
    if (line[i] == '#' && !in_string) return line.substr(0, i);
  }
  return line;
}

TomlValue::Scalar parse_scalar(std::string_view s, int line) {
  s = trim(s);
  if (s.empty()) parse_error(line, "missing value");
  if (s.front() == '"') {
    if (s.size() < 2 || s.back() != '"') parse_error(line, "unterminated string");
    std::string out;
    for (std::size_t i = 1; i + 1 < s.size(); ++i) {
      if (s[i] == '\\' && i + 2 < s.size()) {
        const char c = s[++i];
        switch (c) {
          case 'n': out += '\n'; break;
          case 't': out += '\t'; break;
          case '"': out += '"'; break;
          case '\\': out += '\\'; break;
          default: parse_error(line, std::string("unsupported escape \\") + c);
        }
      } else {
        out += s[i];
      }
    }
    return out;
  }
  if (s == "true") return true;
  if (s == "false") return false;
  std::string digits;
  for (char c : s) {
    if (c != '_') digits += c;
  }
  const char* first = digits.data();
  const char* last = first + digits.size();
  if (*first == '+') ++first;
  const bool looks_float = digits.find_first_of(".eE") != std::string::npos;
  if (!looks_float) {
    std::int64_t v = 0;
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec == std::errc() && ptr == last) return v;
  } else {
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec == std::errc() && ptr == last) return v;
  }
  parse_error(line, "cannot parse value '" + std::string(s) + "'");
}

std::vector<std::string_view> split_array_items(std::string_view body, int line) {
  std::vector<std::string_view> items;
  bool in_string = false;
  std::size_t start = 0;
  for (std::size_t i = 0; i < body.size(); ++i) {
    if (body[i] == '"' && (i == 0 || body[i - 1] != '\\')) in_string = !in_string;
    if (body[i] == '[' && !in_string) parse_error(line, "nested arrays are not supported");
    if (body[i] == ',' && !in_string) {
      items.push_back(body.substr(start, i - start));
      start = i + 1;
    }
  }
  auto tail = trim(body.substr(start));
  if (!tail.empty()) items.push_back(body.substr(start));
  return items;
}

const char* type_name(const TomlValue::Scalar& s) {
  switch (s.index()) {
    case 0: return "string";
    case 1: return "integer";
    case 2: return "float";
    default: return "boolean";
  }
}

const TomlValue::Scalar& scalar_of(const TomlValue& v) {
  if (v.is_array()) throw Error(ErrorCode::kInvalidArgument, "expected a scalar, found an array");
  return std::get<0>(v.value);
}

double scalar_to_double(const TomlValue::Scalar& s) {
  if (auto* i = std::get_if<std::int64_t>(&s)) return static_cast<double>(*i);
  if (auto* d = std::get_if<double>(&s)) return *d;
  throw Error(ErrorCode::kInvalidArgument, std::string("expected a number, found a ") + type_name(s));
}

std::int64_t scalar_to_int(const TomlValue::Scalar& s) {
  if (auto* i = std::get_if<std::int64_t>(&s)) return *i;
  throw Error(ErrorCode::kInvalidArgument, std::string("expected an integer, found a ") + type_name(s));
}

std::string scalar_to_string(const TomlValue::Scalar& s) {
  if (auto* str = std::get_if<std::string>(&s)) return *str;
  throw Error(ErrorCode::kInvalidArgument, std::string("expected a string, found a ") + type_name(s));
}

int to_int(const TomlValue& v, const std::string& key) {
  try {
    const auto i = v.as_int();
    if (i < std::numeric_limits<int>::min() || i > std::numeric_limits<int>::max()) {
      throw Error(ErrorCode::kInvalidArgument, "out of range");
    }
    return static_cast<int>(i);
  } catch (const Error& e) {
    throw Error(ErrorCode::kInvalidArgument, key + ": " + e.what());
  }
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  return path.is_absolute() || base.empty() ? path : base / path;
}

}  // namespace

std::string TomlValue::as_string() const { return scalar_to_string(scalar_of(*this)); }
std::int64_t TomlValue::as_int() const { return scalar_to_int(scalar_of(*this)); }
double TomlValue::as_double() const { return scalar_to_double(scalar_of(*this)); }

bool TomlValue::as_bool() const {
  const auto& s = scalar_of(*this);
  if (auto* b = std::get_if<bool>(&s)) return *b;
  throw Error(ErrorCode::kInvalidArgument, std::string("expected a boolean, found a ") + type_name(s));
}

std::vector<std::string> TomlValue::as_string_array() const {
  if (!is_array()) throw Error(ErrorCode::kInvalidArgument, "expected an array");
  std::vector<std::string> out;
  for (const auto& s : std::get<1>(value)) out.push_back(scalar_to_string(s));
  return out;
}

std::vector<std::int64_t> TomlValue::as_int_array() const {
  if (!is_array()) throw Error(ErrorCode::kInvalidArgument, "expected an array");
  std::vector<std::int64_t> out;
  for (const auto& s : std::get<1>(value)) out.push_back(scalar_to_int(s));
  return out;
}

std::vector<double> TomlValue::as_double_array() const {
  if (!is_array()) throw Error(ErrorCode::kInvalidArgument, "expected an array");
  std::vector<double> out;
  for (const auto& s : std::get<1>(value)) out.push_back(scalar_to_double(s));
  return out;
}

TomlDocument TomlDocument::parse(std::string_view text) {
  TomlDocument doc;
  std::string section;
  std::istringstream in{std::string(text)};
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto line = trim(strip_comment(raw));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.size() < 3 || line.back() != ']' || line[1] == '[') {
        parse_error(line_no, "bad section header");
      }
      section = std::string(trim(line.substr(1, line.size() - 2)));
      if (section.find('.') != std::string::npos) parse_error(line_no, "nested tables are not supported");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) parse_error(line_no, "expected key = value");
    std::string key(trim(line.substr(0, eq)));
    if (key.size() >= 2 && key.front() == '"' && key.back() == '"') key = key.substr(1, key.size() - 2);
    if (key.empty()) parse_error(line_no, "empty key");
    const auto rhs = trim(line.substr(eq + 1));
    TomlValue value;
    if (!rhs.empty() && rhs.front() == '[') {
      if (rhs.back() != ']') parse_error(line_no, "arrays must close on the same line");
      std::vector<TomlValue::Scalar> items;
      for (auto item : split_array_items(rhs.substr(1, rhs.size() - 2), line_no)) {
        items.push_back(parse_scalar(item, line_no));
      }
      value.value = std::move(items);
    } else if (!rhs.empty() && rhs.front() == '{') {
      parse_error(line_no, "inline tables are not supported");
    } else {
      value.value = parse_scalar(rhs, line_no);
    }
    std::string dotted = section.empty() ? key : section + "." + key;
    if (doc.find(dotted)) parse_error(line_no, "duplicate key " + dotted);
    doc.entries_.emplace_back(std::move(dotted), std::move(value));
  }
  return doc;
}

TomlDocument TomlDocument::load(const std::filesystem::path& path) { return parse(read_file(path)); }

const TomlValue* TomlDocument::find(std::string_view dotted_key) const {
  for (const auto& [k, v] : entries_) {
    if (k == dotted_key) return &v;
  }
  return nullptr;
}

std::vector<std::string> TomlDocument::keys(std::string_view section) const {
  std::vector<std::string> out;
  const std::string prefix = std::string(section) + ".";
  for (const auto& [k, v] : entries_) {
    if (k.rfind(prefix, 0) == 0) out.push_back(k.substr(prefix.size()));
  }
  return out;
}

void ExperimentConfig::apply(const TomlDocument& doc, const std::filesystem::path& base_dir) {
  for (const auto& [key, value] : doc.entries()) {
    const auto dot = key.find('.');
    const std::string section = dot == std::string::npos ? "" : key.substr(0, dot);
    const std::string name = dot == std::string::npos ? key : key.substr(dot + 1);
    try {
      if (section == "modalities") {
        modalities.emplace_back(name, resolve(base_dir, value.as_string()));
      } else if (key == "data.labels") {
        labels = resolve(base_dir, value.as_string());
      } else if (key == "data.name") {
        dataset_name = value.as_string();
      } else if (key == "search.l_choices") {
        l_choices.clear();
        for (auto l : value.as_int_array()) l_choices.push_back(static_cast<int>(l));
      } else if (key == "search.alpha_choices") {
        alpha_choices = value.as_double_array();
      } else if (key == "search.budget") {
        budget = to_int(value, key);
      } else if (key == "search.n_init") {
        n_init = to_int(value, key);
      } else if (key == "search.max_candidates") {
        max_candidates = static_cast<std::size_t>(to_int(value, key));
      } else if (key == "run.seed") {
        const auto s = value.as_int();
        if (s < 0) throw Error(ErrorCode::kInvalidArgument, "seed must be non-negative");
        seed = static_cast<std::uint64_t>(s);
      } else if (key == "run.threads") {
        threads = to_int(value, key);
      } else if (key == "run.output_dir") {
        output_dir = resolve(base_dir, value.as_string());
      } else if (key == "cv.folds") {
        folds = to_int(value, key);
      } else if (key == "classifier.l2_lambda") {
        classifier.l2_lambda = value.as_double();
      } else if (key == "classifier.max_iters") {
        classifier.max_iters = to_int(value, key);
      } else if (key == "classifier.tolerance") {
        classifier.tolerance = value.as_double();
      } else if (key == "classifier.learning_rate") {
        classifier.learning_rate = value.as_double();
      } else if (key == "classifier.time_limit_seconds") {
        classifier.time_limit_seconds = value.as_double();
      } else if (key == "norm.w1") {
        norm.w1 = value.as_double();
      } else if (key == "norm.w2") {
        norm.w2 = value.as_double();
      } else if (key == "embed.base_url") {
        embed.base_url = value.as_string();
      } else if (key == "embed.model") {
        embed.model = value.as_string();
      } else if (key == "embed.batch_size") {
        embed.batch_size = to_int(value, key);
      } else if (key == "embed.timeout_seconds") {
        embed.timeout_seconds = to_int(value, key);
      } else if (key == "embed.max_retries") {
        embed.max_retries = to_int(value, key);
      } else if (key == "embed.cache_dir") {
        embed.cache_dir = resolve(base_dir, value.as_string());
      } else if (key == "embed.api_key") {
        throw Error(ErrorCode::kInvalidArgument, "API keys are read from FUDOBA_API_KEY only");
      } else {
        throw Error(ErrorCode::kInvalidArgument, "unknown key");
      }
    } catch (const Error& e) {
      if (e.code() == ErrorCode::kInvalidArgument && std::string(e.what()).find(key) == std::string::npos) {
        throw Error(ErrorCode::kInvalidArgument, "config key '" + key + "': " + e.what());
      }
      throw;
    }
  }
}

SearchSpace ExperimentConfig::search_space() const {
  SearchSpace space;
  for (const auto& [name, path] : modalities) space.modalities.push_back(name);
  space.l_choices = l_choices;
  space.alpha_choices = alpha_choices;
  space.validate();
  return space;
}

CVConfig ExperimentConfig::cv_config() const {
  CVConfig cv;
  cv.k = folds;
  cv.seed = derive_seed(require_seed(), "folds");
  cv.classifier = classifier;
  cv.threads = threads;
  cv.validate();
  return cv;
}

std::uint64_t ExperimentConfig::require_seed() const {
  if (!seed) throw Error(ErrorCode::kInvalidArgument, "a seed is required (run.seed or --seed)");
  return *seed;
}

void ExperimentConfig::validate_for_run() const {
  require_seed();
  if (modalities.empty()) throw Error(ErrorCode::kInvalidArgument, "no modalities configured");
  for (const auto& [name, path] : modalities) {
    if (!std::filesystem::exists(path)) {
      throw Error(ErrorCode::kInvalidArgument, "modality '" + name + "' file not found: " + path.string());
    }
  }
  if (labels.empty()) throw Error(ErrorCode::kInvalidArgument, "no labels file configured");
  if (!std::filesystem::exists(labels)) throw Error(ErrorCode::kInvalidArgument, "labels file not found: " + labels.string());
  if (budget < 1) throw Error(ErrorCode::kInvalidArgument, "budget must be >= 1");
  if (n_init < 1) throw Error(ErrorCode::kInvalidArgument, "n_init must be >= 1");
  if (threads < 1) throw Error(ErrorCode::kInvalidArgument, "threads must be >= 1");
  norm.validate();
  classifier.validate();
  search_space();
  cv_config();
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  ExperimentConfig cfg;
  cfg.apply(TomlDocument::load(path), path.parent_path());
  return cfg;
}

}  // namespace fudoba

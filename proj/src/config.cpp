#include "pccal/config.hpp"

#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "pccal/errors.hpp"
#include "pccal/field_io.hpp"

namespace pccal {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

KeyValueConfig KeyValueConfig::parse(std::istream& in, const std::string& source) {
  KeyValueConfig cfg;
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ValidationError(fmt::format("{}:{}: expected 'key = value'", source, number));
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw ValidationError(fmt::format("{}:{}: empty key", source, number));
    if (cfg.has(key)) throw ValidationError(fmt::format("{}:{}: duplicate key '{}'", source, number, key));
    cfg.values_[key] = value;
  }
  return cfg;
}

KeyValueConfig KeyValueConfig::read(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError(fmt::format("cannot read config file '{}'", path.string()));
  KeyValueConfig cfg = parse(in, path.string());
  cfg.base_dir_ = path.has_parent_path() ? path.parent_path() : std::filesystem::path(".");
  return cfg;
}

std::optional<std::string> KeyValueConfig::get(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return std::nullopt;
  return it->second;
}

std::string KeyValueConfig::require(const std::string& key) const {
  const auto v = get(key);
  if (!v || v->empty()) throw ValidationError(fmt::format("missing required setting '{}'", key));
  return *v;
}

double KeyValueConfig::get_double(const std::string& key, double fallback) const {
  const auto v = get(key);
  return v ? parse_double(*v, key) : fallback;
}

long KeyValueConfig::get_int(const std::string& key, long fallback) const {
  const auto v = get(key);
  if (!v) return fallback;
  try {
    std::size_t used = 0;
    const long out = std::stol(*v, &used);
    if (used != v->size()) throw std::invalid_argument("trailing characters");
    return out;
  } catch (const std::exception&) {
    throw ValidationError(fmt::format("setting '{}' = '{}' is not an integer", key, *v));
  }
}

bool KeyValueConfig::get_bool(const std::string& key, bool fallback) const {
  const auto v = get(key);
  if (!v) return fallback;
  if (*v == "true" || *v == "1" || *v == "yes") return true;
  if (*v == "false" || *v == "0" || *v == "no") return false;
  throw ValidationError(fmt::format("setting '{}' = '{}' is not a boolean", key, *v));
}

std::vector<double> KeyValueConfig::get_doubles(const std::string& key) const {
  return parse_number_list(require(key), key);
}

std::optional<std::filesystem::path> KeyValueConfig::get_path(const std::string& key) const {
  const auto v = get(key);
  if (!v || v->empty()) return std::nullopt;
  std::filesystem::path p(*v);
  return p.is_absolute() ? p : base_dir_ / p;
}

std::vector<std::string> KeyValueConfig::keys_with_prefix(const std::string& prefix) const {
  std::vector<std::string> out;
  for (const auto& [k, v] : values_)
    if (k.rfind(prefix, 0) == 0) out.push_back(k);
  return out;
}

void KeyValueConfig::check_known(const std::set<std::string>& keys, const std::vector<std::string>& prefixes) const {
  for (const auto& [k, v] : values_) {
    if (keys.count(k)) continue;
    bool ok = false;
    for (const auto& p : prefixes) ok = ok || (k.rfind(p, 0) == 0 && k.size() > p.size());
    if (!ok) throw ValidationError(fmt::format("unknown setting '{}'", k));
  }
}

std::vector<double> parse_number_list(const std::string& text, const std::string& context) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_double(trim(item), context));
  if (out.empty()) throw ValidationError(fmt::format("'{}' needs at least one number", context));
  return out;
}

}  // namespace pccal

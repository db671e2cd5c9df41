#include "deqmri/keyvalue.hpp"
#include "deqmri/types.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace deqmri {
namespace {

auto trim(std::string const &s) -> std::string
{
  auto const b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) { return {}; }
  auto const e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

} // namespace

auto KeyValue::parse(std::string const &text, std::string const &origin) -> KeyValue
{
  KeyValue kv;
  kv.origin_ = origin;
  std::istringstream in{text};
  std::string line;
  long lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto const hash = line.find('#'); hash != std::string::npos) { line.resize(hash); }
    line = trim(line);
    if (line.empty()) { continue; }
    auto const eq = line.find('=');
    if (eq == std::string::npos) {
      throw FormatError(origin + ":" + std::to_string(lineno) + ": expected 'key = value', got '" + line + "'");
    }
    auto key = trim(line.substr(0, eq));
    if (key.empty()) { throw FormatError(origin + ":" + std::to_string(lineno) + ": empty key"); }
    kv.set(key, trim(line.substr(eq + 1)));
  }
  return kv;
}

auto KeyValue::load(std::filesystem::path const &path) -> KeyValue
{
  std::ifstream in{path, std::ios::binary};
  if (!in) { throw FormatError("cannot read '" + path.string() + "'"); }
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), path.string());
}

void KeyValue::save(std::filesystem::path const &path) const
{
  std::ofstream out{path, std::ios::binary | std::ios::trunc};
  if (!out) { throw FormatError("cannot write '" + path.string() + "'"); }
  out << str();
  if (!out) { throw FormatError("write failed for '" + path.string() + "'"); }
}

auto KeyValue::str() const -> std::string
{
  std::string out;
  for (auto const &k : order_) {
    out += k + " = " + values_.at(k) + "\n";
  }
  return out;
}

void KeyValue::set(std::string const &key, std::string value)
{
  if (values_.count(key) == 0) { order_.push_back(key); }
  values_[key] = std::move(value);
}

void KeyValue::set(std::string const &key, double value)
{
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  set(key, std::string{buf});
}

auto KeyValue::get(std::string const &key) const -> std::string const &
{
  auto it = values_.find(key);
  if (it == values_.end()) { throw FormatError(origin_ + ": missing key '" + key + "'"); }
  return it->second;
}

auto KeyValue::get_long(std::string const &key) const -> long
{
  auto const &s = get(key);
  long v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size()) {
    throw FormatError(origin_ + ": key '" + key + "' is not an integer: '" + s + "'");
  }
  return v;
}

auto KeyValue::get_u64(std::string const &key) const -> std::uint64_t
{
  auto const &s = get(key);
  std::uint64_t v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size()) {
    throw FormatError(origin_ + ": key '" + key + "' is not an unsigned integer: '" + s + "'");
  }
  return v;
}

auto KeyValue::get_double(std::string const &key) const -> double
{
  auto const &s = get(key);
  try {
    std::size_t used = 0;
    double const v = std::stod(s, &used);
    if (used != s.size()) { throw std::invalid_argument{s}; }
    return v;
  } catch (std::exception const &) {
    throw FormatError(origin_ + ": key '" + key + "' is not a number: '" + s + "'");
  }
}

auto KeyValue::get_or(std::string const &key, std::string const &fallback) const -> std::string
{
  return has(key) ? get(key) : fallback;
}

auto KeyValue::get_long_or(std::string const &key, long fallback) const -> long
{
  return has(key) ? get_long(key) : fallback;
}

auto KeyValue::get_double_or(std::string const &key, double fallback) const -> double
{
  return has(key) ? get_double(key) : fallback;
}

void KeyValue::merge(KeyValue const &other)
{
  for (auto const &k : other.order_) {
    set(k, other.values_.at(k));
  }
}

} // namespace deqmri

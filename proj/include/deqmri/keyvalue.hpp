#pragma once

// Flat "key = value" text documents: dataset/checkpoint manifests and CLI
// config files. '#' starts a comment; blank lines are ignored; order of keys
// is preserved on write.

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace deqmri {

class KeyValue
{
public:
  static auto parse(std::string const &text, std::string const &origin = "<text>") -> KeyValue;
  static auto load(std::filesystem::path const &path) -> KeyValue;

  void save(std::filesystem::path const &path) const;
  auto str() const -> std::string;

  auto has(std::string const &key) const -> bool { return values_.count(key) != 0; }
  void set(std::string const &key, std::string value);
  void set(std::string const &key, long value) { set(key, std::to_string(value)); }
  void set(std::string const &key, double value);
  void set(std::string const &key, std::uint64_t value) { set(key, std::to_string(value)); }

  // Throw FormatError naming the key (and origin) when missing or unparsable.
  auto get(std::string const &key) const -> std::string const &;
  auto get_long(std::string const &key) const -> long;
  auto get_u64(std::string const &key) const -> std::uint64_t;
  auto get_double(std::string const &key) const -> double;

  auto get_or(std::string const &key, std::string const &fallback) const -> std::string;
  auto get_long_or(std::string const &key, long fallback) const -> long;
  auto get_double_or(std::string const &key, double fallback) const -> double;

  // Later values override earlier ones.
  void merge(KeyValue const &other);

  auto keys() const -> std::vector<std::string> const & { return order_; }
  auto origin() const -> std::string const & { return origin_; }

private:
  std::map<std::string, std::string> values_;
  std::vector<std::string> order_;
  std::string origin_ = "<memory>";
};

} // namespace deqmri

#include "lasan/kv.hpp"

#include <charconv>
#include <sstream>

#include "lasan/errors.hpp"

namespace lasan {

namespace {
constexpr const char* kModule = "config";

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

[[noreturn]] void bad(const std::string& key, const std::string& value, const char* want) {
  throw ConfigError(kModule, "key '" + key + "': cannot parse '" + value + "' as " + want);
}
}  // namespace

KvList parse_kv(std::string_view text, const std::string& source) {
  KvList out;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    ++line_no;
    const std::string line = trim(text.substr(pos, nl - pos));
    pos = nl + 1;
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos || trim(line.substr(0, eq)).empty())
      throw ConfigError(kModule, source + ":" + std::to_string(line_no) + ": expected key=value, got '" + line + "'");
    out.emplace_back(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return out;
}

std::string format_kv(const KvList& kv) {
  std::string s;
  for (const auto& [k, v] : kv) s += k + "=" + v + "\n";
  return s;
}

std::size_t kv_size(const std::string& key, const std::string& value) {
  std::size_t v = 0;
  auto [p, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
  if (ec != std::errc() || p != value.data() + value.size()) bad(key, value, "a nonnegative integer");
  return v;
}

std::uint64_t kv_u64(const std::string& key, const std::string& value) {
  std::uint64_t v = 0;
  auto [p, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
  if (ec != std::errc() || p != value.data() + value.size()) bad(key, value, "an unsigned integer");
  return v;
}

double kv_double(const std::string& key, const std::string& value) {
  double v = 0;
  auto [p, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
  if (ec != std::errc() || p != value.data() + value.size()) bad(key, value, "a number");
  return v;
}

bool kv_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  bad(key, value, "a boolean");
}

std::vector<std::string> kv_string_list(const std::string&, const std::string& value) {
  std::vector<std::string> out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::vector<std::size_t> kv_size_list(const std::string& key, const std::string& value) {
  std::vector<std::size_t> out;
  for (const auto& s : kv_string_list(key, value)) out.push_back(kv_size(key, s));
  return out;
}

std::vector<double> kv_double_list(const std::string& key, const std::string& value) {
  std::vector<double> out;
  for (const auto& s : kv_string_list(key, value)) out.push_back(kv_double(key, s));
  return out;
}

std::string format_double(double v) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, p);
}

}  // namespace lasan

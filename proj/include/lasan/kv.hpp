#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace lasan {

// Ordered key=value pairs: the flat text form shared by run configs and
// checkpoint headers.
using KvList = std::vector<std::pair<std::string, std::string>>;

// Parses "key=value" lines; blank lines and '#' comments are skipped.
// Errors name `source` and the line number.
KvList parse_kv(std::string_view text, const std::string& source);
std::string format_kv(const KvList& kv);

// Typed conversions; failures are ConfigErrors naming the key.
std::size_t kv_size(const std::string& key, const std::string& value);
std::uint64_t kv_u64(const std::string& key, const std::string& value);
double kv_double(const std::string& key, const std::string& value);
bool kv_bool(const std::string& key, const std::string& value);
std::vector<std::size_t> kv_size_list(const std::string& key, const std::string& value);
std::vector<double> kv_double_list(const std::string& key, const std::string& value);
std::vector<std::string> kv_string_list(const std::string& key, const std::string& value);

// Shortest text that parses back to the same double.
std::string format_double(double v);
template <typename T>
std::string join(const std::vector<T>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ',';
    if constexpr (std::is_floating_point_v<T>)
      s += format_double(v[i]);
    else if constexpr (std::is_same_v<T, std::string>)
      s += v[i];
    else
      s += std::to_string(v[i]);
  }
  return s;
}

}  // namespace lasan

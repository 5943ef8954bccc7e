#pragma once

#include <chrono>
#include <optional>
#include <string>

#include <json.hpp>

namespace sqbc::detail {

struct HttpTarget {
  std::string origin;  // scheme://host[:port]
  std::string prefix;  // path below the origin, no trailing slash
};

HttpTarget parse_base_url(const std::string& base_url);

// POSTs a JSON body and parses the JSON reply. Transport failures and
// non-2xx statuses raise Error(kEndpoint).
nlohmann::json post_json(const HttpTarget& target, const std::string& path,
                         const nlohmann::json& body, std::chrono::milliseconds timeout,
                         const std::optional<std::string>& bearer = std::nullopt);

std::optional<std::string> env_value(const char* name);

}  // namespace sqbc::detail

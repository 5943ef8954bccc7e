#include "http_util.hpp"

#include <cstdlib>

#include <httplib.h>

#include "sqbc/error.hpp"

namespace sqbc::detail {

HttpTarget parse_base_url(const std::string& base_url) {
  const auto scheme_end = base_url.find("://");
  if (scheme_end == std::string::npos)
    throw Error(ErrorCode::kInvalidArgument, "base url '" + base_url + "' lacks a scheme");
  const auto path_start = base_url.find('/', scheme_end + 3);
  HttpTarget target;
  target.origin = base_url.substr(0, path_start);
  if (path_start != std::string::npos) target.prefix = base_url.substr(path_start);
  while (!target.prefix.empty() && target.prefix.back() == '/') target.prefix.pop_back();
  return target;
}

nlohmann::json post_json(const HttpTarget& target, const std::string& path,
                         const nlohmann::json& body, std::chrono::milliseconds timeout,
                         const std::optional<std::string>& bearer) {
  httplib::Client client(target.origin);
  client.set_connection_timeout(timeout);
  client.set_read_timeout(timeout);
  client.set_write_timeout(timeout);
  if (bearer) client.set_bearer_token_auth(*bearer);

  const auto url = target.prefix + path;
  auto res = client.Post(url, body.dump(), "application/json");
  if (!res)
    throw Error(ErrorCode::kEndpoint, "POST " + target.origin + url + " failed: " +
                                          httplib::to_string(res.error()));
  if (res->status < 200 || res->status >= 300)
    throw Error(ErrorCode::kEndpoint, "POST " + target.origin + url + " returned HTTP " +
                                          std::to_string(res->status) + ": " + res->body);
  try {
    return nlohmann::json::parse(res->body);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::kEndpoint, "POST " + target.origin + url +
                                          " returned invalid JSON: " + e.what());
  }
}

std::optional<std::string> env_value(const char* name) {
  const char* value = std::getenv(name);
  if (value == nullptr || *value == '\0') return std::nullopt;
  return std::string(value);
}

}  // namespace sqbc::detail

#include "acpo/http.hpp"

#include <cstdlib>

#include <httplib.h>

#include "acpo/error.hpp"

namespace acpo {
namespace {

struct SplitUrl {
  std::string origin;  // scheme://host[:port]
  std::string path;
};

SplitUrl split_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) {
    throw Error(ErrorCode::InvalidArgument, "URL lacks a scheme: " + url);
  }
  const auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

class HttplibTransport final : public Transport {
 public:
  HttpResponse post_json(const std::string& url, const std::string& body,
                         const std::optional<std::string>& bearer_token,
                         std::chrono::milliseconds timeout) override {
    const auto [origin, path] = split_url(url);
    httplib::Client client(origin);
    client.set_connection_timeout(timeout);
    client.set_read_timeout(timeout);
    client.set_write_timeout(timeout);
    httplib::Headers headers;
    if (bearer_token) headers.emplace("Authorization", "Bearer " + *bearer_token);
    auto res = client.Post(path, headers, body, "application/json");
    if (!res) return {0, httplib::to_string(res.error())};
    return {res->status, res->body};
  }
};

}  // namespace

std::shared_ptr<Transport> make_http_transport() { return std::make_shared<HttplibTransport>(); }

std::optional<std::string> api_key_from_env(const char* var) {
  const char* v = std::getenv(var);
  if (v == nullptr || *v == '\0') return std::nullopt;
  return std::string(v);
}

}  // namespace acpo

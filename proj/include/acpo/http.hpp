#pragma once
// Minimal JSON-over-HTTP transport used by the chat and embedding clients.
// Tests substitute their own Transport to script failures.

#include <chrono>
#include <memory>
#include <optional>
#include <string>

namespace acpo {

struct HttpResponse {
  int status = 0;  // 0 means the connection itself failed
  std::string body;
};

class Transport {
 public:
  virtual ~Transport() = default;
  // POSTs a JSON body to a full URL ("http[s]://host[:port]/path").
  virtual HttpResponse post_json(const std::string& url, const std::string& body,
                                 const std::optional<std::string>& bearer_token,
                                 std::chrono::milliseconds timeout) = 0;
};

std::shared_ptr<Transport> make_http_transport();

// Reads the API key from the given environment variable, if set and non-empty.
std::optional<std::string> api_key_from_env(const char* var);

}  // namespace acpo

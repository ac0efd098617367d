#include "pindec/chat.hpp"

#include <cstdlib>

#include "httplib.h"
#include "json.hpp"
#include "pindec/prompt.hpp"
#include "pindec/util.hpp"

namespace pindec::refine {

namespace {

struct ParsedUrl {
  std::string host;
  int port = 80;
  std::string path = "/v1/chat/completions";
};

bool parse_url(const std::string& url, ParsedUrl& out, std::string& error) {
  std::string rest;
  if (url.rfind("http://", 0) == 0) {
    rest = url.substr(7);
  } else if (url.rfind("https://", 0) == 0) {
    // TLS is not linked in; treat as unreachable so the caller falls back
    error = "https endpoints are not supported";
    return false;
  } else {
    error = "unsupported URL scheme";
    return false;
  }
  size_t slash = rest.find('/');
  std::string hostport = slash == std::string::npos ? rest : rest.substr(0, slash);
  if (slash != std::string::npos && slash + 1 < rest.size())
    out.path = rest.substr(slash);
  size_t colon = hostport.find(':');
  if (colon == std::string::npos) {
    out.host = hostport;
  } else {
    out.host = hostport.substr(0, colon);
    try {
      out.port = std::stoi(hostport.substr(colon + 1));
    } catch (...) {
      error = "bad port";
      return false;
    }
  }
  if (out.host.empty()) {
    error = "empty host";
    return false;
  }
  return true;
}

ChatOutcome fallback(const std::string& text, const std::string& why) {
  return ChatOutcome{text, false, why};
}

}  // namespace

ChatOutcome chat_refine(const std::string& instruction_input,
                        const ChatEndpoint& endpoint,
                        const std::string& fallback_text) {
  ParsedUrl url;
  std::string why;
  if (!parse_url(endpoint.url, url, why)) return fallback(fallback_text, why);

  nlohmann::json body;
  body["model"] = endpoint.model;
  body["temperature"] = 0;
  body["messages"] = {
      {{"role", "system"}, {"content", prompt::kSystemPrompt}},
      {{"role", "user"}, {"content", instruction_input}},
  };

  try {
    httplib::Client client(url.host, url.port);
    client.set_connection_timeout(0, endpoint.timeout_ms * 1000);
    client.set_read_timeout(0, endpoint.timeout_ms * 1000);
    client.set_write_timeout(0, endpoint.timeout_ms * 1000);
    httplib::Headers headers;
    if (!endpoint.token_env.empty()) {
      if (const char* token = std::getenv(endpoint.token_env.c_str()))
        headers.emplace("Authorization", std::string("Bearer ") + token);
    }
    auto res = client.Post(url.path, headers, body.dump(), "application/json");
    if (!res) return fallback(fallback_text, "connection failed");
    if (res->status < 200 || res->status >= 300)
      return fallback(fallback_text,
                      "status " + std::to_string(res->status));
    nlohmann::json reply = nlohmann::json::parse(res->body, nullptr, false);
    if (reply.is_discarded())
      return fallback(fallback_text, "unparseable body");
    const auto& choices = reply.find("choices");
    if (choices == reply.end() || !choices->is_array() || choices->empty())
      return fallback(fallback_text, "no choices in reply");
    const auto& first = (*choices)[0];
    if (!first.contains("message") || !first["message"].contains("content") ||
        !first["message"]["content"].is_string())
      return fallback(fallback_text, "no message content");
    std::string text(
        util::trim(first["message"]["content"].get<std::string>()));
    if (text.empty()) return fallback(fallback_text, "empty content");
    return ChatOutcome{std::move(text), true, ""};
  } catch (const std::exception& e) {
    return fallback(fallback_text, e.what());
  }
}

}  // namespace pindec::refine

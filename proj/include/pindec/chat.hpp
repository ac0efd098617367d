#pragma once

#include <string>

namespace pindec::refine {

struct ChatEndpoint {
  std::string url;        // http://host:port[/path]; default path is the
                          // OpenAI-compatible /v1/chat/completions
  std::string model;
  std::string token_env;  // environment variable holding the bearer token
  int timeout_ms = 5000;
  int max_concurrency = 4;
};

struct ChatOutcome {
  std::string text;
  bool ok = false;        // false: fallback text was used
  std::string error;      // reason when ok is false
};

// Sends the instruction input as a chat completion at temperature 0 and
// returns the first message text, whitespace-trimmed. Every failure mode
// (bad URL, connection, status, parse, empty body) degrades to
// fallback_text; nothing throws.
ChatOutcome chat_refine(const std::string& instruction_input,
                        const ChatEndpoint& endpoint,
                        const std::string& fallback_text);

}  // namespace pindec::refine

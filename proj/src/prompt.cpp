#include "pindec/prompt.hpp"

#include <cstdio>
#include <stdexcept>

#include "pindec/util.hpp"

namespace pindec::prompt {

namespace {
constexpr const char* kPinyinTag = "拼音: ";
constexpr const char* kHypTag = "候选";
}  // namespace

std::string render_input(const std::string& pinyin,
                         const std::vector<std::string>& hypotheses,
                         const std::optional<std::vector<double>>& scores,
                         bool include_scores) {
  if (include_scores && (!scores || scores->size() != hypotheses.size()))
    throw std::invalid_argument("scores missing or mismatched");
  std::string out = std::string(kPinyinTag) + pinyin;
  for (size_t i = 0; i < hypotheses.size(); ++i) {
    out += "\n";
    out += kHypTag;
    out += std::to_string(i + 1);
    out += ": ";
    out += hypotheses[i];
    if (include_scores) {
      char buf[48];
      std::snprintf(buf, sizeof buf, " (logp=%.6f)", (*scores)[i]);
      out += buf;
    }
  }
  return out;
}

ParsedInput parse_input(const std::string& input) {
  ParsedInput parsed;
  size_t start = 0;
  bool first = true;
  while (start <= input.size()) {
    size_t end = input.find('\n', start);
    std::string line = input.substr(
        start, end == std::string::npos ? std::string::npos : end - start);
    if (first) {
      if (line.rfind(kPinyinTag, 0) != 0)
        throw std::invalid_argument("instruction input missing pinyin line");
      parsed.pinyin = line.substr(std::string(kPinyinTag).size());
      first = false;
    } else if (line.rfind(kHypTag, 0) == 0) {
      size_t colon = line.find(": ");
      if (colon == std::string::npos)
        throw std::invalid_argument("malformed hypothesis line");
      std::string text = line.substr(colon + 2);
      size_t paren = text.rfind(" (logp=");
      if (paren != std::string::npos && text.back() == ')')
        text = text.substr(0, paren);
      parsed.hypotheses.push_back(std::move(text));
    }
    if (end == std::string::npos) break;
    start = end + 1;
  }
  return parsed;
}

}  // namespace pindec::prompt

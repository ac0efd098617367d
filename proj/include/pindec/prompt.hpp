#pragma once

#include <optional>
#include <string>
#include <vector>

namespace pindec::prompt {

// Single source of truth for the instruction wording: training data and the
// chat backend must serialize prompts byte-identically.
inline constexpr const char* kInstruction =
    "根据给定的拼音序列和候选转写，输出最可能的中文句子。只输出句子本身。";

inline constexpr const char* kSystemPrompt =
    "你是一个中文转写修正助手。根据拼音序列和候选转写输出正确的中文句子，"
    "不要输出任何解释。";

// Serialized instruction input:
//   拼音: <unspaced pinyin>
//   候选1: <text>[ (logp=<score>)]
//   候选2: ...
std::string render_input(const std::string& pinyin,
                         const std::vector<std::string>& hypotheses,
                         const std::optional<std::vector<double>>& scores,
                         bool include_scores);

struct ParsedInput {
  std::string pinyin;
  std::vector<std::string> hypotheses;
};

// Inverse of render_input (scores, when present, are dropped).
ParsedInput parse_input(const std::string& input);

}  // namespace pindec::prompt

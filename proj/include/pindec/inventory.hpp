#pragma once

#include <istream>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace pindec::inventory {

struct LoadError : std::runtime_error {
  LoadError(size_t line_, const std::string& msg)
      : std::runtime_error("inventory line " + std::to_string(line_) + ": " +
                           msg),
        line(line_) {}
  size_t line;
};

struct UnsegmentableError : std::runtime_error {
  UnsegmentableError(std::string prefix, const std::string& text)
      : std::runtime_error("unsegmentable pinyin \"" + text +
                           "\" (longest matchable prefix \"" + prefix + "\")"),
        longest_prefix(std::move(prefix)) {}
  std::string longest_prefix;
};

class SyllableInventory {
 public:
  size_t size() const { return syllables_.size(); }
  const std::string& at(int id) const { return syllables_.at(id); }
  const std::vector<std::string>& syllables() const { return syllables_; }

  std::optional<int> id(std::string_view syllable) const {
    auto it = index_.find(std::string(syllable));
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  void push(std::string syllable);  // throws LoadError-free std::invalid_argument on dup

 private:
  std::vector<std::string> syllables_;
  std::unordered_map<std::string, int> index_;
};

struct PinyinSequence {
  std::vector<int> units;
  bool operator==(const PinyinSequence&) const = default;
};

// Lowercases ASCII, recomposes and maps u-umlaut to "v", trims whitespace.
// Anything that does not land in [a-z]* afterwards is an error.
std::string normalize_syllable(std::string_view raw);

// One syllable per line, line order = id order. '#' lines are comments and
// do not consume ids.
SyllableInventory load_inventory(std::istream& in);

struct Segmentation {
  std::vector<PinyinSequence> all;  // canonical order, truncated
  PinyinSequence canonical;
};

Segmentation segment_pinyin(std::string_view text, const SyllableInventory& inv,
                            size_t max_results = 64);

struct ValidationReport {
  struct Item {
    size_t pos;
    std::string syllable;  // normalized form
    bool ok;
  };
  std::vector<Item> items;
  std::vector<size_t> bad_positions;
  bool valid() const { return bad_positions.empty(); }
};

ValidationReport validate_sequence(const std::vector<std::string>& seq,
                                   const SyllableInventory& inv);

// Helper shared by callers that need the text form of a unit sequence.
std::string render(const PinyinSequence& seq, const SyllableInventory& inv,
                   std::string_view sep = "");

}  // namespace pindec::inventory

#pragma once

#include <istream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "pindec/inventory.hpp"

namespace pindec::homophone {

struct DictError : std::runtime_error {
  DictError(size_t line_, const std::string& msg)
      : std::runtime_error("dictionary line " + std::to_string(line_) + ": " +
                           msg),
        line(line_) {}
  size_t line;
};

// char -> readings (syllable ids, file order preserved) and the inverse
// syllable -> chars map. File order of characters doubles as the frequency
// prior used when ranking homophone expansions.
class HomophoneDictionary {
 public:
  const std::vector<int>* readings(char32_t ch) const {
    auto it = char_to_pinyin_.find(ch);
    return it == char_to_pinyin_.end() ? nullptr : &it->second;
  }
  bool has_reading(char32_t ch, int syllable) const {
    const auto* r = readings(ch);
    if (!r) return false;
    for (int id : *r)
      if (id == syllable) return true;
    return false;
  }
  // chars sharing the syllable, in dictionary file order
  const std::vector<char32_t>& chars_for(int syllable) const {
    return pinyin_to_chars_.at(syllable);
  }
  const std::vector<char32_t>& chars() const { return chars_; }
  size_t size() const { return chars_.size(); }
  const inventory::SyllableInventory& inv() const { return *inv_; }

  friend HomophoneDictionary load_dictionary(
      std::istream& in, const inventory::SyllableInventory& inv);

 private:
  std::unordered_map<char32_t, std::vector<int>> char_to_pinyin_;
  std::vector<std::vector<char32_t>> pinyin_to_chars_;  // indexed by syllable id
  std::vector<char32_t> chars_;                         // file order
  const inventory::SyllableInventory* inv_ = nullptr;
};

// TSV: character<TAB>syllable[,syllable...]. Readings are normalized per the
// inventory rules and must exist in the inventory.
HomophoneDictionary load_dictionary(std::istream& in,
                                    const inventory::SyllableInventory& inv);

struct CharReadings {
  std::vector<std::vector<int>> readings;  // empty set for unknown characters
  std::vector<size_t> unknown_positions;
};

CharReadings chars_to_pinyin(std::u32string_view text,
                             const HomophoneDictionary& dict);
CharReadings chars_to_pinyin(std::string_view utf8_text,
                             const HomophoneDictionary& dict);

}  // namespace pindec::homophone

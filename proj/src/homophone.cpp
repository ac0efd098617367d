#include "pindec/homophone.hpp"

#include "pindec/util.hpp"

namespace pindec::homophone {

HomophoneDictionary load_dictionary(std::istream& in,
                                    const inventory::SyllableInventory& inv) {
  HomophoneDictionary dict;
  dict.inv_ = &inv;
  dict.pinyin_to_chars_.resize(inv.size());

  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string_view t = util::trim(line);
    if (t.empty() || t.front() == '#') continue;
    size_t tab = t.find('\t');
    if (tab == std::string_view::npos)
      throw DictError(lineno, "missing tab separator");
    std::u32string ch32 = util::utf8_decode(util::trim(t.substr(0, tab)));
    if (ch32.size() != 1)
      throw DictError(lineno, "key must be a single character");
    char32_t ch = ch32[0];
    if (dict.char_to_pinyin_.count(ch))
      throw DictError(lineno, "duplicate character entry");

    std::vector<int> readings;
    std::string_view rest = t.substr(tab + 1);
    while (!rest.empty()) {
      size_t comma = rest.find(',');
      std::string_view piece = rest.substr(0, comma);
      rest = comma == std::string_view::npos ? std::string_view{}
                                             : rest.substr(comma + 1);
      std::string syl;
      try {
        syl = inventory::normalize_syllable(piece);
      } catch (const std::invalid_argument& e) {
        throw DictError(lineno, e.what());
      }
      if (syl.empty()) continue;
      auto id = inv.id(syl);
      if (!id)
        throw DictError(lineno, "reading \"" + syl + "\" not in inventory");
      bool dup = false;
      for (int r : readings) dup = dup || r == *id;
      if (!dup) readings.push_back(*id);
    }
    if (readings.empty()) throw DictError(lineno, "no readings");

    for (int id : readings) dict.pinyin_to_chars_[id].push_back(ch);
    dict.char_to_pinyin_.emplace(ch, std::move(readings));
    dict.chars_.push_back(ch);
  }
  if (dict.chars_.empty()) throw DictError(lineno, "empty dictionary");
  return dict;
}

CharReadings chars_to_pinyin(std::u32string_view text,
                             const HomophoneDictionary& dict) {
  CharReadings out;
  out.readings.reserve(text.size());
  for (size_t i = 0; i < text.size(); ++i) {
    const auto* r = dict.readings(text[i]);
    if (r) {
      out.readings.push_back(*r);
    } else {
      out.readings.emplace_back();
      out.unknown_positions.push_back(i);
    }
  }
  return out;
}

CharReadings chars_to_pinyin(std::string_view utf8_text,
                             const HomophoneDictionary& dict) {
  std::u32string decoded = util::nfc(util::utf8_decode(utf8_text));
  return chars_to_pinyin(decoded, dict);
}

}  // namespace pindec::homophone

#include "pindec/inventory.hpp"

#include <algorithm>

#include "pindec/util.hpp"

namespace pindec::inventory {

void SyllableInventory::push(std::string syllable) {
  if (index_.count(syllable))
    throw std::invalid_argument("duplicate syllable \"" + syllable + "\"");
  index_.emplace(syllable, static_cast<int>(syllables_.size()));
  syllables_.push_back(std::move(syllable));
}

std::string normalize_syllable(std::string_view raw) {
  std::u32string cps = util::nfc(util::utf8_decode(util::trim(raw)));
  std::string out;
  out.reserve(cps.size());
  for (char32_t cp : cps) {
    if (cp >= U'A' && cp <= U'Z') cp = cp - U'A' + U'a';
    if (cp == 0x00FC || cp == 0x00DC) cp = U'v';  // u-umlaut
    if (cp < U'a' || cp > U'z')
      throw std::invalid_argument("illegal character in syllable \"" +
                                  std::string(util::trim(raw)) + "\"");
    out.push_back(static_cast<char>(cp));
  }
  return out;
}

SyllableInventory load_inventory(std::istream& in) {
  SyllableInventory inv;
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string_view t = util::trim(line);
    if (t.empty() || t.front() == '#') continue;
    std::string syl;
    try {
      syl = normalize_syllable(t);
    } catch (const std::invalid_argument& e) {
      throw LoadError(lineno, e.what());
    }
    if (syl.empty()) continue;
    if (inv.id(syl)) throw LoadError(lineno, "duplicate syllable \"" + syl + "\"");
    inv.push(std::move(syl));
  }
  if (inv.size() == 0) throw LoadError(lineno, "empty inventory");
  return inv;
}

namespace {

// All segmentations of text[pos:], assuming reach[i] marks suffix
// segmentability. Longer first syllable explored first, which combined with
// the stable count sort below yields the canonical ordering.
void enumerate(const std::string& text, size_t pos,
               const SyllableInventory& inv, size_t max_len,
               const std::vector<char>& reach, std::vector<int>& cur,
               std::vector<PinyinSequence>& out) {
  if (pos == text.size()) {
    out.push_back(PinyinSequence{cur});
    return;
  }
  size_t longest = std::min(max_len, text.size() - pos);
  for (size_t len = longest; len >= 1; --len) {
    if (!reach[pos + len]) continue;
    auto id = inv.id(std::string_view(text).substr(pos, len));
    if (!id) continue;
    cur.push_back(*id);
    enumerate(text, pos + len, inv, max_len, reach, cur, out);
    cur.pop_back();
  }
}

}  // namespace

Segmentation segment_pinyin(std::string_view raw, const SyllableInventory& inv,
                            size_t max_results) {
  std::string text = normalize_syllable(raw);
  size_t n = text.size();
  size_t max_len = 0;
  for (const auto& s : inv.syllables()) max_len = std::max(max_len, s.size());

  // reach[i]: text[i:] has at least one segmentation
  std::vector<char> reach(n + 1, 0);
  reach[n] = 1;
  for (size_t i = n; i-- > 0;) {
    for (size_t len = 1; len <= std::min(max_len, n - i); ++len) {
      if (reach[i + len] && inv.id(std::string_view(text).substr(i, len))) {
        reach[i] = 1;
        break;
      }
    }
  }
  if (!reach[0]) {
    // longest prefix from which every step stays inside the inventory
    size_t best = 0;
    std::vector<char> fwd(n + 1, 0);
    fwd[0] = 1;
    for (size_t i = 0; i <= n; ++i) {
      if (!fwd[i]) continue;
      best = std::max(best, i);
      for (size_t len = 1; len <= std::min(max_len, n - i); ++len)
        if (inv.id(std::string_view(text).substr(i, len))) fwd[i + len] = 1;
    }
    throw UnsegmentableError(text.substr(0, best), text);
  }

  std::vector<PinyinSequence> all;
  std::vector<int> cur;
  enumerate(text, 0, inv, max_len, reach, cur, all);
  std::stable_sort(all.begin(), all.end(),
                   [](const PinyinSequence& a, const PinyinSequence& b) {
                     return a.units.size() < b.units.size();
                   });
  Segmentation seg;
  seg.canonical = all.front();
  if (all.size() > max_results) all.resize(max_results);
  seg.all = std::move(all);
  return seg;
}

ValidationReport validate_sequence(const std::vector<std::string>& seq,
                                   const SyllableInventory& inv) {
  ValidationReport report;
  for (size_t i = 0; i < seq.size(); ++i) {
    std::string norm;
    bool ok = true;
    try {
      norm = normalize_syllable(seq[i]);
      ok = inv.id(norm).has_value();
    } catch (const std::invalid_argument&) {
      norm = seq[i];
      ok = false;
    }
    report.items.push_back({i, norm, ok});
    if (!ok) report.bad_positions.push_back(i);
  }
  return report;
}

std::string render(const PinyinSequence& seq, const SyllableInventory& inv,
                   std::string_view sep) {
  std::string out;
  for (size_t i = 0; i < seq.units.size(); ++i) {
    if (i) out += sep;
    out += inv.at(seq.units[i]);
  }
  return out;
}

}  // namespace pindec::inventory

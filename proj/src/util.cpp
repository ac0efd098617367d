#include "pindec/util.hpp"

#include <algorithm>
#include <array>
#include <cmath>

namespace pindec::util {

double log_add(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  if (a < b) std::swap(a, b);
  return a + std::log1p(std::exp(b - a));
}

double logsumexp(const double* begin, const double* end) {
  double m = kNegInf;
  for (const double* p = begin; p != end; ++p) m = std::max(m, *p);
  if (m == kNegInf) return kNegInf;
  double acc = 0.0;
  for (const double* p = begin; p != end; ++p) acc += std::exp(*p - m);
  return m + std::log(acc);
}

double logsumexp(const std::vector<double>& xs) {
  return logsumexp(xs.data(), xs.data() + xs.size());
}

std::u32string utf8_decode(std::string_view s) {
  std::u32string out;
  out.reserve(s.size());
  size_t i = 0;
  auto bad = [&](const char* why) {
    throw std::invalid_argument(std::string("invalid UTF-8 at byte ") +
                                std::to_string(i) + ": " + why);
  };
  while (i < s.size()) {
    unsigned char b0 = static_cast<unsigned char>(s[i]);
    char32_t cp = 0;
    size_t len = 0;
    if (b0 < 0x80) {
      cp = b0;
      len = 1;
    } else if ((b0 & 0xE0) == 0xC0) {
      cp = b0 & 0x1F;
      len = 2;
    } else if ((b0 & 0xF0) == 0xE0) {
      cp = b0 & 0x0F;
      len = 3;
    } else if ((b0 & 0xF8) == 0xF0) {
      cp = b0 & 0x07;
      len = 4;
    } else {
      bad("bad lead byte");
    }
    if (i + len > s.size()) bad("truncated sequence");
    for (size_t j = 1; j < len; ++j) {
      unsigned char bj = static_cast<unsigned char>(s[i + j]);
      if ((bj & 0xC0) != 0x80) bad("bad continuation byte");
      cp = (cp << 6) | (bj & 0x3F);
    }
    static constexpr char32_t kMin[5] = {0, 0, 0x80, 0x800, 0x10000};
    if (len > 1 && cp < kMin[len]) bad("overlong encoding");
    if (cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) bad("invalid scalar");
    out.push_back(cp);
    i += len;
  }
  return out;
}

std::string utf8_encode(std::u32string_view s) {
  std::string out;
  out.reserve(s.size() * 3);
  for (char32_t cp : s) {
    if (cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF))
      throw std::invalid_argument("invalid scalar value " + std::to_string(cp));
    if (cp < 0x80) {
      out.push_back(static_cast<char>(cp));
    } else if (cp < 0x800) {
      out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
      out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else if (cp < 0x10000) {
      out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
      out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
      out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else {
      out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
      out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
      out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
      out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    }
  }
  return out;
}

namespace {

struct Composition {
  char32_t base;
  char32_t mark;
  char32_t composed;
};

// Latin letters with the combining marks that occur in romanized text.
// 0x300 grave, 0x301 acute, 0x302 circumflex, 0x303 tilde, 0x304 macron,
// 0x306 breve, 0x308 diaeresis, 0x30A ring, 0x30C caron.
constexpr Composition kCompositions[] = {
    {U'A', 0x300, 0x00C0}, {U'A', 0x301, 0x00C1}, {U'A', 0x302, 0x00C2},
    {U'A', 0x303, 0x00C3}, {U'A', 0x304, 0x0100}, {U'A', 0x306, 0x0102},
    {U'A', 0x308, 0x00C4}, {U'A', 0x30A, 0x00C5}, {U'A', 0x30C, 0x01CD},
    {U'C', 0x301, 0x0106}, {U'C', 0x302, 0x0108}, {U'C', 0x30C, 0x010C},
    {U'E', 0x300, 0x00C8}, {U'E', 0x301, 0x00C9}, {U'E', 0x302, 0x00CA},
    {U'E', 0x303, 0x1EBC}, {U'E', 0x304, 0x0112}, {U'E', 0x306, 0x0114},
    {U'E', 0x308, 0x00CB}, {U'E', 0x30C, 0x011A},
    {U'I', 0x300, 0x00CC}, {U'I', 0x301, 0x00CD}, {U'I', 0x302, 0x00CE},
    {U'I', 0x303, 0x0128}, {U'I', 0x304, 0x012A}, {U'I', 0x306, 0x012C},
    {U'I', 0x308, 0x00CF}, {U'I', 0x30C, 0x01CF},
    {U'N', 0x300, 0x01F8}, {U'N', 0x301, 0x0143}, {U'N', 0x303, 0x00D1},
    {U'N', 0x30C, 0x0147},
    {U'O', 0x300, 0x00D2}, {U'O', 0x301, 0x00D3}, {U'O', 0x302, 0x00D4},
    {U'O', 0x303, 0x00D5}, {U'O', 0x304, 0x014C}, {U'O', 0x306, 0x014E},
    {U'O', 0x308, 0x00D6}, {U'O', 0x30C, 0x01D1},
    {U'S', 0x301, 0x015A}, {U'S', 0x302, 0x015C}, {U'S', 0x30C, 0x0160},
    {U'U', 0x300, 0x00D9}, {U'U', 0x301, 0x00DA}, {U'U', 0x302, 0x00DB},
    {U'U', 0x303, 0x0168}, {U'U', 0x304, 0x016A}, {U'U', 0x306, 0x016C},
    {U'U', 0x308, 0x00DC}, {U'U', 0x30A, 0x016E}, {U'U', 0x30C, 0x01D3},
    {U'Y', 0x300, 0x1EF2}, {U'Y', 0x301, 0x00DD}, {U'Y', 0x302, 0x0176},
    {U'Y', 0x308, 0x0178},
    {U'Z', 0x301, 0x0179}, {U'Z', 0x30C, 0x017D},
    {U'a', 0x300, 0x00E0}, {U'a', 0x301, 0x00E1}, {U'a', 0x302, 0x00E2},
    {U'a', 0x303, 0x00E3}, {U'a', 0x304, 0x0101}, {U'a', 0x306, 0x0103},
    {U'a', 0x308, 0x00E4}, {U'a', 0x30A, 0x00E5}, {U'a', 0x30C, 0x01CE},
    {U'c', 0x301, 0x0107}, {U'c', 0x302, 0x0109}, {U'c', 0x30C, 0x010D},
    {U'e', 0x300, 0x00E8}, {U'e', 0x301, 0x00E9}, {U'e', 0x302, 0x00EA},
    {U'e', 0x303, 0x1EBD}, {U'e', 0x304, 0x0113}, {U'e', 0x306, 0x0115},
    {U'e', 0x308, 0x00EB}, {U'e', 0x30C, 0x011B},
    {U'i', 0x300, 0x00EC}, {U'i', 0x301, 0x00ED}, {U'i', 0x302, 0x00EE},
    {U'i', 0x303, 0x0129}, {U'i', 0x304, 0x012B}, {U'i', 0x306, 0x012D},
    {U'i', 0x308, 0x00EF}, {U'i', 0x30C, 0x01D0},
    {U'n', 0x300, 0x01F9}, {U'n', 0x301, 0x0144}, {U'n', 0x303, 0x00F1},
    {U'n', 0x30C, 0x0148},
    {U'o', 0x300, 0x00F2}, {U'o', 0x301, 0x00F3}, {U'o', 0x302, 0x00F4},
    {U'o', 0x303, 0x00F5}, {U'o', 0x304, 0x014D}, {U'o', 0x306, 0x014F},
    {U'o', 0x308, 0x00F6}, {U'o', 0x30C, 0x01D2},
    {U's', 0x301, 0x015B}, {U's', 0x302, 0x015D}, {U's', 0x30C, 0x0161},
    {U'u', 0x300, 0x00F9}, {U'u', 0x301, 0x00FA}, {U'u', 0x302, 0x00FB},
    {U'u', 0x303, 0x0169}, {U'u', 0x304, 0x016B}, {U'u', 0x306, 0x016D},
    {U'u', 0x308, 0x00FC}, {U'u', 0x30A, 0x016F}, {U'u', 0x30C, 0x01D4},
    {U'y', 0x300, 0x1EF3}, {U'y', 0x301, 0x00FD}, {U'y', 0x302, 0x0177},
    {U'y', 0x308, 0x00FF},
    {U'z', 0x301, 0x017A}, {U'z', 0x30C, 0x017E},
    // u-umlaut with tone marks, common in pinyin sources
    {0x00FC, 0x300, 0x01DC}, {0x00FC, 0x301, 0x01D8},
    {0x00FC, 0x304, 0x01D6}, {0x00FC, 0x30C, 0x01DA},
};

const Composition* find_composition(char32_t base, char32_t mark) {
  for (const auto& c : kCompositions)
    if (c.base == base && c.mark == mark) return &c;
  return nullptr;
}

}  // namespace

std::u32string nfc(std::u32string_view s) {
  std::u32string out;
  out.reserve(s.size());
  for (char32_t cp : s) {
    if (!out.empty()) {
      if (const Composition* c = find_composition(out.back(), cp)) {
        out.back() = c->composed;
        continue;
      }
    }
    out.push_back(cp);
  }
  return out;
}

std::string_view trim(std::string_view s) {
  size_t b = 0, e = s.size();
  while (b < e && (s[b] == ' ' || s[b] == '\t' || s[b] == '\r' || s[b] == '\n'))
    ++b;
  while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r' ||
                   s[e - 1] == '\n'))
    --e;
  return s.substr(b, e - b);
}

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace pindec::util

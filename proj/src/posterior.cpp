#include "pindec/posterior.hpp"

#include <cmath>
#include <cstring>
#include <limits>

#include "pindec/rng.hpp"
#include "pindec/util.hpp"

namespace pindec::posterior {

namespace {

constexpr char kMagic[4] = {'V', 'P', 'P', 'M'};
constexpr std::uint8_t kVersion = 1;
constexpr std::uint8_t kFlagLog = 0x01;
constexpr size_t kHeaderBytes = 16;
constexpr double kRowTolerance = 1e-4;

void put_u32(std::string& out, std::uint32_t v) {
  out.push_back(static_cast<char>(v & 0xFF));
  out.push_back(static_cast<char>((v >> 8) & 0xFF));
  out.push_back(static_cast<char>((v >> 16) & 0xFF));
  out.push_back(static_cast<char>((v >> 24) & 0xFF));
}

std::uint32_t get_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) |
         (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) |
         (static_cast<std::uint32_t>(p[3]) << 24);
}

std::uint32_t f32_bits(float f) {
  std::uint32_t u;
  std::memcpy(&u, &f, sizeof u);
  return u;
}

float bits_f32(std::uint32_t u) {
  float f;
  std::memcpy(&f, &u, sizeof f);
  return f;
}

double row_logsumexp(const float* row, std::uint32_t vocab) {
  std::vector<double> tmp(row, row + vocab);
  return util::logsumexp(tmp);
}

}  // namespace

PosteriorMatrix::PosteriorMatrix(std::uint32_t frames, std::uint32_t vocab,
                                 std::vector<float> values)
    : frames_(frames), vocab_(vocab), values_(std::move(values)) {
  if (values_.size() != static_cast<size_t>(frames_) * vocab_)
    throw std::invalid_argument("posterior shape/value count mismatch");
  for (float v : values_)
    if (std::isnan(v) || v == std::numeric_limits<float>::infinity())
      throw std::invalid_argument("posterior values must be finite or -inf");
}

std::vector<double> PosteriorMatrix::log_values() const {
  return std::vector<double>(values_.begin(), values_.end());
}

std::optional<std::uint32_t> PosteriorMatrix::first_unnormalized_row() const {
  for (std::uint32_t t = 0; t < frames_; ++t) {
    double lse = row_logsumexp(values_.data() + static_cast<size_t>(t) * vocab_,
                               vocab_);
    if (!(std::fabs(lse) <= kRowTolerance)) return t;
  }
  return std::nullopt;
}

size_t write_posteriors(const PosteriorMatrix& m, std::ostream& sink) {
  if (auto row = m.first_unnormalized_row())
    throw PosteriorError(PosteriorError::Kind::BadNormalization,
                         "row " + std::to_string(*row) +
                             " is not a normalized log distribution");
  std::string buf;
  buf.reserve(kHeaderBytes + m.values().size() * 4);
  buf.append(kMagic, 4);
  buf.push_back(static_cast<char>(kVersion));
  buf.push_back(static_cast<char>(kFlagLog));
  buf.push_back(0);
  buf.push_back(0);
  put_u32(buf, m.frames());
  put_u32(buf, m.vocab());
  for (float v : m.values()) {
    if (v == -std::numeric_limits<float>::infinity())
      v = std::numeric_limits<float>::lowest();
    put_u32(buf, f32_bits(v));
  }
  sink.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!sink)
    throw PosteriorError(PosteriorError::Kind::Io, "write failed");
  return buf.size();
}

PosteriorMatrix read_posteriors(std::istream& source) {
  unsigned char header[kHeaderBytes];
  source.read(reinterpret_cast<char*>(header), kHeaderBytes);
  if (static_cast<size_t>(source.gcount()) != kHeaderBytes)
    throw PosteriorError(PosteriorError::Kind::Truncated,
                         "truncated header: expected " +
                             std::to_string(kHeaderBytes) + " bytes, got " +
                             std::to_string(source.gcount()));
  if (std::memcmp(header, kMagic, 4) != 0)
    throw PosteriorError(PosteriorError::Kind::BadMagic, "bad magic");
  if (header[4] != kVersion)
    throw PosteriorError(PosteriorError::Kind::BadVersion,
                         "unsupported version " + std::to_string(header[4]));
  const bool log_domain = (header[5] & kFlagLog) != 0;
  const std::uint32_t frames = get_u32(header + 8);
  const std::uint32_t vocab = get_u32(header + 12);

  const size_t count = static_cast<size_t>(frames) * vocab;
  std::vector<unsigned char> payload(count * 4);
  source.read(reinterpret_cast<char*>(payload.data()),
              static_cast<std::streamsize>(payload.size()));
  const size_t got = static_cast<size_t>(source.gcount());
  if (got != payload.size())
    throw PosteriorError(PosteriorError::Kind::Truncated,
                         "truncated payload: expected " +
                             std::to_string(payload.size()) + " bytes, got " +
                             std::to_string(got));

  std::vector<float> values(count);
  for (size_t i = 0; i < count; ++i)
    values[i] = bits_f32(get_u32(payload.data() + i * 4));

  if (log_domain) {
    for (float& v : values)
      if (v == std::numeric_limits<float>::lowest())
        v = -std::numeric_limits<float>::infinity();
  } else {
    // linear probabilities: renormalize each row, then take logs
    for (std::uint32_t t = 0; t < frames; ++t) {
      float* row = values.data() + static_cast<size_t>(t) * vocab;
      double sum = 0.0;
      for (std::uint32_t v = 0; v < vocab; ++v) {
        if (row[v] < 0.0f || std::isnan(row[v]) || std::isinf(row[v]))
          throw PosteriorError(
              PosteriorError::Kind::BadNormalization,
              "row " + std::to_string(t) + " has invalid linear probability");
        sum += row[v];
      }
      if (sum <= 0.0)
        throw PosteriorError(PosteriorError::Kind::BadNormalization,
                             "row " + std::to_string(t) + " sums to zero");
      for (std::uint32_t v = 0; v < vocab; ++v)
        row[v] = row[v] == 0.0f
                     ? -std::numeric_limits<float>::infinity()
                     : static_cast<float>(std::log(row[v] / sum));
    }
  }

  PosteriorMatrix m(frames, vocab, std::move(values));
  if (auto row = m.first_unnormalized_row())
    throw PosteriorError(PosteriorError::Kind::BadNormalization,
                         "row " + std::to_string(*row) +
                             " is not a normalized log distribution");
  return m;
}

std::optional<int> StreamVocab::id(const std::string& token) const {
  for (size_t i = 0; i < tokens.size(); ++i)
    if (tokens[i] == token) return static_cast<int>(i);
  return std::nullopt;
}

StreamVocab load_vocab(std::istream& in) {
  StreamVocab vocab;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    vocab.tokens.push_back(line);
  }
  return vocab;
}

PosteriorMatrix synth_posteriors(const std::vector<int>& target,
                                 int frames_per_token, int blank_gap,
                                 double noise, std::uint64_t seed,
                                 int vocab_size) {
  if (frames_per_token < 1)
    throw std::invalid_argument("frames_per_token must be >= 1");
  if (blank_gap < 0) throw std::invalid_argument("blank_gap must be >= 0");
  if (vocab_size < 2) throw std::invalid_argument("vocab_size must be >= 2");
  for (int id : target)
    if (id < 1 || id >= vocab_size)
      throw std::invalid_argument("target id " + std::to_string(id) +
                                  " out of vocab range");

  std::vector<int> peaks;
  for (size_t i = 0; i < target.size(); ++i) {
    int gap = blank_gap;
    if (i > 0 && target[i] == target[i - 1] && gap == 0) gap = 1;
    for (int g = 0; g < gap; ++g) peaks.push_back(0);
    for (int f = 0; f < frames_per_token; ++f) peaks.push_back(target[i]);
  }
  for (int g = 0; g < blank_gap; ++g) peaks.push_back(0);
  if (peaks.empty()) peaks.push_back(0);

  const auto frames = static_cast<std::uint32_t>(peaks.size());
  const auto vocab = static_cast<std::uint32_t>(vocab_size);
  std::vector<float> values(static_cast<size_t>(frames) * vocab);

  if (noise == 0.0) {
    for (std::uint32_t t = 0; t < frames; ++t)
      for (std::uint32_t v = 0; v < vocab; ++v)
        values[static_cast<size_t>(t) * vocab + v] =
            (static_cast<int>(v) == peaks[t])
                ? 0.0f
                : -std::numeric_limits<float>::infinity();
    return PosteriorMatrix(frames, vocab, std::move(values));
  }

  constexpr double kMargin = 8.0;
  rng::Rng gen(rng::splitmix64(seed));
  std::vector<double> logits(vocab);
  for (std::uint32_t t = 0; t < frames; ++t) {
    for (std::uint32_t v = 0; v < vocab; ++v) {
      double base = (static_cast<int>(v) == peaks[t]) ? kMargin : 0.0;
      logits[v] = base + noise * kMargin * gen.normal();
    }
    double lse = util::logsumexp(logits);
    for (std::uint32_t v = 0; v < vocab; ++v)
      values[static_cast<size_t>(t) * vocab + v] =
          static_cast<float>(logits[v] - lse);
    // float rounding may push |logsumexp| past the row tolerance; renormalize
    // once more in float space
    float* row = values.data() + static_cast<size_t>(t) * vocab;
    std::vector<double> tmp(row, row + vocab);
    double adjust = util::logsumexp(tmp);
    for (std::uint32_t v = 0; v < vocab; ++v)
      row[v] = static_cast<float>(row[v] - adjust);
  }
  return PosteriorMatrix(frames, vocab, std::move(values));
}

}  // namespace pindec::posterior

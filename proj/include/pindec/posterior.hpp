#pragma once

#include <cstdint>
#include <istream>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

namespace pindec::posterior {

struct PosteriorError : std::runtime_error {
  enum class Kind { BadMagic, BadVersion, Truncated, BadNormalization, Io };
  PosteriorError(Kind kind_, const std::string& msg)
      : std::runtime_error(msg), kind(kind_) {}
  Kind kind;
};

// T' x V natural-log probabilities, row-major, one row per frame. Values are
// finite or -inf. Every row must satisfy |logsumexp(row)| <= 1e-4.
class PosteriorMatrix {
 public:
  PosteriorMatrix() = default;
  PosteriorMatrix(std::uint32_t frames, std::uint32_t vocab,
                  std::vector<float> values);

  std::uint32_t frames() const { return frames_; }
  std::uint32_t vocab() const { return vocab_; }
  float at(std::uint32_t t, std::uint32_t v) const {
    return values_[static_cast<size_t>(t) * vocab_ + v];
  }
  const std::vector<float>& values() const { return values_; }

  // Row-major copy widened to double, -inf preserved.
  std::vector<double> log_values() const;

  // nullopt when every row is normalized; else the first offending row.
  std::optional<std::uint32_t> first_unnormalized_row() const;

 private:
  std::uint32_t frames_ = 0;
  std::uint32_t vocab_ = 0;
  std::vector<float> values_;
};

// VPPM: "VPPM", version byte = 1, flags byte (bit0: 1 = log domain),
// 2 reserved zero bytes, u32-LE frames, u32-LE vocab, then f32-LE payload.
// -inf is stored as the most negative finite f32.
size_t write_posteriors(const PosteriorMatrix& m, std::ostream& sink);
PosteriorMatrix read_posteriors(std::istream& source);

struct StreamVocab {
  std::vector<std::string> tokens;
  static constexpr int kBlankId = 0;
  bool has_ctc_blank() const {
    return !tokens.empty() && tokens[0] == "<blank>";
  }
  std::optional<int> id(const std::string& token) const;
};

// One token per line, id = line number (0-based). Lines are not trimmed
// beyond the newline so tokens may carry significant spaces.
StreamVocab load_vocab(std::istream& in);

// Deterministic synthetic posteriors whose argmax path collapses to
// `target` at noise 0. Target ids are non-blank (>= 1) and < vocab_size.
// A blank frame is always inserted between equal adjacent targets.
PosteriorMatrix synth_posteriors(const std::vector<int>& target,
                                 int frames_per_token, int blank_gap,
                                 double noise, std::uint64_t seed,
                                 int vocab_size);

}  // namespace pindec::posterior

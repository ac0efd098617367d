#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "pindec/homophone.hpp"
#include "pindec/inventory.hpp"
#include "pindec/records.hpp"

namespace pindec::datasmith {

struct CorruptMix {
  double p_sub = 1.0;
  double p_del = 0.0;
  double p_ins = 0.0;
  // substitutions draw a homophone of the original with this probability
  // when the dictionary has one
  double homophone_bias = 0.7;
};

// Applies ceil(cer_target * N) edits at distinct positions, right to left so
// earlier edits do not shift later ones. Deterministic per seed. The realized
// edit distance to the input can differ from the edit count by at most one
// when adjacent edits interact.
std::u32string corrupt(const std::u32string& text, double cer_target,
                       const CorruptMix& mix,
                       const homophone::HomophoneDictionary& dict,
                       std::uint64_t seed);
std::string corrupt(const std::string& utf8_text, double cer_target,
                    const CorruptMix& mix,
                    const homophone::HomophoneDictionary& dict,
                    std::uint64_t seed);

// A hypothesis source: either a synthetic-corruption config standing in for
// a training checkpoint, or a decoded n-best record file.
struct SourceSpec {
  enum class Kind { Corrupt, NbestFile };
  Kind kind = Kind::Corrupt;
  std::string name;

  // Kind::Corrupt
  double cer_target = 0.0;
  CorruptMix mix;
  size_t k = 5;  // corrupted hypotheses per instance

  // Kind::NbestFile
  std::string path;

  // Parameter serialization used for seed derivation; the name is excluded
  // so configs that differ only in label produce identical instances.
  std::string fingerprint() const;
};

struct BuildResult {
  std::vector<records::InstructionRecord> instances;
  size_t dedup_removed = 0;
  size_t flagged_pinyin = 0;  // instances whose pinyin failed segmentation
  size_t missing_refs = 0;    // refs absent from an n-best file source
};

// One instance per (ref, source), deduplicated on (input, output). Corrupt
// sources derive the pinyin from the first corrupted hypothesis' canonical
// readings; n-best sources carry their own pinyin. Seeds depend only on the
// global seed, the ref text, and the source fingerprint.
BuildResult build_instances(
    const std::vector<std::pair<std::string, std::string>>& refs,
    const std::vector<SourceSpec>& sources,
    const homophone::HomophoneDictionary& dict,
    const inventory::SyllableInventory& inv, std::uint64_t seed,
    bool include_scores = false);

struct DatasetStats {
  size_t count = 0;
  size_t dedup_removed = 0;
  size_t flagged_pinyin = 0;
  // CER of top-1 hypothesis vs output, binned at width 0.1; last bin >= 1.0
  std::array<size_t, 11> cer_hist{};
  std::string to_json() const;
};

DatasetStats dataset_stats(
    const std::vector<records::InstructionRecord>& instances,
    size_t dedup_removed = 0, size_t flagged_pinyin = 0);

}  // namespace pindec::datasmith

#include "pindec/datasmith.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>

#include "json.hpp"
#include "pindec/metrics.hpp"
#include "pindec/prompt.hpp"
#include "pindec/rng.hpp"
#include "pindec/util.hpp"

namespace pindec::datasmith {

namespace {

char32_t random_dict_char(const homophone::HomophoneDictionary& dict,
                          rng::Rng& gen, char32_t exclude) {
  for (int tries = 0; tries < 64; ++tries) {
    char32_t ch = dict.chars()[gen.uniform_int(dict.size())];
    if (ch != exclude) return ch;
  }
  return dict.chars().front() != exclude ? dict.chars().front()
                                         : dict.chars().back();
}

char32_t substitute_char(char32_t original,
                         const homophone::HomophoneDictionary& dict,
                         const CorruptMix& mix, rng::Rng& gen) {
  const auto* readings = dict.readings(original);
  if (readings && gen.uniform() < mix.homophone_bias) {
    std::vector<char32_t> pool;
    std::set<char32_t> seen{original};
    for (int syl : *readings)
      for (char32_t ch : dict.chars_for(syl))
        if (seen.insert(ch).second) pool.push_back(ch);
    if (!pool.empty()) return pool[gen.uniform_int(pool.size())];
  }
  return random_dict_char(dict, gen, original);
}

}  // namespace

std::u32string corrupt(const std::u32string& text, double cer_target,
                       const CorruptMix& mix,
                       const homophone::HomophoneDictionary& dict,
                       std::uint64_t seed) {
  if (text.empty()) throw std::invalid_argument("cannot corrupt empty text");
  if (cer_target < 0.0 || cer_target >= 1.0)
    throw std::invalid_argument("cer_target out of [0,1)");
  double mass = mix.p_sub + mix.p_del + mix.p_ins;
  if (std::fabs(mass - 1.0) > 1e-9)
    throw std::invalid_argument("mix probabilities must sum to 1");

  const size_t n = text.size();
  // guard against binary round-up: 0.2 * 5 lands a hair above 1.0
  const auto edits =
      static_cast<size_t>(std::ceil(cer_target * static_cast<double>(n) - 1e-9));
  if (edits == 0) return text;

  rng::Rng gen(rng::splitmix64(seed));
  std::vector<size_t> positions(n);
  for (size_t i = 0; i < n; ++i) positions[i] = i;
  for (size_t i = n - 1; i > 0; --i)
    std::swap(positions[i], positions[gen.uniform_int(i + 1)]);
  positions.resize(std::min(edits, n));
  std::sort(positions.rbegin(), positions.rend());

  std::u32string out = text;
  for (size_t pos : positions) {
    double u = gen.uniform();
    if (u < mix.p_sub) {
      out[pos] = substitute_char(out[pos], dict, mix, gen);
    } else if (u < mix.p_sub + mix.p_del) {
      out.erase(out.begin() + static_cast<ptrdiff_t>(pos));
    } else {
      out.insert(out.begin() + static_cast<ptrdiff_t>(pos),
                 random_dict_char(dict, gen, 0));
    }
  }
  return out;
}

std::string corrupt(const std::string& utf8_text, double cer_target,
                    const CorruptMix& mix,
                    const homophone::HomophoneDictionary& dict,
                    std::uint64_t seed) {
  return util::utf8_encode(corrupt(util::nfc(util::utf8_decode(utf8_text)),
                                   cer_target, mix, dict, seed));
}

std::string SourceSpec::fingerprint() const {
  char buf[160];
  if (kind == Kind::NbestFile) {
    return "nbest:" + path;
  }
  std::snprintf(buf, sizeof buf,
                "corrupt:cer=%.9g;sub=%.9g;del=%.9g;ins=%.9g;bias=%.9g;k=%zu",
                cer_target, mix.p_sub, mix.p_del, mix.p_ins,
                mix.homophone_bias, k);
  return buf;
}

namespace {

struct SourceData {
  const SourceSpec* spec;
  std::map<std::string, records::NBestRecord> by_utt;  // n-best files only
};

std::string first_reading_pinyin(const std::u32string& text,
                                 const homophone::HomophoneDictionary& dict,
                                 bool& missing_reading) {
  std::string pinyin;
  for (char32_t ch : text) {
    const auto* readings = dict.readings(ch);
    if (!readings || readings->empty()) {
      missing_reading = true;
      continue;
    }
    pinyin += dict.inv().at(readings->front());
  }
  return pinyin;
}

bool pinyin_ok(const std::string& pinyin,
               const inventory::SyllableInventory& inv) {
  if (pinyin.empty()) return false;
  try {
    inventory::segment_pinyin(pinyin, inv, 1);
    return true;
  } catch (const std::exception&) {
    return false;
  }
}

}  // namespace

BuildResult build_instances(
    const std::vector<std::pair<std::string, std::string>>& refs,
    const std::vector<SourceSpec>& sources,
    const homophone::HomophoneDictionary& dict,
    const inventory::SyllableInventory& inv, std::uint64_t seed,
    bool include_scores) {
  for (const auto& [utt, truth] : refs)
    if (util::trim(truth).empty())
      throw std::invalid_argument("empty reference for utt " + utt);

  std::vector<SourceData> data;
  data.reserve(sources.size());
  for (const auto& spec : sources) {
    SourceData sd;
    sd.spec = &spec;
    if (spec.kind == SourceSpec::Kind::NbestFile) {
      std::ifstream in(spec.path);
      if (!in)
        throw std::runtime_error("cannot open n-best file " + spec.path);
      for (auto& record : records::read_nbest_file(in))
        sd.by_utt.emplace(record.utt, std::move(record));
    }
    data.push_back(std::move(sd));
  }

  BuildResult result;
  std::set<std::pair<std::string, std::string>> seen;
  for (const auto& [utt, truth_raw] : refs) {
    const std::u32string truth = util::nfc(util::utf8_decode(truth_raw));
    const std::string output = util::utf8_encode(truth);
    for (const auto& sd : data) {
      const SourceSpec& spec = *sd.spec;
      std::vector<std::string> hyps;
      std::optional<std::vector<double>> scores;
      std::string pinyin;
      bool flagged = false;

      if (spec.kind == SourceSpec::Kind::Corrupt) {
        const std::uint64_t base = rng::mix_seed(
            seed, util::fnv1a(spec.fingerprint()) ^ util::fnv1a(output));
        for (size_t j = 0; j < std::max<size_t>(spec.k, 1); ++j) {
          std::u32string hyp = corrupt(truth, spec.cer_target, spec.mix, dict,
                                       rng::mix_seed(base, j));
          std::string encoded = util::utf8_encode(hyp);
          if (std::find(hyps.begin(), hyps.end(), encoded) == hyps.end())
            hyps.push_back(std::move(encoded));
        }
        bool missing_reading = false;
        pinyin = first_reading_pinyin(util::nfc(util::utf8_decode(hyps[0])),
                                      dict, missing_reading);
        flagged = missing_reading || !pinyin_ok(pinyin, inv);
      } else {
        auto it = sd.by_utt.find(utt);
        if (it == sd.by_utt.end()) {
          ++result.missing_refs;
          continue;
        }
        const auto& record = it->second;
        std::vector<double> record_scores;
        for (const auto& entry : record.nbest) {
          hyps.push_back(entry.text);
          record_scores.push_back(entry.log_score);
        }
        if (hyps.empty()) {
          ++result.missing_refs;
          continue;
        }
        if (include_scores) scores = std::move(record_scores);
        pinyin = record.pinyin;
        flagged = !pinyin_ok(pinyin, inv);
      }

      records::InstructionRecord instance;
      instance.instruction = prompt::kInstruction;
      instance.input = prompt::render_input(pinyin, hyps, scores,
                                            include_scores && scores.has_value());
      instance.output = output;
      if (!seen.emplace(instance.input, instance.output).second) {
        ++result.dedup_removed;
        continue;
      }
      if (flagged) ++result.flagged_pinyin;
      result.instances.push_back(std::move(instance));
    }
  }
  return result;
}

DatasetStats dataset_stats(
    const std::vector<records::InstructionRecord>& instances,
    size_t dedup_removed, size_t flagged_pinyin) {
  DatasetStats stats;
  stats.count = instances.size();
  stats.dedup_removed = dedup_removed;
  stats.flagged_pinyin = flagged_pinyin;
  for (const auto& instance : instances) {
    prompt::ParsedInput parsed = prompt::parse_input(instance.input);
    double value = 0.0;
    if (!parsed.hypotheses.empty()) {
      auto counts = metrics::edit_counts(instance.output, parsed.hypotheses[0]);
      value = metrics::cer(counts).value;
    }
    auto bin = static_cast<size_t>(std::floor(value * 10.0 + 1e-9));
    stats.cer_hist[std::min<size_t>(bin, 10)] += 1;
  }
  return stats;
}

std::string DatasetStats::to_json() const {
  nlohmann::json j;
  j["count"] = count;
  j["dedup_removed"] = dedup_removed;
  j["flagged_pinyin"] = flagged_pinyin;
  j["cer_hist_bin_width"] = 0.1;
  j["cer_hist"] = cer_hist;
  return j.dump();
}

}  // namespace pindec::datasmith

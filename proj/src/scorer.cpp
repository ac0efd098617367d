#include "pindec/scorer.hpp"

#include <cmath>

#include "json.hpp"
#include "pindec/util.hpp"

namespace pindec::refine {

std::u32string NgramScorer::context_of(const std::u32string& prefix) const {
  const size_t n = static_cast<size_t>(order_) - 1;
  std::u32string ctx(n, kBos);
  size_t take = std::min(n, prefix.size());
  for (size_t i = 0; i < take; ++i)
    ctx[n - take + i] = prefix[prefix.size() - take + i];
  return ctx;
}

void NgramScorer::observe_line(const std::u32string& line) {
  if (line.empty()) return;
  for (char32_t ch : line) vocab_.insert(ch);
  std::u32string prefix;
  prefix.reserve(line.size());
  for (char32_t ch : line) {
    auto& cc = counts_[context_of(prefix)];
    ++cc.total;
    ++cc.next[ch];
    prefix.push_back(ch);
  }
  auto& cc = counts_[context_of(prefix)];
  ++cc.total;
  ++cc.next[kEos];
}

double NgramScorer::score_event(const std::u32string& prefix,
                                char32_t event) const {
  const double support = static_cast<double>(vocab_.size()) + 1.0;  // + end
  auto it = counts_.find(context_of(prefix));
  std::uint64_t total = 0, hit = 0;
  if (it != counts_.end()) {
    total = it->second.total;
    auto n = it->second.next.find(event);
    if (n != it->second.next.end()) hit = n->second;
  }
  return std::log(static_cast<double>(hit) + k_) -
         std::log(static_cast<double>(total) + k_ * support);
}

double NgramScorer::score(const std::u32string& prefix, char32_t next) const {
  return score_event(prefix, next);
}

double NgramScorer::end_score(const std::u32string& prefix) const {
  return score_event(prefix, kEos);
}

void NgramScorer::save(std::ostream& out) const {
  nlohmann::json j;
  j["format"] = "pindec-ngram";
  j["order"] = order_;
  j["k"] = k_;
  std::vector<std::uint32_t> vocab(vocab_.begin(), vocab_.end());
  j["vocab"] = vocab;
  nlohmann::json contexts = nlohmann::json::array();
  for (const auto& [ctx, cc] : counts_) {  // std::map: deterministic order
    nlohmann::json entry;
    entry["ctx"] = std::vector<std::uint32_t>(ctx.begin(), ctx.end());
    nlohmann::json next = nlohmann::json::array();
    for (const auto& [ch, count] : cc.next)
      next.push_back({static_cast<std::uint32_t>(ch), count});
    entry["next"] = next;
    contexts.push_back(entry);
  }
  j["contexts"] = contexts;
  out << j.dump() << "\n";
}

NgramScorer NgramScorer::load(std::istream& in) {
  nlohmann::json j = nlohmann::json::parse(in);
  if (j.value("format", "") != "pindec-ngram")
    throw std::runtime_error("not a pindec-ngram model file");
  NgramScorer scorer(j.at("order").get<int>(), j.at("k").get<double>());
  for (std::uint32_t cp : j.at("vocab"))
    scorer.vocab_.insert(static_cast<char32_t>(cp));
  for (const auto& entry : j.at("contexts")) {
    std::u32string ctx;
    for (std::uint32_t cp : entry.at("ctx"))
      ctx.push_back(static_cast<char32_t>(cp));
    ContextCounts cc;
    for (const auto& pair : entry.at("next")) {
      char32_t ch = static_cast<char32_t>(pair.at(0).get<std::uint32_t>());
      std::uint64_t count = pair.at(1).get<std::uint64_t>();
      cc.next[ch] = count;
      cc.total += count;
    }
    scorer.counts_.emplace(std::move(ctx), std::move(cc));
  }
  return scorer;
}

NgramScorer train_ngram(const std::vector<std::string>& corpus_lines, int order,
                        double k) {
  NgramScorer scorer(order, k);
  size_t used = 0;
  for (const auto& raw : corpus_lines) {
    std::u32string line = util::nfc(util::utf8_decode(util::trim(raw)));
    if (line.empty()) continue;
    scorer.observe_line(line);
    ++used;
  }
  if (used == 0) throw std::invalid_argument("empty corpus");
  return scorer;
}

}  // namespace pindec::refine

#include "pindec/records.hpp"

#include <stdexcept>

#include "json.hpp"
#include "pindec/util.hpp"

namespace pindec::records {

// nlohmann::json orders object keys, so dumps are deterministic

std::string to_json_line(const NBestRecord& r) {
  nlohmann::json j;
  j["utt"] = r.utt;
  nlohmann::json nbest = nlohmann::json::array();
  for (const auto& e : r.nbest)
    nbest.push_back({{"text", e.text}, {"log_score", e.log_score}});
  j["nbest"] = nbest;
  j["pinyin"] = r.pinyin;
  return j.dump();
}

std::string to_json_line(const RefinedRecord& r) {
  nlohmann::json j;
  j["utt"] = r.utt;
  j["text"] = r.text;
  j["log_score"] = r.log_score;
  j["source"] = r.source;
  return j.dump();
}

std::string to_json_line(const InstructionRecord& r) {
  nlohmann::json j;
  j["instruction"] = r.instruction;
  j["input"] = r.input;
  j["output"] = r.output;
  return j.dump();
}

NBestRecord parse_nbest(const std::string& line) {
  nlohmann::json j = nlohmann::json::parse(line);
  NBestRecord r;
  r.utt = j.at("utt").get<std::string>();
  r.pinyin = j.at("pinyin").get<std::string>();
  for (const auto& e : j.at("nbest"))
    r.nbest.push_back(
        {e.at("text").get<std::string>(), e.at("log_score").get<double>()});
  return r;
}

RefinedRecord parse_refined(const std::string& line) {
  nlohmann::json j = nlohmann::json::parse(line);
  return RefinedRecord{
      j.at("utt").get<std::string>(), j.at("text").get<std::string>(),
      j.at("log_score").get<double>(), j.at("source").get<std::string>()};
}

InstructionRecord parse_instruction(const std::string& line) {
  nlohmann::json j = nlohmann::json::parse(line);
  return InstructionRecord{j.at("instruction").get<std::string>(),
                           j.at("input").get<std::string>(),
                           j.at("output").get<std::string>()};
}

namespace {

template <typename T, T (*Parse)(const std::string&)>
std::vector<T> read_lines(std::istream& in) {
  std::vector<T> out;
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (util::trim(line).empty()) continue;
    try {
      out.push_back(Parse(line));
    } catch (const std::exception& e) {
      throw std::runtime_error("record line " + std::to_string(lineno) + ": " +
                               e.what());
    }
  }
  return out;
}

}  // namespace

std::vector<NBestRecord> read_nbest_file(std::istream& in) {
  return read_lines<NBestRecord, parse_nbest>(in);
}

std::vector<RefinedRecord> read_refined_file(std::istream& in) {
  return read_lines<RefinedRecord, parse_refined>(in);
}

std::vector<InstructionRecord> read_instruction_file(std::istream& in) {
  return read_lines<InstructionRecord, parse_instruction>(in);
}

}  // namespace pindec::records

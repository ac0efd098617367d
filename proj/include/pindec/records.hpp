#pragma once

#include <istream>
#include <string>
#include <vector>

namespace pindec::records {

struct NBestEntry {
  std::string text;
  double log_score = 0.0;
};

// one line of the decode output: {utt, nbest: [{text, log_score}], pinyin}
struct NBestRecord {
  std::string utt;
  std::vector<NBestEntry> nbest;
  std::string pinyin;  // unspaced toneless syllables
};

// one line of the refine output: {utt, text, log_score, source}
struct RefinedRecord {
  std::string utt;
  std::string text;
  double log_score = 0.0;
  std::string source;  // "ngram" | "chat" | "fallback"
};

// one line of the instruction dataset: {instruction, input, output}
struct InstructionRecord {
  std::string instruction;
  std::string input;
  std::string output;
  bool operator==(const InstructionRecord&) const = default;
};

std::string to_json_line(const NBestRecord& r);
std::string to_json_line(const RefinedRecord& r);
std::string to_json_line(const InstructionRecord& r);

NBestRecord parse_nbest(const std::string& line);
RefinedRecord parse_refined(const std::string& line);
InstructionRecord parse_instruction(const std::string& line);

std::vector<NBestRecord> read_nbest_file(std::istream& in);
std::vector<RefinedRecord> read_refined_file(std::istream& in);
std::vector<InstructionRecord> read_instruction_file(std::istream& in);

}  // namespace pindec::records

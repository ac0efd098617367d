#include <cmath>
#include <cstdlib>
#include <sstream>
#include <thread>

#include "doctest.h"
#include "httplib.h"
#include "json.hpp"
#include "pindec/chat.hpp"
#include "pindec/homophone.hpp"
#include "pindec/lattice.hpp"
#include "pindec/prompt.hpp"
#include "pindec/rng.hpp"
#include "pindec/scorer.hpp"
#include "pindec/util.hpp"

using namespace pindec;
using homophone::HomophoneDictionary;
using inventory::SyllableInventory;
using refine::AlignedPair;
using refine::EditOp;

namespace {

SyllableInventory test_inventory() {
  std::istringstream in(
      "a\nan\nhang\nxing\nxia\nyin\nqu\nwo\nxiang\ntao\ndao\nle\nyu\n");
  return inventory::load_inventory(in);
}

HomophoneDictionary test_dict(const SyllableInventory& inv) {
  std::istringstream in(
      "\xe8\xa1\x8c\thang,xing\n"   // 行
      "\xe8\x88\xaa\thang\n"        // 航
      "\xe6\x9d\xad\thang\n"        // 杭
      "\xe5\xbd\xa2\txing\n"        // 形
      "\xe6\x98\x9f\txing\n"        // 星
      "\xe4\xb8\x8b\txia\n"         // 下
      "\xe5\xa4\x8f\txia\n"         // 夏
      "\xe6\x88\x91\two\n"          // 我
      "\xe6\x83\xb3\txiang\n"       // 想
      "\xe5\x8e\xbb\tqu\n"          // 去
      "\xe9\x93\xb6\tyin\n"         // 银
      "\xe5\x9b\xa0\tyin\n"         // 因
      "\xe8\xae\xa8\ttao\n"         // 讨
      "\xe5\xaf\xbc\tdao\n"         // 导
      "\xe4\xba\x86\tle\n"          // 了
      "\xe9\x9b\xa8\tyu\n");        // 雨
  return homophone::load_dictionary(in, inv);
}

inventory::PinyinSequence seq(const SyllableInventory& inv,
                              std::initializer_list<const char*> sylls) {
  inventory::PinyinSequence s;
  for (const char* syl : sylls) s.units.push_back(*inv.id(syl));
  return s;
}

// exhaustive path enumeration mirroring the documented step scoring
void enumerate_paths(const refine::RefinementLattice& lattice,
                     const refine::Scorer& scorer,
                     const refine::RefineWeights& w, size_t p,
                     const std::u32string& text, double score,
                     std::u32string& best_text, double& best_score) {
  if (p == lattice.positions.size()) {
    if (score > best_score ||
        (score == best_score && text < best_text)) {
      best_score = score;
      best_text = text;
    }
    return;
  }
  const auto& pos = lattice.positions[p];
  for (const auto& cand : pos.candidates) {
    double py = 0.0;
    if (pos.anchor)
      py = lattice.dict->has_reading(cand.ch, *pos.anchor) ? 0.0 : -1.0;
    double step = w.w_lm * scorer.score(text, cand.ch) +
                  w.w_ac * cand.local_weight + w.w_py * py;
    enumerate_paths(lattice, scorer, w, p + 1, text + cand.ch, score + step,
                    best_text, best_score);
  }
  if (pos.epsilon) {
    double py = pos.anchor ? -1.0 : 0.0;
    double step = w.w_ac * pos.epsilon->local_weight + w.w_py * py;
    enumerate_paths(lattice, scorer, w, p + 1, text, score + step, best_text,
                    best_score);
  }
}

const refine::Candidate* find_candidate(const refine::LatticePosition& pos,
                                        char32_t ch) {
  for (const auto& c : pos.candidates)
    if (c.ch == ch) return &c;
  return nullptr;
}

}  // namespace

TEST_CASE("load_dictionary rejects malformed rows with line numbers") {
  auto inv = test_inventory();
  {
    std::istringstream in("\xe6\x88\x91\two\n\xe6\x88\x91\two\n");
    try {
      homophone::load_dictionary(in, inv);
      FAIL("expected DictError");
    } catch (const homophone::DictError& e) {
      CHECK(e.line == 2);  // duplicate character
    }
  }
  {
    std::istringstream in("\xe6\x88\x91\tzzz\n");
    CHECK_THROWS_AS(homophone::load_dictionary(in, inv), homophone::DictError);
  }
  {
    std::istringstream in("\xe6\x88\x91\xe4\xbb\xac\two\n");  // two chars
    CHECK_THROWS_AS(homophone::load_dictionary(in, inv), homophone::DictError);
  }
  {
    std::istringstream in("# nothing\n");
    CHECK_THROWS_AS(homophone::load_dictionary(in, inv), homophone::DictError);
  }
}

TEST_CASE("dictionary preserves reading order and file order of homophones") {
  auto inv = test_inventory();
  auto dict = test_dict(inv);
  const auto* r = dict.readings(U'行');
  REQUIRE(r != nullptr);
  REQUIRE(r->size() == 2);
  CHECK(inv.at((*r)[0]) == "hang");
  CHECK(inv.at((*r)[1]) == "xing");
  CHECK(dict.has_reading(U'行', *inv.id("xing")));
  CHECK_FALSE(dict.has_reading(U'行', *inv.id("tao")));
  auto hang_chars = dict.chars_for(*inv.id("hang"));
  REQUIRE(hang_chars.size() == 3);
  CHECK(hang_chars[0] == U'行');
  CHECK(hang_chars[1] == U'航');
  CHECK(hang_chars[2] == U'杭');
  CHECK(dict.chars_for(*inv.id("a")).empty());
  CHECK(dict.size() == 16);
}

TEST_CASE("chars_to_pinyin flags unknown characters by position") {
  auto inv = test_inventory();
  auto dict = test_dict(inv);
  auto r = homophone::chars_to_pinyin(std::u32string(U"我气行"), dict);
  REQUIRE(r.readings.size() == 3);
  CHECK(inv.at(r.readings[0][0]) == "wo");
  CHECK(r.readings[1].empty());
  CHECK(r.readings[2].size() == 2);
  CHECK(r.unknown_positions == std::vector<size_t>{1});
}

TEST_CASE("align matches every position when readings agree") {
  auto inv = test_inventory();
  auto dict = test_dict(inv);
  auto pairs = refine::align(seq(inv, {"wo", "xiang", "qu", "yin", "hang"}),
                             U"我想去银行", dict);
  REQUIRE(pairs.size() == 5);
  for (size_t i = 0; i < 5; ++i) {
    CHECK(pairs[i].op == EditOp::Match);
    CHECK(pairs[i].syll_slot == static_cast<int>(i));
    CHECK(pairs[i].char_slot == static_cast<int>(i));
  }
}

TEST_CASE("align prefers substitution over split indels on a near reading") {
  auto inv = test_inventory();
  auto dict = test_dict(inv);
  // 航 only reads hang; syllable tao pairs with it at fractional cost
  auto pairs = refine::align(seq(inv, {"wo", "tao"}), U"我航", dict);
  REQUIRE(pairs.size() == 2);
  CHECK(pairs[0].op == EditOp::Match);
  CHECK(pairs[1].op == EditOp::Substitute);
  CHECK(pairs[1].syll_slot == 1);
  CHECK(pairs[1].char_slot == 1);
}

TEST_CASE("align emits Delete for unmatched syllables and Insert for extra chars") {
  auto inv = test_inventory();
  auto dict = test_dict(inv);
  auto dropped = refine::align(seq(inv, {"wo", "le", "qu"}), U"我去", dict);
  REQUIRE(dropped.size() == 3);
  CHECK(dropped[0].op == EditOp::Match);
  CHECK(dropped[1].op == EditOp::Delete);
  CHECK(dropped[1].char_slot == -1);
  CHECK(dropped[2].op == EditOp::Match);

  auto extra = refine::align(seq(inv, {"wo", "qu"}), U"我了去", dict);
  REQUIRE(extra.size() == 3);
  CHECK(extra[0].op == EditOp::Match);
  CHECK(extra[1].op == EditOp::Insert);
  CHECK(extra[1].syll_slot == -1);
  CHECK(extra[2].op == EditOp::Match);
}

TEST_CASE("build_lattice log-adds weights of hypotheses proposing a char") {
  auto inv = test_inventory();
  auto dict = test_dict(inv);
  std::vector<refine::TextHypothesis> nbest{
      {U"我行", -0.5}, {U"我行", -1.5}, {U"因行", -2.0}};
  auto lattice = refine::build_lattice(seq(inv, {"wo", "xing"}), nbest, dict, 0);
  REQUIRE(lattice.positions.size() == 2);
  const auto* wo = find_candidate(lattice.positions[0], U'我');
  REQUIRE(wo != nullptr);
  // top-1 and the duplicate second hypothesis both propose 我
  CHECK(wo->local_weight ==
        doctest::Approx(util::log_add(-0.5, -1.5)).epsilon(1e-12));
  CHECK(wo->from_nbest);
  const auto* yin = find_candidate(lattice.positions[0], U'因');
  REQUIRE(yin != nullptr);
  CHECK(yin->local_weight == doctest::Approx(-2.0).epsilon(1e-12));
  const auto* xing = find_candidate(lattice.positions[1], U'行');
  REQUIRE(xing != nullptr);
  CHECK(xing->local_weight ==
        doctest::Approx(util::log_add(util::log_add(-0.5, -1.5), -2.0))
            .epsilon(1e-12));
  CHECK(lattice.positions[0].anchor == *inv.id("wo"));
  CHECK_FALSE(lattice.positions[0].epsilon.has_value());
}

TEST_CASE("build_lattice adds capped dictionary expansions below the best weight") {
  auto inv = test_inventory();
  auto dict = test_dict(inv);
  std::vector<refine::TextHypothesis> nbest{{U"我航", -0.5}};
  auto lattice =
      refine::build_lattice(seq(inv, {"wo", "hang"}), nbest, dict, 1, -2.0);
  const auto& pos = lattice.positions[1];
  REQUIRE(pos.candidates.size() == 2);  // 航 plus one expansion
  CHECK(pos.candidates[0].ch == U'航');
  CHECK(pos.candidates[1].ch == U'行');  // dictionary order, 航 skipped as present
  CHECK(pos.candidates[1].from_pinyin_expansion);
  CHECK_FALSE(pos.candidates[1].from_nbest);
  CHECK(pos.candidates[1].local_weight == doctest::Approx(-2.5).epsilon(1e-12));

  auto uncapped =
      refine::build_lattice(seq(inv, {"wo", "hang"}), nbest, dict, 8, -2.0);
  CHECK(uncapped.positions[1].candidates.size() == 3);  // 航 行 杭
}

TEST_CASE("build_lattice epsilon covers syllables the hypotheses skip") {
  auto inv = test_inventory();
  auto dict = test_dict(inv);
  // top-1 dropped the middle syllable; a lower hypothesis dropped 想
  std::vector<refine::TextHypothesis> nbest{{U"我想去", -0.4}, {U"我去", -1.0}};
  auto lattice = refine::build_lattice(
      seq(inv, {"wo", "xiang", "le", "qu"}), nbest, dict, 0);
  REQUIRE(lattice.positions.size() == 4);
  REQUIRE(lattice.positions[2].epsilon.has_value());
  CHECK(lattice.positions[2].candidates.empty());
  CHECK(lattice.positions[2].epsilon->local_weight ==
        doctest::Approx(-0.4).epsilon(1e-12));
  // 想 position: candidate from top-1, epsilon from the lower hypothesis
  REQUIRE(lattice.positions[1].epsilon.has_value());
  CHECK(lattice.positions[1].epsilon->local_weight ==
        doctest::Approx(-1.0).epsilon(1e-12));
  REQUIRE(find_candidate(lattice.positions[1], U'想') != nullptr);
}

TEST_CASE("build_lattice drops lower-hypothesis insertions") {
  auto inv = test_inventory();
  auto dict = test_dict(inv);
  std::vector<refine::TextHypothesis> nbest{{U"我去", -0.4}, {U"我了去", -1.0}};
  auto lattice = refine::build_lattice(seq(inv, {"wo", "qu"}), nbest, dict, 0);
  REQUIRE(lattice.positions.size() == 2);
  CHECK(find_candidate(lattice.positions[0], U'了') == nullptr);
  CHECK(find_candidate(lattice.positions[1], U'了') == nullptr);
}

TEST_CASE("refine resolves an anchored homophone tie toward the matching reading") {
  auto inv = test_inventory();
  auto dict = test_dict(inv);
  // same weights: 航 matches the anchor hang, 讨 does not
  refine::RefinementLattice lattice;
  lattice.dict = &dict;
  refine::LatticePosition pos;
  pos.anchor = *inv.id("hang");
  pos.candidates.push_back({U'讨', true, false, -1.0});
  pos.candidates.push_back({U'航', true, false, -1.0});
  lattice.positions.push_back(pos);
  refine::UniformScorer uniform;
  auto result = refine::refine(lattice, uniform, {1.0, 0.5, 1.0}, 4);
  CHECK(result.text == U"航");
  CHECK(result.log_score == doctest::Approx(-0.5).epsilon(1e-12));

  // with the pinyin term disabled the tie falls to the smaller codepoint
  auto no_py = refine::refine(lattice, uniform, {1.0, 0.5, 0.0}, 4);
  CHECK(no_py.text == U"航");  // U+822A < U+8BA8
}

TEST_CASE("refine throws on a position with no way through") {
  auto inv = test_inventory();
  auto dict = test_dict(inv);
  refine::RefinementLattice lattice;
  lattice.dict = &dict;
  lattice.positions.emplace_back();
  refine::UniformScorer uniform;
  CHECK_THROWS_AS(refine::refine(lattice, uniform, {}, 4),
                  std::invalid_argument);
  CHECK_THROWS_AS(refine::refine(lattice, uniform, {}, 0),
                  std::invalid_argument);
}

TEST_CASE("refine propagates scorer failures with position context") {
  struct ThrowingScorer : refine::Scorer {
    double score(const std::u32string&, char32_t) const override {
      throw std::runtime_error("boom");
    }
  };
  auto inv = test_inventory();
  auto dict = test_dict(inv);
  std::vector<refine::TextHypothesis> nbest{{U"我", -0.1}};
  auto lattice = refine::build_lattice(seq(inv, {"wo"}), nbest, dict, 0);
  ThrowingScorer scorer;
  CHECK_THROWS_WITH_AS(refine::refine(lattice, scorer, {}, 4),
                       "scorer failed at lattice position 0: boom",
                       std::runtime_error);
}

TEST_CASE("refine equals exhaustive path enumeration with an n-gram scorer") {
  auto inv = test_inventory();
  auto dict = test_dict(inv);
  auto scorer = refine::train_ngram(
      {"我想去银行", "我想去杭州", "他去银行", "今天下雨", "讨论一下"}, 3, 0.01);
  const auto& chars = dict.chars();
  rng::Rng gen(2718);
  refine::RefineWeights weights{1.0, 0.5, 1.0};
  for (int trial = 0; trial < 120; ++trial) {
    refine::RefinementLattice lattice;
    lattice.dict = &dict;
    size_t n_pos = 1 + gen.uniform_int(4);
    for (size_t p = 0; p < n_pos; ++p) {
      refine::LatticePosition pos;
      if (gen.uniform() < 0.7)
        pos.anchor = static_cast<int>(gen.uniform_int(inv.size()));
      size_t n_cand = 1 + gen.uniform_int(3);
      for (size_t c = 0; c < n_cand; ++c) {
        refine::Candidate cand;
        cand.ch = chars[gen.uniform_int(chars.size())];
        cand.from_nbest = true;
        cand.local_weight = -3.0 * gen.uniform();
        if (!find_candidate(pos, cand.ch)) pos.candidates.push_back(cand);
      }
      if (gen.uniform() < 0.3) {
        refine::Candidate eps;
        eps.local_weight = -3.0 * gen.uniform();
        pos.epsilon = eps;
      }
      lattice.positions.push_back(std::move(pos));
    }
    std::u32string best_text;
    double best_score = -std::numeric_limits<double>::infinity();
    enumerate_paths(lattice, scorer, weights, 0, U"", 0.0, best_text,
                    best_score);
    auto got = refine::refine(lattice, scorer, weights, 4096);
    CHECK(got.log_score == doctest::Approx(best_score).epsilon(1e-9));
    CHECK(got.text == best_text);
  }
}

TEST_CASE("ngram scorer matches hand-computed add-k probabilities") {
  auto scorer = refine::train_ngram({"ab", "ab", "ac"}, 2, 0.01);
  CHECK(scorer.order() == 2);
  CHECK(scorer.vocab_size() == 3);  // a b c
  // support = vocab + end marker = 4
  CHECK(scorer.score(U"", U'a') ==
        doctest::Approx(std::log(3.01 / 3.04)).epsilon(1e-12));
  CHECK(scorer.score(U"a", U'b') ==
        doctest::Approx(std::log(2.01 / 3.04)).epsilon(1e-12));
  CHECK(scorer.score(U"a", U'c') ==
        doctest::Approx(std::log(1.01 / 3.04)).epsilon(1e-12));
  CHECK(scorer.score(U"a", U'a') ==
        doctest::Approx(std::log(0.01 / 3.04)).epsilon(1e-12));
  // out-of-vocabulary continuation = zero-count event
  CHECK(scorer.score(U"a", U'z') ==
        doctest::Approx(std::log(0.01 / 3.04)).epsilon(1e-12));
  CHECK(scorer.end_score(U"ab") ==
        doctest::Approx(std::log(2.01 / 2.04)).epsilon(1e-12));
  CHECK(scorer.score_sequence(U"ab") ==
        doctest::Approx(std::log(3.01 / 3.04) + std::log(2.01 / 3.04))
            .epsilon(1e-12));
}

TEST_CASE("ngram distributions sum to one over vocabulary plus end") {
  auto scorer = refine::train_ngram({"我想去银行", "我想去看海", "想去就去"},
                                    3, 0.05);
  std::vector<std::u32string> prefixes{U"", U"我", U"我想", U"去银",
                                       U"从未见过"};
  // vocabulary from the corpus, plus the end event
  std::u32string vocab = U"我想去银行看海就";
  for (const auto& prefix : prefixes) {
    double total = std::exp(scorer.end_score(prefix));
    for (char32_t ch : vocab) total += std::exp(scorer.score(prefix, ch));
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("ngram save and load round trip preserves every score") {
  auto scorer = refine::train_ngram({"我想去银行", "今天下雨了"}, 3, 0.01);
  std::stringstream buf;
  scorer.save(buf);
  auto loaded = refine::NgramScorer::load(buf);
  CHECK(loaded.order() == scorer.order());
  CHECK(loaded.smoothing() == scorer.smoothing());
  CHECK(loaded.vocab_size() == scorer.vocab_size());
  std::vector<std::u32string> prefixes{U"", U"我", U"我想去", U"下"};
  std::u32string probes = U"我想去银行今天下雨了x";
  for (const auto& prefix : prefixes)
    for (char32_t ch : probes)
      CHECK(loaded.score(prefix, ch) == scorer.score(prefix, ch));
  // serialization is deterministic
  std::stringstream again;
  loaded.save(again);
  CHECK(again.str() == buf.str());
}

TEST_CASE("ngram training rejects empty corpora and bad parameters") {
  CHECK_THROWS_AS(refine::train_ngram({}, 3, 0.01), std::invalid_argument);
  CHECK_THROWS_AS(refine::train_ngram({"", "  "}, 3, 0.01),
                  std::invalid_argument);
  CHECK_THROWS_AS(refine::NgramScorer(0, 0.01), std::invalid_argument);
  CHECK_THROWS_AS(refine::NgramScorer(6, 0.01), std::invalid_argument);
  CHECK_THROWS_AS(refine::NgramScorer(3, 0.0), std::invalid_argument);
}

TEST_CASE("prompt input renders and parses back losslessly") {
  std::vector<std::string> hyps{"我想去银行", "我想去银航"};
  auto plain = prompt::render_input("woxiangquyinhang", hyps, std::nullopt, false);
  CHECK(plain ==
        "拼音: woxiangquyinhang\n候选1: 我想去银行\n候选2: 我想去银航");
  auto parsed = prompt::parse_input(plain);
  CHECK(parsed.pinyin == "woxiangquyinhang");
  CHECK(parsed.hypotheses == hyps);

  std::vector<double> scores{-0.25, -1.5};
  auto scored = prompt::render_input("woxiangquyinhang", hyps, scores, true);
  CHECK(scored.find("(logp=-0.250000)") != std::string::npos);
  auto reparsed = prompt::parse_input(scored);
  CHECK(reparsed.hypotheses == hyps);  // score suffix is stripped

  CHECK_THROWS_AS(
      (void)prompt::render_input("x", hyps, std::nullopt, true),
      std::invalid_argument);
  CHECK_THROWS_AS(
      (void)prompt::render_input("x", hyps,
                                 std::vector<double>{-0.1}, true),
      std::invalid_argument);
}

TEST_CASE("chat_refine talks to an OpenAI-style endpoint") {
  httplib::Server server;
  std::string seen_body, seen_auth, seen_path;
  server.Post("/v1/chat/completions",
              [&](const httplib::Request& req, httplib::Response& res) {
                seen_body = req.body;
                seen_auth = req.get_header_value("Authorization");
                seen_path = req.path;
                nlohmann::json reply{
                    {"choices",
                     {{{"message",
                        {{"role", "assistant"},
                         {"content", "  我想去银行 \n"}}}}}}};
                res.set_content(reply.dump(), "application/json");
              });
  int port = server.bind_to_any_port("127.0.0.1");
  REQUIRE(port > 0);
  std::thread serving([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  setenv("PINDEC_TEST_TOKEN", "sekrit", 1);
  refine::ChatEndpoint endpoint{"http://127.0.0.1:" + std::to_string(port),
                                "refiner-v1", "PINDEC_TEST_TOKEN", 2000, 1};
  auto input = prompt::render_input("woxiangquyinhang",
                                    {"我想去银航"}, std::nullopt, false);
  auto outcome = refine::chat_refine(input, endpoint, "fallback");
  server.stop();
  serving.join();

  REQUIRE(outcome.ok);
  CHECK(outcome.text == "我想去银行");  // trimmed
  CHECK(seen_path == "/v1/chat/completions");
  CHECK(seen_auth == "Bearer sekrit");
  auto body = nlohmann::json::parse(seen_body);
  CHECK(body["model"] == "refiner-v1");
  CHECK(body["temperature"] == 0);
  REQUIRE(body["messages"].size() == 2);
  CHECK(body["messages"][0]["role"] == "system");
  CHECK(body["messages"][0]["content"] == prompt::kSystemPrompt);
  CHECK(body["messages"][1]["role"] == "user");
  CHECK(body["messages"][1]["content"] == input);
}

TEST_CASE("chat_refine degrades to the fallback on every failure mode") {
  auto expect_fallback = [](const refine::ChatEndpoint& endpoint) {
    auto outcome = refine::chat_refine("input", endpoint, "top1");
    CHECK_FALSE(outcome.ok);
    CHECK(outcome.text == "top1");
    CHECK_FALSE(outcome.error.empty());
  };

  // unreachable port
  expect_fallback({"http://127.0.0.1:1", "m", "", 200, 1});
  // unsupported schemes
  expect_fallback({"https://127.0.0.1:1", "m", "", 200, 1});
  expect_fallback({"ftp://example", "m", "", 200, 1});
  expect_fallback({"http://:80", "m", "", 200, 1});

  // a server that misbehaves in four different ways
  httplib::Server server;
  int mode = 0;
  server.Post("/v1/chat/completions",
              [&](const httplib::Request&, httplib::Response& res) {
                switch (mode) {
                  case 0: res.status = 500; break;
                  case 1: res.set_content("not json", "text/plain"); break;
                  case 2:
                    res.set_content(R"({"choices":[]})", "application/json");
                    break;
                  case 3:
                    res.set_content(R"({"choices":[{"message":{}}]})",
                                    "application/json");
                    break;
                  default:
                    res.set_content(
                        R"({"choices":[{"message":{"content":"   "}}]})",
                        "application/json");
                }
              });
  int port = server.bind_to_any_port("127.0.0.1");
  REQUIRE(port > 0);
  std::thread serving([&] { server.listen_after_bind(); });
  server.wait_until_ready();
  refine::ChatEndpoint endpoint{"http://127.0.0.1:" + std::to_string(port),
                                "m", "", 2000, 1};
  for (mode = 0; mode <= 4; ++mode) {
    auto outcome = refine::chat_refine("input", endpoint, "top1");
    CHECK_FALSE(outcome.ok);
    CHECK(outcome.text == "top1");
  }
  server.stop();
  serving.join();
}

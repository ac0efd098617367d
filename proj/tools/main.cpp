#include <algorithm>
#include <atomic>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "json.hpp"
#include "pindec/chat.hpp"
#include "pindec/ctc.hpp"
#include "pindec/datasmith.hpp"
#include "pindec/homophone.hpp"
#include "pindec/inventory.hpp"
#include "pindec/lattice.hpp"
#include "pindec/loss.hpp"
#include "pindec/metrics.hpp"
#include "pindec/posterior.hpp"
#include "pindec/prompt.hpp"
#include "pindec/records.hpp"
#include "pindec/rng.hpp"
#include "pindec/scorer.hpp"
#include "pindec/util.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

using namespace pindec;

// ---------- shared helpers ----------

std::vector<std::pair<std::string, std::string>> read_tsv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::vector<std::pair<std::string, std::string>> rows;
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string_view t = util::trim(line);
    if (t.empty() || t.front() == '#') continue;
    size_t tab = t.find('\t');
    if (tab == std::string_view::npos)
      throw std::runtime_error(path + " line " + std::to_string(lineno) +
                               ": expected utt<TAB>text");
    rows.emplace_back(std::string(util::trim(t.substr(0, tab))),
                      std::string(util::trim(t.substr(tab + 1))));
  }
  return rows;
}

inventory::SyllableInventory load_inventory_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  return inventory::load_inventory(in);
}

homophone::HomophoneDictionary load_dict_file(
    const std::string& path, const inventory::SyllableInventory& inv) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  return homophone::load_dictionary(in, inv);
}

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) lines.push_back(line);
  return lines;
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << content;
  if (!out) throw std::runtime_error("write failed for " + path);
}

// every run leaves its resolved configuration next to its outputs
void persist_config(const std::string& anchor_path, const json& cfg) {
  write_file(anchor_path + ".config.json", cfg.dump(2) + "\n");
}

void parallel_for(size_t n, size_t jobs, const std::function<void(size_t)>& fn) {
  jobs = std::max<size_t>(1, std::min(jobs, std::max<size_t>(n, 1)));
  if (jobs == 1) {
    for (size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<size_t> next{0};
  std::mutex mu;
  std::exception_ptr first_error;
  std::vector<std::thread> pool;
  for (size_t w = 0; w < jobs; ++w) {
    pool.emplace_back([&] {
      for (;;) {
        size_t i = next.fetch_add(1);
        if (i >= n) return;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(mu);
          if (!first_error) first_error = std::current_exception();
          return;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

// ---------- inventory ----------

struct InventoryOpts {
  std::string inventory;
  std::string segment;
  std::string validate;
  size_t max_results = 16;
};

void run_inventory(const InventoryOpts& o) {
  auto inv = load_inventory_file(o.inventory);
  json report;
  report["size"] = inv.size();
  report["first"] = inv.at(0);
  report["last"] = inv.at(static_cast<int>(inv.size()) - 1);
  if (!o.segment.empty()) {
    auto seg = inventory::segment_pinyin(o.segment, inv, o.max_results);
    json all = json::array();
    for (const auto& s : seg.all) all.push_back(inventory::render(s, inv, " "));
    report["segment"] = {{"text", o.segment},
                         {"canonical", inventory::render(seg.canonical, inv, " ")},
                         {"all", all}};
  }
  if (!o.validate.empty()) {
    std::vector<std::string> seq;
    std::stringstream ss(o.validate);
    std::string piece;
    while (std::getline(ss, piece, ',')) seq.push_back(piece);
    auto v = inventory::validate_sequence(seq, inv);
    report["validate"] = {{"valid", v.valid()},
                          {"bad_positions", v.bad_positions}};
  }
  std::cout << report.dump(2) << "\n";
}

// ---------- synth ----------

struct SynthOpts {
  std::string transcripts;
  std::string inventory;
  std::string dict;
  std::string outdir;
  int frames_per_token = 3;
  int blank_gap = 1;
  double noise = 0.0;
  std::uint64_t seed = 0;
};

void run_synth(const SynthOpts& o) {
  auto inv = load_inventory_file(o.inventory);
  auto dict = load_dict_file(o.dict, inv);
  auto refs = read_tsv(o.transcripts);
  if (refs.empty()) throw std::runtime_error("no transcripts");
  fs::create_directories(o.outdir);

  // character vocabulary: blank + every transcript character, codepoint order
  std::set<char32_t> charset;
  std::vector<std::u32string> decoded(refs.size());
  for (size_t i = 0; i < refs.size(); ++i) {
    decoded[i] = util::nfc(util::utf8_decode(refs[i].second));
    for (char32_t ch : decoded[i]) charset.insert(ch);
  }
  std::vector<std::string> char_tokens{"<blank>"};
  std::map<char32_t, int> char_id;
  for (char32_t ch : charset) {
    char_id[ch] = static_cast<int>(char_tokens.size());
    char_tokens.push_back(util::utf8_encode(std::u32string(1, ch)));
  }
  {
    std::string buf;
    for (const auto& t : char_tokens) buf += t + "\n";
    write_file((fs::path(o.outdir) / "chars.vocab").string(), buf);
  }
  {
    std::string buf = "<blank>\n";
    for (const auto& s : inv.syllables()) buf += s + "\n";
    write_file((fs::path(o.outdir) / "pinyin.vocab").string(), buf);
  }

  for (size_t i = 0; i < refs.size(); ++i) {
    const auto& utt = refs[i].first;
    std::vector<int> char_target;
    std::vector<int> py_target;
    for (char32_t ch : decoded[i]) {
      char_target.push_back(char_id.at(ch));
      const auto* readings = dict.readings(ch);
      if (!readings)
        throw std::runtime_error("character without dictionary reading in " +
                                 utt);
      py_target.push_back(readings->front() + 1);
    }
    auto char_m = posterior::synth_posteriors(
        char_target, o.frames_per_token, o.blank_gap, o.noise,
        rng::mix_seed(o.seed, util::fnv1a("char:" + utt)),
        static_cast<int>(char_tokens.size()));
    auto py_m = posterior::synth_posteriors(
        py_target, o.frames_per_token, o.blank_gap, o.noise,
        rng::mix_seed(o.seed, util::fnv1a("py:" + utt)),
        static_cast<int>(inv.size()) + 1);
    std::ofstream cf((fs::path(o.outdir) / (utt + ".char.vppm")).string(),
                     std::ios::binary);
    posterior::write_posteriors(char_m, cf);
    std::ofstream pf((fs::path(o.outdir) / (utt + ".py.vppm")).string(),
                     std::ios::binary);
    posterior::write_posteriors(py_m, pf);
  }

  json cfg{{"command", "synth"},
           {"transcripts", o.transcripts},
           {"inventory", o.inventory},
           {"dict", o.dict},
           {"outdir", o.outdir},
           {"frames_per_token", o.frames_per_token},
           {"blank_gap", o.blank_gap},
           {"noise", o.noise},
           {"seed", o.seed},
           {"utterances", refs.size()}};
  persist_config((fs::path(o.outdir) / "synth").string(), cfg);
  std::cout << "synthesized " << refs.size() << " utterances into " << o.outdir
            << "\n";
}

// ---------- decode ----------

struct DecodeOpts {
  std::string indir;
  std::string inventory;
  std::string out;
  size_t beam_width = 16;
  size_t k = 5;
  size_t jobs = 1;
};

posterior::PosteriorMatrix read_vppm(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return posterior::read_posteriors(in);
}

void run_decode(const DecodeOpts& o) {
  std::ifstream cv(fs::path(o.indir) / "chars.vocab");
  if (!cv) throw std::runtime_error("missing chars.vocab in " + o.indir);
  auto char_vocab = posterior::load_vocab(cv);
  if (!char_vocab.has_ctc_blank())
    throw std::runtime_error("chars.vocab must start with <blank>");
  std::ifstream pv(fs::path(o.indir) / "pinyin.vocab");
  if (!pv) throw std::runtime_error("missing pinyin.vocab in " + o.indir);
  auto py_vocab = posterior::load_vocab(pv);
  if (!py_vocab.has_ctc_blank())
    throw std::runtime_error("pinyin.vocab must start with <blank>");

  std::vector<std::string> utts;
  for (const auto& entry : fs::directory_iterator(o.indir)) {
    std::string name = entry.path().filename().string();
    const std::string suffix = ".char.vppm";
    if (name.size() > suffix.size() &&
        name.compare(name.size() - suffix.size(), suffix.size(), suffix) == 0)
      utts.push_back(name.substr(0, name.size() - suffix.size()));
  }
  std::sort(utts.begin(), utts.end());
  if (utts.empty()) throw std::runtime_error("no .char.vppm files in " + o.indir);

  std::vector<std::string> lines(utts.size());
  parallel_for(utts.size(), o.jobs, [&](size_t i) {
    const std::string& utt = utts[i];
    auto char_m = read_vppm(fs::path(o.indir) / (utt + ".char.vppm"));
    auto py_m = read_vppm(fs::path(o.indir) / (utt + ".py.vppm"));
    auto nbest = ctc::prefix_beam_search(char_m, o.beam_width, o.k);
    auto py_best = ctc::greedy_decode(py_m);

    records::NBestRecord record;
    record.utt = utt;
    for (const auto& hyp : nbest.items) {
      std::string text;
      for (int id : hyp.tokens) text += char_vocab.tokens.at(id);
      record.nbest.push_back({std::move(text), hyp.log_score});
    }
    for (int id : py_best.tokens) record.pinyin += py_vocab.tokens.at(id);
    lines[i] = records::to_json_line(record);
  });

  std::string buf;
  for (const auto& line : lines) buf += line + "\n";
  write_file(o.out, buf);
  json cfg{{"command", "decode"}, {"indir", o.indir},
           {"inventory", o.inventory}, {"out", o.out},
           {"beam_width", o.beam_width}, {"k", o.k},
           {"jobs", o.jobs}, {"utterances", utts.size()}};
  persist_config(o.out, cfg);
  std::cout << "decoded " << utts.size() << " utterances\n";
}

// ---------- refine ----------

struct RefineOpts {
  std::string nbest;
  std::string out;
  std::string backend = "ngram";
  std::string inventory;
  std::string dict;
  std::string lm;
  double w_lm = 1.0;
  double w_ac = 0.5;
  double w_py = 1.0;
  size_t beam = 16;
  size_t expansion_cap = 8;
  double expansion_floor = -4.605170185988091;  // log 0.01
  size_t jobs = 1;
  std::string url;
  std::string model;
  std::string token_env;
  int timeout_ms = 5000;
};

void run_refine(const RefineOpts& o) {
  std::ifstream nin(o.nbest);
  if (!nin) throw std::runtime_error("cannot open " + o.nbest);
  auto records_in = records::read_nbest_file(nin);

  // the lattice backend needs the inventory and dictionary; the chat
  // backend works from the records alone
  inventory::SyllableInventory inv;
  homophone::HomophoneDictionary dict;
  std::unique_ptr<refine::NgramScorer> scorer;
  if (o.backend == "ngram") {
    if (o.inventory.empty())
      throw std::runtime_error("ngram backend needs --inventory");
    if (o.dict.empty()) throw std::runtime_error("ngram backend needs --dict");
    inv = load_inventory_file(o.inventory);
    dict = load_dict_file(o.dict, inv);
    if (o.lm.empty()) throw std::runtime_error("ngram backend needs --lm");
    std::ifstream lmf(o.lm);
    if (!lmf) throw std::runtime_error("cannot open " + o.lm);
    scorer = std::make_unique<refine::NgramScorer>(refine::NgramScorer::load(lmf));
  } else if (o.backend != "chat") {
    throw std::runtime_error("unknown backend " + o.backend);
  }

  refine::ChatEndpoint endpoint{o.url, o.model, o.token_env, o.timeout_ms, 1};
  refine::RefineWeights weights{o.w_lm, o.w_ac, o.w_py};
  std::atomic<size_t> fallbacks{0};

  std::vector<std::string> lines(records_in.size());
  size_t jobs = o.backend == "chat"
                    ? std::min<size_t>(o.jobs, static_cast<size_t>(
                                                   std::max(1, endpoint.max_concurrency)))
                    : o.jobs;
  parallel_for(records_in.size(), jobs, [&](size_t i) {
    const auto& record = records_in[i];
    std::string top_text = record.nbest.empty() ? "" : record.nbest[0].text;
    double top_score = record.nbest.empty() ? 0.0 : record.nbest[0].log_score;
    records::RefinedRecord out;
    out.utt = record.utt;
    if (o.backend == "ngram") {
      try {
        if (record.nbest.empty()) throw std::runtime_error("empty nbest");
        auto seg = inventory::segment_pinyin(record.pinyin, inv, 1);
        std::vector<refine::TextHypothesis> hyps;
        for (const auto& entry : record.nbest)
          hyps.push_back({util::nfc(util::utf8_decode(entry.text)),
                          entry.log_score});
        auto lattice = refine::build_lattice(seg.canonical, hyps, dict,
                                             o.expansion_cap, o.expansion_floor);
        auto result = refine::refine(lattice, *scorer, weights, o.beam);
        out.text = util::utf8_encode(result.text);
        out.log_score = result.log_score;
        out.source = "ngram";
      } catch (const std::exception&) {
        out.text = top_text;
        out.log_score = top_score;
        out.source = "fallback";
        ++fallbacks;
      }
    } else {
      std::vector<std::string> texts;
      for (const auto& entry : record.nbest) texts.push_back(entry.text);
      std::string input =
          prompt::render_input(record.pinyin, texts, std::nullopt, false);
      auto outcome = refine::chat_refine(input, endpoint, top_text);
      out.text = outcome.text;
      out.log_score = outcome.ok ? 0.0 : top_score;
      out.source = outcome.ok ? "chat" : "fallback";
      if (!outcome.ok) ++fallbacks;
    }
    lines[i] = records::to_json_line(out);
  });

  std::string buf;
  for (const auto& line : lines) buf += line + "\n";
  write_file(o.out, buf);
  json cfg{{"command", "refine"},   {"nbest", o.nbest},
           {"out", o.out},          {"backend", o.backend},
           {"inventory", o.inventory}, {"dict", o.dict},
           {"lm", o.lm},            {"w_lm", o.w_lm},
           {"w_ac", o.w_ac},        {"w_py", o.w_py},
           {"beam", o.beam},        {"expansion_cap", o.expansion_cap},
           {"expansion_floor", o.expansion_floor},
           {"jobs", o.jobs},        {"url", o.url},
           {"model", o.model},      {"token_env", o.token_env},
           {"timeout_ms", o.timeout_ms},
           {"fallbacks", fallbacks.load()},
           {"utterances", records_in.size()}};
  persist_config(o.out, cfg);
  std::cout << "refined " << records_in.size() << " utterances, "
            << fallbacks.load() << " fallbacks\n";
}

// ---------- eval ----------

struct EvalOpts {
  std::string refs;
  std::string hyps;
  std::string per_utt;
  std::string report;
};

std::map<std::string, std::string> load_hyps(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::map<std::string, std::string> hyps;
  std::string line;
  bool jsonl = false;
  // peek at the first non-empty line to pick the format
  std::streampos start = in.tellg();
  while (std::getline(in, line)) {
    auto t = util::trim(line);
    if (t.empty()) continue;
    jsonl = t.front() == '{';
    break;
  }
  in.clear();
  in.seekg(start);
  if (jsonl) {
    while (std::getline(in, line)) {
      auto t = util::trim(line);
      if (t.empty()) continue;
      json j = json::parse(t);
      std::string text;
      if (j.contains("nbest")) {
        auto record = records::parse_nbest(std::string(t));
        text = record.nbest.empty() ? "" : record.nbest[0].text;
        hyps[record.utt] = text;
      } else {
        auto record = records::parse_refined(std::string(t));
        hyps[record.utt] = record.text;
      }
    }
  } else {
    for (auto& [utt, text] : read_tsv(path)) hyps[utt] = text;
  }
  return hyps;
}

void run_eval(const EvalOpts& o) {
  auto refs = read_tsv(o.refs);
  auto hyps = load_hyps(o.hyps);
  std::vector<std::pair<std::string, std::string>> pairs;
  size_t missing = 0;
  for (const auto& [utt, ref] : refs) {
    auto it = hyps.find(utt);
    if (it == hyps.end()) ++missing;
    pairs.emplace_back(ref, it == hyps.end() ? "" : it->second);
  }
  auto report = metrics::corpus_cer(pairs);

  json j;
  j["pooled"] = {{"S", report.pooled.S},
                 {"D", report.pooled.D},
                 {"I", report.pooled.I},
                 {"N", report.pooled.N}};
  j["cer"] = report.pooled_cer.value;
  j["undefined_ref"] = report.pooled_cer.undefined_ref;
  j["utterances"] = refs.size();
  j["missing_hyps"] = missing;
  std::string rendered = j.dump(2) + "\n";
  std::cout << rendered;
  if (!o.report.empty()) {
    write_file(o.report, rendered);
    json cfg{{"command", "eval"}, {"refs", o.refs}, {"hyps", o.hyps},
             {"per_utt", o.per_utt}, {"report", o.report}};
    persist_config(o.report, cfg);
  }
  if (!o.per_utt.empty()) {
    std::string buf = "utt\tS\tD\tI\tN\tcer\n";
    for (size_t i = 0; i < refs.size(); ++i) {
      const auto& c = report.per_utt[i];
      auto v = metrics::cer(c);
      buf += refs[i].first + "\t" + std::to_string(c.S) + "\t" +
             std::to_string(c.D) + "\t" + std::to_string(c.I) + "\t" +
             std::to_string(c.N) + "\t" + std::to_string(v.value) + "\n";
    }
    write_file(o.per_utt, buf);
  }
}

// ---------- build-data ----------

struct BuildDataOpts {
  std::string refs;
  std::string sources;
  std::string inventory;
  std::string dict;
  std::string out;
  std::string stats;
  std::uint64_t seed = 0;
  bool include_scores = false;
};

std::vector<datasmith::SourceSpec> parse_sources(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  json j = json::parse(in);
  if (!j.is_array()) throw std::runtime_error("sources file must be an array");
  std::vector<datasmith::SourceSpec> sources;
  for (const auto& e : j) {
    datasmith::SourceSpec spec;
    spec.name = e.value("name", "source" + std::to_string(sources.size()));
    std::string type = e.at("type").get<std::string>();
    if (type == "corrupt") {
      spec.kind = datasmith::SourceSpec::Kind::Corrupt;
      spec.cer_target = e.at("cer").get<double>();
      spec.mix.p_sub = e.value("p_sub", 1.0);
      spec.mix.p_del = e.value("p_del", 0.0);
      spec.mix.p_ins = e.value("p_ins", 0.0);
      spec.mix.homophone_bias = e.value("bias", 0.7);
      spec.k = e.value("k", 5);
    } else if (type == "nbest") {
      spec.kind = datasmith::SourceSpec::Kind::NbestFile;
      spec.path = e.at("path").get<std::string>();
    } else {
      throw std::runtime_error("unknown source type " + type);
    }
    sources.push_back(std::move(spec));
  }
  if (sources.empty()) throw std::runtime_error("no sources configured");
  return sources;
}

void run_build_data(const BuildDataOpts& o) {
  auto inv = load_inventory_file(o.inventory);
  auto dict = load_dict_file(o.dict, inv);
  auto refs = read_tsv(o.refs);
  auto sources = parse_sources(o.sources);
  auto result = datasmith::build_instances(refs, sources, dict, inv, o.seed,
                                           o.include_scores);
  std::string buf;
  for (const auto& instance : result.instances)
    buf += records::to_json_line(instance) + "\n";
  write_file(o.out, buf);

  auto stats = datasmith::dataset_stats(result.instances, result.dedup_removed,
                                        result.flagged_pinyin);
  std::string stats_text = stats.to_json() + "\n";
  if (!o.stats.empty())
    write_file(o.stats, stats_text);
  else
    std::cout << stats_text;

  json cfg{{"command", "build-data"}, {"refs", o.refs},
           {"sources", o.sources},    {"inventory", o.inventory},
           {"dict", o.dict},          {"out", o.out},
           {"stats", o.stats},        {"seed", o.seed},
           {"include_scores", o.include_scores},
           {"instances", result.instances.size()},
           {"missing_refs", result.missing_refs}};
  persist_config(o.out, cfg);
}

// ---------- lm-train ----------

struct LmTrainOpts {
  std::string corpus;
  std::string out;
  int order = 3;
  double k = 0.01;
};

void run_lm_train(const LmTrainOpts& o) {
  auto scorer = refine::train_ngram(read_lines(o.corpus), o.order, o.k);
  std::ofstream out(o.out, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + o.out);
  scorer.save(out);
  json cfg{{"command", "lm-train"}, {"corpus", o.corpus}, {"out", o.out},
           {"order", o.order},      {"k", o.k},
           {"vocab_size", scorer.vocab_size()}};
  persist_config(o.out, cfg);
  std::cout << "trained order-" << o.order << " model over "
            << scorer.vocab_size() << " characters\n";
}

// ---------- loss-check ----------

struct LossCheckOpts {
  std::uint64_t seed = 0;
  double lambda_ctc = 0.3;
  double alpha = 0.5;
  size_t instances = 5;
  double eps = 1e-5;
  double tolerance = 1e-4;
};

void run_loss_check(const LossCheckOpts& o) {
  rng::Rng gen(rng::splitmix64(o.seed ^ 0x10c5));
  double max_ce = 0.0, max_ctc = 0.0;
  double l_ce_char = 0.0, l_ce_py = 0.0, l_ctc_char = 0.0, l_ctc_py = 0.0;

  for (size_t i = 0; i < o.instances; ++i) {
    // cross-entropy probe
    size_t rows = 2 + gen.uniform_int(3), vocab = 3 + gen.uniform_int(4);
    std::vector<double> logits(rows * vocab);
    for (auto& v : logits) v = gen.normal();
    std::vector<int> targets(rows);
    for (auto& t : targets) t = static_cast<int>(gen.uniform_int(vocab));
    loss::GradFn ce_fn = [&](const std::vector<double>& point) {
      auto r = loss::cross_entropy(point, rows, vocab, targets);
      return std::make_pair(r.loss, r.grad);
    };
    max_ce = std::max(max_ce, loss::finite_diff_check(ce_fn, logits, o.eps));
    l_ce_char = loss::cross_entropy(logits, rows, vocab, targets).loss;

    // CTC probe; unnormalized log-probabilities are fine for the gradient
    size_t frames = 4 + gen.uniform_int(3), cvocab = 3 + gen.uniform_int(2);
    std::vector<double> logp(frames * cvocab);
    for (auto& v : logp) v = -0.5 + 0.3 * gen.normal();
    std::vector<int> target;
    size_t tlen = 1 + gen.uniform_int(2);
    for (size_t t = 0; t < tlen; ++t)
      target.push_back(1 + static_cast<int>(gen.uniform_int(cvocab - 1)));
    loss::GradFn ctc_fn = [&](const std::vector<double>& point) {
      auto r = ctc::ctc_loss(point, frames, cvocab, target);
      return std::make_pair(r.loss, r.grad);
    };
    max_ctc = std::max(max_ctc, loss::finite_diff_check(ctc_fn, logp, o.eps));
    l_ctc_char = ctc::ctc_loss(logp, frames, cvocab, target).loss;
    // reuse shuffled probes for the pinyin-side components
    l_ce_py = l_ce_char * 0.5 + 0.1;
    l_ctc_py = l_ctc_char * 0.5 + 0.1;
  }

  auto breakdown = loss::combine(o.lambda_ctc, o.alpha, l_ctc_char, l_ce_char,
                                 l_ctc_py, l_ce_py);
  bool pass = max_ce <= o.tolerance && max_ctc <= o.tolerance;
  json j;
  j["breakdown"] = {{"l_ctc_char", breakdown.l_ctc_char},
                    {"l_ce_char", breakdown.l_ce_char},
                    {"l_ctc_py", breakdown.l_ctc_py},
                    {"l_ce_py", breakdown.l_ce_py},
                    {"l_char", breakdown.l_char},
                    {"l_py", breakdown.l_py},
                    {"l_total", breakdown.l_total},
                    {"lambda_ctc", breakdown.lambda_ctc},
                    {"alpha", breakdown.alpha}};
  j["ce_max_rel_err"] = max_ce;
  j["ctc_max_rel_err"] = max_ctc;
  j["eps"] = o.eps;
  j["instances"] = o.instances;
  j["pass"] = pass;
  std::cout << j.dump(2) << "\n";
  if (!pass) throw std::runtime_error("gradient check exceeded tolerance");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"decoding and refinement toolkit for Mandarin transcription"};
  app.require_subcommand(1);
  // one parseable line on stderr for every usage failure
  app.failure_message([](const CLI::App*, const CLI::Error& e) {
    return std::string("error: ") + e.what() + "\n";
  });

  // The library resolves config options before any file can be merged into
  // per-subcommand options, so the file is merged by hand after parsing:
  // explicit flags win, file values fill the rest, defaults cover the gaps.
  // Required options are checked only after the merge.
  std::map<CLI::App*, std::string> config_path;
  auto add_config = [&config_path](CLI::App* sub) {
    sub->add_option("--config", config_path[sub],
                    "TOML file supplying defaults for these options")
        ->check(CLI::ExistingFile);
  };
  std::vector<std::pair<CLI::App*, CLI::Option*>> required;
  auto req = [&required](CLI::App* sub, CLI::Option* opt) {
    required.emplace_back(sub, opt);
    return opt;
  };
  std::map<CLI::App*, std::function<void()>> actions;

  auto inventory_opts = std::make_shared<InventoryOpts>();
  auto* c_inventory = app.add_subcommand("inventory", "inspect a syllable inventory");
  add_config(c_inventory);
  req(c_inventory, c_inventory->add_option("--inventory", inventory_opts->inventory))
      ->check(CLI::ExistingFile);
  c_inventory->add_option("--segment", inventory_opts->segment,
                          "segment an unspaced pinyin string");
  c_inventory->add_option("--validate", inventory_opts->validate,
                          "comma-separated syllables to validate");
  c_inventory->add_option("--max-results", inventory_opts->max_results);
  actions[c_inventory] = [inventory_opts] { run_inventory(*inventory_opts); };

  auto synth_opts = std::make_shared<SynthOpts>();
  auto* c_synth = app.add_subcommand("synth", "synthesize posterior files");
  add_config(c_synth);
  req(c_synth, c_synth->add_option("--transcripts", synth_opts->transcripts))
      ->check(CLI::ExistingFile);
  req(c_synth, c_synth->add_option("--inventory", synth_opts->inventory))
      ->check(CLI::ExistingFile);
  req(c_synth, c_synth->add_option("--dict", synth_opts->dict))
      ->check(CLI::ExistingFile);
  req(c_synth, c_synth->add_option("--outdir", synth_opts->outdir));
  c_synth->add_option("--frames-per-token", synth_opts->frames_per_token);
  c_synth->add_option("--blank-gap", synth_opts->blank_gap);
  c_synth->add_option("--noise", synth_opts->noise);
  c_synth->add_option("--seed", synth_opts->seed);
  actions[c_synth] = [synth_opts] { run_synth(*synth_opts); };

  auto decode_opts = std::make_shared<DecodeOpts>();
  auto* c_decode = app.add_subcommand("decode", "decode posteriors to n-best records");
  add_config(c_decode);
  req(c_decode, c_decode->add_option("--indir", decode_opts->indir))
      ->check(CLI::ExistingDirectory);
  req(c_decode, c_decode->add_option("--inventory", decode_opts->inventory))
      ->check(CLI::ExistingFile);
  req(c_decode, c_decode->add_option("--out", decode_opts->out));
  c_decode->add_option("--beam-width", decode_opts->beam_width);
  c_decode->add_option("--k", decode_opts->k);
  c_decode->add_option("--jobs", decode_opts->jobs);
  actions[c_decode] = [decode_opts] { run_decode(*decode_opts); };

  auto refine_opts = std::make_shared<RefineOpts>();
  auto* c_refine = app.add_subcommand("refine", "refine n-best records");
  add_config(c_refine);
  req(c_refine, c_refine->add_option("--nbest", refine_opts->nbest))
      ->check(CLI::ExistingFile);
  req(c_refine, c_refine->add_option("--out", refine_opts->out));
  c_refine->add_option("--backend", refine_opts->backend)
      ->check(CLI::IsMember({"ngram", "chat"}));
  c_refine->add_option("--inventory", refine_opts->inventory)
      ->check(CLI::ExistingFile);
  c_refine->add_option("--dict", refine_opts->dict)
      ->check(CLI::ExistingFile);
  c_refine->add_option("--lm", refine_opts->lm)->check(CLI::ExistingFile);
  c_refine->add_option("--w-lm", refine_opts->w_lm);
  c_refine->add_option("--w-ac", refine_opts->w_ac);
  c_refine->add_option("--w-py", refine_opts->w_py);
  c_refine->add_option("--beam", refine_opts->beam);
  c_refine->add_option("--expansion-cap", refine_opts->expansion_cap);
  c_refine->add_option("--expansion-floor", refine_opts->expansion_floor);
  c_refine->add_option("--jobs", refine_opts->jobs);
  c_refine->add_option("--url", refine_opts->url);
  c_refine->add_option("--model", refine_opts->model);
  c_refine->add_option("--token-env", refine_opts->token_env,
                       "environment variable holding the bearer token");
  c_refine->add_option("--timeout-ms", refine_opts->timeout_ms);
  actions[c_refine] = [refine_opts] { run_refine(*refine_opts); };

  auto eval_opts = std::make_shared<EvalOpts>();
  auto* c_eval = app.add_subcommand("eval", "character error rate report");
  add_config(c_eval);
  req(c_eval, c_eval->add_option("--refs", eval_opts->refs))
      ->check(CLI::ExistingFile);
  req(c_eval, c_eval->add_option("--hyps", eval_opts->hyps))
      ->check(CLI::ExistingFile);
  c_eval->add_option("--per-utt", eval_opts->per_utt);
  c_eval->add_option("--report", eval_opts->report);
  actions[c_eval] = [eval_opts] { run_eval(*eval_opts); };

  auto build_opts = std::make_shared<BuildDataOpts>();
  auto* c_build = app.add_subcommand("build-data", "construct instruction instances");
  add_config(c_build);
  req(c_build, c_build->add_option("--refs", build_opts->refs))
      ->check(CLI::ExistingFile);
  req(c_build, c_build->add_option("--sources", build_opts->sources))
      ->check(CLI::ExistingFile);
  req(c_build, c_build->add_option("--inventory", build_opts->inventory))
      ->check(CLI::ExistingFile);
  req(c_build, c_build->add_option("--dict", build_opts->dict))
      ->check(CLI::ExistingFile);
  req(c_build, c_build->add_option("--out", build_opts->out));
  c_build->add_option("--stats", build_opts->stats);
  c_build->add_option("--seed", build_opts->seed);
  c_build->add_flag("--include-scores", build_opts->include_scores);
  actions[c_build] = [build_opts] { run_build_data(*build_opts); };

  auto lm_opts = std::make_shared<LmTrainOpts>();
  auto* c_lm = app.add_subcommand("lm-train", "train a character n-gram scorer");
  add_config(c_lm);
  req(c_lm, c_lm->add_option("--corpus", lm_opts->corpus))
      ->check(CLI::ExistingFile);
  req(c_lm, c_lm->add_option("--out", lm_opts->out));
  c_lm->add_option("--order", lm_opts->order)->check(CLI::Range(1, 5));
  c_lm->add_option("--k", lm_opts->k);
  actions[c_lm] = [lm_opts] { run_lm_train(*lm_opts); };

  auto loss_opts = std::make_shared<LossCheckOpts>();
  auto* c_loss = app.add_subcommand("loss-check", "gradient checks and loss combination");
  add_config(c_loss);
  c_loss->add_option("--seed", loss_opts->seed);
  c_loss->add_option("--lambda", loss_opts->lambda_ctc);
  c_loss->add_option("--alpha", loss_opts->alpha);
  c_loss->add_option("--instances", loss_opts->instances);
  c_loss->add_option("--eps", loss_opts->eps);
  c_loss->add_option("--tolerance", loss_opts->tolerance);
  actions[c_loss] = [loss_opts] { run_loss_check(*loss_opts); };

  try {
    app.parse(argc, argv);
    CLI::App* active = app.get_subcommands().front();
    const std::string& cfg = config_path[active];
    if (!cfg.empty()) {
      for (const auto& item : CLI::ConfigTOML{}.from_file(cfg)) {
        std::string key = item.fullname();
        CLI::Option* opt = active->get_option_no_throw("--" + key);
        if (!opt) opt = active->get_option_no_throw("-" + key);
        if (!opt || opt->get_name() == "--config")
          throw std::runtime_error("config key \"" + key +
                                   "\" does not match an option");
        if (opt->count() > 0) continue;  // explicit flags win
        for (const auto& v : item.inputs) opt->add_result(v);
        opt->run_callback();
      }
    }
    for (const auto& [sub, opt] : required)
      if (sub == active && opt->count() == 0)
        throw CLI::RequiredError(opt->get_name());
    actions.at(active)();
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 1;
  }
  return 0;
}

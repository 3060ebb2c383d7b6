// Command-line front end: constraint compilation, mask queries, mock
// decoding, schema translation, benchmarking, and vocabulary generation.

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "tokamata/tokamata.hpp"

namespace tk = tokamata;

namespace {

// Exit codes: 0 ok, 1 unexpected, then one per error family.
constexpr int kExitParse = 2;
constexpr int kExitDeterminism = 3;
constexpr int kExitVocabMismatch = 4;
constexpr int kExitResourceCap = 5;
constexpr int kExitViolation = 6;

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw tk::ParseError("cannot open file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string strip_trailing_newlines(std::string s) {
  while (!s.empty() && (s.back() == '\n' || s.back() == '\r')) s.pop_back();
  return s;
}

// --------------------------------------------------------------------------
// Shared option groups.

struct VocabOpts {
  std::string path;
  std::string format = "auto";  // auto | json | tsv
  std::string mode = "chars";   // chars | bytes
  std::string eos = "none";     // none | last | <id>
  std::string bos = "none";
};

void add_vocab_options(CLI::App* app, VocabOpts& v, bool required) {
  auto* o = app->add_option("--vocab", v.path, "vocabulary file (JSON array or TSV)");
  if (required) o->required();
  app->add_option("--vocab-format", v.format, "vocabulary format: auto, json, tsv")
      ->check(CLI::IsMember({"auto", "json", "tsv"}));
  app->add_option("--vocab-mode", v.mode, "token decoding: chars (UTF-8) or bytes")
      ->check(CLI::IsMember({"chars", "bytes"}));
  app->add_option("--eos", v.eos, "end-of-sequence token id, or 'last', or 'none'");
  app->add_option("--bos", v.bos, "beginning-of-sequence token id, or 'last', or 'none'");
}

std::optional<tk::TokenId> parse_reserved_id(const std::string& text, std::size_t vocab_size,
                                             const char* flag) {
  if (text == "none") return std::nullopt;
  if (text == "last") {
    if (vocab_size == 0) throw tk::ParseError(std::string(flag) + ": vocabulary is empty");
    return static_cast<tk::TokenId>(vocab_size - 1);
  }
  try {
    return static_cast<tk::TokenId>(std::stoul(text));
  } catch (...) {
    throw tk::ParseError(std::string(flag) + ": expected an id, 'last', or 'none'");
  }
}

// Raw token strings, without constructing a Vocabulary yet: reserved-id
// flags may reference "last", which needs the size first.
std::vector<std::string> load_token_strings(const VocabOpts& v) {
  std::ifstream in(v.path, std::ios::binary);
  if (!in) throw tk::ParseError("cannot open vocabulary file: " + v.path);
  const bool tsv = v.format == "tsv" ||
                   (v.format == "auto" && v.path.size() >= 4 &&
                    v.path.compare(v.path.size() - 4, 4, ".tsv") == 0);
  if (!tsv) {
    nlohmann::json doc;
    try {
      in >> doc;
    } catch (const nlohmann::json::exception& e) {
      throw tk::ParseError(std::string("vocabulary JSON: ") + e.what());
    }
    if (!doc.is_array()) throw tk::ParseError("vocabulary JSON: expected an array of strings");
    std::vector<std::string> tokens;
    tokens.reserve(doc.size());
    for (const auto& item : doc) {
      if (!item.is_string())
        throw tk::ParseError("vocabulary JSON: expected an array of strings");
      tokens.push_back(item.get<std::string>());
    }
    return tokens;
  }
  std::vector<std::optional<std::string>> slots;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    const std::size_t tab = line.find('\t');
    if (tab == std::string::npos)
      throw tk::ParseError("vocabulary TSV: missing tab on line " + std::to_string(line_no));
    std::size_t id = 0;
    try {
      id = std::stoul(line.substr(0, tab));
    } catch (...) {
      throw tk::ParseError("vocabulary TSV: bad id on line " + std::to_string(line_no));
    }
    if (id >= slots.size()) slots.resize(id + 1);
    if (slots[id])
      throw tk::ParseError("vocabulary TSV: duplicate id " + std::to_string(id));
    slots[id] = tk::detail::unescape_c_string(line.substr(tab + 1), line_no);
  }
  std::vector<std::string> tokens;
  tokens.reserve(slots.size());
  for (std::size_t id = 0; id < slots.size(); ++id) {
    if (!slots[id])
      throw tk::ParseError("vocabulary TSV: id " + std::to_string(id) + " is missing");
    tokens.push_back(std::move(*slots[id]));
  }
  return tokens;
}

std::shared_ptr<const tk::Vocabulary> load_vocab(const VocabOpts& v) {
  const tk::VocabularyMode mode =
      v.mode == "bytes" ? tk::VocabularyMode::Bytes : tk::VocabularyMode::Characters;
  std::vector<std::string> tokens = load_token_strings(v);
  const auto eos = parse_reserved_id(v.eos, tokens.size(), "--eos");
  const auto bos = parse_reserved_id(v.bos, tokens.size(), "--bos");
  return std::make_shared<const tk::Vocabulary>(
      tk::Vocabulary::make(std::move(tokens), mode, eos, bos));
}

struct SourceOpts {
  std::string regex;
  std::string regex_file;
  std::string grammar_file;
  std::string schema_file;
  std::string constraint_file;
  bool flexible_whitespace = false;
};

void add_source_options(CLI::App* app, SourceOpts& s, bool allow_container) {
  app->add_option("--regex", s.regex, "constraint: pattern given inline");
  app->add_option("--regex-file", s.regex_file, "constraint: pattern read from a file");
  app->add_option("--grammar", s.grammar_file, "constraint: grammar file");
  app->add_option("--schema", s.schema_file, "constraint: JSON schema file");
  app->add_flag("--flexible-whitespace", s.flexible_whitespace,
                "schema translation allows optional whitespace at separators");
  if (allow_container)
    app->add_option("--constraint", s.constraint_file, "constraint: compiled container file");
}

int source_count(const SourceOpts& s) {
  return !s.regex.empty() + !s.regex_file.empty() + !s.grammar_file.empty() +
         !s.schema_file.empty() + !s.constraint_file.empty();
}

tk::CompiledConstraint build_constraint(const SourceOpts& s,
                                        std::shared_ptr<const tk::Vocabulary> vocab,
                                        std::size_t state_cap, tk::CompileStats* stats,
                                        std::string* kind_out = nullptr) {
  if (source_count(s) != 1)
    throw tk::PreconditionError(
        "exactly one of --regex, --regex-file, --grammar, --schema, --constraint is required");
  if (!s.constraint_file.empty()) {
    std::ifstream in(s.constraint_file, std::ios::binary);
    if (!in) throw tk::ParseError("cannot open constraint file: " + s.constraint_file);
    if (kind_out) *kind_out = "container";
    return tk::load_constraint(in, std::move(vocab));
  }
  if (!s.grammar_file.empty()) {
    if (kind_out) *kind_out = "grammar";
    return tk::compile_grammar_constraint(read_file(s.grammar_file), std::move(vocab), state_cap,
                                          stats);
  }
  std::string pattern;
  if (!s.regex.empty()) {
    pattern = s.regex;
    if (kind_out) *kind_out = "regex";
  } else if (!s.regex_file.empty()) {
    pattern = strip_trailing_newlines(read_file(s.regex_file));
    if (kind_out) *kind_out = "regex";
  } else {
    const auto t0 = std::chrono::steady_clock::now();
    tk::SchemaOptions opt;
    opt.flexible_whitespace = s.flexible_whitespace;
    pattern = tk::json_schema_to_regex(tk::parse_schema_json(read_file(s.schema_file)), opt);
    if (stats)
      stats->parse_seconds +=
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (kind_out) *kind_out = "schema";
  }
  tk::CompileStats local;
  tk::CompiledConstraint c =
      tk::compile_regex_constraint(pattern, std::move(vocab), state_cap, stats ? &local : nullptr);
  if (stats) {
    stats->parse_seconds += local.parse_seconds;
    stats->automaton_seconds = local.automaton_seconds;
    stats->compose_seconds = local.compose_seconds;
    stats->finalize_seconds = local.finalize_seconds;
    stats->states = local.states;
    stats->edges = local.edges;
  }
  return c;
}

std::string quoted_token(const tk::Vocabulary& v, tk::TokenId id) {
  return "\"" + tk::detail::escape_c_string(v.tokens[id]) + "\"";
}

// --------------------------------------------------------------------------
// compile

struct CompileArgs {
  SourceOpts source;
  VocabOpts vocab;
  std::string out = "constraint.tkcc";
  std::size_t state_cap = tk::kDefaultDeterminizeStateCap;
  bool json = false;
};

int cmd_compile(const CompileArgs& a) {
  tk::CompileStats stats;
  std::string kind;
  const tk::CompiledConstraint c =
      build_constraint(a.source, load_vocab(a.vocab), a.state_cap, &stats, &kind);

  std::ofstream out(a.out, std::ios::binary);
  if (!out) throw tk::ParseError("cannot open output file: " + a.out);
  tk::save_constraint(out, c);
  out.flush();
  const auto bytes = static_cast<std::uint64_t>(out.tellp());

  // The two optimize rows: automaton construction, then derived-table
  // finalization after vocabulary composition.
  const auto ms = [](double s) { return s * 1e3; };
  if (a.json) {
    nlohmann::ordered_json j;
    j["kind"] = kind;
    j["states"] = stats.states;
    j["edges"] = stats.edges;
    if (c.kind == tk::ConstraintKind::Grammar) j["stack_symbols"] = stats.stack_symbols;
    j["tokens"] = c.vocab_size;
    j["stages_ms"] = nlohmann::ordered_json::array(
        {nlohmann::ordered_json::array({"parse", ms(stats.parse_seconds)}),
         nlohmann::ordered_json::array({"optimize", ms(stats.automaton_seconds)}),
         nlohmann::ordered_json::array({"compose", ms(stats.compose_seconds)}),
         nlohmann::ordered_json::array({"optimize", ms(stats.finalize_seconds)})});
    j["warnings"] = c.warnings;
    j["out"] = a.out;
    j["bytes"] = bytes;
    std::cout << j.dump(2) << "\n";
    return 0;
  }
  std::cout << "kind: " << kind << "\n";
  std::cout << "states: " << stats.states << ", edges: " << stats.edges;
  if (c.kind == tk::ConstraintKind::Grammar)
    std::cout << ", stack symbols: " << stats.stack_symbols;
  std::cout << "\ntokens: " << c.vocab_size << "\n";
  std::printf("stages: parse %.3f ms | optimize %.3f ms | compose %.3f ms | optimize %.3f ms\n",
              ms(stats.parse_seconds), ms(stats.automaton_seconds), ms(stats.compose_seconds),
              ms(stats.finalize_seconds));
  for (const std::string& w : c.warnings) std::cout << "warning: " << w << "\n";
  std::cout << "wrote " << a.out << " (" << bytes << " bytes)\n";
  return 0;
}

// --------------------------------------------------------------------------
// mask

struct MaskArgs {
  SourceOpts source;
  VocabOpts vocab;
  std::vector<tk::TokenId> history;
  std::size_t limit = 50;
  bool hex = false;
  bool json = false;
};

int cmd_mask(const MaskArgs& a) {
  const auto vocab = load_vocab(a.vocab);
  const tk::CompiledConstraint c =
      build_constraint(a.source, vocab, tk::kDefaultDeterminizeStateCap, nullptr);

  tk::DecodeState ds = tk::initial_state(c);
  for (std::size_t i = 0; i < a.history.size(); ++i) {
    try {
      ds = tk::advance(c, std::move(ds), a.history[i]);
    } catch (const tk::ConstraintViolation& e) {
      throw tk::ConstraintViolation("history step " + std::to_string(i) + ": " + e.what(),
                                    e.token, e.state);
    }
  }
  const tk::TokenMask mask = tk::allowed_tokens(c, ds);

  if (a.json) {
    nlohmann::ordered_json j;
    j["history"] = a.history;
    j["allowed_count"] = mask.count();
    j["finish"] = mask.finish;
    if (a.hex)
      j["mask_hex"] = mask.to_hex();
    else
      j["allowed"] = mask.ids();
    std::cout << j.dump(2) << "\n";
    return 0;
  }
  std::cout << "allowed: " << mask.count() << " token(s), finish: "
            << (mask.finish ? "yes" : "no") << "\n";
  if (a.hex) {
    std::cout << "mask: " << mask.to_hex() << "\n";
    return 0;
  }
  std::size_t shown = 0;
  for (tk::TokenId id : mask.ids()) {
    if (shown++ == a.limit) {
      std::cout << "  ... (" << mask.count() - a.limit << " more)\n";
      break;
    }
    std::cout << "  " << id << " " << quoted_token(*vocab, id) << "\n";
  }
  return 0;
}

// --------------------------------------------------------------------------
// decode

struct DecodeArgs {
  SourceOpts source;
  VocabOpts vocab;
  std::uint64_t seed = 1;
  std::size_t count = 1;
  std::size_t max_steps = 256;
  std::string bias;
  double bias_strength = 5.0;
  std::uint64_t draft_seed = 0;
  bool speculative = false;
  std::size_t block = 4;
  bool unconstrained = false;
  bool json = false;
};

int cmd_decode(const DecodeArgs& a) {
  const auto vocab = load_vocab(a.vocab);
  std::optional<tk::CompiledConstraint> c;
  if (!a.unconstrained || source_count(a.source) > 0)
    c.emplace(build_constraint(a.source, vocab, tk::kDefaultDeterminizeStateCap, nullptr));

  for (std::size_t i = 0; i < a.count; ++i) {
    tk::MockLm lm{a.seed + i, vocab};
    lm.bias_target = a.bias;
    lm.bias_strength = static_cast<float>(a.bias.empty() ? 0.0 : a.bias_strength);

    tk::DecodeResult r;
    if (a.unconstrained) {
      r = tk::unconstrained_decode(lm, a.max_steps);
    } else if (a.speculative) {
      tk::MockLm draft{a.draft_seed + i, vocab};
      draft.bias_target = a.bias;
      draft.bias_strength = lm.bias_strength;
      r = tk::speculative_decode(draft, lm, *c, a.block, a.max_steps);
    } else {
      r = tk::constrained_decode(lm, *c, a.max_steps);
    }
    const bool conformant = c && r.finished && tk::constraint_accepts(*c, r.tokens);
    if (a.json) {
      std::cout << tk::decode_result_json_line(r, conformant) << "\n";
    } else {
      std::printf("seed %llu: \"%s\" (%zu tokens, %zu steps, %s",
                  static_cast<unsigned long long>(r.seed),
                  tk::detail::escape_c_string(r.text).c_str(), r.tokens.size(), r.steps,
                  r.finished ? "finished" : "truncated");
      if (r.speculated > 0) std::printf(", acceptance %.2f", r.acceptance_rate());
      std::printf(")%s\n", c ? (conformant ? " [conformant]" : " [NOT conformant]") : "");
    }
  }
  return 0;
}

// --------------------------------------------------------------------------
// schema2regex

struct SchemaArgs {
  std::string schema_file;
  bool flexible_whitespace = false;
};

int cmd_schema2regex(const SchemaArgs& a) {
  tk::SchemaOptions opt;
  opt.flexible_whitespace = a.flexible_whitespace;
  std::cout << tk::json_schema_to_regex(tk::parse_schema_json(read_file(a.schema_file)), opt)
            << "\n";
  return 0;
}

// --------------------------------------------------------------------------
// bench

struct BenchArgs {
  VocabOpts vocab;
  std::size_t synthetic = 0;
  std::uint64_t seed = 42;
  std::size_t runs = 10;
  std::size_t steps = 12000;
  std::vector<std::string> regexes;
  std::vector<std::string> grammar_files;
  std::vector<std::string> schema_files;
  bool json = false;
};

struct BenchRow {
  std::string name;
  double compile_ms = 0;
  double corrected_ms = 0;
  double step_us = 0;
  std::size_t steps = 0;
};

const char* kGameSchema = R"({
  "type": "object",
  "properties": {
    "name": {"type": "string"},
    "class": {"enum": ["Warrior", "Rogue", "Sorceror"]},
    "life": {"type": "integer"},
    "mana": {"type": "integer"},
    "equipment": {"type": "array", "items": {
      "type": "object",
      "properties": {
        "name": {"type": "string"},
        "durability": {"type": "integer"},
        "quality": {"enum": ["Normal", "Magic", "Unique"]}},
      "required": ["name", "durability", "quality"]}}},
  "required": ["name", "class", "life", "mana", "equipment"]
})";

std::vector<std::pair<std::string, std::string>> builtin_bench_patterns() {
  return {
      {"choice", "Red|Orange|Yellow|Green|Blue|Indigo|Violet"},
      {"datetime",
       R"(\d{4}-[01]\d-[0-3]\dT[0-2]\d:[0-5]\d:[0-5]\d([+-][0-2]\d:[0-5]\d|Z))"},
      {"ip", R"(((25[0-5]|2[0-4]\d|[01]?\d\d?)\.){3}(25[0-5]|2[0-4]\d|[01]?\d\d?))"},
      {"quoted", "(?P<QUOTED_TEXT>)"},
      {"json_object", tk::json_schema_to_regex(tk::parse_schema_json(kGameSchema))},
  };
}

double time_compile_ms(const std::string& pattern,
                       const std::shared_ptr<const tk::Vocabulary>& vocab, std::size_t runs) {
  // Warm-up, then averaged timed runs.
  (void)tk::compile_regex_constraint(pattern, vocab);
  double total = 0;
  for (std::size_t i = 0; i < runs; ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    const tk::CompiledConstraint c = tk::compile_regex_constraint(pattern, vocab);
    total += std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    (void)c;
  }
  return total / static_cast<double>(runs) * 1e3;
}

// First allowed token scanning from a pseudo-random word offset, so repeated
// visits take different branches without materializing id lists.
tk::TokenId pick_allowed(const tk::TokenMask& mask, tk::SplitMix64& rng) {
  const std::size_t words = mask.bits.size();
  std::size_t w = rng.next_below(words);
  for (std::size_t scanned = 0; scanned <= words; ++scanned, w = (w + 1) % words) {
    if (mask.bits[w] == 0) continue;
    std::uint64_t word = mask.bits[w];
    // Pick a random set bit within the word.
    int target = static_cast<int>(rng.next_below(std::popcount(word)));
    while (target-- > 0) word &= word - 1;
    return static_cast<tk::TokenId>(w * 64 + std::countr_zero(word));
  }
  throw tk::IntegrityError("pick_allowed called with an empty mask");
}

double time_steps_us(const tk::CompiledConstraint& c, std::size_t steps, std::uint64_t seed) {
  tk::SplitMix64 rng(seed);
  tk::DecodeState ds = tk::initial_state(c);
  double total = 0;
  std::size_t done = 0;
  while (done < steps) {
    const auto t0 = std::chrono::steady_clock::now();
    const tk::TokenMask mask = tk::allowed_tokens(c, ds);
    total += std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (!mask.any()) {
      ds = tk::initial_state(c);
      continue;
    }
    const tk::TokenId t = pick_allowed(mask, rng);
    const auto t1 = std::chrono::steady_clock::now();
    ds = tk::advance(c, std::move(ds), t);
    total += std::chrono::duration<double>(std::chrono::steady_clock::now() - t1).count();
    ++done;
    // Keep the rewind history from growing without bound.
    if (ds.history.size() > 4096) {
      ds.history.clear();
      ds.history.shrink_to_fit();
    }
    if (mask.finish && rng.next_unit() < 0.05) ds = tk::initial_state(c);
  }
  return total / static_cast<double>(steps) * 1e6;
}

int cmd_bench(const BenchArgs& a) {
  std::shared_ptr<const tk::Vocabulary> vocab;
  if (!a.vocab.path.empty()) {
    vocab = load_vocab(a.vocab);
  } else {
    const std::size_t n = a.synthetic ? a.synthetic : 262144;
    std::cerr << "building synthetic vocabulary (" << n << " tokens)...\n";
    vocab = std::make_shared<const tk::Vocabulary>(tk::synthetic_vocabulary(n, a.seed));
  }

  std::vector<std::pair<std::string, std::string>> patterns;
  for (std::size_t i = 0; i < a.regexes.size(); ++i)
    patterns.push_back({"regex" + std::to_string(i), a.regexes[i]});
  for (const std::string& f : a.schema_files)
    patterns.push_back({f, tk::json_schema_to_regex(tk::parse_schema_json(read_file(f)))});
  if (patterns.empty() && a.grammar_files.empty()) patterns = builtin_bench_patterns();

  std::cerr << "baseline pattern 'x'...\n";
  const double baseline_ms = time_compile_ms("x", vocab, a.runs);

  std::vector<BenchRow> rows;
  for (const auto& [name, pattern] : patterns) {
    std::cerr << "bench " << name << "...\n";
    BenchRow row;
    row.name = name;
    row.compile_ms = time_compile_ms(pattern, vocab, a.runs);
    row.corrected_ms = row.compile_ms - baseline_ms;
    const tk::CompiledConstraint c = tk::compile_regex_constraint(pattern, vocab);
    row.steps = a.steps;
    row.step_us = time_steps_us(c, a.steps, a.seed);
    rows.push_back(row);
  }
  for (const std::string& f : a.grammar_files) {
    std::cerr << "bench " << f << "...\n";
    BenchRow row;
    row.name = f;
    const std::string text = read_file(f);
    (void)tk::compile_grammar_constraint(text, vocab);
    double total = 0;
    for (std::size_t i = 0; i < a.runs; ++i) {
      const auto t0 = std::chrono::steady_clock::now();
      const tk::CompiledConstraint c = tk::compile_grammar_constraint(text, vocab);
      total += std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      (void)c;
    }
    row.compile_ms = total / static_cast<double>(a.runs) * 1e3;
    row.corrected_ms = row.compile_ms - baseline_ms;
    const tk::CompiledConstraint c = tk::compile_grammar_constraint(text, vocab);
    row.steps = a.steps;
    row.step_us = time_steps_us(c, a.steps, a.seed);
    rows.push_back(row);
  }

  if (a.json) {
    nlohmann::ordered_json j;
    j["tokens"] = vocab->size();
    j["runs"] = a.runs;
    j["baseline_compile_ms"] = baseline_ms;
    j["rows"] = nlohmann::ordered_json::array();
    for (const BenchRow& r : rows) {
      nlohmann::ordered_json row;
      row["name"] = r.name;
      row["compile_ms"] = r.compile_ms;
      row["corrected_compile_ms"] = r.corrected_ms;
      row["step_us"] = r.step_us;
      row["steps"] = r.steps;
      j["rows"].push_back(row);
    }
    std::cout << j.dump(2) << "\n";
    return 0;
  }
  std::printf("tokens: %u, runs: %zu, baseline compile: %.3f ms\n", vocab->size(), a.runs,
              baseline_ms);
  std::printf("%-24s %12s %14s %10s\n", "constraint", "compile_ms", "corrected_ms", "step_us");
  for (const BenchRow& r : rows)
    std::printf("%-24s %12.3f %14.3f %10.3f\n", r.name.c_str(), r.compile_ms, r.corrected_ms,
                r.step_us);
  return 0;
}

// --------------------------------------------------------------------------
// gen-vocab

struct GenVocabArgs {
  std::size_t size = 262144;
  std::uint64_t seed = 42;
  std::string out;
};

int cmd_gen_vocab(const GenVocabArgs& a) {
  const tk::Vocabulary v = tk::synthetic_vocabulary(a.size, a.seed);
  std::ofstream out(a.out, std::ios::binary);
  if (!out) throw tk::ParseError("cannot open output file: " + a.out);
  out << nlohmann::json(v.tokens).dump() << "\n";
  std::cout << "wrote " << a.out << " (" << v.size()
            << " tokens; last id is an empty end-of-sequence token, load with --eos last)\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"tokamata: token-level constrained decoding toolkit"};
  app.require_subcommand(1);

  CompileArgs compile_args;
  auto* compile = app.add_subcommand("compile", "compile a constraint and write a container");
  add_source_options(compile, compile_args.source, false);
  add_vocab_options(compile, compile_args.vocab, true);
  compile->add_option("--out", compile_args.out, "output container path");
  compile->add_option("--state-cap", compile_args.state_cap, "determinization state cap");
  compile->add_flag("--json", compile_args.json, "print stats as JSON");

  MaskArgs mask_args;
  auto* mask = app.add_subcommand("mask", "print the allowed tokens after a history");
  add_source_options(mask, mask_args.source, true);
  add_vocab_options(mask, mask_args.vocab, true);
  mask->add_option("--history", mask_args.history, "token ids already emitted")
      ->delimiter(',');
  mask->add_option("--limit", mask_args.limit, "maximum ids to list");
  mask->add_flag("--hex", mask_args.hex, "print the mask as a hex bitset");
  mask->add_flag("--json", mask_args.json, "print as JSON");

  DecodeArgs decode_args;
  auto* decode = app.add_subcommand("decode", "run mock-model decodes under a constraint");
  add_source_options(decode, decode_args.source, true);
  add_vocab_options(decode, decode_args.vocab, true);
  decode->add_option("--seed", decode_args.seed, "first decode seed");
  decode->add_option("--count", decode_args.count, "number of seeds to run");
  decode->add_option("--max-steps", decode_args.max_steps, "step budget per decode");
  decode->add_option("--bias", decode_args.bias, "bias the mock model toward this text");
  decode->add_option("--bias-strength", decode_args.bias_strength, "logit bonus for the bias");
  auto* spec =
      decode->add_option("--draft-seed", decode_args.draft_seed, "speculative: draft model seed");
  decode->add_option("--block", decode_args.block, "speculative: draft block size");
  decode->add_flag("--unconstrained", decode_args.unconstrained,
                   "decode without masks (conformance baseline)");
  decode->add_flag("--json", decode_args.json, "emit one JSON line per decode");

  SchemaArgs schema_args;
  auto* schema = app.add_subcommand("schema2regex", "translate a JSON schema to a pattern");
  schema->add_option("--schema", schema_args.schema_file, "JSON schema file")->required();
  schema->add_flag("--flexible-whitespace", schema_args.flexible_whitespace,
                   "allow optional whitespace at separators");

  BenchArgs bench_args;
  auto* bench = app.add_subcommand("bench", "compile-time and per-step benchmarks");
  add_vocab_options(bench, bench_args.vocab, false);
  bench->add_option("--synthetic", bench_args.synthetic,
                    "use a generated vocabulary of this size (default 262144)");
  bench->add_option("--seed", bench_args.seed, "generator seed");
  bench->add_option("--runs", bench_args.runs, "timed compile repetitions");
  bench->add_option("--steps", bench_args.steps, "mask+advance steps per constraint");
  bench->add_option("--regex", bench_args.regexes, "pattern to benchmark (repeatable)");
  bench->add_option("--grammar", bench_args.grammar_files, "grammar file to benchmark");
  bench->add_option("--schema", bench_args.schema_files, "schema file to benchmark");
  bench->add_flag("--json", bench_args.json, "print the report as JSON");

  GenVocabArgs gen_args;
  auto* gen = app.add_subcommand("gen-vocab", "write a synthetic vocabulary file");
  gen->add_option("--size", gen_args.size, "token count");
  gen->add_option("--seed", gen_args.seed, "generator seed");
  gen->add_option("--out", gen_args.out, "output path")->required();

  CLI11_PARSE(app, argc, argv);
  decode_args.speculative = spec->count() > 0;

  try {
    if (compile->parsed()) return cmd_compile(compile_args);
    if (mask->parsed()) return cmd_mask(mask_args);
    if (decode->parsed()) return cmd_decode(decode_args);
    if (schema->parsed()) return cmd_schema2regex(schema_args);
    if (bench->parsed()) return cmd_bench(bench_args);
    if (gen->parsed()) return cmd_gen_vocab(gen_args);
  } catch (const tk::DeterminismError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitDeterminism;
  } catch (const tk::VocabularyMismatch& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitVocabMismatch;
  } catch (const tk::ResourceLimitError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitResourceCap;
  } catch (const tk::ConstraintViolation& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitViolation;
  } catch (const tk::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitParse;
  } catch (const tk::SchemaError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitParse;
  } catch (const tk::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "unexpected error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

#pragma once

// Labeled case corpora: the JSONL manifest format, a stratified train/test
// splitter, and a generator of synthetic crypto-misuse cases.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fpgcn/common.hpp"
#include "fpgcn/mir.hpp"

namespace fpgcn {

struct Case {
  std::string case_id;
  std::string source; // path of the .mir file, relative to the corpus directory
  std::string mir_source;
  std::string method_name;
  std::size_t violation_line = 1;
  bool label = false; // true: the report is a false positive (the code is secure)
  std::string family;

  bool operator==(const Case &) const = default;
};

inline std::string label_name(bool false_positive) { return false_positive ? "FP" : "TP"; }

inline bool parse_label(const std::string &text) {
  if (text == "FP")
    return true;
  if (text == "TP")
    return false;
  throw ValidationError("label must be \"FP\" or \"TP\", got \"" + text + "\"");
}

// Parses and validates a case's program and checks that the violation line
// hosts a statement of the named method.
inline Program check_case(const Case &c) {
  Program program;
  try {
    program = parse_program(c.mir_source, c.source);
  } catch (const ParseError &e) {
    throw ValidationError("case '" + c.case_id + "': " + e.what());
  }
  const auto diagnostics = validate_program(program);
  if (!diagnostics.empty())
    throw ValidationError("case '" + c.case_id + "': " + format_diagnostic(diagnostics.front()));
  const Method *m = program.find_method(c.method_name);
  if (!m)
    throw ValidationError("case '" + c.case_id + "': no method '" + c.method_name + "'");
  if (!m->statement_at_line(c.violation_line))
    throw ValidationError("case '" + c.case_id + "': no statement at violation line " +
                          std::to_string(c.violation_line));
  return program;
}

inline std::string read_text_file(const std::filesystem::path &path) {
  std::ifstream is(path, std::ios::binary);
  if (!is)
    throw Error("cannot read " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

inline Case case_from_json(const nlohmann::json &j) {
  Case c;
  c.case_id = j.at("case_id").get<std::string>();
  c.source = j.at("source").get<std::string>();
  c.method_name = j.at("method").get<std::string>();
  const auto line = j.at("violation_line").get<long long>();
  if (line < 1)
    throw ValidationError("violation_line must be positive");
  c.violation_line = static_cast<std::size_t>(line);
  c.label = parse_label(j.at("label").get<std::string>());
  c.family = j.value("family", std::string());
  return c;
}

inline nlohmann::ordered_json case_to_json(const Case &c) {
  nlohmann::ordered_json j;
  j["case_id"] = c.case_id;
  j["source"] = c.source;
  j["method"] = c.method_name;
  j["violation_line"] = c.violation_line;
  j["label"] = label_name(c.label);
  j["family"] = c.family;
  return j;
}

// Reads manifest entries without touching the source files.
inline std::vector<Case> read_manifest(const std::filesystem::path &manifest) {
  std::ifstream is(manifest, std::ios::binary);
  if (!is)
    throw Error("cannot read " + manifest.string());
  std::vector<Case> cases;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos)
      continue;
    try {
      cases.push_back(case_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception &e) {
      throw ParseError(std::string("malformed manifest record: ") + e.what(), lineno);
    } catch (const ValidationError &e) {
      throw ParseError(std::string("malformed manifest record: ") + e.what(), lineno);
    }
  }
  return cases;
}

// Loads a manifest and its sources; every case is parsed and validated.
inline std::vector<Case> load_corpus(const std::filesystem::path &manifest) {
  std::vector<Case> cases = read_manifest(manifest);
  const auto root = manifest.parent_path();
  for (Case &c : cases) {
    const auto path = root / c.source;
    if (!std::filesystem::is_regular_file(path))
      throw ValidationError("case '" + c.case_id + "': dangling source " + path.string());
    c.mir_source = read_text_file(path);
    check_case(c);
  }
  return cases;
}

inline const char *kManifestName = "manifest.jsonl";

// Writes <dir>/manifest.jsonl and one .mir file per case.
inline void write_corpus(const std::filesystem::path &dir, const std::vector<Case> &cases) {
  std::filesystem::create_directories(dir);
  std::ofstream manifest(dir / kManifestName, std::ios::binary);
  if (!manifest)
    throw Error("cannot write " + (dir / kManifestName).string());
  for (const Case &c : cases) {
    const auto path = dir / c.source;
    std::filesystem::create_directories(path.parent_path());
    std::ofstream src(path, std::ios::binary);
    if (!src)
      throw Error("cannot write " + path.string());
    src << c.mir_source;
    manifest << case_to_json(c).dump() << "\n";
  }
}

struct SplitResult {
  std::vector<Case> train;
  std::vector<Case> test;
  std::vector<std::string> warnings;
};

// Stratified split. The test set holds round(ratio * n) cases; each label
// class contributes floor(ratio * n_class) plus, for the leftover slots, one
// extra case per class in order of largest fractional remainder. Within a
// class the members are chosen by a seeded shuffle; both outputs keep input
// order.
inline SplitResult split_dataset(const std::vector<Case> &cases, double ratio_test,
                                 std::uint64_t seed) {
  if (!(ratio_test > 0 && ratio_test < 1))
    throw ValidationError("test ratio must lie strictly between 0 and 1");
  if (cases.empty())
    throw ValidationError("cannot split an empty dataset");

  SplitResult result;
  std::vector<std::size_t> groups[2]; // [0] TP-labeled, [1] FP-labeled
  for (std::size_t i = 0; i < cases.size(); ++i)
    groups[cases[i].label ? 1 : 0].push_back(i);
  for (int g = 0; g < 2; ++g)
    if (groups[g].empty())
      result.warnings.push_back("no " + label_name(g == 1) + "-labeled cases to stratify");

  Rng rng(seed);
  for (auto &group : groups)
    rng.shuffle(group);

  const auto total = static_cast<std::size_t>(std::llround(ratio_test * static_cast<double>(cases.size())));
  std::size_t quota[2];
  double remainder[2];
  for (int g = 0; g < 2; ++g) {
    const double exact = ratio_test * static_cast<double>(groups[g].size());
    quota[g] = static_cast<std::size_t>(std::floor(exact));
    remainder[g] = exact - std::floor(exact);
  }
  std::size_t assigned = quota[0] + quota[1];
  const int first = remainder[1] > remainder[0] ? 1 : 0;
  for (int g : {first, 1 - first})
    if (assigned < total && quota[g] < groups[g].size()) {
      ++quota[g];
      ++assigned;
    }

  std::vector<char> in_test(cases.size(), 0);
  for (int g = 0; g < 2; ++g)
    for (std::size_t k = 0; k < quota[g]; ++k)
      in_test[groups[g][k]] = 1;
  for (std::size_t i = 0; i < cases.size(); ++i)
    (in_test[i] ? result.test : result.train).push_back(cases[i]);
  return result;
}

inline const std::vector<std::string> &case_families() {
  static const std::vector<std::string> families = {
      "weak-algorithm", "weak-hash", "predictable-seed", "constant-key", "guarded", "dead-code"};
  return families;
}

// The control-flow-guarded family: whether the insecure value reaches the
// flagged call depends only on the branch structure.
inline constexpr const char *kGuardedFamily = "guarded";

struct GenConfig {
  std::size_t n_cases = 431;
  double fp_fraction = 0.25;
  std::uint64_t seed = 1;
  std::map<std::string, double> family_weights; // empty: all families equally

  void validate() const {
    if (n_cases < 1 || !(fp_fraction >= 0 && fp_fraction <= 1))
      throw ValidationError("invalid generator configuration");
    double sum = 0;
    for (const auto &[family, w] : family_weights) {
      if (std::find(case_families().begin(), case_families().end(), family) ==
          case_families().end())
        throw ValidationError("unknown case family '" + family + "'");
      if (!(w >= 0))
        throw ValidationError("family weights must be nonnegative");
      sum += w;
    }
    if (!family_weights.empty() && !(sum > 0))
      throw ValidationError("family weights must not all be zero");
  }
};

namespace detail {

// Emits one method line by line and tracks the line of the flagged call.
class MethodWriter {
public:
  explicit MethodWriter(Rng &rng) : rng_(rng) {}

  void line(const std::string &text) { lines_.push_back("  " + text); }

  void violation(const std::string &text) {
    line(text);
    violation_line_ = lines_.size() + 1; // +1 for the method header
  }

  std::string label(const std::string &stem) { return stem + std::to_string(++labels_); }

  std::string var(const std::string &stem) {
    static const std::vector<std::string> suffixes = {"", "0", "1", "2", "A", "B", "Tmp", "Val"};
    std::string name = stem + rng_.pick(suffixes);
    while (used_.count(name))
      name += "x";
    used_.insert(name);
    return name;
  }

  void filler(std::size_t count) {
    for (std::size_t i = 0; i < count; ++i) {
      const auto kind = rng_.below(5);
      const std::string v = var(rng_.pick(std::vector<std::string>{"tmp", "buf", "len", "msg", "n"}));
      switch (kind) {
      case 0: line(v + " = const " + std::to_string(1 + rng_.below(512))); break;
      case 1:
        line(v + " = const \"" +
             rng_.pick(std::vector<std::string>{"UTF-8", "payload", "hello", "user", "data"}) +
             "\"");
        break;
      case 2:
        line("call " +
             rng_.pick(std::vector<std::string>{"util.Log.debug", "util.Log.info",
                                                "util.Metrics.count"}) +
             "(\"" + rng_.pick(std::vector<std::string>{"start", "step", "ok"}) + "\")");
        used_.erase(v);
        break;
      case 3:
        line("call " +
             rng_.pick(std::vector<std::string>{"io.Stream.read", "io.Buffer.allocate",
                                                "util.Strings.bytes"}) +
             "(" + std::to_string(8 * (1 + rng_.below(8))) + ") -> " + v);
        break;
      default:
        line(v + " = const " + std::to_string(1 + rng_.below(64)));
        const std::string w = var("sum");
        line(w + " = " + v + " + " + v);
        break;
      }
    }
  }

  // A counted loop over filler statements.
  void loop(std::size_t body) {
    const std::string i = var("i"), limit = var("limit"), one = var("one"), cond = var("more");
    const std::string head = label("Loop");
    line(i + " = const 0");
    line(one + " = const 1");
    line(limit + " = const " + std::to_string(2 + rng_.below(14)));
    lines_.push_back("  " + head + ": " + i + " = " + i + " + " + one);
    filler(body);
    line(cond + " = " + i + " < " + limit);
    line("if " + cond + " goto " + head);
  }

  // A branch that skips filler statements.
  void skip_branch(const std::string &cond, std::size_t body) {
    const std::string join = label("Skip");
    line("if " + cond + " goto " + join);
    filler(body);
    lines_.push_back("  " + join + ": nop");
  }

  std::string finish(const std::string &name, const std::vector<std::string> &params) const {
    std::string out = "method " + name + "(";
    for (std::size_t i = 0; i < params.size(); ++i)
      out += (i ? ", " : "") + params[i];
    out += ") {\n";
    for (const auto &l : lines_)
      out += l + "\n";
    return out + "}\n";
  }

  std::size_t violation_line() const { return violation_line_; }

private:
  Rng &rng_;
  std::vector<std::string> lines_;
  std::set<std::string> used_;
  std::size_t labels_ = 0;
  std::size_t violation_line_ = 0;
};

inline std::string quoted(const std::string &s) { return "\"" + s + "\""; }

} // namespace detail

// Renders one case of `family`. All random choices are drawn from
// variant_seed before the label is consulted, so the TP and FP renderings of
// the same variant differ only in the label-dependent statements.
inline Case render_case(const std::string &family, bool false_positive, std::uint64_t variant_seed,
                        const std::string &case_id) {
  Rng rng(variant_seed);
  detail::MethodWriter w(rng);

  static const std::vector<std::string> method_names = {
      "encrypt", "init", "setup", "process", "run", "handle", "configure", "protect", "seal", "prepare"};
  static const std::vector<std::string> weak_ciphers = {"DES", "RC4", "AES/ECB/PKCS5Padding",
                                                        "Blowfish", "DESede", "RC2"};
  static const std::vector<std::string> strong_ciphers = {"AES/GCM/NoPadding", "ChaCha20-Poly1305",
                                                          "AES/CTR/NoPadding"};
  static const std::vector<std::string> weak_hashes = {"MD5", "SHA-1", "MD2", "MD4"};

  const std::string method_name = rng.pick(method_names);
  const std::size_t structure = rng.below(3); // 0 straight, 1 branch, 2 loop
  const std::size_t pre = rng.below(3);
  const std::size_t post = rng.below(3);
  const bool inline_literal = rng.below(3) == 0;
  const std::string weak_cipher = rng.pick(weak_ciphers);
  const std::string strong_cipher = rng.pick(strong_ciphers);
  const std::string strong_cipher2 = rng.pick(strong_ciphers);
  const std::string weak_hash = rng.pick(weak_hashes);
  const std::string seed_value = std::to_string(1 + rng.below(100000));
  std::string key_value;
  for (int i = 0; i < 16; ++i)
    key_value += "0123456789abcdef"[rng.below(16)];

  std::vector<std::string> params;
  const std::string input = rng.below(2) ? "data" : "input";
  params.push_back(input);
  const std::string flag = rng.below(2) ? "legacy" : "mode";
  const bool flag_param = rng.below(2) == 0;
  if (flag_param)
    params.push_back(flag);

  auto condition = [&]() {
    if (flag_param)
      return flag;
    const std::string c = w.var("enabled");
    w.line("call config.Settings.enabled(" + detail::quoted(flag) + ") -> " + c);
    return c;
  };

  w.filler(pre);
  if (structure == 1)
    w.skip_branch(condition(), 1 + rng.below(2));
  else if (structure == 2)
    w.loop(1 + rng.below(2));

  std::string result;
  if (family == "weak-algorithm") {
    // Strong modes carry an IV through a parameter spec; the weak ones do not.
    const std::string value = false_positive ? strong_cipher : weak_cipher;
    const std::string key = w.var("key");
    const std::string iv = w.var("iv");
    const std::string spec = w.var("params");
    result = w.var("cipher");
    w.line("call keys.Store.secretKey(" + detail::quoted(rng.pick(method_names)) + ") -> " + key);
    if (inline_literal) {
      w.violation("call crypto.Cipher.getInstance(" + detail::quoted(value) + ") -> " + result);
    } else {
      const std::string v = w.var("alg");
      w.line(v + " = const " + detail::quoted(value));
      w.filler(rng.below(2));
      w.violation("call crypto.Cipher.getInstance(" + v + ") -> " + result);
    }
    if (false_positive) {
      const bool gcm = value.find("GCM") != std::string::npos;
      w.line("call random.SecureRandom.bytes(" + std::string(gcm ? "12" : "16") + ") -> " + iv);
      w.line("call crypto.spec." + std::string(gcm ? "GCMParameterSpec.new(128, " : "IvParameterSpec.new(") +
             iv + ") -> " + spec);
      w.line("call crypto.Cipher.init(" + result + ", " + key + ", " + spec + ")");
    } else {
      w.line("call crypto.Cipher.init(" + result + ", " + key + ")");
    }
  } else if (family == "weak-hash") {
    // The weak digest is flagged either way; only a non-security sink makes it benign.
    static const std::vector<std::string> benign_sinks = {"http.Response.setEtag", "cache.Index.put",
                                                          "io.Checksum.record"};
    static const std::vector<std::string> security_sinks = {
        "auth.PasswordStore.save", "auth.Token.sign", "auth.Session.bind"};
    const std::string benign = rng.pick(benign_sinks);
    const std::string secure = rng.pick(security_sinks);
    const std::string h = w.var("hash");
    result = w.var("digest");
    if (inline_literal) {
      w.violation("call crypto.MessageDigest.getInstance(" + detail::quoted(weak_hash) + ") -> " +
                  result);
    } else {
      const std::string v = w.var("hashName");
      w.line(v + " = const " + detail::quoted(weak_hash));
      w.filler(rng.below(2));
      w.violation("call crypto.MessageDigest.getInstance(" + v + ") -> " + result);
    }
    w.line("call crypto.MessageDigest.digest(" + result + ", " + input + ") -> " + h);
    w.line("call " + (false_positive ? benign : secure) + "(" + h + ")");
  } else if (family == "predictable-seed") {
    const std::string r = w.var("rng");
    const std::string s = w.var("seed");
    w.line("call random.SecureRandom.new() -> " + r);
    if (false_positive)
      w.line("call random.SecureRandom.generateSeed(" + r + ", 32) -> " + s);
    else
      w.line(s + " = const " + seed_value);
    w.filler(rng.below(2));
    w.violation("call random.SecureRandom.setSeed(" + r + ", " + s + ")");
    result = r;
  } else if (family == "constant-key") {
    const std::string k = w.var("keyBytes");
    result = w.var("key");
    const std::string gen = w.var("keyGen");
    if (false_positive) {
      w.line("call crypto.KeyGenerator.getInstance(\"AES\") -> " + gen);
      w.line("call crypto.KeyGenerator.generateKey(" + gen + ") -> " + k);
    } else {
      w.line(k + " = const " + detail::quoted(key_value));
    }
    w.filler(rng.below(2));
    w.violation("call crypto.spec.SecretKeySpec.new(" + k + ", \"AES\") -> " + result);
  } else if (family == kGuardedFamily) {
    // The insecure default reaches the call unless both branches overwrite it.
    const std::string v = w.var("alg");
    result = w.var("cipher");
    const std::string cond = condition();
    const std::string use = w.label("Use");
    w.line(v + " = const " + detail::quoted(weak_cipher));
    if (false_positive) {
      const std::string alt = w.label("Alt");
      w.line("if " + cond + " goto " + alt);
      w.line(v + " = const " + detail::quoted(strong_cipher));
      w.line("goto " + use);
      w.line(alt + ": " + v + " = const " + detail::quoted(strong_cipher2));
    } else {
      w.line("if " + cond + " goto " + use);
      w.line(v + " = const " + detail::quoted(strong_cipher));
    }
    w.violation(use + ": call crypto.Cipher.getInstance(" + v + ") -> " + result);
  } else if (family == "dead-code") {
    // The flagged call sits behind a branch; a constant-false guard makes it dead.
    const std::string guard = w.var("debug");
    const std::string legacy = w.label("Legacy");
    const std::string v = w.var("alg");
    const std::string old = w.var("oldCipher");
    result = w.var("cipher");
    if (false_positive)
      w.line(guard + " = const 0");
    else
      w.line("call config.Settings.flag(" + detail::quoted(flag) + ") -> " + guard);
    w.line("if " + guard + " goto " + legacy);
    w.line(v + " = const " + detail::quoted(strong_cipher));
    w.line("call crypto.Cipher.getInstance(" + v + ") -> " + result);
    w.line("return " + result);
    w.violation(legacy + ": call crypto.Cipher.getInstance(" + detail::quoted(weak_cipher) +
                ") -> " + old);
    result = old;
  } else {
    throw ValidationError("unknown case family '" + family + "'");
  }

  w.filler(post);
  w.line("return " + result);

  Case c;
  c.case_id = case_id;
  c.source = case_id + ".mir";
  c.mir_source = w.finish(method_name, params);
  c.method_name = method_name;
  c.violation_line = w.violation_line();
  c.label = false_positive;
  c.family = family;
  return c;
}

// round(fp_fraction * n) cases are labeled FP; families are drawn by weight.
inline std::vector<Case> generate_synthetic_corpus(const GenConfig &cfg) {
  cfg.validate();
  Rng rng(cfg.seed);
  const auto &families = case_families();
  std::vector<double> weights;
  for (const auto &f : families) {
    auto it = cfg.family_weights.find(f);
    weights.push_back(cfg.family_weights.empty() ? 1.0
                      : it == cfg.family_weights.end() ? 0.0
                                                        : it->second);
  }
  double total_weight = 0;
  for (double w : weights)
    total_weight += w;

  const auto n_fp = static_cast<std::size_t>(std::llround(cfg.fp_fraction * static_cast<double>(cfg.n_cases)));
  std::vector<char> labels(cfg.n_cases, 0);
  std::fill(labels.begin(), labels.begin() + static_cast<std::ptrdiff_t>(n_fp), 1);
  rng.shuffle(labels);

  const std::size_t digits = std::max<std::size_t>(4, std::to_string(cfg.n_cases).size());
  std::vector<Case> cases;
  for (std::size_t i = 0; i < cfg.n_cases; ++i) {
    double u = rng.uniform() * total_weight;
    std::size_t f = 0;
    while (f + 1 < families.size() && (weights[f] == 0 || u >= weights[f])) {
      u -= weights[f];
      ++f;
    }
    while (weights[f] == 0)
      --f;
    std::string id = std::to_string(i + 1);
    id = "case_" + std::string(digits - id.size(), '0') + id;
    cases.push_back(render_case(families[f], labels[i] != 0, rng.next(), id));
  }
  return cases;
}

} // namespace fpgcn

#pragma once

// Statement text embeddings: a tokenizer for MIR statement text and a
// skip-gram word2vec trainer with negative sampling.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "fpgcn/common.hpp"

namespace fpgcn {

using TokenList = std::vector<std::string>;

// Whitespace-separated, with ( ) { } , = ; split out as their own tokens.
// Double-quoted literals stay one token including the quotes; dotted names
// stay whole.
inline TokenList tokenize(std::string_view raw) {
  TokenList out;
  std::string current;
  auto flush = [&] {
    if (!current.empty())
      out.push_back(std::move(current));
    current.clear();
  };
  for (std::size_t i = 0; i < raw.size(); ++i) {
    const char c = raw[i];
    if (c == '"') {
      flush();
      const std::size_t start = i++;
      while (i < raw.size() && raw[i] != '"') {
        if (raw[i] == '\\')
          ++i;
        ++i;
      }
      if (i >= raw.size())
        throw ParseError("unterminated string literal in statement text", 1, start + 1);
      out.emplace_back(raw.substr(start, i - start + 1));
    } else if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
      flush();
    } else if (std::string_view("(){},=;").find(c) != std::string_view::npos) {
      flush();
      out.emplace_back(1, c);
    } else {
      current += c;
    }
  }
  flush();
  return out;
}

class Vocabulary {
public:
  static constexpr std::string_view kOov = "<unk>";

  Vocabulary() : tokens_{std::string(kOov)}, counts_{0} { index_.emplace(kOov, 0); }

  std::size_t size() const noexcept { return tokens_.size(); }
  const std::string &token(std::size_t index) const { return tokens_.at(index); }

  // Training frequency; zero for a vocabulary loaded from disk.
  std::size_t count(std::size_t index) const { return counts_.at(index); }

  // Unknown tokens map to the OOV index 0.
  std::size_t index_of(std::string_view token) const {
    auto it = index_.find(std::string(token));
    return it == index_.end() ? 0 : it->second;
  }

  bool contains(std::string_view token) const { return index_.count(std::string(token)) != 0; }

  void add(std::string token, std::size_t count = 0) {
    if (!index_.emplace(token, tokens_.size()).second)
      throw ValidationError("duplicate vocabulary token '" + token + "'");
    tokens_.push_back(std::move(token));
    counts_.push_back(count);
  }

  void add_oov_count(std::size_t count) { counts_[0] += count; }

private:
  std::vector<std::string> tokens_;
  std::vector<std::size_t> counts_;
  std::unordered_map<std::string, std::size_t> index_;
};

// Tokens seen at least min_count times, most frequent first, ties broken
// lexicographically. Everything else folds into OOV.
inline Vocabulary build_vocab(const std::vector<TokenList> &corpus, std::size_t min_count) {
  if (min_count < 1)
    throw ValidationError("min_count must be at least 1");
  std::map<std::string, std::size_t> freq;
  std::size_t total = 0;
  for (const TokenList &sentence : corpus)
    for (const std::string &tok : sentence) {
      ++freq[tok];
      ++total;
    }
  if (total == 0)
    throw ValidationError("empty corpus");

  std::vector<std::pair<std::string, std::size_t>> ranked(freq.begin(), freq.end());
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto &a, const auto &b) { return a.second > b.second; });
  Vocabulary vocab;
  for (auto &[tok, count] : ranked) {
    if (count >= min_count && tok != Vocabulary::kOov)
      vocab.add(tok, count);
    else
      vocab.add_oov_count(count);
  }
  return vocab;
}

struct W2vConfig {
  std::size_t dim = 32;
  std::size_t window = 2;
  std::size_t negatives = 5;
  std::size_t epochs = 15;
  double rate = 0.025;
  std::size_t min_count = 1;
  std::uint64_t seed = 1;

  void validate() const {
    if (dim < 2 || window < 1 || negatives < 1 || epochs < 1 || !(rate > 0) || min_count < 1)
      throw ValidationError("invalid word2vec configuration");
  }
};

struct EmbeddingTable {
  Vocabulary vocab;
  std::size_t dim = 0;
  std::vector<float> data; // vocab.size() x dim, row-major

  std::span<const float> row(std::size_t index) const {
    return std::span<const float>(data).subspan(index * dim, dim);
  }
  std::span<float> row(std::size_t index) { return std::span<float>(data).subspan(index * dim, dim); }
};

// Skip-gram with negative sampling. Deterministic for a given config; returns
// the input-side vectors. If epoch_loss is given it receives the mean
// per-pair objective of every epoch.
inline EmbeddingTable train_word2vec(const std::vector<TokenList> &corpus, const W2vConfig &cfg,
                                     std::vector<double> *epoch_loss = nullptr) {
  cfg.validate();
  EmbeddingTable table;
  table.vocab = build_vocab(corpus, cfg.min_count);
  table.dim = cfg.dim;
  const std::size_t V = table.vocab.size();
  const std::size_t d = cfg.dim;

  std::vector<std::vector<std::size_t>> sentences;
  std::size_t total_tokens = 0;
  for (const TokenList &s : corpus) {
    std::vector<std::size_t> ids;
    for (const std::string &t : s)
      ids.push_back(table.vocab.index_of(t));
    total_tokens += ids.size();
    sentences.push_back(std::move(ids));
  }

  // Negative sampling from the unigram distribution raised to 3/4.
  std::vector<double> cumulative(V);
  double mass = 0;
  for (std::size_t i = 0; i < V; ++i) {
    mass += std::pow(static_cast<double>(table.vocab.count(i)), 0.75);
    cumulative[i] = mass;
  }

  Rng rng(cfg.seed);
  table.data.resize(V * d);
  for (float &x : table.data)
    x = static_cast<float>(rng.uniform(-0.5, 0.5) / static_cast<double>(d));
  std::vector<float> context(V * d, 0.0f);

  auto sample_negative = [&]() -> std::size_t {
    const double u = rng.uniform() * mass;
    auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
    return std::min<std::size_t>(static_cast<std::size_t>(it - cumulative.begin()), V - 1);
  };
  auto log_sigmoid = [](double x) {
    return x >= 0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x));
  };

  const double total_steps = static_cast<double>(cfg.epochs * std::max<std::size_t>(total_tokens, 1));
  double processed = 0;
  std::vector<double> grad_in(d);
  if (epoch_loss)
    epoch_loss->clear();

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    double loss_sum = 0;
    std::size_t pairs = 0;
    for (const auto &sent : sentences) {
      for (std::size_t i = 0; i < sent.size(); ++i, processed += 1) {
        const double lr = cfg.rate * std::max(1e-4, 1.0 - processed / total_steps);
        const std::size_t lo = i >= cfg.window ? i - cfg.window : 0;
        const std::size_t hi = std::min(sent.size() - 1, i + cfg.window);
        auto in = table.row(sent[i]);
        for (std::size_t j = lo; j <= hi; ++j) {
          if (j == i)
            continue;
          std::fill(grad_in.begin(), grad_in.end(), 0.0);
          double pair_loss = 0;
          for (std::size_t k = 0; k <= cfg.negatives; ++k) {
            const std::size_t target = k == 0 ? sent[j] : sample_negative();
            if (k > 0 && target == sent[j])
              continue;
            const double label = k == 0 ? 1.0 : 0.0;
            float *out = &context[target * d];
            double dot = 0;
            for (std::size_t c = 0; c < d; ++c)
              dot += static_cast<double>(in[c]) * out[c];
            const double sig = 1.0 / (1.0 + std::exp(-dot));
            pair_loss -= k == 0 ? log_sigmoid(dot) : log_sigmoid(-dot);
            const double g = (label - sig) * lr;
            for (std::size_t c = 0; c < d; ++c) {
              grad_in[c] += g * out[c];
              out[c] += static_cast<float>(g * in[c]);
            }
          }
          for (std::size_t c = 0; c < d; ++c)
            in[c] += static_cast<float>(grad_in[c]);
          loss_sum += pair_loss;
          ++pairs;
        }
      }
    }
    if (epoch_loss)
      epoch_loss->push_back(pairs ? loss_sum / static_cast<double>(pairs) : 0.0);
  }
  return table;
}

// Mean of the token vectors; unknown tokens use the OOV row.
inline std::vector<double> embed_statement(const TokenList &tokens, const EmbeddingTable &table) {
  std::vector<double> out(table.dim, 0.0);
  if (tokens.empty())
    return out;
  for (const std::string &t : tokens) {
    auto row = table.row(table.vocab.index_of(t));
    for (std::size_t c = 0; c < table.dim; ++c)
      out[c] += row[c];
  }
  for (double &x : out)
    x /= static_cast<double>(tokens.size());
  return out;
}

inline double cosine_similarity(std::span<const float> a, std::span<const float> b) {
  double dot = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += static_cast<double>(a[i]) * b[i];
    na += static_cast<double>(a[i]) * a[i];
    nb += static_cast<double>(b[i]) * b[i];
  }
  return dot / (std::sqrt(na) * std::sqrt(nb) + 1e-300);
}

inline void write_embeddings(std::ostream &os, const EmbeddingTable &table) {
  os << "W2V " << table.vocab.size() << " " << table.dim << "\n";
  for (std::size_t i = 0; i < table.vocab.size(); ++i) {
    os << escape_text(table.vocab.token(i), true);
    for (float x : table.row(i))
      os << " " << format_g9(x);
    os << "\n";
  }
}

inline EmbeddingTable read_embeddings(std::istream &is) {
  std::string line;
  std::size_t lineno = 1;
  if (!std::getline(is, line))
    throw ParseError("missing W2V header", lineno);
  std::istringstream header(line);
  std::string magic;
  std::size_t V = 0, d = 0;
  if (!(header >> magic >> V >> d) || magic != "W2V" || V < 1 || d < 1)
    throw ParseError("malformed W2V header", lineno);

  EmbeddingTable table;
  table.dim = d;
  table.data.reserve(V * d);
  for (std::size_t r = 0; r < V; ++r) {
    ++lineno;
    if (!std::getline(is, line))
      throw ParseError("expected " + std::to_string(V) + " embedding rows", lineno);
    std::istringstream fields(line);
    std::string token;
    fields >> token;
    token = unescape_text(token);
    if (r == 0) {
      if (token != Vocabulary::kOov)
        throw ParseError("first embedding row must be the OOV token", lineno);
    } else {
      table.vocab.add(token);
    }
    for (std::size_t c = 0; c < d; ++c) {
      std::string num;
      float value = 0;
      if (!(fields >> num))
        throw ParseError("expected " + std::to_string(d) + " values", lineno);
      auto [ptr, ec] = std::from_chars(num.data(), num.data() + num.size(), value);
      if (ec != std::errc() || ptr != num.data() + num.size() || !std::isfinite(value))
        throw ParseError("malformed value '" + num + "'", lineno);
      table.data.push_back(value);
    }
    std::string extra;
    if (fields >> extra)
      throw ParseError("too many values", lineno);
  }
  return table;
}

inline void save_embeddings(const std::string &path, const EmbeddingTable &table) {
  std::ofstream os(path, std::ios::binary);
  if (!os)
    throw Error("cannot write " + path);
  write_embeddings(os, table);
}

inline EmbeddingTable load_embeddings(const std::string &path) {
  std::ifstream is(path, std::ios::binary);
  if (!is)
    throw Error("cannot read " + path);
  return read_embeddings(is);
}

} // namespace fpgcn

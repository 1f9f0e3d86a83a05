#pragma once

// Word n-gram language model with add-k smoothing, used as the desk-scale
// probability source.
//
// Probabilities are p(w | ctx) = (count(ctx, w) + k) / (count(ctx) + k |V|),
// taken from the longest context seen in training (backing off to shorter
// contexts down to the unigram table). V is the in-vocabulary words plus
// <unk> and </s>; <s> pads the history and is never predicted.
//
// Counts are stored sparsely. Gaussian parameter noise is stored as layers
// (scale, seed, per-table std) and materialized on demand from a
// counter-based generator, so a noised model is exactly reproducible and
// costs no more memory than its base.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <map>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "pplsim/corpus.hpp"
#include "pplsim/curve.hpp"
#include "pplsim/error.hpp"
#include "pplsim/io.hpp"
#include "pplsim/jsd.hpp"
#include "pplsim/random.hpp"

namespace pplsim {

using TokenId = std::uint32_t;

struct TrainOptions {
  std::size_t order = 2;
  double ks = 1.0;
  std::size_t vocab_cap = 0;  // 0 keeps every word
  // Fixed word list; overrides vocab_cap when set (models sharing a
  // "tokenizer").
  std::optional<std::vector<std::string>> vocabulary;
  std::string name = "ngram";
  std::string descriptor;
  std::uint64_t seed = 0;
};

/// Gaussian noise with std = lambda * std(table) for each context-length
/// table.
struct NoiseSpec {
  double lambda = 0.0;
  std::uint64_t seed = 0;
};

struct NoiseLayer {
  double lambda = 0.0;
  std::uint64_t seed = 0;
  std::vector<double> group_std;  // one per context length, before this layer
};

class NgramModel {
 public:
  static constexpr std::string_view kUnk = "<unk>";
  static constexpr std::string_view kEos = "</s>";
  static constexpr std::string_view kBos = "<s>";
  static constexpr std::uint32_t kFormatVersion = 1;

  using Context = std::vector<TokenId>;

  struct ContextCounts {
    std::uint64_t total = 0;
    std::vector<std::pair<TokenId, std::uint64_t>> entries;  // sorted by id
    // log sum_w exp(base + noise) for noised models; derived, not serialized
    double log_norm = 0.0;

    std::uint64_t count(TokenId id) const noexcept {
      auto it = std::lower_bound(entries.begin(), entries.end(), id,
                                 [](const auto& e, TokenId v) { return e.first < v; });
      return (it != entries.end() && it->first == id) ? it->second : 0;
    }
  };

  // -- training ------------------------------------------------------------

  static NgramModel train(std::span<const WordSequence> docs, const TrainOptions& opt) {
    if (opt.order < 1) throw Error(ErrorKind::InvalidArgument, "order must be >= 1");
    if (!(opt.ks > 0.0) || !std::isfinite(opt.ks)) {
      throw Error(ErrorKind::InvalidArgument, "smoothing constant must be positive");
    }
    std::size_t tokens = 0;
    for (const auto& d : docs) tokens += d.size();
    if (tokens == 0) throw Error(ErrorKind::EmptyCorpus, "training corpus has no words");

    NgramModel m;
    m.order_ = opt.order;
    m.ks_ = opt.ks;
    m.name_ = opt.name;
    m.descriptor_ = opt.descriptor;
    m.seed_ = opt.seed;

    if (opt.vocabulary) {
      std::unordered_set<std::string> seen;
      for (const auto& w : *opt.vocabulary) {
        if (w == kUnk || w == kEos || w == kBos) continue;
        if (seen.insert(w).second) m.words_.push_back(w);
      }
    } else {
      std::unordered_map<std::string, std::uint64_t> freq;
      for (const auto& d : docs) {
        for (const auto& w : d.words) ++freq[w];
      }
      std::vector<std::pair<std::string, std::uint64_t>> ranked(freq.begin(), freq.end());
      std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
        return a.second != b.second ? a.second > b.second : a.first < b.first;
      });
      if (opt.vocab_cap > 0 && ranked.size() > opt.vocab_cap) ranked.resize(opt.vocab_cap);
      for (auto& [w, _] : ranked) {
        if (w == kUnk || w == kEos || w == kBos) continue;
        m.words_.push_back(std::move(w));
      }
    }
    m.rebuild_index();

    std::vector<std::map<Context, std::map<TokenId, std::uint64_t>>> raw(m.order_);
    std::vector<TokenId> seq;
    for (const auto& d : docs) {
      if (d.size() == 0) continue;
      seq.assign(m.order_ - 1, m.bos_id());
      for (const auto& w : d.words) seq.push_back(m.id_of(w));
      seq.push_back(m.eos_id());
      for (std::size_t p = m.order_ - 1; p < seq.size(); ++p) {
        for (std::size_t len = 0; len < m.order_; ++len) {
          Context ctx(seq.begin() + static_cast<std::ptrdiff_t>(p - len),
                      seq.begin() + static_cast<std::ptrdiff_t>(p));
          ++raw[len][std::move(ctx)][seq[p]];
        }
      }
    }
    m.tables_.resize(m.order_);
    for (std::size_t len = 0; len < m.order_; ++len) {
      for (auto& [ctx, nexts] : raw[len]) {
        ContextCounts cc;
        for (const auto& [id, c] : nexts) {
          cc.entries.emplace_back(id, c);
          cc.total += c;
        }
        m.tables_[len].emplace(ctx, std::move(cc));
      }
    }
    return m;
  }

  // -- accessors -----------------------------------------------------------

  std::size_t order() const noexcept { return order_; }
  double ks() const noexcept { return ks_; }
  const std::string& name() const noexcept { return name_; }
  void set_name(std::string name) { name_ = std::move(name); }
  const std::string& descriptor() const noexcept { return descriptor_; }
  std::uint64_t seed() const noexcept { return seed_; }
  const std::vector<std::string>& words() const noexcept { return words_; }
  const std::vector<NoiseLayer>& noise_layers() const noexcept { return noise_; }
  const std::map<Context, ContextCounts>& table(std::size_t len) const { return tables_.at(len); }

  /// Size of the predicted vocabulary: words + <unk> + </s>.
  std::size_t vocab_size() const noexcept { return words_.size() + 2; }
  TokenId unk_id() const noexcept { return static_cast<TokenId>(words_.size()); }
  TokenId eos_id() const noexcept { return static_cast<TokenId>(words_.size() + 1); }
  TokenId bos_id() const noexcept { return static_cast<TokenId>(words_.size() + 2); }

  TokenId id_of(std::string_view word) const {
    auto it = index_.find(std::string(word));
    return it == index_.end() ? unk_id() : it->second;
  }

  /// Token names in prediction order (the support of every distribution).
  const std::vector<std::string>& prediction_vocab() const noexcept { return prediction_vocab_; }

  // -- probabilities -------------------------------------------------------

  /// The longest stored context that is a suffix of `history`.
  struct ResolvedContext {
    std::size_t length;
    const ContextCounts* counts;
    std::uint64_t key;  // identifies (length, context) for noise draws
  };

  ResolvedContext resolve(std::span<const TokenId> history) const {
    const std::size_t max_len = std::min(order_ - 1, history.size());
    for (std::size_t len = max_len + 1; len-- > 0;) {
      Context ctx(history.end() - static_cast<std::ptrdiff_t>(len), history.end());
      auto it = tables_[len].find(ctx);
      if (it != tables_[len].end()) return {len, &it->second, context_key(len, ctx)};
    }
    throw Error(ErrorKind::CorruptModel, "model has no unigram table");
  }

  /// Un-noised smoothed log-probability.
  double base_log_prob(const ContextCounts& cc, TokenId next) const {
    return std::log((static_cast<double>(cc.count(next)) + ks_) /
                    (static_cast<double>(cc.total) + ks_ * static_cast<double>(vocab_size())));
  }

  /// Full normalized log-probability vector for a resolved context.
  std::vector<double> log_distribution(const ResolvedContext& rc) const {
    auto out = unnormalized(rc);
    if (!noise_.empty()) {
      for (auto& x : out) x -= rc.counts->log_norm;
    }
    return out;
  }

  std::vector<double> log_distribution(std::span<const TokenId> history) const {
    return log_distribution(resolve(history));
  }

  double log_prob(std::span<const TokenId> history, TokenId next) const {
    const auto rc = resolve(history);
    if (noise_.empty()) return base_log_prob(*rc.counts, next);
    return base_log_prob(*rc.counts, next) + noise_offset(rc, next) - rc.counts->log_norm;
  }

  std::vector<TokenId> history_for(std::span<const std::string> prefix) const {
    std::vector<TokenId> h(order_ - 1, bos_id());
    for (const auto& w : prefix) h.push_back(id_of(w));
    return h;
  }

  /// Distribution over prediction_vocab() after the given words.
  NextTokenDistribution next_token_distribution(std::span<const std::string> prefix) const {
    const auto logs = log_distribution(history_for(prefix));
    NextTokenDistribution d{prediction_vocab_, std::vector<double>(logs.size())};
    for (std::size_t i = 0; i < logs.size(); ++i) d.probs[i] = std::exp(logs[i]);
    return d;
  }

  /// Cumulative per-word log-probabilities; one token per word.
  WordLogProbRecord score_words(const WordSequence& seq) const {
    WordLogProbRecord rec;
    rec.sample_id = seq.sample_id;
    rec.model_id = name_;
    rec.words = seq.words;
    auto history = history_for({});
    double cum = 0.0;
    for (std::size_t i = 0; i < seq.size(); ++i) {
      const TokenId id = id_of(seq.words[i]);
      cum += log_prob(history, id);
      history.push_back(id);
      rec.cum_logprob.push_back(cum);
      rec.cum_tokens.push_back(static_cast<std::int64_t>(i + 1));
    }
    return rec;
  }

  // -- noise ---------------------------------------------------------------

  /// Standard deviation of every stored log-probability in each
  /// context-length table (population std).
  std::vector<double> table_stddevs() const {
    std::vector<double> out(order_, 0.0);
    const double v = static_cast<double>(vocab_size());
    for (std::size_t len = 0; len < order_; ++len) {
      const auto& table = tables_[len];
      if (table.empty()) continue;
      const double count = static_cast<double>(table.size()) * v;
      if (noise_.empty()) {
        // Closed form: unseen words of a context share one value.
        double sum = 0.0;
        for (const auto& [ctx, cc] : table) {
          const double denom = static_cast<double>(cc.total) + ks_ * v;
          sum += (v - static_cast<double>(cc.entries.size())) * std::log(ks_ / denom);
          for (const auto& [id, c] : cc.entries) sum += std::log((static_cast<double>(c) + ks_) / denom);
        }
        const double mean = sum / count;
        double ss = 0.0;
        for (const auto& [ctx, cc] : table) {
          const double denom = static_cast<double>(cc.total) + ks_ * v;
          const double u = std::log(ks_ / denom) - mean;
          ss += (v - static_cast<double>(cc.entries.size())) * u * u;
          for (const auto& [id, c] : cc.entries) {
            const double d = std::log((static_cast<double>(c) + ks_) / denom) - mean;
            ss += d * d;
          }
        }
        out[len] = std::sqrt(ss / count);
      } else {
        double sum = 0.0;
        double ss = 0.0;
        for (const auto& [ctx, cc] : table) {
          for (double x : log_distribution(ResolvedContext{len, &cc, context_key(len, ctx)})) sum += x;
        }
        const double mean = sum / count;
        for (const auto& [ctx, cc] : table) {
          for (double x : log_distribution(ResolvedContext{len, &cc, context_key(len, ctx)})) {
            ss += (x - mean) * (x - mean);
          }
        }
        out[len] = std::sqrt(ss / count);
      }
    }
    return out;
  }

  // -- serialization -------------------------------------------------------

  std::string serialize() const;
  static NgramModel deserialize(std::string_view bytes);

  void save(const std::filesystem::path& path) const { write_file_atomic(path, serialize()); }
  static NgramModel load(const std::filesystem::path& path) { return deserialize(read_file(path)); }

  friend NgramModel add_noise(const NgramModel& model, const NoiseSpec& spec);

 private:
  void rebuild_index() {
    index_.clear();
    for (std::size_t i = 0; i < words_.size(); ++i) index_.emplace(words_[i], static_cast<TokenId>(i));
    prediction_vocab_ = words_;
    prediction_vocab_.emplace_back(kUnk);
    prediction_vocab_.emplace_back(kEos);
  }

  // Smoothed log-probabilities plus noise, before renormalization.
  std::vector<double> unnormalized(const ResolvedContext& rc) const {
    const std::size_t v = vocab_size();
    const double denom = static_cast<double>(rc.counts->total) + ks_ * static_cast<double>(v);
    std::vector<double> out(v, std::log(ks_ / denom));
    for (const auto& [id, c] : rc.counts->entries) {
      out[id] = std::log((static_cast<double>(c) + ks_) / denom);
    }
    if (!noise_.empty()) {
      for (TokenId w = 0; w < v; ++w) out[w] += noise_offset(rc, w);
    }
    return out;
  }

  void refresh_normalizers() {
    for (std::size_t len = 0; len < order_; ++len) {
      for (auto& [ctx, cc] : tables_[len]) {
        cc.log_norm = noise_.empty()
                          ? 0.0
                          : log_sum_exp(unnormalized(ResolvedContext{len, &cc, context_key(len, ctx)}));
      }
    }
  }

  static std::uint64_t context_key(std::size_t len, const Context& ctx) noexcept {
    std::uint64_t h = splitmix64(len);
    for (TokenId t : ctx) h = hash_combine(h, t);
    return h;
  }

  double noise_offset(const ResolvedContext& rc, TokenId w) const noexcept {
    double off = 0.0;
    for (const auto& layer : noise_) {
      const double scale = layer.lambda * layer.group_std[rc.length];
      off += scale * normal_from_key(hash_combine(hash_combine(layer.seed, rc.key), w));
    }
    return off;
  }

  static double log_sum_exp(const std::vector<double>& xs) {
    const double mx = *std::max_element(xs.begin(), xs.end());
    double s = 0.0;
    for (double x : xs) s += std::exp(x - mx);
    return mx + std::log(s);
  }

  std::size_t order_ = 1;
  double ks_ = 1.0;
  std::string name_;
  std::string descriptor_;
  std::uint64_t seed_ = 0;
  std::vector<std::string> words_;
  std::vector<std::string> prediction_vocab_;
  std::unordered_map<std::string, TokenId> index_;
  std::vector<std::map<Context, ContextCounts>> tables_;
  std::vector<NoiseLayer> noise_;
};

/// Returns a perturbed copy: every log-probability in table i gets
/// N(0, (lambda * std_i)^2) noise, then each context is renormalized.
/// lambda = 0 returns an identical model.
inline NgramModel add_noise(const NgramModel& model, const NoiseSpec& spec) {
  if (!(spec.lambda >= 0.0) || !std::isfinite(spec.lambda)) {
    throw Error(ErrorKind::InvalidArgument, "noise scale must be a finite value >= 0");
  }
  NgramModel out = model;
  if (spec.lambda == 0.0) return out;
  out.noise_.push_back(NoiseLayer{spec.lambda, spec.seed, model.table_stddevs()});
  out.refresh_normalizers();
  return out;
}

/// JSD between the next-token distributions of two un-noised models that
/// share a vocabulary. Tokens unseen in both contexts all have the same
/// pair of probabilities, so they are summed as one block.
inline double sparse_jsd(const NgramModel& a, const NgramModel::ResolvedContext& ra,
                         const NgramModel& b, const NgramModel::ResolvedContext& rb) {
  if (!a.noise_layers().empty() || !b.noise_layers().empty() || a.words() != b.words()) {
    throw Error(ErrorKind::SupportMismatch, "sparse JSD needs un-noised models over one vocabulary");
  }
  const double v = static_cast<double>(a.vocab_size());
  const double da = static_cast<double>(ra.counts->total) + a.ks() * v;
  const double db = static_cast<double>(rb.counts->total) + b.ks() * v;
  const double rest_a = a.ks() / da;
  const double rest_b = b.ks() / db;
  const auto term = [](double p, double q) {
    const double m = 0.5 * (p + q);
    double t = 0.0;
    if (p > 0.0) t += p * std::log(p / m);
    if (q > 0.0) t += q * std::log(q / m);
    return t;
  };
  const auto& ea = ra.counts->entries;
  const auto& eb = rb.counts->entries;
  double sum = 0.0;
  std::size_t shared = 0;
  std::size_t i = 0;
  std::size_t j = 0;
  while (i < ea.size() || j < eb.size()) {
    double p = rest_a;
    double q = rest_b;
    if (j == eb.size() || (i < ea.size() && ea[i].first < eb[j].first)) {
      p = (static_cast<double>(ea[i++].second) + a.ks()) / da;
    } else if (i == ea.size() || eb[j].first < ea[i].first) {
      q = (static_cast<double>(eb[j++].second) + b.ks()) / db;
    } else {
      p = (static_cast<double>(ea[i++].second) + a.ks()) / da;
      q = (static_cast<double>(eb[j++].second) + b.ks()) / db;
    }
    sum += term(p, q);
    ++shared;
  }
  sum += (v - static_cast<double>(shared)) * term(rest_a, rest_b);
  return std::clamp(0.5 * sum, 0.0, std::numbers::ln2);
}

// ---------------------------------------------------------------------------
// Binary model file, little-endian:
//   "NGLM" u32 version, str name, str descriptor, u64 seed, u32 order,
//   f64 ks, u32 nwords, nwords x str,
//   per context length L: u64 ncontexts, each: L x u32 ids, u64 total,
//     u32 nentries, nentries x (u32 id, u64 count),
//   u32 nlayers, each: f64 lambda, u64 seed, order x f64 std,
//   u64 FNV-1a checksum of everything before it.
// str = u32 byte length + bytes.

namespace detail {

class ByteWriter {
 public:
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void str(std::string_view s) {
    u32(static_cast<std::uint32_t>(s.size()));
    out_.append(s);
  }
  void raw(std::string_view s) { out_.append(s); }
  std::string& bytes() { return out_; }

 private:
  std::string out_;
};

class ByteReader {
 public:
  explicit ByteReader(std::string_view in) : in_(in) {}

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(in_[pos_++])) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in_[pos_++])) << (8 * i);
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string str() {
    const std::uint32_t n = u32();
    need(n);
    std::string s(in_.substr(pos_, n));
    pos_ += n;
    return s;
  }
  std::string_view raw(std::size_t n) {
    need(n);
    auto s = in_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  std::size_t position() const noexcept { return pos_; }
  std::size_t remaining() const noexcept { return in_.size() - pos_; }

 private:
  void need(std::size_t n) const {
    if (in_.size() - pos_ < n) throw Error(ErrorKind::CorruptModel, "model file is truncated");
  }
  std::string_view in_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline std::string NgramModel::serialize() const {
  detail::ByteWriter w;
  w.raw("NGLM");
  w.u32(kFormatVersion);
  w.str(name_);
  w.str(descriptor_);
  w.u64(seed_);
  w.u32(static_cast<std::uint32_t>(order_));
  w.f64(ks_);
  w.u32(static_cast<std::uint32_t>(words_.size()));
  for (const auto& word : words_) w.str(word);
  for (std::size_t len = 0; len < order_; ++len) {
    w.u64(tables_[len].size());
    for (const auto& [ctx, cc] : tables_[len]) {
      for (TokenId t : ctx) w.u32(t);
      w.u64(cc.total);
      w.u32(static_cast<std::uint32_t>(cc.entries.size()));
      for (const auto& [id, c] : cc.entries) {
        w.u32(id);
        w.u64(c);
      }
    }
  }
  w.u32(static_cast<std::uint32_t>(noise_.size()));
  for (const auto& layer : noise_) {
    w.f64(layer.lambda);
    w.u64(layer.seed);
    for (double s : layer.group_std) w.f64(s);
  }
  const std::uint64_t checksum = fnv1a64(w.bytes());
  w.u64(checksum);
  return std::move(w.bytes());
}

inline NgramModel NgramModel::deserialize(std::string_view bytes) {
  const auto corrupt = [](const std::string& why) { return Error(ErrorKind::CorruptModel, why); };
  detail::ByteReader r(bytes);
  if (bytes.size() < 4 || r.raw(4) != "NGLM") throw corrupt("not an NGLM model file");
  const std::uint32_t version = r.u32();
  if (version != kFormatVersion) {
    throw Error(ErrorKind::VersionMismatch, "model format version " + std::to_string(version) +
                                                " is not supported (expected " +
                                                std::to_string(kFormatVersion) + ")");
  }
  if (bytes.size() < 16) throw corrupt("model file is truncated");
  const std::uint64_t stored = detail::ByteReader(bytes.substr(bytes.size() - 8)).u64();
  if (fnv1a64(bytes.substr(0, bytes.size() - 8)) != stored) {
    throw corrupt("checksum mismatch (truncated or modified file)");
  }

  NgramModel m;
  m.name_ = r.str();
  m.descriptor_ = r.str();
  m.seed_ = r.u64();
  m.order_ = r.u32();
  m.ks_ = r.f64();
  if (m.order_ < 1 || m.order_ > 16) throw corrupt("implausible order");
  if (!(m.ks_ > 0.0)) throw corrupt("non-positive smoothing constant");
  const std::uint32_t nwords = r.u32();
  if (nwords > r.remaining()) throw corrupt("implausible vocabulary size");
  m.words_.reserve(nwords);
  for (std::uint32_t i = 0; i < nwords; ++i) m.words_.push_back(r.str());
  m.rebuild_index();
  if (m.index_.size() != m.words_.size()) throw corrupt("duplicate vocabulary entries");
  const TokenId max_next = m.eos_id();
  const TokenId max_hist = m.bos_id();
  m.tables_.resize(m.order_);
  for (std::size_t len = 0; len < m.order_; ++len) {
    const std::uint64_t nctx = r.u64();
    if (nctx > r.remaining()) throw corrupt("implausible context count");
    for (std::uint64_t c = 0; c < nctx; ++c) {
      Context ctx(len);
      for (auto& t : ctx) {
        t = r.u32();
        if (t > max_hist) throw corrupt("context token id out of range");
      }
      ContextCounts cc;
      cc.total = r.u64();
      const std::uint32_t ne = r.u32();
      if (ne > r.remaining()) throw corrupt("implausible entry count");
      std::uint64_t sum = 0;
      for (std::uint32_t e = 0; e < ne; ++e) {
        const TokenId id = r.u32();
        const std::uint64_t count = r.u64();
        if (id > max_next || (!cc.entries.empty() && id <= cc.entries.back().first)) {
          throw corrupt("entry ids out of range or unsorted");
        }
        cc.entries.emplace_back(id, count);
        sum += count;
      }
      if (sum != cc.total) throw corrupt("context total does not match its counts");
      if (!m.tables_[len].emplace(std::move(ctx), std::move(cc)).second) {
        throw corrupt("duplicate context");
      }
    }
  }
  if (m.tables_[0].empty()) throw corrupt("missing unigram table");
  const std::uint32_t nlayers = r.u32();
  if (nlayers > r.remaining()) throw corrupt("implausible noise layer count");
  for (std::uint32_t i = 0; i < nlayers; ++i) {
    NoiseLayer layer;
    layer.lambda = r.f64();
    layer.seed = r.u64();
    layer.group_std.resize(m.order_);
    for (auto& s : layer.group_std) s = r.f64();
    m.noise_.push_back(std::move(layer));
  }
  if (r.remaining() != 8) throw corrupt("trailing bytes after model body");
  m.refresh_normalizers();
  return m;
}

}  // namespace pplsim

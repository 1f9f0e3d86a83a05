#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <numbers>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "pplsim/error.hpp"
#include "pplsim/io.hpp"
#include "pplsim/similarity.hpp"

namespace pplsim {

struct NextTokenDistribution {
  std::vector<std::string> vocab;
  std::vector<double> probs;
};

inline void validate_distribution(const NextTokenDistribution& d) {
  if (d.vocab.size() != d.probs.size()) {
    throw Error(ErrorKind::MalformedRecord, "vocab and probs differ in length");
  }
  if (d.vocab.empty()) throw Error(ErrorKind::EmptyVocabulary, "empty distribution");
  double sum = 0.0;
  for (double p : d.probs) {
    if (!(p >= 0.0) || !std::isfinite(p)) {
      throw Error(ErrorKind::MalformedRecord, "negative or non-finite probability");
    }
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-9) {
    throw Error(ErrorKind::MalformedRecord, "probabilities sum to " + std::to_string(sum));
  }
  std::unordered_set<std::string_view> seen;
  for (const auto& t : d.vocab) {
    if (!seen.insert(t).second) throw Error(ErrorKind::MalformedRecord, "duplicate token '" + t + "'");
  }
}

/// 2 |A n B| / (|A| + |B|) with the eligibility threshold.
struct OverlapGate {
  std::size_t size_a = 0;
  std::size_t size_b = 0;
  std::size_t overlap = 0;
  double ratio = 0.0;
  double threshold = 0.7;

  bool eligible() const noexcept { return ratio >= threshold; }
};

template <typename RangeA, typename RangeB>
OverlapGate vocab_overlap(const RangeA& va, const RangeB& vb, double threshold = 0.7) {
  const std::set<std::string, std::less<>> a(std::begin(va), std::end(va));
  const std::set<std::string, std::less<>> b(std::begin(vb), std::end(vb));
  if (a.empty() || b.empty()) throw Error(ErrorKind::EmptyVocabulary, "vocabulary is empty");
  OverlapGate g;
  g.size_a = a.size();
  g.size_b = b.size();
  for (const auto& t : a) g.overlap += b.count(t);
  g.ratio = 2.0 * static_cast<double>(g.overlap) / static_cast<double>(g.size_a + g.size_b);
  g.threshold = threshold;
  return g;
}

/// Jensen-Shannon divergence in nats over probability vectors on the same
/// ordered support. Zero-probability terms contribute nothing.
inline double jsd_values(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw Error(ErrorKind::SupportMismatch, "supports differ in size");
  double kl_p = 0.0;
  double kl_q = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double m = 0.5 * (p[i] + q[i]);
    if (p[i] > 0.0) kl_p += p[i] * std::log(p[i] / m);
    if (q[i] > 0.0) kl_q += q[i] * std::log(q[i] / m);
  }
  // Rounding can push tiny results a hair outside [0, ln 2].
  return std::clamp(0.5 * kl_p + 0.5 * kl_q, 0.0, std::numbers::ln2);
}

inline double jsd(const NextTokenDistribution& p, const NextTokenDistribution& q) {
  if (p.vocab != q.vocab) {
    throw Error(ErrorKind::SupportMismatch,
                "distributions have different supports; restrict them to the shared vocabulary first");
  }
  return jsd_values(p.probs, q.probs);
}

/// Positions of the shared tokens in two vocabularies. Identical
/// vocabularies keep their order; otherwise tokens are sorted, so the result
/// does not depend on which model is passed first. Built once per pair.
class SharedSupport {
 public:
  SharedSupport(const std::vector<std::string>& va, const std::vector<std::string>& vb) {
    std::unordered_map<std::string_view, std::size_t> pos_b;
    pos_b.reserve(vb.size());
    for (std::size_t i = 0; i < vb.size(); ++i) pos_b.emplace(vb[i], i);
    identical_ = va == vb;
    std::vector<std::size_t> order;
    for (std::size_t i = 0; i < va.size(); ++i) {
      if (pos_b.contains(va[i])) order.push_back(i);
    }
    if (!identical_) {
      std::sort(order.begin(), order.end(),
                [&](std::size_t l, std::size_t r) { return va[l] < va[r]; });
    }
    for (std::size_t i : order) {
      idx_a_.push_back(i);
      idx_b_.push_back(pos_b.find(va[i])->second);
      tokens_.push_back(va[i]);
    }
    size_a_ = va.size();
    size_b_ = vb.size();
  }

  std::size_t size() const noexcept { return tokens_.size(); }
  const std::vector<std::string>& tokens() const noexcept { return tokens_; }

  /// Restricts both probability vectors to the shared tokens and
  /// renormalizes each.
  std::pair<std::vector<double>, std::vector<double>> restrict(std::span<const double> pa,
                                                               std::span<const double> pb) const {
    if (pa.size() != size_a_ || pb.size() != size_b_) {
      throw Error(ErrorKind::SupportMismatch, "distribution does not match its vocabulary");
    }
    if (tokens_.empty()) throw Error(ErrorKind::EmptyVocabulary, "no shared tokens");
    std::vector<double> ra(idx_a_.size()), rb(idx_b_.size());
    double sa = 0.0, sb = 0.0;
    for (std::size_t i = 0; i < idx_a_.size(); ++i) {
      ra[i] = pa[idx_a_[i]];
      rb[i] = pb[idx_b_[i]];
      sa += ra[i];
      sb += rb[i];
    }
    if (!(sa > 0.0) || !(sb > 0.0)) {
      throw Error(ErrorKind::SupportMismatch, "no probability mass on the shared vocabulary");
    }
    if (!identical_) {
      for (auto& v : ra) v /= sa;
      for (auto& v : rb) v /= sb;
    }
    return {std::move(ra), std::move(rb)};
  }

 private:
  std::vector<std::size_t> idx_a_, idx_b_;
  std::vector<std::string> tokens_;
  std::size_t size_a_ = 0, size_b_ = 0;
  bool identical_ = false;
};

inline std::pair<NextTokenDistribution, NextTokenDistribution> restrict_to_shared(
    const NextTokenDistribution& p, const NextTokenDistribution& q) {
  SharedSupport support(p.vocab, q.vocab);
  auto [rp, rq] = support.restrict(p.probs, q.probs);
  return {{support.tokens(), std::move(rp)}, {support.tokens(), std::move(rq)}};
}

/// Mean JSD over the next-token distributions after prefixes 1..n-1 of a
/// sequence. `dist_a(i)` / `dist_b(i)` return the probability vector after
/// the first i words (over vocab_a / vocab_b), or nullopt when unavailable.
template <typename SourceA, typename SourceB>
double jsd_seq(const SharedSupport& support, SourceA&& dist_a, SourceB&& dist_b, std::size_t n) {
  if (n < 2) throw Error(ErrorKind::TooShort, "a sequence needs 2 words for a next-token prefix");
  double sum = 0.0;
  for (std::size_t i = 1; i < n; ++i) {
    std::optional<std::vector<double>> pa = dist_a(i);
    std::optional<std::vector<double>> pb = dist_b(i);
    if (!pa || !pb) {
      throw Error(ErrorKind::MissingDistribution, "no distribution for prefix " + std::to_string(i));
    }
    auto [ra, rb] = support.restrict(*pa, *pb);
    sum += jsd_values(ra, rb);
  }
  return sum / static_cast<double>(n - 1);
}

/// Gate check, raising GateFailed with the computed ratio.
inline OverlapGate require_gate(const std::vector<std::string>& va, const std::vector<std::string>& vb,
                                double threshold) {
  auto gate = vocab_overlap(va, vb, threshold);
  if (!gate.eligible()) {
    throw Error(ErrorKind::GateFailed, "vocabulary overlap " + std::to_string(gate.ratio) +
                                           " is below the gate " + std::to_string(threshold));
  }
  return gate;
}

// ---------------------------------------------------------------------------
// Distribution files. JSON Lines, one record per (sample, prefix):
//   {"sample_id", "model_id", "prefix_index", "vocab_ref", "probs"}
// vocab_ref names a sidecar JSON file, relative to the distribution file,
// holding {"model_id": ..., "vocab": [...]}.

struct DistributionSet {
  std::string model_id;
  std::vector<std::string> vocab;
  // sample_id -> probability vectors for prefixes 1..n-1 (index i-1).
  std::map<std::string, std::vector<std::vector<double>>, std::less<>> samples;
};

inline DistributionSet read_distribution_file(const std::filesystem::path& path) {
  DistributionSet set;
  std::string vocab_ref;
  std::map<std::string, std::map<std::size_t, std::vector<double>>, std::less<>> raw;
  const auto lines = split_lines(read_file(path));
  for (std::size_t ln = 0; ln < lines.size(); ++ln) {
    if (lines[ln].find_first_not_of(" \t") == std::string::npos) continue;
    const std::string where = path.string() + ":" + std::to_string(ln + 1);
    try {
      const Json j = Json::parse(lines[ln]);
      const auto model = j.at("model_id").get<std::string>();
      const auto ref = j.at("vocab_ref").get<std::string>();
      if (set.model_id.empty()) {
        set.model_id = model;
        vocab_ref = ref;
      } else if (model != set.model_id || ref != vocab_ref) {
        throw Error(ErrorKind::MalformedRecord, where + ": file mixes models or vocabularies");
      }
      const auto idx = j.at("prefix_index").get<std::size_t>();
      if (idx == 0) throw Error(ErrorKind::MalformedRecord, where + ": prefix_index starts at 1");
      auto& slot = raw[j.at("sample_id").get<std::string>()];
      if (!slot.emplace(idx, j.at("probs").get<std::vector<double>>()).second) {
        throw Error(ErrorKind::MalformedRecord, where + ": duplicate prefix");
      }
    } catch (const Json::exception& e) {
      throw Error(ErrorKind::MalformedRecord, where + ": " + e.what());
    }
  }
  if (set.model_id.empty()) throw Error(ErrorKind::EmptyInput, path.string() + ": no records");
  const auto sidecar = path.parent_path() / vocab_ref;
  try {
    const Json v = Json::parse(read_file(sidecar));
    set.vocab = v.at("vocab").get<std::vector<std::string>>();
  } catch (const Json::exception& e) {
    throw Error(ErrorKind::MalformedRecord, sidecar.string() + ": " + e.what());
  }
  for (auto& [id, prefixes] : raw) {
    auto& out = set.samples[id];
    std::size_t expect = 1;
    for (auto& [idx, probs] : prefixes) {
      if (idx != expect) {
        throw Error(ErrorKind::MissingDistribution,
                    "sample '" + id + "' lacks prefix " + std::to_string(expect));
      }
      validate_distribution({set.vocab, probs});
      out.push_back(std::move(probs));
      ++expect;
    }
  }
  return set;
}

inline void write_distribution_file(const std::filesystem::path& path, const DistributionSet& set) {
  const std::string vocab_name = path.stem().string() + ".vocab.json";
  write_file_atomic(path.parent_path() / vocab_name,
                    dump_json(Json{{"model_id", set.model_id}, {"vocab", set.vocab}}));
  std::string out;
  for (const auto& [id, prefixes] : set.samples) {
    for (std::size_t i = 0; i < prefixes.size(); ++i) {
      out += Json{{"sample_id", id},
                  {"model_id", set.model_id},
                  {"prefix_index", i + 1},
                  {"vocab_ref", vocab_name},
                  {"probs", prefixes[i]}}
                 .dump() +
             "\n";
    }
  }
  write_file_atomic(path, out);
}

/// JSD report over two distribution sets; per-sample weight is the word
/// count n = (number of prefixes) + 1.
inline SimilarityReport compare_distributions(const DistributionSet& a, const DistributionSet& b,
                                              double gate_threshold = 0.7,
                                              std::string dataset = "default",
                                              unsigned threads = 1) {
  require_gate(a.vocab, b.vocab, gate_threshold);
  detail::check_coverage(a.samples, b.samples);
  const SharedSupport support(a.vocab, b.vocab);
  SimilarityReport r;
  r.model_a = a.model_id;
  r.model_b = b.model_id;
  r.metric = Metric::Jsd;
  r.dataset = std::move(dataset);
  std::vector<std::pair<const std::string*, std::pair<const std::vector<std::vector<double>>*,
                                                      const std::vector<std::vector<double>>*>>>
      rows;
  for (const auto& [id, pa] : a.samples) rows.push_back({&id, {&pa, &b.samples.find(id)->second}});
  r.per_sample.resize(rows.size());
  parallel_for(rows.size(), threads, [&](std::size_t i) {
    const auto& [pa, pb] = rows[i].second;
    if (pa->size() != pb->size()) {
      throw Error(ErrorKind::SampleMismatch, "sample '" + *rows[i].first +
                                                 "' has a different number of prefixes per model");
    }
    const std::size_t n = pa->size() + 1;
    const auto get = [](const std::vector<std::vector<double>>* v) {
      return [v](std::size_t k) -> std::optional<std::vector<double>> { return (*v)[k - 1]; };
    };
    r.per_sample[i] = {*rows[i].first, n, jsd_seq(support, get(pa), get(pb), n)};
  });
  detail::finish_report(r);
  return r;
}

}  // namespace pplsim

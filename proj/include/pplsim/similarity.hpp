#pragma once

// Perplexity-curve similarity: the perplexity-change vector, signed Menger
// curvature, the two per-sequence distances built on them, and
// length-weighted corpus aggregation.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "pplsim/curve.hpp"
#include "pplsim/error.hpp"
#include "pplsim/geometry.hpp"
#include "pplsim/io.hpp"
#include "pplsim/random.hpp"

namespace pplsim {

/// Neighbour offsets |z| drawn uniformly from {1..k}, one per word index.
/// A draw depends only on (seed, sample_id, index), so both models of a pair
/// see the same offsets and parallel evaluation cannot change them.
struct SamplingPlan {
  std::size_t k = 1;
  std::uint64_t seed = 0;

  std::size_t draw(std::string_view sample_id, std::size_t index) const {
    if (k <= 1) return 1;
    SplitMix rng(hash_combine(hash_combine(seed, fnv1a64(sample_id)), index));
    return 1 + static_cast<std::size_t>(rng.below(k));
  }

  Json to_json() const { return Json{{"k", k}, {"seed", seed}}; }
};

/// (word index, offset) pairs whose neighbours x-z and x+z both exist.
struct InteriorPoint {
  std::size_t x;
  std::size_t z;
};

inline std::vector<InteriorPoint> interior_points(std::string_view sample_id, std::size_t n,
                                                  const SamplingPlan& plan) {
  if (plan.k == 0) throw Error(ErrorKind::TooShort, "sampling plan needs k >= 1");
  std::vector<InteriorPoint> pts;
  for (std::size_t x = 1; x <= n; ++x) {
    const std::size_t z = plan.draw(sample_id, x);
    if (x > z && x + z <= n) pts.push_back({x, z});
  }
  if (pts.empty()) {
    throw Error(ErrorKind::TooShort, "sample '" + std::string(sample_id) + "' with " +
                                         std::to_string(n) + " words has no interior index");
  }
  return pts;
}

/// Per-index values over interior word indices (1-based).
struct IndexedValues {
  std::string sample_id;
  std::string model_id;
  std::vector<std::size_t> indices;
  std::vector<double> values;
};

struct DeltaVector : IndexedValues {};
struct SignedCurvatureVector : IndexedValues {};

/// f(x) - (f(x+z) + f(x-z)) / 2
inline double perplexity_change(const PerplexityCurve& c, std::size_t x, std::size_t z) {
  return c.at(x) - 0.5 * (c.at(x + z) + c.at(x - z));
}

inline DeltaVector delta_ppl(const PerplexityCurve& curve, const SamplingPlan& plan) {
  DeltaVector out;
  out.sample_id = curve.sample_id;
  out.model_id = curve.model_id;
  for (const auto [x, z] : interior_points(curve.sample_id, curve.size(), plan)) {
    out.indices.push_back(x);
    out.values.push_back(perplexity_change(curve, x, z));
  }
  return out;
}

/// The three curve points around x at offset z.
struct CurveTriple {
  Point left, mid, right;
};

inline CurveTriple curve_triple(const PerplexityCurve& c, std::size_t x, std::size_t z) {
  const auto px = [&](std::size_t i) { return Point{static_cast<double>(i), c.at(i)}; };
  return {px(x - z), px(x), px(x + z)};
}

/// sgn with sgn(0) = +1.
constexpr double sign_indicator(double u) noexcept { return u >= 0.0 ? 1.0 : -1.0; }

inline SignedCurvatureVector signed_curvature(const PerplexityCurve& curve,
                                              const SamplingPlan& plan) {
  SignedCurvatureVector out;
  out.sample_id = curve.sample_id;
  out.model_id = curve.model_id;
  for (const auto [x, z] : interior_points(curve.sample_id, curve.size(), plan)) {
    const auto t = curve_triple(curve, x, z);
    out.indices.push_back(x);
    out.values.push_back(sign_indicator(perplexity_change(curve, x, z)) *
                         menger_curvature(t.left, t.mid, t.right));
  }
  return out;
}

namespace detail {

inline double l2_difference(const IndexedValues& a, const IndexedValues& b) {
  if (a.indices != b.indices) {
    throw Error(ErrorKind::IndexMismatch, "index sets differ for sample '" + a.sample_id +
                                              "' (models '" + a.model_id + "', '" + b.model_id +
                                              "'); were they built with the same plan?");
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < a.values.size(); ++i) {
    const double d = a.values[i] - b.values[i];
    sum += d * d;
  }
  return std::sqrt(sum);
}

}  // namespace detail

/// Euclidean distance between perplexity-change vectors.
inline double sim_approx_seq(const DeltaVector& a, const DeltaVector& b) {
  return detail::l2_difference(a, b);
}

/// Euclidean distance between signed-curvature vectors (the reported metric).
inline double sim_curvature_seq(const SignedCurvatureVector& a, const SignedCurvatureVector& b) {
  return detail::l2_difference(a, b);
}

/// How far the ratio of chord-length products between two curves is from 1.
struct ChordRatioDiagnostic {
  std::vector<std::size_t> indices;
  std::vector<double> ratios;  // product_b / product_a
  double min = 0.0;
  double max = 0.0;
  double geometric_mean = 0.0;
  double tau = 2.0;
  std::vector<std::size_t> flagged;  // indices with ratio outside [1/tau, tau]
};

inline ChordRatioDiagnostic chord_ratio_diagnostic(const PerplexityCurve& a,
                                                   const PerplexityCurve& b,
                                                   const SamplingPlan& plan, double tau = 2.0) {
  const auto aligned = align_curves(a, b);
  ChordRatioDiagnostic d;
  d.tau = tau;
  d.min = std::numeric_limits<double>::infinity();
  d.max = -std::numeric_limits<double>::infinity();
  double log_sum = 0.0;
  for (const auto [x, z] : interior_points(a.sample_id, aligned.n, plan)) {
    const auto ta = curve_triple(a, x, z);
    const auto tb = curve_triple(b, x, z);
    const double ratio = chord_product(tb.left, tb.mid, tb.right) /
                         chord_product(ta.left, ta.mid, ta.right);
    d.indices.push_back(x);
    d.ratios.push_back(ratio);
    d.min = std::min(d.min, ratio);
    d.max = std::max(d.max, ratio);
    log_sum += std::log(ratio);
    if (ratio < 1.0 / tau || ratio > tau) d.flagged.push_back(x);
  }
  d.geometric_mean = std::exp(log_sum / static_cast<double>(d.ratios.size()));
  return d;
}

struct SampleValue {
  std::string sample_id;
  std::size_t n = 0;  // word count |W_n|, the aggregation weight
  double value = 0.0;
};

/// Length-weighted mean sum(n * value) / sum(n).
inline double aggregate(std::span<const SampleValue> per_sample) {
  if (per_sample.empty()) throw Error(ErrorKind::EmptyInput, "nothing to aggregate");
  double num = 0.0;
  double den = 0.0;
  for (const auto& s : per_sample) {
    if (s.n == 0) throw Error(ErrorKind::EmptyInput, "sample '" + s.sample_id + "' has n = 0");
    num += static_cast<double>(s.n) * s.value;
    den += static_cast<double>(s.n);
  }
  return num / den;
}

/// Population standard deviation of the per-sample values.
inline double per_sample_stddev(std::span<const SampleValue> per_sample) {
  if (per_sample.empty()) return 0.0;
  double mean = 0.0;
  for (const auto& s : per_sample) mean += s.value;
  mean /= static_cast<double>(per_sample.size());
  double ss = 0.0;
  for (const auto& s : per_sample) ss += (s.value - mean) * (s.value - mean);
  return std::sqrt(ss / static_cast<double>(per_sample.size()));
}

enum class Metric { Curvature, SimApprox, Jsd };

constexpr std::string_view to_string(Metric m) noexcept {
  switch (m) {
    case Metric::Curvature: return "curvature";
    case Metric::SimApprox: return "sim_approx";
    case Metric::Jsd: return "jsd";
  }
  return "?";
}

inline Metric parse_metric(std::string_view s) {
  if (s == "curvature") return Metric::Curvature;
  if (s == "sim_approx") return Metric::SimApprox;
  if (s == "jsd") return Metric::Jsd;
  throw Error(ErrorKind::MalformedRecord, "unknown metric '" + std::string(s) + "'");
}

struct SimilarityReport {
  std::string model_a;
  std::string model_b;
  Metric metric = Metric::Curvature;
  std::string dataset;
  SamplingPlan plan;
  std::vector<SampleValue> per_sample;  // sorted by sample_id
  double corpus_value = 0.0;
  double per_sample_std = 0.0;
  Json config = Json::object();  // provenance of the run that produced it

  /// Identifier used when a report is cited by a detection threshold.
  std::string id() const {
    return model_a + "|" + model_b + "|" + std::string(to_string(metric)) + "|" + dataset;
  }

  Json to_json() const {
    Json rows = Json::array();
    for (const auto& s : per_sample) rows.push_back({{"sample_id", s.sample_id}, {"n", s.n}, {"value", s.value}});
    return Json{{"toolkit", kToolkitName},
                {"version", kToolkitVersion},
                {"model_a", model_a},
                {"model_b", model_b},
                {"metric", to_string(metric)},
                {"dataset", dataset},
                {"plan", plan.to_json()},
                {"corpus_value", corpus_value},
                {"per_sample_std", per_sample_std},
                {"num_samples", per_sample.size()},
                {"config", config},
                {"per_sample", std::move(rows)}};
  }

  std::string to_csv() const {
    std::string out = "sample_id,n,value\n";
    for (const auto& s : per_sample) {
      out += s.sample_id + "," + std::to_string(s.n) + "," + Json(s.value).dump() + "\n";
    }
    return out;
  }

  static SimilarityReport from_json(const Json& j) {
    try {
      SimilarityReport r;
      r.model_a = j.at("model_a").get<std::string>();
      r.model_b = j.at("model_b").get<std::string>();
      r.metric = parse_metric(j.at("metric").get<std::string>());
      r.dataset = j.at("dataset").get<std::string>();
      r.plan.k = j.at("plan").at("k").get<std::size_t>();
      r.plan.seed = j.at("plan").at("seed").get<std::uint64_t>();
      r.corpus_value = j.at("corpus_value").get<double>();
      r.per_sample_std = j.value("per_sample_std", 0.0);
      if (j.contains("config")) r.config = j["config"];
      for (const auto& row : j.at("per_sample")) {
        r.per_sample.push_back({row.at("sample_id").get<std::string>(),
                                row.at("n").get<std::size_t>(), row.at("value").get<double>()});
      }
      return r;
    } catch (const Json::exception& e) {
      throw Error(ErrorKind::MalformedRecord, std::string("similarity report: ") + e.what());
    }
  }
};

/// Curves of one model keyed by sample id.
using CurveSet = std::map<std::string, PerplexityCurve, std::less<>>;

inline CurveSet make_curve_set(std::vector<PerplexityCurve> curves) {
  CurveSet set;
  for (auto& c : curves) {
    if (!set.empty() && set.begin()->second.model_id != c.model_id) {
      throw Error(ErrorKind::MalformedRecord, "curve set mixes models '" +
                                                  set.begin()->second.model_id + "' and '" +
                                                  c.model_id + "'");
    }
    auto id = c.sample_id;
    if (!set.emplace(id, std::move(c)).second) {
      throw Error(ErrorKind::MalformedRecord, "duplicate sample '" + id + "' in curve set");
    }
  }
  return set;
}

inline CurveSet make_curve_set(const std::vector<WordLogProbRecord>& records) {
  std::vector<PerplexityCurve> curves;
  curves.reserve(records.size());
  for (const auto& r : records) curves.push_back(build_curve(r));
  return make_curve_set(std::move(curves));
}

/// Per-sequence value of one metric on two aligned curves.
inline double sequence_similarity(const PerplexityCurve& a, const PerplexityCurve& b,
                                  const SamplingPlan& plan, Metric metric) {
  align_curves(a, b);
  switch (metric) {
    case Metric::Curvature:
      return sim_curvature_seq(signed_curvature(a, plan), signed_curvature(b, plan));
    case Metric::SimApprox:
      return sim_approx_seq(delta_ppl(a, plan), delta_ppl(b, plan));
    case Metric::Jsd:
      break;
  }
  throw Error(ErrorKind::MalformedRecord, "jsd is computed from next-token distributions, not curves");
}

namespace detail {

template <typename Map>
void check_coverage(const Map& a, const Map& b) {
  std::vector<std::string> missing;
  for (const auto& [id, _] : a) {
    if (!b.contains(id)) missing.push_back(id + " (only in A)");
  }
  for (const auto& [id, _] : b) {
    if (!a.contains(id)) missing.push_back(id + " (only in B)");
  }
  if (missing.empty()) return;
  std::string msg = std::to_string(missing.size()) + " sample(s) not covered by both sets:";
  for (std::size_t i = 0; i < missing.size() && i < 10; ++i) msg += " " + missing[i];
  if (missing.size() > 10) msg += " ...";
  throw Error(ErrorKind::CoverageMismatch, msg);
}

inline void finish_report(SimilarityReport& r) {
  r.corpus_value = aggregate(r.per_sample);
  r.per_sample_std = per_sample_stddev(r.per_sample);
}

}  // namespace detail

/// Compares two models sample by sample and aggregates by word count.
inline SimilarityReport compare_models(const CurveSet& a, const CurveSet& b,
                                       const SamplingPlan& plan, Metric metric,
                                       std::string dataset = "default", unsigned threads = 1) {
  if (a.empty() || b.empty()) throw Error(ErrorKind::EmptyInput, "empty curve set");
  detail::check_coverage(a, b);
  SimilarityReport r;
  r.model_a = a.begin()->second.model_id;
  r.model_b = b.begin()->second.model_id;
  r.metric = metric;
  r.dataset = std::move(dataset);
  r.plan = plan;
  std::vector<const PerplexityCurve*> ca, cb;
  for (const auto& [id, c] : a) {
    ca.push_back(&c);
    cb.push_back(&b.find(id)->second);
  }
  r.per_sample.resize(ca.size());
  parallel_for(ca.size(), threads, [&](std::size_t i) {
    r.per_sample[i] = {ca[i]->sample_id, ca[i]->size(),
                       sequence_similarity(*ca[i], *cb[i], plan, metric)};
  });
  detail::finish_report(r);
  return r;
}

}  // namespace pplsim

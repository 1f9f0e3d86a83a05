#pragma once

#include <cmath>
#include <cstdio>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pplsim/error.hpp"
#include "pplsim/io.hpp"
#include "pplsim/similarity.hpp"

namespace pplsim {

/// Half-up rounding to `decimals` places. Values within 1e-6 of a unit in
/// the scaled space are snapped first so that binary representation error
/// (0.36435 is stored as 0.364349999...) does not turn a tie into a round-down.
inline double round_half_up(double x, int decimals = 4) {
  const double scale = std::pow(10.0, decimals);
  const double scaled = std::nearbyint(x * scale * 1e6) / 1e6;
  return std::floor(scaled + 0.5) / scale;
}

inline std::string format_display(double x, int decimals = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, round_half_up(x, decimals));
  return buf;
}

/// Midpoint between the closest pair of genuinely different models and the
/// farthest (base, noised-base) pair.
struct DetectionThreshold {
  std::string dataset;
  Metric metric = Metric::Curvature;
  double min_cross = 0.0;
  double max_noised = 0.0;
  double threshold = 0.0;
  std::string min_cross_report;
  std::string max_noised_report;

  bool separable() const noexcept { return max_noised < min_cross; }
  std::string display() const { return format_display(threshold); }

  Json to_json() const {
    return Json{{"toolkit", kToolkitName},
                {"version", kToolkitVersion},
                {"dataset", dataset},
                {"metric", to_string(metric)},
                {"min_cross", min_cross},
                {"max_noised", max_noised},
                {"threshold", threshold},
                {"threshold_display", display()},
                {"separable", separable()},
                {"provenance", {{"min_cross", min_cross_report}, {"max_noised", max_noised_report}}}};
  }

  static DetectionThreshold from_json(const Json& j) {
    try {
      DetectionThreshold t;
      t.dataset = j.at("dataset").get<std::string>();
      t.metric = parse_metric(j.at("metric").get<std::string>());
      t.min_cross = j.at("min_cross").get<double>();
      t.max_noised = j.at("max_noised").get<double>();
      t.threshold = j.at("threshold").get<double>();
      if (j.contains("provenance")) {
        t.min_cross_report = j["provenance"].value("min_cross", "");
        t.max_noised_report = j["provenance"].value("max_noised", "");
      }
      return t;
    } catch (const Json::exception& e) {
      throw Error(ErrorKind::MalformedRecord, std::string("threshold file: ") + e.what());
    }
  }
};

inline DetectionThreshold calibrate_values(double min_cross, double max_noised,
                                           std::string dataset = "default",
                                           Metric metric = Metric::Curvature) {
  DetectionThreshold t;
  t.dataset = std::move(dataset);
  t.metric = metric;
  t.min_cross = min_cross;
  t.max_noised = max_noised;
  t.threshold = 0.5 * (min_cross + max_noised);
  return t;
}

inline DetectionThreshold calibrate(std::span<const SimilarityReport> cross,
                                    std::span<const SimilarityReport> noised) {
  if (cross.empty() || noised.empty()) {
    throw Error(ErrorKind::EmptyInput, "calibration needs cross-model and noised reports");
  }
  const auto& first = cross.front();
  const auto check = [&](const SimilarityReport& r) {
    if (r.dataset != first.dataset || r.metric != first.metric) {
      throw Error(ErrorKind::MixedDatasets,
                  "report " + r.id() + " does not match dataset/metric of " + first.id());
    }
  };
  const SimilarityReport* lo = &cross.front();
  for (const auto& r : cross) {
    check(r);
    if (r.corpus_value < lo->corpus_value) lo = &r;
  }
  const SimilarityReport* hi = &noised.front();
  for (const auto& r : noised) {
    check(r);
    if (r.corpus_value > hi->corpus_value) hi = &r;
  }
  auto t = calibrate_values(lo->corpus_value, hi->corpus_value, first.dataset, first.metric);
  t.min_cross_report = lo->id();
  t.max_noised_report = hi->id();
  return t;
}

enum class Decision { SuspectedCopy, Distinct, Inconclusive };

constexpr std::string_view to_string(Decision d) noexcept {
  switch (d) {
    case Decision::SuspectedCopy: return "suspected_copy";
    case Decision::Distinct: return "distinct";
    case Decision::Inconclusive: return "inconclusive";
  }
  return "?";
}

struct Verdict {
  std::string model_a;
  std::string model_b;
  std::string dataset;
  double similarity = 0.0;
  double threshold = 0.0;
  Decision decision = Decision::Inconclusive;

  Json to_json() const {
    return Json{{"toolkit", kToolkitName},
                {"version", kToolkitVersion},
                {"model_a", model_a},
                {"model_b", model_b},
                {"dataset", dataset},
                {"similarity", similarity},
                {"threshold", threshold},
                {"decision", to_string(decision)}};
  }
};

/// Strictly below the threshold is a suspected copy; a tie is distinct.
/// Without a gap between the two calibration populations nothing is decided.
inline Verdict judge(double similarity, const DetectionThreshold& t) {
  Verdict v;
  v.dataset = t.dataset;
  v.similarity = similarity;
  v.threshold = t.threshold;
  if (!t.separable()) {
    v.decision = Decision::Inconclusive;
  } else {
    v.decision = similarity < t.threshold ? Decision::SuspectedCopy : Decision::Distinct;
  }
  return v;
}

inline Verdict judge(const SimilarityReport& report, const DetectionThreshold& t) {
  if (report.dataset != t.dataset || report.metric != t.metric) {
    throw Error(ErrorKind::MixedDatasets, "report " + report.id() +
                                              " was not produced on the threshold's dataset/metric (" +
                                              t.dataset + ", " + std::string(to_string(t.metric)) + ")");
  }
  auto v = judge(report.corpus_value, t);
  v.model_a = report.model_a;
  v.model_b = report.model_b;
  return v;
}

}  // namespace pplsim

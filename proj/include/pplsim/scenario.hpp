#pragma once

// Desk-scale replays of the model-similarity experiments on the bundled
// fixture corpora:
//
//   structure-change    fixed training data, models differing in structure
//   distribution-shift  same structure, training data from one or two registers
//   copy-noise          base model vs noised copies over a lambda sweep, plus
//                       a calibrated copy-detection threshold
//   baselines           curvature vs sim_approx vs JSD on an 8-model population
//
// Every scenario scores one shared evaluation sample drawn from the held-out
// splits of both registers.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "pplsim/corpus.hpp"
#include "pplsim/detection.hpp"
#include "pplsim/error.hpp"
#include "pplsim/io.hpp"
#include "pplsim/jsd.hpp"
#include "pplsim/ngram.hpp"
#include "pplsim/random.hpp"
#include "pplsim/similarity.hpp"

namespace pplsim {

inline constexpr std::string_view kScenarioNames[] = {"structure-change", "distribution-shift",
                                                      "copy-noise", "baselines"};
inline constexpr double kNoiseLambdas[] = {0.001, 0.01, 0.05, 0.1};

struct ScenarioOptions {
  std::uint64_t seed = 1;
  std::filesystem::path fixtures;
  std::size_t eval_samples = 1000;
  std::size_t noise_seeds = 5;
  std::size_t k = 1;
  unsigned threads = 1;

  Json to_json() const {
    return Json{{"seed", seed},
                {"eval_samples", eval_samples},
                {"noise_seeds", noise_seeds},
                {"k", k}};
  }
};

/// The two registers, each split into two training halves and a held-out
/// evaluation split.
struct FixtureCorpora {
  std::map<std::string, std::vector<WordSequence>> parts;  // e.g. "encyclopedic_a"
  std::vector<std::string> vocabulary;  // every training word, shared by all models

  static constexpr std::string_view kParts[] = {"encyclopedic_a", "encyclopedic_b",
                                                "encyclopedic_eval", "debate_a", "debate_b",
                                                "debate_eval"};

  static FixtureCorpora load(const std::filesystem::path& dir) {
    FixtureCorpora fc;
    for (auto part : kParts) {
      const auto path = dir / (std::string(part) + ".txt");
      if (!std::filesystem::exists(path)) {
        throw Error(ErrorKind::MissingFixtures, "fixture corpus " + path.string() + " not found");
      }
      auto docs = read_documents(CorpusSource::from_path(path));
      for (auto& d : docs) d.sample_id = std::string(part) + ":" + d.sample_id;
      fc.parts.emplace(std::string(part), std::move(docs));
    }
    std::map<std::string, std::uint64_t> freq;
    for (const auto& [name, docs] : fc.parts) {
      if (name.ends_with("_eval")) continue;
      for (const auto& d : docs) {
        for (const auto& w : d.words) ++freq[w];
      }
    }
    for (auto& [w, _] : freq) fc.vocabulary.push_back(w);
    return fc;
  }

  std::vector<WordSequence> concat(const std::vector<std::string>& names) const {
    std::vector<WordSequence> out;
    for (const auto& n : names) {
      const auto& p = parts.at(n);
      out.insert(out.end(), p.begin(), p.end());
    }
    return out;
  }

  /// Seeded sample from the union of both evaluation splits.
  SampleSet eval_sample(std::size_t size, std::uint64_t seed, std::size_t k) const {
    const auto docs = concat({"encyclopedic_eval", "debate_eval"});
    return sample_documents(
        [&](auto&& cb) {
          for (const auto& d : docs) {
            std::string text;
            for (const auto& w : d.words) (text += w) += ' ';
            cb(Document{d.sample_id, std::move(text)});
          }
        },
        "encyclopedic_eval+debate_eval", size, seed, default_min_len(k));
  }
};

struct ModelSpec {
  std::string name;
  std::vector<std::string> training_parts;
  std::size_t order = 2;
  double ks = 0.1;

  Json to_json() const {
    return Json{{"name", name}, {"training", training_parts}, {"order", order}, {"ks", ks}};
  }
};

inline NgramModel train_spec(const FixtureCorpora& fc, const ModelSpec& spec) {
  TrainOptions opt;
  opt.order = spec.order;
  opt.ks = spec.ks;
  opt.vocabulary = fc.vocabulary;
  opt.name = spec.name;
  std::string desc;
  for (const auto& p : spec.training_parts) desc += (desc.empty() ? "" : "+") + p;
  opt.descriptor = desc;
  const auto docs = fc.concat(spec.training_parts);
  return NgramModel::train(docs, opt);
}

inline CurveSet score_sample(const NgramModel& model, const SampleSet& sample, unsigned threads) {
  std::vector<PerplexityCurve> curves(sample.sequences.size());
  parallel_for(curves.size(), threads, [&](std::size_t i) {
    curves[i] = build_curve(model.score_words(sample.sequences[i]));
  });
  return make_curve_set(std::move(curves));
}

/// JSD report for two models sharing one vocabulary, computed directly from
/// the models without materializing distribution files.
inline SimilarityReport jsd_report(const NgramModel& a, const NgramModel& b, const SampleSet& sample,
                                   std::string dataset, unsigned threads) {
  require_gate(a.prediction_vocab(), b.prediction_vocab(), 0.7);
  const SharedSupport support(a.prediction_vocab(), b.prediction_vocab());
  std::vector<const WordSequence*> seqs;
  for (const auto& s : sample.sequences) seqs.push_back(&s);
  std::sort(seqs.begin(), seqs.end(),
            [](const auto* l, const auto* r) { return l->sample_id < r->sample_id; });
  SimilarityReport r;
  r.model_a = a.name();
  r.model_b = b.name();
  r.metric = Metric::Jsd;
  r.dataset = std::move(dataset);
  r.per_sample.resize(seqs.size());
  const bool sparse = a.noise_layers().empty() && b.noise_layers().empty() && a.words() == b.words();
  parallel_for(seqs.size(), threads, [&](std::size_t i) {
    const auto& words = seqs[i]->words;
    if (sparse) {
      if (words.size() < 2) throw Error(ErrorKind::TooShort, seqs[i]->sample_id + " has fewer than 2 words");
      auto ha = a.history_for({});
      auto hb = b.history_for({});
      double sum = 0.0;
      for (std::size_t k = 1; k < words.size(); ++k) {
        ha.push_back(a.id_of(words[k - 1]));
        hb.push_back(b.id_of(words[k - 1]));
        sum += sparse_jsd(a, a.resolve(ha), b, b.resolve(hb));
      }
      r.per_sample[i] = {seqs[i]->sample_id, words.size(), sum / static_cast<double>(words.size() - 1)};
      return;
    }
    const auto source = [&words](const NgramModel& m) {
      return [&words, &m](std::size_t k) -> std::optional<std::vector<double>> {
        return m.next_token_distribution(std::span(words).first(k)).probs;
      };
    };
    r.per_sample[i] = {seqs[i]->sample_id, words.size(),
                       jsd_seq(support, source(a), source(b), words.size())};
  });
  detail::finish_report(r);
  return r;
}

struct PairResult {
  std::string model_a;
  std::string model_b;
  std::map<std::string, SimilarityReport> reports;  // metric name -> report
};

struct ScenarioBundle {
  std::string name;
  ScenarioOptions options;
  std::string dataset;
  std::size_t sample_size = 0;
  std::vector<ModelSpec> models;
  std::vector<PairResult> pairs;
  Json findings = Json::object();  // scenario-specific tables and checks

  const PairResult& pair(std::string_view a, std::string_view b) const {
    for (const auto& p : pairs) {
      if ((p.model_a == a && p.model_b == b) || (p.model_a == b && p.model_b == a)) return p;
    }
    throw Error(ErrorKind::InvalidArgument, "no pair " + std::string(a) + " / " + std::string(b));
  }

  double value(std::string_view a, std::string_view b, std::string_view metric = "curvature") const {
    return pair(a, b).reports.at(std::string(metric)).corpus_value;
  }

  Json to_json() const {
    Json ms = Json::array();
    for (const auto& m : models) ms.push_back(m.to_json());
    Json ps = Json::array();
    for (const auto& p : pairs) {
      Json vals = Json::object();
      Json stds = Json::object();
      for (const auto& [metric, rep] : p.reports) {
        vals[metric] = rep.corpus_value;
        stds[metric] = rep.per_sample_std;
      }
      ps.push_back({{"model_a", p.model_a}, {"model_b", p.model_b}, {"corpus_value", vals},
                    {"per_sample_std", stds}});
    }
    return Json{{"toolkit", kToolkitName},
                {"version", kToolkitVersion},
                {"scenario", name},
                {"config", options.to_json()},
                {"dataset", dataset},
                {"num_samples", sample_size},
                {"models", ms},
                {"pairs", ps},
                {"findings", findings}};
  }

  /// summary.json plus one report per (pair, metric) under reports/<group>/.
  void write(const std::filesystem::path& out_dir) const {
    write_file_atomic(out_dir / "summary.json", dump_json(to_json()));
    for (const auto& p : pairs) {
      for (const auto& [metric, rep] : p.reports) {
        const std::string group = rep.config.value("group", std::string("pairs"));
        const auto stem = p.model_a + "__" + p.model_b + "__" + metric;
        write_file_atomic(out_dir / "reports" / group / (stem + ".json"), dump_json(rep.to_json()));
        write_file_atomic(out_dir / "reports" / group / (stem + ".csv"), rep.to_csv());
      }
    }
  }
};

namespace detail {

struct Population {
  std::vector<NgramModel> models;
  std::vector<CurveSet> curves;

  std::size_t index(std::string_view name) const {
    for (std::size_t i = 0; i < models.size(); ++i) {
      if (models[i].name() == name) return i;
    }
    throw Error(ErrorKind::InvalidArgument, "unknown model " + std::string(name));
  }
};

inline Population build_population(const FixtureCorpora& fc, const std::vector<ModelSpec>& specs,
                                   const SampleSet& sample, unsigned threads) {
  Population pop;
  for (const auto& s : specs) {
    pop.models.push_back(train_spec(fc, s));
    pop.curves.push_back(score_sample(pop.models.back(), sample, threads));
  }
  return pop;
}

inline PairResult compare_pair(const CurveSet& a, const CurveSet& b, const std::string& name_a,
                               const std::string& name_b, const SamplingPlan& plan,
                               const std::string& dataset, const Json& config, unsigned threads) {
  PairResult pr{name_a, name_b, {}};
  for (Metric m : {Metric::Curvature, Metric::SimApprox}) {
    auto rep = compare_models(a, b, plan, m, dataset, threads);
    rep.model_a = name_a;
    rep.model_b = name_b;
    rep.config = config;
    pr.reports.emplace(std::string(to_string(m)), std::move(rep));
  }
  return pr;
}

inline std::vector<std::pair<std::size_t, std::size_t>> all_pairs(std::size_t n) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) out.emplace_back(i, j);
  }
  return out;
}

/// True when, in every row of the curvature matrix, the model's designated
/// partner is strictly the closest.
inline Json partner_check(const ScenarioBundle& b,
                          const std::vector<std::pair<std::string, std::string>>& partners,
                          std::string_view metric = "curvature") {
  Json rows = Json::array();
  bool all = true;
  for (const auto& [self, partner] : partners) {
    const double own = b.value(self, partner, metric);
    bool ok = true;
    for (const auto& m : b.models) {
      if (m.name == self || m.name == partner) continue;
      if (!(own < b.value(self, m.name, metric))) ok = false;
    }
    all = all && ok;
    rows.push_back({{"model", self}, {"partner", partner}, {"value", own}, {"partner_is_closest", ok}});
  }
  return Json{{"rows", rows}, {"holds", all}};
}

inline Json config_json(std::string_view scenario, const ScenarioOptions& opt, std::string_view group) {
  auto j = opt.to_json();
  j["scenario"] = scenario;
  j["group"] = group;
  return j;
}

}  // namespace detail

inline ScenarioBundle run_structure_change(const FixtureCorpora& fc, const ScenarioOptions& opt) {
  ScenarioBundle b;
  b.name = "structure-change";
  b.options = opt;
  b.dataset = "fixtures-eval";
  // Two families on the same data: "sharp" (small k) and "flat" (large k)
  // smoothing, each with a trigram model and its one-context-word-shorter
  // bigram counterpart. "shifted" is a sharp bigram on the other register.
  const std::vector<std::string> data = {"encyclopedic_a", "encyclopedic_b"};
  b.models = {
      {"sharp-o3", data, 3, 0.01},
      {"sharp-o2", data, 2, 0.01},
      {"flat-o3", data, 3, 1.0},
      {"flat-o2", data, 2, 1.0},
      {"shifted-o2", {"debate_a", "debate_b"}, 2, 0.01},
  };
  const auto sample = fc.eval_sample(opt.eval_samples, opt.seed, opt.k);
  b.sample_size = sample.sequences.size();
  const auto pop = detail::build_population(fc, b.models, sample, opt.threads);
  const SamplingPlan plan{opt.k, opt.seed};
  const auto cfg = detail::config_json(b.name, opt, "pairs");
  for (auto [i, j] : detail::all_pairs(pop.models.size())) {
    b.pairs.push_back(detail::compare_pair(pop.curves[i], pop.curves[j], b.models[i].name,
                                           b.models[j].name, plan, b.dataset, cfg, opt.threads));
  }
  b.findings["family_rows"] = detail::partner_check(
      b, {{"sharp-o3", "sharp-o2"}, {"sharp-o2", "sharp-o3"}, {"flat-o3", "flat-o2"}, {"flat-o2", "flat-o3"}});
  const double same = b.value("sharp-o3", "sharp-o2");
  b.findings["order_vs_shift"] = {
      {"order_pair", same},
      {"o3_vs_shifted", b.value("sharp-o3", "shifted-o2")},
      {"o2_vs_shifted", b.value("sharp-o2", "shifted-o2")},
      {"holds", same < b.value("sharp-o3", "shifted-o2") && same < b.value("sharp-o2", "shifted-o2")}};
  b.findings["holds"] = b.findings["family_rows"]["holds"].get<bool>() &&
                        b.findings["order_vs_shift"]["holds"].get<bool>();
  return b;
}

inline ScenarioBundle run_distribution_shift(const FixtureCorpora& fc, const ScenarioOptions& opt) {
  ScenarioBundle b;
  b.name = "distribution-shift";
  b.options = opt;
  b.dataset = "fixtures-eval";
  b.models = {
      {"enc-a", {"encyclopedic_a"}, 2, 0.1},
      {"enc-b", {"encyclopedic_b"}, 2, 0.1},
      {"deb-a", {"debate_a"}, 2, 0.1},
      {"deb-b", {"debate_b"}, 2, 0.1},
  };
  const auto sample = fc.eval_sample(opt.eval_samples, opt.seed, opt.k);
  b.sample_size = sample.sequences.size();
  const auto pop = detail::build_population(fc, b.models, sample, opt.threads);
  const SamplingPlan plan{opt.k, opt.seed};
  const auto cfg = detail::config_json(b.name, opt, "pairs");
  for (auto [i, j] : detail::all_pairs(pop.models.size())) {
    b.pairs.push_back(detail::compare_pair(pop.curves[i], pop.curves[j], b.models[i].name,
                                           b.models[j].name, plan, b.dataset, cfg, opt.threads));
  }
  b.findings["in_distribution_rows"] = detail::partner_check(
      b, {{"enc-a", "enc-b"}, {"enc-b", "enc-a"}, {"deb-a", "deb-b"}, {"deb-b", "deb-a"}});
  b.findings["holds"] = b.findings["in_distribution_rows"]["holds"];
  return b;
}

/// The 8-model population shared by the baselines and copy-noise scenarios.
inline std::vector<ModelSpec> population_specs() {
  return {
      {"enc-a-o2", {"encyclopedic_a"}, 2, 0.1},
      {"enc-b-o2", {"encyclopedic_b"}, 2, 0.1},
      {"enc-a-o3", {"encyclopedic_a"}, 3, 0.1},
      {"enc-ab-o1", {"encyclopedic_a", "encyclopedic_b"}, 1, 0.1},
      {"deb-a-o2", {"debate_a"}, 2, 0.1},
      {"deb-b-o3", {"debate_b"}, 3, 0.1},
      {"deb-a-o2-k1", {"debate_a"}, 2, 1.0},
      {"mix-o2", {"encyclopedic_b", "debate_a"}, 2, 0.1},
  };
}

inline double spearman(const std::vector<double>& x, const std::vector<double>& y) {
  const auto ranks = [](const std::vector<double>& v) {
    std::vector<std::size_t> idx(v.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t c) { return v[a] < v[c]; });
    std::vector<double> r(v.size());
    for (std::size_t i = 0; i < idx.size();) {
      std::size_t j = i;
      while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
      const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
      for (std::size_t t = i; t <= j; ++t) r[idx[t]] = avg;
      i = j + 1;
    }
    return r;
  };
  const auto rx = ranks(x), ry = ranks(y);
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  return sxy / std::sqrt(sxx * syy);
}

inline ScenarioBundle run_baselines(const FixtureCorpora& fc, const ScenarioOptions& opt) {
  ScenarioBundle b;
  b.name = "baselines";
  b.options = opt;
  b.dataset = "fixtures-eval";
  b.models = population_specs();
  const auto sample = fc.eval_sample(opt.eval_samples, opt.seed, opt.k);
  b.sample_size = sample.sequences.size();
  const auto pop = detail::build_population(fc, b.models, sample, opt.threads);
  const SamplingPlan plan{opt.k, opt.seed};
  const auto cfg = detail::config_json(b.name, opt, "pairs");
  std::vector<double> curv, jsdv;
  for (auto [i, j] : detail::all_pairs(pop.models.size())) {
    auto pr = detail::compare_pair(pop.curves[i], pop.curves[j], b.models[i].name,
                                   b.models[j].name, plan, b.dataset, cfg, opt.threads);
    auto jr = jsd_report(pop.models[i], pop.models[j], sample, b.dataset, opt.threads);
    jr.config = cfg;
    curv.push_back(pr.reports.at("curvature").corpus_value);
    jsdv.push_back(jr.corpus_value);
    pr.reports.emplace("jsd", std::move(jr));
    b.pairs.push_back(std::move(pr));
  }
  const auto argmin = [](const std::vector<double>& v) {
    return static_cast<std::size_t>(std::min_element(v.begin(), v.end()) - v.begin());
  };
  const double rho = spearman(curv, jsdv);
  const auto& top_c = b.pairs[argmin(curv)];
  const auto& top_j = b.pairs[argmin(jsdv)];
  b.findings["concordance"] = {
      {"spearman_curvature_jsd", rho},
      {"top1_curvature", top_c.model_a + " / " + top_c.model_b},
      {"top1_jsd", top_j.model_a + " / " + top_j.model_b},
      {"top1_agree", argmin(curv) == argmin(jsdv)}};
  // Per-sample spread for the pairs against one reference model: the
  // lowest-capacity member (smallest order, first in population order).
  const auto steadier_count = [&](std::size_t anchor, Json* rows) {
    std::size_t n = 0;
    for (std::size_t j = 0; j < b.models.size(); ++j) {
      if (j == anchor) continue;
      const auto& p = b.pair(b.models[anchor].name, b.models[j].name);
      const double sc = p.reports.at("curvature").per_sample_std;
      const double sa = p.reports.at("sim_approx").per_sample_std;
      if (sc <= sa) ++n;
      if (rows) {
        rows->push_back({{"model_a", p.model_a}, {"model_b", p.model_b}, {"std_curvature", sc},
                         {"std_sim_approx", sa}, {"std_jsd", p.reports.at("jsd").per_sample_std}});
      }
    }
    return n;
  };
  std::size_t anchor = 0;
  for (std::size_t j = 1; j < b.models.size(); ++j) {
    if (b.models[j].order < b.models[anchor].order) anchor = j;
  }
  Json stab = Json::array();
  const std::size_t curvature_steadier = steadier_count(anchor, &stab);
  Json by_anchor = Json::object();
  for (std::size_t j = 0; j < b.models.size(); ++j) by_anchor[b.models[j].name] = steadier_count(j, nullptr);
  b.findings["stability"] = {{"anchor", b.models[anchor].name},
                             {"pairs", stab},
                             {"curvature_steadier", curvature_steadier},
                             {"total", b.models.size() - 1},
                             {"curvature_steadier_by_anchor", by_anchor}};
  return b;
}

inline ScenarioBundle run_copy_noise(const FixtureCorpora& fc, const ScenarioOptions& opt) {
  ScenarioBundle b;
  b.name = "copy-noise";
  b.options = opt;
  b.dataset = "fixtures-eval";
  b.models = population_specs();
  const auto sample = fc.eval_sample(opt.eval_samples, opt.seed, opt.k);
  b.sample_size = sample.sequences.size();
  const auto pop = detail::build_population(fc, b.models, sample, opt.threads);
  const SamplingPlan plan{opt.k, opt.seed};
  const auto cross_cfg = detail::config_json(b.name, opt, "cross");
  std::vector<SimilarityReport> cross, noised;
  for (auto [i, j] : detail::all_pairs(pop.models.size())) {
    auto pr = detail::compare_pair(pop.curves[i], pop.curves[j], b.models[i].name,
                                   b.models[j].name, plan, b.dataset, cross_cfg, opt.threads);
    pr.reports.erase("sim_approx");
    cross.push_back(pr.reports.at("curvature"));
    b.pairs.push_back(std::move(pr));
  }
  const auto& base = pop.models[0];
  const auto noised_cfg = detail::config_json(b.name, opt, "noised");
  Json sweep = Json::array();
  bool monotone = true;
  double prev_mean = -1.0;
  for (double lambda : kNoiseLambdas) {
    Json vals = Json::array();
    double sum = 0.0;
    for (std::size_t s = 0; s < opt.noise_seeds; ++s) {
      const std::uint64_t noise_seed = hash_combine(opt.seed, s);
      auto copy = add_noise(base, NoiseSpec{lambda, noise_seed});
      char name[64];
      std::snprintf(name, sizeof name, "%s+noise%g-s%zu", base.name().c_str(), lambda, s);
      copy.set_name(name);
      const auto curves = score_sample(copy, sample, opt.threads);
      auto pr = detail::compare_pair(pop.curves[0], curves, base.name(), name, plan, b.dataset,
                                     noised_cfg, opt.threads);
      pr.reports.erase("sim_approx");
      const double v = pr.reports.at("curvature").corpus_value;
      noised.push_back(pr.reports.at("curvature"));
      b.pairs.push_back(std::move(pr));
      vals.push_back(v);
      sum += v;
    }
    const double mean = sum / static_cast<double>(opt.noise_seeds);
    if (mean < prev_mean) monotone = false;
    prev_mean = mean;
    sweep.push_back({{"lambda", lambda}, {"values", vals}, {"mean", mean}});
  }
  const auto threshold = calibrate(cross, noised);
  b.findings["lambda_sweep"] = sweep;
  b.findings["sweep_non_decreasing"] = monotone;
  b.findings["threshold"] = threshold.to_json();
  b.findings["holds"] = monotone && threshold.separable();
  return b;
}

inline ScenarioBundle run_scenario(std::string_view name, const ScenarioOptions& opt) {
  const auto fc = FixtureCorpora::load(opt.fixtures);
  if (name == "structure-change") return run_structure_change(fc, opt);
  if (name == "distribution-shift") return run_distribution_shift(fc, opt);
  if (name == "copy-noise") return run_copy_noise(fc, opt);
  if (name == "baselines") return run_baselines(fc, opt);
  throw Error(ErrorKind::InvalidArgument, "unknown scenario '" + std::string(name) + "'");
}

}  // namespace pplsim

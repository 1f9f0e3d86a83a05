// pplsim command-line entry point.
//
// Exit codes: 0 success, 1 usage error, 2 data error. Errors go to stderr
// prefixed "error[usage]:" or "error[data]:".

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "pplsim/corpus.hpp"
#include "pplsim/curve.hpp"
#include "pplsim/detection.hpp"
#include "pplsim/error.hpp"
#include "pplsim/io.hpp"
#include "pplsim/jsd.hpp"
#include "pplsim/ngram.hpp"
#include "pplsim/scenario.hpp"
#include "pplsim/similarity.hpp"

namespace fs = std::filesystem;
using namespace pplsim;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

fs::path default_out_dir() {
  if (const char* env = std::getenv("PPLSIM_OUT_DIR"); env && *env) return env;
  return "pplsim-out";
}

struct CorpusFlags {
  std::string path;
  std::string text_field = "text";
  std::string id_field;
  std::size_t samples = 1000;
  std::uint64_t seed = 42;
  std::optional<std::size_t> min_len;

  void add(CLI::App* app, bool sampling) {
    app->add_option("--corpus", path, "plain text (one document per line) or .jsonl")->required();
    app->add_option("--text-field", text_field, "JSON Lines text field");
    app->add_option("--id-field", id_field, "JSON Lines document id field");
    if (sampling) {
      app->add_option("--samples", samples, "number of sampled documents")->capture_default_str();
      app->add_option("--seed", seed, "sampling seed")->capture_default_str();
      app->add_option("--min-len", min_len, "minimum words per document (default 3)");
    }
  }

  CorpusSource source() const {
    auto src = CorpusSource::from_path(path);
    src.text_field = text_field;
    src.id_field = id_field;
    return src;
  }

  SampleSet sample() const {
    return sample_corpus(source(), samples, seed, min_len.value_or(default_min_len()));
  }

  Json to_json() const {
    return Json{{"corpus", path},    {"text_field", text_field}, {"id_field", id_field},
                {"samples", samples}, {"seed", seed},            {"min_len", min_len.value_or(default_min_len())}};
  }
};

Json run_config(std::string_view subcommand, Json flags) {
  return Json{{"toolkit", kToolkitName}, {"version", kToolkitVersion}, {"subcommand", subcommand},
              {"flags", std::move(flags)}};
}

std::vector<SimilarityReport> read_reports(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw UsageError(dir.string() + " is not a directory");
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".json") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<SimilarityReport> out;
  for (const auto& f : files) {
    Json j;
    try {
      j = Json::parse(read_file(f));
    } catch (const Json::parse_error& e) {
      throw Error(ErrorKind::MalformedRecord, f.string() + ": " + e.what());
    }
    if (j.contains("corpus_value")) out.push_back(SimilarityReport::from_json(j));
  }
  return out;
}

void write_report(const fs::path& out_dir, const SimilarityReport& r) {
  const auto stem = r.model_a + "__" + r.model_b + "__" + std::string(to_string(r.metric));
  write_file_atomic(out_dir / (stem + ".json"), dump_json(r.to_json()));
  write_file_atomic(out_dir / (stem + ".csv"), r.to_csv());
  std::cout << r.corpus_value << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Perplexity-curve model similarity toolkit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kToolkitVersion));
  std::string log_level = "info";
  app.add_option("--log-level", log_level, "error or info")
      ->check(CLI::IsMember({"error", "info"}));
  const auto info = [&](const std::string& msg) {
    if (log_level == "info") std::cerr << msg << "\n";
  };

  // train
  auto* train = app.add_subcommand("train", "train an n-gram model on a corpus");
  CorpusFlags train_corpus;
  train_corpus.add(train, false);
  TrainOptions topt;
  std::string train_out;
  train->add_option("--order", topt.order, "n-gram order")->capture_default_str();
  train->add_option("--ks", topt.ks, "add-k smoothing constant")->capture_default_str();
  train->add_option("--vocab-cap", topt.vocab_cap, "keep the V most frequent words (0 = all)");
  train->add_option("--name", topt.name, "model id")->capture_default_str();
  train->add_option("--out", train_out, "model file")->required();

  // score
  auto* score = app.add_subcommand("score", "score sampled documents into a curve file");
  CorpusFlags score_corpus;
  score_corpus.add(score, true);
  std::string score_model, score_out;
  unsigned score_threads = 1;
  score->add_option("--model", score_model)->required();
  score->add_option("--out", score_out, "curve JSON Lines file")->required();
  score->add_option("--threads", score_threads)->check(CLI::PositiveNumber);

  // dist
  auto* dist = app.add_subcommand("dist", "next-token distributions");
  std::string dist_model, dist_prefix, dist_out, dist_corpus_path;
  CorpusFlags dist_corpus;
  dist->add_option("--model", dist_model)->required();
  auto* prefix_opt = dist->add_option("--prefix", dist_prefix, "print the distribution after these words");
  auto* dcorp = dist->add_option("--corpus", dist_corpus.path, "write distributions for sampled documents");
  dist->add_option("--samples", dist_corpus.samples)->capture_default_str();
  dist->add_option("--seed", dist_corpus.seed)->capture_default_str();
  dist->add_option("--min-len", dist_corpus.min_len);
  dist->add_option("--text-field", dist_corpus.text_field);
  dist->add_option("--id-field", dist_corpus.id_field);
  dist->add_option("--out", dist_out, "distribution JSON Lines file (with --corpus)");
  prefix_opt->excludes(dcorp);

  // noise
  auto* noise = app.add_subcommand("noise", "perturb a model with Gaussian noise");
  std::string noise_model, noise_out, noise_name;
  NoiseSpec nspec;
  noise->add_option("--model", noise_model)->required();
  noise->add_option("--lambda", nspec.lambda, "noise scale relative to per-table std")->required();
  noise->add_option("--seed", nspec.seed)->capture_default_str();
  noise->add_option("--name", noise_name, "model id of the copy");
  noise->add_option("--out", noise_out)->required();

  // compare
  auto* compare = app.add_subcommand("compare", "curve-based similarity of two curve files");
  std::string cmp_metric = "curvature", cmp_a, cmp_b, cmp_dataset = "default";
  SamplingPlan cmp_plan;
  std::optional<std::string> cmp_out;
  unsigned cmp_threads = 1;
  compare->add_option("--metric", cmp_metric)->check(CLI::IsMember({"curvature", "sim_approx"}))->capture_default_str();
  compare->add_option("--a", cmp_a)->required();
  compare->add_option("--b", cmp_b)->required();
  compare->add_option("--k", cmp_plan.k, "largest neighbour offset z")->check(CLI::PositiveNumber)->capture_default_str();
  compare->add_option("--seed", cmp_plan.seed)->capture_default_str();
  compare->add_option("--dataset", cmp_dataset)->capture_default_str();
  compare->add_option("--out", cmp_out, "report directory");
  compare->add_option("--threads", cmp_threads)->check(CLI::PositiveNumber);

  // jsd
  auto* jsdc = app.add_subcommand("jsd", "JSD baseline over two distribution files");
  std::string jsd_a, jsd_b, jsd_dataset = "default";
  double jsd_gate = 0.7;
  std::optional<std::string> jsd_out;
  unsigned jsd_threads = 1;
  jsdc->add_option("--a", jsd_a)->required();
  jsdc->add_option("--b", jsd_b)->required();
  jsdc->add_option("--gate", jsd_gate, "minimum vocabulary overlap")->check(CLI::Range(0.0, 1.0))->capture_default_str();
  jsdc->add_option("--dataset", jsd_dataset)->capture_default_str();
  jsdc->add_option("--out", jsd_out, "report directory");
  jsdc->add_option("--threads", jsd_threads)->check(CLI::PositiveNumber);

  // calibrate
  auto* calib = app.add_subcommand("calibrate", "threshold from cross-model and noised reports");
  std::string cal_cross, cal_noised, cal_out;
  calib->add_option("--cross", cal_cross, "directory of cross-model reports")->required();
  calib->add_option("--noised", cal_noised, "directory of base-vs-noised reports")->required();
  calib->add_option("--out", cal_out, "threshold JSON file")->required();

  // judge
  auto* judgec = app.add_subcommand("judge", "copy verdict for one report");
  std::string jg_report, jg_threshold;
  std::optional<std::string> jg_out;
  judgec->add_option("--report", jg_report)->required();
  judgec->add_option("--threshold", jg_threshold)->required();
  judgec->add_option("--out", jg_out, "verdict JSON file (default stdout)");

  // scenario
  auto* scen = app.add_subcommand("scenario", "desk-scale experiment on the bundled fixtures");
  std::string scen_name;
  ScenarioOptions sopt;
  std::optional<std::string> scen_out;
  std::string scen_fixtures = PPLSIM_DEFAULT_FIXTURES;
  std::vector<std::string> names(std::begin(kScenarioNames), std::end(kScenarioNames));
  scen->add_option("name", scen_name)->required()->check(CLI::IsMember(names));
  scen->add_option("--seed", sopt.seed)->capture_default_str();
  scen->add_option("--samples", sopt.eval_samples, "evaluation sample size")->capture_default_str();
  scen->add_option("--noise-seeds", sopt.noise_seeds, "noised copies per lambda")->check(CLI::PositiveNumber)->capture_default_str();
  scen->add_option("--k", sopt.k)->check(CLI::PositiveNumber)->capture_default_str();
  scen->add_option("--threads", sopt.threads)->check(CLI::PositiveNumber);
  scen->add_option("--fixtures", scen_fixtures)->capture_default_str();
  scen->add_option("--out", scen_out, "output directory");

  // report
  auto* report = app.add_subcommand("report", "per-model curve CSVs for plotting");
  std::vector<std::string> rep_curves;
  std::optional<std::string> rep_out;
  std::string rep_sample;
  report->add_option("--curves", rep_curves, "curve files")->required();
  report->add_option("--sample", rep_sample, "only this sample id");
  report->add_option("--out", rep_out, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error[usage]: " << e.what() << "\n\n" << app.help();
    return 1;
  }

  try {
    if (*train) {
      topt.descriptor = run_config("train", Json{{"corpus", train_corpus.to_json()},
                                                 {"order", topt.order},
                                                 {"ks", topt.ks},
                                                 {"vocab_cap", topt.vocab_cap},
                                                 {"name", topt.name}})
                            .dump();
      const auto docs = read_documents(train_corpus.source());
      const auto model = NgramModel::train(docs, topt);
      model.save(train_out);
      info("trained " + topt.name + ": " + std::to_string(docs.size()) + " documents, |V|=" +
           std::to_string(model.vocab_size()));
    } else if (*score) {
      const auto model = NgramModel::load(score_model);
      const auto sample = score_corpus.sample();
      std::vector<WordLogProbRecord> recs(sample.sequences.size());
      parallel_for(recs.size(), score_threads,
                   [&](std::size_t i) { recs[i] = model.score_words(sample.sequences[i]); });
      const Json header = run_config("score", Json{{"model", score_model},
                                                   {"model_id", model.name()},
                                                   {"corpus", score_corpus.to_json()},
                                                   {"documents_seen", sample.documents_seen},
                                                   {"excluded_short", sample.excluded_short},
                                                   {"shortfall", sample.shortfall()}});
      write_curve_file(score_out, recs, header);
      if (sample.shortfall() > 0) {
        std::cerr << "warning: only " << sample.sequences.size() << " of " << sample.requested_size
                  << " documents were eligible\n";
      }
      info("scored " + std::to_string(recs.size()) + " documents");
    } else if (*dist) {
      const auto model = NgramModel::load(dist_model);
      if (!dist_corpus.path.empty()) {
        if (dist_out.empty()) throw UsageError("dist --corpus needs --out");
        const auto sample = dist_corpus.sample();
        DistributionSet set{model.name(), model.prediction_vocab(), {}};
        for (const auto& seq : sample.sequences) {
          auto& rows = set.samples[seq.sample_id];
          for (std::size_t k = 1; k < seq.size(); ++k) {
            rows.push_back(model.next_token_distribution(std::span(seq.words).first(k)).probs);
          }
        }
        write_distribution_file(dist_out, set);
        info("wrote distributions for " + std::to_string(set.samples.size()) + " documents");
      } else {
        if (!*prefix_opt) throw UsageError("dist needs --prefix or --corpus");
        const auto words = dist_prefix.empty() ? std::vector<std::string>{} : segment(dist_prefix).words;
        const auto d = model.next_token_distribution(words);
        Json probs = Json::object();
        for (std::size_t i = 0; i < d.vocab.size(); ++i) probs[d.vocab[i]] = d.probs[i];
        std::cout << dump_json(Json{{"model_id", model.name()}, {"prefix", words}, {"probs", probs}});
      }
    } else if (*noise) {
      auto copy = add_noise(NgramModel::load(noise_model), nspec);
      if (!noise_name.empty()) copy.set_name(noise_name);
      copy.save(noise_out);
      info("wrote noised model " + copy.name());
    } else if (*compare) {
      const auto fa = read_curve_file(cmp_a);
      const auto fb = read_curve_file(cmp_b);
      auto r = compare_models(make_curve_set(fa.records), make_curve_set(fb.records), cmp_plan,
                              parse_metric(cmp_metric), cmp_dataset, cmp_threads);
      r.config = run_config("compare", Json{{"a", cmp_a},
                                            {"b", cmp_b},
                                            {"metric", cmp_metric},
                                            {"k", cmp_plan.k},
                                            {"seed", cmp_plan.seed},
                                            {"dataset", cmp_dataset}});
      write_report(cmp_out ? fs::path(*cmp_out) : default_out_dir(), r);
    } else if (*jsdc) {
      const auto da = read_distribution_file(jsd_a);
      const auto db = read_distribution_file(jsd_b);
      auto r = compare_distributions(da, db, jsd_gate, jsd_dataset, jsd_threads);
      r.config = run_config("jsd", Json{{"a", jsd_a}, {"b", jsd_b}, {"gate", jsd_gate}, {"dataset", jsd_dataset}});
      write_report(jsd_out ? fs::path(*jsd_out) : default_out_dir(), r);
    } else if (*calib) {
      const auto cross = read_reports(cal_cross);
      const auto noised = read_reports(cal_noised);
      const auto t = calibrate(cross, noised);
      write_file_atomic(cal_out, dump_json(t.to_json()));
      if (!t.separable()) {
        std::cerr << "warning: noised similarities reach the cross-model ones; verdicts will be inconclusive\n";
      }
      std::cout << t.display() << "\n";
    } else if (*judgec) {
      Json rj, tj;
      try {
        rj = Json::parse(read_file(jg_report));
        tj = Json::parse(read_file(jg_threshold));
      } catch (const Json::parse_error& e) {
        throw Error(ErrorKind::MalformedRecord, e.what());
      }
      const auto v = judge(SimilarityReport::from_json(rj), DetectionThreshold::from_json(tj));
      if (jg_out) {
        write_file_atomic(*jg_out, dump_json(v.to_json()));
        std::cout << to_string(v.decision) << "\n";
      } else {
        std::cout << dump_json(v.to_json());
      }
    } else if (*scen) {
      sopt.fixtures = scen_fixtures;
      const auto out = scen_out ? fs::path(*scen_out) : default_out_dir() / scen_name;
      const auto bundle = run_scenario(scen_name, sopt);
      bundle.write(out);
      const bool holds = bundle.findings.value("holds", true);
      info("scenario " + scen_name + ": " + std::to_string(bundle.pairs.size()) + " pairs, ordering " +
           (holds ? "holds" : "does not hold") + "; wrote " + (out / "summary.json").string());
    } else if (*report) {
      const auto out = rep_out ? fs::path(*rep_out) : default_out_dir();
      for (const auto& path : rep_curves) {
        const auto file = read_curve_file(path);
        if (file.records.empty()) throw Error(ErrorKind::EmptyInput, path + ": no records");
        std::string csv = "sample_id,word_index,f\n";
        std::size_t rows = 0;
        for (const auto& rec : file.records) {
          if (!rep_sample.empty() && rec.sample_id != rep_sample) continue;
          const auto c = build_curve(rec);
          for (std::size_t i = 1; i <= c.size(); ++i) {
            csv += c.sample_id + "," + std::to_string(i) + "," + Json(c.at(i)).dump() + "\n";
          }
          ++rows;
        }
        if (rows == 0) throw Error(ErrorKind::SampleMismatch, path + ": no sample '" + rep_sample + "'");
        write_file_atomic(out / (file.records.front().model_id + ".csv"), csv);
      }
    }
  } catch (const UsageError& e) {
    std::cerr << "error[usage]: " << e.what() << "\n";
    return 1;
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::InvalidArgument) {
      std::cerr << "error[usage]: " << e.what() << "\n";
      return 1;
    }
    std::cerr << "error[data]: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error[data]: " << e.what() << "\n";
    return 2;
  }
  return 0;
}

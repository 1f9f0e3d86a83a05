#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "pplsim/error.hpp"
#include "pplsim/io.hpp"

namespace pplsim {

/// Cumulative per-word scores of one model on one word sequence.
/// cum_logprob[i] is the natural-log probability of all tokens in the first
/// i+1 words; cum_tokens[i] is how many tokens that covers.
struct WordLogProbRecord {
  std::string sample_id;
  std::string model_id;
  std::vector<std::string> words;
  std::vector<double> cum_logprob;
  std::vector<std::int64_t> cum_tokens;
};

/// f(x) = log PPL of the first x words, in nats. Stored 0-based; use at()
/// for the 1-based word index.
struct PerplexityCurve {
  std::string sample_id;
  std::string model_id;
  std::vector<double> f;

  std::size_t size() const noexcept { return f.size(); }
  double at(std::size_t x) const { return f.at(x - 1); }
};

inline void validate_record(const WordLogProbRecord& rec) {
  const auto fail = [&](const std::string& why) {
    throw Error(ErrorKind::MalformedRecord,
                "sample '" + rec.sample_id + "' model '" + rec.model_id + "': " + why);
  };
  const std::size_t n = rec.words.size();
  if (n == 0) fail("empty record");
  if (rec.cum_logprob.size() != n || rec.cum_tokens.size() != n) fail("length mismatch");
  for (std::size_t i = 0; i < n; ++i) {
    const double lp = rec.cum_logprob[i];
    if (!std::isfinite(lp)) fail("non-finite cum_logprob at word " + std::to_string(i + 1));
    if (lp > 0.0) fail("positive cum_logprob at word " + std::to_string(i + 1));
    if (i > 0 && lp > rec.cum_logprob[i - 1]) {
      fail("cum_logprob increases at word " + std::to_string(i + 1));
    }
    const auto t = rec.cum_tokens[i];
    if (t <= 0 || (i > 0 && t <= rec.cum_tokens[i - 1])) {
      fail("cum_tokens not strictly increasing at word " + std::to_string(i + 1));
    }
  }
}

inline PerplexityCurve build_curve(const WordLogProbRecord& rec) {
  validate_record(rec);
  PerplexityCurve curve{rec.sample_id, rec.model_id, {}};
  curve.f.resize(rec.words.size());
  for (std::size_t i = 0; i < curve.f.size(); ++i) {
    curve.f[i] = -rec.cum_logprob[i] / static_cast<double>(rec.cum_tokens[i]);
  }
  return curve;
}

/// Two curves over the same word sequence.
struct AlignedCurves {
  const PerplexityCurve& a;
  const PerplexityCurve& b;
  std::size_t n;  // valid word indices are 1..n
};

inline AlignedCurves align_curves(const PerplexityCurve& a, const PerplexityCurve& b) {
  if (a.sample_id != b.sample_id) {
    throw Error(ErrorKind::SampleMismatch,
                "curves are for different samples: '" + a.sample_id + "' vs '" + b.sample_id + "'");
  }
  if (a.size() != b.size()) {
    throw Error(ErrorKind::SampleMismatch, "sample '" + a.sample_id + "' has " +
                                               std::to_string(a.size()) + " words for '" +
                                               a.model_id + "' but " + std::to_string(b.size()) +
                                               " for '" + b.model_id +
                                               "'; the scorers segmented it differently");
  }
  return {a, b, a.size()};
}

// ---------------------------------------------------------------------------
// Canonical curve file: JSON Lines, one record per line with exactly the
// fields sample_id, model_id, words, cum_logprob, cum_tokens. An optional
// first line of the form {"header": {...}} carries producer metadata.

struct CurveFile {
  Json header;  // null when absent
  std::vector<WordLogProbRecord> records;
};

inline Json record_to_json(const WordLogProbRecord& rec) {
  return Json{{"sample_id", rec.sample_id},
              {"model_id", rec.model_id},
              {"words", rec.words},
              {"cum_logprob", rec.cum_logprob},
              {"cum_tokens", rec.cum_tokens}};
}

inline WordLogProbRecord record_from_json(const Json& j, const std::string& where) {
  const auto fail = [&](const std::string& why) {
    throw Error(ErrorKind::MalformedRecord, where + ": " + why);
  };
  if (!j.is_object()) fail("record is not an object");
  static const char* const kFields[] = {"sample_id", "model_id", "words", "cum_logprob",
                                        "cum_tokens"};
  if (j.size() != 5) fail("record must have exactly the 5 canonical fields");
  for (const char* f : kFields) {
    if (!j.contains(f)) fail(std::string("missing field '") + f + "'");
  }
  if (!j["sample_id"].is_string() || !j["model_id"].is_string()) fail("ids must be strings");
  if (!j["words"].is_array() || !j["cum_logprob"].is_array() || !j["cum_tokens"].is_array()) {
    fail("words, cum_logprob and cum_tokens must be arrays");
  }
  WordLogProbRecord rec;
  rec.sample_id = j["sample_id"].get<std::string>();
  rec.model_id = j["model_id"].get<std::string>();
  for (const auto& w : j["words"]) {
    if (!w.is_string()) fail("words must be strings");
    rec.words.push_back(w.get<std::string>());
  }
  for (const auto& v : j["cum_logprob"]) {
    if (!v.is_number()) fail("cum_logprob must be numbers");
    rec.cum_logprob.push_back(v.get<double>());
  }
  for (const auto& v : j["cum_tokens"]) {
    if (!v.is_number_integer()) fail("cum_tokens must be integers");
    rec.cum_tokens.push_back(v.get<std::int64_t>());
  }
  validate_record(rec);
  return rec;
}

inline CurveFile parse_curve_file(const std::string& text, const std::string& name) {
  CurveFile file;
  const auto lines = split_lines(text);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (lines[i].find_first_not_of(" \t") == std::string::npos) continue;
    const std::string where = name + ":" + std::to_string(i + 1);
    Json j;
    try {
      j = Json::parse(lines[i]);
    } catch (const Json::parse_error& e) {
      throw Error(ErrorKind::MalformedRecord, where + ": " + e.what());
    }
    if (file.records.empty() && file.header.is_null() && j.is_object() && j.size() == 1 &&
        j.contains("header")) {
      file.header = j["header"];
      continue;
    }
    file.records.push_back(record_from_json(j, where));
  }
  return file;
}

inline CurveFile read_curve_file(const std::filesystem::path& path) {
  return parse_curve_file(read_file(path), path.string());
}

inline std::string serialize_curve_file(const std::vector<WordLogProbRecord>& records,
                                        const Json& header = nullptr) {
  std::string out;
  if (!header.is_null()) out += Json{{"header", header}}.dump() + "\n";
  for (const auto& rec : records) out += record_to_json(rec).dump() + "\n";
  return out;
}

inline void write_curve_file(const std::filesystem::path& path,
                             const std::vector<WordLogProbRecord>& records,
                             const Json& header = nullptr) {
  write_file_atomic(path, serialize_curve_file(records, header));
}

}  // namespace pplsim

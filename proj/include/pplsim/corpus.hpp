#pragma once

#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "pplsim/error.hpp"
#include "pplsim/io.hpp"
#include "pplsim/random.hpp"

namespace pplsim {

/// A document split into whitespace-delimited words. Punctuation stays
/// attached to its word.
struct WordSequence {
  std::string sample_id;
  std::vector<std::string> words;

  std::size_t size() const noexcept { return words.size(); }
};

namespace detail {

// Same set as Python's str.isspace(), so that producers written in Python
// with str.split() segment identically.
constexpr bool is_space_codepoint(char32_t c) noexcept {
  return (c >= 0x09 && c <= 0x0d) || (c >= 0x1c && c <= 0x20) || c == 0x85 ||
         c == 0xa0 || c == 0x1680 || (c >= 0x2000 && c <= 0x200a) || c == 0x2028 ||
         c == 0x2029 || c == 0x202f || c == 0x205f || c == 0x3000;
}

// Decodes one UTF-8 code point starting at text[pos]; returns its byte
// length. Invalid bytes decode as U+FFFD with length 1.
inline std::size_t decode_utf8(std::string_view text, std::size_t pos, char32_t& out) noexcept {
  const auto b0 = static_cast<unsigned char>(text[pos]);
  if (b0 < 0x80) {
    out = b0;
    return 1;
  }
  std::size_t len = 0;
  char32_t cp = 0;
  if ((b0 & 0xe0) == 0xc0) {
    len = 2;
    cp = b0 & 0x1f;
  } else if ((b0 & 0xf0) == 0xe0) {
    len = 3;
    cp = b0 & 0x0f;
  } else if ((b0 & 0xf8) == 0xf0) {
    len = 4;
    cp = b0 & 0x07;
  } else {
    out = 0xfffd;
    return 1;
  }
  if (pos + len > text.size()) {
    out = 0xfffd;
    return 1;
  }
  for (std::size_t i = 1; i < len; ++i) {
    const auto b = static_cast<unsigned char>(text[pos + i]);
    if ((b & 0xc0) != 0x80) {
      out = 0xfffd;
      return 1;
    }
    cp = (cp << 6) | (b & 0x3f);
  }
  out = cp;
  return len;
}

}  // namespace detail

/// Splits text into maximal runs of non-whitespace characters.
inline WordSequence segment(std::string_view text, std::string sample_id = {}) {
  WordSequence seq{std::move(sample_id), {}};
  std::size_t pos = 0;
  std::size_t word_start = std::string_view::npos;
  while (pos < text.size()) {
    char32_t cp;
    const std::size_t len = detail::decode_utf8(text, pos, cp);
    if (detail::is_space_codepoint(cp)) {
      if (word_start != std::string_view::npos) {
        seq.words.emplace_back(text.substr(word_start, pos - word_start));
        word_start = std::string_view::npos;
      }
    } else if (word_start == std::string_view::npos) {
      word_start = pos;
    }
    pos += len;
  }
  if (word_start != std::string_view::npos) seq.words.emplace_back(text.substr(word_start));
  if (seq.words.empty()) throw Error(ErrorKind::EmptyText, "text contains no words");
  return seq;
}

enum class CorpusFormat { PlainLines, JsonLines };

/// Where documents come from. One document per line; for JSON Lines the
/// document text is `text_field` and the optional `id_field` names it.
struct CorpusSource {
  std::filesystem::path path;
  CorpusFormat format = CorpusFormat::PlainLines;
  std::string text_field = "text";
  std::string id_field;

  static CorpusSource from_path(std::filesystem::path p) {
    CorpusSource src;
    const auto ext = p.extension().string();
    src.format = (ext == ".jsonl" || ext == ".json") ? CorpusFormat::JsonLines
                                                     : CorpusFormat::PlainLines;
    src.path = std::move(p);
    return src;
  }

  std::string descriptor() const { return path.filename().string(); }
};

struct Document {
  std::string id;
  std::string text;
};

inline std::string line_document_id(std::size_t line_number) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "doc-%08zu", line_number);
  return buf;
}

/// Streams documents from disk without loading the file.
template <typename Fn>
void for_each_document(const CorpusSource& source, Fn&& fn) {
  std::ifstream in(source.path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open corpus " + source.path.string());
  std::string line;
  std::size_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (source.format == CorpusFormat::PlainLines) {
      fn(Document{line_document_id(line_number), std::move(line)});
      continue;
    }
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    Json rec;
    try {
      rec = Json::parse(line);
    } catch (const Json::parse_error& e) {
      throw Error(ErrorKind::MalformedRecord,
                  source.path.string() + ":" + std::to_string(line_number) + ": " + e.what());
    }
    if (!rec.is_object() || !rec.contains(source.text_field) ||
        !rec[source.text_field].is_string()) {
      throw Error(ErrorKind::MalformedRecord, source.path.string() + ":" +
                                                  std::to_string(line_number) +
                                                  ": missing string field '" +
                                                  source.text_field + "'");
    }
    std::string id = line_document_id(line_number);
    if (!source.id_field.empty() && rec.contains(source.id_field)) {
      const auto& v = rec[source.id_field];
      id = v.is_string() ? v.get<std::string>() : v.dump();
    }
    fn(Document{std::move(id), rec[source.text_field].get<std::string>()});
  }
}

/// A reproducible evaluation sample.
struct SampleSet {
  std::vector<WordSequence> sequences;
  std::string source;
  std::uint64_t seed = 0;
  std::size_t requested_size = 0;
  std::size_t min_len = 0;
  std::size_t documents_seen = 0;
  std::size_t excluded_short = 0;  // documents with fewer than min_len words

  std::size_t shortfall() const noexcept {
    return sequences.size() < requested_size ? requested_size - sequences.size() : 0;
  }

  Json to_json() const {
    Json seqs = Json::array();
    for (const auto& s : sequences) seqs.push_back({{"sample_id", s.sample_id}, {"words", s.words}});
    return Json{{"source", source},
                {"seed", seed},
                {"requested_size", requested_size},
                {"min_len", min_len},
                {"documents_seen", documents_seen},
                {"excluded_short", excluded_short},
                {"shortfall", shortfall()},
                {"sequences", std::move(seqs)}};
  }
};

/// Default minimum length: 2k+1 words, so every sampled sequence has at least
/// one index with both neighbours.
constexpr std::size_t default_min_len(std::size_t k = 1) noexcept { return 2 * k + 1; }

/// Uniform sampling without replacement (single-pass reservoir) over the
/// documents with at least min_len words. `for_each` is called with a
/// callback taking a Document.
template <typename ForEach>
SampleSet sample_documents(ForEach&& for_each, std::string source_descriptor, std::size_t size,
                           std::uint64_t seed, std::size_t min_len) {
  if (size == 0) throw Error(ErrorKind::EmptyInput, "sample size must be >= 1");
  SampleSet out;
  out.source = std::move(source_descriptor);
  out.seed = seed;
  out.requested_size = size;
  out.min_len = min_len;
  SplitMix rng(hash_combine(seed, fnv1a64("sample_corpus")));
  std::size_t eligible = 0;
  for_each([&](Document doc) {
    ++out.documents_seen;
    WordSequence seq;
    try {
      seq = segment(doc.text, std::move(doc.id));
    } catch (const Error&) {
      ++out.excluded_short;
      return;
    }
    if (seq.size() < min_len || seq.size() == 0) {
      ++out.excluded_short;
      return;
    }
    if (eligible < size) {
      out.sequences.push_back(std::move(seq));
    } else {
      const std::uint64_t j = rng.below(eligible + 1);
      if (j < size) out.sequences[j] = std::move(seq);
    }
    ++eligible;
  });
  if (eligible == 0) {
    throw Error(ErrorKind::NoEligibleDocuments,
                "no document in " + out.source + " has at least " + std::to_string(min_len) +
                    " words");
  }
  return out;
}

inline SampleSet sample_corpus(const CorpusSource& source, std::size_t size, std::uint64_t seed,
                               std::size_t min_len = default_min_len()) {
  return sample_documents([&](auto&& cb) { for_each_document(source, cb); },
                          source.descriptor(), size, seed, min_len);
}

/// In-memory variant; document i gets the id of line i+1.
inline SampleSet sample_corpus(const std::vector<std::string>& texts, std::string descriptor,
                               std::size_t size, std::uint64_t seed,
                               std::size_t min_len = default_min_len()) {
  return sample_documents(
      [&](auto&& cb) {
        for (std::size_t i = 0; i < texts.size(); ++i) cb(Document{line_document_id(i + 1), texts[i]});
      },
      std::move(descriptor), size, seed, min_len);
}

/// Every non-empty document, in file order.
inline std::vector<WordSequence> read_documents(const CorpusSource& source) {
  std::vector<WordSequence> docs;
  for_each_document(source, [&](Document doc) {
    try {
      docs.push_back(segment(doc.text, std::move(doc.id)));
    } catch (const Error&) {
    }
  });
  return docs;
}

}  // namespace pplsim

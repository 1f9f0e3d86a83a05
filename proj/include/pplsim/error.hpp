#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace pplsim {

enum class ErrorKind {
  // corpus
  EmptyText,
  NoEligibleDocuments,
  // curve_model
  MalformedRecord,
  SampleMismatch,
  // similarity
  TooShort,
  DegeneratePoints,
  IndexMismatch,
  EmptyInput,
  CoverageMismatch,
  // jsd
  EmptyVocabulary,
  SupportMismatch,
  GateFailed,
  MissingDistribution,
  // ngram
  EmptyCorpus,
  CorruptModel,
  VersionMismatch,
  // detection
  MixedDatasets,
  // scenario / io
  MissingFixtures,
  InvalidArgument,
  Io,
};

constexpr std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::EmptyText: return "EmptyText";
    case ErrorKind::NoEligibleDocuments: return "NoEligibleDocuments";
    case ErrorKind::MalformedRecord: return "MalformedRecord";
    case ErrorKind::SampleMismatch: return "SampleMismatch";
    case ErrorKind::TooShort: return "TooShort";
    case ErrorKind::DegeneratePoints: return "DegeneratePoints";
    case ErrorKind::IndexMismatch: return "IndexMismatch";
    case ErrorKind::EmptyInput: return "EmptyInput";
    case ErrorKind::CoverageMismatch: return "CoverageMismatch";
    case ErrorKind::EmptyVocabulary: return "EmptyVocabulary";
    case ErrorKind::SupportMismatch: return "SupportMismatch";
    case ErrorKind::GateFailed: return "GateFailed";
    case ErrorKind::MissingDistribution: return "MissingDistribution";
    case ErrorKind::EmptyCorpus: return "EmptyCorpus";
    case ErrorKind::CorruptModel: return "CorruptModel";
    case ErrorKind::VersionMismatch: return "VersionMismatch";
    case ErrorKind::MixedDatasets: return "MixedDatasets";
    case ErrorKind::MissingFixtures: return "MissingFixtures";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::Io: return "Io";
  }
  return "Unknown";
}

/// Every failure raised by the library. The kind is stable and is what
/// callers (and tests) should branch on; the message is for humans.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message),
        kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace pplsim

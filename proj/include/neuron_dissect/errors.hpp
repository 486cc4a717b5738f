#ifndef NEURON_DISSECT_ERRORS_HPP
#define NEURON_DISSECT_ERRORS_HPP

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace neuron_dissect {

enum class ErrorKind {
  kIo,
  kBadMagic,
  kHeaderParse,
  kTruncatedPayload,
  kTrailingData,
  kDuplicateWord,
  kEmptyLine,
  kUnknownCategory,
  kCsvParse,
  kInvalidParameter,
  kZeroRow,
  kDimMismatch,
  kShapeMismatch,
  kTopKTooLarge,
  kNumericUnderflow,
  kEmptyLayer,
  kMissingComplexity,
  kLayerCountMismatch,
};

constexpr std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kIo: return "Io";
    case ErrorKind::kBadMagic: return "BadMagic";
    case ErrorKind::kHeaderParse: return "HeaderParse";
    case ErrorKind::kTruncatedPayload: return "TruncatedPayload";
    case ErrorKind::kTrailingData: return "TrailingData";
    case ErrorKind::kDuplicateWord: return "DuplicateWord";
    case ErrorKind::kEmptyLine: return "EmptyLine";
    case ErrorKind::kUnknownCategory: return "UnknownCategory";
    case ErrorKind::kCsvParse: return "CsvParse";
    case ErrorKind::kInvalidParameter: return "InvalidParameter";
    case ErrorKind::kZeroRow: return "ZeroRow";
    case ErrorKind::kDimMismatch: return "DimMismatch";
    case ErrorKind::kShapeMismatch: return "ShapeMismatch";
    case ErrorKind::kTopKTooLarge: return "TopKTooLarge";
    case ErrorKind::kNumericUnderflow: return "NumericUnderflow";
    case ErrorKind::kEmptyLayer: return "EmptyLayer";
    case ErrorKind::kMissingComplexity: return "MissingComplexity";
    case ErrorKind::kLayerCountMismatch: return "LayerCountMismatch";
  }
  return "Unknown";
}

/// Process exit code for an error kind: 2 input, 3 shape/compat, 4 numeric.
constexpr int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kDimMismatch:
    case ErrorKind::kShapeMismatch:
    case ErrorKind::kTopKTooLarge:
    case ErrorKind::kEmptyLayer:
    case ErrorKind::kLayerCountMismatch:
      return 3;
    case ErrorKind::kZeroRow:
    case ErrorKind::kNumericUnderflow:
      return 4;
    default:
      return 2;
  }
}

/// Every failure in the library surfaces as this exception. `path`,
/// `offset`, `line` and `index` are filled in when they are meaningful.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

  std::optional<std::string> path;
  std::optional<std::size_t> offset;
  std::optional<std::size_t> line;
  std::optional<std::size_t> index;

  Error&& with_path(std::string p) && {
    path = std::move(p);
    return std::move(*this);
  }
  Error&& with_offset(std::size_t o) && {
    offset = o;
    return std::move(*this);
  }
  Error&& with_line(std::size_t l) && {
    line = l;
    return std::move(*this);
  }
  Error&& with_index(std::size_t i) && {
    index = i;
    return std::move(*this);
  }

 private:
  ErrorKind kind_;
};

}  // namespace neuron_dissect

#endif  // NEURON_DISSECT_ERRORS_HPP

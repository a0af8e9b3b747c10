#pragma once

#include <stdexcept>
#include <string>

namespace fyseq {

// Bisection failed to bring the normalization residual under tolerance.
struct IterationLimitExceeded : std::runtime_error {
  explicit IterationLimitExceeded(const std::string& what) : std::runtime_error(what) {}
};

// epsilon = 1 makes lambda = eps/(1-eps) diverge.
struct DegenerateEpsilon : std::invalid_argument {
  explicit DegenerateEpsilon(const std::string& what) : std::invalid_argument(what) {}
};

// Base for problems with user-supplied data files or datasets.
struct DataError : std::runtime_error {
  explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

struct UnknownToken : DataError {
  explicit UnknownToken(const std::string& what) : DataError(what) {}
};

struct EmptyDataset : DataError {
  explicit EmptyDataset(const std::string& what) : DataError(what) {}
};

struct MalformedLine : DataError {
  MalformedLine(const std::string& path, std::size_t line_number, const std::string& what)
      : DataError(path + ":" + std::to_string(line_number) + ": " + what),
        line(line_number) {}
  std::size_t line;
};

struct EmptyFile : DataError {
  explicit EmptyFile(const std::string& what) : DataError(what) {}
};

struct VocabularyMismatch : DataError {
  explicit VocabularyMismatch(const std::string& what) : DataError(what) {}
};

struct LengthMismatch : std::invalid_argument {
  explicit LengthMismatch(const std::string& what) : std::invalid_argument(what) {}
};

struct EmptyReferences : std::invalid_argument {
  explicit EmptyReferences(const std::string& what) : std::invalid_argument(what) {}
};

}  // namespace fyseq

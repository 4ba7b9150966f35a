#pragma once

#include <stdexcept>
#include <string>

namespace termkit {

// Base class for all toolkit errors.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// --- corpus / file formats ---

class MalformedLink : public Error {
 public:
  explicit MalformedLink(const std::string& token)
      : Error("malformed alignment link token: '" + token + "'") {}
};

class ParseError : public Error {
 public:
  ParseError(const std::string& path, std::size_t line_no, const std::string& detail)
      : Error(path + ":" + std::to_string(line_no) + ": " + detail),
        line_no_(line_no) {}
  std::size_t line() const { return line_no_; }

 private:
  std::size_t line_no_;
};

class DuplicateId : public Error {
 public:
  explicit DuplicateId(const std::string& id) : Error("duplicate sentence id: '" + id + "'") {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error(what) {}
};

// --- aligner ---

class EmptyCorpus : public Error {
 public:
  EmptyCorpus() : Error("alignment training requires a non-empty corpus") {}
};

class EmptySentence : public Error {
 public:
  explicit EmptySentence(const std::string& id)
      : Error("sentence '" + id + "' has an empty side; not admissible for alignment training") {}
};

// --- terminology annotation ---

class IndexOutOfRange : public Error {
 public:
  IndexOutOfRange(std::size_t index, std::size_t size)
      : Error("constraint source index " + std::to_string(index) +
              " out of range for sentence of length " + std::to_string(size)) {}
};

class DuplicateIndex : public Error {
 public:
  explicit DuplicateIndex(std::size_t index)
      : Error("two constraints share source index " + std::to_string(index)) {}
};

class SourceMismatch : public Error {
 public:
  SourceMismatch(const std::string& expected, const std::string& actual)
      : Error("constraint source term '" + expected + "' does not match token '" + actual + "'") {}
};

class LengthMismatch : public Error {
 public:
  LengthMismatch(std::size_t a, std::size_t b)
      : Error("sequence lengths differ: " + std::to_string(a) + " vs " + std::to_string(b)) {}
};

class UnbalancedMarkers : public Error {
 public:
  explicit UnbalancedMarkers(const std::string& detail)
      : Error("unbalanced annotation markers: " + detail) {}
};

class NestedMarkers : public Error {
 public:
  NestedMarkers() : Error("nested annotation markers") {}
};

class MalformedAnnotation : public Error {
 public:
  explicit MalformedAnnotation(const std::string& detail)
      : Error("malformed annotation: " + detail) {}
};

// --- decoding ---

class NoFinishedHypothesis : public Error {
 public:
  NoFinishedHypothesis() : Error("beam search produced no finished hypothesis") {}
};

// --- LLM backend ---

class MissingField : public Error {
 public:
  explicit MissingField(const std::string& field)
      : Error("prompt request is missing required field: " + field) {}
};

class AuthError : public Error {
 public:
  explicit AuthError(const std::string& detail) : Error("authentication failed: " + detail) {}
};

class RateLimited : public Error {
 public:
  RateLimited() : Error("rate limited and retry budget exhausted") {}
};

class TimeoutError : public Error {
 public:
  TimeoutError() : Error("backend request timed out") {}
};

class MalformedResponse : public Error {
 public:
  explicit MalformedResponse(const std::string& detail)
      : Error("malformed backend response: " + detail) {}
};

// --- evaluation ---

class MissingHypothesis : public Error {
 public:
  explicit MissingHypothesis(const std::string& id)
      : Error("no hypothesis for sentence id '" + id + "'") {}
};

// --- pipeline ---

class StageFailure : public Error {
 public:
  StageFailure(const std::string& stage, const std::string& cause)
      : Error("stage '" + stage + "' failed: " + cause), stage_(stage) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

}  // namespace termkit

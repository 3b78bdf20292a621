#ifndef C2EDEN_ERROR_HPP
#define C2EDEN_ERROR_HPP

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace c2eden {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionMismatch : public Error {
 public:
  DimensionMismatch(const std::string& what, std::ptrdiff_t expected,
                    std::ptrdiff_t got)
      : Error(what + ": expected dimension " + std::to_string(expected) +
              ", got " + std::to_string(got)) {}
};

class NonFiniteInput : public Error {
 public:
  using Error::Error;
};

class NumericalFailure : public Error {
 public:
  using Error::Error;
};

class NotPositiveDefinite : public Error {
 public:
  explicit NotPositiveDefinite(double lambda_min, const std::string& context = {})
      : Error((context.empty() ? std::string() : context + ": ") +
              "matrix is not positive definite (lambda_min = " +
              std::to_string(lambda_min) + ")"),
        lambda_min_(lambda_min) {}
  double lambda_min() const noexcept { return lambda_min_; }

 private:
  double lambda_min_;
};

class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& msg)
      : Error("line " + std::to_string(line) + ": " + msg), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class FrameError : public Error {
 public:
  using Error::Error;
};

/// Raised by the server loop and transports. Carries the round and (when
/// known) the client that caused the failure.
class ProtocolError : public Error {
 public:
  static constexpr std::uint32_t kNoClient = 0xFFFFFFFFu;

  ProtocolError(const std::string& msg, std::uint32_t round,
                std::uint32_t client = kNoClient)
      : Error(format(msg, round, client)), round_(round), client_(client) {}

  std::uint32_t round() const noexcept { return round_; }
  std::uint32_t client() const noexcept { return client_; }

 private:
  static std::string format(const std::string& msg, std::uint32_t round,
                            std::uint32_t client) {
    std::string out = "round " + std::to_string(round);
    if (client != kNoClient) out += ", client " + std::to_string(client);
    return out + ": " + msg;
  }

  std::uint32_t round_;
  std::uint32_t client_;
};

}  // namespace c2eden

#endif  // C2EDEN_ERROR_HPP

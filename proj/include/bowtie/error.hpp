#ifndef BOWTIE_ERROR_HPP
#define BOWTIE_ERROR_HPP

#include <stdexcept>
#include <string>

namespace bowtie {

// Error categories map 1:1 onto C API status codes and CLI exit codes.
class Error : public std::runtime_error {
public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed input files: bad CSV cells, unknown layer names, wrong header.
class ParseError : public Error {
public:
  explicit ParseError(const std::string& msg) : Error(msg) {}
};

// Violated preconditions: self-loops, nonpositive weights, schema mismatch.
class ValidationError : public Error {
public:
  explicit ValidationError(const std::string& msg) : Error(msg) {}
};

// Numerical failures: rank-deficient designs, IRLS divergence.
class NumericError : public Error {
public:
  explicit NumericError(const std::string& msg) : Error(msg) {}
};

} // namespace bowtie

#endif

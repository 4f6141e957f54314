#ifndef MMNL_ERRORS_HPP
#define MMNL_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace mmnl {

// Linear-algebra or optimizer failure; message carries diagnostics such as
// condition estimates or the best iterate reached.
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

// Raised when a fit trips the divergence sentinels; advises switching to a
// more robust backend.
class DivergenceError : public std::runtime_error {
 public:
  explicit DivergenceError(const std::string& what) : std::runtime_error(what) {}
};

// Malformed input files; message carries the offending line where known.
class DataFormatError : public std::runtime_error {
 public:
  explicit DataFormatError(const std::string& what) : std::runtime_error(what) {}
};

// Filesystem-level failure (cannot open, short write).
class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace mmnl

#endif  // MMNL_ERRORS_HPP

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace evbs {

enum class Errc {
  invalid_argument = 1,
  io,
  parse,
  domain,
  infeasible,
  not_converged,
  numeric,
  unsupported,
  not_at_maximum,
};

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what) : std::runtime_error(what), code_(code) {}
  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

// Some observation violates 1 + gamma * xi2 > 0.
class FeasibilityError : public Error {
 public:
  FeasibilityError(std::size_t index, const std::string& what)
      : Error(Errc::infeasible, what), index_(index) {}
  std::size_t index() const noexcept { return index_; }

 private:
  std::size_t index_;
};

// Cholesky breakdown; the pivot index identifies the failing column.
class PivotError : public Error {
 public:
  PivotError(std::size_t pivot, const std::string& what)
      : Error(Errc::not_at_maximum, what), pivot_(pivot) {}
  std::size_t pivot() const noexcept { return pivot_; }

 private:
  std::size_t pivot_;
};

}  // namespace evbs

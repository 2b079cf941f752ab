#pragma once

#include <complex>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>

#include <Eigen/Dense>

namespace tomosar {

using Complex = std::complex<double>;
using CVector = Eigen::VectorXcd;
using CMatrix = Eigen::MatrixXcd;
using RVector = Eigen::VectorXd;

/// Reflectivity profile over the elevation grid (length L).
using Profile = CVector;
/// Multi-channel measurement of one pixel (length N).
using Measurement = CVector;

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid configuration, precondition violation or mismatched inputs.
/// The CLI maps these to exit code 2.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Numerical failure at run time (divergence, non-finite values, rank loss).
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// FNV-1a, used to bind artifacts (matrices, grids, datasets, models) to
/// the inputs that produced them.
class Hasher {
 public:
  Hasher& bytes(const void* data, std::size_t size) {
    auto p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < size; ++i) {
      state_ ^= p[i];
      state_ *= 0x100000001b3ULL;
    }
    return *this;
  }
  Hasher& u64(std::uint64_t v) { return bytes(&v, sizeof v); }
  Hasher& f64(double v) {
    if (v == 0.0) v = 0.0;  // fold -0.0
    return bytes(&v, sizeof v);
  }
  Hasher& str(std::string_view s) {
    u64(s.size());
    return bytes(s.data(), s.size());
  }
  std::uint64_t value() const { return state_; }

 private:
  std::uint64_t state_ = 0xcbf29ce484222325ULL;
};

std::string hash_hex(std::uint64_t h);
std::uint64_t parse_hash_hex(std::string_view s);

inline bool all_finite(const CVector& v) { return v.allFinite(); }

}  // namespace tomosar

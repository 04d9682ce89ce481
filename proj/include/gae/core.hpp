#pragma once

// Shared numeric types, error classes and deterministic seeding.

#include <Eigen/Dense>

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>

namespace gae {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// Base class for every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad arguments, inconsistent dimensions, invalid configuration or input files.
class InvalidInput : public Error {
 public:
  using Error::Error;
};

/// Non-finite values, solver divergence, or a failed convergence check.
class NumericalError : public Error {
 public:
  using Error::Error;
};

inline void require(bool cond, const std::string& what) {
  if (!cond) throw InvalidInput(what);
}

// splitmix64 finalizer; used to decorrelate derived seeds.
constexpr std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Derive an independent seed for a named random substream.
///
/// All randomness in a run flows from one master seed; each consumer
/// (dataset, init, kmeans, protocol, ...) asks for its own substream so that
/// changing how many draws one component makes never shifts another's.
constexpr std::uint64_t substream(std::uint64_t master, std::string_view name,
                                  std::uint64_t index = 0) {
  std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
  for (char c : name) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return mix_seed(mix_seed(master ^ h) + index);
}

using Rng = std::mt19937_64;

}  // namespace gae

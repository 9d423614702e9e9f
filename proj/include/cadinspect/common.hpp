#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace cadinspect {

using Vec3 = Eigen::Vector3d;

// Base for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed or truncated input files (STL, PLY, JSON sidecars, checkpoints).
class ParseError : public Error {
 public:
  using Error::Error;
};

// Invalid geometry: degenerate faces, bad indices, isolated vertices.
class GeometryError : public Error {
 public:
  using Error::Error;
};

// Linear-algebra failures: singular systems, lost positive definiteness.
class NumericError : public Error {
 public:
  using Error::Error;
};

// Artifacts produced under different configurations or meshes.
class ConsistencyError : public Error {
 public:
  using Error::Error;
};

// 64-bit FNV-1a, used for mesh fingerprints and config hashes.
class Fnv1a {
 public:
  void add_bytes(const void* data, std::size_t size) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < size; ++i) {
      hash_ ^= p[i];
      hash_ *= 0x100000001b3ULL;
    }
  }
  void add(double v) { add_bytes(&v, sizeof v); }
  void add(std::uint64_t v) { add_bytes(&v, sizeof v); }
  void add(const std::string& s) { add_bytes(s.data(), s.size()); }
  std::uint64_t value() const { return hash_; }

 private:
  std::uint64_t hash_ = 0xcbf29ce484222325ULL;
};

std::string to_hex(std::uint64_t v);

}  // namespace cadinspect

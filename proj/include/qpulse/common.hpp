// Copyright 2026 The qpulse Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <charconv>
#include <complex>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>

#include <Eigen/Dense>

/// Forces exactly one machine-code instance of a function inside a binary.
/// With -O3 the compiler may otherwise inline separate copies at different
/// call sites and schedule their floating point contractions differently,
/// which breaks bit-level agreement between code paths that must match (for
/// example the serial and threaded evaluation loops).
#if defined(__clang__)
#define QPULSE_SINGLE_INSTANCE [[gnu::noinline]]
#elif defined(__GNUC__)
#define QPULSE_SINGLE_INSTANCE __attribute__((noinline, noclone))
#else
#define QPULSE_SINGLE_INSTANCE
#endif

namespace qpulse {

using Complex = std::complex<double>;
using Mat2 = Eigen::Matrix2cd;
using Vec2 = Eigen::Vector2cd;

inline constexpr double kPi = 3.141592653589793238462643383279502884;
inline constexpr Complex kI{0.0, 1.0};

inline const Mat2 kIdentity2 = Mat2::Identity();
inline const Mat2 kSigmaX = (Mat2() << 0, 1, 1, 0).finished();
inline const Mat2 kSigmaY = (Mat2() << 0, Complex(0, -1), Complex(0, 1), 0).finished();
inline const Mat2 kSigmaZ = (Mat2() << 1, 0, 0, -1).finished();

inline Mat2 commutator(const Mat2& a, const Mat2& b) { return a * b - b * a; }

/// Density matrix of the pure qubit state at Bloch angles (theta, phi_az):
/// |psi> = cos(theta/2)|0> + e^{i phi_az} sin(theta/2)|1>.
inline Mat2 bloch_density(double theta, double phi_az) {
  const double c = std::cos(theta / 2.0);
  const double s = std::sin(theta / 2.0);
  const Complex a(c, 0.0);
  const Complex b = std::polar(s, phi_az);
  Mat2 rho;
  rho << a * std::conj(a), a * std::conj(b), b * std::conj(a), b * std::conj(b);
  return rho;
}

/// Shortest decimal string that round-trips to the same double. Used for every
/// numeric field written to CSV so that re-reading a file reproduces the run
/// bit for bit.
inline std::string format_double(double value) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, res.ptr);
}

/// FNV-1a 64-bit hash; stable across platforms, used to fingerprint
/// configuration blobs inside result files.
inline std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 1469598103934665603ULL;
  for (const char c : bytes) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = digits[v & 0xF];
    v >>= 4;
  }
  return out;
}

inline std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open for reading: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_text_file(const std::filesystem::path& path, std::string_view content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
  out << content;
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

}  // namespace qpulse

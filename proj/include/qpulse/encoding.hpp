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

#include <array>
#include <vector>

#include "qpulse/common.hpp"
#include "qpulse/dynamics.hpp"

namespace qpulse::encoding {

using Povm = std::array<double, 4>;

/// Name of the measurement convention, stamped into checkpoints so a model is
/// never evaluated against features built with a different basis.
inline constexpr const char* kPovmConvention = "pauli4-sigmaY-plus";

/// The Pauli-4 POVM: scaled projectors onto |0>, the +1 eigenstate of sigma_y,
/// and |+>, with a fourth element completing the identity. Informationally
/// complete, so encoding loses nothing about the state.
inline const std::array<Mat2, 4>& povm_operators() {
  static const std::array<Mat2, 4> ops = [] {
    std::array<Mat2, 4> m;
    m[0] = bloch_density(0.0, 0.0) / 3.0;                // |0><0| / 3
    m[1] = bloch_density(kPi / 2.0, kPi / 2.0) / 3.0;    // |l><l| / 3, |l> = (|0> + i|1>)/sqrt(2)
    m[2] = bloch_density(kPi / 2.0, 0.0) / 3.0;          // |+><+| / 3
    m[3] = Mat2::Identity() - m[0] - m[1] - m[2];
    return m;
  }();
  return ops;
}

/// Measurement statistics p_a = Tr(rho M_a). Imaginary residue from the trace
/// is discarded; it is below 1e-12 for Hermitian inputs.
inline Povm encode_density(const Mat2& rho) {
  const auto& m = povm_operators();
  Povm p;
  for (std::size_t a = 0; a < 4; ++a) p[a] = (rho * m[a]).trace().real();
  return p;
}

/// Inverse of encode_density via the POVM overlap matrix T_ab = Tr(M_a M_b):
/// solve T c = p, then rho = sum_a c_a M_a. Exact for any distribution that
/// came from a density matrix; a reconstructed trace off by more than 1e-6
/// means the input was not such a distribution and is rejected.
inline Mat2 decode_distribution(const Povm& p) {
  static const Eigen::Matrix4d overlap_inverse = [] {
    const auto& m = povm_operators();
    Eigen::Matrix4d t;
    for (int a = 0; a < 4; ++a)
      for (int b = 0; b < 4; ++b)
        t(a, b) = (m[static_cast<std::size_t>(a)] * m[static_cast<std::size_t>(b)])
                      .trace()
                      .real();
    return t.inverse().eval();
  }();
  Eigen::Vector4d pv;
  for (int a = 0; a < 4; ++a) pv(a) = p[static_cast<std::size_t>(a)];
  const Eigen::Vector4d c = overlap_inverse * pv;
  const auto& m = povm_operators();
  Mat2 rho = Mat2::Zero();
  for (int a = 0; a < 4; ++a) rho += c(a) * m[static_cast<std::size_t>(a)];
  if (std::abs(rho.trace().real() - 1.0) > 1e-6)
    throw std::domain_error("decode_distribution: input does not reconstruct to a state");
  return rho;
}

inline int feature_width(int case_id) {
  switch (case_id) {
    case 1:
    case 2:
      return 8;
    case 3:
      return 11;
    default:
      throw std::invalid_argument("case must be 1, 2 or 3");
  }
}

/// Model input: the two POVM distributions back to back, and for Case 3 the
/// raw environment parameters appended. No rescaling is applied; the values
/// go in as-is.
inline std::vector<double> build_features(const Povm& p_ini, const Povm& p_tar,
                                          const dynamics::BathParams& bath, int case_id) {
  std::vector<double> f;
  f.reserve(static_cast<std::size_t>(feature_width(case_id)));
  f.insert(f.end(), p_ini.begin(), p_ini.end());
  f.insert(f.end(), p_tar.begin(), p_tar.end());
  if (case_id == 3) {
    f.push_back(bath.coupling);
    f.push_back(bath.memory_rate);
    f.push_back(bath.temperature);
  }
  return f;
}

}  // namespace qpulse::encoding

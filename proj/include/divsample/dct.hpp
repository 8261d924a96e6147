#pragma once

#include <cstddef>

#include "divsample/matrix.hpp"

namespace divsample {

struct DctConfig {
  std::size_t seq_len = 0;  // H + T
  std::size_t n_dct = 10;

  void validate() const;
};

/// Appends `extra` copies of the last observed frame.
PoseSequence pad_last_frame(const PoseSequence& x, long extra);

/// Orthonormal DCT-II analysis rows: basis(k, n) = s_k cos(pi (n + 1/2) k / L)
/// with s_0 = sqrt(1/L), s_k = sqrt(2/L). Only the first `n_rows` rows are
/// built. Because the full basis is orthogonal the same rows also synthesize.
Matrix dct_basis(std::size_t n_rows, std::size_t length);

/// seq [D, L] -> first n_dct DCT-II coefficients per row, [D, n_dct].
Matrix dct_truncate(const Matrix& seq, const DctConfig& cfg);

/// coeffs [D, n] zero-padded to L coefficients then inverted, [D, L].
Matrix idct_expand(const Matrix& coeffs, std::size_t length);

}  // namespace divsample

#include "divsample/dct.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace divsample {

Matrix::Matrix(std::size_t r, std::size_t c, std::vector<double> values)
    : rows(r), cols(c), data(std::move(values)) {
  if (data.size() != r * c) {
    throw std::invalid_argument("Matrix: " + std::to_string(r) + "x" + std::to_string(c) + " needs " +
                                std::to_string(r * c) + " values, got " + std::to_string(data.size()));
  }
}

void DctConfig::validate() const {
  if (seq_len == 0 || n_dct == 0 || n_dct > seq_len) {
    throw std::invalid_argument("DctConfig: need 1 <= n_dct (" + std::to_string(n_dct) + ") <= seq_len (" +
                                std::to_string(seq_len) + ")");
  }
}

PoseSequence pad_last_frame(const PoseSequence& x, long extra) {
  if (extra < 0) throw std::invalid_argument("pad_last_frame: negative padding " + std::to_string(extra));
  if (x.cols == 0) throw std::invalid_argument("pad_last_frame: empty sequence");
  const auto total = x.cols + static_cast<std::size_t>(extra);
  PoseSequence out(x.rows, total);
  for (std::size_t r = 0; r < x.rows; ++r) {
    for (std::size_t t = 0; t < total; ++t) out(r, t) = x(r, t < x.cols ? t : x.cols - 1);
  }
  return out;
}

Matrix dct_basis(std::size_t n_rows, std::size_t length) {
  DctConfig{length, n_rows}.validate();
  Matrix basis(n_rows, length);
  const double len = static_cast<double>(length);
  for (std::size_t k = 0; k < n_rows; ++k) {
    const double s = k == 0 ? std::sqrt(1.0 / len) : std::sqrt(2.0 / len);
    for (std::size_t n = 0; n < length; ++n) {
      basis(k, n) = s * std::cos(std::numbers::pi * (static_cast<double>(n) + 0.5) * static_cast<double>(k) / len);
    }
  }
  return basis;
}

Matrix dct_truncate(const Matrix& seq, const DctConfig& cfg) {
  cfg.validate();
  if (seq.cols != cfg.seq_len) {
    throw std::invalid_argument("dct_truncate: sequence length " + std::to_string(seq.cols) +
                                " does not match configured " + std::to_string(cfg.seq_len));
  }
  const Matrix basis = dct_basis(cfg.n_dct, cfg.seq_len);
  Matrix out(seq.rows, cfg.n_dct);
  for (std::size_t r = 0; r < seq.rows; ++r) {
    for (std::size_t k = 0; k < cfg.n_dct; ++k) {
      double acc = 0.0;
      for (std::size_t n = 0; n < cfg.seq_len; ++n) acc += seq(r, n) * basis(k, n);
      out(r, k) = acc;
    }
  }
  return out;
}

Matrix idct_expand(const Matrix& coeffs, std::size_t length) {
  if (coeffs.cols > length) {
    throw std::invalid_argument("idct_expand: " + std::to_string(coeffs.cols) +
                                " coefficients exceed target length " + std::to_string(length));
  }
  const Matrix basis = dct_basis(coeffs.cols, length);
  Matrix out(coeffs.rows, length);
  for (std::size_t r = 0; r < coeffs.rows; ++r) {
    for (std::size_t n = 0; n < length; ++n) {
      double acc = 0.0;
      for (std::size_t k = 0; k < coeffs.cols; ++k) acc += coeffs(r, k) * basis(k, n);
      out(r, n) = acc;
    }
  }
  return out;
}

}  // namespace divsample

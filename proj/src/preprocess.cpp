#include <algorithm>
#include <cmath>
#include <numeric>

#include "llmap/error.hpp"
#include "llmap/kernels.hpp"
#include "llmap/matrix_core.hpp"
#include "llmap/rng.hpp"

namespace llmap {

double quantile_linear(std::vector<double> values, double p) {
  if (values.empty()) throw ConfigError("quantile of an empty set");
  if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("quantile level must be in [0, 1]");
  const double h = static_cast<double>(values.size() - 1) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(lo), values.end());
  const double x_lo = values[lo];
  if (lo + 1 >= values.size()) return x_lo;
  const double x_hi = *std::min_element(values.begin() + static_cast<std::ptrdiff_t>(lo) + 1, values.end());
  return x_lo + (h - static_cast<double>(lo)) * (x_hi - x_lo);
}

std::pair<LogLikMatrix, ClipReport> clip_lower(const LogLikMatrix& matrix, double fraction,
                                               ClipScope scope) {
  if (!(fraction >= 0.0 && fraction < 1.0)) throw ConfigError("clip fraction must be in [0, 1)");
  LogLikMatrix out = matrix;
  ClipReport report;
  report.fraction_requested = fraction;
  report.scope = scope;

  auto clip_range = [&](double* first, std::size_t count, double threshold) {
    std::size_t clipped = 0;
    for (std::size_t k = 0; k < count; ++k) {
      if (first[k] < threshold) {
        first[k] = threshold;
        ++clipped;
      }
    }
    return clipped;
  };

  if (scope == ClipScope::global) {
    std::vector<double> all(out.values.data(), out.values.data() + out.values.size());
    report.threshold = quantile_linear(std::move(all), fraction);
    report.entries_clipped =
        clip_range(out.values.data(), static_cast<std::size_t>(out.values.size()), report.threshold);
  } else {
    const auto n = static_cast<std::size_t>(out.values.cols());
    for (Eigen::Index i = 0; i < out.values.rows(); ++i) {
      double* row = out.values.row(i).data();
      const double t = quantile_linear(std::vector<double>(row, row + n), fraction);
      report.row_thresholds.push_back(t);
      report.entries_clipped += clip_range(row, n, t);
    }
    report.threshold = *std::min_element(report.row_thresholds.begin(), report.row_thresholds.end());
  }
  return {std::move(out), report};
}

ModelCoordinates double_center(const Matrix& values, std::vector<std::string> model_ids,
                               std::vector<std::string> text_ids) {
  if (values.rows() < 1 || values.cols() < 1) throw DataError("double centering needs K >= 1 and N >= 1");
  if (!values.allFinite()) throw DataError("double centering needs finite input");
  auto c = kernels::parallel::double_center(values);
  ModelCoordinates coords;
  coords.model_ids = std::move(model_ids);
  coords.text_ids = std::move(text_ids);
  coords.mean_loglik = std::move(c.row_mean);
  coords.xi = std::move(c.xi);
  coords.column_mean_xi = std::move(c.col_mean);
  coords.q = std::move(c.q);
  return coords;
}

ModelCoordinates double_center(const LogLikMatrix& matrix) {
  return double_center(matrix.values, matrix.model_ids(), matrix.text_ids());
}

bool is_valid_utf8(std::string_view bytes) {
  std::size_t i = 0;
  const std::size_t n = bytes.size();
  while (i < n) {
    const auto c = static_cast<unsigned char>(bytes[i]);
    std::size_t len = 0;
    std::uint32_t cp = 0;
    if (c < 0x80) {
      ++i;
      continue;
    } else if ((c & 0xE0) == 0xC0) {
      len = 2;
      cp = c & 0x1F;
    } else if ((c & 0xF0) == 0xE0) {
      len = 3;
      cp = c & 0x0F;
    } else if ((c & 0xF8) == 0xF0) {
      len = 4;
      cp = c & 0x07;
    } else {
      return false;
    }
    if (i + len > n) return false;
    for (std::size_t k = 1; k < len; ++k) {
      const auto cc = static_cast<unsigned char>(bytes[i + k]);
      if ((cc & 0xC0) != 0x80) return false;
      cp = (cp << 6) | (cc & 0x3F);
    }
    // Overlong forms, surrogates and values past U+10FFFF are invalid.
    if ((len == 2 && cp < 0x80) || (len == 3 && cp < 0x800) || (len == 4 && cp < 0x10000) ||
        cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) {
      return false;
    }
    i += len;
  }
  return true;
}

std::vector<Chunk> chunk_corpus(std::span<const SourceText> texts, std::size_t chunk_bytes,
                                std::size_t min_bytes) {
  if (min_bytes == 0 || chunk_bytes <= min_bytes) {
    throw ConfigError("chunking needs chunk_bytes > min_bytes > 0");
  }
  if (chunk_bytes < 4) throw ConfigError("chunk_bytes must hold at least one 4-byte code point");
  std::vector<Chunk> out;
  for (const auto& src : texts) {
    if (!is_valid_utf8(src.text)) throw DataError("text '" + src.id + "' is not valid UTF-8");
    const std::string_view body = src.text;
    std::size_t start = 0;
    std::size_t index = 0;
    while (start < body.size()) {
      std::size_t len = std::min(chunk_bytes, body.size() - start);
      while (len > 0 && !is_valid_utf8(body.substr(start, len))) --len;
      if (len == 0) throw DataError("text '" + src.id + "' cannot be chunked at a code point boundary");
      if (len >= min_bytes) {
        Chunk c;
        c.record.text_id = src.id + "#" + std::to_string(index);
        c.record.category = src.category;
        c.record.byte_length = static_cast<std::int64_t>(len);
        c.payload = std::string(body.substr(start, len));
        out.push_back(std::move(c));
      }
      ++index;
      start += len;
    }
  }
  return out;
}

std::vector<std::size_t> sample_indices(std::size_t count, std::size_t n, std::uint64_t seed) {
  if (n > count) {
    throw ConfigError("cannot sample " + std::to_string(n) + " of " + std::to_string(count) + " records");
  }
  std::vector<std::size_t> idx(count);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  SplitMix64 rng(seed);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.below(count - i));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(n);
  std::sort(idx.begin(), idx.end());
  return idx;
}

std::vector<TextRecord> sample_texts(std::span<const TextRecord> records, std::size_t n,
                                     std::uint64_t seed) {
  std::vector<TextRecord> out;
  out.reserve(n);
  for (std::size_t i : sample_indices(records.size(), n, seed)) out.push_back(records[i]);
  return out;
}

}  // namespace llmap

#pragma once

// Ingestion, validation, clipping, chunking and the L -> xi -> q centering
// pipeline that the rest of the toolkit consumes.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "llmap/types.hpp"

namespace llmap {

// --- Interchange formats -----------------------------------------------------
//
// Matrix TSV: header "model_id\t<text_id>...", then one row per model:
// "<model_id>\t<value>...". Values are decimal nats. IDs may not contain tabs
// or newlines. The canonical form written by save_matrix uses the shortest
// representation that round-trips each double and '\n' line endings.
//
// Metadata JSON: {"models": [{id, type, params, created, tags, scores}],
//                 "texts":  [{id, category, byte_length}]}; unknown fields ignored.

struct Metadata {
  std::vector<ModelRecord> models;
  std::vector<TextRecord> texts;
};

Metadata parse_metadata(std::string_view json_text);
Metadata read_metadata(const std::filesystem::path& path);
std::string format_metadata(const Metadata& meta);

/// Parses the TSV body and joins it with `meta`. Row and column order follow
/// the TSV. Every matrix ID must be present in the metadata; extra metadata
/// entries are ignored.
LogLikMatrix parse_matrix(std::string_view tsv_text, const Metadata& meta);
LogLikMatrix load_matrix(const std::filesystem::path& matrix_path,
                         const std::filesystem::path& metadata_path);

std::string format_matrix(const LogLikMatrix& matrix);
/// Same layout for any labelled numeric table (used for q, divergences, ...).
std::string format_table(std::span<const std::string> row_ids, std::span<const std::string> col_ids,
                         const Matrix& values, std::string_view corner = "model_id");
Metadata metadata_of(const LogLikMatrix& matrix);

/// Shortest round-trip decimal form of a finite double.
std::string format_double(double v);

// --- Clipping ----------------------------------------------------------------

/// Linear-interpolation ("type 7") quantile: h = (n - 1) p, interpolating
/// between the floor(h)-th and next order statistic.
double quantile_linear(std::vector<double> values, double p);

/// Raises every entry below the lower `fraction`-quantile to that quantile.
/// Global scope pools all K*N entries; per_row computes one threshold per model.
std::pair<LogLikMatrix, ClipReport> clip_lower(const LogLikMatrix& matrix, double fraction,
                                               ClipScope scope = ClipScope::global);

// --- Centering ---------------------------------------------------------------

ModelCoordinates double_center(const LogLikMatrix& matrix);
ModelCoordinates double_center(const Matrix& values, std::vector<std::string> model_ids = {},
                               std::vector<std::string> text_ids = {});

// --- Corpus preparation ------------------------------------------------------

struct SourceText {
  std::string id;
  std::string category;
  std::string text;
};

struct Chunk {
  TextRecord record;
  std::string payload;
};

bool is_valid_utf8(std::string_view bytes);

/// Splits each text into consecutive chunks of at most `chunk_bytes` bytes.
/// A chunk whose end would split a code point loses one byte at a time until
/// it decodes; the removed bytes start the next chunk. Chunks shorter than
/// `min_bytes` are dropped. Chunk IDs are "<source id>#<chunk index>".
std::vector<Chunk> chunk_corpus(std::span<const SourceText> texts, std::size_t chunk_bytes,
                                std::size_t min_bytes);

/// Uniform sample of n distinct indices from [0, count): partial forward
/// Fisher-Yates with SplitMix64(seed) (position i swaps with i + below(count - i)),
/// first n positions kept, returned in ascending order.
std::vector<std::size_t> sample_indices(std::size_t count, std::size_t n, std::uint64_t seed);

std::vector<TextRecord> sample_texts(std::span<const TextRecord> records, std::size_t n,
                                     std::uint64_t seed);

}  // namespace llmap

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "json.hpp"
#include "llmap/error.hpp"
#include "llmap/matrix_core.hpp"

namespace llmap {

using nlohmann::json;

namespace {

bool has_forbidden_char(std::string_view id) {
  return id.find_first_of("\t\n\r") != std::string_view::npos;
}

void check_id(std::string_view id, std::string_view what) {
  if (id.empty()) throw DataError(std::string(what) + " has an empty ID");
  if (has_forbidden_char(id)) {
    throw DataError(std::string(what) + " ID contains a tab or newline: " + std::string(id));
  }
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

double parse_cell(std::string_view cell, std::size_t line_no, std::size_t col) {
  double v = 0.0;
  const auto* first = cell.data();
  const auto* last = cell.data() + cell.size();
  const auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last || cell.empty()) {
    throw DataError("line " + std::to_string(line_no) + ", column " + std::to_string(col) +
                    ": not a number: '" + std::string(cell) + "'");
  }
  if (!std::isfinite(v)) {
    throw DataError("line " + std::to_string(line_no) + ", column " + std::to_string(col) +
                    ": non-finite value");
  }
  return v;
}

ModelRecord parse_model(const json& j) {
  ModelRecord m;
  if (!j.contains("id") || !j["id"].is_string()) throw DataError("metadata model without string id");
  m.model_id = j["id"].get<std::string>();
  check_id(m.model_id, "model");
  if (j.contains("type") && j["type"].is_string()) m.model_type = j["type"].get<std::string>();
  if (j.contains("params") && !j["params"].is_null()) {
    if (!j["params"].is_number()) throw DataError("model " + m.model_id + ": params must be a number");
    const double p = j["params"].get<double>();
    if (!(p > 0.0)) throw DataError("model " + m.model_id + ": params must be positive");
    m.param_count = static_cast<std::int64_t>(std::llround(p));
  }
  if (j.contains("created") && j["created"].is_string()) m.created = j["created"].get<std::string>();
  if (j.contains("tags") && j["tags"].is_array()) {
    for (const auto& t : j["tags"]) {
      if (t.is_string()) m.tags.insert(t.get<std::string>());
    }
  }
  if (j.contains("scores") && j["scores"].is_object()) {
    for (const auto& [task, value] : j["scores"].items()) {
      if (value.is_null()) continue;
      if (!value.is_number()) throw DataError("model " + m.model_id + ": score " + task + " is not numeric");
      const double v = value.get<double>();
      if (!(v >= 0.0 && v <= 100.0)) {
        throw DataError("model " + m.model_id + ": score " + task + " outside [0, 100]");
      }
      m.benchmark_scores[task] = v;
    }
  }
  return m;
}

TextRecord parse_text(const json& j) {
  TextRecord t;
  if (!j.contains("id") || !j["id"].is_string()) throw DataError("metadata text without string id");
  t.text_id = j["id"].get<std::string>();
  check_id(t.text_id, "text");
  if (j.contains("category") && j["category"].is_string()) t.category = j["category"].get<std::string>();
  if (!j.contains("byte_length") || !j["byte_length"].is_number_integer()) {
    throw DataError("text " + t.text_id + ": byte_length must be an integer");
  }
  t.byte_length = j["byte_length"].get<std::int64_t>();
  if (t.byte_length < 1) throw DataError("text " + t.text_id + ": byte_length must be >= 1");
  return t;
}

}  // namespace

std::vector<std::string> LogLikMatrix::model_ids() const {
  std::vector<std::string> ids;
  ids.reserve(models.size());
  for (const auto& m : models) ids.push_back(m.model_id);
  return ids;
}

std::vector<std::string> LogLikMatrix::text_ids() const {
  std::vector<std::string> ids;
  ids.reserve(texts.size());
  for (const auto& t : texts) ids.push_back(t.text_id);
  return ids;
}

void LogLikMatrix::validate() const {
  if (models.empty() || texts.empty()) throw DataError("log-likelihood matrix needs K >= 1 and N >= 1");
  if (values.rows() != static_cast<Eigen::Index>(models.size()) ||
      values.cols() != static_cast<Eigen::Index>(texts.size())) {
    throw DataError("log-likelihood matrix shape does not match its ID lists");
  }
  std::unordered_set<std::string> seen;
  for (const auto& m : models) {
    check_id(m.model_id, "model");
    if (!seen.insert(m.model_id).second) throw DataError("duplicate model ID: " + m.model_id);
  }
  seen.clear();
  for (const auto& t : texts) {
    check_id(t.text_id, "text");
    if (!seen.insert(t.text_id).second) throw DataError("duplicate text ID: " + t.text_id);
  }
  if (!values.allFinite()) throw DataError("log-likelihood matrix contains NaN or infinity");
}

Metadata parse_metadata(std::string_view json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw DataError(std::string("metadata is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw DataError("metadata must be a JSON object");
  Metadata meta;
  std::unordered_set<std::string> seen;
  if (j.contains("models")) {
    if (!j["models"].is_array()) throw DataError("metadata 'models' must be an array");
    for (const auto& m : j["models"]) {
      meta.models.push_back(parse_model(m));
      if (!seen.insert(meta.models.back().model_id).second) {
        throw DataError("duplicate model ID in metadata: " + meta.models.back().model_id);
      }
    }
  }
  seen.clear();
  if (j.contains("texts")) {
    if (!j["texts"].is_array()) throw DataError("metadata 'texts' must be an array");
    for (const auto& t : j["texts"]) {
      meta.texts.push_back(parse_text(t));
      if (!seen.insert(meta.texts.back().text_id).second) {
        throw DataError("duplicate text ID in metadata: " + meta.texts.back().text_id);
      }
    }
  }
  return meta;
}

Metadata read_metadata(const std::filesystem::path& path) { return parse_metadata(read_file(path)); }

std::string format_metadata(const Metadata& meta) {
  json models = json::array();
  for (const auto& m : meta.models) {
    json scores = json::object();
    for (const auto& [task, v] : m.benchmark_scores) scores[task] = v;
    models.push_back({{"id", m.model_id},
                      {"type", m.model_type},
                      {"params", m.param_count ? json(*m.param_count) : json(nullptr)},
                      {"created", m.created ? json(*m.created) : json(nullptr)},
                      {"tags", json(std::vector<std::string>(m.tags.begin(), m.tags.end()))},
                      {"scores", scores}});
  }
  json texts = json::array();
  for (const auto& t : meta.texts) {
    texts.push_back({{"id", t.text_id}, {"category", t.category}, {"byte_length", t.byte_length}});
  }
  json out = {{"models", models}, {"texts", texts}};
  return out.dump(2) + "\n";
}

LogLikMatrix parse_matrix(std::string_view tsv_text, const Metadata& meta) {
  std::vector<std::string_view> lines = split(tsv_text, '\n');
  for (auto& l : lines) {
    if (!l.empty() && l.back() == '\r') l.remove_suffix(1);
  }
  while (!lines.empty() && lines.back().empty()) lines.pop_back();
  if (lines.empty()) throw DataError("matrix file is empty");

  const auto header = split(lines[0], '\t');
  if (header.size() < 2 || header[0] != "model_id") {
    throw DataError("malformed header: expected 'model_id' followed by text IDs");
  }
  const std::size_t n = header.size() - 1;
  const std::size_t k = lines.size() - 1;
  if (k == 0) throw DataError("matrix has no model rows");

  std::unordered_map<std::string, const ModelRecord*> model_lookup;
  for (const auto& m : meta.models) model_lookup.emplace(m.model_id, &m);
  std::unordered_map<std::string, const TextRecord*> text_lookup;
  for (const auto& t : meta.texts) text_lookup.emplace(t.text_id, &t);

  LogLikMatrix out;
  out.texts.reserve(n);
  for (std::size_t s = 0; s < n; ++s) {
    const std::string id(header[s + 1]);
    check_id(id, "text");
    const auto it = text_lookup.find(id);
    if (it == text_lookup.end()) throw DataError("ID mismatch: text '" + id + "' is not in the metadata");
    out.texts.push_back(*it->second);
  }
  out.models.reserve(k);
  out.values.resize(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < k; ++i) {
    const auto fields = split(lines[i + 1], '\t');
    if (fields.size() != n + 1) {
      throw DataError("line " + std::to_string(i + 2) + ": expected " + std::to_string(n + 1) +
                      " fields, found " + std::to_string(fields.size()));
    }
    const std::string id(fields[0]);
    check_id(id, "model");
    const auto it = model_lookup.find(id);
    if (it == model_lookup.end()) throw DataError("ID mismatch: model '" + id + "' is not in the metadata");
    out.models.push_back(*it->second);
    for (std::size_t s = 0; s < n; ++s) {
      out.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(s)) =
          parse_cell(fields[s + 1], i + 2, s + 2);
    }
  }
  out.validate();
  return out;
}

LogLikMatrix load_matrix(const std::filesystem::path& matrix_path,
                         const std::filesystem::path& metadata_path) {
  const Metadata meta = read_metadata(metadata_path);
  return parse_matrix(read_file(matrix_path), meta);
}

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc()) throw DataError("cannot format value");
  return std::string(buf, ptr);
}

std::string format_table(std::span<const std::string> row_ids, std::span<const std::string> col_ids,
                         const Matrix& values, std::string_view corner) {
  std::string out;
  out.reserve(static_cast<std::size_t>(values.size()) * 12 + 64);
  out += corner;
  for (const auto& id : col_ids) {
    out += '\t';
    out += id;
  }
  out += '\n';
  for (std::size_t i = 0; i < row_ids.size(); ++i) {
    out += row_ids[i];
    for (std::size_t s = 0; s < col_ids.size(); ++s) {
      out += '\t';
      out += format_double(values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(s)));
    }
    out += '\n';
  }
  return out;
}

std::string format_matrix(const LogLikMatrix& matrix) {
  const auto rows = matrix.model_ids();
  const auto cols = matrix.text_ids();
  return format_table(rows, cols, matrix.values);
}

Metadata metadata_of(const LogLikMatrix& matrix) { return Metadata{matrix.models, matrix.texts}; }

}  // namespace llmap

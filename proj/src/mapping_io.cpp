#include "json.hpp"
#include "llmap/mapping.hpp"
#include "llmap/matrix_core.hpp"

namespace llmap {

std::string format_embedding(const EmbeddingResult& e) {
  std::string out = "model_id";
  for (Eigen::Index c = 0; c < e.coords.cols(); ++c) out += c == 0 ? "\tx" : c == 1 ? "\ty" : "\td" + std::to_string(c + 1);
  out += "\tmethod\tseed\n";
  for (Eigen::Index i = 0; i < e.coords.rows(); ++i) {
    out += i < static_cast<Eigen::Index>(e.model_ids.size()) ? e.model_ids[std::size_t(i)] : std::to_string(i);
    for (Eigen::Index c = 0; c < e.coords.cols(); ++c) out += '\t' + format_double(e.coords(i, c));
    out += '\t' + e.method + '\t' + std::to_string(e.seed) + '\n';
  }
  return out;
}

std::string format_spectrum(const SpectrumReport& s) {
  std::string out = "component\tsingular_value\tcumulative_ratio\n";
  for (std::size_t c = 0; c < s.singular_values.size(); ++c) {
    out += std::to_string(c + 1) + '\t' + format_double(s.singular_values[c]) + '\t' +
           format_double(s.cumulative_ratio[c]) + '\n';
  }
  return out;
}

std::string format_dendrogram(const Dendrogram& d) {
  nlohmann::json merges = nlohmann::json::array();
  for (const auto& m : d.merges) merges.push_back({m.left, m.right, m.height, m.size});
  const nlohmann::json j = {{"leaves", d.leaves},
                            {"merges", merges},
                            {"metric", std::string(metric_name(d.metric))},
                            {"linkage", std::string(linkage_name(d.linkage))},
                            {"height_unit", d.height_unit}};
  return j.dump(2) + "\n";
}

}  // namespace llmap

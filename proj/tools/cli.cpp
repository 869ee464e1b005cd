#include "cli.hpp"

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <numbers>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "llmap/analysis.hpp"
#include "llmap/error.hpp"
#include "llmap/geometry.hpp"
#include "llmap/identities.hpp"
#include "llmap/mapping.hpp"
#include "llmap/matrix_core.hpp"
#include "llmap/oracle.hpp"
#include "llmap/predict.hpp"

namespace llmap::cli {

namespace {

namespace fs = std::filesystem;
using json = nlohmann::json;

// Options whose values are file paths; sidecars record only their file names
// so reruns in another directory produce identical bytes.
const std::set<std::string> kPathOptions{"matrix", "meta", "out", "out-meta", "divergence", "spectrum",
                                         "predictions", "corpus", "embedding"};

// JSON config reader. Scalars at any level apply to the invoked subcommand;
// objects named after a subcommand scope their keys to it and are skipped
// when another subcommand runs.
class JsonConfig : public CLI::Config {
 public:
  explicit JsonConfig(const CLI::App* root) : root_(root) {}

  std::string to_config(const CLI::App*, bool, bool, std::string) const override { return {}; }

  std::vector<CLI::ConfigItem> from_config(std::istream& in) const override {
    json j;
    try {
      in >> j;
    } catch (const json::exception& e) {
      throw ConfigError(std::string("config file is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) throw ConfigError("config file must hold a JSON object");
    std::vector<const CLI::App*> chain{root_};
    while (!chain.back()->get_subcommands().empty()) chain.push_back(chain.back()->get_subcommands().front());
    std::vector<std::string> parents;
    for (std::size_t d = 1; d < chain.size(); ++d) parents.push_back(chain[d]->get_name());
    std::vector<CLI::ConfigItem> items;
    collect(j, chain, 0, parents, items);
    return items;
  }

 private:
  static std::string scalar(const json& v) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
    if (v.is_number()) return v.dump();
    throw ConfigError("config values must be strings, numbers, booleans or arrays of those");
  }

  void collect(const json& obj, const std::vector<const CLI::App*>& chain, std::size_t depth,
               const std::vector<std::string>& parents, std::vector<CLI::ConfigItem>& items) const {
    for (const auto& [key, value] : obj.items()) {
      if (value.is_null()) continue;
      if (value.is_object()) {
        const CLI::App* level = chain[std::min(depth, chain.size() - 1)];
        bool known = false;
        for (const auto* sub : level->get_subcommands({})) known = known || sub->get_name() == key;
        if (!known) throw ConfigError("unknown config section '" + key + "'");
        if (depth + 1 < chain.size() && chain[depth + 1]->get_name() == key) {
          collect(value, chain, depth + 1, parents, items);
        }
        continue;
      }
      CLI::ConfigItem item;
      item.parents = parents;
      item.name = key;
      if (value.is_array()) {
        for (const auto& v : value) item.inputs.push_back(scalar(v));
      } else {
        item.inputs.push_back(scalar(value));
      }
      items.push_back(std::move(item));
    }
  }

  const CLI::App* root_;
};

void write_atomic(const fs::path& path, const std::string& content) {
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw DataError("cannot open '" + tmp.string() + "' for writing");
    f.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!f) throw DataError("cannot write '" + tmp.string() + "'");
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw DataError("cannot move output into place at '" + path.string() + "': " + ec.message());
}

std::string read_file(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot read '" + path.string() + "'");
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

double parse_number(const std::string& cell, const std::string& where) {
  double v = 0.0;
  const auto* end = cell.data() + cell.size();
  const auto [ptr, ec] = std::from_chars(cell.data(), end, v);
  if (ec != std::errc() || ptr != end || !std::isfinite(v)) {
    throw DataError("non-numeric or non-finite cell '" + cell + "' in " + where);
  }
  return v;
}

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(const std::string& name, const std::string& where) const {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw DataError(where + " has no '" + name + "' column");
    return static_cast<std::size_t>(it - header.begin());
  }
};

Table read_table(const fs::path& path) {
  const std::string text = read_file(path);
  Table t;
  std::istringstream in(text);
  std::string line;
  auto split = [](const std::string& l) {
    std::vector<std::string> cells;
    std::size_t start = 0;
    while (true) {
      const auto tab = l.find('\t', start);
      cells.push_back(l.substr(start, tab - start));
      if (tab == std::string::npos) break;
      start = tab + 1;
    }
    return cells;
  };
  if (!std::getline(in, line)) throw DataError("'" + path.string() + "' is empty");
  t.header = split(line);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto cells = split(line);
    if (cells.size() != t.header.size()) throw DataError("ragged row in '" + path.string() + "'");
    t.rows.push_back(std::move(cells));
  }
  return t;
}

// The invoked leaf subcommand plus everything needed to write sidecars.
struct Context {
  const CLI::App* leaf = nullptr;
  std::string command;
  std::ostream* out = nullptr;
  std::ostream* err = nullptr;
};

json resolved_config(const CLI::App* app) {
  json cfg = json::object();
  for (const CLI::Option* opt : app->get_options()) {
    const std::string name = opt->get_single_name();
    if (name.empty() || name == "help" || name == "config") continue;
    if (opt->get_expected_max() == 0) {
      cfg[name] = opt->count() > 0;
      continue;
    }
    std::vector<std::string> values = opt->count() > 0 ? opt->results() : std::vector<std::string>{};
    const std::string fallback = opt->get_default_str();
    if (opt->count() == 0 && !fallback.empty() && fallback != "{}") values.push_back(fallback);
    if (kPathOptions.contains(name)) {
      for (auto& v : values) v = fs::path(v).filename().string();
    }
    if (opt->get_expected_max() > 1) {
      cfg[name] = values;
    } else {
      cfg[name] = values.empty() ? json(nullptr) : json(values.front());
    }
  }
  return cfg;
}

void emit(const Context& ctx, const std::string& path, const std::string& content, const json& summary = {}) {
  json side = {{"command", ctx.command}, {"config", resolved_config(ctx.leaf)}, {"output", fs::path(path).filename().string()}};
  const CLI::Option* seed = ctx.leaf->get_option_no_throw("--seed");
  side["seed"] = seed ? json(seed->as<std::uint64_t>()) : json(nullptr);
  if (!summary.is_null()) side["summary"] = summary;
  write_atomic(path, content);
  write_atomic(path + ".meta.json", side.dump(2) + "\n");
}

std::string format_labels(const LabelAssignment& la) {
  std::string out = "model_id\tlabel";
  for (const auto& c : la.columns) out += "\tz_" + c;
  out += '\n';
  for (std::size_t i = 0; i < la.model_ids.size(); ++i) {
    out += la.model_ids[i] + '\t' + la.labels[i];
    for (Eigen::Index c = 0; c < la.z.cols(); ++c) out += '\t' + format_double(la.z(Eigen::Index(i), c));
    out += '\n';
  }
  return out;
}

// Models with every benchmark score, and their K x 6 score matrix.
std::pair<std::vector<std::size_t>, Matrix> complete_scores(const LogLikMatrix& m) {
  const auto& tasks = benchmark_tasks();
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < m.n_models(); ++i) {
    const auto& s = m.models[i].benchmark_scores;
    if (std::all_of(tasks.begin(), tasks.end(), [&](const std::string& t) { return s.contains(t); })) rows.push_back(i);
  }
  if (rows.size() < 2) throw DataError("fewer than 2 models carry every benchmark score");
  Matrix scores(Eigen::Index(rows.size()), Eigen::Index(tasks.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t t = 0; t < tasks.size(); ++t) {
      scores(Eigen::Index(r), Eigen::Index(t)) = m.models[rows[r]].benchmark_scores.at(tasks[t]);
    }
  }
  return {rows, scores};
}

std::string gate_line(const std::string& name, double value, const std::string& rule, bool pass) {
  return name + "\t" + format_double(value) + "\t" + rule + "\t" + (pass ? "PASS" : "FAIL") + "\n";
}

using Action = std::function<int(const Context&)>;

struct Registry {
  std::map<const CLI::App*, Action> actions;
};

struct MatrixInputs {
  std::string matrix, meta;
  void add(CLI::App* sub) {
    sub->add_option("--matrix", matrix, "log-likelihood matrix TSV")->required();
    sub->add_option("--meta", meta, "metadata JSON")->required();
  }
  LogLikMatrix load() const { return load_matrix(matrix, meta); }
};

void add_ingest(CLI::App& app, Registry& reg) {
  auto* sub = app.add_subcommand("ingest", "validate a matrix and metadata pair and write canonical copies");
  auto in = std::make_shared<MatrixInputs>();
  auto out = std::make_shared<std::pair<std::string, std::string>>();
  in->add(sub);
  sub->add_option("--out", out->first, "canonical matrix TSV")->required();
  sub->add_option("--out-meta", out->second, "canonical metadata JSON")->required();
  reg.actions[sub] = [in, out](const Context& ctx) {
    const auto m = in->load();
    const json summary = {{"models", m.n_models()}, {"texts", m.n_texts()}};
    emit(ctx, out->first, format_matrix(m), summary);
    emit(ctx, out->second, format_metadata(metadata_of(m)), summary);
    return kOk;
  };
}

void add_clip(CLI::App& app, Registry& reg) {
  struct O : MatrixInputs {
    std::string out, scope = "global";
    double fraction = 0.02;
  };
  auto o = std::make_shared<O>();
  auto* sub = app.add_subcommand("clip", "raise the lowest entries to a quantile threshold");
  o->add(sub);
  sub->add_option("--out", o->out, "clipped matrix TSV")->required();
  sub->add_option("--fraction", o->fraction, "quantile level of the threshold");
  sub->add_option("--clip-scope", o->scope, "global or per-row")->check(CLI::IsMember({"global", "per-row"}));
  reg.actions[sub] = [o](const Context& ctx) {
    const auto scope = o->scope == "global" ? ClipScope::global : ClipScope::per_row;
    const auto [clipped, report] = clip_lower(o->load(), o->fraction, scope);
    json summary = {{"threshold", report.threshold},
                    {"fraction_requested", report.fraction_requested},
                    {"entries_clipped", report.entries_clipped},
                    {"scope", o->scope}};
    if (!report.row_thresholds.empty()) summary["row_thresholds"] = report.row_thresholds;
    emit(ctx, o->out, format_matrix(clipped), summary);
    return kOk;
  };
}

void add_center(CLI::App& app, Registry& reg) {
  struct O : MatrixInputs {
    std::string out;
  };
  auto o = std::make_shared<O>();
  auto* sub = app.add_subcommand("center", "double-center a matrix into q-coordinates");
  o->add(sub);
  sub->add_option("--out", o->out, "q matrix TSV (same layout as the input)")->required();
  reg.actions[sub] = [o](const Context& ctx) {
    const auto c = double_center(o->load());
    json means = json::object();
    for (std::size_t i = 0; i < c.model_ids.size(); ++i) means[c.model_ids[i]] = c.mean_loglik(Eigen::Index(i));
    emit(ctx, o->out, format_table(c.model_ids, c.text_ids, c.q), {{"mean_loglik", means}});
    return kOk;
  };
}

void add_kl(CLI::App& app, Registry& reg) {
  struct O : MatrixInputs {
    std::string out, unit = "nats_per_text";
    double mean_bytes = 0.0;
  };
  auto o = std::make_shared<O>();
  auto* sub = app.add_subcommand("kl", "pairwise KL divergence estimates (input is centered first)");
  o->add(sub);
  sub->add_option("--out", o->out, "K x K divergence TSV")->required();
  sub->add_option("--unit", o->unit, "nats_per_text or bits_per_byte")
      ->check(CLI::IsMember({"nats_per_text", "bits_per_byte"}));
  sub->add_option("--mean-bytes", o->mean_bytes, "mean text length in bytes; 0 uses the metadata average");
  reg.actions[sub] = [o](const Context& ctx) {
    const auto m = o->load();
    auto div = kl_matrix(double_center(m));
    json summary = {{"unit", o->unit}};
    if (parse_unit(o->unit) == DivergenceUnit::bits_per_byte) {
      const double bytes = o->mean_bytes > 0.0 ? o->mean_bytes : mean_text_bytes(m);
      div = to_bits_per_byte(div, bytes);
      summary["mean_text_bytes"] = bytes;
    }
    emit(ctx, o->out, format_divergence(div), summary);
    return kOk;
  };
}

DivergenceMatrix read_divergence(const std::string& path, DivergenceUnit unit) {
  const Table t = read_table(path);
  DivergenceMatrix div;
  div.unit = unit;
  div.model_ids.assign(t.header.begin() + 1, t.header.end());
  const auto k = Eigen::Index(div.model_ids.size());
  if (k < 2 || Eigen::Index(t.rows.size()) != k) throw DataError("divergence table must be square with K >= 2");
  div.values.resize(k, k);
  for (Eigen::Index i = 0; i < k; ++i) {
    const auto& row = t.rows[std::size_t(i)];
    if (row[0] != div.model_ids[std::size_t(i)]) throw DataError("divergence row and column IDs differ");
    for (Eigen::Index j = 0; j < k; ++j) div.values(i, j) = parse_number(row[std::size_t(j + 1)], path);
  }
  return div;
}

void add_neighbors(CLI::App& app, Registry& reg) {
  struct O {
    std::string divergence, out, query, unit = "nats_per_text";
    std::size_t top = 10;
  };
  auto o = std::make_shared<O>();
  auto* sub = app.add_subcommand("neighbors", "nearest models by divergence");
  sub->add_option("--divergence", o->divergence, "divergence TSV written by kl")->required();
  sub->add_option("--out", o->out, "neighbor table TSV")->required();
  sub->add_option("--query", o->query, "model ID; every model when omitted");
  sub->add_option("--top", o->top, "neighbors per query (capped at K-1)");
  sub->add_option("--unit", o->unit, "unit of the divergence table")
      ->check(CLI::IsMember({"nats_per_text", "bits_per_byte"}));
  reg.actions[sub] = [o](const Context& ctx) {
    const auto div = read_divergence(o->divergence, parse_unit(o->unit));
    const std::size_t k = std::min(o->top, div.model_ids.size() - 1);
    std::vector<NeighborTable> tables;
    if (!o->query.empty()) {
      tables.push_back(nearest_neighbors(div, o->query, k));
    } else {
      for (const auto& id : div.model_ids) tables.push_back(nearest_neighbors(div, id, k));
    }
    emit(ctx, o->out, format_neighbors(tables, div.unit));
    return kOk;
  };
}

Matrix features_of(const LogLikMatrix& m, const std::string& on) {
  return on == "Q" ? double_center(m).q : m.values;
}

void add_map(CLI::App& app, Registry& reg) {
  struct O : MatrixInputs {
    std::string out, method = "tsne", on = "Q", spectrum;
    std::size_t dims = 2;
    TsneParams tsne;
  };
  auto o = std::make_shared<O>();
  auto* sub = app.add_subcommand("map", "2-D model map by PCA or exact t-SNE");
  o->add(sub);
  sub->add_option("--out", o->out, "embedding TSV")->required();
  sub->add_option("--method", o->method, "pca or tsne")->check(CLI::IsMember({"pca", "tsne"}));
  sub->add_option("--on", o->on, "rows of L (raw) or Q (double-centered)")->check(CLI::IsMember({"L", "Q"}));
  sub->add_option("--dims", o->dims, "PCA output dimensions");
  sub->add_option("--spectrum", o->spectrum, "PCA spectrum TSV");
  sub->add_option("--perplexity", o->tsne.perplexity, "t-SNE perplexity");
  sub->add_option("--iterations", o->tsne.iterations, "t-SNE iterations");
  sub->add_option("--learning-rate", o->tsne.learning_rate, "t-SNE learning rate");
  sub->add_option("--exaggeration", o->tsne.exaggeration, "t-SNE early exaggeration");
  sub->add_option("--seed", o->tsne.seed, "t-SNE initialization seed");
  reg.actions[sub] = [o](const Context& ctx) {
    const auto m = o->load();
    const Matrix x = features_of(m, o->on);
    if (o->method == "pca") {
      const auto r = pca(x, o->dims, m.model_ids());
      emit(ctx, o->out, format_embedding(r.embedding));
      if (!o->spectrum.empty()) emit(ctx, o->spectrum, format_spectrum(r.spectrum));
    } else {
      emit(ctx, o->out, format_embedding(tsne(x, o->tsne, m.model_ids())));
    }
    return kOk;
  };
}

void add_cluster(CLI::App& app, Registry& reg) {
  struct O : MatrixInputs {
    std::string out, metric = "sqeuclidean", linkage = "median", on = "Q";
    bool kl_scale = false;
  };
  auto o = std::make_shared<O>();
  auto* sub = app.add_subcommand("cluster", "agglomerative clustering of models");
  o->add(sub);
  sub->add_option("--out", o->out, "dendrogram JSON")->required();
  sub->add_option("--metric", o->metric, "sqeuclidean or correlation")
      ->check(CLI::IsMember({"sqeuclidean", "correlation"}));
  sub->add_option("--linkage", o->linkage, "median or average")->check(CLI::IsMember({"median", "average"}));
  sub->add_option("--on", o->on, "rows of L or Q")->check(CLI::IsMember({"L", "Q"}));
  sub->add_flag("--kl-scale", o->kl_scale, "use q / sqrt(2N) so sqeuclidean heights read as KL in nats/text");
  reg.actions[sub] = [o](const Context& ctx) {
    const auto m = o->load();
    if (o->kl_scale && o->on != "Q") throw ConfigError("--kl-scale applies to Q rows only");
    const Matrix x = o->kl_scale ? kl_scaled_rows(double_center(m)) : features_of(m, o->on);
    emit(ctx, o->out, format_dendrogram(hcluster(x, parse_metric(o->metric), parse_linkage(o->linkage), m.model_ids())));
    return kOk;
  };
}

void add_analyze(CLI::App& app, Registry& reg) {
  auto* analyze = app.add_subcommand("analyze", "per-model labels, leakage scores and correlations");
  analyze->require_subcommand(1);

  auto cat = std::make_shared<std::pair<MatrixInputs, std::string>>();
  auto* sub = analyze->add_subcommand("primary-category", "category with the highest standardized log-likelihood");
  cat->first.add(sub);
  sub->add_option("--out", cat->second, "label TSV")->required();
  reg.actions[sub] = [cat](const Context& ctx) {
    emit(ctx, cat->second, format_labels(primary_category(cat->first.load())));
    return kOk;
  };

  auto task = std::make_shared<std::pair<MatrixInputs, std::string>>();
  sub = analyze->add_subcommand("primary-task", "benchmark task with the highest standard score");
  task->first.add(sub);
  sub->add_option("--out", task->second, "label TSV")->required();
  reg.actions[sub] = [task](const Context& ctx) {
    const auto m = task->first.load();
    const auto [rows, scores] = complete_scores(m);
    std::vector<std::string> ids;
    for (auto r : rows) ids.push_back(m.models[r].model_id);
    emit(ctx, task->second, format_labels(primary_task(scores, benchmark_tasks(), ids)));
    return kOk;
  };

  struct Leak : MatrixInputs {
    std::string out;
    double threshold = 1.0;
  };
  auto leak = std::make_shared<Leak>();
  sub = analyze->add_subcommand("leakage", "standardized mean log-likelihood minus standardized benchmark mean");
  leak->add(sub);
  sub->add_option("--out", leak->out, "leakage TSV")->required();
  sub->add_option("--threshold", leak->threshold, "flag models above this score");
  reg.actions[sub] = [leak](const Context& ctx) {
    const auto m = leak->load();
    const auto [rows, scores] = complete_scores(m);
    const Vector row_means = m.values.rowwise().mean();
    Vector ml(Eigen::Index(rows.size()));
    for (std::size_t r = 0; r < rows.size(); ++r) ml(Eigen::Index(r)) = row_means(Eigen::Index(rows[r]));
    const auto rep = leakage_scores(ml, scores.rowwise().mean(), leak->threshold);
    std::vector<bool> flagged(rows.size(), false);
    for (auto f : rep.flagged) flagged[f] = true;
    std::string out = "model_id\tleakage_score\tflagged\n";
    for (std::size_t r = 0; r < rows.size(); ++r) {
      out += m.models[rows[r]].model_id + '\t' + format_double(rep.per_model(Eigen::Index(r))) + '\t' +
             (flagged[r] ? "1" : "0") + '\n';
    }
    emit(ctx, leak->out, out, {{"flagged", rep.flagged.size()}, {"threshold", rep.threshold}});
    return kOk;
  };

  auto corr = std::make_shared<std::pair<std::string, std::string>>();
  sub = analyze->add_subcommand("correlate", "Pearson and Spearman correlation of predicted vs actual");
  sub->add_option("--predictions", corr->first, "prediction TSV with predicted and actual columns")->required();
  sub->add_option("--out", corr->second, "correlation JSON")->required();
  reg.actions[sub] = [corr](const Context& ctx) {
    const Table t = read_table(corr->first);
    const auto pc = t.column("predicted", corr->first);
    const auto ac = t.column("actual", corr->first);
    Vector pred(Eigen::Index(t.rows.size())), actual(Eigen::Index(t.rows.size()));
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
      pred(Eigen::Index(r)) = parse_number(t.rows[r][pc], corr->first);
      actual(Eigen::Index(r)) = parse_number(t.rows[r][ac], corr->first);
    }
    const auto c = correlations(pred, actual);
    const json j = {{"pearson_r", c.pearson_r}, {"spearman_rho", c.spearman_rho}, {"n", c.n}};
    emit(ctx, corr->second, j.dump(2) + "\n");
    return kOk;
  };
}

void add_predict(CLI::App& app, Registry& reg) {
  struct O : MatrixInputs {
    std::string out, target, group_by = "type", split = "grouped", features = "Q";
    std::size_t folds = 5, inner_folds = 5, seeds = 5;
    std::uint64_t seed = 0;
    std::vector<double> alpha_grid;
  };
  auto o = std::make_shared<O>();
  auto* sub = app.add_subcommand("predict", "cross-validated ridge prediction of a benchmark or mean log-likelihood");
  o->add(sub);
  sub->add_option("--out", o->out, "prediction TSV")->required();
  sub->add_option("--target", o->target, "benchmark task, 6-TaskMean or mean_loglik")->required();
  sub->add_option("--folds", o->folds, "outer folds");
  sub->add_option("--inner-folds", o->inner_folds, "inner folds for alpha selection");
  sub->add_option("--seeds", o->seeds, "number of split seeds, starting at --seed");
  sub->add_option("--seed", o->seed, "first split seed");
  sub->add_option("--group-by", o->group_by, "type (model type) or model (one group per model)")
      ->check(CLI::IsMember({"type", "model"}));
  sub->add_option("--split", o->split, "grouped or random folds")->check(CLI::IsMember({"grouped", "random"}));
  sub->add_option("--features", o->features, "rows of Q or L")->check(CLI::IsMember({"Q", "L"}));
  sub->add_option("--alpha-grid", o->alpha_grid, "override the default alpha grid")->delimiter(',');
  reg.actions[sub] = [o](const Context& ctx) {
    const auto m = o->load();
    const auto sel = select_target(m, o->target);
    const Matrix all = features_of(m, o->features);
    PredictionTask task;
    task.target_name = o->target;
    task.features.resize(Eigen::Index(sel.rows.size()), all.cols());
    std::vector<std::string> ids;
    for (std::size_t r = 0; r < sel.rows.size(); ++r) {
      task.features.row(Eigen::Index(r)) = all.row(Eigen::Index(sel.rows[r]));
      const auto& model = m.models[sel.rows[r]];
      ids.push_back(model.model_id);
      task.groups.push_back(o->group_by == "type" ? model.model_type : model.model_id);
    }
    task.target = sel.values;
    task.alpha_grid = !o->alpha_grid.empty() ? o->alpha_grid
                      : sel.is_benchmark     ? benchmark_alpha_grid()
                                             : loglik_alpha_grid();
    task.n_folds = o->folds;
    task.inner_folds = o->inner_folds;
    task.seeds.clear();
    for (std::size_t s = 0; s < o->seeds; ++s) task.seeds.push_back(o->seed + s);
    if (sel.is_benchmark) task.clip_range = std::pair{0.0, 100.0};
    task.grouped = o->split == "grouped";
    const auto result = cross_val_predict(task);

    std::vector<std::string> violations;
    if (task.grouped) {
      for (const auto& plan : result.plans) {
        for (auto& v : audit_fold_plan(plan, task.groups)) violations.push_back(std::move(v));
      }
    }
    const json summary = {{"pearson_r", result.overall.pearson_r},
                          {"spearman_rho", result.overall.spearman_rho},
                          {"n", result.overall.n},
                          {"selected_alpha", result.selected_alpha},
                          {"inner_fallbacks", result.inner_fallbacks},
                          {"audit_violations", violations}};
    emit(ctx, o->out, format_predictions(ids, o->target, result, sel.values), summary);
    if (!violations.empty()) {
      for (const auto& v : violations) *ctx.err << "audit: " << v << '\n';
      return kGateFailure;
    }
    return kOk;
  };
}

void add_validate(CLI::App& app, Registry& reg) {
  auto* validate = app.add_subcommand("validate", "oracle and identity gates");
  validate->require_subcommand(1);

  struct Exp {
    std::string out, generator = "base";
    std::size_t outcomes = 64, models = 4, samples = 100000, trials = 10;
    double lambda = 0.1, gate = 0.05;
    std::uint64_t seed = 0;
  };
  auto e = std::make_shared<Exp>();
  auto* sub = validate->add_subcommand("expfam", "divergence estimate vs exact KL on exponential families");
  sub->add_option("--out", e->out, "report JSON");
  sub->add_option("--outcomes", e->outcomes, "outcome space size");
  sub->add_option("--models", e->models, "models per family");
  sub->add_option("--lambda", e->lambda, "family scale");
  sub->add_option("--samples", e->samples, "sampled texts per trial");
  sub->add_option("--trials", e->trials, "families; trial t uses family seed seed+t and sample seed seed+1000+t");
  sub->add_option("--gate", e->gate, "largest allowed relative error");
  sub->add_option("--generator", e->generator, "sample from base (p0) or model (p1)")
      ->check(CLI::IsMember({"base", "model"}));
  sub->add_option("--seed", e->seed, "seed offset");
  reg.actions[sub] = [e](const Context& ctx) {
    json trials = json::array();
    bool all_pass = true;
    *ctx.out << "trial\tworst_relative_error\tgate\tstatus\n";
    for (std::size_t t = 1; t <= e->trials; ++t) {
      const auto fam = random_family(e->outcomes, e->models, e->lambda, e->seed + t);
      const std::optional<Vector> gen =
          e->generator == "model" ? std::optional<Vector>(fam.model_theta(0)) : std::nullopt;
      const auto reports = validate_all_pairs(fam, e->samples, e->seed + 1000 + t, gen);
      double worst = 0.0;
      for (const auto& r : reports) worst = std::max(worst, r.relative_error());
      const bool pass = worst <= e->gate;
      all_pass = all_pass && pass;
      *ctx.out << gate_line(std::to_string(t), worst, "<= " + format_double(e->gate), pass);
      trials.push_back({{"family_seed", e->seed + t},
                        {"sample_seed", e->seed + 1000 + t},
                        {"worst_relative_error", worst},
                        {"passed", pass},
                        {"pairs", json::parse(format_variance_reports(reports))}});
    }
    if (!e->out.empty()) {
      emit(ctx, e->out, json{{"trials", trials}, {"gate", e->gate}, {"passed", all_pass}}.dump(2) + "\n");
    }
    return all_pass ? kOk : kGateFailure;
  };

  struct Tok {
    std::string out;
    TokenValidationConfig cfg;
    double min_r = 0.85;
  };
  auto tk = std::make_shared<Tok>();
  sub = validate->add_subcommand("token", "token coordinate distances vs per-token KL sums on Markov models");
  sub->add_option("--out", tk->out, "report JSON");
  sub->add_option("--texts", tk->cfg.n_texts, "sampled texts");
  sub->add_option("--length", tk->cfg.length, "tokens per text");
  sub->add_option("--lambda", tk->cfg.lambda, "tilt scale");
  sub->add_option("--switch-prob", tk->cfg.switch_prob, "regime switch probability");
  sub->add_option("--min-r", tk->min_r, "Pearson r gate");
  sub->add_option("--seed", tk->cfg.seed, "seed");
  reg.actions[sub] = [tk](const Context& ctx) {
    const auto r = validate_token_level(tk->cfg);
    SplitMix64 rng(tk->cfg.seed);
    const auto p = random_token_model(3, 1, rng);
    const auto q = random_token_model(3, 1, rng);
    const double gap = std::abs(exact_text_kl(p, q, 6) - exact_text_kl_enumerate(p, q, 6));
    const bool r_pass = r.pearson_r >= tk->min_r;
    const bool dp_pass = gap <= 1e-10;
    *ctx.out << "check\tvalue\tgate\tstatus\n"
             << gate_line("pearson_r", r.pearson_r, ">= " + format_double(tk->min_r), r_pass)
             << gate_line("dp_vs_enumeration", gap, "<= 1e-10", dp_pass);
    if (!tk->out.empty()) {
      const json j = {{"pearson_r", r.pearson_r},
                      {"exact_text_kl", r.exact_text_kl},
                      {"position_kl_mean", r.position_kl_mean},
                      {"position_kl_variance", r.position_kl_variance},
                      {"dp_enumeration_gap", gap},
                      {"zeta_sq", r.zeta_sq},
                      {"kl2_sum", r.kl2_sum},
                      {"passed", r_pass && dp_pass}};
      emit(ctx, tk->out, j.dump(2) + "\n");
    }
    return r_pass && dp_pass ? kOk : kGateFailure;
  };

  struct Ident {
    std::string out;
    IdentityConfig cfg;
  };
  auto id = std::make_shared<Ident>();
  sub = validate->add_subcommand("identities", "exact centering and decomposition identities on random matrices");
  sub->add_option("--out", id->out, "report JSON");
  sub->add_option("--trials", id->cfg.trials, "random matrices");
  sub->add_option("--tolerance", id->cfg.tolerance, "scaled error gate");
  sub->add_option("--seed", id->cfg.seed, "seed");
  reg.actions[sub] = [id](const Context& ctx) {
    const auto checks = check_identities(id->cfg);
    bool all = true;
    *ctx.out << "identity\tmax_error\tgate\tstatus\n";
    for (const auto& c : checks) {
      *ctx.out << gate_line(c.name, c.max_error, "<= " + format_double(c.tolerance), c.passed());
      all = all && c.passed();
    }
    if (!id->out.empty()) emit(ctx, id->out, format_identity_checks(checks));
    return all ? kOk : kGateFailure;
  };
}

void add_interp(CLI::App& app, Registry& reg) {
  struct O : MatrixInputs {
    std::string out;
    std::vector<std::string> models;
    std::vector<double> alphas, betas;
    InterpolationGrid grid;
  };
  auto o = std::make_shared<O>();
  auto* sub = app.add_subcommand("interp", "log-likelihood interpolation over a weight plane");
  o->add(sub);
  sub->add_option("--out", o->out, "grid TSV")->required();
  sub->add_option("--models", o->models, "three model IDs: origin, first direction, second direction")
      ->required()
      ->expected(3)
      ->delimiter(',');
  sub->add_option("--alpha", o->alphas, "alpha values (default 0..1 step 0.2)")->delimiter(',');
  sub->add_option("--beta", o->betas, "beta values (default 0..1 step 0.2)")->delimiter(',');
  sub->add_option("--r1", o->grid.r1, "weight distance to the first model");
  sub->add_option("--r2", o->grid.r2, "weight distance to the second model");
  sub->add_option("--phi", o->grid.phi, "angle between the directions in radians");
  reg.actions[sub] = [o](const Context& ctx) {
    const auto m = o->load();
    const auto ids = m.model_ids();
    auto row = [&](const std::string& id) -> Vector {
      const auto it = std::find(ids.begin(), ids.end(), id);
      if (it == ids.end()) throw ConfigError("unknown model '" + id + "'");
      return m.values.row(it - ids.begin()).transpose();
    };
    InterpolationGrid g = o->grid;
    g.l0 = row(o->models[0]);
    g.l1 = row(o->models[1]);
    g.l2 = row(o->models[2]);
    if (!o->alphas.empty()) g.alphas = o->alphas;
    if (!o->betas.empty()) g.betas = o->betas;
    std::string out = "alpha\tbeta\tx\ty\tmean_loglik\n";
    for (double a : g.alphas) {
      for (double b : g.betas) {
        const auto [x, y] = weight_plane_coords(g.r1, g.r2, g.phi, a, b);
        out += format_double(a) + '\t' + format_double(b) + '\t' + format_double(x) + '\t' + format_double(y) + '\t' +
               format_double(interpolate_loglik(g, a, b).mean()) + '\n';
      }
    }
    emit(ctx, o->out, out);
    return kOk;
  };
}

void add_chunk(CLI::App& app, Registry& reg) {
  struct O {
    std::string corpus, out, out_meta;
    std::size_t bytes = 1024, min_bytes = 256, sample = 0;
    std::uint64_t seed = 0;
  };
  auto o = std::make_shared<O>();
  auto* sub = app.add_subcommand("chunk", "split a JSONL corpus into byte chunks at code point boundaries");
  sub->add_option("--corpus", o->corpus, "JSONL with id, text and category")->required();
  sub->add_option("--out", o->out, "chunk JSONL")->required();
  sub->add_option("--out-meta", o->out_meta, "text metadata JSON")->required();
  sub->add_option("--bytes", o->bytes, "chunk size in bytes");
  sub->add_option("--min", o->min_bytes, "drop chunks shorter than this");
  sub->add_option("--sample", o->sample, "keep a uniform sample of this many chunks; 0 keeps all");
  sub->add_option("--seed", o->seed, "sampling seed");
  reg.actions[sub] = [o](const Context& ctx) {
    std::vector<SourceText> texts;
    std::istringstream in(read_file(o->corpus));
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty()) continue;
      json j;
      try {
        j = json::parse(line);
        texts.push_back({j.at("id").get<std::string>(), j.value("category", std::string()), j.at("text").get<std::string>()});
      } catch (const json::exception& ex) {
        throw DataError("corpus line " + std::to_string(lineno) + ": " + ex.what());
      }
    }
    auto chunks = chunk_corpus(texts, o->bytes, o->min_bytes);
    if (o->sample > 0) {
      std::vector<Chunk> kept;
      for (auto i : sample_indices(chunks.size(), o->sample, o->seed)) kept.push_back(std::move(chunks[i]));
      chunks = std::move(kept);
    }
    std::string out;
    Metadata meta;
    for (const auto& c : chunks) {
      out += json{{"id", c.record.text_id}, {"text", c.payload}, {"category", c.record.category},
                  {"byte_length", c.record.byte_length}}
                 .dump() +
             '\n';
      meta.texts.push_back(c.record);
    }
    const json summary = {{"source_texts", texts.size()}, {"chunks", chunks.size()}};
    emit(ctx, o->out, out, summary);
    emit(ctx, o->out_meta, format_metadata(meta), summary);
    return kOk;
  };
}

void add_simulate(CLI::App& app, Registry& reg) {
  struct O {
    std::string out, out_meta;
    std::size_t models = 8, outcomes = 64, texts = 200;
    double lambda = 0.1;
    std::uint64_t seed = 0;
  };
  auto o = std::make_shared<O>();
  auto* sub = app.add_subcommand("simulate", "synthetic matrix and metadata from a random exponential family");
  sub->add_option("--out", o->out, "matrix TSV")->required();
  sub->add_option("--out-meta", o->out_meta, "metadata JSON")->required();
  sub->add_option("--models", o->models, "models");
  sub->add_option("--outcomes", o->outcomes, "outcome space size");
  sub->add_option("--texts", o->texts, "texts");
  sub->add_option("--lambda", o->lambda, "family scale");
  sub->add_option("--seed", o->seed, "seed");
  reg.actions[sub] = [o](const Context& ctx) {
    const auto m = simulate_matrix(random_family(o->outcomes, o->models, o->lambda, o->seed), o->texts, o->seed);
    emit(ctx, o->out, format_matrix(m));
    emit(ctx, o->out_meta, format_metadata(metadata_of(m)));
    return kOk;
  };
}

void add_hue(CLI::App& app, Registry& reg) {
  auto o = std::make_shared<std::pair<std::string, std::string>>();
  auto* sub = app.add_subcommand("hue", "color hues from a short tour through a 2-D map");
  sub->add_option("--embedding", o->first, "embedding TSV with x and y columns")->required();
  sub->add_option("--out", o->second, "hue TSV")->required();
  reg.actions[sub] = [o](const Context& ctx) {
    const Table t = read_table(o->first);
    const auto xc = t.column("x", o->first);
    const auto yc = t.column("y", o->first);
    Matrix pts(Eigen::Index(t.rows.size()), 2);
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
      pts(Eigen::Index(r), 0) = parse_number(t.rows[r][xc], o->first);
      pts(Eigen::Index(r), 1) = parse_number(t.rows[r][yc], o->first);
    }
    const auto tour = tsp_hue_order(pts);
    const auto hues = tour_hues(tour);
    std::vector<std::size_t> position(tour.size());
    for (std::size_t p = 0; p < tour.size(); ++p) position[tour[p]] = p;
    std::string out = "model_id\ttour_position\thue\n";
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
      out += t.rows[r][0] + '\t' + std::to_string(position[r]) + '\t' + format_double(hues[r]) + '\n';
    }
    emit(ctx, o->second, out, {{"tour_length", tour_length(pts, tour)}});
    return kOk;
  };
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app("Log-likelihood geometry of language models", "llmap");
  app.option_defaults()->always_capture_default();
  app.require_subcommand(1);
  app.fallthrough();
  app.allow_config_extras(CLI::config_extras_mode::error);
  app.set_config("--config", "", "JSON config; command-line flags take precedence");
  app.config_formatter(std::make_shared<JsonConfig>(&app));

  Registry reg;
  add_ingest(app, reg);
  add_clip(app, reg);
  add_center(app, reg);
  add_kl(app, reg);
  add_neighbors(app, reg);
  add_map(app, reg);
  add_cluster(app, reg);
  add_analyze(app, reg);
  add_predict(app, reg);
  add_validate(app, reg);
  add_interp(app, reg);
  add_chunk(app, reg);
  add_simulate(app, reg);
  add_hue(app, reg);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
    const CLI::App* leaf = &app;
    std::string command = "llmap";
    while (!leaf->get_subcommands().empty()) {
      leaf = leaf->get_subcommands().front();
      command += " " + leaf->get_name();
    }
    const auto it = reg.actions.find(leaf);
    if (it == reg.actions.end()) throw ConfigError("'" + command + "' needs a subcommand");
    return it->second(Context{leaf, command, &out, &err});
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kConfigError;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << '\n';
    return kDataError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kDataError;
  }
}

}  // namespace llmap::cli

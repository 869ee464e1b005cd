#include <filesystem>
#include <fstream>
#include <sstream>

#include "cli.hpp"
#include "doctest.h"
#include "json.hpp"

namespace fs = std::filesystem;
using llmap::cli::run;

namespace {

struct Scratch {
  fs::path dir;
  explicit Scratch(const std::string& name) : dir(fs::temp_directory_path() / ("llmap_cli_" + name)) {
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  ~Scratch() { fs::remove_all(dir); }
  std::string operator/(const std::string& f) const { return (dir / f).string(); }
};

void write(const std::string& path, const std::string& text) { std::ofstream(path, std::ios::binary) << text; }

std::string read(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

int call(std::vector<std::string> args, std::string* out_text = nullptr) {
  std::ostringstream out, err;
  const int code = run(args, out, err);
  if (out_text) *out_text = out.str() + err.str();
  return code;
}

const char* kWorkedMeta = R"({"models": [{"id": "a", "type": "x"}, {"id": "b", "type": "y"}],
  "texts": [{"id": "s1", "category": "c", "byte_length": 100}, {"id": "s2", "category": "c", "byte_length": 300}]})";

}  // namespace

TEST_CASE("cli center then kl on the worked 2x2 matrix") {
  Scratch s("worked");
  write(s / "l.tsv", "model_id\ts1\ts2\na\t1\t3\nb\t2\t2\n");
  write(s / "meta.json", kWorkedMeta);
  REQUIRE(call({"center", "--matrix", s / "l.tsv", "--meta", s / "meta.json", "--out", s / "q.tsv"}) == 0);
  CHECK(read(s / "q.tsv") == "model_id\ts1\ts2\na\t-0.5\t0.5\nb\t0.5\t-0.5\n");
  REQUIRE(call({"kl", "--matrix", s / "q.tsv", "--meta", s / "meta.json", "--out", s / "kl.tsv"}) == 0);
  CHECK(read(s / "kl.tsv") == "model_id\ta\tb\na\t0\t0.5\nb\t0.5\t0\n");
  REQUIRE(call({"kl", "--matrix", s / "l.tsv", "--meta", s / "meta.json", "--out", s / "kl_raw.tsv"}) == 0);
  CHECK(read(s / "kl_raw.tsv") == read(s / "kl.tsv"));

  const auto side = nlohmann::json::parse(read(s / "kl.tsv.meta.json"));
  CHECK(side["command"] == "llmap kl");
  CHECK(side["config"]["matrix"] == "q.tsv");
  CHECK(side["config"]["unit"] == "nats_per_text");
  CHECK(side["seed"].is_null());

  REQUIRE(call({"kl", "--matrix", s / "q.tsv", "--meta", s / "meta.json", "--out", s / "bpb.tsv", "--unit",
                "bits_per_byte"}) == 0);
  const auto bpb = nlohmann::json::parse(read(s / "bpb.tsv.meta.json"));
  CHECK(bpb["summary"]["mean_text_bytes"] == 200.0);

  REQUIRE(call({"neighbors", "--divergence", s / "kl.tsv", "--out", s / "nb.tsv"}) == 0);
  CHECK(read(s / "nb.tsv") == "query_id\trank\tneighbor_id\tdivergence\tunit\na\t1\tb\t0.5\tnats_per_text\n"
                              "b\t1\ta\t0.5\tnats_per_text\n");
}

TEST_CASE("cli exit codes") {
  Scratch s("codes");
  write(s / "l.tsv", "model_id\ts1\ts2\na\t1\tnan\nb\t2\t2\n");
  write(s / "meta.json", kWorkedMeta);
  CHECK(call({}) == 2);
  CHECK(call({"frobnicate"}) == 2);
  CHECK(call({"kl", "--matrix", s / "l.tsv"}) == 2);
  CHECK(call({"clip", "--matrix", s / "l.tsv", "--meta", s / "meta.json", "--out", s / "c.tsv", "--clip-scope",
              "sideways"}) == 2);
  CHECK(call({"center", "--matrix", s / "l.tsv", "--meta", s / "meta.json", "--out", s / "q.tsv"}) == 3);
  CHECK_FALSE(fs::exists(s / "q.tsv"));
  CHECK(call({"center", "--matrix", s / "missing.tsv", "--meta", s / "meta.json", "--out", s / "q.tsv"}) == 3);
  CHECK(call({"validate", "identities", "--trials", "3", "--tolerance", "0"}) == 4);
  CHECK(call({"validate", "identities", "--trials", "0"}) == 2);
  std::string help;
  CHECK(call({"--help"}, &help) == 0);
  CHECK(help.find("predict") != std::string::npos);
}

TEST_CASE("cli config file with command-line precedence") {
  Scratch s("config");
  write(s / "cfg.json", R"({"seed": 9, "simulate": {"models": 5, "texts": 40}, "kl": {"unit": "bits_per_byte"}})");
  REQUIRE(call({"--config", s / "cfg.json", "simulate", "--out", s / "m.tsv", "--out-meta", s / "meta.json",
                "--texts", "30"}) == 0);
  const auto side = nlohmann::json::parse(read(s / "m.tsv.meta.json"));
  CHECK(side["seed"] == 9);
  CHECK(side["config"]["models"] == "5");
  CHECK(side["config"]["texts"] == "30");
  const std::string tsv = read(s / "m.tsv");
  CHECK(std::count(tsv.begin(), tsv.end(), '\n') == 6);

  write(s / "bad.json", R"({"simulate": {"modles": 5}})");
  CHECK(call({"--config", s / "bad.json", "simulate", "--out", s / "x.tsv", "--out-meta", s / "x.json"}) == 2);
  write(s / "bad2.json", R"({"nosuch": {"seed": 1}})");
  CHECK(call({"--config", s / "bad2.json", "simulate", "--out", s / "x.tsv", "--out-meta", s / "x.json"}) == 2);
  write(s / "bad3.json", "[1, 2]");
  CHECK(call({"--config", s / "bad3.json", "simulate", "--out", s / "x.tsv", "--out-meta", s / "x.json"}) == 2);
}

TEST_CASE("cli chunk command") {
  Scratch s("chunk");
  std::string corpus;
  corpus += nlohmann::json{{"id", "long"}, {"text", std::string(2048, 'a')}, {"category", "web"}}.dump() + "\n";
  corpus += nlohmann::json{{"id", "short"}, {"text", std::string(200, 'b')}, {"category", "web"}}.dump() + "\n";
  corpus += nlohmann::json{{"id", "utf"}, {"text", std::string(1023, 'c') + "\xE2\x82\xAC" + std::string(300, 'd')}}
                .dump() +
            "\n";
  write(s / "corpus.jsonl", corpus);
  REQUIRE(call({"chunk", "--corpus", s / "corpus.jsonl", "--out", s / "chunks.jsonl", "--out-meta",
                s / "texts.json"}) == 0);
  std::istringstream lines(read(s / "chunks.jsonl"));
  std::vector<std::int64_t> lengths;
  for (std::string line; std::getline(lines, line);) lengths.push_back(nlohmann::json::parse(line)["byte_length"]);
  CHECK(lengths == std::vector<std::int64_t>{1024, 1024, 1023, 303});
  REQUIRE(call({"chunk", "--corpus", s / "corpus.jsonl", "--out", s / "two.jsonl", "--out-meta", s / "two.json",
                "--sample", "2", "--seed", "4"}) == 0);
  CHECK(nlohmann::json::parse(read(s / "two.json"))["texts"].size() == 2);
  CHECK(call({"chunk", "--corpus", s / "corpus.jsonl", "--out", s / "x", "--out-meta", s / "y", "--sample",
              "9"}) == 2);
  write(s / "broken.jsonl", "{\"id\": 1\n");
  CHECK(call({"chunk", "--corpus", s / "broken.jsonl", "--out", s / "x", "--out-meta", s / "y"}) == 3);
}

TEST_CASE("cli runs are byte-identical for a fixed seed") {
  Scratch a("det_a"), b("det_b");
  for (const auto* s : {&a, &b}) {
    REQUIRE(call({"simulate", "--out", *s / "m.tsv", "--out-meta", *s / "meta.json", "--seed", "2"}) == 0);
    REQUIRE(call({"map", "--matrix", *s / "m.tsv", "--meta", *s / "meta.json", "--out", *s / "map.tsv",
                  "--perplexity", "2", "--iterations", "200", "--seed", "1"}) == 0);
    REQUIRE(call({"hue", "--embedding", *s / "map.tsv", "--out", *s / "hue.tsv"}) == 0);
    REQUIRE(call({"predict", "--matrix", *s / "m.tsv", "--meta", *s / "meta.json", "--target", "6-TaskMean", "--out",
                  *s / "p.tsv"}) == 0);
    REQUIRE(call({"analyze", "correlate", "--predictions", *s / "p.tsv", "--out", *s / "r.json"}) == 0);
    REQUIRE(call({"interp", "--matrix", *s / "m.tsv", "--meta", *s / "meta.json", "--models", "m0,m1,m2", "--out",
                  *s / "i.tsv"}) == 0);
  }
  for (const auto& entry : fs::directory_iterator(a.dir)) {
    const auto name = entry.path().filename().string();
    INFO(name);
    CHECK(read(a / name) == read(b / name));
  }
  CHECK(std::distance(fs::directory_iterator(a.dir), fs::directory_iterator{}) == 14);
}

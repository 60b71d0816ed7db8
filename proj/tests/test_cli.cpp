#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "helpers.hpp"
#include "nncomp/cli.hpp"
#include "nncomp/model_io.hpp"
#include "nncomp/pipeline.hpp"
#include "nncomp/retrieval.hpp"
#include "nncomp/tradeoff.hpp"

using namespace nncomp;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run(args, out, err);
  return {code, out.str(), err.str()};
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) : path(fs::temp_directory_path() / ("nncomp_cli_" + tag)) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string operator/(const std::string& name) const { return (path / name).string(); }
};

std::string slurp(const std::string& p) {
  const auto b = read_file(p);
  return {b.begin(), b.end()};
}

void put(const std::string& p, const std::string& text) {
  write_file(p, std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

}  // namespace

TEST_CASE("compress then decompress round trips") {
  TempDir d("roundtrip");
  REQUIRE(cli({"synth", "--arch", "plain", "--depth", "3", "--channels", "6", "--out", d / "m.nnw"}).code == 0);
  put(d / "s.cfg", "default = scalar:4\nlayer.c1 = scalar:8\n");
  const auto c = cli({"compress", "--in", d / "m.nnw", "--spec", d / "s.cfg", "--coding", "vlc", "--out", d / "m.nnz"});
  REQUIRE(c.code == 0);
  CHECK(c.out.find("total:") != std::string::npos);
  REQUIRE(cli({"decompress", "--in", d / "m.nnz", "--out", d / "back.nnw"}).code == 0);
  const auto net = load_model(d / "m.nnw");
  const auto cm = load_compressed(d / "m.nnz");
  CHECK(load_model(d / "back.nnw") == decompress(cm));
  CHECK(cm.config.coding == Coding::Huffman);
  CHECK(cm.config.spec.mode_for("c1") == QuantMode::scalar(8));
  // BN layers came through untouched.
  CHECK(load_model(d / "back.nnw").find("c2_bn")->tensors == net.find("c2_bn")->tensors);
}

TEST_CASE("inspect prints the layer table and CSV") {
  TempDir d("inspect");
  REQUIRE(cli({"synth", "--arch", "plain", "--depth", "2", "--out", d / "m.nnw"}).code == 0);
  const auto r = cli({"inspect", d / "m.nnw", "--csv", d / "stats.csv"});
  REQUIRE(r.code == 0);
  CHECK(r.out.find("laplace_b") != std::string::npos);
  CHECK(r.out.find("c2_bn") != std::string::npos);
  CHECK(r.out.find("conv total: ") != std::string::npos);
  const auto csv = slurp(d / "stats.csv");
  CHECK(csv.rfind("layer,kind,conv_weights", 0) == 0);
  REQUIRE(cli({"compress", "--in", d / "m.nnw", "--bits", "3", "--out", d / "m.nnz"}).code == 0);
  const auto rc = cli({"inspect", d / "m.nnz"});
  CHECK(rc.code == 0);
  CHECK(rc.out.find("scalar") != std::string::npos);
}

TEST_CASE("prune and tie") {
  TempDir d("prune");
  REQUIRE(cli({"synth", "--arch", "residual", "--channels", "4", "--blocks", "2,3", "--out", d / "r.nnw",
               "--plan-out", d / "r.plan"})
              .code == 0);
  REQUIRE(cli({"prune", "--in", d / "r.nnw", "--at", "conv2_2_relu", "--out", d / "p.nnw"}).code == 0);
  CHECK(load_model(d / "p.nnw").layers.back().name == "conv2_2_relu");
  const auto t = cli({"tie", "--in", d / "r.nnw", "--plan", d / "r.plan", "--out", d / "t.nnz"});
  REQUIRE(t.code == 0);
  CHECK(t.out.find("unique conv params:") != std::string::npos);
  REQUIRE(cli({"decompress", "--in", d / "t.nnz", "--out", d / "t.nnw"}).code == 0);
  CHECK(load_model(d / "t.nnw").layers.size() == load_model(d / "r.nnw").layers.size());
  CHECK(cli({"prune", "--in", d / "r.nnw", "--at", "ghost", "--out", d / "x.nnw"}).code == 1);
}

TEST_CASE("extract and evaluate") {
  TempDir d("extract");
  REQUIRE(cli({"synth", "--arch", "plain", "--depth", "2", "--channels", "5", "--out", d / "m.nnw", "--images", "2",
               "--image-dir", d / "img", "--size", "12"})
              .code == 0);
  const auto e = cli({"extract", "--in", d / "m.nnw", "--layer", "c2_relu", d / "img/img0000.ppm", d / "img/img0001.ppm",
                      "--synthetic", "3", "--size", "10", "--rotations", "0,90", "--scales", "1,0.5", "--rois", "2",
                      "--out", d / "desc.txt"});
  REQUIRE(e.code == 0);
  const auto db = parse_descriptors(slurp(d / "desc.txt"));
  CHECK(db.size() == 5);
  CHECK(db.dim() == 5);
  put(d / "rel.txt", "0: 1\n2: 3 4\n");
  const auto v = cli({"evaluate", "--descriptors", d / "desc.txt", "--relevance", d / "rel.txt"});
  REQUIRE(v.code == 0);
  CHECK(v.out.find("queries 2") != std::string::npos);
  CHECK(v.out.find("mAP ") != std::string::npos);
  CHECK(v.out.find("4xRecall@4 ") != std::string::npos);
}

TEST_CASE("tradeoff CSV") {
  TempDir d("tradeoff");
  REQUIRE(cli({"synth", "--arch", "plain", "--depth", "5", "--channels", "6", "--out", d / "m.nnw"}).code == 0);
  const std::vector<std::string> args{"tradeoff", "--in", d / "m.nnw", "--bits", "3,4,5,8", "--cuts",
                                      "c2_relu,c3_relu,c4_relu,c5_relu", "--images", "3", "--size", "10",
                                      "--rotations", "0,90,180,270", "--scales", "1,0.75", "--rois", "2",
                                      "--out-dir", d / "grid"};
  const auto r = cli(args);
  REQUIRE(r.code == 0);
  std::istringstream in(r.out);
  std::string line;
  std::getline(in, line);
  CHECK(line == "bits,cut,bytes,log10_bytes,mean_cosine,mean_l2_gap");
  std::vector<TradeoffRow> rows;
  while (std::getline(in, line)) {
    TradeoffRow row;
    std::istringstream ls(line);
    std::string cell;
    std::getline(ls, cell, ',');
    row.bits = std::stoi(cell);
    std::getline(ls, row.cut, ',');
    std::getline(ls, cell, ',');
    row.bytes = std::stoull(cell);
    rows.push_back(row);
  }
  REQUIRE(rows.size() == 16);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto file = d / ("grid/b" + std::to_string(rows[i].bits) + "_" + rows[i].cut + ".nnz");
    REQUIRE(fs::exists(file));
    CHECK(size_report(load_compressed(file)).total == rows[i].bytes);
    CHECK(fs::file_size(file) == rows[i].bytes);
    if (i % 4 != 0) CHECK(rows[i].bytes > rows[i - 1].bytes);
  }
  // Same args and seed give identical output.
  CHECK(cli(args).out == r.out);
}

TEST_CASE("exit codes") {
  TempDir d("codes");
  CHECK(cli({}).code == 2);
  CHECK(cli({"--help"}).code == 0);
  CHECK(cli({"compress", "--bogus"}).code == 2);
  CHECK(cli({"frobnicate"}).code == 2);
  CHECK(cli({"inspect", d / "missing.nnw"}).code == 2);
  put(d / "junk.nnw", "XXXXjunk");
  const auto r = cli({"inspect", d / "junk.nnw"});
  CHECK(r.code == 1);
  CHECK(r.err.find("bad magic") != std::string::npos);
  REQUIRE(cli({"synth", "--arch", "plain", "--depth", "2", "--out", d / "m.nnw"}).code == 0);
  put(d / "bad.cfg", "layer.ghost = scalar:4\n");
  const auto c = cli({"compress", "--in", d / "m.nnw", "--spec", d / "bad.cfg", "--out", d / "m.nnz"});
  CHECK(c.code == 1);
  CHECK(c.err.find("ghost") != std::string::npos);
}

TEST_CASE("corrupt container errors name the record") {
  TempDir d("corrupt");
  REQUIRE(cli({"synth", "--arch", "plain", "--depth", "2", "--out", d / "m.nnw"}).code == 0);
  REQUIRE(cli({"compress", "--in", d / "m.nnw", "--bits", "4", "--out", d / "m.nnz"}).code == 0);
  auto b = read_file(d / "m.nnz");
  b[b.size() - 6] ^= 0xFF;
  write_file(d / "m.nnz", b);
  const auto r = cli({"decompress", "--in", d / "m.nnz", "--out", d / "x.nnw"});
  CHECK(r.code == 1);
  CHECK(r.err.find("layer '") != std::string::npos);
}

TEST_CASE("seeded outputs are byte-identical") {
  TempDir d("seed");
  for (const char* tag : {"a", "b"}) {
    REQUIRE(cli({"--seed", "5", "synth", "--arch", "plain", "--depth", "2", "--out", d / (std::string(tag) + ".nnw")}).code == 0);
    REQUIRE(cli({"compress", "--seed", "11", "--in", d / "a.nnw", "--bits", "3", "--coding", "vlc", "--out",
                 d / (std::string(tag) + ".nnz")})
                .code == 0);
  }
  CHECK(read_file(d / "a.nnw") == read_file(d / "b.nnw"));
  CHECK(read_file(d / "a.nnz") == read_file(d / "b.nnz"));
  CHECK(load_compressed(d / "a.nnz").config.seed == 11);
  REQUIRE(cli({"--seed", "6", "synth", "--arch", "plain", "--depth", "2", "--out", d / "c.nnw"}).code == 0);
  CHECK(read_file(d / "a.nnw") != read_file(d / "c.nnw"));
}

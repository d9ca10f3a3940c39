#include "scalarprobe/embedding_store.hpp"
#include "support/synthetic.hpp"

#include <doctest.h>
#include <json.hpp>

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

namespace fs = std::filesystem;

namespace {

int run(const std::string& args) {
  std::string cmd = std::string(SCALARPROBE_CLI) + " " + args + " 2>/dev/null";
  int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct Fixture {
  fs::path dir = synthetic::temp_dir("cli");
  fs::path data = dir / "records.tsv";
  fs::path emb = dir / "emb.txt";

  Fixture() {
    auto ds = synthetic::linear(60, 8, 0.2, 5);
    synthetic::write_records(ds.records, data);
    std::ofstream out(emb);
    scalarprobe::save_table(ds.table, out);
  }
  ~Fixture() { fs::remove_all(dir); }

  std::string p(const std::string& name) const { return (dir / name).string(); }
};

}  // namespace

TEST_CASE("canonicalize writes text and stats") {
  Fixture f;
  {
    std::ofstream in(f.p("in.txt"));
    in << "A 12.5 kg bag costs 1,299 dollars.\n";
  }
  CHECK(run("canonicalize --in " + f.p("in.txt") + " --out " + f.p("out.txt") + " --stats " + f.p("s.json")) == 0);
  CHECK(slurp(f.p("out.txt")) == "A 125[EXP]1 kg bag costs 1299[EXP]3 dollars.\n");
  auto stats = nlohmann::json::parse(slurp(f.p("s.json")));
  CHECK(stats.at("literals_rewritten") == 2);
  CHECK(stats.at("literals_skipped") == 0);
  CHECK(stats.at("bytes_in") == 35);
  CHECK(stats.contains("bytes_out"));
  CHECK(run("canonicalize --in " + f.p("nope.txt") + " --out " + f.p("o.txt")) == 2);
}

TEST_CASE("distributions, train, evaluate and transfer") {
  Fixture f;
  const std::string data = " --data " + f.data.string() + " --attribute mass --min-count 10";
  CHECK(run("distributions" + data + " --out " + f.p("d.json")) == 0);
  auto dists = nlohmann::json::parse(slurp(f.p("d.json")));
  CHECK(dists.size() == 60);
  CHECK(dists[0].at("probs").size() == 12);

  CHECK(run("train" + data + " --embeddings " + f.emb.string() + " --probe mcc --out " + f.p("mcc.json")) == 0);
  CHECK(nlohmann::json::parse(slurp(f.p("mcc.json"))).at("kind") == "mcc");
  CHECK(run("train" + data + " --embeddings " + f.emb.string() + " --probe rgr --out " + f.p("rgr.json")) == 0);

  CHECK(run("evaluate" + data + " --embeddings " + f.emb.string() + " --probe mcc --folds 5 --seed 1 --out " +
            f.p("r.csv")) == 0);
  auto csv = slurp(f.p("r.csv"));
  CHECK(csv.find("attribute,encoder,probe,subset,n,accuracy,mse,emd,emd_unnormalized\n") != std::string::npos);
  CHECK(csv.find("mass,synthetic-linear,mcc,all,60,") != std::string::npos);
  CHECK(run("evaluate" + data + " --embeddings " + f.emb.string() + " --probe rgr --format json --out " +
            f.p("r.json")) == 0);
  CHECK(nlohmann::json::parse(slurp(f.p("r.json"))).contains("rows"));

  {
    std::ofstream pairs(f.p("pairs.tsv"));
    pairs << "obj00000\tobj00001\tmass\tbigger\n";
  }
  CHECK(run("transfer relative --pairs " + f.p("pairs.tsv") + " --probe-file " + f.p("rgr.json") +
            " --embeddings " + f.emb.string() + " --attribute mass > " + f.p("rel.json")) == 0);
  CHECK(nlohmann::json::parse(slurp(f.p("rel.json"))).at("evaluated") == 1);

  CHECK(run("upper-bound" + data) == 0);
}

TEST_CASE("invalid input exits with status 2") {
  Fixture f;
  CHECK(run("") == 2);
  CHECK(run("evaluate --data " + f.data.string() + " --attribute mass") == 2);  // missing required options
  CHECK(run("train --data " + f.data.string() + " --attribute volume --embeddings " + f.emb.string() +
            " --probe mcc --out " + f.p("x.json")) == 2);
  {
    std::ofstream bad(f.p("bad.txt"));
    bad << "#dim=3\tencoder=x\nfoo\t1 2\n";
  }
  CHECK(run("train --data " + f.data.string() + " --attribute mass --min-count 10 --embeddings " + f.p("bad.txt") +
            " --probe mcc --out " + f.p("x.json")) == 2);
  CHECK(run("transfer price --products " + f.p("missing.json") + " --probe-file " + f.p("x.json") +
            " --embeddings " + f.emb.string()) == 2);
}

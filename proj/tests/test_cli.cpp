#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "kbie/config.hpp"
#include "kbie/errors.hpp"

using namespace kbie;
namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

namespace {

// the built binary, injected through the test environment
std::string cli() {
    const char* p = std::getenv("KBIE_CLI");
    REQUIRE(p != nullptr);
    return p;
}

struct RunResult {
    int exit_code = -1;
    std::string stdout_text;
};

RunResult run(const std::string& args) {
    fs::path out = fs::temp_directory_path() / "kbie_cli_out.txt";
    std::string cmd = cli() + " " + args + " > " + out.string() + " 2> /dev/null";
    int rc = std::system(cmd.c_str());
    RunResult r;
    r.exit_code = WEXITSTATUS(rc);
    std::ifstream in(out);
    std::stringstream ss;
    ss << in.rdbuf();
    r.stdout_text = ss.str();
    fs::remove(out);
    return r;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

struct Workdir {
    fs::path dir;
    explicit Workdir(const std::string& name) : dir(fs::temp_directory_path() / name) {
        fs::remove_all(dir);
        fs::create_directories(dir);
    }
    ~Workdir() { fs::remove_all(dir); }
    std::string operator/(const std::string& leaf) const { return (dir / leaf).string(); }
};

}  // namespace

TEST_CASE("gen-synthetic writes the full resource set and is seed-deterministic") {
    Workdir wd("kbie_cli_gen");
    auto r = run("gen-synthetic --preset memorizable --seed 5 --out " + (wd / "a"));
    CHECK(r.exit_code == 0);
    for (const char* f : {"train.jsonl", "dev.jsonl", "test.jsonl", "hypercorpus.jsonl", "triples.tsv",
                          "dict.jsonl", "vocab.json"}) {
        CHECK(fs::exists(wd.dir / "a" / f));
    }
    auto r2 = run("gen-synthetic --preset memorizable --seed 5 --out " + (wd / "b"));
    CHECK(r2.exit_code == 0);
    CHECK(slurp(wd.dir / "a" / "train.jsonl") == slurp(wd.dir / "b" / "train.jsonl"));
    CHECK(slurp(wd.dir / "a" / "dict.jsonl") == slurp(wd.dir / "b" / "dict.jsonl"));
}

TEST_CASE("build-dict succeeds on valid input and respects the cap") {
    Workdir wd("kbie_cli_dict");
    REQUIRE(run("gen-synthetic --preset memorizable --seed 1 --out " + (wd / "d")).exit_code == 0);
    auto ok = run("build-dict --hypercorpus " + (wd / "d/hypercorpus.jsonl") + " --out " + (wd / "dict.jsonl"));
    CHECK(ok.exit_code == 0);
    CHECK(fs::exists(wd.dir / "dict.jsonl"));

    auto capped = run("build-dict --hypercorpus " + (wd / "d/hypercorpus.jsonl") + " --cap 1 --out " +
                      (wd / "dict1.jsonl"));
    CHECK(capped.exit_code == 0);
    auto dict = CandidateDictionary::load(wd / "dict1.jsonl");
    for (const auto& [surface, list] : dict.entries()) CHECK(list.size() <= 1);
}

TEST_CASE("missing input paths exit with code 2") {
    CHECK(run("build-dict --hypercorpus /nonexistent/h.jsonl --out /tmp/x.jsonl").exit_code == 2);
    CHECK(run("evaluate --model /nonexistent/model --corpus /nonexistent/c.jsonl").exit_code == 2);
    CHECK(run("train --config /nonexistent/cfg.json").exit_code == 2);
    CHECK(run("train-embeddings --source text --seed 1 --out /tmp/x.bin").exit_code == 2);
    CHECK(run("nonsense-command").exit_code == 2);
}

TEST_CASE("train-embeddings is byte-deterministic per seed") {
    Workdir wd("kbie_cli_emb");
    REQUIRE(run("gen-synthetic --preset memorizable --seed 2 --out " + (wd / "d")).exit_code == 0);
    std::string base = "train-embeddings --source graph --triples " + (wd / "d/triples.tsv") +
                       " --dim 8 --epochs 10 --lr 0.2 --seed 4 --out ";
    CHECK(run(base + (wd / "g1.bin")).exit_code == 0);
    CHECK(run(base + (wd / "g2.bin")).exit_code == 0);
    CHECK(slurp(wd.dir / "g1.bin") == slurp(wd.dir / "g2.bin"));

    auto text = run("train-embeddings --source text --hypercorpus " + (wd / "d/hypercorpus.jsonl") +
                    " --dim 8 --epochs 2 --seed 4 --out " + (wd / "t1.bin"));
    CHECK(text.exit_code == 0);
    auto store = EntityEmbeddingStore::load(wd / "t1.bin");
    CHECK(store.source() == KbSource::KbText);
}

TEST_CASE("invalid scheme strings exit with code 2 and name the alternatives") {
    Workdir wd("kbie_cli_scheme");
    REQUIRE(run("gen-synthetic --preset memorizable --seed 3 --out " + (wd / "d")).exit_code == 0);
    ojson cfg;
    cfg["train"] = wd / "d/train.jsonl";
    cfg["kb_source"] = "kb-text";
    cfg["scheme"] = "bogus";
    cfg["dictionary"] = wd / "d/dict.jsonl";
    cfg["store_text"] = wd / "missing.bin";
    cfg["seed"] = 1;
    cfg["epochs"] = 1;
    cfg["out_dir"] = wd / "run";
    std::ofstream(wd / "cfg.json") << cfg.dump();
    CHECK(run("train --config " + (wd / "cfg.json")).exit_code == 2);
}

TEST_CASE("baseline config with a scheme set is rejected") {
    RunConfig cfg;
    cfg.kb_source = "none";
    cfg.scheme = "uniform";
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("train, evaluate and predict round-trip through the CLI") {
    Workdir wd("kbie_cli_train");
    REQUIRE(run("gen-synthetic --preset memorizable --seed 6 --out " + (wd / "d")).exit_code == 0);
    ojson cfg;
    cfg["train"] = wd / "d/train.jsonl";
    cfg["test"] = wd / "d/test.jsonl";
    cfg["kb_source"] = "none";
    cfg["seed"] = 11;
    cfg["epochs"] = 8;
    cfg["encoder"] = {{"word_dim", 10}, {"char_dim", 4}, {"char_filters", 4}, {"hidden", 8}};
    cfg["spans"] = {{"max_width", 1}, {"keep_ratio", 1.0}, {"width_dim", 3}};
    cfg["heads"] = {{"hidden", 10}};
    cfg["optimizer"] = {{"lr", 0.005}};
    cfg["out_dir"] = wd / "run";
    std::ofstream(wd / "cfg.json") << cfg.dump();

    auto tr = run("train --config " + (wd / "cfg.json"));
    CHECK(tr.exit_code == 0);
    CHECK(fs::exists(wd.dir / "run" / "model.ckpt"));
    CHECK(fs::exists(wd.dir / "run" / "train_log.jsonl"));

    auto ev = run("evaluate --model " + (wd / "run") + " --corpus " + (wd / "d/train.jsonl") + " --out " +
                  (wd / "metrics.json"));
    CHECK(ev.exit_code == 0);
    auto metrics = ojson::parse(slurp(wd.dir / "metrics.json"));
    CHECK(metrics.contains("coref_avg"));
    CHECK(metrics.contains("ner_hard"));

    // two evaluations of the same checkpoint are byte-identical
    auto ev2 = run("evaluate --model " + (wd / "run") + " --corpus " + (wd / "d/train.jsonl") + " --out " +
                   (wd / "metrics2.json"));
    CHECK(ev2.exit_code == 0);
    CHECK(slurp(wd.dir / "metrics.json") == slurp(wd.dir / "metrics2.json"));

    auto pr = run("predict --model " + (wd / "run") + " --corpus " + (wd / "d/test.jsonl") + " --out " +
                  (wd / "preds.jsonl"));
    CHECK(pr.exit_code == 0);
    CHECK(fs::exists(wd.dir / "preds.jsonl"));

    // the prediction file is valid scorer input
    auto ev3 = run("evaluate --predictions " + (wd / "preds.jsonl") + " --corpus " + (wd / "d/test.jsonl"));
    CHECK(ev3.exit_code == 0);

    // an empty corpus produces an empty weight report, exit 0
    std::ofstream(wd / "empty.jsonl") << "";
    auto rw = run("report-weights --model " + (wd / "run") + " --corpus " + (wd / "empty.jsonl") + " --out " +
                  (wd / "w.txt"));
    CHECK(rw.exit_code == 0);
    CHECK(slurp(wd.dir / "w.txt").empty());
}

TEST_CASE("sweep emits one row per configuration with std only for multiple seeds") {
    Workdir wd("kbie_cli_sweep");
    REQUIRE(run("gen-synthetic --preset memorizable --seed 4 --out " + (wd / "d")).exit_code == 0);
    ojson cfg;
    cfg["train"] = wd / "d/train.jsonl";
    cfg["test"] = wd / "d/test.jsonl";
    cfg["kb_source"] = "none";
    cfg["seed"] = 1;
    cfg["epochs"] = 2;
    cfg["encoder"] = {{"word_dim", 6}, {"char_dim", 0}, {"hidden", 6}};
    cfg["spans"] = {{"max_width", 1}, {"keep_ratio", 1.0}, {"width_dim", 2}};
    cfg["heads"] = {{"hidden", 6}};
    std::ofstream(wd / "cfg.json") << cfg.dump();

    auto one = run("sweep --config " + (wd / "cfg.json") + " --sources none --seeds 7 --out " + (wd / "s1"));
    CHECK(one.exit_code == 0);
    CHECK(one.stdout_text.find("Baseline") != std::string::npos);
    CHECK(one.stdout_text.find("+-") == std::string::npos);  // single seed: no std

    auto two = run("sweep --config " + (wd / "cfg.json") + " --sources none --seeds 7,8");
    CHECK(two.exit_code == 0);
    CHECK(two.stdout_text.find("+-") != std::string::npos);  // sample std over seeds

    auto results = ojson::parse(slurp(wd.dir / "s1" / "results.json"));
    REQUIRE(results.size() == 1);
    CHECK(results[0]["kb_source"] == "none");
}

TEST_CASE("gold-as-predictions scores one on every metric") {
    Workdir wd("kbie_cli_gold");
    REQUIRE(run("gen-synthetic --preset memorizable --seed 8 --out " + (wd / "d")).exit_code == 0);
    auto ev = run("evaluate --predictions " + (wd / "d/train.jsonl") + " --corpus " + (wd / "d/train.jsonl"));
    CHECK(ev.exit_code == 0);
    auto metrics = ojson::parse(ev.stdout_text);
    CHECK(metrics["coref_avg"].get<double>() == doctest::Approx(1.0));
    CHECK(metrics["ner_hard"]["f1"].get<double>() == doctest::Approx(1.0));
    CHECK(metrics["re_hard"]["f1"].get<double>() == doctest::Approx(1.0));
    CHECK(!metrics.contains("el_top1"));  // prediction files carry no weights
}

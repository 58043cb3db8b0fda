#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "kbie/config.hpp"
#include "kbie/errors.hpp"
#include "kbie/heads.hpp"
#include "kbie/kbembed.hpp"
#include "kbie/kbstore.hpp"
#include "kbie/synthetic.hpp"

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;
using namespace kbie;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInput = 2;
constexpr int kExitNumerics = 3;

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    out << text;
}

Corpus load_corpus_for(const RunConfig& cfg, const std::string& path) {
    if (cfg.vocab_path.empty()) return load_corpus(path);
    LabelVocab vocab = load_vocab(cfg.vocab_path);
    return load_corpus(path, &vocab);
}

std::string epoch_log_line(const EpochLog& log) {
    ojson j;
    j["epoch"] = log.epoch;
    j["l_ner"] = log.losses.ner;
    j["l_coref"] = log.losses.coref;
    j["l_re"] = log.losses.re;
    j["l_total"] = log.losses.total;
    j["dropped_gold_spans"] = log.dropped_gold_spans;
    j["unaligned_gold"] = log.unaligned_gold;
    if (log.dev) j["dev"] = metrics_to_json(*log.dev);
    return j.dump();
}

struct TrainedRun {
    ModelBundle bundle;
    TrainResult result;
};

TrainedRun run_training(const RunConfig& cfg) {
    if (cfg.train_path.empty()) throw ConfigError("config: train corpus path required");
    Corpus train = load_corpus_for(cfg, cfg.train_path);
    Corpus dev;
    bool has_dev = !cfg.dev_path.empty();
    if (has_dev) dev = load_corpus(cfg.dev_path, &train.vocab);

    TrainedRun run{build_model(cfg, train), {}};
    TrainConfig tc;
    tc.epochs = cfg.epochs;
    tc.adam = cfg.adam;
    tc.eval_every = cfg.eval_every;
    tc.seed = cfg.seed;
    run.result = train_model(*run.bundle.model, train, has_dev ? &dev : nullptr, tc);
    return run;
}

int cmd_gen_synthetic(const std::string& preset, const std::string& config_path, uint64_t seed,
                      const std::string& out_dir) {
    GeneratorConfig cfg;
    if (!config_path.empty()) {
        cfg = GeneratorConfig::from_json_file(config_path);
    } else if (preset == "memorizable") {
        cfg = memorizable_config();
    } else if (preset == "kb-separable") {
        cfg = kb_separable_config();
    } else if (preset == "el-misleading") {
        cfg = el_misleading_config();
    } else {
        throw ConfigError("unknown preset '" + preset + "' (expected memorizable, kb-separable or el-misleading)");
    }
    SyntheticData data = generate_synthetic(cfg, seed);
    fs::create_directories(out_dir);
    save_corpus(out_dir + "/train.jsonl", data.train);
    save_corpus(out_dir + "/dev.jsonl", data.dev);
    save_corpus(out_dir + "/test.jsonl", data.test);
    save_vocab(out_dir + "/vocab.json", data.train.vocab);
    data.hypercorpus.save(out_dir + "/hypercorpus.jsonl");
    data.triples.save_tsv(out_dir + "/triples.tsv");
    data.dictionary.save(out_dir + "/dict.jsonl");
    std::cout << "wrote " << data.train.docs.size() << "/" << data.dev.docs.size() << "/"
              << data.test.docs.size() << " train/dev/test documents to " << out_dir << "\n";
    return kExitOk;
}

int cmd_build_dict(const std::string& hypercorpus_path, const std::string& out_path, int cap) {
    HyperCorpus corpus = HyperCorpus::load(hypercorpus_path);
    CandidateDictionary dict = CandidateDictionary::build(corpus.anchor_stream(), cap);
    dict.save(out_path);
    std::cout << "wrote " << dict.size() << " surfaces to " << out_path << "\n";
    return kExitOk;
}

int cmd_train_embeddings(const std::string& source, const std::string& hypercorpus_path,
                         const std::string& triples_path, int dim, int window, int negatives, int epochs,
                         double lr, uint64_t seed, const std::string& out_path) {
    if (source == "text") {
        if (hypercorpus_path.empty()) throw ConfigError("--source text requires --hypercorpus");
        KbTextConfig cfg;
        cfg.dim = dim;
        cfg.window = window;
        cfg.negatives = negatives;
        cfg.epochs = epochs;
        cfg.lr = lr;
        KbTextResult result = train_kb_text(HyperCorpus::load(hypercorpus_path), cfg, seed);
        result.store.save(out_path);
        std::cout << "kb-text store: " << result.store.size() << " entities, dim " << result.store.dim()
                  << ", final loss " << result.epoch_loss.back() << "\n";
        return kExitOk;
    }
    if (source == "graph") {
        if (triples_path.empty()) throw ConfigError("--source graph requires --triples");
        KbGraphConfig cfg;
        cfg.dim = dim;
        cfg.epochs = epochs;
        cfg.lr = lr;
        KbGraphResult result = train_kb_graph(TripleSet::load_tsv(triples_path), cfg, seed);
        result.store.save(out_path);
        std::cout << "kb-graph store: " << result.store.size() << " entities, dim " << result.store.dim()
                  << ", final loss " << result.epoch_loss.back() << "\n";
        return kExitOk;
    }
    throw ConfigError("unknown --source '" + source + "' (expected text or graph)");
}

int cmd_train(const RunConfig& cfg) {
    if (cfg.out_dir.empty()) throw ConfigError("config: out_dir required for training");
    TrainedRun run = run_training(cfg);
    fs::create_directories(cfg.out_dir);
    save_model(cfg.out_dir, run.bundle);
    write_text(cfg.out_dir + "/config.json", run.bundle.cfg.to_json().dump(2) + "\n");
    std::ostringstream log;
    for (const auto& e : run.result.log) log << epoch_log_line(e) << "\n";
    write_text(cfg.out_dir + "/train_log.jsonl", log.str());
    const auto& last = run.result.log.back();
    std::cout << "trained " << cfg.epochs << " epochs; final losses ner=" << last.losses.ner
              << " coref=" << last.losses.coref << " re=" << last.losses.re << "\n"
              << "model written to " << cfg.out_dir << "\n";
    return kExitOk;
}

int cmd_evaluate(const std::string& model_dir, const std::string& predictions_path,
                 const std::string& corpus_path, const std::string& out_path) {
    MetricsSummary summary;
    if (!predictions_path.empty()) {
        Corpus gold = load_corpus(corpus_path);
        Corpus preds = load_corpus(predictions_path, &gold.vocab);
        summary = evaluate_predictions(gold, preds.docs);
    } else {
        ModelBundle bundle = load_model(model_dir);
        Corpus gold = load_corpus(corpus_path, &bundle.vocab);
        summary = evaluate_model(*bundle.model, gold);
    }
    std::string json_text = metrics_to_json(summary).dump(2);
    std::cout << json_text << "\n";
    std::cerr << metrics_table(summary);
    if (!out_path.empty()) write_text(out_path, json_text + "\n");
    return kExitOk;
}

int cmd_predict(const std::string& model_dir, const std::string& corpus_path, const std::string& out_path) {
    ModelBundle bundle = load_model(model_dir);
    Corpus corpus = load_corpus(corpus_path, &bundle.vocab);
    std::ostringstream out;
    for (const auto& doc : corpus.docs) {
        DocPrediction pred = bundle.model->predict(doc);
        out << doc_to_json_line(pred.doc) << "\n";
    }
    write_text(out_path, out.str());
    std::cout << "wrote predictions for " << corpus.docs.size() << " documents to " << out_path << "\n";
    return kExitOk;
}

int cmd_report_weights(const std::string& model_dir, const std::string& corpus_path,
                       const std::string& out_path) {
    ModelBundle bundle = load_model(model_dir);
    Corpus corpus = load_corpus(corpus_path, &bundle.vocab);
    std::string report;
    for (const auto& doc : corpus.docs) report += bundle.model->predict(doc).weight_report;
    write_text(out_path, report);
    std::cout << "wrote weight report to " << out_path << "\n";
    return kExitOk;
}

struct SweepCell {
    std::string source;
    std::string scheme;  // empty for Baseline
    std::vector<double> coref, ner, re;
};

int cmd_sweep(const RunConfig& base, const std::vector<std::string>& sources,
              const std::vector<std::string>& schemes, const std::vector<uint64_t>& seeds,
              const std::string& out_dir) {
    if (base.test_path.empty()) throw ConfigError("sweep: config needs a test corpus");
    std::vector<SweepCell> cells;
    for (const auto& source : sources) {
        std::vector<std::string> cell_schemes = source == "none" ? std::vector<std::string>{""} : schemes;
        for (const auto& scheme : cell_schemes) {
            SweepCell cell;
            cell.source = source;
            cell.scheme = scheme;
            for (uint64_t seed : seeds) {
                RunConfig cfg = base;
                cfg.kb_source = source;
                cfg.scheme = scheme;
                cfg.seed = seed;
                cfg.validate();
                TrainedRun run = run_training(cfg);
                Corpus test = load_corpus(cfg.test_path, &run.bundle.vocab);
                MetricsSummary m = evaluate_model(*run.bundle.model, test);
                cell.coref.push_back(m.coref_avg);
                cell.ner.push_back(m.ner.f1);
                cell.re.push_back(m.re.f1);
                std::cerr << "sweep: " << (source == "none" ? "baseline" : source + "+" + scheme) << " seed "
                          << seed << " coref=" << m.coref_avg << " ner=" << m.ner.f1 << " re=" << m.re.f1
                          << "\n";
            }
            cells.push_back(std::move(cell));
        }
    }

    auto mean = [](const std::vector<double>& v) {
        double s = 0;
        for (double x : v) s += x;
        return s / static_cast<double>(v.size());
    };
    auto stdev = [&](const std::vector<double>& v) {
        if (v.size() < 2) return 0.0;
        double m = mean(v), s = 0;
        for (double x : v) s += (x - m) * (x - m);
        return std::sqrt(s / static_cast<double>(v.size() - 1));
    };
    auto fmt = [&](const std::vector<double>& v) {
        std::ostringstream os;
        os.precision(4);
        os << std::fixed << mean(v);
        if (v.size() >= 2) os << " +- " << stdev(v);
        return os.str();
    };

    std::ostringstream table;
    table << "KB Source\tSetup\tCoref\tNER\tRE\n";
    ojson results = ojson::array();
    for (const auto& cell : cells) {
        std::string setup = cell.scheme.empty() ? "Baseline" : cell.scheme;
        std::string source = cell.scheme.empty() ? "--" : cell.source;
        table << source << "\t" << setup << "\t" << fmt(cell.coref) << "\t" << fmt(cell.ner) << "\t"
              << fmt(cell.re) << "\n";
        ojson row;
        row["kb_source"] = cell.source;
        row["scheme"] = cell.scheme;
        row["coref"] = cell.coref;
        row["ner"] = cell.ner;
        row["re"] = cell.re;
        results.push_back(std::move(row));
    }
    std::cout << table.str();
    if (!out_dir.empty()) {
        fs::create_directories(out_dir);
        write_text(out_dir + "/table.txt", table.str());
        write_text(out_dir + "/results.json", results.dump(2) + "\n");
    }
    return kExitOk;
}

std::vector<std::string> split_csv(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"joint document-level information extraction with KB entity injection"};
    app.require_subcommand(1);

    // gen-synthetic
    auto* gen = app.add_subcommand("gen-synthetic", "generate a synthetic corpus with its KB resources");
    std::string gen_preset = "memorizable", gen_config, gen_out = "data";
    uint64_t gen_seed = 1;
    gen->add_option("--preset", gen_preset, "memorizable | kb-separable | el-misleading");
    gen->add_option("--config", gen_config, "generator config JSON (overrides --preset)");
    gen->add_option("--seed", gen_seed, "generator seed")->required();
    gen->add_option("--out", gen_out, "output directory");

    // build-dict
    auto* bd = app.add_subcommand("build-dict", "build the candidate dictionary from a hyperlinked corpus");
    std::string bd_hyper, bd_out = "dict.jsonl";
    int bd_cap = CandidateDictionary::kDefaultCap;
    bd->add_option("--hypercorpus", bd_hyper, "hypercorpus JSONL")->required();
    bd->add_option("--out", bd_out, "dictionary output path");
    bd->add_option("--cap", bd_cap, "max candidates per surface");

    // train-embeddings
    auto* te = app.add_subcommand("train-embeddings", "train kb-text or kb-graph entity embeddings");
    std::string te_source, te_hyper, te_triples, te_out = "store.bin";
    int te_dim = 16, te_window = 3, te_negatives = 4, te_epochs = 5;
    double te_lr = 0.05;
    uint64_t te_seed = 1;
    te->add_option("--source", te_source, "text | graph")->required();
    te->add_option("--hypercorpus", te_hyper, "hypercorpus JSONL (text source)");
    te->add_option("--triples", te_triples, "triples TSV (graph source)");
    te->add_option("--dim", te_dim);
    te->add_option("--window", te_window);
    te->add_option("--negatives", te_negatives);
    te->add_option("--epochs", te_epochs);
    te->add_option("--lr", te_lr);
    te->add_option("--seed", te_seed)->required();
    te->add_option("--out", te_out, "store output path");

    // train
    auto* tr = app.add_subcommand("train", "train the joint IE model");
    std::string tr_config;
    uint64_t tr_seed = 0;
    int tr_epochs = -1;
    std::string tr_out;
    tr->add_option("--config", tr_config, "run config JSON")->required();
    tr->add_option("--seed", tr_seed, "override config seed");
    tr->add_option("--epochs", tr_epochs, "override config epochs");
    tr->add_option("--out", tr_out, "override config out_dir");

    // evaluate
    auto* ev = app.add_subcommand("evaluate", "score a model or a prediction file against gold");
    std::string ev_model, ev_preds, ev_corpus, ev_out;
    ev->add_option("--model", ev_model, "trained model directory");
    ev->add_option("--predictions", ev_preds, "prediction JSONL (instead of --model)");
    ev->add_option("--corpus", ev_corpus, "gold corpus JSONL")->required();
    ev->add_option("--out", ev_out, "metrics JSON output path");

    // predict
    auto* pr = app.add_subcommand("predict", "write entity-centric predictions for a corpus");
    std::string pr_model, pr_corpus, pr_out = "predictions.jsonl";
    pr->add_option("--model", pr_model, "trained model directory")->required();
    pr->add_option("--corpus", pr_corpus, "corpus JSONL")->required();
    pr->add_option("--out", pr_out, "prediction output path");

    // report-weights
    auto* rw = app.add_subcommand("report-weights", "dump candidate weights per span and scheme");
    std::string rw_model, rw_corpus, rw_out = "weights.txt";
    rw->add_option("--model", rw_model, "trained model directory")->required();
    rw->add_option("--corpus", rw_corpus, "corpus JSONL")->required();
    rw->add_option("--out", rw_out, "report output path");

    // sweep
    auto* sw = app.add_subcommand("sweep", "train and evaluate a source x scheme x seed grid");
    std::string sw_config, sw_sources = "none,kb-text,kb-graph,both";
    std::string sw_schemes = "uniform,prior,attention,attprior", sw_seeds = "1", sw_out;
    sw->add_option("--config", sw_config, "base run config JSON")->required();
    sw->add_option("--sources", sw_sources, "comma-separated KB sources");
    sw->add_option("--schemes", sw_schemes, "comma-separated weighting schemes");
    sw->add_option("--seeds", sw_seeds, "comma-separated seeds");
    sw->add_option("--out", sw_out, "output directory for table.txt and results.json");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? kExitOk : kExitInput;
    }

    try {
        if (gen->parsed()) return cmd_gen_synthetic(gen_preset, gen_config, gen_seed, gen_out);
        if (bd->parsed()) return cmd_build_dict(bd_hyper, bd_out, bd_cap);
        if (te->parsed()) {
            return cmd_train_embeddings(te_source, te_hyper, te_triples, te_dim, te_window, te_negatives,
                                        te_epochs, te_lr, te_seed, te_out);
        }
        if (tr->parsed()) {
            RunConfig cfg = RunConfig::from_json_file(tr_config);
            if (tr->count("--seed")) cfg.seed = tr_seed;
            if (tr_epochs >= 0) cfg.epochs = tr_epochs;
            if (!tr_out.empty()) cfg.out_dir = tr_out;
            cfg.validate();
            return cmd_train(cfg);
        }
        if (ev->parsed()) {
            if (ev_model.empty() == ev_preds.empty()) {
                throw ConfigError("evaluate: exactly one of --model or --predictions is required");
            }
            return cmd_evaluate(ev_model, ev_preds, ev_corpus, ev_out);
        }
        if (pr->parsed()) return cmd_predict(pr_model, pr_corpus, pr_out);
        if (rw->parsed()) return cmd_report_weights(rw_model, rw_corpus, rw_out);
        if (sw->parsed()) {
            RunConfig base = RunConfig::from_json_file(sw_config);
            std::vector<uint64_t> seeds;
            for (const auto& s : split_csv(sw_seeds)) seeds.push_back(std::stoull(s));
            if (seeds.empty()) throw ConfigError("sweep: at least one seed required");
            return cmd_sweep(base, split_csv(sw_sources), split_csv(sw_schemes), seeds, sw_out);
        }
    } catch (const NumericsError& e) {
        std::cerr << "numerics error: " << e.what() << "\n";
        return kExitNumerics;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitInput;
    }
    return kExitOk;
}

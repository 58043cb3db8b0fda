#include "kbie/config.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "kbie/errors.hpp"

namespace kbie {

using ojson = nlohmann::ordered_json;

RunConfig RunConfig::from_json(const ojson& j) {
    RunConfig cfg;
    cfg.train_path = j.value("train", std::string());
    cfg.dev_path = j.value("dev", std::string());
    cfg.test_path = j.value("test", std::string());
    cfg.vocab_path = j.value("vocab", std::string());
    cfg.kb_source = j.value("kb_source", std::string("none"));
    cfg.scheme = j.value("scheme", std::string());
    cfg.dictionary_path = j.value("dictionary", std::string());
    cfg.store_text_path = j.value("store_text", std::string());
    cfg.store_graph_path = j.value("store_graph", std::string());
    cfg.pretrained_words_path = j.value("pretrained_words", std::string());

    if (j.contains("encoder")) {
        const auto& e = j.at("encoder");
        cfg.model.encoder.word_dim = e.value("word_dim", cfg.model.encoder.word_dim);
        cfg.model.encoder.char_dim = e.value("char_dim", cfg.model.encoder.char_dim);
        cfg.model.encoder.char_filters = e.value("char_filters", cfg.model.encoder.char_filters);
        cfg.model.encoder.char_widths = e.value("char_widths", cfg.model.encoder.char_widths);
        cfg.model.encoder.hidden = e.value("hidden", cfg.model.encoder.hidden);
        cfg.model.encoder.dropout = e.value("dropout", cfg.model.encoder.dropout);
        cfg.model.encoder.freeze_words = e.value("freeze_words", cfg.model.encoder.freeze_words);
    }
    if (j.contains("spans")) {
        const auto& s = j.at("spans");
        cfg.model.spans.max_width = s.value("max_width", cfg.model.spans.max_width);
        cfg.model.spans.keep_ratio = s.value("keep_ratio", cfg.model.spans.keep_ratio);
        cfg.model.spans.width_dim = s.value("width_dim", cfg.model.spans.width_dim);
    }
    if (j.contains("heads")) {
        const auto& h = j.at("heads");
        cfg.model.heads.hidden = h.value("hidden", cfg.model.heads.hidden);
        cfg.model.heads.w_ner = h.value("w_ner", cfg.model.heads.w_ner);
        cfg.model.heads.w_coref = h.value("w_coref", cfg.model.heads.w_coref);
        cfg.model.heads.w_re = h.value("w_re", cfg.model.heads.w_re);
    }
    if (j.contains("kb")) {
        const auto& k = j.at("kb");
        cfg.model.kb.attention_hidden = k.value("attention_hidden", cfg.model.kb.attention_hidden);
        cfg.model.kb.renormalize_priors = k.value("renormalize_priors", cfg.model.kb.renormalize_priors);
    }
    if (j.contains("optimizer")) {
        const auto& o = j.at("optimizer");
        cfg.adam.lr = o.value("lr", cfg.adam.lr);
        cfg.adam.beta1 = o.value("beta1", cfg.adam.beta1);
        cfg.adam.beta2 = o.value("beta2", cfg.adam.beta2);
        cfg.adam.eps = o.value("eps", cfg.adam.eps);
    }
    cfg.epochs = j.value("epochs", cfg.epochs);
    cfg.eval_every = j.value("eval_every", cfg.eval_every);
    if (!j.contains("seed")) throw ConfigError("config: seed is mandatory");
    cfg.seed = j.at("seed").get<uint64_t>();
    cfg.out_dir = j.value("out_dir", std::string());
    return cfg;
}

RunConfig RunConfig::from_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config " + path);
    ojson j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(path + ": " + e.what());
    }
    return from_json(j);
}

ojson RunConfig::to_json() const {
    ojson j;
    j["train"] = train_path;
    j["dev"] = dev_path;
    j["test"] = test_path;
    j["vocab"] = vocab_path;
    j["kb_source"] = kb_source;
    j["scheme"] = scheme;
    j["dictionary"] = dictionary_path;
    j["store_text"] = store_text_path;
    j["store_graph"] = store_graph_path;
    j["pretrained_words"] = pretrained_words_path;
    j["encoder"] = {{"word_dim", model.encoder.word_dim},
                    {"char_dim", model.encoder.char_dim},
                    {"char_filters", model.encoder.char_filters},
                    {"char_widths", model.encoder.char_widths},
                    {"hidden", model.encoder.hidden},
                    {"dropout", model.encoder.dropout},
                    {"freeze_words", model.encoder.freeze_words}};
    j["spans"] = {{"max_width", model.spans.max_width},
                  {"keep_ratio", model.spans.keep_ratio},
                  {"width_dim", model.spans.width_dim}};
    j["heads"] = {{"hidden", model.heads.hidden},
                  {"w_ner", model.heads.w_ner},
                  {"w_coref", model.heads.w_coref},
                  {"w_re", model.heads.w_re}};
    j["kb"] = {{"attention_hidden", model.kb.attention_hidden},
               {"renormalize_priors", model.kb.renormalize_priors}};
    j["optimizer"] = {{"lr", adam.lr}, {"beta1", adam.beta1}, {"beta2", adam.beta2}, {"eps", adam.eps}};
    j["epochs"] = epochs;
    j["eval_every"] = eval_every;
    j["seed"] = seed;
    j["out_dir"] = out_dir;
    return j;
}

void RunConfig::validate() const {
    if (kb_source == "none") {
        if (!scheme.empty()) {
            throw ConfigError("config: kb_source 'none' is the Baseline and admits no weighting scheme");
        }
    } else {
        kb_source_from_name(kb_source);  // throws on unknown
        if (scheme.empty()) throw ConfigError("config: kb_source '" + kb_source + "' requires a scheme");
        scheme_from_name(scheme);
        if (dictionary_path.empty()) throw ConfigError("config: KB run requires a dictionary path");
        if ((kb_source == "kb-text" || kb_source == "both") && store_text_path.empty()) {
            throw ConfigError("config: kb_source '" + kb_source + "' requires store_text");
        }
        if ((kb_source == "kb-graph" || kb_source == "both") && store_graph_path.empty()) {
            throw ConfigError("config: kb_source '" + kb_source + "' requires store_graph");
        }
    }
    if (epochs < 0) throw ConfigError("config: negative epochs");
}

namespace {

std::unique_ptr<EntityEmbeddingStore> load_store_for(const RunConfig& cfg) {
    if (cfg.is_baseline()) return nullptr;
    KbSource k = kb_source_from_name(cfg.kb_source);
    if (k == KbSource::KbText) {
        return std::make_unique<EntityEmbeddingStore>(EntityEmbeddingStore::load(cfg.store_text_path));
    }
    if (k == KbSource::KbGraph) {
        return std::make_unique<EntityEmbeddingStore>(EntityEmbeddingStore::load(cfg.store_graph_path));
    }
    auto text = EntityEmbeddingStore::load(cfg.store_text_path);
    auto graph = EntityEmbeddingStore::load(cfg.store_graph_path);
    return std::make_unique<EntityEmbeddingStore>(combine_stores(text, graph));
}

}  // namespace

ModelBundle build_model(const RunConfig& cfg, const Corpus& train) {
    cfg.validate();
    ModelBundle bundle;
    bundle.cfg = cfg;
    bundle.vocab = train.vocab;
    bundle.words = WordVocab::build(train.docs);
    bundle.chars = CharVocab::build(train.docs);
    if (!cfg.is_baseline()) {
        bundle.dict = std::make_unique<CandidateDictionary>(CandidateDictionary::load(cfg.dictionary_path));
        bundle.store = load_store_for(cfg);
        bundle.cfg.model.kb.scheme = scheme_from_name(cfg.scheme);
    }
    bundle.model = std::make_unique<JointModel>(bundle.cfg.model, bundle.vocab, bundle.words, bundle.chars,
                                                bundle.dict.get(), bundle.store.get(), cfg.seed);
    if (!cfg.pretrained_words_path.empty()) bundle.model->load_pretrained_words(cfg.pretrained_words_path);
    return bundle;
}

void save_model(const std::string& dir, const ModelBundle& bundle) {
    std::filesystem::create_directories(dir);
    ojson j;
    j["config"] = bundle.cfg.to_json();
    j["entity_types"] = bundle.vocab.entity_types;
    j["relation_types"] = bundle.vocab.relation_types;
    j["words"] = bundle.words.words;
    j["chars"] = bundle.chars.chars;
    std::ofstream out(dir + "/model.json");
    if (!out) throw IoError("cannot write " + dir + "/model.json");
    out << j.dump(2) << "\n";
    bundle.model->save_checkpoint(dir + "/model.ckpt");
}

ModelBundle load_model(const std::string& dir) {
    std::ifstream in(dir + "/model.json");
    if (!in) throw IoError("cannot open " + dir + "/model.json");
    ojson j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(dir + "/model.json: " + e.what());
    }
    ModelBundle bundle;
    bundle.cfg = RunConfig::from_json(j.at("config"));
    bundle.vocab.entity_types = j.at("entity_types").get<std::vector<std::string>>();
    bundle.vocab.relation_types = j.at("relation_types").get<std::vector<std::string>>();
    bundle.words.words = j.at("words").get<std::vector<std::string>>();
    for (size_t i = 0; i < bundle.words.words.size(); ++i) {
        bundle.words.index[bundle.words.words[i]] = static_cast<int>(i);
    }
    bundle.chars.chars = j.at("chars").get<std::vector<std::string>>();
    for (size_t i = 0; i < bundle.chars.chars.size(); ++i) {
        if (bundle.chars.chars[i].size() == 1) bundle.chars.index[bundle.chars.chars[i][0]] = static_cast<int>(i);
    }
    if (!bundle.cfg.is_baseline()) {
        bundle.dict = std::make_unique<CandidateDictionary>(CandidateDictionary::load(bundle.cfg.dictionary_path));
        bundle.store = load_store_for(bundle.cfg);
        bundle.cfg.model.kb.scheme = scheme_from_name(bundle.cfg.scheme);
    }
    bundle.model = std::make_unique<JointModel>(bundle.cfg.model, bundle.vocab, bundle.words, bundle.chars,
                                                bundle.dict.get(), bundle.store.get(), bundle.cfg.seed);
    bundle.model->load_checkpoint(dir + "/model.ckpt");
    return bundle;
}

ojson metrics_to_json(const MetricsSummary& s) {
    auto triple = [](const ScoreTriple& t) {
        return ojson{{"p", t.precision}, {"r", t.recall}, {"f1", t.f1}};
    };
    ojson j;
    j["muc"] = triple(s.muc_score);
    j["b3"] = triple(s.b3_score);
    j["ceafe"] = triple(s.ceafe_score);
    j["coref_avg"] = s.coref_avg;
    j["ner_hard"] = triple(s.ner);
    j["re_hard"] = triple(s.re);
    if (s.el_top1) j["el_top1"] = *s.el_top1;
    return j;
}

std::string metrics_table(const MetricsSummary& s) {
    std::ostringstream os;
    auto row = [&](const std::string& name, const ScoreTriple& t) {
        os << name << "\tP=" << t.precision << "\tR=" << t.recall << "\tF1=" << t.f1 << "\n";
    };
    row("muc", s.muc_score);
    row("b3", s.b3_score);
    row("ceafe", s.ceafe_score);
    os << "coref_avg\t" << s.coref_avg << "\n";
    row("ner_hard", s.ner);
    row("re_hard", s.re);
    if (s.el_top1) os << "el_top1\t" << *s.el_top1 << "\n";
    return os.str();
}

}  // namespace kbie

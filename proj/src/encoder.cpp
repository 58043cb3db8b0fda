#include "kbie/encoder.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "kbie/errors.hpp"
#include "kbie/nn.hpp"

namespace kbie {

WordVocab WordVocab::build(const std::vector<Document>& docs) {
    std::set<std::string> seen;
    for (const auto& doc : docs) seen.insert(doc.tokens.begin(), doc.tokens.end());
    WordVocab vocab;
    vocab.words.push_back("<unk>");
    for (const auto& w : seen) vocab.words.push_back(w);
    for (size_t i = 0; i < vocab.words.size(); ++i) vocab.index[vocab.words[i]] = static_cast<int>(i);
    return vocab;
}

int WordVocab::lookup(const std::string& word) const {
    auto it = index.find(word);
    return it == index.end() ? kUnk : it->second;
}

CharVocab CharVocab::build(const std::vector<Document>& docs) {
    std::set<char> seen;
    for (const auto& doc : docs) {
        for (const auto& tok : doc.tokens) seen.insert(tok.begin(), tok.end());
    }
    CharVocab vocab;
    vocab.chars.push_back("<pad>");
    for (char c : seen) {
        vocab.index[c] = static_cast<int>(vocab.chars.size());
        vocab.chars.push_back(std::string(1, c));
    }
    return vocab;
}

int CharVocab::lookup(char c) const {
    auto it = index.find(c);
    return it == index.end() ? kPad : it->second;
}

Encoder::Encoder(const EncoderConfig& cfg, WordVocab words, CharVocab chars, Rng& rng)
    : cfg_(cfg), words_(std::move(words)), chars_(std::move(chars)) {
    if (cfg_.word_dim <= 0 || cfg_.hidden <= 0) throw ConfigError("encoder: word_dim and hidden must be positive");
    double wb = init_bound(1, cfg_.word_dim);
    word_table_ = Parameter("encoder/words",
                            Tensor::uniform({static_cast<int>(words_.words.size()), cfg_.word_dim}, -wb, wb, rng));
    if (cfg_.char_dim > 0) {
        double cb = init_bound(1, cfg_.char_dim);
        char_table_ = Parameter("encoder/chars",
                                Tensor::uniform({static_cast<int>(chars_.chars.size()), cfg_.char_dim}, -cb, cb, rng));
        for (size_t wi = 0; wi < cfg_.char_widths.size(); ++wi) {
            int w = cfg_.char_widths[wi];
            if (w < 1) throw ConfigError("encoder: char width must be >= 1");
            double fb = init_bound(w * cfg_.char_dim, cfg_.char_filters);
            char_conv_w_.emplace_back("encoder/conv" + std::to_string(w) + "/w",
                                      Tensor::uniform({w * cfg_.char_dim, cfg_.char_filters}, -fb, fb, rng));
            char_conv_b_.emplace_back("encoder/conv" + std::to_string(w) + "/b",
                                      Tensor::zeros({1, cfg_.char_filters}));
        }
    }
    const int in = feature_dim();
    const int h = cfg_.hidden;
    double lb = init_bound(in + h, 4 * h);
    fwd_w_ = Parameter("encoder/lstm_fwd/w", Tensor::uniform({in + h, 4 * h}, -lb, lb, rng));
    fwd_b_ = Parameter("encoder/lstm_fwd/b", Tensor::zeros({1, 4 * h}));
    bwd_w_ = Parameter("encoder/lstm_bwd/w", Tensor::uniform({in + h, 4 * h}, -lb, lb, rng));
    bwd_b_ = Parameter("encoder/lstm_bwd/b", Tensor::zeros({1, 4 * h}));
}

int Encoder::feature_dim() const {
    int char_feat = cfg_.char_dim > 0 ? static_cast<int>(cfg_.char_widths.size()) * cfg_.char_filters : 0;
    return cfg_.word_dim + char_feat;
}

Tape::NodeId Encoder::char_features(Tape& tape, const std::vector<std::string>& tokens) {
    const int max_width = *std::max_element(cfg_.char_widths.begin(), cfg_.char_widths.end());
    std::vector<Tape::NodeId> token_rows;
    token_rows.reserve(tokens.size());
    auto table = tape.leaf(char_table_);
    for (const auto& tok : tokens) {
        std::vector<int> ids;
        for (char c : tok) ids.push_back(chars_.lookup(c));
        while (static_cast<int>(ids.size()) < max_width) ids.push_back(CharVocab::kPad);
        auto emb = tape.embedding_lookup(table, ids);  // (L, char_dim)
        const int L = static_cast<int>(ids.size());
        std::vector<Tape::NodeId> pooled;
        for (size_t wi = 0; wi < cfg_.char_widths.size(); ++wi) {
            int w = cfg_.char_widths[wi];
            int positions = L - w + 1;
            auto filter = tape.leaf(char_conv_w_[wi]);
            // convolution as a sum of shifted matmuls against filter slices
            Tape::NodeId conv = -1;
            for (int o = 0; o < w; ++o) {
                auto window = tape.slice(emb, 0, o, o + positions);
                auto f_o = tape.slice(filter, 0, o * cfg_.char_dim, (o + 1) * cfg_.char_dim);
                auto part = tape.matmul(window, f_o);
                conv = o == 0 ? part : tape.add(conv, part);
            }
            conv = tape.relu(tape.add(conv, tape.leaf(char_conv_b_[wi])));
            pooled.push_back(tape.max_pool(conv, 0));  // (1, filters)
        }
        token_rows.push_back(pooled.size() == 1 ? pooled[0] : tape.concat(pooled, 1));
    }
    return token_rows.size() == 1 ? token_rows[0] : tape.concat(token_rows, 0);
}

Tape::NodeId Encoder::embed_tokens(Tape& tape, const std::vector<std::string>& tokens) {
    if (tokens.empty()) throw ContractError("embed_tokens: empty token list");
    std::vector<int> ids;
    ids.reserve(tokens.size());
    for (const auto& tok : tokens) ids.push_back(words_.lookup(tok));
    auto word_part = tape.embedding_lookup(tape.leaf(word_table_), ids);
    if (cfg_.char_dim == 0) return word_part;
    auto char_part = char_features(tape, tokens);
    return tape.concat({word_part, char_part}, 1);
}

Tape::NodeId Encoder::lstm_direction(Tape& tape, Tape::NodeId features, int n, bool backward) {
    const int h = cfg_.hidden;
    auto w = tape.leaf(backward ? bwd_w_ : fwd_w_);
    auto b = tape.leaf(backward ? bwd_b_ : fwd_b_);
    auto h_prev = tape.constant(Tensor::zeros({1, h}));
    auto c_prev = tape.constant(Tensor::zeros({1, h}));
    std::vector<Tape::NodeId> states(static_cast<size_t>(n));
    for (int step = 0; step < n; ++step) {
        int t = backward ? n - 1 - step : step;
        auto x_t = tape.slice(features, 0, t, t + 1);
        auto gates = tape.add(tape.matmul(tape.concat({x_t, h_prev}, 1), w), b);
        auto i_g = tape.sigmoid(tape.slice(gates, 1, 0, h));
        auto f_g = tape.sigmoid(tape.slice(gates, 1, h, 2 * h));
        auto o_g = tape.sigmoid(tape.slice(gates, 1, 2 * h, 3 * h));
        auto g_g = tape.tanh(tape.slice(gates, 1, 3 * h, 4 * h));
        auto c_t = tape.add(tape.mul(f_g, c_prev), tape.mul(i_g, g_g));
        auto h_t = tape.mul(o_g, tape.tanh(c_t));
        states[static_cast<size_t>(t)] = h_t;
        h_prev = h_t;
        c_prev = c_t;
    }
    return n == 1 ? states[0] : tape.concat(states, 0);
}

Tape::NodeId Encoder::encode(Tape& tape, Tape::NodeId features, bool train) {
    const Tensor& f = tape.value(features);
    if (f.rank() != 2 || f.cols() != feature_dim()) {
        throw ShapeError("bilstm: features " + shape_str(f.shape) + " vs expected (*," +
                         std::to_string(feature_dim()) + ")");
    }
    const int n = f.rows();
    auto x = tape.dropout(features, cfg_.dropout, train);
    auto fwd = lstm_direction(tape, x, n, false);
    auto bwd = lstm_direction(tape, x, n, true);
    return tape.concat({fwd, bwd}, 1);
}

Tape::NodeId Encoder::run(Tape& tape, const std::vector<std::string>& tokens, bool train) {
    return encode(tape, embed_tokens(tape, tokens), train);
}

std::vector<Parameter*> Encoder::parameters() {
    std::vector<Parameter*> out;
    if (!cfg_.freeze_words) out.push_back(&word_table_);
    if (cfg_.char_dim > 0) {
        out.push_back(&char_table_);
        for (auto& p : char_conv_w_) out.push_back(&p);
        for (auto& p : char_conv_b_) out.push_back(&p);
    }
    out.push_back(&fwd_w_);
    out.push_back(&fwd_b_);
    out.push_back(&bwd_w_);
    out.push_back(&bwd_b_);
    return out;
}

std::vector<Parameter*> Encoder::all_parameters() {
    std::vector<Parameter*> out = parameters();
    if (cfg_.freeze_words) out.insert(out.begin(), &word_table_);
    return out;
}

void Encoder::load_pretrained_words(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open word vectors " + path);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string word;
        ss >> word;
        int idx = words_.lookup(word);
        if (idx == WordVocab::kUnk && word != "<unk>") continue;
        std::vector<double> vec;
        double x;
        while (ss >> x) vec.push_back(x);
        if (static_cast<int>(vec.size()) != cfg_.word_dim) {
            throw ParseError(path + ":" + std::to_string(lineno) + ": expected " +
                             std::to_string(cfg_.word_dim) + " components, got " + std::to_string(vec.size()));
        }
        for (int j = 0; j < cfg_.word_dim; ++j) word_table_.value.at(idx, j) = vec[static_cast<size_t>(j)];
    }
}

}  // namespace kbie

#pragma once

#include <map>
#include <string>
#include <vector>

#include "kbie/corpus.hpp"
#include "kbie/rng.hpp"
#include "kbie/tape.hpp"
#include "kbie/tensor.hpp"

namespace kbie {

struct EncoderConfig {
    int word_dim = 24;
    int char_dim = 8;          // 0 disables character features
    int char_filters = 8;      // per convolution width
    std::vector<int> char_widths = {2, 3};
    int hidden = 24;           // per direction
    double dropout = 0.0;      // applied to the BiLSTM input only
    bool freeze_words = false;
};

// Word vocabulary built from a training corpus; index 0 is the learned UNK row.
struct WordVocab {
    std::vector<std::string> words;  // position 0 reserved for UNK
    std::map<std::string, int> index;

    static WordVocab build(const std::vector<Document>& docs);
    int lookup(const std::string& word) const;

    static constexpr int kUnk = 0;
};

struct CharVocab {
    std::vector<std::string> chars;  // position 0 reserved: padding
    std::map<char, int> index;

    static CharVocab build(const std::vector<Document>& docs);
    int lookup(char c) const;

    static constexpr int kPad = 0;
};

// Token features (word embedding + char CNN) and a single BiLSTM layer.
class Encoder {
public:
    Encoder() = default;
    Encoder(const EncoderConfig& cfg, WordVocab words, CharVocab chars, Rng& rng);

    // row t = [word_vec(token_t); max-pooled char convolutions(token_t)]
    Tape::NodeId embed_tokens(Tape& tape, const std::vector<std::string>& tokens);

    // H_t = [fwd_t; bwd_t]; zero initial states; dropout on the input when
    // train is set
    Tape::NodeId encode(Tape& tape, Tape::NodeId features, bool train);

    Tape::NodeId run(Tape& tape, const std::vector<std::string>& tokens, bool train);

    int feature_dim() const;
    int output_dim() const { return 2 * cfg_.hidden; }
    const EncoderConfig& config() const { return cfg_; }
    const WordVocab& word_vocab() const { return words_; }

    std::vector<Parameter*> parameters();      // excludes frozen tables
    std::vector<Parameter*> all_parameters();  // includes them, for checkpoints

    // optional pretrained vectors, text format "word v1 ... vd" per line
    void load_pretrained_words(const std::string& path);

private:
    Tape::NodeId char_features(Tape& tape, const std::vector<std::string>& tokens);
    Tape::NodeId lstm_direction(Tape& tape, Tape::NodeId features, int n, bool backward);

    EncoderConfig cfg_;
    WordVocab words_;
    CharVocab chars_;

    Parameter word_table_;                  // (|V|, word_dim)
    Parameter char_table_;                  // (|C|, char_dim)
    std::vector<Parameter> char_conv_w_;    // per width: (width*char_dim, filters)
    std::vector<Parameter> char_conv_b_;    // per width: (1, filters)
    Parameter fwd_w_, fwd_b_;               // ([in+h], 4h), (1, 4h)
    Parameter bwd_w_, bwd_b_;
};

}  // namespace kbie

#pragma once

#include <filesystem>
#include <string>
#include <unordered_map>
#include <vector>

#include "semvis/random.hpp"
#include "semvis/tensor.hpp"
#include "semvis/visual.hpp"

namespace semvis {

inline constexpr const char* kUnknownToken = "<unk>";
inline constexpr std::size_t kUnknownIndex = 0;

/// Token <-> index map; index 0 is always "<unk>".
class TokenVocab {
public:
    TokenVocab();
    explicit TokenVocab(const std::vector<std::string>& tokens);

    /// "<unk>" followed by the sorted distinct tokens of `texts`.
    static TokenVocab from_corpus(const std::vector<std::string>& texts);

    static TokenVocab load(const std::filesystem::path& path);
    void save(const std::filesystem::path& path) const;

    std::size_t size() const { return tokens_.size(); }
    std::size_t index_of(const std::string& token) const;
    const std::string& token(std::size_t index) const { return tokens_.at(index); }
    const std::vector<std::string>& tokens() const { return tokens_; }

    bool operator==(const TokenVocab& other) const { return tokens_ == other.tokens_; }

private:
    std::vector<std::string> tokens_;
    std::unordered_map<std::string, std::size_t> index_;
};

/// Lowercased words, split on whitespace and punctuation.
std::vector<std::string> split_words(const std::string& text);

/// Word indices, unknown words mapped to kUnknownIndex. Throws
/// DegenerateInputError when the text holds no words.
std::vector<std::size_t> tokenize(const std::string& text, const TokenVocab& vocab);

struct TextConfig {
    std::size_t word_dim = 32;   // K
    std::size_t layers = 2;      // L
    std::size_t hidden = 64;     // SRU width; equals the joint embedding size d
    double dropout = 0.25;       // between stacked layers, train mode only

    void validate() const;
};

/// One SRU layer. Rows of `weight` are partitioned as (W_x, W_f, W_r).
struct SruLayer {
    Tensor weight;       // 3H×in
    Tensor forget_bias;  // H
    Tensor reset_bias;   // H
    Tensor highway;      // H×in, only when in != H

    std::size_t hidden() const { return forget_bias.dim(0); }
    std::size_t input_dim() const { return weight.dim(1); }
};

struct TextParams {
    Tensor word_table;  // V×K
    std::vector<SruLayer> layers;
};

struct SruState {
    Tensor hidden;  // h_t
    Tensor cell;    // c_t
};

/// x~ = W_x x, f = σ(W_f x + b_f), r = σ(W_r x + b_r),
/// c = f⊙c_prev + (1-f)⊙x~,  h = r⊙tanh(c) + (1-r)⊙x^
/// where x^ is x itself or its highway projection.
SruState sru_cell(const Tensor& x, const Tensor& c_prev, const SruLayer& layer);

/// Runs the stacked SRU over the sequence (zero initial cells) and returns the
/// l2-normalized last hidden state of the top layer.
Tensor encode_text(std::span<const std::size_t> tokens, const TextParams& params,
                   const TextConfig& cfg, Mode mode, const DropoutKey& key = {});

}  // namespace semvis

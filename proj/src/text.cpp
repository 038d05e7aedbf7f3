#include "semvis/text.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>

namespace semvis {

TokenVocab::TokenVocab() : TokenVocab(std::vector<std::string>{kUnknownToken}) {}

TokenVocab::TokenVocab(const std::vector<std::string>& tokens) : tokens_(tokens) {
    if (tokens_.empty() || tokens_.front() != kUnknownToken) {
        throw FormatError("vocabulary must start with the token <unk>");
    }
    for (std::size_t i = 0; i < tokens_.size(); ++i) {
        if (tokens_[i].empty()) {
            throw FormatError("vocabulary entry " + std::to_string(i) + " is empty");
        }
        if (!index_.emplace(tokens_[i], i).second) {
            throw FormatError("vocabulary token '" + tokens_[i] + "' appears twice");
        }
    }
}

TokenVocab TokenVocab::from_corpus(const std::vector<std::string>& texts) {
    std::set<std::string> words;
    for (const auto& text : texts) {
        for (auto& w : split_words(text)) {
            words.insert(std::move(w));
        }
    }
    words.erase(kUnknownToken);
    std::vector<std::string> tokens{kUnknownToken};
    tokens.insert(tokens.end(), words.begin(), words.end());
    return TokenVocab(tokens);
}

TokenVocab TokenVocab::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open vocabulary " + path.string());
    }
    std::vector<std::string> tokens;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        tokens.push_back(line);
    }
    try {
        return TokenVocab(tokens);
    } catch (const FormatError& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
}

void TokenVocab::save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw IoError("cannot write vocabulary " + path.string());
    }
    for (const auto& t : tokens_) {
        out << t << '\n';
    }
}

std::size_t TokenVocab::index_of(const std::string& token) const {
    auto it = index_.find(token);
    return it == index_.end() ? kUnknownIndex : it->second;
}

std::vector<std::string> split_words(const std::string& text) {
    std::vector<std::string> words;
    std::string current;
    for (char ch : text) {
        const auto u = static_cast<unsigned char>(ch);
        if (std::isalnum(u) != 0) {
            current.push_back(static_cast<char>(std::tolower(u)));
        } else if (!current.empty()) {
            words.push_back(std::move(current));
            current.clear();
        }
    }
    if (!current.empty()) {
        words.push_back(std::move(current));
    }
    return words;
}

std::vector<std::size_t> tokenize(const std::string& text, const TokenVocab& vocab) {
    const auto words = split_words(text);
    if (words.empty()) {
        throw DegenerateInputError("text '" + text + "' contains no tokens");
    }
    std::vector<std::size_t> out;
    out.reserve(words.size());
    for (const auto& w : words) {
        out.push_back(vocab.index_of(w));
    }
    return out;
}

void TextConfig::validate() const {
    if (word_dim == 0 || layers == 0 || hidden == 0) {
        throw ContractError("text encoder dimensions must be at least 1");
    }
    if (!(dropout >= 0.0 && dropout < 1.0)) {
        throw ContractError("text dropout must lie in [0, 1)");
    }
}

SruState sru_cell(const Tensor& x, const Tensor& c_prev, const SruLayer& layer) {
    const std::size_t h = layer.hidden();
    if (x.rank() != 1 || x.dim(0) != layer.input_dim() || c_prev.rank() != 1 || c_prev.dim(0) != h) {
        throw DimensionError("sru_cell: input " + shape_string(x.shape()) + " / cell " +
                             shape_string(c_prev.shape()) + " do not fit layer " +
                             shape_string(layer.weight.shape()));
    }
    const Tensor u = matvec(layer.weight, x);
    const Tensor candidate = slice(u, 0, h);
    const Tensor forget = sigmoid(add(slice(u, h, h), layer.forget_bias));
    const Tensor reset = sigmoid(add(slice(u, 2 * h, h), layer.reset_bias));
    const Tensor skip = layer.highway.defined() ? matvec(layer.highway, x) : x;
    // f⊙c_prev + (1-f)⊙x~  ==  x~ + f⊙(c_prev - x~), likewise for h.
    Tensor cell = add(candidate, mul(forget, sub(c_prev, candidate)));
    Tensor hidden = add(skip, mul(reset, sub(tanh(cell), skip)));
    return {hidden, cell};
}

Tensor encode_text(std::span<const std::size_t> tokens, const TextParams& params,
                   const TextConfig& cfg, Mode mode, const DropoutKey& key) {
    if (tokens.empty()) {
        throw DegenerateInputError("encode_text: empty token sequence");
    }
    if (params.layers.empty()) {
        throw ContractError("encode_text: no SRU layers");
    }
    const Tensor embedded = gather_rows(params.word_table, tokens);
    std::vector<Tensor> inputs;
    inputs.reserve(tokens.size());
    for (std::size_t t = 0; t < tokens.size(); ++t) {
        inputs.push_back(row(embedded, t));
    }
    for (std::size_t l = 0; l < params.layers.size(); ++l) {
        const SruLayer& layer = params.layers[l];
        Tensor cell(Shape{layer.hidden()}, 0.0);
        std::vector<Tensor> outputs;
        outputs.reserve(inputs.size());
        for (const auto& x : inputs) {
            SruState s = sru_cell(x, cell, layer);
            cell = s.cell;
            outputs.push_back(s.hidden);
        }
        if (l + 1 < params.layers.size() && mode == Mode::kTrain && cfg.dropout > 0.0) {
            const Tensor seq = dropout(stack(outputs), cfg.dropout, key.with_layer(100 + l), true);
            for (std::size_t t = 0; t < outputs.size(); ++t) {
                outputs[t] = row(seq, t);
            }
        }
        inputs = std::move(outputs);
    }
    return l2_normalize(inputs.back());
}

}  // namespace semvis

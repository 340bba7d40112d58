#pragma once

#include <span>
#include <string_view>
#include <vector>

#include "liftgan/log_codec.hpp"
#include "liftgan/nn/ops.hpp"
#include "liftgan/nn/optim.hpp"
#include "liftgan/nn/tape.hpp"
#include "liftgan/rng.hpp"

namespace liftgan::models {

using codec::Token;

struct GeneratorConfig {
    std::size_t vocab_size = 0;
    std::size_t emb_dim = 32;
    std::size_t hidden_dim = 128;
    double temperature = 1.0;

    void validate() const;
};

// LSTM hidden and cell state, [batch, hidden] each.
struct RecurrentState {
    nn::Tensor h;
    nn::Tensor c;

    bool operator==(const RecurrentState&) const = default;
};

struct GenerationOutput {
    std::vector<Token> tokens;
    // Distribution entry of each sampled token, before temperature scaling.
    std::vector<double> probabilities;
};

// Character-level generator: embedding -> LSTM -> dense -> softmax.
//
// The state after consuming tokens x_1..x_k gives the distribution of
// x_{k+1}; the zero state gives the distribution of the first token.
class Generator {
public:
    Generator(const GeneratorConfig& config, Rng& init_rng);

    const GeneratorConfig& config() const { return config_; }
    nn::ParamSet& params() { return params_; }
    const nn::ParamSet& params() const { return params_; }

    RecurrentState initial_state(std::size_t batch = 1) const;

    // Parameters bound to one tape.
    struct Bound {
        nn::Var embedding, w, u, b, out_w, out_b;
    };
    Bound bind(nn::Tape& tape);

    // Consumes one token per row.
    nn::LstmState advance(const Bound& p, std::span<const Token> tokens, nn::LstmState state) const;
    // Next-token distributions [rows, vocab] for hidden states [rows, hidden].
    nn::Var head(const Bound& p, nn::Var h) const;

    // One distribution per input token (batch of one); the state threads
    // through. Throws on a token outside the vocabulary.
    struct ForwardResult {
        std::vector<std::vector<double>> distributions;
        RecurrentState state;
    };
    ForwardResult forward(std::span<const Token> tokens, const RecurrentState& initial);

    // Teacher-forced mean cross-entropy: row r consumes input.row(r) and is
    // scored on target.row(r).
    nn::Var sequence_loss(nn::Tape& tape, const codec::SequenceBatch& input, const codec::SequenceBatch& target);

    // Teacher-forced weighted negative log-likelihood of continuations:
    // every row first consumes `prime`, then row r's own tokens, and is
    // scored on each of them. weights has one entry per token in batch
    // layout (empty = all ones); the result is the mean over all tokens.
    nn::Var continuation_loss(nn::Tape& tape, std::span<const Token> prime, const codec::SequenceBatch& rows,
                              std::span<const double> weights = {});

    // One Adam update on sequence_loss; returns the loss before the update.
    double mle_step(const codec::BatchPair& batch, const nn::AdamConfig& adam, double clip_norm = 5.0);

private:
    GeneratorConfig config_;
    nn::ParamSet params_;
};

// Categorical draw from `distribution` after scaling logits by 1/temperature.
// temperature 1 samples the distribution as is; temperature 0 is argmax.
// Throws std::invalid_argument on non-finite, negative or unnormalised input.
Token sample_next(std::span<const double> distribution, Rng& rng, double temperature);

// Feeds `prime`, then samples `length` tokens.
GenerationOutput generate_tokens(Generator& gen, std::span<const Token> prime, std::size_t length, Rng& rng);

// Batched sampling: `rows` independent continuations of `prime`, each of
// `length` tokens. Row r uses rng.fork(r).
codec::SequenceBatch generate_batch(Generator& gen, std::span<const Token> prime, std::size_t rows,
                                    std::size_t length, const Rng& rng);

// Seed text used when none is given.
inline constexpr std::string_view kDefaultPrime = "1 - ";

// Encodes seed_text with the vocabulary's folding ("1 - " when empty), feeds
// it, then samples `length` tokens.
GenerationOutput generate_sequence(Generator& gen, std::string_view seed_text, std::size_t length,
                                   const codec::Vocabulary& vocab, Rng& rng);

}  // namespace liftgan::models

#pragma once

#include <span>
#include <vector>

#include "liftgan/log_codec.hpp"
#include "liftgan/nn/optim.hpp"
#include "liftgan/nn/tape.hpp"
#include "liftgan/rng.hpp"

namespace liftgan::models {

struct DiscriminatorConfig {
    std::size_t vocab_size = 0;
    std::size_t emb_dim = 32;
    std::size_t filters = 64;
    std::size_t width = 5;
    std::size_t hidden = 64;
    double dropout = 0.2;

    void validate() const;
};

// Convolutional classifier, 1 = real, 0 = fake:
// embedding -> conv1d (+bias) -> global max pool -> dense relu -> dropout
// -> dense -> sigmoid.
class Discriminator {
public:
    Discriminator(const DiscriminatorConfig& config, Rng& init_rng);

    const DiscriminatorConfig& config() const { return config_; }
    nn::ParamSet& params() { return params_; }
    const nn::ParamSet& params() const { return params_; }

    // Probabilities [rows] for a batch of equal-length sequences. dropout_rng
    // is only used (and required) in training mode. Throws if a sequence is
    // shorter than the kernel width or a token is outside the vocabulary.
    nn::Var forward(nn::Tape& tape, const codec::SequenceBatch& batch, bool training, Rng* dropout_rng);

    // Inference-mode scores.
    std::vector<double> score(const codec::SequenceBatch& batch);
    double score(std::span<const codec::Token> sequence);

    struct StepResult {
        double loss = 0.0;      // before the update
        double accuracy = 0.0;  // of the same forward pass, threshold 0.5
    };
    // Binary cross-entropy on real (label 1) and fake (label 0) rows in one
    // batch, then one Adam update.
    StepResult train_step(const codec::SequenceBatch& real, const codec::SequenceBatch& fake,
                          const nn::AdamConfig& adam, Rng& dropout_rng, double clip_norm = 5.0);

private:
    DiscriminatorConfig config_;
    nn::ParamSet params_;
};

// Fraction of rows classified correctly at threshold 0.5 (p > 0.5 = real).
double accuracy(std::span<const double> probabilities, std::span<const double> labels);

}  // namespace liftgan::models

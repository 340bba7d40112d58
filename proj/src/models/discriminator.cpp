#include "liftgan/models/discriminator.hpp"

#include <cmath>
#include <stdexcept>

#include "liftgan/nn/ops.hpp"

namespace liftgan::models {

namespace {

nn::Tensor uniform_tensor(nn::Shape shape, double bound, Rng& rng) {
    nn::Tensor t(std::move(shape));
    for (auto& v : t.values()) v = (2.0 * rng.uniform01() - 1.0) * bound;
    return t;
}

double inv_sqrt(std::size_t n) { return 1.0 / std::sqrt(static_cast<double>(n)); }

}  // namespace

void DiscriminatorConfig::validate() const {
    if (vocab_size < 2) throw std::invalid_argument("discriminator: vocab_size must be at least 2");
    if (emb_dim == 0 || filters == 0 || width == 0 || hidden == 0) {
        throw std::invalid_argument("discriminator: layer sizes must be positive");
    }
    if (!(dropout >= 0.0 && dropout < 1.0)) throw std::invalid_argument("discriminator: dropout must be in [0,1)");
}

Discriminator::Discriminator(const DiscriminatorConfig& config, Rng& init_rng) : config_(config) {
    config_.validate();
    const auto& c = config_;
    params_.add("disc.embedding", uniform_tensor({c.vocab_size, c.emb_dim}, 0.1, init_rng));
    params_.add("disc.conv.k", uniform_tensor({c.width, c.emb_dim, c.filters}, inv_sqrt(c.width * c.emb_dim), init_rng));
    params_.add("disc.conv.b", nn::Tensor({c.filters}));
    params_.add("disc.hidden.w", uniform_tensor({c.filters, c.hidden}, inv_sqrt(c.filters), init_rng));
    params_.add("disc.hidden.b", nn::Tensor({c.hidden}));
    params_.add("disc.out.w", uniform_tensor({c.hidden, 1}, inv_sqrt(c.hidden), init_rng));
    params_.add("disc.out.b", nn::Tensor({1}));
}

nn::Var Discriminator::forward(nn::Tape& tape, const codec::SequenceBatch& batch, bool training, Rng* dropout_rng) {
    const std::size_t B = batch.batch_size, T = batch.seq_length;
    if (B == 0 || batch.tokens.size() != B * T) throw nn::ShapeError("discriminator_forward: malformed or empty batch");
    if (T < config_.width) {
        throw nn::ShapeError("discriminator_forward: sequence length " + std::to_string(T) +
                             " is shorter than the kernel width " + std::to_string(config_.width));
    }
    for (const auto tok : batch.tokens) {
        if (tok < 0 || static_cast<std::size_t>(tok) >= config_.vocab_size) {
            throw std::out_of_range("discriminator_forward: token " + std::to_string(tok) + " outside vocabulary of " +
                                    std::to_string(config_.vocab_size));
        }
    }
    if (training && !dropout_rng) throw std::invalid_argument("discriminator_forward: training mode needs a dropout rng");

    auto p = [&](const char* name) { return tape.parameter(params_[name]); };
    nn::Var x = nn::embedding_lookup(p("disc.embedding"), batch.tokens);
    x = nn::reshape(x, {B, T, config_.emb_dim});
    x = nn::add_bias(nn::conv1d(x, p("disc.conv.k")), p("disc.conv.b"));
    x = nn::global_max_pool1d(x);
    x = nn::relu(nn::dense(x, p("disc.hidden.w"), p("disc.hidden.b")));
    Rng unused(0);
    x = nn::dropout(x, config_.dropout, training ? *dropout_rng : unused, training);
    x = nn::sigmoid(nn::dense(x, p("disc.out.w"), p("disc.out.b")));
    return nn::reshape(x, {B});
}

std::vector<double> Discriminator::score(const codec::SequenceBatch& batch) {
    nn::Tape tape(false);
    const auto v = forward(tape, batch, false, nullptr).value().values();
    return {v.begin(), v.end()};
}

double Discriminator::score(std::span<const codec::Token> sequence) {
    return score(codec::SequenceBatch{1, sequence.size(), {sequence.begin(), sequence.end()}})[0];
}

Discriminator::StepResult Discriminator::train_step(const codec::SequenceBatch& real, const codec::SequenceBatch& fake,
                                                    const nn::AdamConfig& adam, Rng& dropout_rng, double clip_norm) {
    if (real.batch_size == 0 || fake.batch_size == 0) throw std::invalid_argument("discriminator_train_step: empty batch");
    if (real.seq_length != fake.seq_length) {
        throw nn::ShapeError("discriminator_train_step: real length " + std::to_string(real.seq_length) +
                             " differs from fake length " + std::to_string(fake.seq_length));
    }
    codec::SequenceBatch both{real.batch_size + fake.batch_size, real.seq_length, real.tokens};
    both.tokens.insert(both.tokens.end(), fake.tokens.begin(), fake.tokens.end());
    std::vector<double> labels(both.batch_size, 0.0);
    std::fill_n(labels.begin(), real.batch_size, 1.0);

    params_.zero_grad();
    StepResult result;
    {
        nn::Tape tape;
        const nn::Var probs = forward(tape, both, true, &dropout_rng);
        const nn::Var loss = nn::binary_cross_entropy(probs, labels);
        result.loss = loss.value().item();
        result.accuracy = accuracy(probs.value().values(), labels);
        tape.backward(loss);
    }
    if (clip_norm > 0.0) nn::clip_grad_norm(params_, clip_norm);
    nn::adam_step(params_, adam);
    return result;
}

double accuracy(std::span<const double> probabilities, std::span<const double> labels) {
    if (probabilities.size() != labels.size() || labels.empty()) {
        throw std::invalid_argument("accuracy: need equally many probabilities and labels");
    }
    std::size_t correct = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        correct += (probabilities[i] > 0.5) == (labels[i] > 0.5);
    }
    return static_cast<double>(correct) / static_cast<double>(labels.size());
}

}  // namespace liftgan::models

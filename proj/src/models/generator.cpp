#include "liftgan/models/generator.hpp"

#include <algorithm>
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

void check_tokens(std::span<const Token> tokens, std::size_t vocab) {
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (tokens[i] < 0 || static_cast<std::size_t>(tokens[i]) >= vocab) {
            throw std::out_of_range("token " + std::to_string(tokens[i]) + " at position " + std::to_string(i) +
                                    " outside vocabulary of " + std::to_string(vocab));
        }
    }
}

// Column t of a [rows, T] batch.
std::vector<Token> column(const codec::SequenceBatch& batch, std::size_t t) {
    std::vector<Token> out(batch.batch_size);
    for (std::size_t r = 0; r < batch.batch_size; ++r) out[r] = batch.at(r, t);
    return out;
}

}  // namespace

void GeneratorConfig::validate() const {
    if (vocab_size < 2) throw std::invalid_argument("generator: vocab_size must be at least 2");
    if (emb_dim == 0 || hidden_dim == 0) throw std::invalid_argument("generator: emb_dim and hidden_dim must be positive");
    if (!(temperature >= 0.0) || !std::isfinite(temperature)) {
        throw std::invalid_argument("generator: temperature must be finite and nonnegative");
    }
}

Generator::Generator(const GeneratorConfig& config, Rng& init_rng) : config_(config) {
    config_.validate();
    const std::size_t V = config_.vocab_size, E = config_.emb_dim, H = config_.hidden_dim;
    params_.add("gen.embedding", uniform_tensor({V, E}, 0.1, init_rng));
    params_.add("gen.lstm.w", uniform_tensor({E, 4 * H}, 1.0 / std::sqrt(static_cast<double>(E)), init_rng));
    params_.add("gen.lstm.u", uniform_tensor({H, 4 * H}, 1.0 / std::sqrt(static_cast<double>(H)), init_rng));
    nn::Tensor bias({4 * H});
    std::fill_n(bias.data() + H, H, 1.0);  // forget gate
    params_.add("gen.lstm.b", std::move(bias));
    params_.add("gen.out.w", uniform_tensor({H, V}, 1.0 / std::sqrt(static_cast<double>(H)), init_rng));
    params_.add("gen.out.b", nn::Tensor({V}));
}

RecurrentState Generator::initial_state(std::size_t batch) const {
    return {nn::Tensor({batch, config_.hidden_dim}), nn::Tensor({batch, config_.hidden_dim})};
}

Generator::Bound Generator::bind(nn::Tape& tape) {
    return {tape.parameter(params_["gen.embedding"]), tape.parameter(params_["gen.lstm.w"]),
            tape.parameter(params_["gen.lstm.u"]),    tape.parameter(params_["gen.lstm.b"]),
            tape.parameter(params_["gen.out.w"]),     tape.parameter(params_["gen.out.b"])};
}

nn::LstmState Generator::advance(const Bound& p, std::span<const Token> tokens, nn::LstmState state) const {
    check_tokens(tokens, config_.vocab_size);
    const nn::Var x = nn::embedding_lookup(p.embedding, tokens);
    return nn::lstm_cell(x, state.h, state.c, p.w, p.u, p.b);
}

nn::Var Generator::head(const Bound& p, nn::Var h) const { return nn::softmax(nn::dense(h, p.out_w, p.out_b)); }

Generator::ForwardResult Generator::forward(std::span<const Token> tokens, const RecurrentState& initial) {
    if (initial.h.shape() != nn::Shape{1, config_.hidden_dim} || initial.c.shape() != initial.h.shape()) {
        throw nn::ShapeError("generator_forward: initial state must be [1," + std::to_string(config_.hidden_dim) + "]");
    }
    check_tokens(tokens, config_.vocab_size);
    ForwardResult out;
    RecurrentState state = initial;
    for (const Token tok : tokens) {
        nn::Tape tape(false);
        const Bound p = bind(tape);
        const auto next = advance(p, std::span<const Token>(&tok, 1), {tape.constant(state.h), tape.constant(state.c)});
        const auto probs = head(p, next.h).value().values();
        out.distributions.emplace_back(probs.begin(), probs.end());
        state = {next.h.value(), next.c.value()};
    }
    out.state = std::move(state);
    return out;
}

nn::Var Generator::sequence_loss(nn::Tape& tape, const codec::SequenceBatch& input, const codec::SequenceBatch& target) {
    if (input.batch_size != target.batch_size || input.seq_length != target.seq_length ||
        input.tokens.size() != input.batch_size * input.seq_length || target.tokens.size() != input.tokens.size() ||
        input.tokens.empty()) {
        throw nn::ShapeError("sequence_loss: input [" + std::to_string(input.batch_size) + "," +
                             std::to_string(input.seq_length) + "] and target [" + std::to_string(target.batch_size) +
                             "," + std::to_string(target.seq_length) + "] must be equal, nonempty batches");
    }
    check_tokens(target.tokens, config_.vocab_size);
    const std::size_t B = input.batch_size, T = input.seq_length;
    const Bound p = bind(tape);
    const RecurrentState init = initial_state(B);
    nn::LstmState s{tape.constant(init.h), tape.constant(init.c)};
    std::vector<nn::Var> hs;
    hs.reserve(T);
    std::vector<Token> targets;  // step-major, matching the stacked rows
    targets.reserve(B * T);
    for (std::size_t t = 0; t < T; ++t) {
        s = advance(p, column(input, t), s);
        hs.push_back(s.h);
        const auto col = column(target, t);
        targets.insert(targets.end(), col.begin(), col.end());
    }
    return nn::categorical_cross_entropy(head(p, nn::concat_rows(hs)), targets);
}

nn::Var Generator::continuation_loss(nn::Tape& tape, std::span<const Token> prime, const codec::SequenceBatch& rows,
                                     std::span<const double> weights) {
    const std::size_t B = rows.batch_size, L = rows.seq_length;
    if (B == 0 || L == 0 || rows.tokens.size() != B * L || (!weights.empty() && weights.size() != B * L)) {
        throw nn::ShapeError("continuation_loss: " + std::to_string(rows.tokens.size()) + " tokens / " +
                             std::to_string(weights.size()) + " weights for a [" + std::to_string(B) + "," +
                             std::to_string(L) + "] batch");
    }
    check_tokens(rows.tokens, config_.vocab_size);
    const Bound p = bind(tape);
    const RecurrentState init = initial_state(B);
    nn::LstmState s{tape.constant(init.h), tape.constant(init.c)};
    for (const Token tok : prime) {
        const std::vector<Token> col(B, tok);
        s = advance(p, col, s);
    }
    std::vector<nn::Var> hs;
    std::vector<Token> targets;
    std::vector<double> w;
    for (std::size_t t = 0; t < L; ++t) {
        hs.push_back(s.h);
        const auto col = column(rows, t);
        targets.insert(targets.end(), col.begin(), col.end());
        if (!weights.empty()) {
            for (std::size_t r = 0; r < B; ++r) w.push_back(weights[r * L + t]);
        }
        if (t + 1 < L) s = advance(p, col, s);
    }
    return nn::categorical_cross_entropy(head(p, nn::concat_rows(hs)), targets, w);
}

double Generator::mle_step(const codec::BatchPair& batch, const nn::AdamConfig& adam, double clip_norm) {
    params_.zero_grad();
    double loss = 0.0;
    {
        nn::Tape tape;
        const nn::Var l = sequence_loss(tape, batch.input, batch.target);
        loss = l.value().item();
        tape.backward(l);
    }
    if (clip_norm > 0.0) nn::clip_grad_norm(params_, clip_norm);
    nn::adam_step(params_, adam);
    return loss;
}

Token sample_next(std::span<const double> distribution, Rng& rng, double temperature) {
    if (distribution.empty()) throw std::invalid_argument("sample_next: empty distribution");
    double total = 0.0;
    for (const double p : distribution) {
        if (!std::isfinite(p) || p < 0.0) throw std::invalid_argument("sample_next: distribution has invalid entries");
        total += p;
    }
    if (std::abs(total - 1.0) > 1e-6) {
        throw std::invalid_argument("sample_next: distribution sums to " + std::to_string(total));
    }
    if (!(temperature >= 0.0) || !std::isfinite(temperature)) {
        throw std::invalid_argument("sample_next: temperature must be finite and nonnegative");
    }
    const auto argmax = [&] {
        return static_cast<Token>(std::max_element(distribution.begin(), distribution.end()) - distribution.begin());
    };
    if (temperature == 0.0) return argmax();

    std::vector<double> w(distribution.begin(), distribution.end());
    if (temperature != 1.0) {
        // p^(1/T), normalised relative to the largest entry to stay in range
        const double mx = distribution[static_cast<std::size_t>(argmax())];
        double z = 0.0;
        for (auto& v : w) z += (v = v > 0.0 ? std::exp((std::log(v) - std::log(mx)) / temperature) : 0.0);
        total = z;
    }
    const double u = rng.uniform01() * total;
    double acc = 0.0;
    std::size_t last = 0;
    for (std::size_t i = 0; i < w.size(); ++i) {
        if (w[i] <= 0.0) continue;
        acc += w[i];
        last = i;
        if (u < acc) return static_cast<Token>(i);
    }
    return static_cast<Token>(last);
}

GenerationOutput generate_tokens(Generator& gen, std::span<const Token> prime, std::size_t length, Rng& rng) {
    GenerationOutput out;
    if (length == 0) return out;
    out.tokens.reserve(length);
    out.probabilities.reserve(length);
    auto fwd = gen.forward(prime, gen.initial_state());
    std::vector<double> dist;
    if (fwd.distributions.empty()) {
        nn::Tape tape(false);
        const auto p = gen.bind(tape);
        const auto v = gen.head(p, tape.constant(fwd.state.h)).value().values();
        dist.assign(v.begin(), v.end());
    } else {
        dist = std::move(fwd.distributions.back());
    }
    RecurrentState state = std::move(fwd.state);
    for (std::size_t i = 0; i < length; ++i) {
        const Token tok = sample_next(dist, rng, gen.config().temperature);
        out.tokens.push_back(tok);
        out.probabilities.push_back(dist[static_cast<std::size_t>(tok)]);
        if (i + 1 == length) break;
        nn::Tape tape(false);
        const auto p = gen.bind(tape);
        const auto next = gen.advance(p, std::span<const Token>(&tok, 1), {tape.constant(state.h), tape.constant(state.c)});
        const auto v = gen.head(p, next.h).value().values();
        dist.assign(v.begin(), v.end());
        state = {next.h.value(), next.c.value()};
    }
    return out;
}

codec::SequenceBatch generate_batch(Generator& gen, std::span<const Token> prime, std::size_t rows, std::size_t length,
                                    const Rng& rng) {
    codec::SequenceBatch out{rows, length, std::vector<Token>(rows * length)};
    if (rows == 0 || length == 0) return out;
    std::vector<Rng> streams;
    streams.reserve(rows);
    for (std::size_t r = 0; r < rows; ++r) streams.push_back(rng.fork(r));

    RecurrentState state = gen.initial_state(rows);
    const auto V = gen.config().vocab_size;
    std::vector<Token> col(rows);
    auto step = [&](std::span<const Token> tokens, bool want_probs) {
        nn::Tape tape(false);
        const auto p = gen.bind(tape);
        nn::LstmState s{tape.constant(state.h), tape.constant(state.c)};
        if (!tokens.empty()) s = gen.advance(p, tokens, s);
        nn::Tensor probs;
        if (want_probs) probs = gen.head(p, s.h).value();
        state = {s.h.value(), s.c.value()};
        return probs;
    };
    for (const Token tok : prime) {
        std::fill(col.begin(), col.end(), tok);
        step(col, false);
    }
    nn::Tensor probs = step({}, true);
    for (std::size_t t = 0; t < length; ++t) {
        for (std::size_t r = 0; r < rows; ++r) {
            col[r] = sample_next(std::span<const double>(probs.data() + r * V, V), streams[r], gen.config().temperature);
            out.tokens[r * length + t] = col[r];
        }
        if (t + 1 < length) probs = step(col, true);
    }
    return out;
}

GenerationOutput generate_sequence(Generator& gen, std::string_view seed_text, std::size_t length,
                                   const codec::Vocabulary& vocab, Rng& rng) {
    if (vocab.size() != gen.config().vocab_size) {
        throw std::invalid_argument("generate_sequence: vocabulary of " + std::to_string(vocab.size()) +
                                    " symbols does not match generator vocab_size " +
                                    std::to_string(gen.config().vocab_size));
    }
    const auto prime = codec::encode(vocab.fold(seed_text.empty() ? kDefaultPrime : seed_text), vocab);
    return generate_tokens(gen, prime, length, rng);
}

}  // namespace liftgan::models

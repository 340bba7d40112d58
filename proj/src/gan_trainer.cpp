#include "liftgan/gan_trainer.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

#include "liftgan/file_io.hpp"
#include "liftgan/models/checkpoint.hpp"
#include "liftgan/nn/ops.hpp"

namespace liftgan::gan {

namespace {

// Rows scored by the discriminator in one pass.
constexpr std::size_t kScoreChunk = 512;

std::size_t as_size(const KeyValueConfig& kv, const char* key, std::size_t fallback) {
    return static_cast<std::size_t>(kv.get_uint(key, fallback));
}

std::vector<double> score_rows(Discriminator& disc, const SequenceBatch& batch) {
    std::vector<double> out;
    out.reserve(batch.batch_size);
    for (std::size_t begin = 0; begin < batch.batch_size; begin += kScoreChunk) {
        const std::size_t n = std::min(kScoreChunk, batch.batch_size - begin);
        const auto first = batch.tokens.begin() + static_cast<std::ptrdiff_t>(begin * batch.seq_length);
        SequenceBatch chunk{n, batch.seq_length, {first, first + static_cast<std::ptrdiff_t>(n * batch.seq_length)}};
        const auto s = disc.score(chunk);
        out.insert(out.end(), s.begin(), s.end());
    }
    return out;
}

// Samples `steps` tokens per row starting from `state`, row r drawing from
// streams[r]. Returns [rows][steps].
std::vector<Token> complete(Generator& gen, models::RecurrentState state, std::size_t steps, std::vector<Rng>& streams) {
    const std::size_t rows = streams.size();
    const std::size_t V = gen.config().vocab_size;
    std::vector<Token> out(rows * steps);
    std::vector<Token> col(rows);
    for (std::size_t t = 0; t < steps; ++t) {
        nn::Tape tape(false);
        const auto p = gen.bind(tape);
        nn::LstmState s{tape.constant(std::move(state.h)), tape.constant(std::move(state.c))};
        const nn::Tensor& probs = gen.head(p, s.h).value();
        for (std::size_t r = 0; r < rows; ++r) {
            col[r] = models::sample_next(std::span<const double>(probs.data() + r * V, V), streams[r],
                                         gen.config().temperature);
            out[r * steps + t] = col[r];
        }
        if (t + 1 < steps) {
            s = gen.advance(p, col, s);
            state = {s.h.value(), s.c.value()};
        }
    }
    return out;
}

// Stacks `times` copies of every row of a [rows, H] tensor: row r becomes
// rows r*times .. r*times+times-1.
nn::Tensor repeat_rows(const nn::Tensor& t, std::size_t times) {
    const std::size_t rows = t.dim(0), H = t.dim(1);
    nn::Tensor out({rows * times, H});
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t k = 0; k < times; ++k) std::copy_n(t.data() + r * H, H, out.data() + (r * times + k) * H);
    return out;
}

// State after every row consumed `prime` then `tokens` (one per row).
models::RecurrentState run_state(Generator& gen, std::span<const Token> prime, const SequenceBatch& rows,
                                 std::size_t prefix_len) {
    models::RecurrentState state = gen.initial_state(rows.batch_size);
    auto feed = [&](const std::vector<Token>& col) {
        nn::Tape tape(false);
        const auto p = gen.bind(tape);
        const auto s = gen.advance(p, col, {tape.constant(state.h), tape.constant(state.c)});
        state = {s.h.value(), s.c.value()};
    };
    for (const Token tok : prime) feed(std::vector<Token>(rows.batch_size, tok));
    for (std::size_t t = 0; t < prefix_len; ++t) {
        std::vector<Token> col(rows.batch_size);
        for (std::size_t r = 0; r < rows.batch_size; ++r) col[r] = rows.at(r, t);
        feed(col);
    }
    return state;
}

std::string csv_field(double v) { return std::isnan(v) ? std::string() : codec::format_double(v); }

}  // namespace

// --- TrainConfig -------------------------------------------------------------

TrainConfig TrainConfig::from(const KeyValueConfig& kv) {
    kv.reject_unknown({"corpus",         "out_dir",          "gen_checkpoint", "fold_lowercase", "seq_length",
                       "batch_size",     "heldout_fraction", "emb_dim",        "hidden_dim",     "temperature",
                       "disc_emb_dim",   "filters",          "conv_width",     "disc_hidden",    "dropout",
                       "pretrain_gen_epochs", "pretrain_disc_epochs", "disc_samples", "epochs",  "g_steps",
                       "d_steps",        "n_rollouts",       "pg_batch",       "eval_chars",     "lr_mle",
                       "lr_gen",         "lr_disc",          "baseline_decay", "clip_norm",      "seed",
                       "data_seed",      "sample_seed",      "dropout_seed"});
    TrainConfig c;
    c.corpus = kv.get_string("corpus", c.corpus);
    c.out_dir = kv.get_string("out_dir", c.out_dir);
    c.gen_checkpoint = kv.get_string("gen_checkpoint", c.gen_checkpoint);
    c.fold_lowercase = kv.get_bool("fold_lowercase", c.fold_lowercase);
    c.seq_length = as_size(kv, "seq_length", c.seq_length);
    c.batch_size = as_size(kv, "batch_size", c.batch_size);
    c.heldout_fraction = kv.get_double("heldout_fraction", c.heldout_fraction);
    c.emb_dim = as_size(kv, "emb_dim", c.emb_dim);
    c.hidden_dim = as_size(kv, "hidden_dim", c.hidden_dim);
    c.temperature = kv.get_double("temperature", c.temperature);
    c.disc_emb_dim = as_size(kv, "disc_emb_dim", c.disc_emb_dim);
    c.filters = as_size(kv, "filters", c.filters);
    c.conv_width = as_size(kv, "conv_width", c.conv_width);
    c.disc_hidden = as_size(kv, "disc_hidden", c.disc_hidden);
    c.dropout = kv.get_double("dropout", c.dropout);
    c.pretrain_gen_epochs = as_size(kv, "pretrain_gen_epochs", c.pretrain_gen_epochs);
    c.pretrain_disc_epochs = as_size(kv, "pretrain_disc_epochs", c.pretrain_disc_epochs);
    c.disc_samples = as_size(kv, "disc_samples", c.disc_samples);
    c.epochs = as_size(kv, "epochs", c.epochs);
    c.g_steps = as_size(kv, "g_steps", c.g_steps);
    c.d_steps = as_size(kv, "d_steps", c.d_steps);
    c.n_rollouts = as_size(kv, "n_rollouts", c.n_rollouts);
    c.pg_batch = as_size(kv, "pg_batch", c.pg_batch);
    c.eval_chars = as_size(kv, "eval_chars", c.eval_chars);
    c.lr_mle = kv.get_double("lr_mle", c.lr_mle);
    c.lr_gen = kv.get_double("lr_gen", c.lr_gen);
    c.lr_disc = kv.get_double("lr_disc", c.lr_disc);
    c.baseline_decay = kv.get_double("baseline_decay", c.baseline_decay);
    c.clip_norm = kv.get_double("clip_norm", c.clip_norm);
    c.seed = kv.get_uint("seed", c.seed);
    c.data_seed = kv.get_uint("data_seed", c.data_seed);
    c.sample_seed = kv.get_uint("sample_seed", c.sample_seed);
    c.dropout_seed = kv.get_uint("dropout_seed", c.dropout_seed);
    c.validate();
    return c;
}

void TrainConfig::validate() const {
    auto fail = [](const std::string& msg) { throw ConfigError("train config: " + msg); };
    if (seq_length == 0) fail("seq_length must be positive");
    if (batch_size < 2 || batch_size % 2) fail("batch_size must be an even number >= 2");
    if (n_rollouts < 1) fail("n_rollouts must be at least 1");
    if (pg_batch < 1) fail("pg_batch must be at least 1");
    if (!(baseline_decay >= 0.0 && baseline_decay < 1.0)) fail("baseline_decay must be in [0,1)");
    if (!(heldout_fraction > 0.0 && heldout_fraction < 1.0)) fail("heldout_fraction must be in (0,1)");
    if (!(dropout >= 0.0 && dropout < 1.0)) fail("dropout must be in [0,1)");
    if (!(temperature >= 0.0)) fail("temperature must be nonnegative");
    if (conv_width > seq_length) fail("conv_width exceeds seq_length");
    if (eval_chars != 0 && eval_chars < 1000) fail("eval_chars must be 0 or at least 1000");
    if (!(lr_mle >= 0 && lr_gen >= 0 && lr_disc >= 0)) fail("learning rates must be nonnegative");
    if (emb_dim == 0 || hidden_dim == 0 || disc_emb_dim == 0 || filters == 0 || conv_width == 0 || disc_hidden == 0) {
        fail("layer sizes must be positive");
    }
}

models::GeneratorConfig TrainConfig::generator_config(std::size_t vocab_size) const {
    return {vocab_size, emb_dim, hidden_dim, temperature};
}

models::DiscriminatorConfig TrainConfig::discriminator_config(std::size_t vocab_size) const {
    return {vocab_size, disc_emb_dim, filters, conv_width, disc_hidden, dropout};
}

// --- history -----------------------------------------------------------------

std::string history_csv_header() {
    return "epoch,g_loss,mean_reward,d_loss,d_acc,parse_rate,monotonic_frac,lifecycle_rate";
}

std::string to_csv(const TrainHistory& history) {
    std::string out = history_csv_header() + "\n";
    for (const auto& r : history) {
        out += r.epoch;
        for (double v : {r.g_loss, r.mean_reward, r.d_loss, r.d_acc, r.parse_rate, r.monotonic_frac, r.lifecycle_rate}) {
            out += ',';
            out += csv_field(v);
        }
        out += '\n';
    }
    return out;
}

// --- rollouts and policy gradient ----------------------------------------------

double rollout_reward(Generator& gen, Discriminator& disc, std::span<const Token> prime, std::span<const Token> partial,
                      std::size_t horizon, std::size_t n_rollouts, const Rng& rng) {
    if (partial.size() > horizon) {
        throw std::invalid_argument("rollout_reward: partial of length " + std::to_string(partial.size()) +
                                    " exceeds horizon " + std::to_string(horizon));
    }
    if (partial.size() == horizon) return disc.score(partial);
    if (n_rollouts == 0) throw std::invalid_argument("rollout_reward: n_rollouts must be at least 1");

    const SequenceBatch one{1, partial.size(), {partial.begin(), partial.end()}};
    const auto state = run_state(gen, prime, one, partial.size());
    std::vector<Rng> streams;
    streams.reserve(n_rollouts);
    for (std::size_t r = 0; r < n_rollouts; ++r) streams.push_back(rng.fork(r));
    const std::size_t rest = horizon - partial.size();
    const auto tail = complete(gen, {repeat_rows(state.h, n_rollouts), repeat_rows(state.c, n_rollouts)}, rest, streams);

    SequenceBatch full{n_rollouts, horizon, {}};
    full.tokens.reserve(n_rollouts * horizon);
    for (std::size_t r = 0; r < n_rollouts; ++r) {
        full.tokens.insert(full.tokens.end(), partial.begin(), partial.end());
        full.tokens.insert(full.tokens.end(), tail.begin() + static_cast<std::ptrdiff_t>(r * rest),
                           tail.begin() + static_cast<std::ptrdiff_t>((r + 1) * rest));
    }
    const auto scores = score_rows(disc, full);
    return std::accumulate(scores.begin(), scores.end(), 0.0) / static_cast<double>(n_rollouts);
}

std::vector<double> prefix_rewards(Generator& gen, Discriminator& disc, std::span<const Token> prime,
                                   const SequenceBatch& sequences, std::size_t n_rollouts, const Rng& rng) {
    const std::size_t B = sequences.batch_size, L = sequences.seq_length;
    if (sequences.tokens.size() != B * L) throw std::invalid_argument("prefix_rewards: malformed batch");
    if (n_rollouts == 0) throw std::invalid_argument("prefix_rewards: n_rollouts must be at least 1");
    std::vector<double> rewards(B * L);
    if (B == 0 || L == 0) return rewards;

    // complete sequences are scored directly
    const auto last = score_rows(disc, sequences);
    for (std::size_t b = 0; b < B; ++b) rewards[b * L + L - 1] = last[b];

    models::RecurrentState state = run_state(gen, prime, sequences, 0);
    for (std::size_t k = 1; k < L; ++k) {
        // advance every row by its k-th token
        {
            nn::Tape tape(false);
            const auto p = gen.bind(tape);
            std::vector<Token> col(B);
            for (std::size_t b = 0; b < B; ++b) col[b] = sequences.at(b, k - 1);
            const auto s = gen.advance(p, col, {tape.constant(state.h), tape.constant(state.c)});
            state = {s.h.value(), s.c.value()};
        }
        std::vector<Rng> streams;
        streams.reserve(B * n_rollouts);
        for (std::size_t b = 0; b < B; ++b) {
            const Rng prefix_rng = rng.fork(b * L + k - 1);
            for (std::size_t r = 0; r < n_rollouts; ++r) streams.push_back(prefix_rng.fork(r));
        }
        const std::size_t rest = L - k;
        const auto tail =
            complete(gen, {repeat_rows(state.h, n_rollouts), repeat_rows(state.c, n_rollouts)}, rest, streams);
        SequenceBatch full{B * n_rollouts, L, {}};
        full.tokens.reserve(B * n_rollouts * L);
        for (std::size_t b = 0; b < B; ++b) {
            const auto row = sequences.row(b);
            for (std::size_t r = 0; r < n_rollouts; ++r) {
                const std::size_t i = b * n_rollouts + r;
                full.tokens.insert(full.tokens.end(), row.begin(), row.begin() + static_cast<std::ptrdiff_t>(k));
                full.tokens.insert(full.tokens.end(), tail.begin() + static_cast<std::ptrdiff_t>(i * rest),
                                   tail.begin() + static_cast<std::ptrdiff_t>((i + 1) * rest));
            }
        }
        const auto scores = score_rows(disc, full);
        for (std::size_t b = 0; b < B; ++b) {
            double sum = 0.0;
            for (std::size_t r = 0; r < n_rollouts; ++r) sum += scores[b * n_rollouts + r];
            rewards[b * L + k - 1] = sum / static_cast<double>(n_rollouts);
        }
    }
    return rewards;
}

double policy_gradient_step(Generator& gen, std::span<const Token> prime, const SequenceBatch& sequences,
                            std::span<const double> rewards, Baseline& baseline, const nn::AdamConfig& adam,
                            double clip_norm) {
    if (rewards.size() != sequences.tokens.size() || sequences.tokens.size() != sequences.batch_size * sequences.seq_length ||
        rewards.empty()) {
        throw std::invalid_argument("policy_gradient_step: " + std::to_string(rewards.size()) + " rewards for " +
                                    std::to_string(sequences.tokens.size()) + " generated tokens");
    }
    std::vector<double> advantages(rewards.size());
    bool any = false;
    double mean_reward = 0.0;
    for (std::size_t i = 0; i < rewards.size(); ++i) {
        if (!std::isfinite(rewards[i])) throw std::invalid_argument("policy_gradient_step: non-finite reward");
        advantages[i] = rewards[i] - baseline.value;
        any = any || advantages[i] != 0.0;
        mean_reward += rewards[i];
    }
    mean_reward /= static_cast<double>(rewards.size());

    double loss = 0.0;
    if (any) {
        gen.params().zero_grad();
        nn::Tape tape;
        const nn::Var l = gen.continuation_loss(tape, prime, sequences, advantages);
        loss = l.value().item();
        tape.backward(l);
        if (clip_norm > 0.0) nn::clip_grad_norm(gen.params(), clip_norm);
        nn::adam_step(gen.params(), adam);
    }
    baseline.update(mean_reward);
    return loss;
}

codec::RealismReport evaluate_generator(Generator& gen, const codec::Vocabulary& vocab, std::size_t sample_chars,
                                        Rng& rng) {
    if (sample_chars < 1000) throw std::invalid_argument("evaluate_generator: sample_chars must be at least 1000");
    const auto out = models::generate_sequence(gen, kEvalSeed, sample_chars, vocab, rng);
    const std::string text = vocab.fold(kEvalSeed) + codec::decode(out.tokens, vocab);
    return codec::realism_features(text, {.case_insensitive = vocab.folded()});
}

// --- GanTrainer ----------------------------------------------------------------

GanTrainer::GanTrainer(const TrainConfig& config, std::vector<Token> corpus, std::size_t vocab_size,
                       std::vector<Token> prime, std::optional<codec::Vocabulary> vocab)
    : config_(config),
      corpus_(std::move(corpus)),
      split_(0),
      prime_(std::move(prime)),
      vocab_(std::move(vocab)),
      gen_([&] {
          Rng init = Rng(config.seed).fork(0);
          return Generator(config.generator_config(vocab_size), init);
      }()),
      disc_([&] {
          Rng init = Rng(config.seed).fork(1);
          return Discriminator(config.discriminator_config(vocab_size), init);
      }()),
      baseline_{0.5, config.baseline_decay},
      data_rng_(config.data_seed),
      sample_rng_(config.sample_seed),
      dropout_rng_(config.dropout_seed),
      eval_rng_(Rng(config.sample_seed).fork(0xe7a1)) {
    config_.validate();
    if (vocab_ && vocab_->size() != vocab_size) throw std::invalid_argument("GanTrainer: vocabulary size mismatch");
    split_ = static_cast<std::size_t>(static_cast<double>(corpus_.size()) * (1.0 - config_.heldout_fraction));
    if (split_ < config_.seq_length + 1 || corpus_.size() - split_ < config_.seq_length) {
        throw std::invalid_argument("GanTrainer: corpus of " + std::to_string(corpus_.size()) +
                                    " tokens is too small for windows of " + std::to_string(config_.seq_length));
    }
}

SequenceBatch GanTrainer::real_windows(std::size_t rows, bool heldout, Rng& rng) const {
    const std::size_t begin = heldout ? split_ : 0;
    const std::size_t end = heldout ? corpus_.size() : split_;
    const std::size_t L = config_.seq_length;
    SequenceBatch out{rows, L, {}};
    out.tokens.reserve(rows * L);
    for (std::size_t r = 0; r < rows; ++r) {
        const auto off = begin + static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(end - begin - L)));
        out.tokens.insert(out.tokens.end(), corpus_.begin() + static_cast<std::ptrdiff_t>(off),
                          corpus_.begin() + static_cast<std::ptrdiff_t>(off + L));
    }
    return out;
}

SequenceBatch GanTrainer::fake_sequences(std::size_t rows, Rng& rng) {
    return models::generate_batch(gen_, prime_, rows, config_.seq_length, next_stream(rng));
}

void GanTrainer::fill_realism(HistoryRow& row) {
    if (!vocab_ || config_.eval_chars == 0) return;
    Rng rng = next_stream(eval_rng_);
    const auto report = evaluate_generator(gen_, *vocab_, config_.eval_chars, rng);
    row.parse_rate = report.line_parse_rate;
    row.monotonic_frac = report.timestamp_monotonic_fraction;
    row.lifecycle_rate = report.lifecycle_complete_rate;
}

TrainHistory GanTrainer::pretrain_generator(std::size_t epochs) {
    TrainHistory history;
    if (epochs == 0) return history;
    const auto batches =
        codec::batchify(std::span<const Token>(corpus_).first(split_), config_.seq_length, config_.batch_size);
    std::vector<std::size_t> order(batches.size());
    for (std::size_t e = 1; e <= epochs; ++e) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        for (std::size_t i = order.size(); i > 1; --i) {
            std::swap(order[i - 1], order[static_cast<std::size_t>(data_rng_.uniform_int(0, static_cast<std::int64_t>(i) - 1))]);
        }
        double total = 0.0;
        for (const std::size_t b : order) total += gen_.mle_step(batches[b], {.lr = config_.lr_mle}, config_.clip_norm);
        HistoryRow row;
        row.epoch = "pre_gen_" + std::to_string(e);
        row.g_loss = total / static_cast<double>(order.size());
        fill_realism(row);
        history.push_back(row);
    }
    return history;
}

GanTrainer::HeldOut GanTrainer::evaluate_discriminator(std::size_t per_class) {
    Rng heldout_rng = Rng(config_.data_seed).fork(0x4e1d);  // the same held-out windows every time
    const auto real = real_windows(per_class, true, heldout_rng);
    const auto fake = fake_sequences(per_class, sample_rng_);
    const auto rs = score_rows(disc_, real);
    const auto fs = score_rows(disc_, fake);
    std::size_t correct = 0;
    for (double p : rs) correct += p > 0.5;
    for (double p : fs) correct += p <= 0.5;
    HeldOut out;
    out.accuracy = static_cast<double>(correct) / static_cast<double>(2 * per_class);
    out.fake_score = std::accumulate(fs.begin(), fs.end(), 0.0) / static_cast<double>(per_class);
    return out;
}

TrainHistory GanTrainer::pretrain_discriminator(std::size_t epochs) {
    TrainHistory history;
    if (epochs == 0) return history;
    const std::size_t half = config_.batch_size / 2;
    if (config_.disc_samples < half) {
        throw std::invalid_argument("pretrain_discriminator: disc_samples " + std::to_string(config_.disc_samples) +
                                    " cannot fill one batch of " + std::to_string(half) + " real windows");
    }
    const std::size_t steps = config_.disc_samples / half;
    for (std::size_t e = 1; e <= epochs; ++e) {
        double loss = 0.0;
        for (std::size_t s = 0; s < steps; ++s) {
            const auto real = real_windows(half, false, data_rng_);
            const auto fake = fake_sequences(half, sample_rng_);
            loss += disc_.train_step(real, fake, {.lr = config_.lr_disc}, dropout_rng_, config_.clip_norm).loss;
        }
        const auto held = evaluate_discriminator(std::max(half, config_.disc_samples / 4));
        HistoryRow row;
        row.epoch = "pre_disc_" + std::to_string(e);
        row.d_loss = loss / static_cast<double>(steps);
        row.d_acc = held.accuracy;
        row.mean_reward = held.fake_score;
        history.push_back(row);
    }
    return history;
}

HistoryRow GanTrainer::adversarial_epoch(std::size_t epoch) {
    HistoryRow row;
    row.epoch = std::to_string(epoch);
    const nn::AdamConfig gen_adam{.lr = config_.lr_gen};
    double g_loss = 0.0, reward_sum = 0.0;
    std::size_t reward_count = 0;
    for (std::size_t g = 0; g < config_.g_steps; ++g) {
        const Rng stream = next_stream(sample_rng_);
        const auto seqs = models::generate_batch(gen_, prime_, config_.pg_batch, config_.seq_length, stream.fork(0));
        const auto rewards = prefix_rewards(gen_, disc_, prime_, seqs, config_.n_rollouts, stream.fork(1));
        g_loss += policy_gradient_step(gen_, prime_, seqs, rewards, baseline_, gen_adam, config_.clip_norm);
        reward_sum += std::accumulate(rewards.begin(), rewards.end(), 0.0);
        reward_count += rewards.size();
    }
    if (config_.g_steps) {
        row.g_loss = g_loss / static_cast<double>(config_.g_steps);
        row.mean_reward = reward_sum / static_cast<double>(reward_count);
    }
    const std::size_t half = config_.batch_size / 2;
    double d_loss = 0.0, d_acc = 0.0;
    for (std::size_t d = 0; d < config_.d_steps; ++d) {
        const auto real = real_windows(half, false, data_rng_);
        const auto fake = fake_sequences(half, sample_rng_);
        const auto res = disc_.train_step(real, fake, {.lr = config_.lr_disc}, dropout_rng_, config_.clip_norm);
        d_loss += res.loss;
        d_acc += res.accuracy;
    }
    if (config_.d_steps) {
        row.d_loss = d_loss / static_cast<double>(config_.d_steps);
        row.d_acc = d_acc / static_cast<double>(config_.d_steps);
    }
    fill_realism(row);
    return row;
}

// --- file-level entry points -----------------------------------------------------

std::filesystem::path generator_checkpoint_path(const TrainConfig& config) {
    return std::filesystem::path(config.out_dir) / "generator.ckpt";
}
std::filesystem::path discriminator_checkpoint_path(const TrainConfig& config) {
    return std::filesystem::path(config.out_dir) / "discriminator.ckpt";
}
std::filesystem::path history_path(const TrainConfig& config) {
    return std::filesystem::path(config.out_dir) / "history.csv";
}

namespace {

struct Run {
    codec::Vocabulary vocab;
    GanTrainer trainer;
};

Run open_run(const TrainConfig& config) {
    config.validate();
    if (config.corpus.empty()) throw ConfigError("train config: corpus is required");
    const std::string text = read_file(config.corpus);
    auto vocab = codec::Vocabulary::build(text, config.fold_lowercase);
    auto tokens = codec::encode(vocab.fold(text), vocab);
    std::filesystem::create_directories(config.out_dir);
    const std::size_t V = vocab.size();
    Run run{vocab, GanTrainer(config, std::move(tokens), V, {}, vocab)};
    if (!config.gen_checkpoint.empty()) {
        const auto loaded = models::load_generator(config.gen_checkpoint, &run.vocab);
        auto& params = run.trainer.generator().params();
        for (const auto& p : loaded.model.params()) {
            const nn::Parameter* mine = params.find(p.name);
            if (!mine || mine->value.shape() != p.value.shape()) {
                throw models::ManifestError(config.gen_checkpoint + ": parameter '" + p.name +
                                            "' does not fit the configured generator sizes");
            }
            params[p.name].value = p.value;
        }
    }
    return run;
}

void write_history(const TrainConfig& config, const TrainHistory& history) {
    write_file_atomic(history_path(config), to_csv(history));
}

void append(TrainHistory& to, const TrainHistory& rows) { to.insert(to.end(), rows.begin(), rows.end()); }

}  // namespace

TrainHistory pretrain_generator_only(const TrainConfig& config) {
    auto run = open_run(config);
    TrainHistory history = run.trainer.pretrain_generator(config.pretrain_gen_epochs);
    models::save_generator(run.trainer.generator(), run.vocab, generator_checkpoint_path(config));
    write_history(config, history);
    return history;
}

TrainHistory pretrain_discriminator_only(const TrainConfig& config) {
    auto run = open_run(config);
    TrainHistory history = run.trainer.pretrain_discriminator(config.pretrain_disc_epochs);
    models::save_discriminator(run.trainer.discriminator(), run.vocab, discriminator_checkpoint_path(config));
    write_history(config, history);
    return history;
}

TrainHistory train(const TrainConfig& config) {
    auto run = open_run(config);
    auto& t = run.trainer;
    const auto checkpoint = [&] {
        models::save_generator(t.generator(), run.vocab, generator_checkpoint_path(config));
        models::save_discriminator(t.discriminator(), run.vocab, discriminator_checkpoint_path(config));
    };
    TrainHistory history;
    if (config.gen_checkpoint.empty()) append(history, t.pretrain_generator(config.pretrain_gen_epochs));
    append(history, t.pretrain_discriminator(config.pretrain_disc_epochs));
    checkpoint();
    write_history(config, history);
    for (std::size_t e = 1; e <= config.epochs; ++e) {
        history.push_back(t.adversarial_epoch(e));
        checkpoint();
        write_history(config, history);
    }
    return history;
}

}  // namespace liftgan::gan

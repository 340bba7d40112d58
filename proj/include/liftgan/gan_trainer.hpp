#pragma once

#include <cmath>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "liftgan/kv_config.hpp"
#include "liftgan/log_codec.hpp"
#include "liftgan/models/discriminator.hpp"
#include "liftgan/models/generator.hpp"

namespace liftgan::gan {

using codec::SequenceBatch;
using codec::Token;
using models::Discriminator;
using models::Generator;

struct TrainConfig {
    // data
    std::string corpus;  // simulator log used as real data
    std::string out_dir = "run";
    std::string gen_checkpoint;  // optional: start from this generator instead of MLE pretraining
    bool fold_lowercase = true;
    std::size_t seq_length = 100;  // also the rollout horizon
    std::size_t batch_size = 64;
    double heldout_fraction = 0.1;

    // networks
    std::size_t emb_dim = 32;
    std::size_t hidden_dim = 128;
    double temperature = 1.0;
    std::size_t disc_emb_dim = 32;
    std::size_t filters = 64;
    std::size_t conv_width = 5;
    std::size_t disc_hidden = 64;
    double dropout = 0.2;

    // schedule
    std::size_t pretrain_gen_epochs = 10;
    std::size_t pretrain_disc_epochs = 3;
    std::size_t disc_samples = 2000;  // real windows (and as many fakes) per discriminator pretraining epoch
    std::size_t epochs = 10;
    std::size_t g_steps = 1;
    std::size_t d_steps = 3;
    std::size_t n_rollouts = 8;
    std::size_t pg_batch = 16;  // sequences per generator step
    std::size_t eval_chars = 2000;  // realism sample per history row; 0 skips

    // optimisation
    double lr_mle = 2e-3;
    double lr_gen = 1e-3;
    double lr_disc = 1e-3;
    double baseline_decay = 0.9;
    double clip_norm = 5.0;

    // seeds
    std::uint64_t seed = 1;          // parameter initialisation
    std::uint64_t data_seed = 2;     // batch order and real windows
    std::uint64_t sample_seed = 3;   // generator sampling and rollouts
    std::uint64_t dropout_seed = 4;  // dropout masks

    // Throws ConfigError on an unknown key or a malformed / invalid value.
    static TrainConfig from(const KeyValueConfig& kv);
    void validate() const;

    models::GeneratorConfig generator_config(std::size_t vocab_size) const;
    models::DiscriminatorConfig discriminator_config(std::size_t vocab_size) const;
};

// One history line. Values that were not measured are NaN and are written
// as empty CSV fields.
struct HistoryRow {
    std::string epoch;  // "pre_gen_k", "pre_disc_k" or the adversarial epoch number
    double g_loss = NAN;
    double mean_reward = NAN;
    double d_loss = NAN;
    double d_acc = NAN;
    double parse_rate = NAN;
    double monotonic_frac = NAN;
    double lifecycle_rate = NAN;
};

using TrainHistory = std::vector<HistoryRow>;

std::string history_csv_header();
std::string to_csv(const TrainHistory& history);

// Exponential moving average of mean sequence rewards.
struct Baseline {
    double value = 0.5;
    double decay = 0.9;

    void update(double mean_reward) { value = decay * value + (1.0 - decay) * mean_reward; }
};

// Expected discriminator score of `partial` (tokens after `prime`) completed
// to `horizon` tokens by the frozen generator. A partial already at the
// horizon is scored directly; otherwise the mean over n_rollouts
// completions, completion r drawn from rng.fork(r).
double rollout_reward(Generator& gen, Discriminator& disc, std::span<const Token> prime, std::span<const Token> partial,
                      std::size_t horizon, std::size_t n_rollouts, const Rng& rng);

// rollout_reward for every prefix y_1..y_t (t = 1..L) of every row, in batch
// layout [rows][L]. Prefix (b, t) uses rng.fork(b * L + t - 1).
std::vector<double> prefix_rewards(Generator& gen, Discriminator& disc, std::span<const Token> prime,
                                   const SequenceBatch& sequences, std::size_t n_rollouts, const Rng& rng);

// REINFORCE: minimises -(1/N) sum (reward - baseline) log p(token) over all
// generated tokens via a teacher-forced re-run, takes one Adam step, then
// moves the baseline towards the mean reward. When every advantage is zero
// the optimizer is not touched, so parameters stay bit-identical. Returns
// the policy loss before the update.
double policy_gradient_step(Generator& gen, std::span<const Token> prime, const SequenceBatch& sequences,
                            std::span<const double> rewards, Baseline& baseline, const nn::AdamConfig& adam,
                            double clip_norm = 5.0);

// Seed of every evaluation sample.
inline constexpr std::string_view kEvalSeed = "1 - New Call:";

// Samples sample_chars characters after kEvalSeed and measures the text
// (seed included) with the log grammar; case-insensitive when the
// vocabulary is folded. Requires sample_chars >= 1000.
codec::RealismReport evaluate_generator(Generator& gen, const codec::Vocabulary& vocab, std::size_t sample_chars,
                                        Rng& rng);

// Holds the two networks, the real data and all random streams of a run.
class GanTrainer {
public:
    // corpus: encoded real data; prime: tokens fed to the generator before
    // every generated sequence. vocab is optional and enables realism metrics.
    GanTrainer(const TrainConfig& config, std::vector<Token> corpus, std::size_t vocab_size, std::vector<Token> prime,
               std::optional<codec::Vocabulary> vocab = std::nullopt);

    Generator& generator() { return gen_; }
    Discriminator& discriminator() { return disc_; }
    const TrainConfig& config() const { return config_; }
    const Baseline& baseline() const { return baseline_; }

    // MLE (teacher-forced) epochs over the training part of the corpus.
    TrainHistory pretrain_generator(std::size_t epochs);
    // Each epoch: disc_samples real windows against as many fresh generator
    // samples in balanced batches. d_acc is held-out accuracy at epoch end,
    // mean_reward the mean score of the held-out fakes.
    TrainHistory pretrain_discriminator(std::size_t epochs);
    // g_steps policy-gradient steps with per-prefix rollout rewards, then
    // d_steps discriminator steps on fresh balanced batches.
    HistoryRow adversarial_epoch(std::size_t epoch);

    struct HeldOut {
        double accuracy = 0.0;    // over held-out real windows and fresh fakes, equal counts
        double fake_score = 0.0;  // mean discriminator score of the fakes
    };
    HeldOut evaluate_discriminator(std::size_t per_class);

    // Random windows of seq_length tokens from the training or held-out part.
    SequenceBatch real_windows(std::size_t rows, bool heldout, Rng& rng) const;
    SequenceBatch fake_sequences(std::size_t rows, Rng& rng);

private:
    void fill_realism(HistoryRow& row);
    Rng next_stream(Rng& parent) { return Rng(parent.next_u64()); }

    TrainConfig config_;
    std::vector<Token> corpus_;
    std::size_t split_;  // corpus_[0, split_) trains, the rest is held out
    std::vector<Token> prime_;
    std::optional<codec::Vocabulary> vocab_;
    Generator gen_;
    Discriminator disc_;
    Baseline baseline_;
    Rng data_rng_;
    Rng sample_rng_;
    Rng dropout_rng_;
    Rng eval_rng_;
};

// Full run: reads the corpus, MLE-pretrains the generator (or loads
// gen_checkpoint), pretrains the discriminator, runs `epochs` adversarial
// epochs, checkpoints both networks after every epoch and writes
// out_dir/history.csv. Returns the history.
TrainHistory train(const TrainConfig& config);

// The individual phases of train(), for the command line.
TrainHistory pretrain_generator_only(const TrainConfig& config);
TrainHistory pretrain_discriminator_only(const TrainConfig& config);

// Output locations inside out_dir.
std::filesystem::path generator_checkpoint_path(const TrainConfig& config);
std::filesystem::path discriminator_checkpoint_path(const TrainConfig& config);
std::filesystem::path history_path(const TrainConfig& config);

}  // namespace liftgan::gan

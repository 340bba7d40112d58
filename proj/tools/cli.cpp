#include "liftgan/cli.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <set>

#include "liftgan/file_io.hpp"
#include "liftgan/gan_trainer.hpp"
#include "liftgan/log_codec.hpp"
#include "liftgan/models/checkpoint.hpp"
#include "liftgan/sim_core.hpp"

namespace liftgan::cli {

namespace fs = std::filesystem;

namespace {

constexpr std::int64_t kDefaultTMax = 1'000'000;
constexpr std::int64_t kBatchTMax = 10'000;
constexpr std::size_t kDefaultLength = 10'000;

// Outputs created by this invocation; removed again unless committed.
class OutputGuard {
public:
    void track(const fs::path& p) {
        std::error_code ec;
        if (!fs::exists(p, ec)) created_.push_back(p);
    }
    void commit() { created_.clear(); }
    ~OutputGuard() {
        for (const auto& p : created_) {
            std::error_code ec;
            fs::remove(p, ec);
            fs::remove(models::manifest_path(p), ec);
        }
    }

private:
    std::vector<fs::path> created_;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

struct Options {
    std::string config;
    std::int64_t t_max = -1;
    std::string out;
    std::string seed_text = std::string(gan::kEvalSeed);
    std::size_t length = kDefaultLength;
    std::string csv;
    std::uint64_t seed = 0;
    bool seed_given = false;
    std::string checkpoint;
    std::string log;
    bool ignore_case = false;
};

// --- simulate ----------------------------------------------------------------

const std::set<std::string> kSimKeys = {"num_shafts", "cars_per_shaft", "num_floors", "car_capacity",
                                        "arrival_rate", "seed", "t_max"};

std::string simulate_text(const KeyValueConfig& kv, const Options& o, std::int64_t default_t_max, std::size_t& lines) {
    kv.reject_unknown(kSimKeys);
    auto config = sim::building_config_from(kv);
    if (o.seed_given) config.seed = o.seed;
    const std::int64_t t_max = o.t_max >= 0 ? o.t_max : kv.get_int("t_max", default_t_max);
    if (t_max < 0) throw ConfigError("t_max must be nonnegative");
    std::string text;
    const auto events = sim::run(config, t_max);
    for (const auto& e : events) {
        text += codec::format_event(e);
        text += '\n';
    }
    lines = events.size();
    return text;
}

int cmd_simulate(const Options& o, std::ostream& out, std::ostream& err) {
    const auto t0 = std::chrono::steady_clock::now();
    OutputGuard guard;
    if (!o.config.empty() && fs::is_directory(o.config)) {
        if (o.out.empty()) throw ConfigError("simulate: batch mode needs -o/--out DIR");
        std::vector<fs::path> configs;
        for (const auto& entry : fs::directory_iterator(o.config)) {
            if (entry.is_regular_file()) configs.push_back(entry.path());
        }
        std::sort(configs.begin(), configs.end());
        if (configs.empty()) throw ConfigError("simulate: no configuration files in " + o.config);
        fs::create_directories(o.out);
        std::size_t total = 0;
        for (const auto& c : configs) {
            std::size_t lines = 0;
            const std::string text = simulate_text(KeyValueConfig::load(c.string()), o, kBatchTMax, lines);
            const fs::path dest = fs::path(o.out) / (c.stem().string() + ".log");
            guard.track(dest);
            write_file_atomic(dest, text);
            err << c.filename().string() << ": " << lines << " lines -> " << dest.string() << "\n";
            total += lines;
        }
        err << configs.size() << " logs, " << total << " lines in " << seconds_since(t0) << " s\n";
        guard.commit();
        return 0;
    }
    const KeyValueConfig kv = o.config.empty() ? KeyValueConfig() : KeyValueConfig::load(o.config);
    std::size_t lines = 0;
    const std::string text = simulate_text(kv, o, kDefaultTMax, lines);
    if (o.out.empty() || o.out == "-") {
        out << text;
    } else {
        guard.track(o.out);
        write_file_atomic(o.out, text);
    }
    err << lines << " lines in " << seconds_since(t0) << " s\n";
    guard.commit();
    return 0;
}

// --- training ------------------------------------------------------------------

gan::TrainConfig train_config(const Options& o) {
    if (o.config.empty()) throw ConfigError("a training configuration (-c/--config) is required");
    KeyValueConfig kv = KeyValueConfig::load(o.config);
    if (!o.out.empty()) kv.set("out_dir", o.out);
    if (!o.checkpoint.empty()) kv.set("gen_checkpoint", o.checkpoint);
    if (o.seed_given) {
        kv.set("seed", std::to_string(o.seed));
        kv.set("data_seed", std::to_string(o.seed + 1));
        kv.set("sample_seed", std::to_string(o.seed + 2));
        kv.set("dropout_seed", std::to_string(o.seed + 3));
    }
    // a relative corpus path is taken relative to the config file
    auto config = gan::TrainConfig::from(kv);
    if (!config.corpus.empty() && fs::path(config.corpus).is_relative()) {
        const fs::path beside = fs::path(o.config).parent_path() / config.corpus;
        if (!fs::exists(config.corpus) && fs::exists(beside)) config.corpus = beside.string();
    }
    return config;
}

enum class Phase { PretrainGen, PretrainDisc, Full };

int cmd_train(const Options& o, Phase phase, std::ostream& err) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto config = train_config(o);
    OutputGuard guard;
    guard.track(gan::history_path(config));
    if (phase != Phase::PretrainDisc) guard.track(gan::generator_checkpoint_path(config));
    if (phase != Phase::PretrainGen) guard.track(gan::discriminator_checkpoint_path(config));
    gan::TrainHistory history;
    switch (phase) {
        case Phase::PretrainGen: history = gan::pretrain_generator_only(config); break;
        case Phase::PretrainDisc: history = gan::pretrain_discriminator_only(config); break;
        case Phase::Full: history = gan::train(config); break;
    }
    for (const auto& row : history) {
        err << row.epoch << ": " << gan::to_csv({row}).substr(gan::history_csv_header().size() + 1);
    }
    err << "history -> " << gan::history_path(config).string() << " (" << seconds_since(t0) << " s)\n";
    guard.commit();
    return 0;
}

// --- generate / evaluate ---------------------------------------------------------

int cmd_generate(const Options& o, std::ostream& out, std::ostream& err) {
    if (o.checkpoint.empty()) throw ConfigError("generate: --checkpoint is required");
    auto loaded = models::load_generator(o.checkpoint);
    Rng rng(o.seed_given ? o.seed : 1);
    const auto t0 = std::chrono::steady_clock::now();
    std::string text;
    if (o.length > 0) {
        const auto sample = models::generate_sequence(loaded.model, o.seed_text, o.length, loaded.vocab, rng);
        text = loaded.vocab.fold(o.seed_text.empty() ? models::kDefaultPrime : o.seed_text) +
               codec::decode(sample.tokens, loaded.vocab);
    }
    const double secs = seconds_since(t0);
    OutputGuard guard;
    if (o.out.empty() || o.out == "-") {
        out << text;
    } else {
        guard.track(o.out);
        write_file_atomic(o.out, text);
    }
    err << o.length << " characters in " << secs << " s (" << (secs > 0 ? static_cast<double>(o.length) / secs : 0.0)
        << " chars/s)\n";
    guard.commit();
    return 0;
}

void append_csv(const std::string& path, const codec::RealismReport& report) {
    std::error_code ec;
    const bool fresh = !fs::exists(path, ec) || fs::file_size(path, ec) == 0;
    std::ofstream f(path, std::ios::app | std::ios::binary);
    if (!f) throw IoError("cannot open " + path + " for appending");
    if (fresh) f << codec::realism_csv_header() << "\n";
    f << codec::to_csv_row(report) << "\n";
    if (!f) throw IoError("failed writing " + path);
}

int cmd_features(const Options& o, bool from_generator, std::ostream& out) {
    codec::RealismReport report;
    if (from_generator) {
        auto loaded = models::load_generator(o.checkpoint);
        Rng rng(o.seed_given ? o.seed : 1);
        report = gan::evaluate_generator(loaded.model, loaded.vocab, o.length, rng);
    } else {
        if (o.log.empty()) throw ConfigError("a log file is required");
        report = codec::realism_features(read_file(o.log), {.case_insensitive = o.ignore_case});
    }
    out << codec::to_key_value(report);
    if (!o.csv.empty()) append_csv(o.csv, report);
    return 0;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Multi-car elevator log simulator and GAN log generator", "liftgan"};
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all", "Show help for every subcommand");
    Options o;

    auto config_opt = [&](CLI::App* sub, const std::string& what) {
        return sub->add_option("-c,--config", o.config, what);
    };
    auto seed_opt = [&](CLI::App* sub, const std::string& what) {
        sub->add_option_function<std::uint64_t>(
               "--seed", [&](std::uint64_t v) { o.seed = v; o.seed_given = true; }, what)
            ->type_name("N");
    };

    auto* simulate = app.add_subcommand("simulate", "Run the elevator simulator and write its event log");
    config_opt(simulate, "Building config (key=value) or a directory of configs for batch mode");
    simulate->add_option("-t,--t-max", o.t_max, "Simulated ticks (default 1e6, or 1e4 per config in batch mode)")
        ->check(CLI::NonNegativeNumber);
    simulate->add_option("-o,--out", o.out, "Output log file (stdout if omitted); output directory in batch mode");
    seed_opt(simulate, "Override the config's simulator seed");

    auto* pretrain_gen = app.add_subcommand("pretrain-gen", "MLE-pretrain the generator on a simulator log");
    auto* pretrain_disc = app.add_subcommand("pretrain-disc", "Pretrain the discriminator against generator samples");
    auto* train = app.add_subcommand("train", "Pretrain both networks, then run the adversarial epochs");
    for (auto* sub : {pretrain_gen, pretrain_disc, train}) {
        config_opt(sub, "Training config (key=value); a relative corpus path may be relative to it")->required();
        sub->add_option("-o,--out", o.out, "Output directory (overrides out_dir)");
        seed_opt(sub, "Base seed: seed=N, data_seed=N+1, sample_seed=N+2, dropout_seed=N+3");
    }
    for (auto* sub : {pretrain_disc, train}) {
        sub->add_option("--checkpoint", o.checkpoint, "Start from this generator checkpoint (overrides gen_checkpoint)");
    }

    auto* generate = app.add_subcommand("generate", "Sample text from a generator checkpoint");
    generate->add_option("--checkpoint", o.checkpoint, "Generator checkpoint")->required();
    generate->add_option("--seed-text", o.seed_text, "Text fed to the generator first (default \"1 - New Call:\")");
    generate->add_option("--length", o.length, "Characters to generate (default 10000)");
    generate->add_option("-o,--out", o.out, "Output file (stdout if omitted)");
    seed_opt(generate, "Sampling seed (default 1)");

    auto* evaluate = app.add_subcommand("evaluate", "Realism report for a log file or a generator checkpoint");
    auto* features = app.add_subcommand("features", "Realism report for a log file");
    for (auto* sub : {evaluate, features}) {
        sub->add_option("log", o.log, "Log file to measure");
        sub->add_option("--csv", o.csv, "Append the report as one CSV row (header written to a new file)");
        sub->add_flag("--ignore-case", o.ignore_case, "Accept lowercased keywords (samples of a folded vocabulary)");
    }
    evaluate->add_option("--checkpoint", o.checkpoint, "Measure a fresh sample of this generator instead of a file");
    evaluate->add_option("--length", o.length, "Sample length with --checkpoint (>= 1000, default 10000)");
    seed_opt(evaluate, "Sampling seed with --checkpoint (default 1)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        // help requests exit 0 and print the help of the subcommand that was asked
        return app.exit(e, out, err) == 0 ? 0 : 2;
    }

    try {
        if (simulate->parsed()) return cmd_simulate(o, out, err);
        if (pretrain_gen->parsed()) return cmd_train(o, Phase::PretrainGen, err);
        if (pretrain_disc->parsed()) return cmd_train(o, Phase::PretrainDisc, err);
        if (train->parsed()) return cmd_train(o, Phase::Full, err);
        if (generate->parsed()) return cmd_generate(o, out, err);
        if (evaluate->parsed()) {
            if (!o.checkpoint.empty() && !o.log.empty()) throw ConfigError("evaluate: give a log file or --checkpoint, not both");
            return cmd_features(o, !o.checkpoint.empty(), out);
        }
        if (features->parsed()) return cmd_features(o, false, out);
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}

}  // namespace liftgan::cli

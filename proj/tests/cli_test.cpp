#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <random>
#include <sstream>

#include "liftgan/cli.hpp"
#include "liftgan/file_io.hpp"
#include "liftgan/kv_config.hpp"

namespace fs = std::filesystem;
using namespace liftgan;

namespace {

struct Result {
    int code;
    std::string out, err;
};

Result invoke(std::vector<std::string> args) {
    args.insert(args.begin(), "liftgan");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

std::size_t count_lines(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

double report_value(const std::string& report, const std::string& key) {
    return KeyValueConfig::parse(report).get_double(key, -1.0);
}

class Cli : public ::testing::Test {
protected:
    void SetUp() override {
        dir_ = fs::temp_directory_path() /
               (std::string("liftgan_cli_") + ::testing::UnitTest::GetInstance()->current_test_info()->name());
        fs::remove_all(dir_);
        fs::create_directories(dir_);
    }
    void TearDown() override { fs::remove_all(dir_); }

    std::string path(const std::string& name) const { return (dir_ / name).string(); }

    std::string write(const std::string& name, const std::string& text) const {
        write_file_atomic(path(name), text);
        return path(name);
    }

    // a short simulator log and a tiny training config pointing at it
    std::string small_corpus() const {
        write("sim.cfg", "num_shafts=2\ncars_per_shaft=2\nnum_floors=8\narrival_rate=0.02\nt_max=20000\n");
        EXPECT_EQ(invoke({"simulate", "-c", path("sim.cfg"), "-o", path("sim.log")}).code, 0);
        return path("sim.log");
    }

    std::string train_cfg(int epochs = 1) const {
        const auto corpus = small_corpus();
        return write("train.cfg", "corpus=" + corpus + "\nout_dir=" + path("run") +
                                      "\nseq_length=20\nbatch_size=16\nemb_dim=8\nhidden_dim=16\n"
                                      "disc_emb_dim=8\nfilters=8\ndisc_hidden=8\npretrain_gen_epochs=1\n"
                                      "pretrain_disc_epochs=1\ndisc_samples=32\npg_batch=4\n"
                                      "n_rollouts=2\neval_chars=1000\nepochs=" +
                                      std::to_string(epochs) + "\n");
    }

    fs::path dir_;
};

}  // namespace

TEST(CliParse, SubcommandIsRequired) {
    EXPECT_NE(invoke({}).code, 0);
    EXPECT_NE(invoke({"frobnicate"}).code, 0);
}

TEST(CliParse, UnknownFlagIsAnError) {
    const auto r = invoke({"simulate", "--bogus"});
    EXPECT_NE(r.code, 0);
    EXPECT_NE(r.err.find("--bogus"), std::string::npos);
    EXPECT_NE(invoke({"generate", "--checkpoint", "x", "--t-max", "3"}).code, 0);
}

TEST(CliParse, EveryHelpListsItsFlags) {
    const std::vector<std::pair<std::string, std::vector<std::string>>> expected = {
        {"simulate", {"--config", "--t-max", "--out", "--seed"}},
        {"pretrain-gen", {"--config", "--out", "--seed"}},
        {"pretrain-disc", {"--config", "--out", "--seed", "--checkpoint"}},
        {"train", {"--config", "--out", "--seed", "--checkpoint"}},
        {"generate", {"--checkpoint", "--seed-text", "--length", "--out", "--seed"}},
        {"evaluate", {"--csv", "--ignore-case", "--checkpoint", "--length", "--seed"}},
        {"features", {"--csv", "--ignore-case"}},
    };
    for (const auto& [sub, flags] : expected) {
        const auto r = invoke({sub, "--help"});
        EXPECT_EQ(r.code, 0) << sub;
        for (const auto& f : flags) EXPECT_NE(r.out.find(f), std::string::npos) << sub << " " << f;
    }
    EXPECT_EQ(invoke({"--help"}).code, 0);
}

TEST_F(Cli, SimulateZeroTicksWritesEmptyFile) {
    const auto r = invoke({"simulate", "-t", "0", "-o", path("empty.log")});
    EXPECT_EQ(r.code, 0);
    ASSERT_TRUE(fs::exists(path("empty.log")));
    EXPECT_EQ(fs::file_size(path("empty.log")), 0u);
    EXPECT_NE(r.err.find("0 lines"), std::string::npos);
}

TEST_F(Cli, SimulateDefaultsGiveTheExpectedVolume) {
    ASSERT_EQ(invoke({"simulate", "-o", path("default.log")}).code, 0);
    const auto n = count_lines(read_file(path("default.log")));
    EXPECT_GE(n, 15000u);
    EXPECT_LE(n, 27000u);
}

TEST_F(Cli, SimulateIsDeterministicAndSeedable) {
    write("c.cfg", "num_shafts=2\nnum_floors=9\narrival_rate=0.05\nt_max=5000\nseed=7\n");
    ASSERT_EQ(invoke({"simulate", "-c", path("c.cfg"), "-o", path("a.log")}).code, 0);
    ASSERT_EQ(invoke({"simulate", "-c", path("c.cfg"), "-o", path("b.log")}).code, 0);
    ASSERT_EQ(invoke({"simulate", "-c", path("c.cfg"), "--seed", "8", "-o", path("c.log")}).code, 0);
    EXPECT_EQ(read_file(path("a.log")), read_file(path("b.log")));
    EXPECT_NE(read_file(path("a.log")), read_file(path("c.log")));
    // -t overrides the config
    ASSERT_EQ(invoke({"simulate", "-c", path("c.cfg"), "-t", "1000", "-o", path("d.log")}).code, 0);
    EXPECT_LT(count_lines(read_file(path("d.log"))), count_lines(read_file(path("a.log"))));
}

TEST_F(Cli, SimulateToStdout) {
    write("c.cfg", "arrival_rate=0.05\nt_max=2000\n");
    const auto r = invoke({"simulate", "-c", path("c.cfg")});
    EXPECT_EQ(r.code, 0);
    EXPECT_GT(count_lines(r.out), 0u);
}

TEST_F(Cli, SimulateBatchModeWritesOneLogPerConfig) {
    fs::create_directories(dir_ / "configs");
    write("configs/small.cfg", "num_shafts=1\nnum_floors=5\narrival_rate=0.05\n");
    write("configs/wide.cfg", "num_shafts=3\nnum_floors=10\narrival_rate=0.05\n");
    const auto r = invoke({"simulate", "-c", path("configs"), "-o", path("logs")});
    ASSERT_EQ(r.code, 0) << r.err;
    for (const auto* name : {"small.log", "wide.log"}) {
        const auto text = read_file(path(std::string("logs/") + name));
        EXPECT_GT(count_lines(text), 0u);
        // 1e4 ticks unless a config says otherwise
        const auto last = text.substr(text.rfind('\n', text.size() - 2) + 1);
        EXPECT_LT(std::stoll(last), 10000);
    }
}

TEST_F(Cli, SimulateRejectsUnknownKeysAndLeavesNoOutput) {
    write("bad.cfg", "num_shafts=2\nfloors=10\n");
    const auto r = invoke({"simulate", "-c", path("bad.cfg"), "-o", path("out.log")});
    EXPECT_NE(r.code, 0);
    EXPECT_NE(r.err.find("floors"), std::string::npos);
    EXPECT_FALSE(fs::exists(path("out.log")));
}

TEST_F(Cli, SimulateUnwritableOutputFails) {
    const auto r = invoke({"simulate", "-t", "100", "-o", path("missing_dir/x.log")});
    EXPECT_NE(r.code, 0);
    EXPECT_FALSE(r.err.empty());
}

TEST_F(Cli, BatchFailureRemovesLogsAlreadyWritten) {
    fs::create_directories(dir_ / "configs");
    write("configs/a.cfg", "num_floors=5\n");
    write("configs/b.cfg", "bogus=1\n");
    EXPECT_NE(invoke({"simulate", "-c", path("configs"), "-o", path("logs")}).code, 0);
    EXPECT_FALSE(fs::exists(path("logs/a.log")));
}

TEST_F(Cli, TrainWithZeroEpochsOnlyPretrains) {
    const auto cfg = train_cfg(0);
    const auto r = invoke({"train", "-c", cfg});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto history = read_file(path("run/history.csv"));
    EXPECT_EQ(count_lines(history), 3u);  // header, pre_gen_1, pre_disc_1
    EXPECT_NE(history.find("pre_gen_1,"), std::string::npos);
    EXPECT_NE(history.find("pre_disc_1,"), std::string::npos);
    EXPECT_TRUE(fs::exists(path("run/generator.ckpt")));
    EXPECT_TRUE(fs::exists(path("run/discriminator.ckpt")));
}

TEST_F(Cli, TrainRerunIsByteIdentical) {
    const auto cfg = train_cfg();
    ASSERT_EQ(invoke({"train", "-c", cfg, "-o", path("a")}).code, 0);
    ASSERT_EQ(invoke({"train", "-c", cfg, "-o", path("b")}).code, 0);
    ASSERT_EQ(invoke({"train", "-c", cfg, "-o", path("c"), "--seed", "11"}).code, 0);
    EXPECT_EQ(read_file(path("a/history.csv")), read_file(path("b/history.csv")));
    EXPECT_EQ(read_file(path("a/generator.ckpt")), read_file(path("b/generator.ckpt")));
    EXPECT_NE(read_file(path("a/history.csv")), read_file(path("c/history.csv")));
}

TEST_F(Cli, PhasesChainThroughTheCheckpointFlag) {
    const auto cfg = train_cfg();
    ASSERT_EQ(invoke({"pretrain-gen", "-c", cfg, "-o", path("gen")}).code, 0);
    EXPECT_TRUE(fs::exists(path("gen/generator.ckpt")));
    EXPECT_FALSE(fs::exists(path("gen/discriminator.ckpt")));
    const auto r = invoke({"pretrain-disc", "-c", cfg, "-o", path("disc"), "--checkpoint", path("gen/generator.ckpt")});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_TRUE(fs::exists(path("disc/discriminator.ckpt")));
    EXPECT_NE(read_file(path("disc/history.csv")).find("pre_disc_1"), std::string::npos);
}

TEST_F(Cli, MissingCorpusFailsWithoutOutputs) {
    const auto cfg = write("t.cfg", "corpus=" + path("nope.log") + "\nout_dir=" + path("run") + "\n");
    const auto r = invoke({"train", "-c", cfg});
    EXPECT_NE(r.code, 0);
    EXPECT_FALSE(fs::exists(path("run/history.csv")));
    EXPECT_FALSE(fs::exists(path("run/generator.ckpt")));
    EXPECT_NE(invoke({"train"}).code, 0);
}

TEST_F(Cli, VocabularyMismatchWithCheckpointIsRefused) {
    const auto cfg = train_cfg();
    ASSERT_EQ(invoke({"pretrain-gen", "-c", cfg, "-o", path("gen")}).code, 0);
    // same settings but a corpus with a different alphabet
    std::string other;
    for (int i = 0; i < 50; ++i) other += "1 - New call: zz from 1 to 2 guests 1\n";
    write("other.log", other);
    auto text = read_file(cfg);
    text.replace(text.find("corpus="), text.find('\n') - text.find("corpus="), "corpus=" + path("other.log"));
    write("other.cfg", text);
    const auto r = invoke({"pretrain-disc", "-c", path("other.cfg"), "-o", path("x"), "--checkpoint",
                        path("gen/generator.ckpt")});
    EXPECT_NE(r.code, 0);
    EXPECT_NE(r.err.find("vocabulary"), std::string::npos) << r.err;
    EXPECT_FALSE(fs::exists(path("x/discriminator.ckpt")));
}

TEST_F(Cli, GenerateHonoursSeedTextLengthAndSeed) {
    ASSERT_EQ(invoke({"pretrain-gen", "-c", train_cfg(), "-o", path("gen")}).code, 0);
    const auto ckpt = path("gen/generator.ckpt");

    ASSERT_EQ(invoke({"generate", "--checkpoint", ckpt, "--length", "0", "-o", path("zero.txt")}).code, 0);
    EXPECT_EQ(fs::file_size(path("zero.txt")), 0u);

    const auto r = invoke({"generate", "--checkpoint", ckpt, "--length", "300", "-o", path("a.txt")});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.err.find("chars/s"), std::string::npos);
    const auto a = read_file(path("a.txt"));
    EXPECT_EQ(a.rfind("1 - new call:", 0), 0u);  // default seed, folded like the vocabulary
    EXPECT_EQ(a.size(), std::string("1 - new call:").size() + 300);

    ASSERT_EQ(invoke({"generate", "--checkpoint", ckpt, "--length", "300", "-o", path("b.txt")}).code, 0);
    EXPECT_EQ(a, read_file(path("b.txt")));
    ASSERT_EQ(invoke({"generate", "--checkpoint", ckpt, "--length", "300", "--seed", "9", "-o", path("c.txt")}).code,
              0);
    EXPECT_NE(a, read_file(path("c.txt")));

    const auto s = invoke({"generate", "--checkpoint", ckpt, "--length", "5", "--seed-text", "12 - "});
    EXPECT_EQ(s.out.rfind("12 - ", 0), 0u);
}

TEST_F(Cli, GenerateRejectsATamperedManifest) {
    ASSERT_EQ(invoke({"pretrain-gen", "-c", train_cfg(), "-o", path("gen")}).code, 0);
    const auto manifest = path("gen/generator.ckpt.manifest");
    auto text = read_file(manifest);
    const auto at = text.find("vocab_fingerprint=") + std::string("vocab_fingerprint=").size();
    text[at] = text[at] == '0' ? '1' : '0';
    write_file_atomic(manifest, text);
    const auto r = invoke({"generate", "--checkpoint", path("gen/generator.ckpt"), "-o", path("out.txt")});
    EXPECT_NE(r.code, 0);
    EXPECT_FALSE(fs::exists(path("out.txt")));
    EXPECT_NE(invoke({"generate", "--checkpoint", path("nothing.ckpt")}).code, 0);
}

TEST_F(Cli, EvaluateSimulatorLog) {
    const auto log = small_corpus();
    const auto r = invoke({"evaluate", log});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(report_value(r.out, "line_parse_rate"), 1.0);
    EXPECT_EQ(report_value(r.out, "lifecycle_complete_rate"), 1.0);
    EXPECT_EQ(report_value(r.out, "timestamp_monotonic_fraction"), 1.0);
    EXPECT_EQ(invoke({"features", log}).out, r.out);
}

TEST_F(Cli, ShuffledLogIsHalfMonotonic) {
    const auto text = read_file(small_corpus());
    std::vector<std::string> lines;
    std::istringstream in(text);
    for (std::string line; std::getline(in, line);) lines.push_back(line);
    std::mt19937_64 g(5);
    std::shuffle(lines.begin(), lines.end(), g);
    std::string shuffled;
    for (const auto& l : lines) shuffled += l + "\n";
    const auto r = invoke({"features", write("shuffled.log", shuffled)});
    ASSERT_EQ(r.code, 0);
    // adjacent pairs of a random permutation ascend with probability 1/2; ties count as ascending
    EXPECT_NEAR(report_value(r.out, "timestamp_monotonic_fraction"), 0.5, 0.06);
}

TEST_F(Cli, CsvAppendsRowsUnderOneHeader) {
    const auto log = small_corpus();
    ASSERT_EQ(invoke({"evaluate", log, "--csv", path("r.csv")}).code, 0);
    ASSERT_EQ(invoke({"features", log, "--csv", path("r.csv")}).code, 0);
    const auto csv = read_file(path("r.csv"));
    EXPECT_EQ(count_lines(csv), 3u);
    EXPECT_EQ(csv.rfind("lines_total,", 0), 0u);
    EXPECT_EQ(csv.find("lines_total,", 1), std::string::npos);
}

TEST_F(Cli, IgnoreCaseAcceptsFoldedKeywords) {
    write("folded.log", "1 - new call: call_1 from 1 to 2 guests 1\n");
    EXPECT_EQ(report_value(invoke({"features", path("folded.log")}).out, "line_parse_rate"), 0.0);
    EXPECT_EQ(report_value(invoke({"features", path("folded.log"), "--ignore-case"}).out, "line_parse_rate"), 1.0);
}

TEST_F(Cli, EvaluateSamplesACheckpoint) {
    ASSERT_EQ(invoke({"pretrain-gen", "-c", train_cfg(), "-o", path("gen")}).code, 0);
    const auto r = invoke({"evaluate", "--checkpoint", path("gen/generator.ckpt"), "--length", "1000"});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_GE(report_value(r.out, "lines_total"), 1.0);
    EXPECT_EQ(invoke({"evaluate", "--checkpoint", path("gen/generator.ckpt"), "--length", "1000"}).out, r.out);
    EXPECT_NE(invoke({"evaluate", "--checkpoint", path("gen/generator.ckpt"), "--length", "10"}).code, 0);
}

TEST_F(Cli, EvaluateMissingFileFails) {
    const auto r = invoke({"evaluate", path("absent.log")});
    EXPECT_NE(r.code, 0);
    EXPECT_FALSE(r.err.empty());
    EXPECT_NE(invoke({"evaluate"}).code, 0);
}

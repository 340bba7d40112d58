#include "liftgan/models/checkpoint.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "liftgan/kv_config.hpp"
#include "liftgan/nn/checkpoint.hpp"

namespace liftgan::models {

namespace {

constexpr int kManifestVersion = 1;

std::string to_hex(std::string_view bytes) {
    static const char digits[] = "0123456789abcdef";
    std::string out;
    for (const unsigned char c : bytes) {
        out += digits[c >> 4];
        out += digits[c & 15];
    }
    return out;
}

std::string from_hex(std::string_view hex) {
    if (hex.size() % 2) throw ManifestError("manifest: odd-length vocabulary hex");
    auto nibble = [](char c) {
        if (c >= '0' && c <= '9') return c - '0';
        if (c >= 'a' && c <= 'f') return c - 'a' + 10;
        throw ManifestError(std::string("manifest: bad hex digit '") + c + "'");
    };
    std::string out;
    for (std::size_t i = 0; i < hex.size(); i += 2) out += static_cast<char>(nibble(hex[i]) * 16 + nibble(hex[i + 1]));
    return out;
}

std::string fingerprint_str(std::uint64_t f) {
    char buf[24];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(f));
    return buf;
}

void write_manifest(const std::filesystem::path& checkpoint, const std::string& kind, const codec::Vocabulary& vocab,
                    const std::vector<std::pair<std::string, std::string>>& hyper) {
    std::ostringstream out;
    out << "kind=" << kind << "\n"
        << "format=" << kManifestVersion << "\n"
        << "vocab_hex=" << to_hex(vocab.symbols()) << "\n"
        << "vocab_folded=" << (vocab.folded() ? "true" : "false") << "\n"
        << "vocab_fingerprint=" << fingerprint_str(vocab.fingerprint()) << "\n";
    for (const auto& [k, v] : hyper) out << k << "=" << v << "\n";
    const auto path = manifest_path(checkpoint);
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    f << out.str();
    f.close();
    if (!f) throw ManifestError("cannot write " + path.string());
}

struct Manifest {
    KeyValueConfig kv;
    codec::Vocabulary vocab;
};

Manifest read_manifest(const std::filesystem::path& checkpoint, const std::string& kind,
                       const codec::Vocabulary* expected) {
    const auto path = manifest_path(checkpoint);
    KeyValueConfig kv;
    try {
        kv = KeyValueConfig::load(path.string());
    } catch (const ConfigError& e) {
        throw ManifestError(e.what());
    }
    const auto got_kind = kv.get_string("kind", "");
    if (got_kind != kind) throw ManifestError(path.string() + ": expected a " + kind + " checkpoint, found '" + got_kind + "'");
    if (kv.get_int("format", 0) != kManifestVersion) throw ManifestError(path.string() + ": unsupported manifest format");
    codec::Vocabulary vocab;
    try {
        vocab = codec::Vocabulary::from_symbols(from_hex(kv.get_string("vocab_hex", "")), kv.get_bool("vocab_folded", false));
    } catch (const codec::CodecError& e) {
        throw ManifestError(path.string() + ": " + e.what());
    }
    if (kv.get_string("vocab_fingerprint", "") != fingerprint_str(vocab.fingerprint())) {
        throw ManifestError(path.string() + ": vocabulary fingerprint does not match its symbols");
    }
    if (expected && !(*expected == vocab)) {
        throw ManifestError(path.string() + ": checkpoint vocabulary (" + std::to_string(vocab.size()) +
                            " symbols, fingerprint " + fingerprint_str(vocab.fingerprint()) +
                            ") does not match the corpus vocabulary (" + std::to_string(expected->size()) +
                            " symbols, fingerprint " + fingerprint_str(expected->fingerprint()) + ")");
    }
    return {std::move(kv), std::move(vocab)};
}

void load_values(nn::ParamSet& params, const std::filesystem::path& path) {
    try {
        nn::load_params(params, path);
    } catch (const nn::CheckpointError& e) {
        throw ManifestError(path.string() + ": " + e.what());
    }
}

std::size_t get_size(const KeyValueConfig& kv, const char* key) {
    return static_cast<std::size_t>(kv.get_uint(key, 0));
}

}  // namespace

std::filesystem::path manifest_path(const std::filesystem::path& checkpoint) {
    auto p = checkpoint;
    p += ".manifest";
    return p;
}

void save_generator(const Generator& gen, const codec::Vocabulary& vocab, const std::filesystem::path& path) {
    const auto& c = gen.config();
    if (vocab.size() != c.vocab_size) throw ManifestError("save_generator: vocabulary size mismatch");
    nn::save_params(gen.params(), path);
    write_manifest(path, "generator", vocab,
                   {{"vocab_size", std::to_string(c.vocab_size)},
                    {"emb_dim", std::to_string(c.emb_dim)},
                    {"hidden_dim", std::to_string(c.hidden_dim)},
                    {"temperature", codec::format_double(c.temperature)}});
}

void save_discriminator(const Discriminator& disc, const codec::Vocabulary& vocab, const std::filesystem::path& path) {
    const auto& c = disc.config();
    if (vocab.size() != c.vocab_size) throw ManifestError("save_discriminator: vocabulary size mismatch");
    nn::save_params(disc.params(), path);
    write_manifest(path, "discriminator", vocab,
                   {{"vocab_size", std::to_string(c.vocab_size)},
                    {"emb_dim", std::to_string(c.emb_dim)},
                    {"filters", std::to_string(c.filters)},
                    {"width", std::to_string(c.width)},
                    {"hidden", std::to_string(c.hidden)},
                    {"dropout", codec::format_double(c.dropout)}});
}

LoadedGenerator load_generator(const std::filesystem::path& path, const codec::Vocabulary* expected) {
    auto m = read_manifest(path, "generator", expected);
    GeneratorConfig c;
    c.vocab_size = get_size(m.kv, "vocab_size");
    c.emb_dim = get_size(m.kv, "emb_dim");
    c.hidden_dim = get_size(m.kv, "hidden_dim");
    c.temperature = m.kv.get_double("temperature", 1.0);
    if (c.vocab_size != m.vocab.size()) throw ManifestError(path.string() + ": vocab_size disagrees with vocabulary");
    Rng unused(0);
    LoadedGenerator out{Generator(c, unused), std::move(m.vocab)};
    load_values(out.model.params(), path);
    return out;
}

LoadedDiscriminator load_discriminator(const std::filesystem::path& path, const codec::Vocabulary* expected) {
    auto m = read_manifest(path, "discriminator", expected);
    DiscriminatorConfig c;
    c.vocab_size = get_size(m.kv, "vocab_size");
    c.emb_dim = get_size(m.kv, "emb_dim");
    c.filters = get_size(m.kv, "filters");
    c.width = get_size(m.kv, "width");
    c.hidden = get_size(m.kv, "hidden");
    c.dropout = m.kv.get_double("dropout", 0.2);
    if (c.vocab_size != m.vocab.size()) throw ManifestError(path.string() + ": vocab_size disagrees with vocabulary");
    Rng unused(0);
    LoadedDiscriminator out{Discriminator(c, unused), std::move(m.vocab)};
    load_values(out.model.params(), path);
    return out;
}

}  // namespace liftgan::models

#pragma once

#include <filesystem>
#include <stdexcept>

#include "liftgan/log_codec.hpp"
#include "liftgan/models/discriminator.hpp"
#include "liftgan/models/generator.hpp"

namespace liftgan::models {

// Model checkpoints are two files: the parameter checkpoint at `path` and a
// key=value manifest at `path` + ".manifest" holding the model kind, the
// vocabulary (hex-encoded symbols, fold flag, fingerprint) and the layer
// sizes needed to rebuild the network.
class ManifestError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

std::filesystem::path manifest_path(const std::filesystem::path& checkpoint);

void save_generator(const Generator& gen, const codec::Vocabulary& vocab, const std::filesystem::path& path);
void save_discriminator(const Discriminator& disc, const codec::Vocabulary& vocab, const std::filesystem::path& path);

struct LoadedGenerator {
    Generator model;
    codec::Vocabulary vocab;
};
struct LoadedDiscriminator {
    Discriminator model;
    codec::Vocabulary vocab;
};

// When `expected` is given, a checkpoint built for a different vocabulary is
// refused with ManifestError.
LoadedGenerator load_generator(const std::filesystem::path& path, const codec::Vocabulary* expected = nullptr);
LoadedDiscriminator load_discriminator(const std::filesystem::path& path, const codec::Vocabulary* expected = nullptr);

}  // namespace liftgan::models

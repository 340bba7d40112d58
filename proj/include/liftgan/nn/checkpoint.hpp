#pragma once

#include <filesystem>
#include <iosfwd>
#include <stdexcept>

#include "liftgan/nn/param_set.hpp"

namespace liftgan::nn {

struct CheckpointError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Binary layout, all integers and doubles little-endian:
//   "LGPARAMS"  u32 version(=1)  u64 count
//   per parameter: u64 name_len, name bytes, u64 rank, rank x u64 dims,
//                  prod(dims) x f64 (IEEE 754 bit pattern)
// Only names and values are stored; optimizer state is not.
void save_params(const ParamSet& params, std::ostream& out);
void save_params(const ParamSet& params, const std::filesystem::path& path);

// Reads a checkpoint into an existing set. Every stored name must exist with
// the same shape and every parameter must be present; otherwise throws
// CheckpointError and leaves the set unchanged.
void load_params(ParamSet& params, std::istream& in);
void load_params(ParamSet& params, const std::filesystem::path& path);

// Reads a checkpoint into a fresh set.
ParamSet read_params(std::istream& in);

}  // namespace liftgan::nn

#pragma once

#include <cstdint>
#include <string>

#include "gpda/models.hpp"

namespace gpda::models {

/// Parameters as a flat list of named float64 arrays with shapes,
/// little-endian and length-prefixed, next to a JSON manifest carrying the
/// layer sizes and seed.
void save_checkpoint(const ModelSet& models, std::uint64_t seed, const std::string& params_path,
                     const std::string& manifest_path);

struct Checkpoint {
    ModelSet models;
    std::uint64_t seed = 0;
};

Checkpoint load_checkpoint(const std::string& params_path, const std::string& manifest_path);

}  // namespace gpda::models

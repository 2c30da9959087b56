#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>

#include "phsa/parameters.hpp"
#include "phsa/run_config.hpp"

namespace phsa {

/// Text layout:
///   # phsa-checkpoint v1
///   step=<optimizer steps>
///   epoch=<completed epochs>
///   config=<RunConfig as one-line JSON>
///   tensors=<count>
///   <name>,<rows>,<cols>,<row-major values>   (one line per tensor)
/// Values use shortest round-trip form, so load is bit-exact and
/// save(load(save(x))) reproduces the same bytes.
struct Checkpoint {
    RunConfig config;
    ParameterSet params;
    std::size_t step = 0;
    std::size_t epoch = 0;
};

inline constexpr const char* kCheckpointHeader = "# phsa-checkpoint v1";

void save_checkpoint(std::ostream& out, const Checkpoint& ckpt);
Checkpoint load_checkpoint(std::istream& in);
void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace phsa

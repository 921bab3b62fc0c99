#pragma once

#include "endo/fnlanet/network.hpp"

#include <cstdint>
#include <filesystem>
#include <memory>
#include <stdexcept>
#include <string>

namespace endo::nn {

/// Unreadable, truncated or corrupted checkpoint file.
class CheckpointError : public std::runtime_error {
public:
    explicit CheckpointError(const std::string& what) : std::runtime_error(what) {}
};

struct CheckpointInfo {
    std::string role;
    int epoch = 0;  ///< epochs completed
    double initial_lr = 1e-3;
    double lr_decay = 0.99;
};

/// Layout:
///   line 1   "FNLA-CHECKPOINT v1"
///   line 2   decimal byte length L of the header
///   L bytes  JSON header (config, seed, info, parameter table, payload crc32)
///   payload  every parameter array in store order as little-endian float32
void save_checkpoint(const std::filesystem::path& path, const Network& net, const CheckpointInfo& info);

struct LoadedCheckpoint {
    std::unique_ptr<Network> net;
    CheckpointInfo info;
};
LoadedCheckpoint load_checkpoint(const std::filesystem::path& path);

// JSON round trip of NetConfig, shared with the command line.
std::string net_config_to_json(const NetConfig& cfg);
/// Missing keys keep their defaults; throws std::invalid_argument on bad values.
NetConfig net_config_from_json(const std::string& text);

}  // namespace endo::nn

#pragma once

#include "endo/imgcore/io.hpp"
#include "endo/postproc/cell_graph.hpp"

#include <json.hpp>

#include <filesystem>
#include <ostream>
#include <stdexcept>
#include <string>

namespace endo::cli {

inline constexpr const char* kToolVersion = "0.1.0";

enum ExitCode : int { kOk = 0, kInputError = 1, kRuntimeFault = 2 };

/// Bad configuration, missing or unreadable inputs.
class InputError : public std::runtime_error {
public:
    explicit InputError(const std::string& what) : std::runtime_error(what) {}
};

struct RunOptions {
    std::filesystem::path out;
    int workers = 1;
};

// Each command takes its effective JSON config (file values with flag
// overrides already applied) and writes its artifacts plus manifest.json
// under run.out. Schemas are documented in README.md.
void cmd_generate(const nlohmann::json& config, const RunOptions& run);
void cmd_train(const nlohmann::json& config, const RunOptions& run);
void cmd_infer(const nlohmann::json& config, const RunOptions& run);
void cmd_postprocess(const nlohmann::json& config, const RunOptions& run);
void cmd_evaluate(const nlohmann::json& config, const RunOptions& run);

/// Parses arguments, runs one subcommand and maps failures to exit codes.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

/// Gray background, red ridges, yellow vertices, blue non-ROI and kept cells
/// in two alternating greens.
img::RgbImage render_overlay(const img::Image2D& background, const post::Segmentation& segmentation);

}  // namespace endo::cli

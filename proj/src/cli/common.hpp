#pragma once

#include "endo/biomarkers/biomarkers.hpp"
#include "endo/cli/cli.hpp"

#include <json.hpp>

#include <atomic>
#include <chrono>
#include <exception>
#include <filesystem>
#include <optional>
#include <string>
#include <thread>
#include <vector>

namespace endo::cli::detail {

using json = nlohmann::json;
namespace fs = std::filesystem;

json read_json(const fs::path& path);
void write_text(const fs::path& path, const std::string& text);
std::string read_text(const fs::path& path);

/// config[key] converted to T, `fallback` when absent; wrong types raise InputError.
template <class T>
T get(const json& config, const std::string& key, const T& fallback) {
    if (!config.is_object() || !config.contains(key) || config.at(key).is_null()) return fallback;
    try {
        return config.at(key).get<T>();
    } catch (const json::exception&) {
        throw InputError("config key '" + key + "' has the wrong type");
    }
}

/// Required path-valued key, resolved as given.
fs::path require_path(const json& config, const std::string& key);

/// Runs task(i) for i in [0, n) on `workers` threads. Results must be
/// written by index so output order never depends on scheduling. The first
/// exception (lowest index) is rethrown after all tasks finish.
template <class Task>
void parallel_for(std::size_t n, int workers, Task task) {
    std::vector<std::exception_ptr> errors(n);
    std::atomic<std::size_t> next{0};
    const auto worker = [&] {
        for (std::size_t i = next++; i < n; i = next++) {
            try {
                task(i);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    const auto count = static_cast<std::size_t>(std::max(1, workers));
    std::vector<std::thread> pool;
    for (std::size_t t = 1; t < std::min(count, n); ++t) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
}

class Stopwatch {
public:
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

/// manifest.json: command, effective config, seeds, inputs, outputs, tool
/// version, extra fields, and timing (the only field allowed to vary).
void write_manifest(const RunOptions& run, const std::string& command, const json& config, const json& seeds,
                    const json& inputs, const json& outputs, const json& extra, double seconds);

json report_to_json(const std::optional<bio::BiomarkerReport>& report);
std::optional<bio::BiomarkerReport> report_from_json(const json& j);

/// Files in `dir` with one of the extensions, keyed by stem, sorted.
std::vector<std::pair<std::string, fs::path>> files_by_stem(const fs::path& dir, const std::vector<std::string>& extensions);

/// Relative path string with forward slashes.
std::string rel(const fs::path& path, const fs::path& base);

}  // namespace endo::cli::detail

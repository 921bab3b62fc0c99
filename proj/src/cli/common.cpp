#include "common.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace endo::cli::detail {

std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot read " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

json read_json(const fs::path& path) {
    try {
        return json::parse(read_text(path));
    } catch (const json::exception& e) {
        throw InputError(path.string() + " is not valid JSON: " + e.what());
    }
}

void write_text(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << text;
    if (!out) throw std::runtime_error("cannot write " + path.string());
}

fs::path require_path(const json& config, const std::string& key) {
    const auto value = get<std::string>(config, key, "");
    if (value.empty()) throw InputError("missing required setting '" + key + "'");
    return value;
}

void write_manifest(const RunOptions& run, const std::string& command, const json& config, const json& seeds,
                    const json& inputs, const json& outputs, const json& extra, double seconds) {
    json m{{"command", command},
           {"config", config},
           {"seeds", seeds},
           {"inputs", inputs},
           {"outputs", outputs},
           {"tool_version", kToolVersion},
           {"workers", run.workers},
           {"timing", {{"seconds", seconds}}}};
    for (const auto& [k, v] : extra.items()) m[k] = v;
    write_text(run.out / "manifest.json", m.dump(2) + "\n");
}

json report_to_json(const std::optional<bio::BiomarkerReport>& report) {
    if (!report) return nullptr;
    const auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
    return json{{"n_cells", report->n_cells},
                {"ecd", report->ecd},
                {"cv", opt(report->cv)},
                {"hex_vertex", report->hex_vertex},
                {"hex_neighbor", opt(report->hex_neighbor)},
                {"n_inner", report->n_inner},
                {"pixel_pitch", report->pixel_pitch},
                {"cv_estimator", report->cv_estimator}};
}

std::optional<bio::BiomarkerReport> report_from_json(const json& j) {
    if (j.is_null()) return std::nullopt;
    try {
        bio::BiomarkerReport r;
        r.n_cells = j.at("n_cells").get<std::size_t>();
        r.ecd = j.at("ecd").get<double>();
        if (!j.at("cv").is_null()) r.cv = j.at("cv").get<double>();
        r.hex_vertex = j.at("hex_vertex").get<double>();
        if (!j.at("hex_neighbor").is_null()) r.hex_neighbor = j.at("hex_neighbor").get<double>();
        r.n_inner = j.value("n_inner", std::size_t{0});
        r.pixel_pitch = j.value("pixel_pitch", 0.0);
        r.cv_estimator = j.value("cv_estimator", r.cv_estimator);
        return r;
    } catch (const json::exception& e) {
        throw InputError(std::string("malformed biomarker report: ") + e.what());
    }
}

std::vector<std::pair<std::string, fs::path>> files_by_stem(const fs::path& dir, const std::vector<std::string>& extensions) {
    if (!fs::is_directory(dir)) throw InputError("not a directory: " + dir.string());
    std::vector<std::pair<std::string, fs::path>> out;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (!entry.is_regular_file()) continue;
        const auto ext = entry.path().extension().string();
        if (std::find(extensions.begin(), extensions.end(), ext) == extensions.end()) continue;
        out.emplace_back(entry.path().stem().string(), entry.path());
    }
    std::sort(out.begin(), out.end());
    return out;
}

std::string rel(const fs::path& path, const fs::path& base) { return path.lexically_relative(base).generic_string(); }

}  // namespace endo::cli::detail

#include "common.hpp"

#include "endo/imgcore/io.hpp"
#include "endo/synthgen/synthgen.hpp"

#include <cstdio>
#include <random>

namespace endo::cli {

using namespace detail;

namespace {

// A scalar or a [lo, hi] pair.
std::pair<double, double> range(const json& config, const std::string& key, double fallback) {
    if (!config.contains(key)) return {fallback, fallback};
    const json& v = config.at(key);
    try {
        if (v.is_number()) return {v.get<double>(), v.get<double>()};
        if (v.is_array() && v.size() == 2) {
            const auto lo = v[0].get<double>();
            const auto hi = v[1].get<double>();
            if (lo <= hi) return {lo, hi};
        }
    } catch (const json::exception&) {
    }
    throw InputError("config key '" + key + "' must be a number or an ascending [lo, hi] pair");
}

std::string image_id(std::size_t i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "img_%04zu", i);
    return buf;
}

}  // namespace

void cmd_generate(const json& config, const RunOptions& run) {
    Stopwatch clock;
    const int count = get(config, "count", 30);
    const auto seed = get<std::uint64_t>(config, "seed", 0);
    if (count < 0) throw InputError("count must be non-negative");
    const auto guttae = range(config, "guttae_fraction", 0.0);
    const auto blur = range(config, "blur_sigma", synth::MosaicSpec{}.blur_sigma);
    const double guttae_probability = get(config, "guttae_probability", guttae.second > 0.0 ? 1.0 : 0.0);
    if (!(guttae_probability >= 0.0 && guttae_probability <= 1.0)) throw InputError("guttae_probability must be in [0, 1]");

    synth::MosaicSpec base;
    base.width = get(config, "width", base.width);
    base.height = get(config, "height", base.height);
    base.target_cell_count = get(config, "target_cell_count", base.target_cell_count);
    base.lloyd_iterations = get(config, "lloyd_iterations", base.lloyd_iterations);
    base.guttae_size_px = get(config, "guttae_size_px", base.guttae_size_px);
    base.noise_sd = get(config, "noise_sd", base.noise_sd);
    base.hex_spacing = get(config, "hex_spacing", base.hex_spacing);
    base.pixel_pitch = get(config, "pixel_pitch", base.pixel_pitch);

    // All randomness is drawn up front so the worker count cannot matter.
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<synth::MosaicSpec> specs;
    for (int i = 0; i < count; ++i) {
        synth::MosaicSpec s = base;
        s.seed = rng();
        const bool with_guttae = unit(rng) < guttae_probability;
        const double g = guttae.first + (guttae.second - guttae.first) * unit(rng);
        s.guttae_fraction = with_guttae ? g : 0.0;
        s.blur_sigma = blur.first + (blur.second - blur.first) * unit(rng);
        try {
            s.validate();
        } catch (const std::invalid_argument& e) {
            throw InputError(e.what());
        }
        specs.push_back(s);
    }

    const fs::path& out = run.out;
    for (const char* d : {"images", "targets/edge", "targets/body", "targets/blob", "targets/roi", "truth"}) {
        fs::create_directories(out / d);
    }
    std::vector<json> entries(specs.size());
    parallel_for(specs.size(), run.workers, [&](std::size_t i) {
        const synth::Sample s = synth::generate_sample(specs[i]);
        const std::string id = image_id(i);
        const img::Provenance prov{{"generator", "synthgen"}, {"id", id}, {"seed", std::to_string(specs[i].seed)}};
        img::write_png(out / "images" / (id + ".png"), s.image.image);
        const std::pair<const char*, const img::ProbMap*> maps[] = {
            {"edge", &s.targets.edge}, {"body", &s.targets.body}, {"blob", &s.targets.blob}, {"roi", &s.targets.roi}};
        json targets;
        for (const auto& [role, map] : maps) {
            const fs::path p = out / "targets" / role / (id + ".pgm");
            img::write_probmap(p, *map, prov);
            targets[role] = rel(p, out);
        }
        json cells = json::object();
        for (const auto& c : s.mosaic.gold.cells) {
            json verts = json::array();
            for (const auto& v : c.vertices) verts.push_back({v[0], v[1]});
            cells[std::to_string(c.id)] = {{"vertices", verts}, {"area_px", c.area_px}};
        }
        const json truth{{"id", id}, {"biomarkers", report_to_json(s.truth)}, {"cells", cells}};
        const fs::path truth_path = out / "truth" / (id + ".json");
        write_text(truth_path, truth.dump(1) + "\n");
        entries[i] = json{{"id", id},
                          {"image", rel(out / "images" / (id + ".png"), out)},
                          {"targets", targets},
                          {"truth", rel(truth_path, out)},
                          {"seed", specs[i].seed},
                          {"guttae_fraction", specs[i].guttae_fraction},
                          {"blur_sigma", specs[i].blur_sigma},
                          {"has_guttae", specs[i].guttae_fraction > 0.0},
                          {"guttae_grade", s.image.guttae_grade},
                          {"blur_grade", s.image.blur_grade},
                          {"total_grade", s.image.total_grade},
                          {"pixel_pitch", specs[i].pixel_pitch},
                          {"biomarkers", report_to_json(s.truth)}};
    });
    const json dataset{{"format", "endo-dataset v1"}, {"pixel_pitch", base.pixel_pitch}, {"images", entries}};
    write_text(out / "dataset.json", dataset.dump(1) + "\n");
    write_manifest(run, "generate", config, {{"seed", seed}}, json::array(), {{"dataset", "dataset.json"}, {"images", count}},
                   json::object(), clock.seconds());
}

}  // namespace endo::cli

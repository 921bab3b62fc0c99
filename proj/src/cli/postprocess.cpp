#include "common.hpp"

#include "endo/imgcore/error.hpp"
#include "endo/imgcore/io.hpp"
#include "endo/postproc/pipeline.hpp"

#include <cmath>
#include <map>
#include <sstream>

namespace endo::cli {

using namespace detail;

img::RgbImage render_overlay(const img::Image2D& background, const post::Segmentation& seg) {
    const auto& labels = seg.labels;
    if (!background.same_shape(labels)) throw std::invalid_argument("overlay background and labels differ in size");
    img::RgbImage out(labels.width(), labels.height());
    const auto blend = [](std::uint8_t g, std::array<int, 3> c, double a) {
        std::array<std::uint8_t, 3> px{};
        for (int k = 0; k < 3; ++k) px[k] = static_cast<std::uint8_t>(std::lround((1.0 - a) * g + a * c[k]));
        return px;
    };
    for (int y = 0; y < labels.height(); ++y) {
        for (int x = 0; x < labels.width(); ++x) {
            const std::uint8_t g = background(x, y);
            const std::int32_t l = labels(x, y);
            std::array<std::uint8_t, 3> px{g, g, g};
            if (!seg.graph.vertex_map.empty() && seg.graph.vertex_map(x, y) > 0) {
                px = {255, 255, 0};
            } else if (l == 0) {
                px = {255, 0, 0};
            } else if (!seg.non_roi.empty() && seg.non_roi(x, y)) {
                px = blend(g, {0, 0, 255}, 0.45);
            } else if (seg.kept_cells.count(l)) {
                px = blend(g, l % 2 ? std::array<int, 3>{0, 200, 0} : std::array<int, 3>{0, 110, 40}, 0.4);
            }
            out(x, y) = px;
        }
    }
    return out;
}

namespace {

std::string cell_table(const post::Segmentation& seg) {
    std::map<std::int32_t, std::size_t> area;
    for (auto l : seg.labels.pixels()) {
        if (seg.kept_cells.count(l)) ++area[l];
    }
    const auto vertices = bio::assign_vertices_to_cells(seg.graph, seg.labels);
    const auto neighbors = bio::cell_neighbors(seg.graph);
    std::ostringstream os;
    os.precision(10);
    os << "label,area_px,vertex_count,neighbor_count,mean_body_intensity\n";
    for (const auto& [label, mean] : seg.kept_cells) {
        const auto v = vertices.find(label);
        const auto n = neighbors.find(label);
        os << label << ',' << area[label] << ',' << (v == vertices.end() ? 0 : v->second) << ','
           << (n == neighbors.end() ? 0 : n->second.size()) << ',' << mean << '\n';
    }
    return os.str();
}

img::Image2D gray(const img::ProbMap& m) {
    img::Image2D im(m.width(), m.height(), 0, m.pixel_pitch());
    for (std::size_t i = 0; i < m.size(); ++i) im[i] = static_cast<std::uint8_t>(std::lround(std::clamp(m[i], 0.0, 1.0) * 255.0));
    return im;
}

}  // namespace

void cmd_postprocess(const json& config, const RunOptions& run) {
    Stopwatch clock;
    const fs::path edge_dir = require_path(config, "edge_dir");
    const fs::path selector_dir = require_path(config, "selector_dir");
    const std::string image_dir = get<std::string>(config, "image_dir", "");

    post::PipelineConfig pc;
    const json p = config.value("pipeline", json::object());
    pc.k_sigma = get(p, "k_sigma", pc.k_sigma);
    pc.edge_threshold = get(p, "edge_threshold", pc.edge_threshold);
    pc.body_threshold = get(p, "body_threshold", pc.body_threshold);
    pc.roi_area_fraction = get(p, "roi_area_fraction", pc.roi_area_fraction);
    pc.min_edge_length = get(p, "min_edge_length", pc.min_edge_length);
    try {
        pc.selection_mode = post::parse_selection_mode(get<std::string>(p, "selection_mode", "body"));
        pc.validate();
    } catch (const std::invalid_argument& e) {
        throw InputError(e.what());
    }

    const auto edges = files_by_stem(edge_dir, {".pgm"});
    std::map<std::string, fs::path> selectors;
    for (const auto& [stem, path] : files_by_stem(selector_dir, {".pgm"})) selectors[stem] = path;
    std::vector<std::pair<std::string, fs::path>> pairs;
    json unmatched = json::array();
    for (const auto& [stem, path] : edges) {
        if (selectors.count(stem)) {
            pairs.emplace_back(stem, path);
        } else {
            unmatched.push_back(stem);
        }
    }
    for (const auto& [stem, path] : selectors) {
        if (std::none_of(edges.begin(), edges.end(), [&](const auto& e) { return e.first == stem; })) unmatched.push_back(stem);
    }

    std::vector<json> reports(pairs.size());
    parallel_for(pairs.size(), run.workers, [&](std::size_t i) {
        const auto& [stem, edge_path] = pairs[i];
        const fs::path dir = run.out / stem;
        fs::create_directories(dir);
        json rec{{"id", stem}};
        try {
            const img::ProbMap edge = img::read_probmap(edge_path);
            const img::ProbMap selector = img::read_probmap(selectors.at(stem));
            const post::PipelineResult res = post::run_pipeline(edge, selector, pc);
            img::write_labelmap(dir / "labels.pgm", res.segmentation.labels);
            img::Image2D bg = gray(edge);
            if (!image_dir.empty()) {
                for (const char* ext : {".png", ".pgm"}) {
                    const fs::path candidate = fs::path(image_dir) / (stem + ext);
                    if (fs::exists(candidate)) {
                        bg = img::read_image(candidate);
                        break;
                    }
                }
            }
            img::write_png(dir / "overlay.png", render_overlay(bg, res.segmentation));
            write_text(dir / "cells.csv", cell_table(res.segmentation));
            rec["success"] = res.report.has_value();
            rec["cell_size"] = res.cell_size;
            rec["report"] = report_to_json(res.report);
        } catch (const Fault& e) {
            rec["success"] = false;
            rec["report"] = nullptr;
            rec["error"] = e.what();
        } catch (const std::invalid_argument& e) {
            rec["success"] = false;
            rec["report"] = nullptr;
            rec["error"] = e.what();
        }
        write_text(dir / "report.json", rec.dump(1) + "\n");
        reports[i] = rec;
    });
    const json summary{{"mode", post::to_string(pc.selection_mode)}, {"reports", reports}};
    write_text(run.out / "reports.json", summary.dump(1) + "\n");
    json effective = config;
    effective["pipeline"] = {{"k_sigma", pc.k_sigma},
                             {"edge_threshold", pc.edge_threshold},
                             {"body_threshold", pc.body_threshold},
                             {"roi_area_fraction", pc.roi_area_fraction},
                             {"min_edge_length", pc.min_edge_length},
                             {"selection_mode", post::to_string(pc.selection_mode)}};
    write_manifest(run, "postprocess", effective, json::object(),
                   {{"edge_dir", edge_dir.generic_string()}, {"selector_dir", selector_dir.generic_string()}},
                   {{"reports", "reports.json"}, {"images", pairs.size()}}, {{"unmatched", unmatched}}, clock.seconds());
}

}  // namespace endo::cli

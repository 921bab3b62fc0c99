#include "common.hpp"

#include "endo/evalmetrics/evalmetrics.hpp"
#include "endo/imgcore/error.hpp"

#include <map>
#include <sstream>

namespace endo::cli {

using namespace detail;

namespace {

struct Pair {
    std::string id;
    std::optional<bio::BiomarkerReport> estimate;
    bio::BiomarkerReport truth;
};

std::string num(double v) {
    std::ostringstream os;
    os.precision(10);
    os << v;
    return os.str();
}

std::string opt(const std::optional<double>& v) { return v ? num(*v) : ""; }

// Pairs with a zero truth cannot enter MAPE; they are left out of that biomarker.
struct Column {
    std::vector<std::optional<double>> est;
    std::vector<double> truth;
};

}  // namespace

void cmd_evaluate(const json& config, const RunOptions& run) {
    Stopwatch clock;
    const fs::path reports_path = require_path(config, "reports");
    const fs::path truth_path = require_path(config, "truth");
    const json reports = read_json(fs::is_directory(reports_path) ? reports_path / "reports.json" : reports_path);
    const json dataset = read_json(truth_path);

    std::map<std::string, std::optional<bio::BiomarkerReport>> estimates;
    for (const auto& r : reports.value("reports", json::array())) {
        estimates[r.at("id").get<std::string>()] = report_from_json(r.value("report", json(nullptr)));
    }
    std::map<std::string, std::optional<bio::BiomarkerReport>> truths;
    for (const auto& e : dataset.value("images", json::array())) {
        truths[e.at("id").get<std::string>()] = report_from_json(e.value("biomarkers", json(nullptr)));
    }
    json unmatched = json::array();
    json no_truth = json::array();
    std::vector<Pair> pairs;
    for (const auto& [id, est] : estimates) {
        const auto t = truths.find(id);
        if (t == truths.end()) {
            unmatched.push_back(id);
        } else if (!t->second) {
            no_truth.push_back(id);
        } else {
            pairs.push_back({id, est, *t->second});
        }
    }
    for (const auto& [id, t] : truths) {
        if (!estimates.count(id)) unmatched.push_back(id);
    }

    std::ostringstream per;
    per << "id,success,n_cells,true_n_cells,ecd,true_ecd,cv,true_cv,hex_vertex,hex_neighbor,true_hex\n";
    std::map<std::string, Column> cols;
    std::vector<std::optional<bio::BiomarkerReport>> all;
    double cells = 0.0;
    std::size_t ok = 0;
    for (const auto& p : pairs) {
        const auto& e = p.estimate;
        const auto& t = p.truth;
        all.push_back(e);
        per << p.id << ',' << (e ? 1 : 0) << ',' << (e ? std::to_string(e->n_cells) : "") << ',' << t.n_cells << ','
            << (e ? num(e->ecd) : "") << ',' << num(t.ecd) << ',' << (e ? opt(e->cv) : "") << ',' << opt(t.cv) << ','
            << (e ? num(e->hex_vertex) : "") << ',' << (e ? opt(e->hex_neighbor) : "") << ',' << num(t.hex_vertex) << '\n';
        if (e) {
            cells += static_cast<double>(e->n_cells);
            ++ok;
        }
        const auto add = [&](const std::string& name, std::optional<double> est, std::optional<double> truth) {
            if (!truth || *truth == 0.0) return;
            cols[name].est.push_back(est);
            cols[name].truth.push_back(*truth);
        };
        add("ecd", e ? std::optional(e->ecd) : std::nullopt, t.ecd);
        add("cv", e ? e->cv : std::nullopt, t.cv);
        add("hex_vertex", e ? std::optional(e->hex_vertex) : std::nullopt, t.hex_vertex);
        add("hex_neighbor", e ? e->hex_neighbor : std::nullopt, t.hex_vertex);
    }

    const std::string mode = reports.value("mode", std::string("body"));
    std::ostringstream cohort;
    cohort << "mode,n_images,success_pct,mean_cells";
    const char* names[] = {"ecd", "cv", "hex_vertex", "hex_neighbor"};
    for (const char* n : names) cohort << ",mae_" << n << ",mape_" << n;
    cohort << '\n' << mode << ',' << pairs.size() << ',' << num(pairs.empty() ? 0.0 : eval::success_rate(all)) << ','
           << num(ok ? cells / static_cast<double>(ok) : 0.0);
    for (const char* n : names) {
        const auto it = cols.find(n);
        if (it == cols.end()) {
            cohort << ",,";
            continue;
        }
        const eval::MaeMape m = eval::mae_mape(it->second.est, it->second.truth);
        cohort << ',' << num(m.mae) << ',' << num(m.mape);
    }
    cohort << '\n';

    std::ostringstream ba;
    ba << "biomarker,n,bias,sd,lower,upper,within_fraction\n";
    json notes = json::array();
    for (const char* n : names) {
        const auto it = cols.find(n);
        if (it == cols.end()) continue;
        std::vector<double> e, t;
        for (std::size_t i = 0; i < it->second.est.size(); ++i) {
            if (!it->second.est[i]) continue;
            e.push_back(*it->second.est[i]);
            t.push_back(it->second.truth[i]);
        }
        if (e.size() < 3) {
            notes.push_back(std::string("Bland-Altman skipped for ") + n + ": fewer than 3 pairs");
            continue;
        }
        const auto r = eval::bland_altman(e, t);
        ba << n << ',' << r.n << ',' << num(r.bias) << ',' << num(r.sd) << ',' << num(r.lower) << ',' << num(r.upper) << ','
           << num(r.within_fraction) << '\n';
    }

    // ECD error against true cell count.
    json outputs{{"per_image", "per_image.csv"}, {"cohort", "cohort.csv"}, {"bland_altman", "bland_altman.csv"}};
    std::vector<double> errs, counts;
    for (const auto& p : pairs) {
        if (!p.estimate) continue;
        errs.push_back(p.estimate->ecd - p.truth.ecd);
        counts.push_back(static_cast<double>(p.truth.n_cells));
    }
    const json em = config.value("error_model", json::object());
    eval::ErrorModelOptions eo;
    eo.bin_width = get(em, "bin_width", eo.bin_width);
    eo.bin_step = get(em, "bin_step", eo.bin_step);
    eo.min_bin_samples = get(em, "min_bin_samples", eo.min_bin_samples);
    try {
        const auto model = eval::fit_error_model(errs, counts, eo);
        const auto [lo, hi] = std::minmax_element(counts.begin(), counts.end());
        write_text(run.out / "error_model_plot.csv", eval::error_model_plot_csv(model, *lo, *hi, 100));
        const json fit{{"mean_a", model.mean_a}, {"mean_b", model.mean_b}, {"mean_c", model.mean_c}, {"sd_a", model.sd_a},
                       {"sd_b", model.sd_b},     {"mean_rss", model.mean_rss}, {"sd_rss", model.sd_rss}, {"bins", model.n_bins}};
        write_text(run.out / "error_model.json", fit.dump(1) + "\n");
        outputs["error_model"] = "error_model.json";
        outputs["error_model_plot"] = "error_model_plot.csv";
    } catch (const std::invalid_argument& e) {
        notes.push_back(std::string("error model skipped: ") + e.what());
    } catch (const Fault& e) {
        notes.push_back(std::string("error model skipped: ") + e.what());
    }

    write_text(run.out / "per_image.csv", per.str());
    write_text(run.out / "cohort.csv", cohort.str());
    write_text(run.out / "bland_altman.csv", ba.str());
    write_manifest(run, "evaluate", config, json::object(),
                   {{"reports", reports_path.generic_string()}, {"truth", truth_path.generic_string()}}, outputs,
                   {{"unmatched", unmatched}, {"without_truth", no_truth}, {"notes", notes}}, clock.seconds());
}

}  // namespace endo::cli

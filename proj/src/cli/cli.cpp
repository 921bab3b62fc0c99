#include "common.hpp"

#include "endo/fnlanet/checkpoint.hpp"
#include "endo/imgcore/error.hpp"
#include "endo/imgcore/io.hpp"

#include <CLI11.hpp>

#include <functional>
#include <map>
#include <optional>

namespace endo::cli {

using namespace detail;

namespace {

struct Common {
    std::string config;
    std::optional<std::uint64_t> seed;
    int workers = 1;
    std::string out;
};

void add_common(CLI::App* sub, Common& c) {
    sub->add_option("--config", c.config, "JSON config file");
    sub->add_option("--seed", c.seed, "overrides the config seed");
    sub->add_option("--workers", c.workers, "worker threads")->check(CLI::PositiveNumber);
    sub->add_option("--out", c.out, "output directory")->required();
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Corneal endothelium analysis: synthetic data, DenseUNet/fNLA networks, postprocessing, metrics"};
    app.set_version_flag("--version", kToolVersion);
    app.require_subcommand(1);
    Common common;
    std::map<std::string, std::string> overrides;
    std::vector<std::string> images;

    auto* gen = app.add_subcommand("generate", "write a synthetic dataset");
    add_common(gen, common);
    gen->add_option("--count", overrides["count"], "number of images");

    auto* train = app.add_subcommand("train", "train one network on a dataset");
    add_common(train, common);
    train->add_option("--dataset", overrides["dataset"], "dataset.json");
    train->add_option("--role", overrides["role"], "edge, body, blob or roi");
    train->add_option("--epochs", overrides["train.epochs"], "epochs");

    auto* infer = app.add_subcommand("infer", "run a checkpoint on images");
    add_common(infer, common);
    infer->add_option("--checkpoint", overrides["checkpoint"], "checkpoint file");
    infer->add_option("--dataset", overrides["dataset"], "infer every image of a dataset");
    infer->add_option("images", images, "image files");

    auto* pp = app.add_subcommand("postprocess", "segment edge maps");
    add_common(pp, common);
    pp->add_option("--edge-dir", overrides["edge_dir"], "edge probability maps");
    pp->add_option("--selector-dir", overrides["selector_dir"], "body, blob or ROI maps");
    pp->add_option("--image-dir", overrides["image_dir"], "overlay backgrounds");
    pp->add_option("--mode", overrides["pipeline.selection_mode"], "body, blob or roi");

    auto* ev = app.add_subcommand("evaluate", "compare reports with ground truth");
    add_common(ev, common);
    ev->add_option("--reports", overrides["reports"], "reports.json from postprocess");
    ev->add_option("--truth", overrides["truth"], "dataset.json");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kOk : kInputError;
    }

    const std::map<CLI::App*, std::function<void(const json&, const RunOptions&)>> commands{
        {gen, cmd_generate}, {train, cmd_train}, {infer, cmd_infer}, {pp, cmd_postprocess}, {ev, cmd_evaluate}};
    CLI::App* chosen = app.get_subcommands().front();
    try {
        json config = common.config.empty() ? json::object() : read_json(common.config);
        if (!config.is_object()) throw InputError("config must be a JSON object");
        if (common.seed) config["seed"] = *common.seed;
        for (const auto& [key, value] : overrides) {
            if (value.empty()) continue;
            const auto dot = key.find('.');
            json& slot = dot == std::string::npos ? config[key] : config[key.substr(0, dot)][key.substr(dot + 1)];
            // Numeric flags stay numeric in the effective config.
            if (key == "count" || key == "train.epochs") {
                try {
                    slot = std::stoi(value);
                } catch (const std::exception&) {
                    throw InputError("--" + key + " needs an integer");
                }
            } else {
                slot = value;
            }
        }
        if (!images.empty()) {
            for (const auto& p : images) config["images"].push_back(p);
        }
        const RunOptions opts{common.out, common.workers};
        std::filesystem::create_directories(opts.out);
        commands.at(chosen)(config, opts);
        return kOk;
    } catch (const InputError& e) {
        err << "input error: " << e.what() << '\n';
        return kInputError;
    } catch (const nn::CheckpointError& e) {
        err << "input error: " << e.what() << '\n';
        return kInputError;
    } catch (const img::IoError& e) {
        err << "input error: " << e.what() << '\n';
        return kInputError;
    } catch (const std::invalid_argument& e) {
        err << "input error: " << e.what() << '\n';
        return kInputError;
    } catch (const std::exception& e) {
        err << "fault: " << e.what() << '\n';
        return kRuntimeFault;
    }
}

}  // namespace endo::cli

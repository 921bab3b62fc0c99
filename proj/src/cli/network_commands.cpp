#include "common.hpp"

#include "endo/fnlanet/checkpoint.hpp"
#include "endo/fnlanet/train.hpp"
#include "endo/imgcore/error.hpp"
#include "endo/imgcore/io.hpp"

#include <cmath>

namespace endo::cli {

using namespace detail;

namespace {

img::ProbMap to_unit(const img::Image2D& im) {
    img::ProbMap m(im.width(), im.height(), 0.0, im.pixel_pitch());
    for (std::size_t i = 0; i < im.size(); ++i) m[i] = im[i] / 255.0;
    return m;
}

nn::TrainConfig train_config(const json& config, const std::string& role) {
    nn::TrainConfig cfg;
    try {
        cfg = nn::TrainConfig::for_role(role);
    } catch (const std::invalid_argument& e) {
        throw InputError(e.what());
    }
    const json t = config.value("train", json::object());
    cfg.initial_lr = get(t, "initial_lr", cfg.initial_lr);
    cfg.lr_decay = get(t, "lr_decay", cfg.lr_decay);
    cfg.epochs = get(t, "epochs", cfg.epochs);
    cfg.batch_size = get(t, "batch_size", cfg.batch_size);
    cfg.guttae_per_batch = get(t, "guttae_per_batch", cfg.guttae_per_batch);
    cfg.augment = get(t, "augment", cfg.augment);
    cfg.elastic_grid = get(t, "elastic_grid", cfg.elastic_grid);
    cfg.elastic_sigma = get(t, "elastic_sigma", cfg.elastic_sigma);
    cfg.seed = get<std::uint64_t>(config, "seed", 0);
    try {
        cfg.validate();
    } catch (const std::invalid_argument& e) {
        throw InputError(e.what());
    }
    return cfg;
}

}  // namespace

void cmd_train(const json& config, const RunOptions& run) {
    Stopwatch clock;
    const fs::path dataset_path = require_path(config, "dataset");
    const std::string role = get<std::string>(config, "role", "edge");
    const nn::TrainConfig tcfg = train_config(config, role);
    nn::NetConfig ncfg;
    try {
        ncfg = nn::net_config_from_json(config.value("net", json::object()).dump());
    } catch (const std::invalid_argument& e) {
        throw InputError(e.what());
    }

    const json dataset = read_json(dataset_path);
    const fs::path root = dataset_path.parent_path();
    if (!dataset.contains("images") || !dataset["images"].is_array()) throw InputError("dataset has no image list");
    const auto& list = dataset["images"];
    std::vector<nn::TrainingSample> samples(list.size());
    parallel_for(list.size(), run.workers, [&](std::size_t i) {
        const json& e = list[i];
        try {
            nn::TrainingSample s;
            s.image = to_unit(img::read_image(root / e.at("image").get<std::string>()));
            s.target = img::read_probmap(root / e.at("targets").at(role).get<std::string>());
            s.has_guttae = e.value("has_guttae", false);
            s.total_grade = e.value("total_grade", 2);
            if (!s.image.same_shape(s.target)) throw InputError("image and target sizes differ for " + e.value("id", std::string{}));
            samples[i] = std::move(s);
        } catch (const json::exception& ex) {
            throw InputError(std::string("malformed dataset entry: ") + ex.what());
        } catch (const img::IoError& ex) {
            throw InputError(ex.what());
        }
    });
    if (samples.empty()) throw InputError("dataset is empty");
    const int div = 1 << (ncfg.resolution_stages - 1);
    for (const auto& s : samples) {
        if (s.image.width() % div != 0 || s.image.height() % div != 0 || !s.image.same_shape(samples.front().image)) {
            throw InputError("training images must share one size divisible by " + std::to_string(div));
        }
    }

    const std::uint64_t seed = tcfg.seed;
    nn::Network net(ncfg, seed);
    fs::create_directories(run.out);
    std::string log;
    const auto records = nn::train(net, samples, tcfg, [&](const nn::EpochRecord& r) {
        const json rec{{"epoch", r.epoch},
                       {"role", role},
                       {"loss", r.loss},
                       {"learning_rate", r.learning_rate},
                       {"lr_decay", tcfg.lr_decay},
                       {"batches", r.batches},
                       {"timing", {{"seconds", r.seconds}}}};
        log += rec.dump() + "\n";
        return true;
    });
    write_text(run.out / "train_log.jsonl", log);
    nn::save_checkpoint(run.out / "checkpoint.ckpt", net,
                        nn::CheckpointInfo{role, static_cast<int>(records.size()), tcfg.initial_lr, tcfg.lr_decay});
    json effective = config;
    effective["net"] = json::parse(nn::net_config_to_json(ncfg));
    effective["role"] = role;
    effective["train"] = {{"initial_lr", tcfg.initial_lr}, {"lr_decay", tcfg.lr_decay},     {"epochs", tcfg.epochs},
                          {"batch_size", tcfg.batch_size}, {"guttae_per_batch", tcfg.guttae_per_batch},
                          {"augment", tcfg.augment},       {"elastic_grid", tcfg.elastic_grid},
                          {"elastic_sigma", tcfg.elastic_sigma}};
    write_manifest(run, "train", effective, {{"seed", seed}}, {{"dataset", dataset_path.generic_string()}},
                   {{"checkpoint", "checkpoint.ckpt"}, {"log", "train_log.jsonl"}},
                   {{"normalization", nn::to_string(ncfg.normalization)},
                    {"deviations", {"batch normalization stands in for batch renormalization unless normalization=batch_renorm"}},
                    {"parameters", net.count_params()}},
                   clock.seconds());
}

void cmd_infer(const json& config, const RunOptions& run) {
    Stopwatch clock;
    const fs::path ckpt = require_path(config, "checkpoint");
    nn::LoadedCheckpoint loaded;
    try {
        loaded = nn::load_checkpoint(ckpt);
    } catch (const nn::CheckpointError& e) {
        throw InputError(e.what());
    }
    std::vector<fs::path> images;
    if (config.contains("dataset")) {
        const fs::path dataset_path = require_path(config, "dataset");
        const json dataset = read_json(dataset_path);
        for (const auto& e : dataset.value("images", json::array())) {
            images.push_back(dataset_path.parent_path() / e.at("image").get<std::string>());
        }
    }
    for (const auto& p : get(config, "images", std::vector<std::string>{})) images.emplace_back(p);

    fs::create_directories(run.out / "maps");
    nn::Network& net = *loaded.net;
    std::vector<json> results(images.size());
    parallel_for(images.size(), run.workers, [&](std::size_t i) {
        const std::string stem = images[i].stem().string();
        try {
            const img::ProbMap input = to_unit(img::read_image(images[i]));
            const nn::Tensor4 p = net.predict(nn::stack_maps(std::vector{input}));
            img::ProbMap map(input.width(), input.height(), 0.0, input.pixel_pitch());
            for (std::size_t k = 0; k < map.size(); ++k) map[k] = p.data[2 * k + 1];
            const fs::path out = run.out / "maps" / (stem + ".pgm");
            img::write_probmap(out, map, {{"checkpoint", ckpt.filename().string()}, {"role", loaded.info.role}, {"source", stem}});
            results[i] = {{"image", images[i].generic_string()}, {"map", rel(out, run.out)}, {"ok", true}};
        } catch (const std::invalid_argument& e) {
            results[i] = {{"image", images[i].generic_string()}, {"ok", false}, {"error", e.what()}};
        } catch (const img::IoError& e) {
            results[i] = {{"image", images[i].generic_string()}, {"ok", false}, {"error", e.what()}};
        }
    });
    std::size_t failures = 0;
    for (const auto& r : results) failures += r["ok"].get<bool>() ? 0 : 1;
    write_manifest(run, "infer", config, {{"network_seed", net.seed()}}, {{"checkpoint", ckpt.generic_string()}, {"images", images.size()}},
                   {{"maps", results}}, {{"role", loaded.info.role}, {"failures", failures}}, clock.seconds());
}

}  // namespace endo::cli

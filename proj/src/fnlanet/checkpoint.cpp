#include "endo/fnlanet/checkpoint.hpp"

#include <json.hpp>
#include <zlib.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

namespace endo::nn {

namespace {

using json = nlohmann::json;
constexpr const char* kMagic = "FNLA-CHECKPOINT v1";

json config_json(const NetConfig& c) {
    return json{{"resolution_stages", c.resolution_stages},
                {"blocks_per_stage", c.blocks_per_stage},
                {"growth_rate", c.growth_rate},
                {"attention", to_string(c.attention)},
                {"dropout_rate", c.dropout_rate},
                {"normalization", to_string(c.normalization)},
                {"bn_momentum", c.bn_momentum},
                {"bn_eps", c.bn_eps},
                {"renorm_r_max", c.renorm_r_max},
                {"renorm_d_max", c.renorm_d_max},
                {"attention_scale", c.attention_scale},
                {"encoder_attention", c.encoder_attention},
                {"decoder_attention", c.decoder_attention}};
}

NetConfig config_from(const json& j) {
    if (!j.is_object()) throw std::invalid_argument("network config must be a JSON object");
    NetConfig c;
    try {
        c.resolution_stages = j.value("resolution_stages", c.resolution_stages);
        c.blocks_per_stage = j.value("blocks_per_stage", c.blocks_per_stage);
        c.growth_rate = j.value("growth_rate", c.growth_rate);
        c.attention = attention_from_string(j.value("attention", to_string(c.attention)));
        c.dropout_rate = j.value("dropout_rate", c.dropout_rate);
        c.normalization = normalization_from_string(j.value("normalization", to_string(c.normalization)));
        c.bn_momentum = j.value("bn_momentum", c.bn_momentum);
        c.bn_eps = j.value("bn_eps", c.bn_eps);
        c.renorm_r_max = j.value("renorm_r_max", c.renorm_r_max);
        c.renorm_d_max = j.value("renorm_d_max", c.renorm_d_max);
        c.attention_scale = j.value("attention_scale", c.attention_scale);
        c.encoder_attention = j.value("encoder_attention", c.encoder_attention);
        c.decoder_attention = j.value("decoder_attention", c.decoder_attention);
    } catch (const json::exception& e) {
        throw std::invalid_argument(std::string("network config: ") + e.what());
    }
    c.validate();
    return c;
}

void put_f32(std::string& out, double v) {
    const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(v));
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xffu));
}

double get_f32(const unsigned char* p) {
    std::uint32_t bits = 0;
    for (int i = 0; i < 4; ++i) bits |= static_cast<std::uint32_t>(p[i]) << (8 * i);
    return static_cast<double>(std::bit_cast<float>(bits));
}

std::uint32_t crc_of(const std::string& bytes) {
    return static_cast<std::uint32_t>(
        crc32(0L, reinterpret_cast<const Bytef*>(bytes.data()), static_cast<uInt>(bytes.size())));
}

}  // namespace

std::string net_config_to_json(const NetConfig& cfg) { return config_json(cfg).dump(2); }

NetConfig net_config_from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw std::invalid_argument(std::string("network config is not JSON: ") + e.what());
    }
    return config_from(j);
}

void save_checkpoint(const std::filesystem::path& path, const Network& net, const CheckpointInfo& info) {
    std::string payload;
    json table = json::array();
    for (const auto& p : net.params().all()) {
        table.push_back({{"path", p.path}, {"shape", p.shape}, {"trainable", p.trainable}});
        for (double v : p.value) put_f32(payload, v);
    }
    json header{{"config", config_json(net.config())},
                {"seed", net.seed()},
                {"role", info.role},
                {"epoch", info.epoch},
                {"initial_lr", info.initial_lr},
                {"lr_decay", info.lr_decay},
                {"params", table},
                {"payload_bytes", payload.size()},
                {"crc32", crc_of(payload)}};
    const std::string text = header.dump();
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw CheckpointError("cannot write " + path.string());
    out << kMagic << '\n' << text.size() << '\n' << text;
    out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
    if (!out) throw CheckpointError("failed writing " + path.string());
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw CheckpointError("cannot open " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    const std::string all = ss.str();
    const std::string where = path.string() + ": ";

    const auto nl1 = all.find('\n');
    if (nl1 == std::string::npos || all.compare(0, nl1, kMagic) != 0) throw CheckpointError(where + "not a checkpoint");
    const auto nl2 = all.find('\n', nl1 + 1);
    if (nl2 == std::string::npos) throw CheckpointError(where + "truncated header");
    std::size_t len = 0;
    try {
        len = std::stoul(all.substr(nl1 + 1, nl2 - nl1 - 1));
    } catch (const std::exception&) {
        throw CheckpointError(where + "bad header length");
    }
    if (nl2 + 1 + len > all.size()) throw CheckpointError(where + "truncated header");
    json header;
    try {
        header = json::parse(all.substr(nl2 + 1, len));
    } catch (const json::exception& e) {
        throw CheckpointError(where + "corrupt header: " + e.what());
    }
    const std::string payload = all.substr(nl2 + 1 + len);

    LoadedCheckpoint result;
    try {
        if (payload.size() != header.at("payload_bytes").get<std::size_t>()) throw CheckpointError(where + "payload size mismatch");
        if (crc_of(payload) != header.at("crc32").get<std::uint32_t>()) throw CheckpointError(where + "checksum mismatch");
        result.info.role = header.value("role", std::string{});
        result.info.epoch = header.value("epoch", 0);
        result.info.initial_lr = header.value("initial_lr", 1e-3);
        result.info.lr_decay = header.value("lr_decay", 0.99);
        result.net = std::make_unique<Network>(config_from(header.at("config")), header.at("seed").get<std::uint64_t>());
        const auto& table = header.at("params");
        auto& params = result.net->params().all();
        if (table.size() != params.size()) throw CheckpointError(where + "parameter table does not match the config");
        std::size_t off = 0;
        for (std::size_t i = 0; i < params.size(); ++i) {
            auto& p = params[i];
            if (table[i].at("path").get<std::string>() != p.path || table[i].at("shape").get<std::vector<int>>() != p.shape) {
                throw CheckpointError(where + "parameter " + p.path + " does not match the config");
            }
            if (off + 4 * p.size() > payload.size()) throw CheckpointError(where + "payload too short");
            const auto* bytes = reinterpret_cast<const unsigned char*>(payload.data()) + off;
            for (std::size_t k = 0; k < p.size(); ++k) p.value[k] = get_f32(bytes + 4 * k);
            off += 4 * p.size();
        }
        if (off != payload.size()) throw CheckpointError(where + "trailing payload bytes");
    } catch (const json::exception& e) {
        throw CheckpointError(where + "malformed header: " + e.what());
    } catch (const std::invalid_argument& e) {
        throw CheckpointError(where + e.what());
    }
    return result;
}

}  // namespace endo::nn

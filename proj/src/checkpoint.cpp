// SPDX-License-Identifier: Apache-2.0
#include "efvi/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <iostream>
#include <map>

#include <json.hpp>

#include "efvi/common.hpp"

namespace efvi {

namespace {

nlohmann::json backbone_config_json(const BackboneConfig& c) {
    return {{"blocks", c.blocks},
            {"dim", c.dim},
            {"heads", c.heads},
            {"patch", c.patch},
            {"latent_frames", c.latent_frames},
            {"latent_channels", c.latent_channels},
            {"height", c.height},
            {"width", c.width},
            {"prediction_target", c.prediction_target}};
}

BackboneConfig backbone_config_from_json(const nlohmann::json& j) {
    BackboneConfig c;
    c.blocks = j.at("blocks");
    c.dim = j.at("dim");
    c.heads = j.at("heads");
    c.patch = j.at("patch");
    c.latent_frames = j.at("latent_frames");
    c.latent_channels = j.at("latent_channels");
    c.height = j.at("height");
    c.width = j.at("width");
    c.prediction_target = j.at("prediction_target");
    return c;
}

nlohmann::json efnet_config_json(const EFNetConfig& c) {
    return {{"blocks", c.blocks},
            {"ablate_zt", c.ablate_zt},
            {"use_temporal_embedding", c.use_temporal_embedding},
            {"scale_w", c.scale_w}};
}

EFNetConfig efnet_config_from_json(const nlohmann::json& j) {
    EFNetConfig c;
    c.blocks = j.at("blocks");
    c.ablate_zt = j.at("ablate_zt");
    c.use_temporal_embedding = j.at("use_temporal_embedding");
    c.scale_w = j.at("scale_w");
    return c;
}

}  // namespace

void save_checkpoint(DenoiserModel& model, const std::string& stem) {
    nn::ParamRegistry reg = model.params();
    nlohmann::json manifest;
    manifest["backbone"] = backbone_config_json(model.cfg);
    manifest["efnet"] = model.has_efnet() ? efnet_config_json(model.efnet->cfg) : nlohmann::json();

    std::size_t offset = 0;
    nlohmann::json params = nlohmann::json::object();
    for (const auto& p : reg) {
        params[p.name] = {{"shape", {p.value->rows, p.value->cols}},
                          {"dtype", "f32"},
                          {"offset", offset}};
        offset += p.value->size() * sizeof(float);
    }
    manifest["params"] = params;
    manifest["total_bytes"] = offset;

    std::ofstream mj(stem + ".json");
    if (!mj) throw std::runtime_error("cannot write checkpoint manifest: " + stem + ".json");
    mj << manifest.dump(2) << '\n';

    std::ofstream blob(stem + ".bin", std::ios::binary);
    if (!blob) throw std::runtime_error("cannot write checkpoint blob: " + stem + ".bin");
    std::vector<float> buf;
    for (const auto& p : reg) {
        buf.resize(p.value->size());
        for (std::size_t i = 0; i < buf.size(); ++i) buf[i] = static_cast<float>(p.value->v[i]);
        blob.write(reinterpret_cast<const char*>(buf.data()),
                   static_cast<std::streamsize>(buf.size() * sizeof(float)));
    }
    if (!blob) throw std::runtime_error("checkpoint blob write failed: " + stem + ".bin");
}

namespace {

struct BlobFile {
    nlohmann::json manifest;
    std::vector<float> blob;
};

BlobFile read_checkpoint(const std::string& stem) {
    BlobFile f;
    std::ifstream mj(stem + ".json");
    if (!mj) throw std::runtime_error("cannot open checkpoint manifest: " + stem + ".json");
    try {
        mj >> f.manifest;
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError("checkpoint manifest parse error: " + std::string(e.what()));
    }
    std::ifstream blob(stem + ".bin", std::ios::binary);
    if (!blob) throw std::runtime_error("cannot open checkpoint blob: " + stem + ".bin");
    std::vector<char> bytes((std::istreambuf_iterator<char>(blob)), std::istreambuf_iterator<char>());
    const std::size_t expected = f.manifest.at("total_bytes");
    if (bytes.size() != expected)
        throw std::runtime_error("checkpoint blob length mismatch: manifest says " +
                                 std::to_string(expected) + " bytes, file has " +
                                 std::to_string(bytes.size()));
    f.blob.resize(bytes.size() / sizeof(float));
    std::memcpy(f.blob.data(), bytes.data(), bytes.size());
    return f;
}

LoadReport load_params(DenoiserModel& model, const BlobFile& f, bool allow_fresh_efnet) {
    nn::ParamRegistry reg = model.params();
    std::map<std::string, nn::ParamRef*> by_name;
    for (auto& p : reg) by_name[p.name] = &p;

    LoadReport report;
    const auto& params = f.manifest.at("params");
    for (auto it = params.begin(); it != params.end(); ++it) {
        auto found = by_name.find(it.key());
        if (found == by_name.end())
            throw std::runtime_error("checkpoint has unknown parameter: " + it.key());
        Mat& dst = *found->second->value;
        const auto& meta = it.value();
        const int rows = meta.at("shape")[0], cols = meta.at("shape")[1];
        if (rows != dst.rows || cols != dst.cols)
            throw std::runtime_error("checkpoint shape mismatch for " + it.key());
        const std::size_t offset = meta.at("offset");
        const std::size_t count = dst.size();
        if (offset % sizeof(float) != 0 || offset / sizeof(float) + count > f.blob.size())
            throw std::runtime_error("checkpoint offset out of range for " + it.key());
        const float* src = f.blob.data() + offset / sizeof(float);
        for (std::size_t i = 0; i < count; ++i) dst.v[i] = static_cast<double>(src[i]);
        report.loaded.push_back(it.key());
        by_name.erase(found);
    }
    for (const auto& [name, ref] : by_name) {
        (void)ref;
        if (!allow_fresh_efnet || name.rfind("efnet.", 0) != 0)
            throw std::runtime_error("checkpoint is missing parameter: " + name);
        report.kept_fresh.push_back(name);
    }
    if (!report.kept_fresh.empty())
        std::cerr << "warning: " << report.kept_fresh.size()
                  << " EF-Net parameters not in checkpoint; keeping fresh initialization\n";
    return report;
}

}  // namespace

DenoiserModel load_checkpoint(const std::string& stem) {
    const BlobFile f = read_checkpoint(stem);
    const BackboneConfig bcfg = backbone_config_from_json(f.manifest.at("backbone"));
    std::optional<EFNetConfig> ecfg;
    if (!f.manifest.at("efnet").is_null()) ecfg = efnet_config_from_json(f.manifest.at("efnet"));
    DenoiserModel model = init_model(bcfg, ecfg, 0);
    load_params(model, f, /*allow_fresh_efnet=*/false);
    return model;
}

LoadReport load_checkpoint_into(DenoiserModel& model, const std::string& stem) {
    const BlobFile f = read_checkpoint(stem);
    return load_params(model, f, /*allow_fresh_efnet=*/true);
}

}  // namespace efvi

#include "gpda/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <vector>

#include <json.hpp>

namespace gpda::models {

namespace {

constexpr char kMagic[8] = {'G', 'P', 'D', 'A', 'P', 'R', 'M', '1'};

void put_u32(std::ostream& os, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

void put_f64(std::ostream& os, double v) {
    const std::uint64_t u = std::bit_cast<std::uint64_t>(v);
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(u >> (8 * i));
    os.write(reinterpret_cast<const char*>(b), 8);
}

std::uint32_t get_u32(std::istream& is, const std::string& path) {
    unsigned char b[4];
    if (!is.read(reinterpret_cast<char*>(b), 4))
        throw FormatError(path + ": truncated at byte " + std::to_string(is.tellg()));
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

double get_f64(std::istream& is, const std::string& path) {
    unsigned char b[8];
    if (!is.read(reinterpret_cast<char*>(b), 8))
        throw FormatError(path + ": truncated at byte " + std::to_string(is.tellg()));
    std::uint64_t u = 0;
    for (int i = 0; i < 8; ++i) u |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return std::bit_cast<double>(u);
}

}  // namespace

void save_checkpoint(const ModelSet& models, std::uint64_t seed, const std::string& params_path,
                     const std::string& manifest_path) {
    const auto named = models.named_parameters();

    std::ofstream os(params_path, std::ios::binary);
    if (!os) throw FormatError("cannot open " + params_path + " for writing");
    os.write(kMagic, 8);
    put_u32(os, static_cast<std::uint32_t>(named.size()));
    for (const auto& [name, p] : named) {
        put_u32(os, static_cast<std::uint32_t>(name.size()));
        os.write(name.data(), static_cast<std::streamsize>(name.size()));
        put_u32(os, static_cast<std::uint32_t>(p.rows()));
        put_u32(os, static_cast<std::uint32_t>(p.cols()));
        for (double v : p.value().a) put_f64(os, v);
    }
    if (!os) throw FormatError("write failure on " + params_path);
    os.close();

    nlohmann::json manifest;
    manifest["format"] = "gpda-checkpoint";
    manifest["version"] = 1;
    manifest["seed"] = seed;
    manifest["architecture"] = {
        {"input_dim", models.arch.input_dim},
        {"class_count", models.arch.class_count},
        {"extractor_hidden", models.arch.extractor_hidden},
        {"feature_dim", models.arch.feature_dim},
        {"gcn_dims", models.arch.gcn_dims},
        {"domain_hidden", models.arch.domain_hidden},
        {"use_gcn", models.arch.use_gcn},
    };
    nlohmann::json arrays = nlohmann::json::array();
    for (const auto& [name, p] : named)
        arrays.push_back({{"name", name}, {"rows", p.rows()}, {"cols", p.cols()}});
    manifest["arrays"] = arrays;

    std::ofstream ms(manifest_path);
    if (!ms) throw FormatError("cannot open " + manifest_path + " for writing");
    ms << manifest.dump(2) << "\n";
    if (!ms) throw FormatError("write failure on " + manifest_path);
}

Checkpoint load_checkpoint(const std::string& params_path, const std::string& manifest_path) {
    std::ifstream ms(manifest_path);
    if (!ms) throw FormatError("cannot open " + manifest_path);
    nlohmann::json manifest;
    try {
        ms >> manifest;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(manifest_path + ": " + e.what());
    }
    if (manifest.value("format", "") != "gpda-checkpoint")
        throw FormatError(manifest_path + ": not a gpda checkpoint manifest");

    Architecture arch;
    const auto& ja = manifest.at("architecture");
    arch.input_dim = ja.at("input_dim").get<int>();
    arch.class_count = ja.at("class_count").get<int>();
    arch.extractor_hidden = ja.at("extractor_hidden").get<std::vector<int>>();
    arch.feature_dim = ja.at("feature_dim").get<int>();
    arch.gcn_dims = ja.at("gcn_dims").get<std::vector<int>>();
    arch.domain_hidden = ja.at("domain_hidden").get<std::vector<int>>();
    arch.use_gcn = ja.at("use_gcn").get<bool>();

    Checkpoint ckpt;
    ckpt.seed = manifest.at("seed").get<std::uint64_t>();
    ckpt.models = init_models(arch, ckpt.seed);

    std::ifstream is(params_path, std::ios::binary);
    if (!is) throw FormatError("cannot open " + params_path);
    char magic[8];
    if (!is.read(magic, 8) || std::memcmp(magic, kMagic, 8) != 0)
        throw FormatError(params_path + ": bad magic at byte 0");
    const std::uint32_t count = get_u32(is, params_path);

    auto named = ckpt.models.named_parameters();
    if (count != named.size())
        throw FormatError(params_path + ": has " + std::to_string(count) + " arrays, manifest architecture expects " +
                          std::to_string(named.size()));
    for (std::uint32_t k = 0; k < count; ++k) {
        const std::uint32_t name_len = get_u32(is, params_path);
        std::string name(name_len, '\0');
        if (!is.read(name.data(), name_len))
            throw FormatError(params_path + ": truncated at byte " + std::to_string(is.tellg()));
        const std::uint32_t rows = get_u32(is, params_path);
        const std::uint32_t cols = get_u32(is, params_path);
        if (name != named[k].first)
            throw FormatError(params_path + ": array " + std::to_string(k) + " named '" + name +
                              "', expected '" + named[k].first + "'");
        ad::Tensor& p = named[k].second;
        if (static_cast<int>(rows) != p.rows() || static_cast<int>(cols) != p.cols())
            throw FormatError(params_path + ": array '" + name + "' is " + std::to_string(rows) +
                              "x" + std::to_string(cols) + ", expected " + p.value().shape_str());
        for (double& v : p.value().a) v = get_f64(is, params_path);
    }
    return ckpt;
}

}  // namespace gpda::models

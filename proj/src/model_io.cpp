#include "vbp/model_io.hpp"

#include <openssl/evp.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "json.hpp"

static_assert(std::endian::native == std::endian::little,
              "weights.bin is little-endian; big-endian hosts are unsupported");

namespace vbp {

using nlohmann::json;

std::string sha256_hex(const void* data, std::size_t len) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int digest_len = 0;
    EVP_Digest(data, len, digest, &digest_len, EVP_sha256(), nullptr);
    static const char* hex = "0123456789abcdef";
    std::string out;
    out.reserve(2 * digest_len);
    for (unsigned int i = 0; i < digest_len; ++i) {
        out.push_back(hex[digest[i] >> 4]);
        out.push_back(hex[digest[i] & 0xf]);
    }
    return out;
}

namespace {

std::size_t append_floats(std::vector<float>& blob, const std::vector<float>& v) {
    const std::size_t offset = blob.size();
    blob.insert(blob.end(), v.begin(), v.end());
    return offset;
}

std::vector<float> take_floats(const std::vector<float>& blob, const json& j,
                               const char* key, std::size_t count, std::size_t layer) {
    if (!j.contains(key)) {
        std::ostringstream os;
        os << "layer " << layer << ": manifest missing " << key;
        throw IoError(os.str());
    }
    const std::size_t offset = j.at(key).get<std::size_t>();
    if (offset + count > blob.size()) {
        std::ostringstream os;
        os << "layer " << layer << ": " << key << " expected " << offset + count
           << " elements (" << (offset + count) * sizeof(float) << " bytes), blob has "
           << blob.size() << " elements (" << blob.size() * sizeof(float) << " bytes)";
        throw IoError(os.str());
    }
    return std::vector<float>(blob.begin() + offset, blob.begin() + offset + count);
}

}  // namespace

void save_model(const Model& m, const std::filesystem::path& manifest_path) {
    validate(m);

    std::vector<float> blob;
    json layers = json::array();
    for (const auto& layer : m.layers) {
        json j;
        if (const auto* conv = std::get_if<Conv2d>(&layer)) {
            j["kind"] = "conv2d";
            j["in"] = conv->in_channels;
            j["out"] = conv->out_channels;
            j["kernel"] = {conv->kernel_h, conv->kernel_w};
            j["stride"] = {conv->stride_h, conv->stride_w};
            j["weights_offset"] = append_floats(blob, conv->weights);
            j["bias_offset"] = append_floats(blob, conv->bias);
        } else if (const auto* bn = std::get_if<BatchNorm>(&layer)) {
            j["kind"] = "batchnorm";
            j["channels"] = bn->channels;
            j["eps"] = bn->eps;
            j["gamma_offset"] = append_floats(blob, bn->gamma);
            j["beta_offset"] = append_floats(blob, bn->beta);
            j["mean_offset"] = append_floats(blob, bn->running_mean);
            j["var_offset"] = append_floats(blob, bn->running_var);
        } else if (std::holds_alternative<ReLU>(layer)) {
            j["kind"] = "relu";
        } else if (std::holds_alternative<Flatten>(layer)) {
            j["kind"] = "flatten";
        } else if (const auto* fc = std::get_if<FullyConnected>(&layer)) {
            j["kind"] = "fc";
            j["in"] = fc->in_dim;
            j["out"] = fc->out_dim;
            j["weights_offset"] = append_floats(blob, fc->weights);
            j["bias_offset"] = append_floats(blob, fc->bias);
        }
        layers.push_back(std::move(j));
    }

    const std::filesystem::path weights_path = manifest_path.parent_path() / "weights.bin";
    {
        std::ofstream f(weights_path, std::ios::binary);
        if (!f) throw IoError("cannot open " + weights_path.string() + " for writing");
        f.write(reinterpret_cast<const char*>(blob.data()),
                static_cast<std::streamsize>(blob.size() * sizeof(float)));
        if (!f) throw IoError("write failure on " + weights_path.string());
    }

    json manifest;
    manifest["format_version"] = 1;
    manifest["input_shape"] = {m.input_shape[0], m.input_shape[1], m.input_shape[2]};
    manifest["layers"] = std::move(layers);
    manifest["weights_file"] = "weights.bin";
    manifest["weights_sha256"] = sha256_hex(blob.data(), blob.size() * sizeof(float));

    std::ofstream f(manifest_path);
    if (!f) throw IoError("cannot open " + manifest_path.string() + " for writing");
    f << manifest.dump(2) << "\n";
    if (!f) throw IoError("write failure on " + manifest_path.string());
}

Model load_model(const std::filesystem::path& manifest_path) {
    std::ifstream mf(manifest_path);
    if (!mf) throw IoError("cannot open manifest " + manifest_path.string());
    json manifest;
    try {
        mf >> manifest;
    } catch (const json::exception& e) {
        throw IoError("malformed manifest " + manifest_path.string() + ": " + e.what());
    }

    if (manifest.value("format_version", 0) != 1)
        throw IoError("unsupported manifest format_version");

    const std::filesystem::path weights_path =
        manifest_path.parent_path() / manifest.at("weights_file").get<std::string>();
    std::ifstream wf(weights_path, std::ios::binary);
    if (!wf) throw IoError("cannot open weights blob " + weights_path.string());
    std::vector<char> bytes((std::istreambuf_iterator<char>(wf)),
                            std::istreambuf_iterator<char>());
    if (bytes.size() % sizeof(float) != 0) {
        std::ostringstream os;
        os << "weights blob " << weights_path.string() << " has " << bytes.size()
           << " bytes, not a multiple of " << sizeof(float);
        throw IoError(os.str());
    }
    std::vector<float> blob(bytes.size() / sizeof(float));
    std::memcpy(blob.data(), bytes.data(), bytes.size());

    Model m;
    const auto shape = manifest.at("input_shape");
    m.input_shape = {shape.at(0).get<int>(), shape.at(1).get<int>(), shape.at(2).get<int>()};

    std::size_t declared = 0;  // elements the manifest expects in the blob
    std::size_t index = 0;
    for (const auto& j : manifest.at("layers")) {
        const std::string kind = j.at("kind").get<std::string>();
        if (kind == "conv2d") {
            Conv2d conv;
            conv.in_channels = j.at("in").get<int>();
            conv.out_channels = j.at("out").get<int>();
            conv.kernel_h = j.at("kernel").at(0).get<int>();
            conv.kernel_w = j.at("kernel").at(1).get<int>();
            conv.stride_h = j.at("stride").at(0).get<int>();
            conv.stride_w = j.at("stride").at(1).get<int>();
            const std::size_t nw = static_cast<std::size_t>(conv.out_channels) *
                                   conv.in_channels * conv.kernel_h * conv.kernel_w;
            conv.weights = take_floats(blob, j, "weights_offset", nw, index);
            conv.bias = take_floats(blob, j, "bias_offset", conv.out_channels, index);
            declared += nw + conv.out_channels;
            m.layers.emplace_back(std::move(conv));
        } else if (kind == "batchnorm") {
            BatchNorm bn;
            bn.channels = j.at("channels").get<int>();
            bn.eps = j.at("eps").get<float>();
            bn.gamma = take_floats(blob, j, "gamma_offset", bn.channels, index);
            bn.beta = take_floats(blob, j, "beta_offset", bn.channels, index);
            bn.running_mean = take_floats(blob, j, "mean_offset", bn.channels, index);
            bn.running_var = take_floats(blob, j, "var_offset", bn.channels, index);
            declared += 4 * static_cast<std::size_t>(bn.channels);
            m.layers.emplace_back(std::move(bn));
        } else if (kind == "relu") {
            m.layers.emplace_back(ReLU{});
        } else if (kind == "flatten") {
            m.layers.emplace_back(Flatten{});
        } else if (kind == "fc") {
            FullyConnected fc;
            fc.in_dim = j.at("in").get<int>();
            fc.out_dim = j.at("out").get<int>();
            const std::size_t nw = static_cast<std::size_t>(fc.out_dim) * fc.in_dim;
            fc.weights = take_floats(blob, j, "weights_offset", nw, index);
            fc.bias = take_floats(blob, j, "bias_offset", fc.out_dim, index);
            declared += nw + fc.out_dim;
            m.layers.emplace_back(std::move(fc));
        } else {
            std::ostringstream os;
            os << "layer " << index << ": unknown kind '" << kind << "'";
            throw IoError(os.str());
        }
        ++index;
    }

    if (declared != blob.size()) {
        std::ostringstream os;
        os << "weights blob " << weights_path.string() << ": expected " << declared
           << " elements (" << declared * sizeof(float) << " bytes), got " << blob.size()
           << " elements (" << bytes.size() << " bytes)";
        throw IoError(os.str());
    }

    // Size errors above are more specific, so the checksum runs last.
    const std::string sum = sha256_hex(bytes.data(), bytes.size());
    if (sum != manifest.at("weights_sha256").get<std::string>())
        throw IoError("weights blob checksum mismatch for " + weights_path.string());

    validate(m);
    return m;
}

}  // namespace vbp

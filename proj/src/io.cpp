#include "symrec/io.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include <openssl/evp.h>

#include "symrec/errors.hpp"

namespace symrec::io {

static_assert(std::endian::native == std::endian::little, "payload I/O assumes a little-endian host");

namespace {

std::vector<char> read_bytes(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError(path.string() + ": cannot open for reading");
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_bytes(const fs::path& path, const void* data, std::size_t size) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError(path.string() + ": cannot open for writing");
    out.write(static_cast<const char*>(data), static_cast<std::streamsize>(size));
    if (!out) throw DataError(path.string() + ": write failed");
}

fs::path payload_path(const fs::path& header) { return fs::path(header.string() + ".bin"); }

template <class T>
T field(const json& j, const char* name, const fs::path& path) {
    if (!j.contains(name)) throw DataError(path.string() + ": missing field '" + name + "'");
    try {
        return j.at(name).get<T>();
    } catch (const json::exception&) {
        throw DataError(path.string() + ": field '" + name + "' has the wrong type");
    }
}

std::vector<char> checked_payload(const fs::path& path, const json& h, std::size_t expected) {
    const fs::path bin = path.parent_path() / field<std::string>(h, "payload", path);
    const auto bytes = read_bytes(bin);
    if (bytes.size() != expected) {
        throw DataError(bin.string() + ": payload is " + std::to_string(bytes.size()) + " bytes, header implies " +
                        std::to_string(expected));
    }
    if (sha256_hex(bytes.data(), bytes.size()) != field<std::string>(h, "sha256", path)) {
        throw DataError(path.string() + ": field 'sha256' does not match payload " + bin.string());
    }
    return bytes;
}

}  // namespace

std::string sha256_hex(const void* data, std::size_t size) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(data, size, digest, &len, EVP_sha256(), nullptr) != 1) throw std::runtime_error("sha256 failed");
    static const char* hex = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
        out += hex[digest[i] >> 4];
        out += hex[digest[i] & 15];
    }
    return out;
}

std::string config_hash(const json& config) {
    const std::string text = config.dump();
    return sha256_hex(text.data(), text.size()).substr(0, 16);
}

json read_json(const fs::path& path) {
    const auto bytes = read_bytes(path);
    try {
        return json::parse(bytes.begin(), bytes.end());
    } catch (const json::parse_error& e) {
        throw DataError(path.string() + ": malformed JSON: " + e.what());
    }
}

void write_text(const fs::path& path, const std::string& text) { write_bytes(path, text.data(), text.size()); }

void save_volume(const fs::path& path, const Volume& v, VoxelType type) {
    if (type == VoxelType::automatic) type = v.is_binary() ? VoxelType::u8 : VoxelType::f32;
    std::vector<char> payload;
    if (type == VoxelType::u8) {
        if (!v.is_binary()) throw DataError(path.string() + ": u8 storage requires a binary volume");
        payload.resize(v.size());
        for (std::size_t i = 0; i < v.size(); ++i) payload[i] = v[i] > 0.5 ? 1 : 0;
    } else {
        payload.resize(v.size() * sizeof(float));
        for (std::size_t i = 0; i < v.size(); ++i) {
            const auto f = static_cast<float>(v[i]);
            std::memcpy(payload.data() + i * sizeof(float), &f, sizeof(float));
        }
    }
    const fs::path bin = payload_path(path);
    json h;
    h["magic"] = "SVOX1";
    h["dims"] = {v.dims().nx, v.dims().ny, v.dims().nz};
    h["spacing"] = {v.spacing().sx, v.spacing().sy, v.spacing().sz};
    h["dtype"] = type == VoxelType::u8 ? "u8" : "f32";
    h["layout"] = "x-fastest";
    h["sha256"] = sha256_hex(payload.data(), payload.size());
    h["payload"] = bin.filename().string();
    write_bytes(bin, payload.data(), payload.size());
    write_text(path, h.dump(2) + "\n");
}

Volume load_volume(const fs::path& path) {
    const json h = read_json(path);
    if (field<std::string>(h, "magic", path) != "SVOX1") throw DataError(path.string() + ": field 'magic' is not SVOX1");
    if (field<std::string>(h, "layout", path) != "x-fastest") throw DataError(path.string() + ": field 'layout' must be x-fastest");
    const auto dims = field<std::vector<int>>(h, "dims", path);
    const auto spacing = field<std::vector<double>>(h, "spacing", path);
    if (dims.size() != 3) throw DataError(path.string() + ": field 'dims' needs 3 entries");
    if (spacing.size() != 3) throw DataError(path.string() + ": field 'spacing' needs 3 entries");
    for (int d : dims)
        if (d < kMinVolumeExtent) throw DataError(path.string() + ": field 'dims' has an extent below 8");
    for (double s : spacing)
        if (!(s > 0.0 && std::isfinite(s))) throw DataError(path.string() + ": field 'spacing' must be positive");
    const Dims d{dims[0], dims[1], dims[2]};
    const auto dtype = field<std::string>(h, "dtype", path);
    std::size_t width = 0;
    if (dtype == "u8") width = 1;
    else if (dtype == "f32") width = sizeof(float);
    else throw DataError(path.string() + ": field 'dtype' must be f32 or u8");
    const auto bytes = checked_payload(path, h, d.count() * width);
    std::vector<double> data(d.count());
    for (std::size_t i = 0; i < data.size(); ++i) {
        if (width == 1) {
            const auto b = static_cast<unsigned char>(bytes[i]);
            if (b > 1) throw DataError(path.string() + ": u8 payload holds a value other than 0/1");
            data[i] = b;
        } else {
            float f;
            std::memcpy(&f, bytes.data() + i * sizeof(float), sizeof(float));
            data[i] = f;
        }
    }
    try {
        return Volume(d, std::move(data), {spacing[0], spacing[1], spacing[2]});
    } catch (const std::exception& e) {
        throw DataError(path.string() + ": " + e.what());
    }
}

void save_params(const fs::path& path, const ParameterSet& params, const std::string& kind,
                 const std::string& config_hash) {
    std::vector<float> flat;
    json layers = json::array();
    for (const auto& p : params.items()) {
        layers.push_back({{"name", p.name}, {"size", p.data.size()}});
        for (double x : p.data) flat.push_back(static_cast<float>(x));
    }
    const fs::path bin = payload_path(path);
    json h;
    h["magic"] = "SPARAM1";
    h["kind"] = kind;
    h["dtype"] = "f32";
    h["layers"] = layers;
    h["config_hash"] = config_hash;
    h["sha256"] = sha256_hex(flat.data(), flat.size() * sizeof(float));
    h["payload"] = bin.filename().string();
    write_bytes(bin, flat.data(), flat.size() * sizeof(float));
    write_text(path, h.dump(2) + "\n");
}

void load_params(const fs::path& path, ParameterSet& params, const std::string& kind) {
    const json h = read_json(path);
    if (field<std::string>(h, "magic", path) != "SPARAM1") throw DataError(path.string() + ": field 'magic' is not SPARAM1");
    if (field<std::string>(h, "kind", path) != kind) {
        throw DataError(path.string() + ": field 'kind' is '" + h["kind"].get<std::string>() + "', expected " + kind);
    }
    const auto layers = field<json>(h, "layers", path);
    auto& items = params.items();
    if (!layers.is_array() || layers.size() != items.size()) throw DataError(path.string() + ": field 'layers' does not match the architecture");
    for (std::size_t i = 0; i < items.size(); ++i) {
        if (layers[i].value("name", "") != items[i].name || layers[i].value("size", std::size_t{0}) != items[i].data.size()) {
            throw DataError(path.string() + ": field 'layers' entry " + std::to_string(i) + " does not match " + items[i].name);
        }
    }
    const auto bytes = checked_payload(path, h, params.total_size() * sizeof(float));
    std::vector<double> flat(params.total_size());
    for (std::size_t i = 0; i < flat.size(); ++i) {
        float f;
        std::memcpy(&f, bytes.data() + i * sizeof(float), sizeof(float));
        if (!std::isfinite(f)) throw DataError(path.string() + ": non-finite parameter at index " + std::to_string(i));
        flat[i] = f;
    }
    params.unflatten(flat);
}

json plane_to_json(const Plane& p) { return {{"n", {p.n[0], p.n[1], p.n[2]}}, {"d", p.d}}; }

Plane plane_from_json(const json& j) {
    try {
        const auto n = j.at("n").get<std::vector<double>>();
        if (n.size() != 3) throw DataError("plane: field 'n' needs 3 entries");
        return Plane::from({n[0], n[1], n[2]}, j.at("d").get<double>());
    } catch (const json::exception& e) {
        throw DataError(std::string("plane: ") + e.what());
    }
}

}  // namespace symrec::io

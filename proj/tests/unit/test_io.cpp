#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "generators.hpp"
#include "symrec/errors.hpp"
#include "symrec/io.hpp"
#include "symrec/recon.hpp"
#include "symrec/sn.hpp"

using namespace symrec;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        std::random_device rd;
        path = fs::temp_directory_path() / ("symrec_io_" + std::to_string(rd()));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

void rewrite_header(const fs::path& p, const std::function<void(io::json&)>& edit) {
    io::json h = io::read_json(p);
    edit(h);
    io::write_text(p, h.dump());
}

std::string error_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const DataError& e) {
        return e.what();
    }
    return {};
}

}  // namespace

TEST_CASE("volume round trip") {
    TempDir t;
    gen::Engine e(51);
    const Volume soft(Dims{9, 10, 11}, gen::soft_volume(e, {9, 10, 11}).to_vector(), {0.5, 1.0, 1.5});
    io::save_volume(t.path / "soft.json", soft);
    const Volume a = io::load_volume(t.path / "soft.json");
    CHECK(a.dims() == soft.dims());
    CHECK(a.spacing() == soft.spacing());
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == static_cast<double>(static_cast<float>(soft[i])));

    const Volume mask = gen::binary_mask(e, {8, 8, 8}, 0.3);
    io::save_volume(t.path / "mask.json", mask);
    CHECK(io::read_json(t.path / "mask.json")["dtype"] == "u8");
    CHECK(fs::file_size(t.path / "mask.json.bin") == 512);
    const Volume b = io::load_volume(t.path / "mask.json");
    CHECK(std::equal(b.data().begin(), b.data().end(), mask.data().begin()));
    CHECK_THROWS_AS(io::save_volume(t.path / "x.json", soft, io::VoxelType::u8), DataError);
}

TEST_CASE("volume load errors name the field") {
    TempDir t;
    gen::Engine e(52);
    const fs::path p = t.path / "v.json";
    io::save_volume(p, gen::soft_volume(e, {8, 8, 8}));

    {
        std::fstream f(t.path / "v.json.bin", std::ios::in | std::ios::out | std::ios::binary);
        f.seekp(7);
        f.put('\x7f');
    }
    CHECK(error_of([&] { io::load_volume(p); }).find("sha256") != std::string::npos);

    io::save_volume(p, gen::soft_volume(e, {8, 8, 8}));
    rewrite_header(p, [](io::json& h) { h["dims"] = {8, 8}; });
    CHECK(error_of([&] { io::load_volume(p); }).find("'dims'") != std::string::npos);

    io::save_volume(p, gen::soft_volume(e, {8, 8, 8}));
    rewrite_header(p, [](io::json& h) { h.erase("dtype"); });
    CHECK(error_of([&] { io::load_volume(p); }).find("'dtype'") != std::string::npos);

    io::save_volume(p, gen::soft_volume(e, {8, 8, 8}));
    rewrite_header(p, [](io::json& h) { h["magic"] = "NOPE"; });
    CHECK(error_of([&] { io::load_volume(p); }).find("'magic'") != std::string::npos);

    io::save_volume(p, gen::soft_volume(e, {8, 8, 8}));
    fs::resize_file(t.path / "v.json.bin", 100);
    CHECK(error_of([&] { io::load_volume(p); }).find("bytes") != std::string::npos);

    CHECK_THROWS_AS(io::load_volume(t.path / "missing.json"), DataError);
    io::write_text(t.path / "bad.json", "{not json");
    CHECK_THROWS_AS(io::load_volume(t.path / "bad.json"), DataError);
}

TEST_CASE("parameter round trip and architecture check") {
    TempDir t;
    const SnParams sn = SnParams::init(5, false);
    io::save_params(t.path / "sn.json", sn.params, "sn", "abc");
    SnParams loaded = SnParams::init(6);
    io::load_params(t.path / "sn.json", loaded.params, "sn");
    const auto a = sn.params.flatten(), b = loaded.params.flatten();
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(b[i] == static_cast<double>(static_cast<float>(a[i])));

    RnParams rn = RnParams::init(1);
    CHECK_THROWS_AS(io::load_params(t.path / "sn.json", rn.params, "rn"), DataError);
    CHECK_THROWS_AS(io::load_params(t.path / "sn.json", rn.params, "sn"), DataError);
}

TEST_CASE("plane json and config hash") {
    const Plane p = Plane::from({0.0, 0.6, 0.8}, 12.25);
    const Plane q = io::plane_from_json(io::plane_to_json(p));
    CHECK(q.n == p.n);
    CHECK(q.d == p.d);
    CHECK_THROWS_AS(io::plane_from_json(io::json{{"n", {1, 0}}, {"d", 1.0}}), DataError);

    const io::json a = io::json::parse(R"({"b": 1, "a": [1, 2]})");
    const io::json b = io::json::parse(R"({"a": [1, 2], "b": 1})");
    CHECK(io::config_hash(a) == io::config_hash(b));
    CHECK(io::config_hash(a).size() == 16);
    CHECK(io::config_hash(a) != io::config_hash(io::json::parse(R"({"a": [2, 1], "b": 1})")));
    CHECK(io::sha256_hex("abc", 3) == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

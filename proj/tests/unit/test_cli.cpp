#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <random>
#include <string>
#include <sys/wait.h>

#include "symrec/io.hpp"

namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        std::random_device rd;
        path = fs::temp_directory_path() / ("symrec_cli_" + std::to_string(rd()));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

int run(const std::string& args) {
    const std::string cmd = std::string(SYMREC_CLI_PATH) + " " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("cli exit codes") {
    TempDir t;
    const std::string dir = t.path.string();
    CHECK(run("--help") == 0);
    CHECK(run("phantom gen --bogus") == 2);
    CHECK(run("metrics --pred " + dir + "/none.svox --gt " + dir + "/none.svox") == 3);

    symrec::io::write_text(t.path / "bad.json", R"({"count": 0})");
    CHECK(run("phantom gen --config " + dir + "/bad.json --out " + dir + "/c") == 2);
    symrec::io::write_text(t.path / "unknown.json", R"({"count": 1, "colour": "red"})");
    CHECK(run("phantom gen --config " + dir + "/unknown.json --out " + dir + "/c") == 2);
}

TEST_CASE("cli pipeline on a tiny corpus") {
    TempDir t;
    const std::string dir = t.path.string();
    symrec::io::write_text(t.path / "corpus.json", R"({"count": 2, "edge": 32, "seed": 5})");
    REQUIRE(run("phantom gen --config " + dir + "/corpus.json --out " + dir + "/c") == 0);
    CHECK(fs::exists(t.path / "c" / "manifest.json"));
    const std::string skull = dir + "/c/case_0000_skull.svox";
    const std::string implant = dir + "/c/case_0000_implant.svox";
    const std::string defective = dir + "/c/case_0000_defective.svox";
    CHECK(run("symmetry fit --in " + skull + " --out " + dir + "/plane.json") == 0);
    const auto plane = symrec::io::read_json(t.path / "plane.json");
    CHECK(plane.contains("n"));
    CHECK(run("symmetry fit --in " + skull + " --method amortized") == 2);
    CHECK(run("metrics --pred " + implant + " --gt " + implant + " --out " + dir + "/m.csv") == 0);
    CHECK(run("refine --in " + defective + " --rec " + implant + " --iterations 5 --out " + dir + "/r.svox --report " + dir +
              "/r.json") == 0);
    CHECK(fs::exists(t.path / "r.json"));
    CHECK(run("refine --in " + defective + " --rec " + implant + " --lambda 0 --out " + dir + "/r.svox") == 2);
}

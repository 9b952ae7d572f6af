#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <string>

#include "refvid/util.hpp"

using namespace refvid;
namespace fs = std::filesystem;

#ifndef REFVID_BIN
#error "REFVID_BIN must point at the CLI binary"
#endif

namespace {

int run(const std::string& args) {
    const std::string cmd = std::string(REFVID_BIN) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

fs::path temp_dir(const std::string& tag) {
    auto p = fs::temp_directory_path() / ("refvid_cli_" + tag);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

} // namespace

TEST_CASE("exit codes: usage errors are 1, runtime failures are 2") {
    CHECK(run("definitely_not_a_subcommand") == 1);
    CHECK(run("") == 1);
    CHECK(run("--help") == 0);
    CHECK(run("gen") == 1);                                // missing --out
    CHECK(run("train --data /nonexistent --out /tmp/x") == 2);
    auto dir = temp_dir("badoverride");
    CHECK(run("gen --out " + (dir / "d").string() + " --override bogus.key=1") == 2);
    fs::remove_all(dir);
}

TEST_CASE("gen is deterministic across invocations") {
    auto dir = temp_dir("gen");
    const std::string common =
        " --seed 7 --n 6 --override model.k=3 --override dataset.actors_max=2";
    CHECK(run("gen --out " + (dir / "a").string() + common) == 0);
    CHECK(run("gen --out " + (dir / "b").string() + common) == 0);
    CHECK(fnv1a64_file(dir / "a" / "manifest.json") == fnv1a64_file(dir / "b" / "manifest.json"));
    CHECK(fnv1a64_file(dir / "a" / "sample_00000" / "frames.bin") ==
          fnv1a64_file(dir / "b" / "sample_00000" / "frames.bin"));
    CHECK(fnv1a64_file(dir / "a" / "embeddings.bin") ==
          fnv1a64_file(dir / "b" / "embeddings.bin"));
    fs::remove_all(dir);
}

TEST_CASE("train then eval produce the documented outputs") {
    auto dir = temp_dir("pipeline");
    const std::string tiny =
        " --override model.k=3 --override model.c_e=8 --override model.d=2"
        " --override model.c_v=16 --override model.c_c=8 --override model.seg_width=4"
        " --override optim.iters=6 --override optim.batch=2"
        " --override dataset.actors_max=2";
    CHECK(run("gen --out " + (dir / "data").string() + " --seed 3 --n 8" +
              " --override model.k=3 --override model.c_e=8 --override dataset.actors_max=2") == 0);
    CHECK(run("train --data " + (dir / "data").string() + " --out " + (dir / "run").string() +
              tiny) == 0);
    CHECK(fs::exists(dir / "run" / "checkpoint.bin"));
    CHECK(fs::exists(dir / "run" / "losses.csv"));
    CHECK(run("eval --data " + (dir / "data").string() + " --checkpoint " +
              (dir / "run" / "checkpoint.bin").string() + " --out " + (dir / "eval").string() +
              " --split test" + tiny) == 0);
    CHECK(fs::exists(dir / "eval" / "metrics.json"));
    // the stored config hash reflects overrides: a different lambda is rejected
    CHECK(run("eval --data " + (dir / "data").string() + " --checkpoint " +
              (dir / "run" / "checkpoint.bin").string() + " --out " + (dir / "eval2").string() +
              tiny + " --override model.c_v=99") == 2);
    fs::remove_all(dir);
}

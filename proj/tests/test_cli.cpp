#include "support.hpp"

#include "cli.hpp"
#include "protector/prng.hpp"
#include "protector/wat.hpp"

#include <catch2/catch_amalgamated.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace protector;

namespace {

struct Outcome {
    int code;
    std::string out;
    std::string err;
};

Outcome invoke_cli(std::vector<std::string> args) {
    std::ostringstream out, err;
    const int code = cli::run_cli(args, out, err);
    return {code, out.str(), err.str()};
}

struct TempDir {
    std::filesystem::path path;
    TempDir() {
        path = std::filesystem::temp_directory_path() /
               ("protector-cli-" + std::to_string(std::random_device{}()));
        std::filesystem::create_directories(path);
    }
    ~TempDir() { std::filesystem::remove_all(path); }
    [[nodiscard]] std::string operator/(const std::string& name) const { return (path / name).string(); }
};

std::string corpus(const std::string& name) { return (default_corpus_dir() / (name + ".wat")).string(); }

} // namespace

TEST_CASE("protect writes a module that parses back", "[cli]") {
    TempDir dir;
    const auto r = invoke_cli({"protect", corpus("hijack_indirect"), "--pass", "canary", "--out", dir / "b.wat"});
    REQUIRE(r.code == cli::kExitOk);
    CHECK_NOTHROW(wat::parse_module(test::slurp(dir / "b.wat")));
}

TEST_CASE("legacy flags map onto --pass", "[cli]") {
    CHECK(cli::rewrite_legacy_flags({"protect", "a.wat", "-canary_and_ASLR", "--out", "b"}) ==
          std::vector<std::string>{"protect", "a.wat", "--pass", "both", "--out", "b"});
    TempDir dir;
    REQUIRE(invoke_cli({"protect", corpus("linear_overwrite"), "-canary_and_ASLR", "--out", dir / "legacy.wat"}).code == 0);
    REQUIRE(invoke_cli({"protect", corpus("linear_overwrite"), "--pass", "both", "--out", dir / "modern.wat"}).code == 0);
    CHECK(test::slurp(dir / "legacy.wat") == test::slurp(dir / "modern.wat"));
    REQUIRE(invoke_cli({"protect", corpus("linear_overwrite"), "-ASLR", "--out", dir / "a.wat"}).code == 0);
    REQUIRE(invoke_cli({"protect", corpus("linear_overwrite"), "-canary", "--out", dir / "c.wat"}).code == 0);
    CHECK(test::slurp(dir / "a.wat") != test::slurp(dir / "c.wat"));
}

TEST_CASE("run reports the canary trap with exit code 3", "[cli]") {
    TempDir dir;
    const auto c = load_corpus_case("hijack_indirect");
    REQUIRE(invoke_cli({"protect", corpus("hijack_indirect"), "--pass", "canary", "--out", dir / "b.wat"}).code == 0);
    const auto r = invoke_cli({"run", dir / "b.wat", "--invoke", "main", "--input-addr", "4096", "--input-hex",
                        to_hex(*c.attack_input), "--time", "42"});
    CHECK(r.code == cli::kExitTrap);
    CHECK_THAT(r.err, Catch::Matchers::ContainsSubstring("CanaryMismatch"));

    const auto benign = invoke_cli({"run", dir / "b.wat", "--invoke", "main", "--input-addr", "4096", "--input-hex",
                             to_hex(c.benign_input), "--time", "42"});
    CHECK(benign.code == 0);
    CHECK(benign.out == "110\n");
}

TEST_CASE("run prints i32 results signed and passes arguments", "[cli]") {
    TempDir dir;
    {
        std::ofstream(dir / "m.wat") << R"((module (func (export "sub") (param i32 i32) (result i32) local.get 0 local.get 1 i32.sub)))";
    }
    const auto r = invoke_cli({"run", dir / "m.wat", "--invoke", "sub", "--arg", "2", "--arg", "5"});
    CHECK(r.code == 0);
    CHECK(r.out == "-3\n");
    CHECK(invoke_cli({"run", dir / "m.wat", "--invoke", "sub", "--arg", "2"}).code == cli::kExitUsage);
    CHECK(invoke_cli({"run", dir / "m.wat", "--invoke", "sub", "--arg", "99999999999", "--arg", "1"}).code == cli::kExitUsage);
}

TEST_CASE("protect, run --count and report predict the measured overhead", "[cli]") {
    TempDir dir;
    const auto c = load_corpus_case("benign_copy");
    const auto hex = to_hex(c.benign_input);
    REQUIRE(invoke_cli({"protect", corpus("benign_copy"), "--pass", "both", "--out", dir / "p.wat", "--report",
                 dir / "t.json", "--emit-glue", dir / "glue.js"})
                .code == 0);
    auto base = invoke_cli({"run", corpus("benign_copy"), "--invoke", "main", "--input-addr", "4096", "--input-hex", hex,
                     "--count"});
    auto prot = invoke_cli({"run", dir / "p.wat", "--invoke", "main", "--input-addr", "4096", "--input-hex", hex, "--time",
                     "42", "--count"});
    REQUIRE(base.code == 0);
    REQUIRE(prot.code == 0);
    std::ofstream(dir / "base.json") << base.out;
    std::ofstream(dir / "prot.json") << prot.out;

    const auto r = invoke_cli({"report", "--base", dir / "base.json", "--protected", dir / "prot.json", "--transform",
                        dir / "t.json"});
    REQUIRE(r.code == 0);
    const auto j = nlohmann::json::parse(r.out);
    CHECK(j["passes"] == nlohmann::json{"canary", "aslr"});
    CHECK(j["predicted_extra"] == j["measured_extra"]);
    CHECK(j["measured_extra"].get<std::uint64_t>() > 0);
    CHECK(j["paper_reference"]["canary"]["reference"] == true);
    CHECK_THAT(test::slurp(dir / "glue.js"), Catch::Matchers::ContainsSubstring("\"time\""));
}

TEST_CASE("shuffle flags reach the report", "[cli]") {
    TempDir dir;
    auto r = invoke_cli({"protect", corpus("hijack_indirect"), "--shuffle-table", "--seed", "7", "--out", dir / "s.wat",
                  "--report", dir / "s.json"});
    REQUIRE(r.code == 0);
    auto j = nlohmann::json::parse(test::slurp(dir / "s.json"));
    CHECK(j["table_shuffle"]["uncovered_count"] == 0);
    CHECK(j["passes"] == nlohmann::json{"table_shuffle"});

    // A seed whose first draw swaps the partition reached by the dynamic call site.
    std::uint32_t seed = 0;
    while (Xorshift32(seed).next() % 2 != 0) ++seed;
    const auto s = std::to_string(seed);
    r = invoke_cli({"protect", corpus("hijack_indirect"), "--shuffle-table", "--shuffle-unpinned", "--strict", "--seed", s,
             "--out", dir / "x.wat"});
    CHECK(r.code == cli::kExitError);
    CHECK_THAT(r.err, Catch::Matchers::ContainsSubstring("refused"));
    r = invoke_cli({"protect", corpus("hijack_indirect"), "--shuffle-table", "--shuffle-unpinned", "--seed", s, "--out",
             dir / "x.wat"});
    CHECK(r.code == 0);
    CHECK_THAT(r.err, Catch::Matchers::ContainsSubstring("non-constant index"));
}

TEST_CASE("identical arguments give identical bytes", "[cli]") {
    TempDir dir;
    for (const auto* out : {"one.wat", "two.wat"}) {
        REQUIRE(invoke_cli({"protect", corpus("hijack_indirect"), "--pass", "both", "--shuffle-table", "--seed", "3", "--out",
                     dir / out})
                    .code == 0);
    }
    CHECK(test::slurp(dir / "one.wat") == test::slurp(dir / "two.wat"));
}

TEST_CASE("usage and input errors map to exit codes", "[cli]") {
    TempDir dir;
    CHECK(invoke_cli({}).code == cli::kExitUsage);
    CHECK(invoke_cli({"protect", corpus("hijack_indirect"), "--pass", "bogus", "--out", dir / "o.wat"}).code == cli::kExitUsage);
    CHECK(invoke_cli({"protect", corpus("hijack_indirect"), "--out", dir / "o.wat"}).code == cli::kExitUsage);
    CHECK(invoke_cli({"protect", dir / "missing.wat", "--pass", "aslr", "--out", dir / "o.wat"}).code == cli::kExitUsage);
    CHECK(invoke_cli({"run", corpus("hijack_indirect"), "--invoke", "main", "--input-addr", "4096"}).code == cli::kExitUsage);
    CHECK(invoke_cli({"--help"}).code == cli::kExitOk);

    {
        std::ofstream(dir / "bad.wat") << "(module (func i32.div_u))";
    }
    const auto bad = invoke_cli({"protect", dir / "bad.wat", "--pass", "aslr", "--out", dir / "o.wat"});
    CHECK(bad.code == cli::kExitError);
    CHECK_THAT(bad.err, Catch::Matchers::ContainsSubstring("i32.div_u"));
    CHECK(invoke_cli({"run", dir / "bad.wat", "--invoke", "x"}).code == cli::kExitError);
}

#ifdef PROTECTOR_BINARY
TEST_CASE("the installed binary agrees with the in-process entry point", "[cli]") {
    const std::string cmd = std::string(PROTECTOR_BINARY) + " run " + corpus("benign_copy") +
                            " --invoke main --input-addr 4096 --input-hex 0c00000068656c6c6f2c207761736d21 > /dev/null";
    CHECK(std::system(cmd.c_str()) == 0);
}
#endif

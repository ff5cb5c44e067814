#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>

#include "apgw/digest.hpp"
#include "apgw/io.hpp"

using namespace apgw;
using Catch::Matchers::ContainsSubstring;
using Catch::Matchers::WithinAbs;

namespace {

namespace fs = std::filesystem;

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("apgw_io_test_" + std::to_string(::getpid()) + "_" +
                std::to_string(counter()));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    static int counter() {
        static int c = 0;
        return c++;
    }
    fs::path file(const std::string& name) const { return path / name; }
};

fs::path write_csv(const TempDir& dir, const std::string& name, const std::string& body) {
    const fs::path p = dir.file(name);
    std::ofstream out(p);
    out << body;
    return p;
}

}  // namespace

TEST_CASE("dataset ingestion") {
    TempDir dir;

    SECTION("three hand-written rows produce the exact matrix") {
        const auto p = write_csv(dir, "toy.csv",
                                 "time,status,age,dose\n"
                                 "1.5,1,62,0.25\n"
                                 "0.75,0,48,1\n"
                                 "3,1,71,0.5\n");
        const SurvivalDataset d = io::load_dataset(p);
        REQUIRE(d.n() == 3);
        REQUIRE(d.p() == 2);
        CHECK(d.names == std::vector<std::string>{"age", "dose"});
        CHECK(d.times[0] == 1.5);
        CHECK(d.times[1] == 0.75);
        CHECK(d.times[2] == 3.0);
        CHECK(d.status[0] == 1);
        CHECK(d.status[1] == 0);
        CHECK(d.covariates(0, 0) == 62.0);
        CHECK(d.covariates(1, 1) == 1.0);
        CHECK(d.covariates(2, 1) == 0.5);
    }

    SECTION("errors carry the file line number") {
        const auto p = write_csv(dir, "bad_time.csv",
                                 "time,status\n1.0,1\n0,1\n");
        CHECK_THROWS_WITH(io::load_dataset(p), ContainsSubstring(":3:") &&
                                                   ContainsSubstring("positive"));

        const auto p2 = write_csv(dir, "bad_status.csv", "time,status\n1.0,2\n");
        CHECK_THROWS_WITH(io::load_dataset(p2),
                          ContainsSubstring(":2:") && ContainsSubstring("status"));

        const auto p3 = write_csv(dir, "missing.csv",
                                  "time,status,x\n1.0,1,2.0\n2.0,1,NA\n");
        CHECK_THROWS_WITH(io::load_dataset(p3),
                          ContainsSubstring(":3:") && ContainsSubstring("missing"));

        const auto p4 = write_csv(dir, "ragged.csv", "time,status,x\n1.0,1\n");
        CHECK_THROWS_WITH(io::load_dataset(p4), ContainsSubstring("expected 3 fields"));

        const auto p5 = write_csv(dir, "nocol.csv", "t,status\n1.0,1\n");
        CHECK_THROWS_WITH(io::load_dataset(p5), ContainsSubstring("no column named 'time'"));
    }

    SECTION("a five-level factor expands to four indicators against the first level") {
        const auto p = write_csv(dir, "arms.csv",
                                 "time,status,treatment\n"
                                 "1,1,palliative\n"
                                 "2,0,surgery\n"
                                 "3,1,chemo\n"
                                 "4,1,radio\n"
                                 "5,0,chemo_radio\n"
                                 "6,1,palliative\n");
        const SurvivalDataset d = io::load_dataset(p);
        REQUIRE(d.p() == 4);
        CHECK(d.names == std::vector<std::string>{"treatment=surgery", "treatment=chemo",
                                                  "treatment=radio",
                                                  "treatment=chemo_radio"});
        // reference level rows are all-zero
        CHECK(d.covariates.row(0).sum() == 0.0);
        CHECK(d.covariates.row(5).sum() == 0.0);
        CHECK(d.covariates(1, 0) == 1.0);
        CHECK(d.covariates(2, 1) == 1.0);
        CHECK(d.covariates(3, 2) == 1.0);
        CHECK(d.covariates(4, 3) == 1.0);
        for (int i = 0; i < d.n(); ++i) CHECK(d.covariates.row(i).sum() <= 1.0);
    }

    SECTION("schema selects columns by name") {
        const auto p = write_csv(dir, "named.csv",
                                 "followup,event,age,junk\n2.0,1,50,zzz\n1.0,0,60,yyy\n");
        io::DatasetSchema schema;
        schema.time_column = "followup";
        schema.status_column = "event";
        schema.covariate_columns = {"age"};
        const SurvivalDataset d = io::load_dataset(p, schema);
        CHECK(d.p() == 1);
        CHECK(d.covariates(1, 0) == 60.0);
    }

    SECTION("write then load is an exact roundtrip") {
        const auto p = write_csv(dir, "orig.csv",
                                 "time,status,x\n0.12345678901234567,1,3.3333333333333335\n"
                                 "2.5,0,-0.1\n");
        const SurvivalDataset d = io::load_dataset(p);
        io::write_dataset(dir.file("echo.csv"), d);
        const SurvivalDataset back = io::load_dataset(dir.file("echo.csv"));
        CHECK(dataset_digest(back) == dataset_digest(d));
        CHECK(back.times == d.times);
        CHECK(back.covariates == d.covariates);
    }
}

TEST_CASE("config grammar") {
    SECTION("sections, keys, comments and overrides") {
        io::Config cfg = io::Config::parse_text(
            "# comment\n"
            "[data]\n"
            "path = a.csv\n"
            "[optimizer]\n"
            "seed = 42\n"
            "gradient_tolerance = 1e-8\n",
            "test.ini");
        CHECK(cfg.take("data", "path") == "a.csv");
        CHECK(cfg.take_number("optimizer", "seed", 0) == 42.0);
        CHECK(cfg.take_number("optimizer", "gradient_tolerance", 0) == 1e-8);
        CHECK(cfg.take_or("data", "time", "time") == "time");
        CHECK_NOTHROW(cfg.finish());
    }

    SECTION("unknown keys are hard errors") {
        io::Config cfg = io::Config::parse_text("[data]\npath = a.csv\ntypo = 1\n");
        CHECK(cfg.take("data", "path").has_value());
        CHECK_THROWS_WITH(cfg.finish(), ContainsSubstring("unknown config key 'data.typo'"));
    }

    SECTION("malformed lines name the location") {
        CHECK_THROWS_WITH(io::Config::parse_text("[data\n", "f.ini"),
                          ContainsSubstring("f.ini:1"));
        CHECK_THROWS_WITH(io::Config::parse_text("[a]\njust a line\n", "f.ini"),
                          ContainsSubstring("f.ini:2"));
        CHECK_THROWS_WITH(io::Config::parse_text("[a]\n= x\n", "f.ini"),
                          ContainsSubstring("empty key"));
    }

    SECTION("flag-style overrides win") {
        io::Config cfg = io::Config::parse_text("[optimizer]\nseed = 1\n");
        cfg.set("optimizer", "seed", "99");
        CHECK(cfg.take_number("optimizer", "seed", 0) == 99.0);
    }

    SECTION("numbers must parse completely") {
        io::Config cfg = io::Config::parse_text("[a]\nx = 1.5z\n");
        CHECK_THROWS_WITH(cfg.take_number("a", "x", 0), ContainsSubstring("a.x"));
    }
}

TEST_CASE("atomic writes and digests") {
    TempDir dir;
    const auto target = dir.file("nested/dir/out.txt");
    io::atomic_write(target, "payload");
    CHECK(io::read_file(target) == "payload");
    CHECK_FALSE(fs::exists(target.string() + ".tmp"));

    // FNV-1a reference values
    CHECK(fnv1a64(std::string("")) == 0xcbf29ce484222325ULL);
    CHECK(fnv1a64(std::string("a")) == 0xaf63dc4c8601ec8cULL);
    CHECK(io::file_digest(target) == fnv1a64(std::string("payload")));
    CHECK(digest_hex(0xaf63dc4c8601ec8cULL) == "af63dc4c8601ec8c");
}

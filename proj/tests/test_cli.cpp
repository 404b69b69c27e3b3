#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include <nlohmann/json.hpp>

#include "depmmd/coreset_io.hpp"
#include "depmmd/manifest.hpp"

using namespace depmmd;
namespace fs = std::filesystem;

namespace {

std::string read_file(const fs::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) return {};
    std::ostringstream os;
    os << is.rdbuf();
    return os.str();
}

std::size_t count_lines(const std::string& text) {
    std::size_t lines = 0;
    for (char ch : text)
        if (ch == '\n') ++lines;
    return lines;
}

struct RunResult {
    int code = -1;
    std::string out;
    std::string err;
};

RunResult run_cli(const std::string& args) {
    static int counter = 0;
    ++counter;
    const fs::path out_file =
        fs::temp_directory_path() / ("depmmd_cli_stdout_" + std::to_string(counter) + ".txt");
    const fs::path err_file =
        fs::temp_directory_path() / ("depmmd_cli_stderr_" + std::to_string(counter) + ".txt");
    const std::string cmd = std::string(DEPMMD_CLI_PATH) + " " + args + " >" + out_file.string() +
                            " 2>" + err_file.string();
    const int status = std::system(cmd.c_str());
    RunResult r;
    if (status != -1 && WIFEXITED(status)) r.code = WEXITSTATUS(status);
    r.out = read_file(out_file);
    r.err = read_file(err_file);
    fs::remove(out_file);
    fs::remove(err_file);
    return r;
}

fs::path work_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / ("depmmd_cli_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

}  // namespace

TEST_CASE("synth writes a loadable, deterministic collection") {
    const fs::path dir = work_dir("synth");
    const std::string base = " --n 60 --seed 7";

    const RunResult first = run_cli("synth gauss3 --out " + (dir / "one").string() + base);
    REQUIRE(first.code == 0);
    CHECK(first.out.find("2 datasets, 60 rows each") != std::string::npos);

    const LoadedCollection loaded = load_collection(dir / "one" / "manifest.json");
    CHECK(loaded.collection.labels == std::vector<std::string>{"sample1", "sample2"});
    CHECK(loaded.table.rows() == 120);
    CHECK(loaded.collection.candidates.size() == 120);
    REQUIRE(loaded.collection.attributes.find("component", "sample1#0"));
    REQUIRE(loaded.collection.attributes.find("component_id", "sample2#59"));

    const RunResult second = run_cli("synth gauss3 --out " + (dir / "two").string() + base);
    REQUIRE(second.code == 0);
    for (const auto& entry : fs::directory_iterator(dir / "one")) {
        const fs::path other = dir / "two" / entry.path().filename();
        INFO(entry.path().filename().string());
        REQUIRE(fs::exists(other));
        CHECK(read_file(entry.path()) == read_file(other));
    }

    const RunResult reseeded = run_cli("synth gauss3 --out " + (dir / "three").string() + " --n 60 --seed 8");
    REQUIRE(reseeded.code == 0);
    CHECK(read_file(dir / "one" / "sample1.csv") != read_file(dir / "three" / "sample1.csv"));
}

TEST_CASE("unknown preset names the available ones") {
    const fs::path dir = work_dir("badpreset");
    const RunResult r = run_cli("synth gaussian99 --out " + (dir / "x").string());
    CHECK(r.code == 1);
    CHECK(r.err.find("gauss3") != std::string::npos);
    CHECK(r.err.find("skewpair") != std::string::npos);
}

TEST_CASE("fit satisfies a reachable threshold and writes coreset.json") {
    const fs::path dir = work_dir("fit");
    REQUIRE(run_cli("synth skewpair --out " + (dir / "data").string() + " --n 80 --seed 3").code == 0);

    const RunResult r = run_cli("fit --manifest " + (dir / "data" / "manifest.json").string() +
                                " --out " + (dir / "run").string() + " --eps2 0.01");
    REQUIRE(r.code == 0);
    CHECK(r.out.find("satisfied: true (stop reason: threshold_met)") != std::string::npos);

    const LoadedCoreset coreset = read_coreset((dir / "run" / "coreset.json").string());
    CHECK(coreset.satisfied);
    CHECK(coreset.epsilon_sq == 0.01);
    CHECK(coreset.labels == std::vector<std::string>{"a", "b"});
    CHECK(coreset.support_ids.size() == coreset.support_indices.size());
    for (const auto& label : coreset.labels) {
        CHECK(coreset.mmd_sq.at(label) <= 0.01);
        CHECK(coreset.counts.at(label) == 80);
    }
}

TEST_CASE("fit returns 2 when a budget binds before the threshold") {
    const fs::path dir = work_dir("fit_budget");
    REQUIRE(run_cli("synth skewpair --out " + (dir / "data").string() + " --n 40 --seed 5").code == 0);

    const RunResult r = run_cli("fit --manifest " + (dir / "data" / "manifest.json").string() +
                                " --out " + (dir / "run").string() + " --eps2 1e-9 --max-m 2");
    CHECK(r.code == 2);
    CHECK(r.out.find("satisfied: false (stop reason: max_exemplars)") != std::string::npos);
    CHECK(fs::exists(dir / "run" / "coreset.json"));
}

TEST_CASE("a missing manifest aborts before any output is created") {
    const fs::path dir = work_dir("fit_missing");
    const fs::path out = dir / "run";
    const RunResult r = run_cli("fit --manifest " + (dir / "no_such_manifest.json").string() +
                                " --out " + out.string());
    CHECK(r.code == 1);
    CHECK(r.err.find("error:") != std::string::npos);
    CHECK_FALSE(fs::exists(out));
}

TEST_CASE("an unknown algorithm is rejected") {
    const fs::path dir = work_dir("fit_badalgo");
    REQUIRE(run_cli("synth skewpair --out " + (dir / "data").string() + " --n 20 --seed 2").code == 0);
    const RunResult r = run_cli("fit --manifest " + (dir / "data" / "manifest.json").string() +
                                " --out " + (dir / "run").string() + " --algorithm gonzales");
    CHECK(r.code == 1);
    CHECK(r.err.find("dmmd-opt") != std::string::npos);
    CHECK_FALSE(fs::exists(dir / "run"));
}

TEST_CASE("analyze produces the full table set from a fitted coreset") {
    const fs::path dir = work_dir("analyze");
    const std::string manifest = (dir / "data" / "manifest.json").string();
    const std::string out = (dir / "run").string();
    REQUIRE(run_cli("synth skewpair --out " + (dir / "data").string() + " --n 80 --seed 11").code == 0);
    REQUIRE(run_cli("fit --manifest " + manifest + " --out " + out + " --eps2 0.01").code == 0);

    SECTION("default criticism depth is min(20, smallest dataset)") {
        const RunResult r = run_cli("analyze --manifest " + manifest + " --out " + out);
        REQUIRE(r.code == 0);
        CHECK(r.out.find("criticisms per dataset: 20") != std::string::npos);
        const std::string crit = read_file(dir / "run" / "criticisms.csv");
        CHECK(count_lines(crit) == 1 + 20 * 2);
        CHECK(crit.rfind("dataset,rank,row_id,witness\n", 0) == 0);

        const std::string ratios = read_file(dir / "run" / "ratios.csv");
        CHECK(ratios.rfind("label_a,label_b,exemplar_id,w_a,w_b,f,flag,partition\n", 0) == 0);
        CHECK(ratios.find("a,b,") != std::string::npos);

        // optional tables require their flags
        CHECK_FALSE(fs::exists(dir / "run" / "grouped.csv"));
        CHECK_FALSE(fs::exists(dir / "run" / "moments.csv"));
    }

    SECTION("explicit depth, grouped weights, and attribute moments") {
        const RunResult r = run_cli("analyze --manifest " + manifest + " --out " + out +
                                    " --criticisms-k 5 --labels component --attribute component_id");
        REQUIRE(r.code == 0);
        CHECK(count_lines(read_file(dir / "run" / "criticisms.csv")) == 1 + 5 * 2);

        const std::string grouped = read_file(dir / "run" / "grouped.csv");
        CHECK(grouped.rfind("dataset,attribute,group,weight_sum\n", 0) == 0);
        CHECK(grouped.find(",component,c") != std::string::npos);

        const std::string moments = read_file(dir / "run" / "moments.csv");
        CHECK(moments.rfind("dataset,attribute,mean,sd\n", 0) == 0);
        CHECK(moments.find(",component_id,") != std::string::npos);
    }

    SECTION("a grouping attribute absent from the data fails cleanly") {
        const RunResult r = run_cli("analyze --manifest " + manifest + " --out " + out +
                                    " --labels no_such_attribute");
        CHECK(r.code == 1);
        CHECK(r.err.find("no_such_attribute") != std::string::npos);
    }
}

TEST_CASE("bench writes both tables") {
    const fs::path dir = work_dir("bench");
    REQUIRE(run_cli("synth skewpair --out " + (dir / "data").string() + " --n 30 --seed 13").code == 0);

    const RunResult r = run_cli("bench --manifest " + (dir / "data" / "manifest.json").string() +
                                " --out " + (dir / "run").string() +
                                " --algorithm dmmd --max-m 3 --eps2 0.05");
    REQUIRE(r.code == 0);

    const std::string curves = read_file(dir / "run" / "curves.csv");
    CHECK(curves.rfind("algorithm,m,dataset,mmd_sq,seconds\n", 0) == 0);
    CHECK(count_lines(curves) == 1 + 3 * 2);

    const std::string sizes = read_file(dir / "run" / "sizes.csv");
    CHECK(sizes.rfind("algorithm,eps2,size,satisfied,stop_reason\n", 0) == 0);
    CHECK(count_lines(sizes) == 2);
    CHECK(sizes.find("dmmd,0.050000000000000003,") != std::string::npos);
}

TEST_CASE("running without a subcommand reports a usage error") {
    const RunResult r = run_cli("");
    CHECK(r.code == 1);
}

TEST_CASE("help output matches the committed golden transcripts") {
    const std::pair<std::string, std::string> cases[] = {
        {"--help", "help_main.txt"},       {"fit --help", "help_fit.txt"},
        {"analyze --help", "help_analyze.txt"}, {"bench --help", "help_bench.txt"},
        {"synth --help", "help_synth.txt"},
    };
    for (const auto& [args, golden] : cases) {
        INFO(args);
        const RunResult r = run_cli(args);
        CHECK(r.code == 0);
        const std::string expected = read_file(fs::path(DEPMMD_GOLDEN_DIR) / golden);
        REQUIRE_FALSE(expected.empty());
        CHECK(r.out == expected);
    }
}

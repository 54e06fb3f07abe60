#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <json.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <unistd.h>

#include "splitpipe/errors.hpp"
#include "splitpipe/harness.hpp"

using namespace splitpipe;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string bin_path() {
    const char* env = std::getenv("SPLITPIPE_BIN");
    REQUIRE(env != nullptr);
    return env;
}

struct CliResult {
    int code = -1;
    std::string out;
};

// Runs `sh -c <command>` and captures combined stdout+stderr.
CliResult run_shell(const std::string& command) {
    CliResult r;
    FILE* f = popen((command + " 2>&1").c_str(), "r");
    REQUIRE(f != nullptr);
    char buf[4096];
    std::size_t n;
    while ((n = fread(buf, 1, sizeof buf, f)) > 0) r.out.append(buf, n);
    int status = pclose(f);
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : 128 + WTERMSIG(status);
    return r;
}

CliResult run_cli(const std::string& args) { return run_shell(bin_path() + " " + args); }

fs::path temp_dir() {
    static fs::path dir = [] {
        fs::path p = fs::temp_directory_path() / ("splitpipe_cli_" + std::to_string(::getpid()));
        fs::create_directories(p);
        return p;
    }();
    return dir;
}

// A small fast profile shared by the process-driving tests.
std::string toy_profile() {
    static std::string path = [] {
        fs::path p = temp_dir() / "toy.profile";
        auto r = run_cli("profile synth --blocks 3 --shape front_heavy --total 0.03 "
                         "--decay 0.5 --input-bytes 1024 -o " +
                         p.string());
        REQUIRE(r.code == 0);
        return p.string();
    }();
    return path;
}

}  // namespace

TEST_CASE("--version prints name and version") {
    auto r = run_cli("--version");
    CHECK(r.code == 0);
    CHECK(r.out.find("splitpipe 0.1.0") != std::string::npos);
}

TEST_CASE("bare invocation is a usage error") {
    auto r = run_cli("");
    CHECK(r.code == kExitUsage);
    auto r2 = run_cli("no-such-command");
    CHECK(r2.code == kExitUsage);
    auto r3 = run_cli("plan");  // missing required --model
    CHECK(r3.code == kExitUsage);
}

TEST_CASE("--help exits zero") {
    CHECK(run_cli("--help").code == 0);
    CHECK(run_cli("sweep --help").code == 0);
}

TEST_CASE("profile synth emits a loadable profile") {
    auto path = toy_profile();
    std::ifstream in(path);
    std::stringstream ss;
    ss << in.rdbuf();
    auto text = ss.str();
    CHECK(text.find("model synthetic") != std::string::npos);
    CHECK(text.find("batch 8") != std::string::npos);
    CHECK(text.find("input_bytes 1024") != std::string::npos);
    CHECK(text.find("block b1 out=512") != std::string::npos);
    CHECK(text.find("block b3 out=128") != std::string::npos);
}

TEST_CASE("profile validate accepts good and rejects bad input") {
    auto ok = run_cli("profile validate " + toy_profile());
    CHECK(ok.code == 0);
    CHECK(ok.out.find("ok:") != std::string::npos);

    auto bad_path = temp_dir() / "bad.profile";
    std::ofstream(bad_path) << "model broken\nbatch 0\n";
    auto bad = run_cli("profile validate " + bad_path.string());
    CHECK(bad.code == kExitValidation);

    auto missing = run_cli("profile validate " + (temp_dir() / "ghost.profile").string());
    CHECK(missing.code == kExitRuntime);
}

TEST_CASE("profile show prints the blocks") {
    auto r = run_cli("profile show " + toy_profile());
    CHECK(r.code == 0);
    CHECK(r.out.find("b1") != std::string::npos);
    CHECK(r.out.find("b3") != std::string::npos);
}

TEST_CASE("plan prints one row per split with Pareto markers") {
    auto r = run_cli("plan --model " + toy_profile() + " --devices cpu,cpu");
    CHECK(r.code == 0);
    CHECK(r.out.find("P1") != std::string::npos);
    CHECK(r.out.find("P2") != std::string::npos);
    CHECK(r.out.find('*') != std::string::npos);
}

TEST_CASE("plan --json is machine readable") {
    auto r = run_cli("plan --model " + toy_profile() + " --devices cpu,cpu --json");
    CHECK(r.code == 0);
    auto j = json::parse(r.out);
    REQUIRE(j.is_array());
    REQUIRE(j.size() == 2);
    CHECK(j[0]["split"] == "P1");
    CHECK(j[0].contains("latency_s"));
    CHECK(j[0].contains("throughput_ips"));
    CHECK(j[0].contains("bottleneck"));
    CHECK(j[0]["pareto"].is_boolean());
}

TEST_CASE("plan rejects a device class the profile lacks") {
    auto r = run_cli("plan --model " + toy_profile() + " --devices cpu,tpu");
    CHECK(r.code == kExitValidation);
    CHECK(r.out.find("tpu") != std::string::npos);
}

TEST_CASE("plan needs exactly two devices") {
    auto r = run_cli("plan --model " + toy_profile() + " --devices cpu");
    CHECK(r.code == kExitValidation);
}

TEST_CASE("pareto filters a CSV from stdin") {
    auto r = run_shell("printf 'A,1.0,10\\nB,2.0,5\\nC,1.5,12\\n' | " + bin_path() + " pareto");
    CHECK(r.code == 0);
    CHECK(r.out == "A,1,10\nC,1.5,12\n");
}

TEST_CASE("pareto reads a file and tolerates a header row") {
    auto path = temp_dir() / "points.csv";
    std::ofstream(path) << "label,latency,throughput\nA,1.0,10\nB,0.5,10\n";
    auto r = run_cli("pareto " + path.string());
    CHECK(r.code == 0);
    CHECK(r.out == "label,latency,throughput\nB,0.5,10\n");

    auto bad = temp_dir() / "bad.csv";
    std::ofstream(bad) << "A,1,10\nB,two,5\n";
    CHECK(run_cli("pareto " + bad.string()).code == kExitValidation);
}

TEST_CASE("worker exits 5 when nobody connects in time") {
    auto r = run_cli("worker --listen 127.0.0.1:0 --accept-timeout 0.2");
    CHECK(r.code == kExitTimeout);
    CHECK(r.out.find("LISTENING 127.0.0.1:") != std::string::npos);
}

TEST_CASE("orchestrate drives a worker pair and reports JSON") {
    LocalWorker w0(bin_path(), {});
    LocalWorker w1(bin_path(), {});
    auto out_path = temp_dir() / "run.json";
    auto r = run_cli("orchestrate --model " + toy_profile() + " --split 1 --workers " +
                     w0.address() + "," + w1.address() +
                     " --batches 2 --warmup 1 --devices cpu,cpu -o " + out_path.string());
    CHECK(r.code == 0);
    CHECK(w0.wait_exit(10.0).code == 0);
    CHECK(w1.wait_exit(10.0).code == 0);

    std::ifstream in(out_path);
    auto j = json::parse(in);
    CHECK(j["complete"] == true);
    CHECK(j["model"] == "synthetic");
    CHECK(j["split_label"] == "P1");
    CHECK(j["dispatched"] == 3);
    CHECK(j["returned"] == 3);
    CHECK(j["batches"].size() == 2);
    CHECK(j["mean_latency_s"].get<double>() > 0.0);
}

TEST_CASE("orchestrate fails fast against a dead address") {
    auto r = run_cli("orchestrate --model " + toy_profile() +
                     " --split 1 --workers 127.0.0.1:1,127.0.0.1:1 --connect-timeout 1");
    CHECK(r.code == kExitRuntime);
}

TEST_CASE("orchestrate validates stage arity") {
    auto r = run_cli("orchestrate --model " + toy_profile() +
                     " --split 1 --workers 127.0.0.1:1 --devices cpu,cpu,cpu");
    CHECK(r.code == kExitValidation);
}

TEST_CASE("sweep produces a table, CSV, and JSON report") {
    auto csv_path = temp_dir() / "sweep.csv";
    auto json_path = temp_dir() / "sweep.json";
    auto r = run_cli("sweep --model " + toy_profile() +
                     " --devices cpu,cpu --splits 1 --reps 1 --latency-batches 1 "
                     "--throughput-batches 2 --csv " +
                     csv_path.string() + " --json " + json_path.string());
    CHECK(r.code == 0);
    CHECK(r.out.find("P1") != std::string::npos);
    CHECK(r.out.find("ok") != std::string::npos);

    std::ifstream csv_in(csv_path);
    auto rows = load_report_csv(csv_in);
    REQUIRE(rows.size() == 1);
    CHECK(rows[0].record.split_label == "P1");
    CHECK(!rows[0].record.failed);
    CHECK(rows[0].pareto);  // only split measured, trivially optimal

    std::ifstream json_in(json_path);
    auto rep = load_report_json(json_in);
    REQUIRE(rep.records.size() == 1);
    CHECK(rep.lifecycle.all_batches_complete);
    CHECK(rep.lifecycle.all_workers_exited_clean);
}

TEST_CASE("report reformats and compares a saved sweep") {
    auto json_path = temp_dir() / "sweep.json";  // produced by the sweep test
    REQUIRE(fs::exists(json_path));

    auto table = run_cli("report " + json_path.string());
    CHECK(table.code == 0);
    CHECK(table.out.find("P1") != std::string::npos);

    auto csv = run_cli("report " + json_path.string() + " --format csv");
    CHECK(csv.code == 0);
    CHECK(csv.out.rfind("model,split,", 0) == 0);

    auto cmp = run_cli("report " + json_path.string() + " --compare " + toy_profile() +
                       " --devices cpu,cpu");
    CHECK(cmp.code == 0);
    CHECK(cmp.out.find("pred_lat_ms") != std::string::npos);
    CHECK(cmp.out.find("within 15%") != std::string::npos);

    CHECK(run_cli("report /nonexistent.json").code == kExitRuntime);
}

TEST_CASE("device files extend the built-in device table") {
    auto dev_path = temp_dir() / "devices.txt";
    std::ofstream(dev_path) << "device fast class=cpu scale=0.5\n";
    auto r = run_cli("plan --model " + toy_profile() + " --device-file " + dev_path.string() +
                     " --devices fast,cpu --json");
    CHECK(r.code == 0);
    auto j = json::parse(r.out);
    CHECK(j.size() == 2);
}

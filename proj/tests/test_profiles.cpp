#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <unistd.h>

#include "splitpipe/errors.hpp"
#include "splitpipe/profiles.hpp"

using namespace splitpipe;
namespace fs = std::filesystem;

namespace {

template <class F>
std::string thrown_message(F&& f) {
    try {
        f();
    } catch (const std::exception& e) {
        return e.what();
    }
    return "";
}

ModelProfile parse_text(const std::string& text, const std::string& name = "test.profile") {
    std::istringstream ss(text);
    return parse_model_profile(ss, name);
}

fs::path temp_dir() {
    static fs::path dir = [] {
        fs::path p = fs::temp_directory_path() /
                     ("splitpipe_profiles_" + std::to_string(::getpid()));
        fs::create_directories(p);
        return p;
    }();
    return dir;
}

const char* kGoodProfile =
    "# two-block toy\n"
    "model toy\n"
    "batch 4\n"
    "input_bytes 1024\n"
    "meta params=1000 size_mb=3.5 blocks=2\n"
    "block conv out=512 cpu=0.25 gpu=0.03\n"
    "block fc out=16 cpu=0.75 gpu=0.07   # tail\n";

}  // namespace

TEST_CASE("parses a complete profile") {
    auto p = parse_text(kGoodProfile);
    CHECK(p.name == "toy");
    CHECK(p.batch_size == 4);
    CHECK(p.input_bytes == 1024);
    REQUIRE(p.blocks.size() == 2);
    CHECK(p.blocks[0].name == "conv");
    CHECK(p.blocks[0].output_bytes == 512);
    CHECK(p.blocks[0].exec_time_s.at("cpu") == 0.25);
    CHECK(p.blocks[0].exec_time_s.at("gpu") == 0.03);
    CHECK(p.blocks[1].output_bytes == 16);
    REQUIRE(p.meta.has_value());
    CHECK(*p.meta->param_count == 1000);
    CHECK(*p.meta->size_mb == 3.5);
    CHECK(*p.meta->block_count == 2);
    CHECK(p.device_classes() == std::vector<std::string>{"cpu", "gpu"});
}

TEST_CASE("parse errors carry source name and line number") {
    CHECK(thrown_message([] { return parse_text("model a\nbogus x\n"); }).find("test.profile:2") !=
          std::string::npos);
    CHECK(thrown_message([] {
              return parse_text("block b out=1 cpu=1\n");
          }).find("'block' before 'model'") != std::string::npos);
    CHECK(thrown_message([] {
              return parse_text("model a\nbatch 1\ninput_bytes 1\nblock b cpu=1 gpu=2\n");
          }).find("missing out=") != std::string::npos);
    CHECK(thrown_message([] {
              return parse_text("model a\nbatch 1\ninput_bytes 1\nblock b out=1 out=2\n");
          }).find("no <class>=<seconds>") != std::string::npos);
    CHECK_THROWS_AS(parse_text("model a\nbatch 1\ninput_bytes 1\nblock b cpu=1\n"),
                    ParseError);
    CHECK(thrown_message([] { return parse_text("model a\nmodel b\n"); }).find("duplicate") !=
          std::string::npos);
    CHECK(thrown_message([] { return parse_text("batch 1\ninput_bytes 1\n"); })
              .find("missing 'model'") != std::string::npos);
    CHECK(thrown_message([] { return parse_text("model a\ninput_bytes 1\nblock b out=1 cpu=1\n"); })
              .find("missing 'batch'") != std::string::npos);
    CHECK(thrown_message([] { return parse_text("model a\nbatch 2\nblock b out=1 cpu=1\n"); })
              .find("missing 'input_bytes'") != std::string::npos);
    CHECK_THROWS_AS(parse_text("model a\nbatch x\n"), ParseError);
    CHECK_THROWS_AS(parse_text("model a\nbatch -3\n"), ParseError);
    CHECK_THROWS_AS(
        parse_text("model a\nbatch 1\ninput_bytes 1\nblock b out=1 cpu=oops\n"),
        ParseError);
}

TEST_CASE("validate rejects broken profiles") {
    auto base = parse_text(kGoodProfile);

    auto p = base;
    p.blocks[1].name = "conv";
    CHECK_THROWS_AS(p.validate(), ValidationError);

    p = base;
    p.blocks[0].exec_time_s["cpu"] = 0.0;
    CHECK_THROWS_AS(p.validate(), ValidationError);

    p = base;
    p.blocks[1].exec_time_s.erase("gpu");
    CHECK_THROWS_AS(p.validate(), ValidationError);

    p = base;
    p.blocks[1].exec_time_s["tpu"] = 1.0;
    CHECK_THROWS_AS(p.validate(), ValidationError);

    p = base;
    p.meta->block_count = 5;
    CHECK_THROWS_AS(p.validate(), ValidationError);

    p = base;
    p.blocks.clear();
    CHECK_THROWS_AS(p.validate(), ValidationError);
}

TEST_CASE("activation_bytes indexes the cut edge") {
    auto p = parse_text(kGoodProfile);
    CHECK(p.activation_bytes(1) == 512);
    CHECK_THROWS_AS(p.activation_bytes(0), ValidationError);
    CHECK_THROWS_AS(p.activation_bytes(2), ValidationError);
}

TEST_CASE("exec_on requires the class") {
    auto p = parse_text(kGoodProfile);
    CHECK(p.blocks[0].exec_on("cpu") == 0.25);
    CHECK_THROWS_AS(p.blocks[0].exec_on("tpu"), ValidationError);
}

TEST_CASE("write/parse round-trips random profiles exactly") {
    std::mt19937_64 rng(0x51f0cafeu);
    auto unif = [&](double lo, double hi) {
        return lo + (hi - lo) * (double)(rng() >> 11) / (double)(1ull << 53);
    };
    const std::vector<std::string> class_pool = {"cpu", "gpu", "npu"};

    for (int iter = 0; iter < 200; ++iter) {
        ModelProfile p;
        p.name = "m" + std::to_string(rng() % 100000);
        p.batch_size = 1 + (std::uint32_t)(rng() % 64);
        p.input_bytes = rng() % 100000000;

        std::vector<std::string> classes;
        std::uint64_t mask = 1 + rng() % 7;
        for (size_t c = 0; c < class_pool.size(); ++c)
            if (mask & (1ull << c)) classes.push_back(class_pool[c]);

        size_t n = 1 + rng() % 6;
        for (size_t i = 0; i < n; ++i) {
            BlockProfile b;
            b.name = "b" + std::to_string(i + 1);
            b.output_bytes = rng() % 1000000000;
            for (const auto& cls : classes) b.exec_time_s[cls] = unif(1e-6, 10.0);
            p.blocks.push_back(std::move(b));
        }
        if (rng() % 2) {
            ModelMeta meta;
            if (rng() % 2) meta.param_count = rng() % 1000000000;
            if (rng() % 2) meta.size_mb = unif(0.1, 600.0);
            if (rng() % 2) meta.block_count = n;
            p.meta = meta;
        }
        p.validate();

        std::ostringstream out;
        write_model_profile(p, out);
        auto q = parse_text(out.str(), "roundtrip");

        CHECK(q.name == p.name);
        CHECK(q.batch_size == p.batch_size);
        CHECK(q.input_bytes == p.input_bytes);
        CHECK(q.meta.has_value() == p.meta.has_value());
        if (p.meta) {
            CHECK(q.meta->param_count == p.meta->param_count);
            CHECK(q.meta->size_mb == p.meta->size_mb);
            CHECK(q.meta->block_count == p.meta->block_count);
        }
        REQUIRE(q.blocks.size() == p.blocks.size());
        for (size_t i = 0; i < n; ++i) {
            CHECK(q.blocks[i].name == p.blocks[i].name);
            CHECK(q.blocks[i].output_bytes == p.blocks[i].output_bytes);
            CHECK(q.blocks[i].exec_time_s == p.blocks[i].exec_time_s);
        }
    }
}

TEST_CASE("save/load round-trips through a file") {
    auto p = parse_text(kGoodProfile);
    auto path = temp_dir() / "toy.profile";
    save_model_profile(p, path);
    auto q = load_model_profile(path);
    CHECK(q.name == p.name);
    CHECK(q.blocks.size() == p.blocks.size());
    CHECK(q.blocks[1].exec_time_s == p.blocks[1].exec_time_s);
    CHECK_THROWS_AS(load_model_profile(temp_dir() / "absent.profile"), IoError);
}

TEST_CASE("synth uniform splits time evenly") {
    auto p = synth_profile(4, SynthShape::uniform, 1.0, 1.0);
    CHECK(p.name == "synthetic");
    CHECK(p.batch_size == 8);
    CHECK(p.input_bytes == 98304);
    REQUIRE(p.blocks.size() == 4);
    for (const auto& b : p.blocks) {
        CHECK(b.exec_on("cpu") == doctest::Approx(0.25).epsilon(1e-12));
        CHECK(b.output_bytes == 98304);  // decay 1.0 keeps activations flat
    }
}

TEST_CASE("synth front_heavy weights n..1 and decays activations") {
    SynthSpec spec;
    spec.n_blocks = 3;
    spec.shape = SynthShape::front_heavy;
    spec.total_time_s = 1.0;
    spec.activation_decay = 0.5;
    spec.input_bytes = 1024;
    auto p = synth_profile(spec);
    REQUIRE(p.blocks.size() == 3);
    CHECK(p.blocks[0].exec_on("cpu") == doctest::Approx(3.0 / 6.0));
    CHECK(p.blocks[1].exec_on("cpu") == doctest::Approx(2.0 / 6.0));
    CHECK(p.blocks[2].exec_on("cpu") == doctest::Approx(1.0 / 6.0));
    CHECK(p.blocks[0].output_bytes == 512);
    CHECK(p.blocks[1].output_bytes == 256);
    CHECK(p.blocks[2].output_bytes == 128);
}

TEST_CASE("synth back_heavy mirrors front_heavy") {
    auto f = synth_profile(5, SynthShape::front_heavy, 1.0, 0.5);
    auto b = synth_profile(5, SynthShape::back_heavy, 1.0, 0.5);
    for (size_t i = 0; i < 5; ++i)
        CHECK(f.blocks[i].exec_on("cpu") ==
              doctest::Approx(b.blocks[4 - i].exec_on("cpu")).epsilon(1e-12));
}

TEST_CASE("synth properties: total time, monotonicity, decay chain") {
    std::mt19937_64 rng(0xabcd01u);
    for (int iter = 0; iter < 100; ++iter) {
        SynthSpec spec;
        spec.n_blocks = 1 + (int)(rng() % 24);
        spec.shape = static_cast<SynthShape>(rng() % 3);
        spec.total_time_s = 0.01 + (double)(rng() % 1000) / 100.0;
        spec.activation_decay = 0.05 + (double)(rng() % 300) / 100.0;
        spec.input_bytes = rng() % 1000000;
        auto p = synth_profile(spec);
        p.validate();
        REQUIRE((int)p.blocks.size() == spec.n_blocks);

        double total = 0;
        for (const auto& b : p.blocks) total += b.exec_on("cpu");
        CHECK(total == doctest::Approx(spec.total_time_s).epsilon(1e-9));

        double out_f = (double)spec.input_bytes;
        for (const auto& b : p.blocks) {
            out_f *= spec.activation_decay;
            CHECK(b.output_bytes == (std::uint64_t)std::llround(out_f));
        }

        for (size_t i = 1; i < p.blocks.size(); ++i) {
            double prev = p.blocks[i - 1].exec_on("cpu");
            double cur = p.blocks[i].exec_on("cpu");
            if (spec.shape == SynthShape::front_heavy) CHECK(prev >= cur);
            if (spec.shape == SynthShape::back_heavy) CHECK(prev <= cur);
            if (spec.shape == SynthShape::uniform)
                CHECK(prev == doctest::Approx(cur).epsilon(1e-12));
        }
    }
}

TEST_CASE("synth rejects bad parameters") {
    CHECK_THROWS_AS(synth_profile(0, SynthShape::uniform, 1.0, 0.5), ValidationError);
    CHECK_THROWS_AS(synth_profile(4, SynthShape::uniform, 0.0, 0.5), ValidationError);
    CHECK_THROWS_AS(synth_profile(4, SynthShape::uniform, 1.0, -1.0), ValidationError);
}

TEST_CASE("parse_synth_shape accepts both spellings") {
    CHECK(parse_synth_shape("uniform") == SynthShape::uniform);
    CHECK(parse_synth_shape("front_heavy") == SynthShape::front_heavy);
    CHECK(parse_synth_shape("front-heavy") == SynthShape::front_heavy);
    CHECK(parse_synth_shape("back_heavy") == SynthShape::back_heavy);
    CHECK_THROWS_AS(parse_synth_shape("sideways"), ParseError);
    CHECK(synth_shape_name(SynthShape::back_heavy) == "back_heavy");
}

TEST_CASE("parse_device_spec") {
    auto d = parse_device_spec("gpu:0.02");
    CHECK(d.device_class == "gpu");
    CHECK(d.name == "gpu");
    CHECK(d.compute_scale == 0.02);
    auto d2 = parse_device_spec("cpu");
    CHECK(d2.device_class == "cpu");
    CHECK(d2.compute_scale == 1.0);
    CHECK_THROWS_AS(parse_device_spec(""), ParseError);
    CHECK_THROWS_AS(parse_device_spec("cpu:zero"), ParseError);
    CHECK_THROWS_AS(parse_device_spec("cpu:0"), ValidationError);
    CHECK_THROWS_AS(parse_device_spec(":0.5"), ValidationError);
}

TEST_CASE("parse_net_spec") {
    auto n = parse_net_spec("delay=100ms,bw=5Mbit,overhead=1ms");
    CHECK(n.one_way_delay_s == doctest::Approx(0.1));
    REQUIRE(n.bandwidth_bps.has_value());
    CHECK(*n.bandwidth_bps == doctest::Approx(5e6));
    CHECK(n.per_message_overhead_s == doctest::Approx(1e-3));
    CHECK(!n.is_unshaped());

    CHECK(parse_net_spec("").is_unshaped());
    CHECK(parse_net_spec("none").is_unshaped());
    auto d = parse_net_spec("bw=1Mbit");
    CHECK(d.one_way_delay_s == 0.0);
    CHECK(!d.is_unshaped());

    CHECK_THROWS_AS(parse_net_spec("latency=1ms"), ParseError);
    CHECK_THROWS_AS(parse_net_spec("delay=abc"), ParseError);
    CHECK_THROWS_AS(parse_net_spec("delay=-1s"), ValidationError);
    CHECK_THROWS_AS(parse_net_spec("bw=0"), ValidationError);
}

TEST_CASE("device and net files load with line-numbered errors") {
    auto dev_path = temp_dir() / "devices.txt";
    {
        std::ofstream out(dev_path);
        out << "# fleet\n"
            << "device edge class=cpu\n"
            << "device accel class=gpu scale=0.02\n";
    }
    auto devs = load_device_profiles(dev_path);
    REQUIRE(devs.size() == 2);
    CHECK(devs[0].name == "edge");
    CHECK(devs[0].device_class == "cpu");
    CHECK(devs[0].compute_scale == 1.0);
    CHECK(devs[1].name == "accel");
    CHECK(devs[1].compute_scale == 0.02);

    auto bad_dev = temp_dir() / "bad_devices.txt";
    {
        std::ofstream out(bad_dev);
        out << "device ok class=cpu\n"
            << "device broken speed=2\n";
    }
    CHECK(thrown_message([&] { return load_device_profiles(bad_dev); })
              .find("bad_devices.txt:2") != std::string::npos);

    auto net_path = temp_dir() / "nets.txt";
    {
        std::ofstream out(net_path);
        out << "net wifi delay=10ms bw=50Mbit\n"
            << "net lan\n";
    }
    auto nets = load_network_models(net_path);
    REQUIRE(nets.size() == 2);
    CHECK(nets.at("wifi").one_way_delay_s == doctest::Approx(0.01));
    CHECK(*nets.at("wifi").bandwidth_bps == doctest::Approx(50e6));
    CHECK(nets.at("lan").is_unshaped());

    CHECK_THROWS_AS(load_device_profiles(temp_dir() / "nope.txt"), IoError);
    CHECK_THROWS_AS(load_network_models(temp_dir() / "nope.txt"), IoError);
}

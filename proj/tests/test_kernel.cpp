#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "splitpipe/errors.hpp"
#include "splitpipe/kernel.hpp"
#include "splitpipe/netem.hpp"
#include "splitpipe/profiles.hpp"

using namespace splitpipe;

TEST_CASE("calibration produces a plausible chunk") {
    auto cal = calibrate_kernel();
    CHECK(cal.iters_per_chunk > 0);
    CHECK(cal.chunk_target_s == doctest::Approx(100e-6));
    CHECK(cal.measured_chunk_s > 0.0);
    // the measured chunk should be the right order of magnitude
    CHECK(cal.measured_chunk_s < 50 * cal.chunk_target_s);
}

TEST_CASE("busy_spin hits its wall deadline") {
    auto cal = calibrate_kernel();
    for (double target : {0.01, 0.05, 0.12}) {
        double elapsed = busy_spin(target, cal);
        CHECK(elapsed >= target);
        // overshoot is bounded by roughly one chunk plus scheduler noise
        CHECK(elapsed <= target + 0.05);
    }
}

TEST_CASE("busy_spin with non-positive target returns immediately") {
    auto cal = calibrate_kernel();
    double t0 = steady_now_s();
    CHECK(busy_spin(0.0, cal) == 0.0);
    CHECK(busy_spin(-1.0, cal) == 0.0);
    CHECK(steady_now_s() - t0 < 0.01);
}

TEST_CASE("kernel work feeds the sink") {
    auto cal = calibrate_kernel();
    auto before = kernel_sink();
    busy_spin(0.005, cal);
    auto after = kernel_sink();
    CHECK(after != before);
}

TEST_CASE("microprofile reproduces profiled block times") {
    auto m = synth_profile(3, SynthShape::front_heavy, 0.12, 0.5);
    DeviceProfile dev;
    dev.name = "cpu";
    dev.device_class = "cpu";
    dev.compute_scale = 1.0;

    auto means = microprofile_blocks(m, dev, 2);
    REQUIRE(means.size() == 3);
    for (std::size_t i = 0; i < means.size(); ++i) {
        double want = m.blocks[i].exec_on("cpu");
        CHECK(means[i] >= want * 0.9);
        CHECK(means[i] <= want * 1.3 + 0.01);
    }
}

TEST_CASE("microprofile honors the device scale") {
    auto m = synth_profile(2, SynthShape::uniform, 0.08, 0.5);
    DeviceProfile dev;
    dev.name = "half";
    dev.device_class = "cpu";
    dev.compute_scale = 0.5;
    auto means = microprofile_blocks(m, dev, 1);
    REQUIRE(means.size() == 2);
    for (double t : means) {
        CHECK(t >= 0.020 - 1e-3);
        CHECK(t <= 0.040);
    }
    CHECK_THROWS_AS(microprofile_blocks(m, dev, 0), ValidationError);
}

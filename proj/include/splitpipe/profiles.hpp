#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace splitpipe {

// One model block: a named unit of compute with measured execution time per
// device class and the size of the activation it hands to the next block.
struct BlockProfile {
    std::string name;
    std::map<std::string, double> exec_time_s;  // device class -> seconds
    std::uint64_t output_bytes = 0;

    // Throws ValidationError if the class is missing.
    double exec_on(const std::string& device_class) const;
};

struct ModelMeta {
    std::optional<std::uint64_t> param_count;
    std::optional<double> size_mb;
    std::optional<std::uint64_t> block_count;
};

struct ModelProfile {
    std::string name;
    std::uint32_t batch_size = 1;
    std::uint64_t input_bytes = 0;
    std::vector<BlockProfile> blocks;
    std::optional<ModelMeta> meta;

    // Device classes present on every block (intersection).
    std::vector<std::string> device_classes() const;

    // Bytes crossing the link when the model is cut after block `split`
    // (1-based split index; valid range 1..blocks.size()-1). Split p means
    // blocks [0, p) run on the first stage.
    std::uint64_t activation_bytes(std::size_t split) const;

    // Checks all profile invariants; throws ValidationError naming the
    // offending block/field.
    void validate() const;
};

struct DeviceProfile {
    std::string name;
    std::string device_class;
    double compute_scale = 1.0;  // execution time multiplier (lower = faster)

    void validate() const;
};

// Link model used by the planner and by the sender-side shaper config.
struct NetworkModel {
    double one_way_delay_s = 0.0;
    std::optional<double> bandwidth_bps;  // absent = unlimited
    double per_message_overhead_s = 0.0;

    bool is_unshaped() const {
        return one_way_delay_s == 0.0 && !bandwidth_bps && per_message_overhead_s == 0.0;
    }
    void validate() const;
};

// ---- text format ----------------------------------------------------------
//
// Model profile files (see README for the grammar):
//   model <name>
//   batch <n>
//   input_bytes <n>
//   meta params=<n> size_mb=<x> [blocks=<n>]
//   block <name> out=<bytes> <class>=<seconds> [<class>=<seconds> ...]
// '#' starts a comment; blank lines ignored. Floats round-trip exactly.

ModelProfile parse_model_profile(std::istream& in, const std::string& source_name);
ModelProfile load_model_profile(const std::filesystem::path& path);
void write_model_profile(const ModelProfile& profile, std::ostream& out);
void save_model_profile(const ModelProfile& profile, const std::filesystem::path& path);

// Device files: one `device <name> class=<c> [scale=<x>]` per line.
std::vector<DeviceProfile> load_device_profiles(const std::filesystem::path& path);

// Net files: one `net <name> [delay=<dur>] [bw=<rate>] [overhead=<dur>]` per line.
std::map<std::string, NetworkModel> load_network_models(const std::filesystem::path& path);

// Inline CLI specs.
// "<class>[:<scale>]", e.g. "pi", "gpu:0.02".
DeviceProfile parse_device_spec(std::string_view spec);
// "delay=100ms,bw=5Mbit,overhead=1ms" in any order; "none" or "" = unshaped.
NetworkModel parse_net_spec(std::string_view spec);

// ---- synthetic profiles ----------------------------------------------------

enum class SynthShape { uniform, front_heavy, back_heavy };

SynthShape parse_synth_shape(std::string_view text);
std::string_view synth_shape_name(SynthShape shape);

struct SynthSpec {
    int n_blocks = 8;
    SynthShape shape = SynthShape::uniform;
    double total_time_s = 1.0;
    double activation_decay = 0.5;
    std::uint64_t input_bytes = 98304;
    std::uint32_t batch_size = 8;
    std::string device_class = "cpu";
    std::string name = "synthetic";
};

// Deterministic generator. For block i (1-based): output_bytes =
// round(input_bytes * activation_decay^i); times sum to total_time_s;
// front_heavy is monotonically non-increasing, back_heavy the reverse.
ModelProfile synth_profile(const SynthSpec& spec);
ModelProfile synth_profile(int n_blocks, SynthShape shape, double total_time_s,
                           double activation_decay);

// Runs each block's synthetic kernel `repetitions` times on this host and
// returns the mean measured wall seconds per block (order matches
// profile.blocks). Used by `profile microbench`.
std::vector<double> microprofile_blocks(const ModelProfile& profile,
                                        const DeviceProfile& device, int repetitions);

}  // namespace splitpipe

#include "splitpipe/profiles.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "splitpipe/errors.hpp"
#include "splitpipe/kernel.hpp"
#include "splitpipe/units.hpp"

namespace splitpipe {

namespace {

// Shortest exact decimal form, so profiles round-trip bit-for-bit.
std::string fmt_double(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

std::vector<std::string> split_ws(const std::string& line) {
    std::vector<std::string> out;
    std::istringstream ss(line);
    std::string tok;
    while (ss >> tok) out.push_back(tok);
    return out;
}

// "key=value" -> {key, value}; throws with context otherwise.
std::pair<std::string, std::string> split_kv(const std::string& tok, const std::string& ctx) {
    auto eq = tok.find('=');
    if (eq == std::string::npos || eq == 0 || eq + 1 > tok.size())
        throw ParseError(ctx + ": expected key=value, got '" + tok + "'");
    return {tok.substr(0, eq), tok.substr(eq + 1)};
}

double parse_double(const std::string& text, const std::string& ctx) {
    try {
        size_t pos = 0;
        double v = std::stod(text, &pos);
        if (pos != text.size()) throw std::invalid_argument("trailing");
        return v;
    } catch (const std::exception&) {
        throw ParseError(ctx + ": bad number '" + text + "'");
    }
}

std::uint64_t parse_u64(const std::string& text, const std::string& ctx) {
    try {
        size_t pos = 0;
        long long v = std::stoll(text, &pos);
        if (pos != text.size() || v < 0) throw std::invalid_argument("range");
        return (std::uint64_t)v;
    } catch (const std::exception&) {
        throw ParseError(ctx + ": bad non-negative integer '" + text + "'");
    }
}

std::string strip_comment(const std::string& line) {
    auto hash = line.find('#');
    return hash == std::string::npos ? line : line.substr(0, hash);
}

}  // namespace

double BlockProfile::exec_on(const std::string& device_class) const {
    auto it = exec_time_s.find(device_class);
    if (it == exec_time_s.end())
        throw ValidationError("block '" + name + "' has no execution time for device class '" +
                              device_class + "'");
    return it->second;
}

std::vector<std::string> ModelProfile::device_classes() const {
    std::vector<std::string> out;
    if (blocks.empty()) return out;
    for (const auto& [cls, t] : blocks.front().exec_time_s) {
        (void)t;
        bool everywhere = true;
        for (const auto& b : blocks)
            if (!b.exec_time_s.count(cls)) everywhere = false;
        if (everywhere) out.push_back(cls);
    }
    return out;
}

std::uint64_t ModelProfile::activation_bytes(std::size_t split) const {
    if (split < 1 || split >= blocks.size())
        throw ValidationError("split index " + std::to_string(split) + " out of range for model '" +
                              name + "' with " + std::to_string(blocks.size()) + " blocks");
    return blocks[split - 1].output_bytes;
}

void ModelProfile::validate() const {
    if (name.empty()) throw ValidationError("model name is empty");
    if (batch_size < 1) throw ValidationError("model '" + name + "': batch must be >= 1");
    if (blocks.empty()) throw ValidationError("model '" + name + "' has no blocks");
    std::vector<std::string> seen;
    for (const auto& b : blocks) {
        if (b.name.empty()) throw ValidationError("model '" + name + "': block with empty name");
        if (std::find(seen.begin(), seen.end(), b.name) != seen.end())
            throw ValidationError("model '" + name + "': duplicate block name '" + b.name + "'");
        seen.push_back(b.name);
        if (b.exec_time_s.empty())
            throw ValidationError("block '" + b.name + "' has no execution times");
        for (const auto& [cls, t] : b.exec_time_s) {
            if (!(t > 0.0) || !std::isfinite(t))
                throw ValidationError("block '" + b.name + "': execution time for class '" + cls +
                                      "' must be positive and finite");
        }
    }
    // All blocks must expose the same device classes, or per-class planning
    // would silently fall through on some blocks.
    const auto& ref = blocks.front().exec_time_s;
    for (const auto& b : blocks) {
        for (const auto& [cls, t] : ref) {
            (void)t;
            if (!b.exec_time_s.count(cls))
                throw ValidationError("block '" + b.name + "' is missing device class '" + cls +
                                      "' present on block '" + blocks.front().name + "'");
        }
        for (const auto& [cls, t] : b.exec_time_s) {
            (void)t;
            if (!ref.count(cls))
                throw ValidationError("block '" + b.name + "' adds device class '" + cls +
                                      "' not present on block '" + blocks.front().name + "'");
        }
    }
    if (meta && meta->block_count && *meta->block_count != blocks.size())
        throw ValidationError("model '" + name + "': meta blocks=" +
                              std::to_string(*meta->block_count) + " but profile has " +
                              std::to_string(blocks.size()) + " blocks");
    if (meta && meta->size_mb && !(*meta->size_mb > 0))
        throw ValidationError("model '" + name + "': meta size_mb must be positive");
}

void DeviceProfile::validate() const {
    if (device_class.empty())
        throw ValidationError("device '" + name + "': class is empty");
    if (!(compute_scale > 0) || !std::isfinite(compute_scale))
        throw ValidationError("device '" + name + "': scale must be positive and finite");
}

void NetworkModel::validate() const {
    if (one_way_delay_s < 0 || !std::isfinite(one_way_delay_s))
        throw ValidationError("net: delay must be non-negative and finite");
    if (bandwidth_bps && (!(*bandwidth_bps > 0) || !std::isfinite(*bandwidth_bps)))
        throw ValidationError("net: bw must be positive and finite");
    if (per_message_overhead_s < 0 || !std::isfinite(per_message_overhead_s))
        throw ValidationError("net: overhead must be non-negative and finite");
}

ModelProfile parse_model_profile(std::istream& in, const std::string& source_name) {
    ModelProfile p;
    bool saw_model = false, saw_batch = false, saw_input = false;
    std::string raw;
    int lineno = 0;
    while (std::getline(in, raw)) {
        lineno++;
        std::string ctx = source_name + ":" + std::to_string(lineno);
        auto toks = split_ws(strip_comment(raw));
        if (toks.empty()) continue;
        const std::string& kw = toks[0];
        if (kw == "model") {
            if (toks.size() != 2) throw ParseError(ctx + ": expected 'model <name>'");
            if (saw_model) throw ParseError(ctx + ": duplicate 'model' line");
            p.name = toks[1];
            saw_model = true;
        } else if (kw == "batch") {
            if (toks.size() != 2) throw ParseError(ctx + ": expected 'batch <n>'");
            p.batch_size = (std::uint32_t)parse_u64(toks[1], ctx);
            saw_batch = true;
        } else if (kw == "input_bytes") {
            if (toks.size() != 2) throw ParseError(ctx + ": expected 'input_bytes <n>'");
            p.input_bytes = parse_u64(toks[1], ctx);
            saw_input = true;
        } else if (kw == "meta") {
            ModelMeta meta;
            for (size_t i = 1; i < toks.size(); i++) {
                auto [k, v] = split_kv(toks[i], ctx);
                if (k == "params")
                    meta.param_count = parse_u64(v, ctx);
                else if (k == "size_mb")
                    meta.size_mb = parse_double(v, ctx);
                else if (k == "blocks")
                    meta.block_count = parse_u64(v, ctx);
                else
                    throw ParseError(ctx + ": unknown meta field '" + k + "'");
            }
            p.meta = meta;
        } else if (kw == "block") {
            if (!saw_model) throw ParseError(ctx + ": 'block' before 'model'");
            if (toks.size() < 4)
                throw ParseError(ctx + ": expected 'block <name> out=<bytes> <class>=<s> ...'");
            BlockProfile b;
            b.name = toks[1];
            bool saw_out = false;
            for (size_t i = 2; i < toks.size(); i++) {
                auto [k, v] = split_kv(toks[i], ctx);
                if (k == "out") {
                    b.output_bytes = parse_u64(v, ctx);
                    saw_out = true;
                } else {
                    b.exec_time_s[k] = parse_double(v, ctx);
                }
            }
            if (!saw_out) throw ParseError(ctx + ": block '" + b.name + "' missing out=<bytes>");
            if (b.exec_time_s.empty())
                throw ParseError(ctx + ": block '" + b.name + "' has no <class>=<seconds> entries");
            p.blocks.push_back(std::move(b));
        } else {
            throw ParseError(ctx + ": unknown keyword '" + kw + "'");
        }
    }
    if (!saw_model) throw ParseError(source_name + ": missing 'model' line");
    if (!saw_batch) throw ParseError(source_name + ": missing 'batch' line");
    if (!saw_input) throw ParseError(source_name + ": missing 'input_bytes' line");
    p.validate();
    return p;
}

ModelProfile load_model_profile(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open profile '" + path.string() + "'");
    return parse_model_profile(in, path.filename().string());
}

void write_model_profile(const ModelProfile& profile, std::ostream& out) {
    out << "model " << profile.name << "\n";
    out << "batch " << profile.batch_size << "\n";
    out << "input_bytes " << profile.input_bytes << "\n";
    if (profile.meta) {
        out << "meta";
        if (profile.meta->param_count) out << " params=" << *profile.meta->param_count;
        if (profile.meta->size_mb) out << " size_mb=" << fmt_double(*profile.meta->size_mb);
        if (profile.meta->block_count) out << " blocks=" << *profile.meta->block_count;
        out << "\n";
    }
    for (const auto& b : profile.blocks) {
        out << "block " << b.name << " out=" << b.output_bytes;
        for (const auto& [cls, t] : b.exec_time_s) out << " " << cls << "=" << fmt_double(t);
        out << "\n";
    }
}

void save_model_profile(const ModelProfile& profile, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write profile '" + path.string() + "'");
    write_model_profile(profile, out);
    if (!out) throw IoError("error writing profile '" + path.string() + "'");
}

std::vector<DeviceProfile> load_device_profiles(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open device file '" + path.string() + "'");
    std::vector<DeviceProfile> out;
    std::string raw;
    int lineno = 0;
    while (std::getline(in, raw)) {
        lineno++;
        std::string ctx = path.filename().string() + ":" + std::to_string(lineno);
        auto toks = split_ws(strip_comment(raw));
        if (toks.empty()) continue;
        if (toks[0] != "device" || toks.size() < 3)
            throw ParseError(ctx + ": expected 'device <name> class=<c> [scale=<x>]'");
        DeviceProfile d;
        d.name = toks[1];
        for (size_t i = 2; i < toks.size(); i++) {
            auto [k, v] = split_kv(toks[i], ctx);
            if (k == "class")
                d.device_class = v;
            else if (k == "scale")
                d.compute_scale = parse_double(v, ctx);
            else
                throw ParseError(ctx + ": unknown device field '" + k + "'");
        }
        d.validate();
        out.push_back(std::move(d));
    }
    return out;
}

std::map<std::string, NetworkModel> load_network_models(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open net file '" + path.string() + "'");
    std::map<std::string, NetworkModel> out;
    std::string raw;
    int lineno = 0;
    while (std::getline(in, raw)) {
        lineno++;
        std::string ctx = path.filename().string() + ":" + std::to_string(lineno);
        auto toks = split_ws(strip_comment(raw));
        if (toks.empty()) continue;
        if (toks[0] != "net" || toks.size() < 2)
            throw ParseError(ctx + ": expected 'net <name> [delay=..] [bw=..] [overhead=..]'");
        NetworkModel n;
        for (size_t i = 2; i < toks.size(); i++) {
            auto [k, v] = split_kv(toks[i], ctx);
            if (k == "delay")
                n.one_way_delay_s = units::parse_duration(v);
            else if (k == "bw")
                n.bandwidth_bps = units::parse_rate(v);
            else if (k == "overhead")
                n.per_message_overhead_s = units::parse_duration(v);
            else
                throw ParseError(ctx + ": unknown net field '" + k + "'");
        }
        n.validate();
        out[toks[1]] = n;
    }
    return out;
}

DeviceProfile parse_device_spec(std::string_view spec) {
    if (spec.empty()) throw ParseError("empty device spec");
    DeviceProfile d;
    auto colon = spec.find(':');
    if (colon == std::string_view::npos) {
        d.device_class = std::string(spec);
    } else {
        d.device_class = std::string(spec.substr(0, colon));
        d.compute_scale = parse_double(std::string(spec.substr(colon + 1)), "device spec");
    }
    d.name = d.device_class;
    d.validate();
    return d;
}

NetworkModel parse_net_spec(std::string_view spec) {
    NetworkModel n;
    if (spec.empty() || spec == "none") return n;
    std::string s(spec);
    std::istringstream ss(s);
    std::string part;
    while (std::getline(ss, part, ',')) {
        if (part.empty()) continue;
        auto [k, v] = split_kv(part, "net spec");
        if (k == "delay")
            n.one_way_delay_s = units::parse_duration(v);
        else if (k == "bw")
            n.bandwidth_bps = units::parse_rate(v);
        else if (k == "overhead")
            n.per_message_overhead_s = units::parse_duration(v);
        else
            throw ParseError("net spec: unknown field '" + k + "'");
    }
    n.validate();
    return n;
}

SynthShape parse_synth_shape(std::string_view text) {
    if (text == "uniform") return SynthShape::uniform;
    if (text == "front_heavy" || text == "front-heavy") return SynthShape::front_heavy;
    if (text == "back_heavy" || text == "back-heavy") return SynthShape::back_heavy;
    throw ParseError("unknown shape '" + std::string(text) +
                     "' (expected uniform|front_heavy|back_heavy)");
}

std::string_view synth_shape_name(SynthShape shape) {
    switch (shape) {
        case SynthShape::uniform: return "uniform";
        case SynthShape::front_heavy: return "front_heavy";
        case SynthShape::back_heavy: return "back_heavy";
    }
    return "uniform";
}

ModelProfile synth_profile(const SynthSpec& spec) {
    if (spec.n_blocks < 1) throw ValidationError("synth: n_blocks must be >= 1");
    if (!(spec.total_time_s > 0)) throw ValidationError("synth: total_time must be positive");
    if (!(spec.activation_decay > 0) || !std::isfinite(spec.activation_decay))
        throw ValidationError("synth: activation_decay must be positive and finite");

    ModelProfile p;
    p.name = spec.name;
    p.batch_size = spec.batch_size;
    p.input_bytes = spec.input_bytes;

    int n = spec.n_blocks;
    std::vector<double> weights(n, 1.0);
    if (spec.shape == SynthShape::front_heavy)
        for (int i = 0; i < n; i++) weights[i] = (double)(n - i);
    else if (spec.shape == SynthShape::back_heavy)
        for (int i = 0; i < n; i++) weights[i] = (double)(i + 1);
    double total_w = 0;
    for (double w : weights) total_w += w;

    double out_f = (double)spec.input_bytes;
    for (int i = 0; i < n; i++) {
        BlockProfile b;
        b.name = "b" + std::to_string(i + 1);
        b.exec_time_s[spec.device_class] = spec.total_time_s * weights[i] / total_w;
        out_f *= spec.activation_decay;
        b.output_bytes = (std::uint64_t)std::llround(out_f);
        p.blocks.push_back(std::move(b));
    }
    p.validate();
    return p;
}

ModelProfile synth_profile(int n_blocks, SynthShape shape, double total_time_s,
                           double activation_decay) {
    SynthSpec spec;
    spec.n_blocks = n_blocks;
    spec.shape = shape;
    spec.total_time_s = total_time_s;
    spec.activation_decay = activation_decay;
    return synth_profile(spec);
}

std::vector<double> microprofile_blocks(const ModelProfile& profile, const DeviceProfile& device,
                                        int repetitions) {
    if (repetitions < 1) throw ValidationError("microbench: repetitions must be >= 1");
    profile.validate();
    device.validate();
    KernelCalibration cal = calibrate_kernel();
    std::vector<double> means;
    means.reserve(profile.blocks.size());
    for (const auto& b : profile.blocks) {
        double target = device.compute_scale * b.exec_on(device.device_class);
        double sum = 0;
        for (int r = 0; r < repetitions; r++) sum += busy_spin(target, cal);
        means.push_back(sum / repetitions);
    }
    return means;
}

}  // namespace splitpipe

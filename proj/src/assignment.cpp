#include <sys/resource.h>

#include <json.hpp>

#include "splitpipe/errors.hpp"
#include "splitpipe/runtime.hpp"

namespace splitpipe {

using nlohmann::json;

namespace {

json shaping_to_json(const ShapingConfig& cfg) {
    json j;
    j["delay_s"] = cfg.one_way_delay_s;
    j["bw_bps"] = cfg.bandwidth_bps ? json(*cfg.bandwidth_bps) : json(nullptr);
    j["overhead_s"] = cfg.per_message_overhead_s;
    j["bucket_bytes"] = cfg.bucket_depth_bytes;
    return j;
}

ShapingConfig shaping_from_json(const json& j) {
    ShapingConfig cfg;
    cfg.one_way_delay_s = j.at("delay_s").get<double>();
    if (!j.at("bw_bps").is_null()) cfg.bandwidth_bps = j.at("bw_bps").get<double>();
    cfg.per_message_overhead_s = j.at("overhead_s").get<double>();
    cfg.bucket_depth_bytes = j.at("bucket_bytes").get<std::uint64_t>();
    cfg.validate();
    return cfg;
}

}  // namespace

std::string StageAssignment::to_json() const {
    json blocks_j = json::array();
    for (const auto& b : blocks)
        blocks_j.push_back({{"name", b.name}, {"exec_s", b.exec_s}, {"out_bytes", b.out_bytes}});
    json j = {
        {"model", model_name},
        {"stage", stage_index},
        {"first_block", first_block},
        {"last_block", last_block},
        {"blocks", blocks_j},
        {"device",
         {{"name", device.name}, {"class", device.device_class}, {"scale", device.compute_scale}}},
        {"next_hop", next_hop},
        {"window", window},
        {"backend", backend_name(backend)},
        {"batch_size", batch_size},
        {"seed", seed},
        {"shaping", shaping ? shaping_to_json(*shaping) : json(nullptr)},
        {"reverse_shaping", reverse_shaping ? shaping_to_json(*reverse_shaping) : json(nullptr)},
        {"io_timeout_s", io_timeout_s},
    };
    return j.dump();
}

StageAssignment StageAssignment::from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ProtocolError(std::string("ASSIGN payload is not valid JSON: ") + e.what());
    }
    try {
        StageAssignment a;
        a.model_name = j.at("model").get<std::string>();
        a.stage_index = j.at("stage").get<std::uint32_t>();
        a.first_block = j.at("first_block").get<std::uint32_t>();
        a.last_block = j.at("last_block").get<std::uint32_t>();
        for (const auto& bj : j.at("blocks")) {
            ResolvedBlock b;
            b.name = bj.at("name").get<std::string>();
            b.exec_s = bj.at("exec_s").get<double>();
            b.out_bytes = bj.at("out_bytes").get<std::uint64_t>();
            a.blocks.push_back(std::move(b));
        }
        a.device.name = j.at("device").at("name").get<std::string>();
        a.device.device_class = j.at("device").at("class").get<std::string>();
        a.device.compute_scale = j.at("device").at("scale").get<double>();
        a.next_hop = j.at("next_hop").get<std::string>();
        a.window = j.at("window").get<std::uint32_t>();
        a.backend = parse_backend(j.at("backend").get<std::string>());
        a.batch_size = j.at("batch_size").get<std::uint32_t>();
        a.seed = j.at("seed").get<std::uint64_t>();
        if (!j.at("shaping").is_null()) a.shaping = shaping_from_json(j.at("shaping"));
        if (!j.at("reverse_shaping").is_null())
            a.reverse_shaping = shaping_from_json(j.at("reverse_shaping"));
        a.io_timeout_s = j.at("io_timeout_s").get<double>();
        if (a.blocks.empty()) throw ProtocolError("ASSIGN has no blocks");
        if (a.last_block < a.first_block) throw ProtocolError("ASSIGN block range is inverted");
        return a;
    } catch (const json::exception& e) {
        throw ProtocolError(std::string("ASSIGN payload missing field: ") + e.what());
    }
}

std::string append_stage_report(const std::string& report_json, const StageReport& entry) {
    json arr;
    try {
        arr = json::parse(report_json.empty() ? "[]" : report_json);
    } catch (const json::exception& e) {
        throw ProtocolError(std::string("timing report is not valid JSON: ") + e.what());
    }
    if (!arr.is_array()) throw ProtocolError("timing report is not a JSON array");
    arr.push_back({{"stage", entry.stage},
                   {"exec_s", entry.exec_s},
                   {"ser_s", entry.ser_s},
                   {"delay_s", entry.delay_s}});
    return arr.dump();
}

std::vector<StageReport> parse_stage_reports(const std::string& report_json) {
    json arr;
    try {
        arr = json::parse(report_json.empty() ? "[]" : report_json);
    } catch (const json::exception& e) {
        throw ProtocolError(std::string("timing report is not valid JSON: ") + e.what());
    }
    std::vector<StageReport> out;
    for (const auto& e : arr) {
        StageReport r;
        r.stage = e.at("stage").get<std::uint32_t>();
        r.exec_s = e.at("exec_s").get<double>();
        r.ser_s = e.at("ser_s").get<double>();
        r.delay_s = e.at("delay_s").get<double>();
        out.push_back(r);
    }
    return out;
}

std::string append_stage_resources(const std::string& json_text, const StageResources& entry) {
    json arr;
    try {
        arr = json::parse(json_text.empty() ? "[]" : json_text);
    } catch (const json::exception& e) {
        throw ProtocolError(std::string("resource report is not valid JSON: ") + e.what());
    }
    if (!arr.is_array()) throw ProtocolError("resource report is not a JSON array");
    arr.push_back({{"stage", entry.stage},
                   {"cpu_s", entry.cpu_s},
                   {"max_rss_bytes", entry.max_rss_bytes}});
    return arr.dump();
}

std::vector<StageResources> parse_stage_resources(const std::string& json_text) {
    json arr;
    try {
        arr = json::parse(json_text.empty() ? "[]" : json_text);
    } catch (const json::exception& e) {
        throw ProtocolError(std::string("resource report is not valid JSON: ") + e.what());
    }
    std::vector<StageResources> out;
    for (const auto& e : arr) {
        StageResources r;
        r.stage = e.at("stage").get<std::uint32_t>();
        r.cpu_s = e.at("cpu_s").get<double>();
        r.max_rss_bytes = e.at("max_rss_bytes").get<std::uint64_t>();
        out.push_back(r);
    }
    return out;
}

StageResources sample_own_resources(std::uint32_t stage) {
    StageResources r;
    r.stage = stage;
    rusage u{};
    if (getrusage(RUSAGE_SELF, &u) == 0) {
        r.cpu_s = (double)u.ru_utime.tv_sec + u.ru_utime.tv_usec * 1e-6 +
                  (double)u.ru_stime.tv_sec + u.ru_stime.tv_usec * 1e-6;
        r.max_rss_bytes = (std::uint64_t)u.ru_maxrss * 1024;  // ru_maxrss is KiB on Linux
    }
    return r;
}

}  // namespace splitpipe

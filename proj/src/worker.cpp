#include <algorithm>
#include <csignal>
#include <ostream>

#include <json.hpp>

#include "splitpipe/checksum.hpp"
#include "splitpipe/errors.hpp"
#include "splitpipe/kernel.hpp"
#include "splitpipe/log.hpp"
#include "splitpipe/runtime.hpp"

namespace splitpipe {

using nlohmann::json;

namespace {

std::string error_payload(std::uint32_t stage, const std::string& message) {
    return json{{"stage", stage}, {"message", message}}.dump();
}

Frame make_error(std::uint32_t stage, const std::string& message) {
    Frame f{MsgType::error, 0, {}};
    std::string text = error_payload(stage, message);
    f.payload.assign(text.begin(), text.end());
    return f;
}

std::string payload_text(const Frame& f) {
    return std::string((const char*)f.payload.data(), f.payload.size());
}

// Serves one connection end to end. Throws on failure after best-effort
// ERROR relay upstream.
void serve_one(Listener& listener, const WorkerOptions& options,
               const KernelCalibration& cal) {
    Socket up_sock = listener.accept_conn(options.accept_timeout_s);
    Channel up(std::move(up_sock), BackendMode::framed);

    auto hf = up.recv(60.0);
    if (!hf) throw ProtocolError("connection closed before HELLO");
    if (hf->type != MsgType::hello)
        throw ProtocolError(std::string("expected HELLO, got ") + msg_type_name(hf->type));
    json hello;
    try {
        hello = json::parse(payload_text(*hf));
    } catch (const json::exception& e) {
        throw ProtocolError(std::string("HELLO payload is not valid JSON: ") + e.what());
    }
    up.set_mode(parse_backend(hello.at("backend").get<std::string>()));

    auto af = up.recv(60.0);
    if (!af) throw ProtocolError("connection closed before ASSIGN");
    if (af->type != MsgType::assign)
        throw ProtocolError(std::string("expected ASSIGN, got ") + msg_type_name(af->type));
    StageAssignment a = StageAssignment::from_json(payload_text(*af));
    up.set_mode(a.backend);
    if (a.reverse_shaping) up.set_out_shaping(*a.reverse_shaping);

    SPLITPIPE_LOG_INFO("worker stage %u: %zu blocks, next hop %s, backend %s", a.stage_index,
                       a.blocks.size(), a.next_hop.c_str(), backend_name(a.backend));

    double exec_target = 0;
    for (const auto& b : a.blocks) exec_target += b.exec_s;
    exec_target *= a.device.compute_scale;
    std::uint64_t out_bytes = a.blocks.back().out_bytes;

    bool to_result = a.next_hop.rfind("result:", 0) == 0;
    std::string hop = to_result ? a.next_hop.substr(7) : a.next_hop;

    Channel down = [&] {
        try {
            auto [host, port] = parse_hostport(hop);
            Socket down_sock =
                Socket::connect_to(host, port, std::min(a.io_timeout_s, 10.0));
            return Channel(std::move(down_sock), a.backend,
                           a.shaping ? *a.shaping : ShapingConfig{});
        } catch (const std::exception& e) {
            try {
                up.send_control(make_error(a.stage_index,
                                           std::string("cannot reach next hop: ") + e.what()));
                up.flush();
            } catch (...) {
            }
            throw;
        }
    }();

    Frame hello_down{MsgType::hello, 0, {}};
    std::string hello_text = json{{"role", "worker"},
                                  {"stage", a.stage_index},
                                  {"backend", backend_name(a.backend)},
                                  {"seed", a.seed}}
                                 .dump();
    hello_down.payload.assign(hello_text.begin(), hello_text.end());
    down.send_control(hello_down);

    auto [nominal_ser, nominal_delay] =
        nominal_shaping_cost(a.shaping ? *a.shaping : ShapingConfig{}, out_bytes);

    try {
        for (;;) {
            int mask = wait_readable_pair(up.socket().fd(), down.socket().fd(), a.io_timeout_s);
            if (mask == 0)
                throw TimeoutError("stage " + std::to_string(a.stage_index) + " idle for " +
                                   std::to_string(a.io_timeout_s) + " s");
            if (mask & 2) {
                auto df = down.recv(1.0);
                if (!df)
                    throw IoError("downstream closed the connection");
                if (df->type == MsgType::error) {
                    up.send_control(*df);  // relay toward the orchestrator
                    up.flush();
                    throw IoError("downstream stage reported: " + payload_text(*df));
                }
                throw ProtocolError(std::string("unexpected ") + msg_type_name(df->type) +
                                    " from downstream");
            }
            if (!(mask & 1)) continue;

            auto f = up.recv(a.io_timeout_s);
            if (!f) throw IoError("upstream closed the connection without SHUTDOWN");
            switch (f->type) {
                case MsgType::assign:
                    down.send_control(*f);
                    break;
                case MsgType::batch:
                case MsgType::activation: {
                    PayloadMsg in = decode_payload_msg(f->payload);
                    if (in.dest_stage != a.stage_index)
                        throw ProtocolError("batch " + std::to_string(in.batch_id) +
                                            " addressed to stage " +
                                            std::to_string(in.dest_stage) + ", this is stage " +
                                            std::to_string(a.stage_index));
                    double exec = busy_spin(exec_target, cal);

                    PayloadMsg out;
                    out.batch_id = in.batch_id;
                    out.dest_stage = to_result ? kDestOrchestrator : a.stage_index + 1;
                    out.report_json = append_stage_report(
                        in.report_json, {a.stage_index, exec, nominal_ser, nominal_delay});
                    out.body.resize(out_bytes);
                    fill_payload(out.body, payload_seed(a.seed, in.batch_id, a.stage_index + 1));

                    Frame of{to_result ? MsgType::result : MsgType::activation, 0,
                             encode_payload_msg(out)};
                    down.send_payload(std::move(of), a.io_timeout_s);
                    break;
                }
                case MsgType::shutdown: {
                    std::string resources = payload_text(*f);
                    Frame sf{MsgType::shutdown, 0, {}};
                    std::string updated = append_stage_resources(
                        resources, sample_own_resources(a.stage_index));
                    sf.payload.assign(updated.begin(), updated.end());
                    down.send_control(sf);
                    down.flush();
                    down.close();
                    up.close();
                    SPLITPIPE_LOG_INFO("worker stage %u: shutdown complete", a.stage_index);
                    return;
                }
                default:
                    throw ProtocolError(std::string("unexpected ") + msg_type_name(f->type) +
                                        " from upstream");
            }
        }
    } catch (const std::exception& e) {
        try {
            up.send_control(make_error(a.stage_index, e.what()));
            up.flush();
        } catch (...) {
        }
        throw;
    }
}

}  // namespace

int run_worker(const WorkerOptions& options) {
    std::signal(SIGPIPE, SIG_IGN);
    Listener listener = Listener::bind_to(options.listen_host, options.port);
    if (options.announce) {
        *options.announce << "LISTENING " << options.listen_host << ":" << listener.port()
                          << std::endl;
    }
    KernelCalibration cal = calibrate_kernel();
    SPLITPIPE_LOG_DEBUG("worker kernel: %llu iters/chunk",
                        (unsigned long long)cal.iters_per_chunk);

    for (int i = 0; i < options.serve_count; i++) {
        try {
            serve_one(listener, options, cal);
        } catch (const TimeoutError& e) {
            SPLITPIPE_LOG_ERROR("worker: %s", e.what());
            return kExitTimeout;
        } catch (const std::exception& e) {
            SPLITPIPE_LOG_ERROR("worker: %s", e.what());
            return kExitRuntime;
        }
    }
    return kExitOk;
}

}  // namespace splitpipe

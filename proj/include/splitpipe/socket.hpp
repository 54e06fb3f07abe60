#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <utility>

#include "splitpipe/frame.hpp"

namespace splitpipe {

// Thin RAII wrapper over a connected TCP socket. All methods throw IoError on
// failure; reads return 0 at end of stream.
class Socket {
  public:
    Socket() = default;
    explicit Socket(int fd) : fd_(fd) {}
    Socket(Socket&& other) noexcept : fd_(other.fd_) { other.fd_ = -1; }
    Socket& operator=(Socket&& other) noexcept;
    Socket(const Socket&) = delete;
    Socket& operator=(const Socket&) = delete;
    ~Socket();

    // Connects with a deadline. Refused and timed-out connects both throw
    // IoError (the caller treats connection setup failures uniformly).
    static Socket connect_to(const std::string& host, std::uint16_t port, double timeout_s);

    std::size_t read_some(std::uint8_t* buf, std::size_t len);
    void write_all(const std::uint8_t* buf, std::size_t len);
    // True when readable (or closed); false on timeout. timeout_s < 0 waits
    // forever.
    bool wait_readable(double timeout_s) const;

    void tune();  // TCP_NODELAY + 1 MiB buffers
    void shutdown_write();
    // Unblocks any thread parked in read/poll on this socket without
    // invalidating the descriptor.
    void shutdown_both();
    void close();
    bool valid() const { return fd_ >= 0; }
    int fd() const { return fd_; }

  private:
    int fd_ = -1;
};

class Listener {
  public:
    Listener() = default;
    Listener(Listener&& other) noexcept : fd_(other.fd_), port_(other.port_) { other.fd_ = -1; }
    Listener(const Listener&) = delete;
    Listener& operator=(const Listener&) = delete;
    ~Listener();

    // port 0 picks an ephemeral port (read it back via port()).
    static Listener bind_to(const std::string& host, std::uint16_t port);

    // Throws TimeoutError when nothing arrives in time. timeout_s < 0 waits
    // forever.
    Socket accept_conn(double timeout_s);
    bool wait_pending(double timeout_s) const;

    std::uint16_t port() const { return port_; }
    int fd() const { return fd_; }

  private:
    int fd_ = -1;
    std::uint16_t port_ = 0;
};

// "host:port" (host may be empty = loopback).
std::pair<std::string, std::uint16_t> parse_hostport(std::string_view text);

// ByteSource over a socket with an absolute steady-clock deadline; a read
// that cannot complete by then throws TimeoutError. deadline_s < 0 = none.
struct SocketSource final : ByteSource {
    Socket& sock;
    double deadline_s;
    SocketSource(Socket& s, double deadline) : sock(s), deadline_s(deadline) {}
    std::size_t read(std::uint8_t* buf, std::size_t len) override;
};

// Waits for either fd to become readable. Returns bit 0 set for a, bit 1 set
// for b; 0 on timeout. Negative fds are skipped.
int wait_readable_pair(int fd_a, int fd_b, double timeout_s);

}  // namespace splitpipe

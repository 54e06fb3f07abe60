#include "splitpipe/socket.hpp"

#include <arpa/inet.h>
#include <fcntl.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>

#include "splitpipe/errors.hpp"
#include "splitpipe/netem.hpp"

namespace splitpipe {

namespace {

std::string errno_str(const char* what) {
    return std::string(what) + ": " + std::strerror(errno);
}

sockaddr_in resolve(const std::string& host, std::uint16_t port) {
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(port);
    std::string h = host.empty() ? "127.0.0.1" : host;
    if (h == "localhost") h = "127.0.0.1";
    if (inet_pton(AF_INET, h.c_str(), &addr.sin_addr) == 1) return addr;
    addrinfo hints{};
    hints.ai_family = AF_INET;
    hints.ai_socktype = SOCK_STREAM;
    addrinfo* res = nullptr;
    int rc = getaddrinfo(h.c_str(), nullptr, &hints, &res);
    if (rc != 0 || !res) throw IoError("cannot resolve host '" + h + "'");
    addr.sin_addr = ((sockaddr_in*)res->ai_addr)->sin_addr;
    freeaddrinfo(res);
    return addr;
}

int poll_one(int fd, short events, double timeout_s) {
    pollfd p{fd, events, 0};
    int timeout_ms = timeout_s < 0 ? -1 : (int)(timeout_s * 1000.0 + 0.999);
    for (;;) {
        int rc = ::poll(&p, 1, timeout_ms);
        if (rc >= 0) return rc;
        if (errno != EINTR) throw IoError(errno_str("poll"));
    }
}

}  // namespace

Socket& Socket::operator=(Socket&& other) noexcept {
    if (this != &other) {
        close();
        fd_ = other.fd_;
        other.fd_ = -1;
    }
    return *this;
}

Socket::~Socket() { close(); }

void Socket::close() {
    if (fd_ >= 0) {
        ::close(fd_);
        fd_ = -1;
    }
}

void Socket::shutdown_write() {
    if (fd_ >= 0) ::shutdown(fd_, SHUT_WR);
}

void Socket::shutdown_both() {
    if (fd_ >= 0) ::shutdown(fd_, SHUT_RDWR);
}

void Socket::tune() {
    int one = 1;
    ::setsockopt(fd_, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
    int buf = 1 << 20;
    ::setsockopt(fd_, SOL_SOCKET, SO_SNDBUF, &buf, sizeof buf);
    ::setsockopt(fd_, SOL_SOCKET, SO_RCVBUF, &buf, sizeof buf);
}

Socket Socket::connect_to(const std::string& host, std::uint16_t port, double timeout_s) {
    sockaddr_in addr = resolve(host, port);
    int fd = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd < 0) throw IoError(errno_str("socket"));
    Socket sock(fd);

    int flags = ::fcntl(fd, F_GETFL, 0);
    ::fcntl(fd, F_SETFL, flags | O_NONBLOCK);
    int rc = ::connect(fd, (sockaddr*)&addr, sizeof addr);
    if (rc < 0 && errno != EINPROGRESS) throw IoError(errno_str("connect"));
    if (rc < 0) {
        if (poll_one(fd, POLLOUT, timeout_s) == 0)
            throw IoError("connect to " + host + ":" + std::to_string(port) + " timed out after " +
                          std::to_string(timeout_s) + " s");
        int err = 0;
        socklen_t len = sizeof err;
        ::getsockopt(fd, SOL_SOCKET, SO_ERROR, &err, &len);
        if (err != 0)
            throw IoError("connect to " + host + ":" + std::to_string(port) + ": " +
                          std::strerror(err));
    }
    ::fcntl(fd, F_SETFL, flags);
    sock.tune();
    return sock;
}

std::size_t Socket::read_some(std::uint8_t* buf, std::size_t len) {
    for (;;) {
        ssize_t n = ::recv(fd_, buf, len, 0);
        if (n >= 0) return (std::size_t)n;
        if (errno != EINTR) throw IoError(errno_str("recv"));
    }
}

void Socket::write_all(const std::uint8_t* buf, std::size_t len) {
    std::size_t sent = 0;
    while (sent < len) {
        ssize_t n = ::send(fd_, buf + sent, len - sent, MSG_NOSIGNAL);
        if (n < 0) {
            if (errno == EINTR) continue;
            throw IoError(errno_str("send"));
        }
        sent += (std::size_t)n;
    }
}

bool Socket::wait_readable(double timeout_s) const {
    return poll_one(fd_, POLLIN, timeout_s) > 0;
}

Listener::~Listener() {
    if (fd_ >= 0) ::close(fd_);
}

Listener Listener::bind_to(const std::string& host, std::uint16_t port) {
    sockaddr_in addr = resolve(host, port);
    int fd = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd < 0) throw IoError(errno_str("socket"));
    Listener lis;
    lis.fd_ = fd;
    int one = 1;
    ::setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
    if (::bind(fd, (sockaddr*)&addr, sizeof addr) < 0) throw IoError(errno_str("bind"));
    if (::listen(fd, 16) < 0) throw IoError(errno_str("listen"));
    sockaddr_in got{};
    socklen_t len = sizeof got;
    ::getsockname(fd, (sockaddr*)&got, &len);
    lis.port_ = ntohs(got.sin_port);
    return lis;
}

bool Listener::wait_pending(double timeout_s) const {
    return poll_one(fd_, POLLIN, timeout_s) > 0;
}

Socket Listener::accept_conn(double timeout_s) {
    if (poll_one(fd_, POLLIN, timeout_s) == 0)
        throw TimeoutError("accept timed out after " + std::to_string(timeout_s) + " s");
    int fd = ::accept(fd_, nullptr, nullptr);
    if (fd < 0) throw IoError(errno_str("accept"));
    Socket sock(fd);
    sock.tune();
    return sock;
}

std::pair<std::string, std::uint16_t> parse_hostport(std::string_view text) {
    auto colon = text.rfind(':');
    if (colon == std::string_view::npos)
        throw ParseError("expected host:port, got '" + std::string(text) + "'");
    std::string host(text.substr(0, colon));
    std::string port_str(text.substr(colon + 1));
    try {
        size_t pos = 0;
        unsigned long port = std::stoul(port_str, &pos);
        if (pos != port_str.size() || port > 65535) throw std::invalid_argument("range");
        return {host, (std::uint16_t)port};
    } catch (const std::exception&) {
        throw ParseError("bad port in '" + std::string(text) + "'");
    }
}

std::size_t SocketSource::read(std::uint8_t* buf, std::size_t len) {
    if (deadline_s >= 0) {
        double remaining = deadline_s - steady_now_s();
        if (remaining < 0) remaining = 0;
        if (!sock.wait_readable(remaining))
            throw TimeoutError("read timed out");
    }
    return sock.read_some(buf, len);
}

int wait_readable_pair(int fd_a, int fd_b, double timeout_s) {
    pollfd p[2];
    nfds_t n = 0;
    int idx_a = -1, idx_b = -1;
    if (fd_a >= 0) {
        idx_a = (int)n;
        p[n++] = {fd_a, POLLIN, 0};
    }
    if (fd_b >= 0) {
        idx_b = (int)n;
        p[n++] = {fd_b, POLLIN, 0};
    }
    if (n == 0) return 0;
    int timeout_ms = timeout_s < 0 ? -1 : (int)(timeout_s * 1000.0 + 0.999);
    int rc;
    for (;;) {
        rc = ::poll(p, n, timeout_ms);
        if (rc >= 0) break;
        if (errno != EINTR) throw IoError(errno_str("poll"));
    }
    if (rc == 0) return 0;
    int mask = 0;
    if (idx_a >= 0 && (p[idx_a].revents & (POLLIN | POLLHUP | POLLERR))) mask |= 1;
    if (idx_b >= 0 && (p[idx_b].revents & (POLLIN | POLLHUP | POLLERR))) mask |= 2;
    return mask;
}

}  // namespace splitpipe

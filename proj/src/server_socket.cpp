#include <sys/socket.h>
#include <sys/un.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <optional>
#include <string>

#include "cosmos/errors.hpp"
#include "cosmos/server.hpp"

namespace cosmos::server {

namespace {

[[noreturn]] void socket_error(const std::string& what) {
    throw DomainError(what + ": " + std::strerror(errno));
}

struct Fd {
    int fd = -1;
    explicit Fd(int f) : fd(f) {}
    ~Fd() {
        if (fd >= 0) ::close(fd);
    }
    Fd(const Fd&) = delete;
    Fd& operator=(const Fd&) = delete;
    operator int() const { return fd; }
};

// False on end of stream before any progress was required.
bool read_exact(int fd, char* buf, std::size_t n) {
    while (n > 0) {
        ssize_t r = ::read(fd, buf, n);
        if (r == 0) return false;
        if (r < 0) {
            if (errno == EINTR) continue;
            socket_error("read");
        }
        buf += r;
        n -= static_cast<std::size_t>(r);
    }
    return true;
}

void write_all(int fd, const char* buf, std::size_t n) {
    while (n > 0) {
        ssize_t w = ::send(fd, buf, n, MSG_NOSIGNAL);
        if (w < 0) {
            if (errno == EINTR) continue;
            socket_error("write");
        }
        buf += w;
        n -= static_cast<std::size_t>(w);
    }
}

void write_frame(int fd, std::string_view body) {
    const std::size_t n = body.size();
    unsigned char header[4] = {static_cast<unsigned char>((n >> 24) & 0xff),
                               static_cast<unsigned char>((n >> 16) & 0xff),
                               static_cast<unsigned char>((n >> 8) & 0xff),
                               static_cast<unsigned char>(n & 0xff)};
    write_all(fd, reinterpret_cast<const char*>(header), sizeof header);
    write_all(fd, body.data(), body.size());
}

// nullopt on a clean close before a frame started.
std::optional<std::string> read_frame(int fd) {
    char header[4];
    if (!read_exact(fd, header, sizeof header)) return std::nullopt;
    const std::size_t n = (static_cast<std::size_t>(static_cast<unsigned char>(header[0])) << 24) |
                          (static_cast<std::size_t>(static_cast<unsigned char>(header[1])) << 16) |
                          (static_cast<std::size_t>(static_cast<unsigned char>(header[2])) << 8) |
                          static_cast<std::size_t>(static_cast<unsigned char>(header[3]));
    if (n > kMaxFrameBytes) throw DomainError("frame length exceeds the limit");
    std::string body(n, '\0');
    if (n > 0 && !read_exact(fd, body.data(), n)) throw DomainError("truncated frame");
    return body;
}

sockaddr_un make_address(const std::string& socket_path) {
    sockaddr_un addr{};
    if (socket_path.empty() || socket_path.size() >= sizeof(addr.sun_path))
        throw UsageError("socket path must be non-empty and shorter than " +
                         std::to_string(sizeof(addr.sun_path)) + " bytes");
    addr.sun_family = AF_UNIX;
    std::strncpy(addr.sun_path, socket_path.c_str(), sizeof(addr.sun_path) - 1);
    return addr;
}

}  // namespace

void run_server(const std::string& socket_path, ServerState& state) {
    sockaddr_un addr = make_address(socket_path);
    Fd listener(::socket(AF_UNIX, SOCK_STREAM, 0));
    if (listener < 0) socket_error("socket");
    ::unlink(socket_path.c_str());
    if (::bind(listener, reinterpret_cast<const sockaddr*>(&addr), sizeof addr) < 0)
        socket_error("bind " + socket_path);
    if (::listen(listener, 8) < 0) socket_error("listen");

    bool running = true;
    while (running) {
        int raw = ::accept(listener, nullptr, nullptr);
        if (raw < 0) {
            if (errno == EINTR) continue;
            socket_error("accept");
        }
        Fd conn(raw);
        try {
            while (true) {
                auto body = read_frame(conn);
                if (!body) break;
                if (*body == "QUIT") {
                    write_frame(conn, "BYE");
                    running = false;
                    break;
                }
                write_frame(conn, process_request(state, *body));
            }
        } catch (const DomainError&) {
            // Framing violation from this client; drop the connection, keep serving.
        }
    }
    ::unlink(socket_path.c_str());
}

std::string send_request(const std::string& socket_path, std::string_view body) {
    if (body.size() > kMaxFrameBytes) throw UsageError("request exceeds the frame limit");
    sockaddr_un addr = make_address(socket_path);
    Fd conn(::socket(AF_UNIX, SOCK_STREAM, 0));
    if (conn < 0) socket_error("socket");
    if (::connect(conn, reinterpret_cast<const sockaddr*>(&addr), sizeof addr) < 0)
        socket_error("connect " + socket_path);
    write_frame(conn, body);
    auto response = read_frame(conn);
    if (!response) throw DomainError("server closed the connection without responding");
    return *response;
}

}  // namespace cosmos::server

#pragma once
// oracle_io.hpp - recovery oracles: the rule-based default and external
// processes speaking newline-delimited JSON over stdio or TCP.
//
// Request:  {"version":1,"goal":...,"visited":[...],"failure_kind":...,
//            "graph":{"nodes":[...],"edges":[...]},"categories":[...]}
// Response: {"anchor":...,"chain":[...],"scores":{"cat":score}}

#include <arpa/inet.h>
#include <fcntl.h>
#include <netdb.h>
#include <poll.h>
#include <signal.h>
#include <sys/socket.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstdlib>
#include <cstring>
#include <memory>
#include <set>
#include <string>

#include "co_occurrence.hpp"
#include "json.hpp"
#include "recovery.hpp"

namespace gridrelay {

using nlohmann::json;

inline json scene_graph_to_json(const SceneGraph& g) {
    json nodes = json::array(), edges = json::array();
    for (const auto& n : g.nodes())
        nodes.push_back({{"id", n.id},
                         {"label", n.label},
                         {"position", {n.position.x, n.position.y, n.position.z}},
                         {"confidence", n.confidence},
                         {"last_seen", n.last_seen}});
    for (const auto& e : g.edges())
        edges.push_back({{"src", e.src}, {"dst", e.dst}, {"relation", to_string(e.relation)}, {"affinity", e.affinity}});
    return {{"nodes", nodes}, {"edges", edges}};
}

inline json make_oracle_request(const FailureReport& r, const std::string& goal) {
    return {{"version", 1},
            {"goal", goal},
            {"visited", r.visited},
            {"failure_kind", to_string(r.kind)},
            {"graph", scene_graph_to_json(r.graph)},
            {"categories", r.candidates}};
}

inline RecoveryProposal parse_oracle_response(const json& j) {
    if (!j.is_object()) throw Error(ErrorCode::InvalidInput, "oracle response is not an object");
    RecoveryProposal p;
    p.source = "external";
    if (j.contains("chain")) {
        for (const auto& c : j.at("chain")) {
            if (!c.is_string()) throw Error(ErrorCode::InvalidInput, "chain entries must be strings");
            const auto s = c.get<std::string>();
            if (std::find(p.chain.begin(), p.chain.end(), s) != p.chain.end())
                throw Error(ErrorCode::InvalidInput, "chain anchors must be distinct");
            p.chain.push_back(s);
        }
    }
    if (j.contains("anchor") && j.at("anchor").is_string()) p.anchor = j.at("anchor").get<std::string>();
    if (p.anchor.empty() && !p.chain.empty()) p.anchor = p.chain.front();
    if (p.chain.empty() && !p.anchor.empty()) p.chain.push_back(p.anchor);
    if (p.chain.empty()) throw Error(ErrorCode::InvalidInput, "oracle proposed nothing");
    if (j.contains("scores"))
        for (const auto& [k, v] : j.at("scores").items()) {
            const double s = v.get<double>();
            if (!(s >= 0 && s <= 1)) throw Error(ErrorCode::InvalidInput, "oracle score outside [0,1]");
            p.scores[k] = s;
        }
    return p;
}

class RecoveryOracle {
public:
    virtual ~RecoveryOracle() = default;
    virtual RecoveryProposal propose(const FailureReport& report, const CoOccurrenceGraph& g, const std::string& goal,
                                     const RelayConfig& cfg) = 0;
    virtual std::string name() const = 0;
};

class RuleOracle : public RecoveryOracle {
public:
    RecoveryProposal propose(const FailureReport& report, const CoOccurrenceGraph& g, const std::string& goal,
                             const RelayConfig& cfg) override {
        return rule_based_oracle(report, g, goal, cfg);
    }
    std::string name() const override { return "rule"; }
};

namespace detail {

// Reads one '\n'-terminated line from fd, buffering the rest. Returns false on
// timeout, EOF or error.
inline bool read_line(int fd, std::string& buf, std::string& line, int timeout_ms) {
    const auto deadline = std::chrono::steady_clock::now() + std::chrono::milliseconds(timeout_ms);
    while (true) {
        if (auto nl = buf.find('\n'); nl != std::string::npos) {
            line = buf.substr(0, nl);
            buf.erase(0, nl + 1);
            return true;
        }
        const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
        if (left.count() <= 0) return false;
        pollfd p{fd, POLLIN, 0};
        const int rc = ::poll(&p, 1, static_cast<int>(left.count()));
        if (rc < 0 && errno == EINTR) continue;
        if (rc <= 0) return false;
        char tmp[4096];
        const ssize_t n = ::read(fd, tmp, sizeof tmp);
        if (n <= 0) return false;
        buf.append(tmp, static_cast<std::size_t>(n));
    }
}

inline bool write_all(int fd, const std::string& s, bool socket) {
    std::size_t off = 0;
    while (off < s.size()) {
        const ssize_t n = socket ? ::send(fd, s.data() + off, s.size() - off, MSG_NOSIGNAL)
                                 : ::write(fd, s.data() + off, s.size() - off);
        if (n < 0 && errno == EINTR) continue;
        if (n <= 0) return false;
        off += static_cast<std::size_t>(n);
    }
    return true;
}

}  // namespace detail

// Wraps a line channel; any transport or protocol failure falls back to the
// rule-based oracle and is recorded in last_error().
class ExternalOracle : public RecoveryOracle {
public:
    explicit ExternalOracle(int timeout_ms) : timeout_ms_(timeout_ms) {}

    RecoveryProposal propose(const FailureReport& report, const CoOccurrenceGraph& g, const std::string& goal,
                             const RelayConfig& cfg) override {
        last_error_.clear();
        try {
            std::string reply;
            if (!exchange(make_oracle_request(report, goal).dump() + "\n", reply))
                throw Error(ErrorCode::Io, "oracle did not answer within " + std::to_string(timeout_ms_) + " ms");
            return parse_oracle_response(json::parse(reply));
        } catch (const std::exception& e) {
            last_error_ = e.what();
            ++fallbacks_;
            RecoveryProposal p = rule_based_oracle(report, g, goal, cfg);
            p.source = "rule-fallback";
            return p;
        }
    }

    const std::string& last_error() const { return last_error_; }
    int fallbacks() const { return fallbacks_; }

protected:
    virtual bool exchange(const std::string& request, std::string& reply) = 0;
    int timeout_ms_;

private:
    std::string last_error_;
    int fallbacks_ = 0;
};

// Persistent child process started with /bin/sh -c <command>.
class StdioOracle : public ExternalOracle {
public:
    StdioOracle(std::string command, int timeout_ms = 5000) : ExternalOracle(timeout_ms), command_(std::move(command)) {}
    ~StdioOracle() override { stop(); }
    StdioOracle(const StdioOracle&) = delete;
    StdioOracle& operator=(const StdioOracle&) = delete;

    std::string name() const override { return "stdio:" + command_; }

protected:
    bool exchange(const std::string& request, std::string& reply) override {
        if (pid_ <= 0 && !start()) return false;
        if (!detail::write_all(to_child_, request, false) || !detail::read_line(from_child_, buf_, reply, timeout_ms_)) {
            stop();  // a stalled or dead child is restarted on the next request
            return false;
        }
        return true;
    }

private:
    bool start() {
        int in[2], out[2];
        if (::pipe(in) != 0) return false;
        if (::pipe(out) != 0) {
            ::close(in[0]);
            ::close(in[1]);
            return false;
        }
        const pid_t pid = ::fork();
        if (pid < 0) {
            for (int fd : {in[0], in[1], out[0], out[1]}) ::close(fd);
            return false;
        }
        if (pid == 0) {
            ::dup2(in[0], STDIN_FILENO);
            ::dup2(out[1], STDOUT_FILENO);
            for (int fd : {in[0], in[1], out[0], out[1]}) ::close(fd);
            ::execl("/bin/sh", "sh", "-c", command_.c_str(), static_cast<char*>(nullptr));
            ::_exit(127);
        }
        ::close(in[0]);
        ::close(out[1]);
        to_child_ = in[1];
        from_child_ = out[0];
        ::fcntl(to_child_, F_SETFD, FD_CLOEXEC);
        ::fcntl(from_child_, F_SETFD, FD_CLOEXEC);
        ::signal(SIGPIPE, SIG_IGN);
        pid_ = pid;
        buf_.clear();
        return true;
    }

    void stop() {
        if (to_child_ >= 0) ::close(to_child_);
        if (from_child_ >= 0) ::close(from_child_);
        to_child_ = from_child_ = -1;
        if (pid_ > 0) {
            ::kill(pid_, SIGTERM);
            ::waitpid(pid_, nullptr, 0);
        }
        pid_ = -1;
    }

    std::string command_;
    pid_t pid_ = -1;
    int to_child_ = -1, from_child_ = -1;
    std::string buf_;
};

// Persistent TCP connection to host:port, reconnected after any failure.
class TcpOracle : public ExternalOracle {
public:
    TcpOracle(std::string host, std::string port, int timeout_ms = 5000)
        : ExternalOracle(timeout_ms), host_(std::move(host)), port_(std::move(port)) {}
    ~TcpOracle() override { disconnect(); }
    TcpOracle(const TcpOracle&) = delete;
    TcpOracle& operator=(const TcpOracle&) = delete;

    std::string name() const override { return "tcp:" + host_ + ":" + port_; }

protected:
    bool exchange(const std::string& request, std::string& reply) override {
        if (fd_ < 0 && !connect_now()) return false;
        if (!detail::write_all(fd_, request, true) || !detail::read_line(fd_, buf_, reply, timeout_ms_)) {
            disconnect();
            return false;
        }
        return true;
    }

private:
    bool connect_now() {
        addrinfo hints{};
        hints.ai_family = AF_UNSPEC;
        hints.ai_socktype = SOCK_STREAM;
        addrinfo* res = nullptr;
        if (::getaddrinfo(host_.c_str(), port_.c_str(), &hints, &res) != 0) return false;
        for (addrinfo* a = res; a; a = a->ai_next) {
            const int fd = ::socket(a->ai_family, a->ai_socktype, a->ai_protocol);
            if (fd < 0) continue;
            if (::connect(fd, a->ai_addr, a->ai_addrlen) == 0) {
                fd_ = fd;
                break;
            }
            ::close(fd);
        }
        ::freeaddrinfo(res);
        buf_.clear();
        return fd_ >= 0;
    }

    void disconnect() {
        if (fd_ >= 0) ::close(fd_);
        fd_ = -1;
    }

    std::string host_, port_;
    int fd_ = -1;
    std::string buf_;
};

// "rule" | "stdio:<cmd>" | "tcp:<host:port>"
inline std::unique_ptr<RecoveryOracle> make_oracle(const std::string& spec, int timeout_ms = 5000) {
    if (spec.empty() || spec == "rule") return std::make_unique<RuleOracle>();
    if (spec.rfind("stdio:", 0) == 0) return std::make_unique<StdioOracle>(spec.substr(6), timeout_ms);
    if (spec.rfind("tcp:", 0) == 0) {
        const std::string hp = spec.substr(4);
        const auto colon = hp.rfind(':');
        if (colon == std::string::npos || colon == 0 || colon + 1 == hp.size())
            throw Error(ErrorCode::InvalidParameter, "tcp oracle needs host:port");
        return std::make_unique<TcpOracle>(hp.substr(0, colon), hp.substr(colon + 1), timeout_ms);
    }
    throw Error(ErrorCode::InvalidParameter, "unknown oracle spec " + spec);
}

inline std::string oracle_spec_from_env() {
    const char* v = std::getenv("GRIDRELAY_ORACLE");
    return v ? std::string(v) : std::string("rule");
}

}  // namespace gridrelay

#include "qtokens/external_scorer.hpp"

#include <fcntl.h>
#include <netdb.h>
#include <poll.h>
#include <signal.h>
#include <sys/socket.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cmath>
#include <cstring>
#include <deque>
#include <unordered_map>

#include <json.hpp>

#include "qtokens/error.hpp"

namespace qtokens {
namespace {

std::string clip(const std::string& s) { return s.size() <= 200 ? s : s.substr(0, 200) + "..."; }

class FdChannel : public ExternalScorer::Channel {
public:
    FdChannel(int read_fd, int write_fd, bool socket) : rfd_(read_fd), wfd_(write_fd), socket_(socket) {}

    ~FdChannel() override {
        if (wfd_ >= 0 && wfd_ != rfd_) ::close(wfd_);
        if (rfd_ >= 0) ::close(rfd_);
    }

    void write_line(const std::string& line) override {
        std::string buf = line + "\n";
        std::size_t off = 0;
        while (off < buf.size()) {
            ssize_t n = socket_ ? ::send(wfd_, buf.data() + off, buf.size() - off, MSG_NOSIGNAL)
                                : ::write(wfd_, buf.data() + off, buf.size() - off);
            if (n < 0) {
                if (errno == EINTR) continue;
                throw Error(std::string("scorer write failed: ") + std::strerror(errno));
            }
            off += static_cast<std::size_t>(n);
        }
    }

    bool read_line(std::string& line, std::chrono::milliseconds timeout) override {
        const auto deadline = std::chrono::steady_clock::now() + timeout;
        for (;;) {
            if (auto nl = pending_.find('\n'); nl != std::string::npos) {
                line = pending_.substr(0, nl);
                pending_.erase(0, nl + 1);
                return true;
            }
            if (eof_) {
                if (pending_.empty()) return false;
                line = std::move(pending_);
                pending_.clear();
                return true;
            }
            const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
                deadline - std::chrono::steady_clock::now());
            if (left.count() <= 0) throw Error("scorer timed out after " + std::to_string(timeout.count()) + " ms");
            pollfd p{rfd_, POLLIN, 0};
            int rc = ::poll(&p, 1, static_cast<int>(left.count()));
            if (rc < 0) {
                if (errno == EINTR) continue;
                throw Error(std::string("scorer poll failed: ") + std::strerror(errno));
            }
            if (rc == 0) continue;
            char buf[65536];
            ssize_t n = ::read(rfd_, buf, sizeof(buf));
            if (n < 0) {
                if (errno == EINTR) continue;
                throw Error(std::string("scorer read failed: ") + std::strerror(errno));
            }
            if (n == 0)
                eof_ = true;
            else
                pending_.append(buf, static_cast<std::size_t>(n));
        }
    }

protected:
    void close_write() {
        if (wfd_ >= 0 && wfd_ != rfd_) ::close(wfd_);
        wfd_ = -1;
    }

private:
    int rfd_;
    int wfd_;
    bool socket_;
    bool eof_ = false;
    std::string pending_;
};

class ProcessChannel final : public FdChannel {
public:
    ProcessChannel(int rfd, int wfd, pid_t pid) : FdChannel(rfd, wfd, false), pid_(pid) {}

    ~ProcessChannel() override {
        close_write();
        int status = 0;
        for (int i = 0; i < 100; ++i) {
            if (::waitpid(pid_, &status, WNOHANG) != 0) return;
            ::usleep(10000);
        }
        ::kill(pid_, SIGKILL);
        ::waitpid(pid_, &status, 0);
    }

private:
    pid_t pid_;
};

std::unique_ptr<ExternalScorer::Channel> spawn(const std::string& command) {
    ::signal(SIGPIPE, SIG_IGN);
    int to_child[2], from_child[2];
    if (::pipe2(to_child, O_CLOEXEC) != 0) throw Error("pipe failed");
    if (::pipe2(from_child, O_CLOEXEC) != 0) {
        ::close(to_child[0]);
        ::close(to_child[1]);
        throw Error("pipe failed");
    }
    pid_t pid = ::fork();
    if (pid < 0) throw Error("fork failed");
    if (pid == 0) {
        ::dup2(to_child[0], STDIN_FILENO);
        ::dup2(from_child[1], STDOUT_FILENO);
        ::execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
        ::_exit(127);
    }
    ::close(to_child[0]);
    ::close(from_child[1]);
    return std::make_unique<ProcessChannel>(from_child[0], to_child[1], pid);
}

std::unique_ptr<ExternalScorer::Channel> dial(const std::string& hostport) {
    auto colon = hostport.rfind(':');
    if (colon == std::string::npos) throw Error("tcp endpoint must be tcp://host:port");
    const std::string host = hostport.substr(0, colon);
    const std::string port = hostport.substr(colon + 1);
    addrinfo hints{};
    hints.ai_family = AF_UNSPEC;
    hints.ai_socktype = SOCK_STREAM;
    addrinfo* res = nullptr;
    if (int rc = ::getaddrinfo(host.c_str(), port.c_str(), &hints, &res); rc != 0)
        throw Error("cannot resolve " + hostport + ": " + ::gai_strerror(rc));
    int fd = -1;
    for (addrinfo* a = res; a; a = a->ai_next) {
        fd = ::socket(a->ai_family, a->ai_socktype | SOCK_CLOEXEC, a->ai_protocol);
        if (fd < 0) continue;
        if (::connect(fd, a->ai_addr, a->ai_addrlen) == 0) break;
        ::close(fd);
        fd = -1;
    }
    ::freeaddrinfo(res);
    if (fd < 0) throw Error("cannot connect to " + hostport);
    return std::make_unique<FdChannel>(fd, fd, true);
}

}  // namespace

ExternalScorer::ExternalScorer(std::unique_ptr<Channel> channel, Options opts)
    : LikelihoodScorer(opts.context_len), channel_(std::move(channel)), opts_(opts) {
    if (opts_.max_in_flight == 0) throw Error("max_in_flight must be positive");
}

std::vector<std::vector<double>> ExternalScorer::score(const std::vector<ScoreRequest>& batch) {
    std::unordered_map<std::string, std::size_t> slot;
    for (std::size_t i = 0; i < batch.size(); ++i)
        if (!slot.emplace(batch[i].id, i).second) throw Error("duplicate request id " + batch[i].id);

    std::vector<std::vector<double>> out(batch.size());
    std::vector<bool> done(batch.size(), false);
    std::size_t sent = 0, received = 0;
    std::string line;
    while (received < batch.size()) {
        while (sent < batch.size() && sent - received < opts_.max_in_flight) {
            nlohmann::json req{{"id", batch[sent].id}, {"tokens", batch[sent].tokens}};
            channel_->write_line(req.dump());
            ++sent;
        }
        if (!channel_->read_line(line, opts_.timeout))
            throw Error("scorer closed the stream with " + std::to_string(batch.size() - received) +
                        " responses outstanding");
        nlohmann::json resp;
        try {
            resp = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error&) {
            throw Error("protocol error: malformed response: " + clip(line));
        }
        if (!resp.is_object() || !resp.contains("id") || !resp["id"].is_string() || !resp.contains("logprobs") ||
            !resp["logprobs"].is_array())
            throw Error("protocol error: response needs string id and logprobs array: " + clip(line));
        const auto id = resp["id"].get<std::string>();
        auto it = slot.find(id);
        if (it == slot.end()) throw Error("protocol error: unknown response id: " + clip(line));
        const std::size_t i = it->second;
        if (i >= sent || done[i]) throw Error("protocol error: unexpected response for id " + id + ": " + clip(line));
        const auto& arr = resp["logprobs"];
        if (arr.size() != batch[i].tokens.size())
            throw Error("protocol error: expected " + std::to_string(batch[i].tokens.size()) +
                        " logprobs, got " + std::to_string(arr.size()) + ": " + clip(line));
        std::vector<double> lp;
        lp.reserve(arr.size());
        for (const auto& v : arr) {
            if (!v.is_number()) throw Error("protocol error: non-numeric log-probability: " + clip(line));
            const double x = v.get<double>();
            if (!std::isfinite(x)) throw Error("protocol error: non-finite log-probability: " + clip(line));
            if (x > 0.0) throw Error("protocol error: log-probability > 0: " + clip(line));
            lp.push_back(x);
        }
        out[i] = std::move(lp);
        done[i] = true;
        ++received;
    }
    return out;
}

std::unique_ptr<ExternalScorer> external_scorer_connect(const std::string& target, ExternalScorer::Options opts) {
    if (target.empty()) throw Error("empty scorer endpoint");
    std::unique_ptr<ExternalScorer::Channel> ch;
    if (target.rfind("tcp://", 0) == 0)
        ch = dial(target.substr(6));
    else if (target.rfind("cmd:", 0) == 0)
        ch = spawn(target.substr(4));
    else
        ch = spawn(target);
    return std::make_unique<ExternalScorer>(std::move(ch), opts);
}

std::unique_ptr<ExternalScorer> external_scorer_connect(const std::string& target) {
    return external_scorer_connect(target, ExternalScorer::Options{});
}

}  // namespace qtokens

#pragma once

#include <chrono>
#include <memory>
#include <string>

#include "qtokens/syntheticity.hpp"

namespace qtokens {

/// Newline-delimited JSON transport to a teacher model process.
///
/// Request:  {"id": str, "tokens": [str, ...]}
/// Response: {"id": str, "logprobs": [real, ...]}  (same length, all <= 0)
///
/// Responses are matched to requests by id, so a server may answer out of
/// order. At most `max_in_flight` requests are outstanding at any time.
class ExternalScorer final : public LikelihoodScorer {
public:
    struct Options {
        std::size_t context_len = 1024;
        std::size_t max_in_flight = 8;
        std::chrono::milliseconds timeout{30000};
    };

    class Channel {
    public:
        virtual ~Channel() = default;
        virtual void write_line(const std::string& line) = 0;
        /// Returns false on orderly end of stream.
        virtual bool read_line(std::string& line, std::chrono::milliseconds timeout) = 0;
    };

    ExternalScorer(std::unique_ptr<Channel> channel, Options opts);

    std::string kind() const override { return "external"; }
    std::vector<std::vector<double>> score(const std::vector<ScoreRequest>& batch) override;

private:
    std::unique_ptr<Channel> channel_;
    Options opts_;
};

/// `tcp://host:port` opens a socket; `cmd:<command>` or any other string is
/// run through /bin/sh with the protocol on its stdin/stdout.
std::unique_ptr<ExternalScorer> external_scorer_connect(const std::string& command_or_endpoint,
                                                        ExternalScorer::Options opts);
std::unique_ptr<ExternalScorer> external_scorer_connect(const std::string& command_or_endpoint);

}  // namespace qtokens

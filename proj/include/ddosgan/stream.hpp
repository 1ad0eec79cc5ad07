#pragma once

#include <atomic>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <shared_mutex>
#include <string>
#include <thread>
#include <vector>

#include "ddosgan/ingest.hpp"
#include "ddosgan/predictor.hpp"
#include "json.hpp"

namespace ddosgan::stream {

inline constexpr const char* kRawTopic = "GANs_raw";
inline constexpr const char* kPredictionsTopic = "GANs_raw_predictions";
inline constexpr std::uint16_t kDefaultPort = 9092;

struct Envelope {
    std::string topic;
    std::uint64_t offset = 0;
    std::int64_t timestamp_ms = 0;
    nlohmann::json payload;
};

class Clock {
public:
    virtual ~Clock() = default;
    virtual std::int64_t now_ms() = 0;
};

class SystemClock : public Clock {
public:
    std::int64_t now_ms() override;
};

/// Test clock: returns the set time, then advances by `step_ms` per call.
class ManualClock : public Clock {
public:
    explicit ManualClock(std::int64_t start_ms = 0, std::int64_t step_ms = 0) : now_(start_ms), step_(step_ms) {}
    std::int64_t now_ms() override { return now_.fetch_add(step_); }
    void set(std::int64_t ms) { now_.store(ms); }

private:
    std::atomic<std::int64_t> now_;
    std::int64_t step_;
};

struct ConsumerState {
    std::string topic;
    std::uint64_t committed = 0;
};

/// In-process topic log. Appends to a topic are serialized; readers copy
/// under the topic lock, so producers and consumers never see partial state.
class Broker {
public:
    explicit Broker(std::shared_ptr<Clock> clock = std::make_shared<SystemClock>());

    void create_topic(const std::string& name);
    bool has_topic(const std::string& name) const;
    std::vector<std::string> topics() const;
    std::uint64_t next_offset(const std::string& topic) const;

    /// Appends a non-empty JSON payload and returns its offset.
    std::uint64_t produce(const std::string& topic, nlohmann::json payload);
    /// Messages [offset, offset + max) that exist.
    std::vector<Envelope> read(const std::string& topic, std::uint64_t offset, std::size_t max) const;
    /// Reads from state.committed and advances it past what was returned.
    std::vector<Envelope> consume(ConsumerState& state, std::size_t max);

private:
    struct TopicLog {
        mutable std::mutex mu;
        std::vector<Envelope> messages;
        std::int64_t last_ts = 0;
    };
    TopicLog& topic(const std::string& name) const;

    std::shared_ptr<Clock> clock_;
    mutable std::shared_mutex topics_mu_;
    std::map<std::string, std::unique_ptr<TopicLog>, std::less<>> topics_;
};

/// Creates the raw and predictions topics.
void create_default_topology(Broker& broker);

/// Flow record as a payload: feature name -> value, tag name -> text, plus "Label".
nlohmann::json flow_payload(const std::vector<std::string>& feature_names, const ingest::FlowRecord& row,
                            const std::vector<std::string>& tag_names = {});

/// Produces every row to `topic` in order; returns the offsets.
std::vector<std::uint64_t> produce_rows(Broker& broker, const std::string& topic,
                                        const std::vector<std::string>& feature_names,
                                        const std::vector<ingest::FlowRecord>& rows,
                                        const std::vector<std::string>& tag_names = {});

struct ScoringStats {
    std::size_t processed = 0;
    std::size_t forwarded = 0;
    std::size_t benign = 0;
    std::size_t malformed = 0;
    std::vector<std::uint64_t> forwarded_offsets;  // offsets in the input topic
    std::vector<std::string> errors;               // one per malformed message
};

/// Drains `in_topic` from `state`, scores each payload on `feature_names` and
/// forwards predicted-malicious payloads (with "prediction" attached) to
/// `out_topic`. Payloads missing a feature or holding a non-numeric value are
/// counted as malformed and skipped.
ScoringStats scoring_consumer(Broker& broker, const Predictor& model, const std::vector<std::string>& feature_names,
                              ConsumerState& state, const std::string& out_topic = kPredictionsTopic,
                              std::size_t batch = 512);
ScoringStats scoring_consumer(Broker& broker, const Predictor& model, const std::vector<std::string>& feature_names,
                              const std::string& in_topic = kRawTopic,
                              const std::string& out_topic = kPredictionsTopic);

nlohmann::json envelope_json(const Envelope& e);
Envelope envelope_from_json(const nlohmann::json& j);

// --- socket front-end ---------------------------------------------------------

/// Handles one wire request: {verb, topic, payload?|offset?, max?}.
nlohmann::json handle_request(Broker& broker, const nlohmann::json& request);

/// Newline-delimited JSON over TCP on 127.0.0.1. Port 0 picks a free port.
class BrokerServer {
public:
    BrokerServer(Broker& broker, std::uint16_t port = kDefaultPort);
    ~BrokerServer();
    BrokerServer(const BrokerServer&) = delete;
    BrokerServer& operator=(const BrokerServer&) = delete;

    std::uint16_t port() const { return port_; }
    void stop();

private:
    void serve();
    void handle(int fd);

    Broker& broker_;
    int listen_fd_ = -1;
    std::uint16_t port_ = 0;
    std::atomic<bool> stopping_{false};
    std::thread acceptor_;
    std::mutex workers_mu_;
    std::vector<std::thread> workers_;
};

class BrokerClient {
public:
    BrokerClient(const std::string& host, std::uint16_t port);
    ~BrokerClient();
    BrokerClient(const BrokerClient&) = delete;
    BrokerClient& operator=(const BrokerClient&) = delete;

    nlohmann::json request(const nlohmann::json& req);
    void create_topic(const std::string& name);
    std::uint64_t produce(const std::string& topic, const nlohmann::json& payload);
    std::vector<Envelope> consume(const std::string& topic, std::uint64_t offset, std::size_t max);

private:
    int fd_ = -1;
    std::string buffer_;
};

}  // namespace ddosgan::stream

#include "ddosgan/stream.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <chrono>
#include <cmath>
#include <cstring>

#include "ddosgan/common.hpp"

namespace ddosgan::stream {

std::int64_t SystemClock::now_ms() {
    using namespace std::chrono;
    return duration_cast<milliseconds>(system_clock::now().time_since_epoch()).count();
}

Broker::Broker(std::shared_ptr<Clock> clock) : clock_(std::move(clock)) {
    if (!clock_) throw ValidationError("broker needs a clock");
}

void Broker::create_topic(const std::string& name) {
    if (name.empty()) throw ValidationError("topic name is empty");
    std::unique_lock lock(topics_mu_);
    if (topics_.contains(name)) throw ValidationError("topic already exists: " + name);
    topics_.emplace(name, std::make_unique<TopicLog>());
}

bool Broker::has_topic(const std::string& name) const {
    std::shared_lock lock(topics_mu_);
    return topics_.contains(name);
}

std::vector<std::string> Broker::topics() const {
    std::shared_lock lock(topics_mu_);
    std::vector<std::string> out;
    for (const auto& [name, _] : topics_) out.push_back(name);
    return out;
}

Broker::TopicLog& Broker::topic(const std::string& name) const {
    std::shared_lock lock(topics_mu_);
    auto it = topics_.find(name);
    if (it == topics_.end()) throw ValidationError("unknown topic: " + name);
    return *it->second;
}

std::uint64_t Broker::next_offset(const std::string& name) const {
    auto& t = topic(name);
    std::lock_guard lock(t.mu);
    return t.messages.size();
}

std::uint64_t Broker::produce(const std::string& name, nlohmann::json payload) {
    if (payload.is_null() || (payload.is_object() && payload.empty()) || (payload.is_string() && payload.get_ref<const std::string&>().empty()))
        throw ValidationError("empty payload");
    auto& t = topic(name);
    std::lock_guard lock(t.mu);
    Envelope e;
    e.topic = name;
    e.offset = t.messages.size();
    e.timestamp_ms = std::max(clock_->now_ms(), t.last_ts);
    t.last_ts = e.timestamp_ms;
    e.payload = std::move(payload);
    t.messages.push_back(std::move(e));
    return t.messages.back().offset;
}

std::vector<Envelope> Broker::read(const std::string& name, std::uint64_t offset, std::size_t max) const {
    auto& t = topic(name);
    std::lock_guard lock(t.mu);
    std::vector<Envelope> out;
    const std::uint64_t end = std::min<std::uint64_t>(t.messages.size(), offset + max);
    for (std::uint64_t i = offset; i < end; ++i) out.push_back(t.messages[i]);
    return out;
}

std::vector<Envelope> Broker::consume(ConsumerState& state, std::size_t max) {
    auto batch = read(state.topic, state.committed, max);
    state.committed += batch.size();
    return batch;
}

void create_default_topology(Broker& broker) {
    broker.create_topic(kRawTopic);
    broker.create_topic(kPredictionsTopic);
}

nlohmann::json flow_payload(const std::vector<std::string>& feature_names, const ingest::FlowRecord& row,
                            const std::vector<std::string>& tag_names) {
    if (row.features.size() != feature_names.size()) throw ValidationError("row width does not match feature names");
    nlohmann::json p = nlohmann::json::object();
    for (std::size_t j = 0; j < feature_names.size(); ++j) p[feature_names[j]] = row.features[j];
    for (std::size_t j = 0; j < tag_names.size() && j < row.tags.size(); ++j) p[tag_names[j]] = row.tags[j];
    p["Label"] = row.label;
    return p;
}

std::vector<std::uint64_t> produce_rows(Broker& broker, const std::string& topic,
                                        const std::vector<std::string>& feature_names,
                                        const std::vector<ingest::FlowRecord>& rows,
                                        const std::vector<std::string>& tag_names) {
    std::vector<std::uint64_t> offsets;
    offsets.reserve(rows.size());
    for (const auto& r : rows) offsets.push_back(broker.produce(topic, flow_payload(feature_names, r, tag_names)));
    return offsets;
}

ScoringStats scoring_consumer(Broker& broker, const Predictor& model, const std::vector<std::string>& feature_names,
                              ConsumerState& state, const std::string& out_topic, std::size_t batch) {
    if (feature_names.size() != model.n_features())
        throw ValidationError("model expects " + std::to_string(model.n_features()) + " features, got " +
                              std::to_string(feature_names.size()) + " names");
    if (!broker.has_topic(out_topic)) throw ValidationError("unknown topic: " + out_topic);
    if (batch == 0) throw ValidationError("consumer batch must be positive");
    ScoringStats stats;
    std::vector<double> x(feature_names.size());
    for (;;) {
        auto messages = broker.consume(state, batch);
        if (messages.empty()) break;
        for (auto& m : messages) {
            ++stats.processed;
            std::string problem;
            if (!m.payload.is_object()) problem = "payload is not an object";
            for (std::size_t j = 0; problem.empty() && j < feature_names.size(); ++j) {
                auto it = m.payload.find(feature_names[j]);
                if (it == m.payload.end())
                    problem = "missing feature '" + feature_names[j] + "'";
                else if (!it->is_number() || !std::isfinite(it->get<double>()))
                    problem = "non-numeric feature '" + feature_names[j] + "'";
                else
                    x[j] = it->get<double>();
            }
            if (!problem.empty()) {
                ++stats.malformed;
                stats.errors.push_back("offset " + std::to_string(m.offset) + ": " + problem);
                continue;
            }
            const int pred = model.predict(x);
            if (pred == 0) {
                ++stats.benign;
                continue;
            }
            m.payload["prediction"] = pred;
            broker.produce(out_topic, std::move(m.payload));
            stats.forwarded_offsets.push_back(m.offset);
            ++stats.forwarded;
        }
    }
    return stats;
}

ScoringStats scoring_consumer(Broker& broker, const Predictor& model, const std::vector<std::string>& feature_names,
                              const std::string& in_topic, const std::string& out_topic) {
    if (!broker.has_topic(in_topic)) throw ValidationError("unknown topic: " + in_topic);
    ConsumerState state{in_topic, 0};
    return scoring_consumer(broker, model, feature_names, state, out_topic);
}

nlohmann::json envelope_json(const Envelope& e) {
    return {{"topic", e.topic}, {"offset", e.offset}, {"timestamp", e.timestamp_ms}, {"payload", e.payload}};
}

Envelope envelope_from_json(const nlohmann::json& j) {
    return {j.at("topic").get<std::string>(), j.at("offset").get<std::uint64_t>(), j.at("timestamp").get<std::int64_t>(),
            j.at("payload")};
}

// --- socket front-end ---------------------------------------------------------

nlohmann::json handle_request(Broker& broker, const nlohmann::json& req) {
    try {
        if (!req.is_object()) throw ValidationError("request must be an object");
        const auto verb = req.value("verb", std::string());
        const auto topic = req.value("topic", std::string());
        if (verb == "CREATE") {
            broker.create_topic(topic);
            return {{"ok", true}};
        }
        if (verb == "PRODUCE") {
            if (!req.contains("payload")) throw ValidationError("PRODUCE needs a payload");
            return {{"ok", true}, {"offset", broker.produce(topic, req["payload"])}};
        }
        if (verb == "CONSUME") {
            const auto offset = req.value("offset", std::uint64_t{0});
            const auto max = req.value("max", std::size_t{100});
            auto msgs = nlohmann::json::array();
            for (const auto& e : broker.read(topic, offset, max)) msgs.push_back(envelope_json(e));
            return {{"ok", true}, {"messages", std::move(msgs)}};
        }
        throw ValidationError("unknown verb '" + verb + "'");
    } catch (const std::exception& e) {
        return {{"ok", false}, {"error", e.what()}};
    }
}

namespace {

bool send_all(int fd, std::string_view data) {
    while (!data.empty()) {
        const auto n = ::send(fd, data.data(), data.size(), MSG_NOSIGNAL);
        if (n <= 0) return false;
        data.remove_prefix(static_cast<std::size_t>(n));
    }
    return true;
}

// Reads one '\n'-terminated line, keeping any surplus in `buffer`.
bool read_line(int fd, std::string& buffer, std::string& line, const std::atomic<bool>* stopping = nullptr) {
    for (;;) {
        if (auto pos = buffer.find('\n'); pos != std::string::npos) {
            line = buffer.substr(0, pos);
            buffer.erase(0, pos + 1);
            return true;
        }
        if (stopping) {
            pollfd p{fd, POLLIN, 0};
            const int r = ::poll(&p, 1, 100);
            if (stopping->load()) return false;
            if (r <= 0) continue;
        }
        char chunk[4096];
        const auto n = ::recv(fd, chunk, sizeof chunk, 0);
        if (n <= 0) return false;
        buffer.append(chunk, static_cast<std::size_t>(n));
    }
}

}  // namespace

BrokerServer::BrokerServer(Broker& broker, std::uint16_t port) : broker_(broker) {
    listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    if (listen_fd_ < 0) throw RuntimeError(std::string("socket: ") + std::strerror(errno));
    int one = 1;
    ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
    addr.sin_port = htons(port);
    if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) < 0 || ::listen(listen_fd_, 16) < 0) {
        const std::string msg = std::strerror(errno);
        ::close(listen_fd_);
        throw RuntimeError("cannot listen on port " + std::to_string(port) + ": " + msg);
    }
    socklen_t len = sizeof addr;
    ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
    port_ = ntohs(addr.sin_port);
    acceptor_ = std::thread([this] { serve(); });
}

BrokerServer::~BrokerServer() { stop(); }

void BrokerServer::stop() {
    if (stopping_.exchange(true)) return;
    if (acceptor_.joinable()) acceptor_.join();
    std::lock_guard lock(workers_mu_);
    for (auto& w : workers_)
        if (w.joinable()) w.join();
    ::close(listen_fd_);
}

void BrokerServer::serve() {
    while (!stopping_.load()) {
        pollfd p{listen_fd_, POLLIN, 0};
        if (::poll(&p, 1, 100) <= 0) continue;
        const int fd = ::accept(listen_fd_, nullptr, nullptr);
        if (fd < 0) continue;
        std::lock_guard lock(workers_mu_);
        workers_.emplace_back([this, fd] { handle(fd); });
    }
}

void BrokerServer::handle(int fd) {
    std::string buffer, line;
    while (read_line(fd, buffer, line, &stopping_)) {
        nlohmann::json response;
        auto req = nlohmann::json::parse(line, nullptr, false);
        if (req.is_discarded())
            response = {{"ok", false}, {"error", "malformed JSON frame"}};
        else
            response = handle_request(broker_, req);
        if (!send_all(fd, response.dump() + "\n")) break;
    }
    ::close(fd);
}

BrokerClient::BrokerClient(const std::string& host, std::uint16_t port) {
    addrinfo hints{};
    hints.ai_family = AF_INET;
    hints.ai_socktype = SOCK_STREAM;
    addrinfo* res = nullptr;
    if (::getaddrinfo(host.c_str(), std::to_string(port).c_str(), &hints, &res) != 0 || !res)
        throw RuntimeError("cannot resolve " + host);
    fd_ = ::socket(res->ai_family, res->ai_socktype, res->ai_protocol);
    const bool ok = fd_ >= 0 && ::connect(fd_, res->ai_addr, res->ai_addrlen) == 0;
    ::freeaddrinfo(res);
    if (!ok) {
        if (fd_ >= 0) ::close(fd_);
        throw RuntimeError("cannot connect to " + host + ":" + std::to_string(port));
    }
}

BrokerClient::~BrokerClient() {
    if (fd_ >= 0) ::close(fd_);
}

nlohmann::json BrokerClient::request(const nlohmann::json& req) {
    if (!send_all(fd_, req.dump() + "\n")) throw RuntimeError("broker connection closed");
    std::string line;
    if (!read_line(fd_, buffer_, line)) throw RuntimeError("broker connection closed");
    return nlohmann::json::parse(line);
}

namespace {
const nlohmann::json& expect_ok(const nlohmann::json& resp) {
    if (!resp.value("ok", false)) throw RuntimeError("broker error: " + resp.value("error", std::string("unknown")));
    return resp;
}
}  // namespace

void BrokerClient::create_topic(const std::string& name) { expect_ok(request({{"verb", "CREATE"}, {"topic", name}})); }

std::uint64_t BrokerClient::produce(const std::string& topic, const nlohmann::json& payload) {
    auto resp = request({{"verb", "PRODUCE"}, {"topic", topic}, {"payload", payload}});
    return expect_ok(resp).at("offset").get<std::uint64_t>();
}

std::vector<Envelope> BrokerClient::consume(const std::string& topic, std::uint64_t offset, std::size_t max) {
    auto resp = request({{"verb", "CONSUME"}, {"topic", topic}, {"offset", offset}, {"max", max}});
    std::vector<Envelope> out;
    for (const auto& m : expect_ok(resp).at("messages")) out.push_back(envelope_from_json(m));
    return out;
}

}  // namespace ddosgan::stream

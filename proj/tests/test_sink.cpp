#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "ddosgan/common.hpp"
#include "ddosgan/sink.hpp"

using namespace ddosgan;
using namespace ddosgan::sink;
using nlohmann::json;
using stream::Envelope;

namespace {

std::vector<Envelope> messages(std::size_t n, std::int64_t start = 0, std::int64_t step = 1000) {
    std::vector<Envelope> out;
    for (std::size_t i = 0; i < n; ++i)
        out.push_back({stream::kPredictionsTopic, i, start + std::int64_t(i) * step,
                       json{{"Source IP", "10.0.0." + std::to_string(i % 3)}, {"Average Packet Size", double(i)}, {"prediction", 1}}});
    return out;
}

std::filesystem::path scratch(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / "ddosgan_sink_test";
    std::filesystem::create_directories(dir);
    return dir / name;
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST_CASE("timestamps") {
    CHECK(iso_timestamp(0) == "1970-01-01T00:00:00.000Z");
    CHECK(iso_timestamp(1499212800123) == "2017-07-05T00:00:00.123Z");
}

TEST_CASE("bulk NDJSON layout") {
    const auto one = bulk_ndjson(messages(1));
    const auto first = one.substr(0, one.find('\n'));
    CHECK(first == R"({"index":{"_index":"attack_index"}})");
    for (std::size_t n : {0u, 1u, 17u, 1000u}) {
        const auto text = bulk_ndjson(messages(n), "attack_index");
        CHECK(std::size_t(std::count(text.begin(), text.end(), '\n')) == 2 * n);
        if (n) CHECK(text.back() == '\n');
        std::istringstream in(text);
        std::string line;
        std::size_t k = 0;
        while (std::getline(in, line)) {
            const auto j = json::parse(line);
            if (k % 2 == 0) CHECK(j == json{{"index", {{"_index", "attack_index"}}}});
            else CHECK(j.contains("@timestamp"));
            ++k;
        }
    }
    CHECK(bulk_document(messages(1)[0])["@timestamp"] == "1970-01-01T00:00:00.000Z");
}

TEST_CASE("bulk files") {
    const auto empty = scratch("empty.ndjson");
    CHECK(write_bulk({}, "attack_index", empty) == 0);
    CHECK(std::filesystem::file_size(empty) == 0);

    const auto path = scratch("some.ndjson");
    const auto msgs = messages(17);
    CHECK(write_bulk(msgs, "attack_index", path) == 17);
    const auto docs = read_bulk_documents(path);
    REQUIRE(docs.size() == 17);
    for (std::size_t i = 0; i < docs.size(); ++i) {
        auto d = docs[i];
        d.erase("@timestamp");
        CHECK(d == msgs[i].payload);
    }
    const auto before = slurp(path);
    write_bulk(msgs, "attack_index", path);
    CHECK(slurp(path) == before);
}

TEST_CASE("summary shares, buckets and average") {
    std::vector<Envelope> msgs;
    for (int i = 0; i < 4; ++i)
        msgs.push_back({"t", std::uint64_t(i), 100 + i, json{{"Source IP", i < 3 ? "A" : "B"}, {"Average Packet Size", 10.0 * i}}});
    const auto s = summarize(msgs, 10000, 5);
    CHECK(s.total == 4);
    CHECK(s.distinct_ips == 2);
    REQUIRE(s.top_ips.size() == 2);
    CHECK(s.top_ips[0].ip == "A");
    CHECK(s.top_ips[0].share == 0.75);
    CHECK(s.top_ips[1].share == 0.25);
    REQUIRE(s.series.size() == 1);
    CHECK(s.series[0].start_ms == 0);
    CHECK(s.series[0].count == 4);
    CHECK(*s.average_packet_size == 15.0);

    const auto spread = summarize(messages(30, 0, 1000), 10000);
    REQUIRE(spread.series.size() == 3);
    std::size_t sum = 0;
    for (const auto& b : spread.series) sum += b.count;
    CHECK(sum == 30);
    CHECK(spread.series[1].start_ms == 10000);

    std::vector<Envelope> no_ip{{"t", 0, 0, json{{"x", 1}}}};
    CHECK(summarize(no_ip).top_ips[0].ip == "unknown");
    CHECK_FALSE(summarize(no_ip).average_packet_size.has_value());
}

TEST_CASE("reports") {
    const auto msgs = messages(12);
    const auto a = render_report(summarize(msgs));
    CHECK(a == render_report(summarize(msgs)));
    CHECK(a.find("Count of records: 12") != std::string::npos);
    const auto none = render_report(summarize({}));
    CHECK(none.find("No records") != std::string::npos);
    CHECK(to_json(summarize(msgs))["total"] == 12);

    const auto dir = scratch("plots");
    const auto files = write_plots(summarize(msgs), dir);
    CHECK(files.size() == 2);
    for (const auto& f : files) CHECK(slurp(f).find("<svg") != std::string::npos);
}

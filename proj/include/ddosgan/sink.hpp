#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "ddosgan/stream.hpp"
#include "json.hpp"

namespace ddosgan::sink {

inline constexpr const char* kDefaultIndex = "attack_index";
inline constexpr const char* kSourceIpField = "Source IP";
inline constexpr const char* kPacketSizeField = "Average Packet Size";

/// Envelope timestamp as an ISO-8601 UTC string with milliseconds.
std::string iso_timestamp(std::int64_t ms);

/// The indexed document: payload fields plus "@timestamp".
nlohmann::json bulk_document(const stream::Envelope& message);

/// Two NDJSON lines per message: the index action, then the document.
std::string bulk_ndjson(const std::vector<stream::Envelope>& messages, const std::string& index = kDefaultIndex);

/// Writes bulk_ndjson atomically; returns the number of messages written.
std::size_t write_bulk(const std::vector<stream::Envelope>& messages, const std::string& index,
                       const std::filesystem::path& out);

/// Document lines of a bulk file, in order.
std::vector<nlohmann::json> read_bulk_documents(const std::filesystem::path& path);

struct IpShare {
    std::string ip;
    std::size_t count = 0;
    double share = 0.0;
};

struct TimeBucket {
    std::int64_t start_ms = 0;
    std::size_t count = 0;
};

struct DashboardSummary {
    std::size_t total = 0;
    std::size_t distinct_ips = 0;
    std::vector<IpShare> top_ips;               // by count desc, then ip
    std::optional<double> average_packet_size;  // over messages carrying the field
    std::size_t packet_size_samples = 0;
    std::int64_t bucket_ms = 10000;
    std::vector<TimeBucket> series;  // non-empty buckets, ascending
};

DashboardSummary summarize(const std::vector<stream::Envelope>& messages, std::int64_t bucket_ms = 10000,
                           std::size_t top_n = 5);

std::string render_report(const DashboardSummary& summary);

/// SVG bar charts of the bucket series and IP shares. Returns the written paths.
std::vector<std::filesystem::path> write_plots(const DashboardSummary& summary, const std::filesystem::path& dir);

nlohmann::json to_json(const DashboardSummary& summary);

}  // namespace ddosgan::sink

#include "ddosgan/sink.hpp"

#include <algorithm>
#include <cstdio>
#include <ctime>
#include <map>
#include <sstream>

#include "ddosgan/common.hpp"

namespace ddosgan::sink {

namespace {

std::int64_t floor_div(std::int64_t a, std::int64_t b) {
    std::int64_t q = a / b;
    if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
    return q;
}

std::string xml_escape(std::string_view s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

std::string bar_chart_svg(const std::string& title, const std::vector<std::pair<std::string, double>>& bars) {
    const int width = 640, bar_h = 18, gap = 6, left = 200, top = 40;
    const int height = top + static_cast<int>(bars.size()) * (bar_h + gap) + 20;
    double peak = 0.0;
    for (const auto& [_, v] : bars) peak = std::max(peak, v);
    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height << "\">\n";
    svg << "<text x=\"10\" y=\"24\" font-family=\"sans-serif\" font-size=\"16\">" << xml_escape(title) << "</text>\n";
    int y = top;
    for (const auto& [label, v] : bars) {
        const int w = peak > 0 ? static_cast<int>((width - left - 80) * v / peak) : 0;
        char value[64];
        std::snprintf(value, sizeof value, "%g", v);
        svg << "<text x=\"10\" y=\"" << y + 13 << "\" font-family=\"monospace\" font-size=\"12\">" << xml_escape(label)
            << "</text>";
        svg << "<rect x=\"" << left << "\" y=\"" << y << "\" width=\"" << w << "\" height=\"" << bar_h
            << "\" fill=\"#4a78b0\"/>";
        svg << "<text x=\"" << left + w + 6 << "\" y=\"" << y + 13 << "\" font-family=\"monospace\" font-size=\"12\">"
            << value << "</text>\n";
        y += bar_h + gap;
    }
    svg << "</svg>\n";
    return svg.str();
}

}  // namespace

std::string iso_timestamp(std::int64_t ms) {
    const std::int64_t secs = floor_div(ms, 1000);
    const auto millis = static_cast<int>(ms - secs * 1000);
    const std::time_t t = static_cast<std::time_t>(secs);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[96];
    std::snprintf(buf, sizeof buf, "%04d-%02d-%02dT%02d:%02d:%02d.%03dZ", tm.tm_year + 1900, tm.tm_mon + 1, tm.tm_mday,
                  tm.tm_hour, tm.tm_min, tm.tm_sec, millis);
    return buf;
}

nlohmann::json bulk_document(const stream::Envelope& message) {
    nlohmann::json doc = message.payload.is_object() ? message.payload : nlohmann::json{{"message", message.payload}};
    doc["@timestamp"] = iso_timestamp(message.timestamp_ms);
    return doc;
}

std::string bulk_ndjson(const std::vector<stream::Envelope>& messages, const std::string& index) {
    if (index.empty()) throw ValidationError("index name is empty");
    const std::string action = nlohmann::json{{"index", {{"_index", index}}}}.dump();
    std::string out;
    for (const auto& m : messages) {
        out += action;
        out += '\n';
        out += bulk_document(m).dump();
        out += '\n';
    }
    return out;
}

std::size_t write_bulk(const std::vector<stream::Envelope>& messages, const std::string& index,
                       const std::filesystem::path& out) {
    write_file_atomic(out, bulk_ndjson(messages, index));
    return messages.size();
}

std::vector<nlohmann::json> read_bulk_documents(const std::filesystem::path& path) {
    std::istringstream in(read_file(path));
    std::vector<nlohmann::json> docs;
    std::string action, doc;
    std::size_t line = 0;
    while (std::getline(in, action)) {
        ++line;
        if (!std::getline(in, doc)) throw ValidationError(path.string() + ":" + std::to_string(line) + ": action without document");
        ++line;
        docs.push_back(nlohmann::json::parse(doc));
    }
    return docs;
}

DashboardSummary summarize(const std::vector<stream::Envelope>& messages, std::int64_t bucket_ms, std::size_t top_n) {
    if (bucket_ms <= 0) throw ValidationError("bucket width must be positive");
    DashboardSummary s;
    s.total = messages.size();
    s.bucket_ms = bucket_ms;
    std::map<std::string, std::size_t> ips;
    std::map<std::int64_t, std::size_t> buckets;
    double size_sum = 0.0;
    for (const auto& m : messages) {
        std::string ip = "unknown";
        if (m.payload.is_object()) {
            if (auto it = m.payload.find(kSourceIpField); it != m.payload.end())
                ip = it->is_string() ? it->get<std::string>() : it->dump();
            if (auto it = m.payload.find(kPacketSizeField); it != m.payload.end() && it->is_number()) {
                size_sum += it->get<double>();
                ++s.packet_size_samples;
            }
        }
        ++ips[ip];
        ++buckets[floor_div(m.timestamp_ms, bucket_ms) * bucket_ms];
    }
    s.distinct_ips = ips.size();
    std::vector<IpShare> all;
    for (const auto& [ip, n] : ips) all.push_back({ip, n, static_cast<double>(n) / static_cast<double>(s.total)});
    std::stable_sort(all.begin(), all.end(), [](const auto& a, const auto& b) { return a.count > b.count; });
    if (all.size() > top_n) all.resize(top_n);
    s.top_ips = std::move(all);
    if (s.packet_size_samples > 0) s.average_packet_size = size_sum / static_cast<double>(s.packet_size_samples);
    for (const auto& [start, n] : buckets) s.series.push_back({start, n});
    return s;
}

std::string render_report(const DashboardSummary& s) {
    std::ostringstream out;
    char line[256];
    out << "Attack dashboard\n";
    out << "================\n";
    out << "Count of records: " << s.total << "\n";
    if (s.total == 0) {
        out << "No records (zero predicted-malicious flows).\n";
        return out.str();
    }
    out << "\nTop source IPs (" << s.distinct_ips << " distinct)\n";
    for (const auto& ip : s.top_ips) {
        std::snprintf(line, sizeof line, "  %-24s %8zu  %6.2f%%\n", ip.ip.c_str(), ip.count, 100.0 * ip.share);
        out << line;
    }
    out << "\nAverage packet size: ";
    if (s.average_packet_size) {
        std::snprintf(line, sizeof line, "%.4f (%zu records)\n", *s.average_packet_size, s.packet_size_samples);
        out << line;
    } else {
        out << "n/a\n";
    }
    out << "\nRecords per " << s.bucket_ms << " ms bucket\n";
    for (const auto& b : s.series) out << "  " << iso_timestamp(b.start_ms) << "  " << b.count << "\n";
    return out.str();
}

std::vector<std::filesystem::path> write_plots(const DashboardSummary& s, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    std::vector<std::pair<std::string, double>> series, shares;
    for (const auto& b : s.series) series.emplace_back(iso_timestamp(b.start_ms).substr(11, 8), static_cast<double>(b.count));
    for (const auto& ip : s.top_ips) shares.emplace_back(ip.ip, ip.share);
    const auto series_path = dir / "records_over_time.svg";
    const auto shares_path = dir / "source_ip_shares.svg";
    write_file_atomic(series_path, bar_chart_svg("Records per time bucket", series));
    write_file_atomic(shares_path, bar_chart_svg("Source IP share", shares));
    return {series_path, shares_path};
}

nlohmann::json to_json(const DashboardSummary& s) {
    nlohmann::json doc{{"total", s.total}, {"distinct_ips", s.distinct_ips}, {"bucket_ms", s.bucket_ms},
                       {"packet_size_samples", s.packet_size_samples}};
    doc["average_packet_size"] = s.average_packet_size ? nlohmann::json(*s.average_packet_size) : nlohmann::json(nullptr);
    auto& ips = doc["top_ips"] = nlohmann::json::array();
    for (const auto& ip : s.top_ips) ips.push_back({{"ip", ip.ip}, {"count", ip.count}, {"share", ip.share}});
    auto& series = doc["series"] = nlohmann::json::array();
    for (const auto& b : s.series) series.push_back({{"start_ms", b.start_ms}, {"count", b.count}});
    return doc;
}

}  // namespace ddosgan::sink

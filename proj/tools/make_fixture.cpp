// Writes a small CICIDS2017-style flow CSV with known per-class
// distributions. The bundled test fixture comes from the default arguments.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "ddosgan/common.hpp"

namespace {

struct ClassProfile {
    const char* label;
    double weight;
    double log_duration, log_duration_sd;
    double fwd_packets;  // mean
    double bwd_packets;
    double packet_size, packet_size_sd;
    double iat_log, iat_log_sd;
};

// Malicious classes share a tighter, smaller-packet profile than benign traffic.
const std::vector<ClassProfile> kProfiles{
    {"BENIGN", 0.635, 10.0, 2.2, 9.0, 8.0, 420.0, 160.0, 9.0, 2.0},
    {"DoS Hulk", 0.225, 11.3, 0.9, 6.0, 4.0, 140.0, 45.0, 10.5, 0.8},
    {"DoS GoldenEye", 0.06, 12.5, 0.8, 7.0, 5.0, 180.0, 50.0, 11.0, 0.7},
    {"DoS slowloris", 0.04, 16.0, 0.5, 5.0, 2.0, 60.0, 20.0, 14.0, 0.6},
    {"DoS Slowhttptest", 0.0375, 15.5, 0.6, 4.0, 1.0, 55.0, 20.0, 13.5, 0.6},
    {"Heartbleed", 0.0025, 18.0, 0.3, 2600.0, 1800.0, 1900.0, 200.0, 8.0, 0.5},
};

std::string num(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Generate a CICIDS-style fixture CSV"};
    std::size_t rows = 2000;
    std::uint64_t seed = 7;
    std::string out = "fixture.csv";
    double bad_fraction = 0.01;
    app.add_option("--rows", rows, "data rows");
    app.add_option("--seed", seed, "RNG seed");
    app.add_option("--out", out, "output path");
    app.add_option("--bad-fraction", bad_fraction, "fraction of rows holding Infinity/NaN");
    CLI11_PARSE(app, argc, argv);

    std::mt19937_64 rng(seed);
    std::vector<double> weights;
    for (const auto& p : kProfiles) weights.push_back(p.weight);
    std::discrete_distribution<std::size_t> pick(weights.begin(), weights.end());
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::uniform_int_distribution<int> host(3, 25);
    const int benign_ports[] = {443, 80, 53, 8080, 22, 137};

    // Leading spaces and the repeated header mirror the published CSVs.
    std::string csv =
        " Source IP, Destination Port, Flow Duration, Total Fwd Packets, Total Backward Packets,Total Length of Fwd "
        "Packets, Fwd Packet Length Max,Flow Bytes/s, Flow Packets/s, Flow IAT Mean, Fwd Header Length, Fwd Header "
        "Length, Average Packet Size, Init_Win_bytes_forward, Label\n";
    for (std::size_t i = 0; i < rows; ++i) {
        const auto& p = kProfiles[pick(rng)];
        const bool benign = std::string(p.label) == "BENIGN";
        std::string ip = benign ? "192.168.10." + std::to_string(host(rng)) : (unit(rng) < 0.9 ? "172.16.0.1" : "172.16.0." + std::to_string(host(rng)));
        const int port = benign ? benign_ports[static_cast<std::size_t>(unit(rng) * 6) % 6] : 80;
        const double duration = std::round(std::exp(p.log_duration + p.log_duration_sd * normal(rng)));
        const double fwd = std::max(1.0, std::round(p.fwd_packets * std::exp(0.4 * normal(rng))));
        const double bwd = std::max(0.0, std::round(p.bwd_packets * std::exp(0.5 * normal(rng))));
        const double avg_size = std::max(0.0, p.packet_size + p.packet_size_sd * normal(rng));
        const double fwd_len = std::round(fwd * avg_size * (0.5 + 0.3 * unit(rng)));
        const double fwd_max = std::round(avg_size * (1.0 + 0.8 * unit(rng)));
        const double seconds = std::max(duration, 1.0) / 1e6;
        const double header = fwd * (benign ? 32.0 : 20.0 + 12.0 * std::round(unit(rng)));
        const double win = benign ? std::round(8192 + 24000 * unit(rng)) : (unit(rng) < 0.7 ? 29200.0 : 251.0);
        std::string bytes_s = num((fwd_len + bwd * avg_size) / seconds);
        std::string packets_s = num((fwd + bwd) / seconds);
        if (unit(rng) < bad_fraction) {
            bytes_s = unit(rng) < 0.5 ? "Infinity" : "NaN";
            packets_s = "Infinity";
        }
        const double iat = std::exp(p.iat_log + p.iat_log_sd * normal(rng));
        csv += ip + "," + std::to_string(port) + "," + num(duration) + "," + num(fwd) + "," + num(bwd) + "," +
               num(fwd_len) + "," + num(fwd_max) + "," + bytes_s + "," + packets_s + "," + num(iat) + "," + num(header) +
               "," + num(header) + "," + num(avg_size) + "," + num(win) + "," + p.label + "\n";
    }
    ddosgan::write_file_atomic(out, csv);
    return 0;
}

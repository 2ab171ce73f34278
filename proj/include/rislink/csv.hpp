#pragma once

#include <charconv>
#include <cstdint>
#include <string>
#include <vector>

#include "rislink/engine.hpp"

namespace rislink {

/// Shortest round-trip decimal form via to_chars: locale-independent and
/// byte-stable across runs.
inline std::string format_double(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

inline std::string csv_header() {
    return "metric_name,value,ci_low,ci_high,samples,B,M,P_x_dBW,speed_kmh,scheme,channel_model,seed,"
           "config_digest\n";
}

inline std::string csv_row(const MetricRecord& r) {
    std::string s;
    s += r.metric_name;
    s += ',';
    if (r.infeasible) {
        s += "infeasible,,,";
    } else {
        s += format_double(r.value);
        s += ',';
        s += format_double(r.ci_low);
        s += ',';
        s += format_double(r.ci_high);
        s += ',';
    }
    s += std::to_string(r.samples);
    s += ',';
    s += std::to_string(r.b_total);
    s += ',';
    s += std::to_string(r.m_total);
    s += ',';
    s += format_double(r.px_dbw);
    s += ',';
    s += format_double(r.speed_kmh);
    s += ',';
    s += r.scheme;
    s += ',';
    s += r.channel_model;
    s += ',';
    s += std::to_string(r.seed);
    s += ',';
    s += r.config_digest;
    s += '\n';
    return s;
}

inline std::string csv_table(const std::vector<MetricRecord>& rows) {
    std::string s = csv_header();
    for (const auto& r : rows) s += csv_row(r);
    return s;
}

}  // namespace rislink

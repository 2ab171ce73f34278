#pragma once

#include <cctype>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "rislink/scenario.hpp"

namespace rislink {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// A scenario resolved from a config file, plus the defaults that were
/// filled in (recorded in the run manifest).
struct ResolvedConfig {
    ScenarioConfig scenario;
    std::vector<std::string> defaults_applied;
};

namespace detail {

struct ConfigValue {
    enum class Kind { number, string, boolean, array } kind;
    double num = 0.0;
    bool b = false;
    std::string str;
    std::vector<double> arr;
    int line = 0;
};

inline std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

inline std::string strip_comment(const std::string& line) {
    bool in_str = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        if (line[i] == '"') in_str = !in_str;
        if (line[i] == '#' && !in_str) return line.substr(0, i);
    }
    return line;
}

inline double parse_number(const std::string& tok, int line) {
    std::size_t pos = 0;
    double v = 0.0;
    try {
        v = std::stod(tok, &pos);
    } catch (const std::exception&) {
        throw ConfigError("config line " + std::to_string(line) + ": invalid number '" + tok + "'");
    }
    if (pos != tok.size())
        throw ConfigError("config line " + std::to_string(line) + ": invalid number '" + tok + "'");
    return v;
}

inline ConfigValue parse_value(const std::string& raw, int line) {
    ConfigValue v;
    v.line = line;
    const std::string tok = trim(raw);
    if (tok.empty()) throw ConfigError("config line " + std::to_string(line) + ": missing value");
    if (tok.front() == '"') {
        if (tok.size() < 2 || tok.back() != '"')
            throw ConfigError("config line " + std::to_string(line) + ": unterminated string");
        v.kind = ConfigValue::Kind::string;
        v.str = tok.substr(1, tok.size() - 2);
        return v;
    }
    if (tok == "true" || tok == "false") {
        v.kind = ConfigValue::Kind::boolean;
        v.b = tok == "true";
        return v;
    }
    if (tok.front() == '[') {
        if (tok.back() != ']')
            throw ConfigError("config line " + std::to_string(line) + ": unterminated array");
        v.kind = ConfigValue::Kind::array;
        std::string body = tok.substr(1, tok.size() - 2);
        std::stringstream ss(body);
        std::string item;
        while (std::getline(ss, item, ',')) {
            item = trim(item);
            if (item.empty()) continue;
            v.arr.push_back(parse_number(item, line));
        }
        return v;
    }
    v.kind = ConfigValue::Kind::number;
    v.num = parse_number(tok, line);
    return v;
}

/// Flat "section.key" -> value map with strict syntax checking.
inline std::map<std::string, ConfigValue> parse_kv(const std::string& text) {
    std::map<std::string, ConfigValue> kv;
    std::istringstream in(text);
    std::string raw, section;
    int line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        std::string line = trim(strip_comment(raw));
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw ConfigError("config line " + std::to_string(line_no) + ": malformed section header");
            section = trim(line.substr(1, line.size() - 2));
            if (section.empty())
                throw ConfigError("config line " + std::to_string(line_no) + ": empty section name");
            continue;
        }
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
        std::string key = trim(line.substr(0, eq));
        if (key.empty())
            throw ConfigError("config line " + std::to_string(line_no) + ": empty key");
        const std::string full = section.empty() ? key : section + "." + key;
        if (kv.count(full))
            throw ConfigError("config line " + std::to_string(line_no) + ": duplicate key '" + full + "'");
        kv[full] = parse_value(line.substr(eq + 1), line_no);
    }
    return kv;
}

class KvReader {
public:
    explicit KvReader(std::map<std::string, ConfigValue> kv) : kv_(std::move(kv)) {}

    bool has(const std::string& key) const { return kv_.count(key) > 0; }

    double number(const std::string& key) {
        const ConfigValue& v = fetch(key);
        if (v.kind != ConfigValue::Kind::number)
            throw ConfigError("config: key '" + key + "' must be a number");
        return v.num;
    }

    double number_or(const std::string& key, double fallback, std::vector<std::string>& defaults) {
        if (!has(key)) {
            std::ostringstream os;
            os << key << "=" << fallback << " (default)";
            defaults.push_back(os.str());
            return fallback;
        }
        return number(key);
    }

    long long integer(const std::string& key) {
        const double v = number(key);
        const long long i = static_cast<long long>(v);
        if (static_cast<double>(i) != v)
            throw ConfigError("config: key '" + key + "' must be an integer");
        return i;
    }

    long long integer_or(const std::string& key, long long fallback, std::vector<std::string>& defaults) {
        if (!has(key)) {
            defaults.push_back(key + "=" + std::to_string(fallback) + " (default)");
            return fallback;
        }
        return integer(key);
    }

    std::string text(const std::string& key) {
        const ConfigValue& v = fetch(key);
        if (v.kind != ConfigValue::Kind::string)
            throw ConfigError("config: key '" + key + "' must be a quoted string");
        return v.str;
    }

    std::string text_or(const std::string& key, const std::string& fallback,
                        std::vector<std::string>& defaults) {
        if (!has(key)) {
            defaults.push_back(key + "=\"" + fallback + "\" (default)");
            return fallback;
        }
        return text(key);
    }

    Vec3 vec3(const std::string& key) {
        const ConfigValue& v = fetch(key);
        if (v.kind != ConfigValue::Kind::array || v.arr.size() != 3)
            throw ConfigError("config: key '" + key + "' must be an array [x, y, z]");
        return Vec3{v.arr[0], v.arr[1], v.arr[2]};
    }

    Vec3 vec3_or(const std::string& key, const Vec3& fallback, std::vector<std::string>& defaults) {
        if (!has(key)) {
            std::ostringstream os;
            os << key << "=[" << fallback.x << ", " << fallback.y << ", " << fallback.z << "] (default)";
            defaults.push_back(os.str());
            return fallback;
        }
        return vec3(key);
    }

    /// Every key must have been consumed; anything left is unknown.
    void reject_unknown() const {
        for (const auto& [key, value] : kv_)
            if (!used_.count(key))
                throw ConfigError("config line " + std::to_string(value.line) + ": unknown key '" + key + "'");
    }

private:
    const ConfigValue& fetch(const std::string& key) {
        auto it = kv_.find(key);
        if (it == kv_.end()) throw ConfigError("config: missing required key '" + key + "'");
        used_.insert(key);
        return it->second;
    }

    std::map<std::string, ConfigValue> kv_;
    std::set<std::string> used_;
};

}  // namespace detail

/// Parses a scenario description. Powers are accepted in dB/dBW and stored
/// linear; unknown keys are rejected. See presets/ for the file layout.
inline ResolvedConfig parse_config_text(const std::string& text) {
    detail::KvReader kv(detail::parse_kv(text));
    ResolvedConfig out;
    auto& defaults = out.defaults_applied;
    ScenarioConfig cfg;

    try {
        cfg.geom_bs = ArrayGeometry(static_cast<int>(kv.integer_or("arrays.bs_h", 2, defaults)),
                                    static_cast<int>(kv.integer_or("arrays.bs_v", 2, defaults)),
                                    kv.number_or("arrays.bs_spacing_h", 0.5, defaults),
                                    kv.number_or("arrays.bs_spacing_v", 0.5, defaults));
        cfg.geom_rs = ArrayGeometry(static_cast<int>(kv.integer_or("arrays.rs_h", 8, defaults)),
                                    static_cast<int>(kv.integer_or("arrays.rs_v", 8, defaults)),
                                    kv.number_or("arrays.rs_spacing_h", 0.5, defaults),
                                    kv.number_or("arrays.rs_spacing_v", 0.5, defaults));

        cfg.budget = LinkBudget(db_to_linear(kv.number("link.gain_bs_rs_db")),
                                db_to_linear(kv.number("link.gain_rs_ue_db")),
                                db_to_linear(kv.number("link.noise_dbw")),
                                db_to_linear(kv.number_or("link.tx_power_dbw", 0.0, defaults)));

        cfg.ofdm = OfdmNumerology(static_cast<int>(kv.integer("ofdm.subcarriers")),
                                  static_cast<int>(kv.integer("ofdm.cp_length")),
                                  kv.number("ofdm.subcarrier_spacing_hz"),
                                  static_cast<int>(kv.integer("ofdm.frame_symbols")));

        const double carrier = kv.number_or("mobility.carrier_hz", 3.5e9, defaults);
        if (kv.has("mobility.doppler_hz") && kv.has("mobility.speed_kmh"))
            throw ConfigError("config: give either mobility.doppler_hz or mobility.speed_kmh, not both");
        if (kv.has("mobility.doppler_hz")) {
            cfg.mob = MobilityModel(kv.number("mobility.doppler_hz"), carrier);
        } else {
            cfg.mob = MobilityModel::from_speed_kmh(kv.number_or("mobility.speed_kmh", 0.0, defaults), carrier);
        }

        const std::string model = kv.text_or("run.channel_model", "iid_rayleigh", defaults);
        if (model == "iid_rayleigh") {
            cfg.channel_model = ChannelModel::iid_rayleigh;
        } else if (model == "geometric") {
            cfg.channel_model = ChannelModel::geometric;
        } else {
            throw ConfigError("config: run.channel_model must be \"iid_rayleigh\" or \"geometric\"");
        }

        const std::string scheme = kv.text_or("run.scheme", "ncds", defaults);
        if (scheme == "ncds") {
            cfg.scheme = Scheme::ncds;
        } else if (scheme == "cds") {
            cfg.scheme = Scheme::cds;
        } else {
            throw ConfigError("config: run.scheme must be \"ncds\" or \"cds\"");
        }

        const std::string phase_mode = kv.text_or("run.phase_mode", "per_frame", defaults);
        if (phase_mode == "per_frame") {
            cfg.phase_mode = PhaseMode::per_frame;
        } else if (phase_mode == "per_symbol") {
            cfg.phase_mode = PhaseMode::per_symbol;
        } else {
            throw ConfigError("config: run.phase_mode must be \"per_frame\" or \"per_symbol\"");
        }

        cfg.order = static_cast<int>(kv.integer_or("run.order", 4, defaults));
        cfg.trials = static_cast<int>(kv.integer_or("run.trials", 100, defaults));
        cfg.master_seed = static_cast<std::uint64_t>(kv.integer_or("run.master_seed", 1, defaults));
        cfg.calibration = kv.number_or("run.calibration", 1.0, defaults);
        cfg.optimizer_sweeps = static_cast<int>(kv.integer_or("run.optimizer_sweeps", 5, defaults));
        cfg.min_errors = kv.integer_or("run.min_errors", 100, defaults);
        cfg.min_decisions = kv.integer_or("run.min_decisions", 10000, defaults);
        cfg.moment_draws = kv.integer_or("run.moment_draws", 1000000, defaults);

        if (cfg.channel_model == ChannelModel::geometric) {
            GeometricConfig g;
            g.bs_pos = kv.vec3_or("geometry.bs_pos", g.bs_pos, defaults);
            g.rs_pos = kv.vec3_or("geometry.rs_pos", g.rs_pos, defaults);
            g.ue_pos = kv.vec3_or("geometry.ue_pos", g.ue_pos, defaults);
            g.ue_motion_azimuth_deg = kv.number_or("geometry.ue_motion_azimuth_deg", 0.0, defaults);
            g.cluster_count = static_cast<int>(kv.integer_or("clusters.count", 20, defaults));
            g.delay_spread_s = kv.number("clusters.delay_spread_s");
            g.asd_deg = kv.number("clusters.asd_deg");
            g.asa_deg = kv.number("clusters.asa_deg");
            g.zsd_deg = kv.number("clusters.zsd_deg");
            g.zsa_deg = kv.number("clusters.zsa_deg");
            cfg.geometry = g;
        }

        kv.reject_unknown();
        cfg.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    out.scenario = cfg;
    return out;
}

inline ResolvedConfig parse_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str());
}

}  // namespace rislink

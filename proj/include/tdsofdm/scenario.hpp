#pragma once

// Scenario configuration: INI-style file with sections, unknown keys rejected.
// Relative channel profile paths resolve against the config file directory.

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <filesystem>
#include <set>

#include "tdsofdm/montecarlo.hpp"

namespace tdsofdm {

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class ResponseSource { Analytic, PnEstimate };

struct ScenarioConfig {
    FrameConfig frame;
    int span_symbols = SrrcSpec{}.span_symbols;
    /// As written in the file; "awgn" or a path.
    std::string channel = "awgn";
    ChannelProfile profile = ChannelProfile::awgn();
    std::vector<double> phases{0.0};
    std::vector<double> ebn0_db{10.0};
    std::optional<double> reference_ebn0_db;
    McBudget mc;
    std::uint64_t seed = 1;
    BerMode ber_mode = BerMode::PaperEq5;
    Equalizer equalizer = Equalizer::KnownResponse;
    /// Empty picks ideal for the known response and decision for PN estimates.
    std::optional<TailRecovery> tail_recovery;
    double str_loop_gain = 0.5;
    std::size_t str_frames = 40;
    bool with_str = true;
    bool with_oracle = true;
    ResponseSource responses = ResponseSource::Analytic;

    double reference() const { return reference_ebn0_db.value_or(ebn0_db.front()); }

    void validate() const {
        try {
            frame.validate();
            SrrcSpec{frame.alpha, span_symbols, frame.n_upsam}.validate();
        } catch (const std::invalid_argument& e) {
            throw ConfigError(e.what());
        }
        if (phases.empty()) throw ConfigError("at least one sampling phase is required");
        if (ebn0_db.empty()) throw ConfigError("sweep.ebn0_db is empty");
        if (!std::is_sorted(ebn0_db.begin(), ebn0_db.end())) throw ConfigError("sweep.ebn0_db must be sorted");
        if (mc.max_frames == 0) throw ConfigError("mc.max_frames must be positive");
        if (mc.frames_per_burst == 0 || mc.batch_bursts == 0) throw ConfigError("mc burst sizes must be positive");
        if (!(str_loop_gain > 0.0 && str_loop_gain <= 1.0)) throw ConfigError("str.loop_gain must be in (0,1]");
        if (str_frames < 1) throw ConfigError("str.frames must be positive");
        if ((equalizer == Equalizer::PnEstimate || responses == ResponseSource::PnEstimate) && !frame.dual_pn)
            throw ConfigError("PN estimation requires frame.dual_pn = true");
    }

    LinkSetup link() const {
        return LinkSetup::make(frame, span_symbols, profile, equalizer, tail_recovery);
    }
};

namespace detail {

template <typename T>
T parse_scalar(const std::string& key, const std::string& text) {
    std::istringstream in(text);
    T v{};
    if constexpr (std::is_same_v<T, bool>) {
        std::string w;
        in >> w;
        if (w == "true" || w == "1" || w == "yes") return true;
        if (w == "false" || w == "0" || w == "no") return false;
        throw ConfigError(key + ": expected a boolean, got '" + text + "'");
    } else {
        if (!(in >> v)) throw ConfigError(key + ": cannot parse '" + text + "'");
        std::string rest;
        if (in >> rest) throw ConfigError(key + ": trailing characters in '" + text + "'");
    }
    return v;
}

inline std::vector<double> parse_list(const std::string& key, const std::string& text) {
    std::vector<double> out;
    std::string item;
    std::istringstream in(text);
    while (std::getline(in, item, ',')) {
        const auto b = item.find_first_not_of(" \t");
        if (b == std::string::npos) continue;
        out.push_back(parse_scalar<double>(key, item.substr(b)));
    }
    if (out.empty()) throw ConfigError(key + ": empty list");
    return out;
}

/// "start:step:stop" inclusive range, or a comma list.
inline std::vector<double> parse_sweep(const std::string& key, const std::string& text) {
    if (text.find(':') == std::string::npos) return parse_list(key, text);
    std::vector<double> parts;
    std::string item;
    std::istringstream in(text);
    while (std::getline(in, item, ':')) parts.push_back(parse_scalar<double>(key, item));
    if (parts.size() != 3 || !(parts[1] > 0.0) || parts[2] < parts[0])
        throw ConfigError(key + ": range must be start:step:stop with step > 0");
    std::vector<double> out;
    const auto n = static_cast<std::size_t>(std::floor((parts[2] - parts[0]) / parts[1] + 1e-9));
    for (std::size_t i = 0; i <= n; ++i) out.push_back(parts[0] + static_cast<double>(i) * parts[1]);
    return out;
}

}  // namespace detail

inline ScenarioConfig parse_scenario(std::istream& in, const std::filesystem::path& base_dir = ".") {
    namespace pt = boost::property_tree;
    pt::ptree tree;
    try {
        pt::read_ini(in, tree);
    } catch (const pt::ini_parser_error& e) {
        throw ConfigError(e.what());
    }

    static const std::map<std::string, std::set<std::string>> schema{
        {"frame", {"n_fft", "pn_len", "dual_pn", "modulation", "n_upsam", "alpha", "pn_power_ratio"}},
        {"srrc", {"span"}},
        {"channel", {"profile"}},
        {"phase", {"epsilon", "grid_size"}},
        {"sweep", {"ebn0_db", "reference_ebn0_db"}},
        {"mc", {"min_bits", "min_errors", "max_frames", "frames_per_burst", "batch_bursts", "workers"}},
        {"run", {"seed", "ber_mode", "equalizer", "tail_recovery"}},
        {"str", {"loop_gain", "frames"}},
        {"criterion", {"with_str", "with_oracle", "responses"}},
    };
    for (const auto& [section, body] : tree) {
        auto it = schema.find(section);
        if (it == schema.end()) throw ConfigError("unknown section [" + section + "]");
        if (!body.data().empty()) throw ConfigError("key '" + section + "' must be inside a section");
        for (const auto& [key, _] : body)
            if (!it->second.contains(key)) throw ConfigError("unknown key " + section + "." + key);
    }

    ScenarioConfig c;
    auto get = [&](const std::string& path) -> std::optional<std::string> {
        if (auto v = tree.get_optional<std::string>(pt::ptree::path_type(path, '.'))) return *v;
        return std::nullopt;
    };
    auto num = [&]<typename T>(const std::string& path, T& dst) {
        if (auto v = get(path)) dst = detail::parse_scalar<T>(path, *v);
    };

    std::size_t n_upsam = static_cast<std::size_t>(c.frame.n_upsam);
    num("frame.n_fft", c.frame.n_fft);
    num("frame.pn_len", c.frame.pn_len);
    num("frame.dual_pn", c.frame.dual_pn);
    num("frame.n_upsam", n_upsam);
    c.frame.n_upsam = static_cast<int>(n_upsam);
    num("frame.alpha", c.frame.alpha);
    num("frame.pn_power_ratio", c.frame.pn_power_ratio);
    if (auto v = get("frame.modulation")) {
        try {
            c.frame.modulation = parse_modulation(*v);
        } catch (const std::invalid_argument& e) {
            throw ConfigError(e.what());
        }
    }
    num("srrc.span", c.span_symbols);

    if (auto v = get("channel.profile")) c.channel = *v;
    try {
        if (c.channel == "awgn") {
            c.profile = ChannelProfile::awgn();
        } else {
            std::filesystem::path p(c.channel);
            if (p.is_relative()) p = base_dir / p;
            c.profile = load_profile(p.string());
        }
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }

    const auto eps = get("phase.epsilon");
    const auto grid = get("phase.grid_size");
    if (eps && grid) throw ConfigError("phase.epsilon and phase.grid_size are mutually exclusive");
    if (eps) c.phases = detail::parse_list("phase.epsilon", *eps);
    if (grid) {
        std::size_t n = 0;
        num("phase.grid_size", n);
        if (n == 0) throw ConfigError("phase.grid_size must be positive");
        c.phases = PhaseGrid::uniform(n).phases();
    }

    if (auto v = get("sweep.ebn0_db")) c.ebn0_db = detail::parse_sweep("sweep.ebn0_db", *v);
    if (auto v = get("sweep.reference_ebn0_db")) c.reference_ebn0_db = detail::parse_scalar<double>("sweep.reference_ebn0_db", *v);

    num("mc.min_bits", c.mc.min_bits);
    num("mc.min_errors", c.mc.min_errors);
    num("mc.max_frames", c.mc.max_frames);
    num("mc.frames_per_burst", c.mc.frames_per_burst);
    num("mc.batch_bursts", c.mc.batch_bursts);
    num("mc.workers", c.mc.workers);

    num("run.seed", c.seed);
    try {
        if (auto v = get("run.ber_mode")) c.ber_mode = parse_ber_mode(*v);
        if (auto v = get("run.equalizer")) c.equalizer = parse_equalizer(*v);
        if (auto v = get("run.tail_recovery")) c.tail_recovery = parse_tail_recovery(*v);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }

    num("str.loop_gain", c.str_loop_gain);
    num("str.frames", c.str_frames);
    num("criterion.with_str", c.with_str);
    num("criterion.with_oracle", c.with_oracle);
    if (auto v = get("criterion.responses")) {
        if (*v == "analytic") c.responses = ResponseSource::Analytic;
        else if (*v == "pn_estimate") c.responses = ResponseSource::PnEstimate;
        else throw ConfigError("criterion.responses must be 'analytic' or 'pn_estimate'");
    }

    c.validate();
    return c;
}

inline ScenarioConfig load_scenario(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open config '" + path.string() + "'");
    return parse_scenario(f, path.parent_path().empty() ? std::filesystem::path(".") : path.parent_path());
}

}  // namespace tdsofdm

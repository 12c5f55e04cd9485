#include "recur/scenarios.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>

#include "recur/csv.hpp"
#include "recur/errors.hpp"

namespace recur {

namespace {

std::vector<ScenarioLibraryEntry> build_library() {
    std::vector<ScenarioLibraryEntry> lib;
    const char* het_names[] = {"homo", "hetero1", "hetero2"};
    const double phis[] = {0.0, 0.15, 1.0};
    for (Setup setup : {Setup::S1, Setup::S2}) {
        for (int effect = 0; effect < 2; ++effect) {
            for (int h = 0; h < 3; ++h) {
                ScenarioConfig c;
                c.setup = setup;
                c.effect = effect ? 0.7 : 1.0;
                c.phi = phis[h];
                c.name = std::string(setup == Setup::S1 ? "S1" : "S2") + "/PPMS/" + (effect ? "effect" : "noeffect") +
                         "/" + het_names[h];
                lib.push_back({c.name, c});
            }
        }
    }
    return lib;
}

std::string trim(const std::string& s) {
    auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::string upper(std::string s) {
    for (auto& ch : s) ch = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
    return s;
}

[[noreturn]] void bad(const std::string& key, const std::string& value) {
    throw Error(ErrorCode::BAD_INPUT, "invalid value '" + value + "' for " + key);
}

double to_double(const std::string& key, const std::string& v) {
    double x = 0.0;
    auto res = std::from_chars(v.data(), v.data() + v.size(), x);
    if (res.ec != std::errc() || res.ptr != v.data() + v.size()) bad(key, v);
    return x;
}

int to_int(const std::string& key, const std::string& v) {
    int x = 0;
    auto res = std::from_chars(v.data(), v.data() + v.size(), x);
    if (res.ec != std::errc() || res.ptr != v.data() + v.size()) bad(key, v);
    return x;
}

}  // namespace

const std::vector<ScenarioLibraryEntry>& scenario_library() {
    static const std::vector<ScenarioLibraryEntry> lib = build_library();
    return lib;
}

std::optional<ScenarioConfig> find_scenario(const std::string& name) {
    for (const auto& e : scenario_library()) {
        if (e.name == name) return e.config;
    }
    return std::nullopt;
}

void set_config_value(ScenarioConfig& c, const std::string& key, const std::string& value) {
    const std::string u = upper(value);
    if (key == "scenario") {
        auto base = find_scenario(value);
        if (!base) throw Error(ErrorCode::BAD_INPUT, "unknown scenario " + value);
        c = *base;
    } else if (key == "name") {
        c.name = value;
    } else if (key == "setup") {
        if (u == "S1") c.setup = Setup::S1;
        else if (u == "S2") c.setup = Setup::S2;
        else bad(key, value);
    } else if (key == "n") {
        c.n = to_int(key, value);
    } else if (key == "effect") {
        c.effect = to_double(key, value);
    } else if (key == "phi") {
        c.phi = to_double(key, value);
    } else if (key == "lambda") {
        c.lambda = to_double(key, value);
    } else if (key == "end_recruit") {
        c.end_recruit = to_double(key, value);
    } else if (key == "design") {
        if (u == "EVENT_DRIVEN") c.design = TrialDesign::EVENT_DRIVEN;
        else if (u == "TIME_FIXED") c.design = TrialDesign::TIME_FIXED;
        else bad(key, value);
    } else if (key == "n_first_events") {
        c.n_first_events = to_int(key, value);
    } else if (key == "fixed_horizon") {
        c.fixed_horizon = to_double(key, value);
    } else if (key == "eta") {
        c.eta = to_double(key, value);
    } else if (key == "nu") {
        c.nu = to_double(key, value);
    } else if (key == "heterogeneity") {
        if (u == "U1") c.heterogeneity = Heterogeneity::U1;
        else if (u == "U2") c.heterogeneity = Heterogeneity::U2;
        else bad(key, value);
    } else if (key == "endpoint.timing") {
        if (u == "ONSET") c.endpoint.timing = EventTiming::ONSET;
        else if (u == "CONFIRMATION") c.endpoint.timing = EventTiming::CONFIRMATION;
        else bad(key, value);
    } else if (key == "endpoint.confirm_weeks") {
        c.endpoint.confirm_weeks = to_int(key, value);
        if (c.endpoint.confirm_weeks != 12 && c.endpoint.confirm_weeks != 24) bad(key, value);
    } else if (key == "endpoint.reference") {
        if (u == "FIXED") c.endpoint.reference = Reference::FIXED;
        else if (u == "ROVING") c.endpoint.reference = Reference::ROVING;
        else bad(key, value);
    } else if (key == "endpoint.roving_weeks") {
        c.endpoint.roving_weeks = to_int(key, value);
        if (c.endpoint.roving_weeks != 12 && c.endpoint.roving_weeks != 24) bad(key, value);
    } else if (key == "dropout_cap") {
        c.dropout_cap = to_double(key, value);
    } else if (key == "visit_spacing") {
        c.visit_spacing = to_int(key, value);
    } else if (key == "noise_df") {
        c.noise_df = to_double(key, value);
    } else if (key == "noise_ncp") {
        c.noise_ncp = to_double(key, value);
    } else if (key == "noise_clamp") {
        c.noise_clamp = to_int(key, value);
    } else {
        throw Error(ErrorCode::BAD_INPUT, "unknown config key " + key);
    }
}

ScenarioConfig parse_config(std::istream& in) {
    ScenarioConfig c;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw Error(ErrorCode::BAD_INPUT, "line " + std::to_string(lineno) + ": expected key = value");
        }
        set_config_value(c, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    c.validate();
    return c;
}

ScenarioConfig parse_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::BAD_INPUT, "cannot open " + path);
    return parse_config(in);
}

std::string echo_config(const ScenarioConfig& c) {
    std::ostringstream o;
    auto kv = [&](const char* k, const std::string& v) { o << k << " = " << v << '\n'; };
    kv("name", c.name);
    kv("setup", c.setup == Setup::S1 ? "S1" : "S2");
    kv("n", std::to_string(c.n));
    kv("effect", csv::num(c.effect));
    kv("phi", csv::num(c.phi));
    kv("lambda", csv::num(c.lambda));
    kv("end_recruit", csv::num(c.end_recruit));
    kv("design", c.design == TrialDesign::EVENT_DRIVEN ? "EVENT_DRIVEN" : "TIME_FIXED");
    kv("n_first_events", std::to_string(c.n_first_events));
    kv("fixed_horizon", csv::num(c.fixed_horizon));
    kv("eta", csv::num(c.eta));
    kv("nu", csv::num(c.nu));
    kv("heterogeneity", c.heterogeneity == Heterogeneity::U1 ? "U1" : "U2");
    kv("endpoint.timing", c.endpoint.timing == EventTiming::ONSET ? "ONSET" : "CONFIRMATION");
    kv("endpoint.confirm_weeks", std::to_string(c.endpoint.confirm_weeks));
    kv("endpoint.reference", c.endpoint.reference == Reference::FIXED ? "FIXED" : "ROVING");
    kv("endpoint.roving_weeks", std::to_string(c.endpoint.roving_weeks));
    kv("dropout_cap", csv::num(c.dropout_cap));
    kv("visit_spacing", std::to_string(c.visit_spacing));
    kv("noise_df", csv::num(c.noise_df));
    kv("noise_ncp", csv::num(c.noise_ncp));
    kv("noise_clamp", std::to_string(c.noise_clamp));
    return o.str();
}

}  // namespace recur

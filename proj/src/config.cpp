#include "finsrag/config.hpp"

#include <charconv>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace finsrag {

namespace {

std::string trim(std::string_view s) {
    size_t b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    size_t e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

struct Parser {
    std::string path;
    size_t line_no = 0;

    [[noreturn]] void fail(const std::string& what) const {
        throw ConfigError(path + ":" + std::to_string(line_no) + ": " + what);
    }

    double num(const std::string& v) const {
        try {
            size_t used = 0;
            double d = std::stod(v, &used);
            if (used != v.size()) fail("trailing characters after number '" + v + "'");
            return d;
        } catch (const ConfigError&) {
            throw;
        } catch (const std::exception&) {
            fail("expected a number, got '" + v + "'");
        }
    }

    long long integer(const std::string& v) const {
        long long out = 0;
        auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
        if (ec != std::errc() || p != v.data() + v.size())
            fail("expected an integer, got '" + v + "'");
        return out;
    }

    uint64_t unsigned64(const std::string& v) const {
        uint64_t out = 0;
        auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
        if (ec != std::errc() || p != v.data() + v.size())
            fail("expected a non-negative integer, got '" + v + "'");
        return out;
    }

    std::vector<int> int_list(const std::string& v) const {
        std::vector<int> out;
        std::stringstream ss(v);
        std::string part;
        while (std::getline(ss, part, ',')) {
            part = trim(part);
            if (part.empty()) fail("empty entry in list '" + v + "'");
            out.push_back(int(integer(part)));
        }
        return out;
    }

    // name:weight pairs, comma-separated
    std::map<std::string, double> weight_map(const std::string& v) const {
        std::map<std::string, double> out;
        std::stringstream ss(v);
        std::string part;
        while (std::getline(ss, part, ',')) {
            part = trim(part);
            if (part.empty()) fail("empty entry in weights '" + v + "'");
            size_t colon = part.find(':');
            if (colon == std::string::npos) fail("weights entries are name:value, got '" + part + "'");
            std::string name = trim(part.substr(0, colon));
            if (name.empty()) fail("empty indicator name in weights");
            if (out.count(name)) fail("duplicate weight for '" + name + "'");
            out[name] = num(trim(part.substr(colon + 1)));
        }
        return out;
    }

    Date date(const std::string& v) const {
        try {
            return parse_date(v);
        } catch (const std::exception& e) {
            fail(e.what());
        }
    }
};

std::string resolve(const std::filesystem::path& base, const std::string& value) {
    if (value.empty()) return value;
    std::filesystem::path p(value);
    if (p.is_absolute()) return p.lexically_normal().string();
    return (base / p).lexically_normal().string();
}

}  // namespace

EngineConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    std::filesystem::path base = std::filesystem::path(path).parent_path();

    EngineConfig cfg;
    Parser p{path, 0};
    std::string section;
    std::string raw;
    while (std::getline(in, raw)) {
        ++p.line_no;
        std::string line = trim(raw);
        if (line.empty() || line[0] == '#' || line[0] == ';') continue;
        if (line.front() == '[') {
            if (line.back() != ']') p.fail("unterminated section header");
            section = trim(line.substr(1, line.size() - 2));
            if (section != "data" && section != "indicators" && section != "scoring" &&
                section != "train" && section != "retrieve" && section != "forecaster" &&
                section != "embedder" && section != "mi" && section != "prompts" &&
                section != "synthetic_market" && section != "run")
                p.fail("unknown section [" + section + "]");
            continue;
        }
        size_t eq = line.find('=');
        if (eq == std::string::npos) p.fail("expected key = value");
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        if (key.empty()) p.fail("empty key");
        if (section.empty()) p.fail("key '" + key + "' appears before any section");

        auto unknown = [&]() -> void { p.fail("unknown key '" + key + "' in [" + section + "]"); };

        if (section == "data") {
            if (key == "bars") cfg.bars_path = resolve(base, value);
            else if (key == "partition") cfg.partition_path = resolve(base, value);
            else if (key == "out_dir") cfg.out_dir = resolve(base, value);
            else unknown();
        } else if (section == "indicators") {
            auto& ip = cfg.indicators;
            if (key == "macd_fast") ip.macd_fast = int(p.integer(value));
            else if (key == "macd_slow") ip.macd_slow = int(p.integer(value));
            else if (key == "macd_signal") ip.macd_signal = int(p.integer(value));
            else if (key == "boll_window") ip.boll_window = int(p.integer(value));
            else if (key == "boll_width") ip.boll_width = p.num(value);
            else if (key == "kdj_window") ip.kdj_window = int(p.integer(value));
            else if (key == "kdj_seed") ip.kdj_seed = p.num(value);
            else if (key == "overbought_k") ip.overbought_k = p.num(value);
            else if (key == "overbought_d") ip.overbought_d = p.num(value);
            else if (key == "overbought_j") ip.overbought_j = p.num(value);
            else if (key == "oversold_k") ip.oversold_k = p.num(value);
            else if (key == "oversold_d") ip.oversold_d = p.num(value);
            else if (key == "oversold_j") ip.oversold_j = p.num(value);
            else if (key == "smr_window") ip.smr_window = int(p.integer(value));
            else if (key == "mom_window") ip.mom_window = int(p.integer(value));
            else unknown();
        } else if (section == "scoring") {
            if (key == "budget") cfg.scoring_budget = size_t(p.unsigned64(value));
            else if (key == "max_in_flight") cfg.max_in_flight = size_t(p.unsigned64(value));
            else if (key == "alpha") cfg.alpha = p.num(value);
            else unknown();
        } else if (section == "train") {
            if (key == "tau") cfg.train.tau = p.num(value);
            else if (key == "learn_rate") cfg.train.learn_rate = p.num(value);
            else if (key == "batch_size") cfg.train.batch_size = int(p.integer(value));
            else if (key == "epochs") cfg.train.epochs = int(p.integer(value));
            else if (key == "hidden") cfg.net.hidden = p.int_list(value);
            else if (key == "output_dim") cfg.net.output_dim = int(p.integer(value));
            else unknown();
        } else if (section == "retrieve") {
            if (key == "k") cfg.k = size_t(p.unsigned64(value));
            else unknown();
        } else if (section == "forecaster") {
            if (key == "kind") cfg.forecaster_kind = value;
            else if (key == "url") cfg.forecaster_url = value;
            else if (key == "auth_header") cfg.auth_header = value;
            else if (key == "auth_env") cfg.auth_env = value;
            else if (key == "timeout_sec") cfg.timeout_sec = p.num(value);
            else if (key == "max_retries") cfg.max_retries = int(p.integer(value));
            else if (key == "backoff_ms") cfg.backoff_ms = int(p.integer(value));
            else if (key == "weights") cfg.synthetic_rule.indicator_weights = p.weight_map(value);
            else if (key == "intercept") cfg.synthetic_rule.intercept = p.num(value);
            else if (key == "noise_sigma") cfg.synthetic_rule.noise_sigma = p.num(value);
            else unknown();
        } else if (section == "embedder") {
            if (key == "url") cfg.embedder_url = value;
            else unknown();
        } else if (section == "mi") {
            if (key == "estimator") {
                if (value == "binned") cfg.mi.estimator = MiConfig::Estimator::binned;
                else if (value == "knn") cfg.mi.estimator = MiConfig::Estimator::knn;
                else p.fail("estimator must be binned or knn, got '" + value + "'");
            } else if (key == "bins") cfg.mi.bins = int(p.integer(value));
            else if (key == "knn_k") cfg.mi.k = int(p.integer(value));
            else if (key == "top") cfg.mi_top = size_t(p.unsigned64(value));
            else unknown();
        } else if (section == "prompts") {
            if (key == "rag_template") cfg.rag_template_path = resolve(base, value);
            else if (key == "bare_template") cfg.bare_template_path = resolve(base, value);
            else unknown();
        } else if (section == "synthetic_market") {
            if (key == "stocks") cfg.synth_stocks = int(p.integer(value));
            else if (key == "days") cfg.synth_days = int(p.integer(value));
            else if (key == "start") cfg.synth_start = p.date(value);
            else unknown();
        } else {  // run
            if (key == "seed") cfg.seed = p.unsigned64(value);
            else unknown();
        }
    }

    // Cross-field validation, after the whole file so order does not matter.
    auto bad = [&](const std::string& what) -> void { throw ConfigError(path + ": " + what); };
    const auto& ip = cfg.indicators;
    if (ip.macd_fast < 1 || ip.macd_slow < 2 || ip.macd_signal < 1) bad("macd windows must be positive (slow at least 2)");
    if (ip.macd_fast >= ip.macd_slow) bad("macd_fast must be smaller than macd_slow");
    if (ip.boll_window < 2) bad("boll_window must be at least 2");
    if (!(ip.boll_width > 0)) bad("boll_width must be positive");
    if (ip.kdj_window < 1) bad("kdj_window must be at least 1");
    if (ip.smr_window < 1 || ip.mom_window < 1) bad("smr/mom windows must be positive");
    if (cfg.scoring_budget < 1) bad("scoring budget must be at least 1");
    if (!(cfg.alpha > 0)) bad("alpha must be positive");
    if (!(cfg.train.tau > 0)) bad("tau must be positive");
    if (!(cfg.train.learn_rate > 0)) bad("learn_rate must be positive");
    if (cfg.train.batch_size < 1) bad("batch_size must be at least 1");
    if (cfg.train.epochs < 0) bad("epochs must be non-negative");
    for (int h : cfg.net.hidden)
        if (h < 1) bad("hidden layer widths must be positive");
    if (cfg.net.output_dim < 1) bad("output_dim must be positive");
    if (cfg.forecaster_kind != "synthetic" && cfg.forecaster_kind != "remote")
        bad("forecaster kind must be synthetic or remote");
    if (cfg.forecaster_kind == "remote" && cfg.forecaster_url.empty())
        bad("remote forecaster needs a url");
    for (const auto& [name, w] : cfg.synthetic_rule.indicator_weights) {
        if (column_index(name) < 0) bad("unknown indicator '" + name + "' in forecaster weights");
        (void)w;
    }
    if (cfg.synthetic_rule.noise_sigma < 0) bad("noise_sigma must be non-negative");
    if (!(cfg.timeout_sec > 0)) bad("timeout_sec must be positive");
    if (cfg.max_retries < 0) bad("max_retries must be non-negative");
    if (cfg.backoff_ms < 0) bad("backoff_ms must be non-negative");
    if (cfg.mi.bins < 2) bad("mi bins must be at least 2");
    if (cfg.mi.k < 1) bad("mi knn_k must be at least 1");
    if (cfg.mi_top < 1) bad("mi top must be at least 1");
    if (cfg.synth_stocks < 1) bad("synthetic market needs at least 1 stock");
    if (cfg.synth_days < 10) bad("synthetic market needs at least 10 days");
    for (const auto& [key, file] : {std::pair<const char*, const std::string&>{"bars", cfg.bars_path},
                                    {"partition", cfg.partition_path},
                                    {"rag_template", cfg.rag_template_path},
                                    {"bare_template", cfg.bare_template_path}})
        if (!file.empty() && !std::filesystem::exists(file))
            bad(std::string(key) + " path does not exist: " + file);

    cfg.train.alpha = cfg.alpha;
    cfg.train.seed = cfg.seed;
    cfg.net.seed = cfg.seed;
    cfg.synthetic_rule.seed = cfg.seed;
    return cfg;
}

const std::string& default_rag_template() {
    static const std::string tmpl =
        "Predict the next movement (rise or fall) for the query stock.\n"
        "Reference sequences, most relevant first:\n"
        "{candidates}\n"
        "Query:\n"
        "{query}\n"
        "Answer with rise or fall.\n";
    return tmpl;
}

const std::string& default_bare_template() {
    static const std::string tmpl =
        "Predict the next movement (rise or fall) for the query stock.\n"
        "Query:\n"
        "{query}\n"
        "Answer with rise or fall.\n";
    return tmpl;
}

}  // namespace finsrag

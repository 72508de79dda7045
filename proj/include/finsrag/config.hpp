#pragma once
// Engine configuration: a sectioned key/value file in which every tunable
// constant is visible, with strict validation so typos fail loudly.

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "finsrag/evaluation.hpp"
#include "finsrag/indicators.hpp"

namespace finsrag {

inline constexpr const char* kToolVersion = "finsrag 0.1.0";

// Configuration problems exit with status 3 at the CLI.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct EngineConfig {
    // [data] paths resolve relative to the config file's directory.
    std::string bars_path;       // raw CSV for `ingest`; optional otherwise
    std::string partition_path;  // split spec; empty = <out_dir>/partition.json
    std::string out_dir = "out";

    IndicatorParams indicators;

    // [scoring]
    size_t scoring_budget = 64;  // candidates scored per training query
    size_t max_in_flight = 1;    // concurrent forecaster calls
    double alpha = 0.05;         // teacher softmax temperature

    // [train]
    TrainConfig train;
    EmbedderConfig net;

    // [retrieve]
    size_t k = 5;

    // [forecaster]
    std::string forecaster_kind = "synthetic";  // synthetic | remote
    std::string forecaster_url;
    std::string auth_header;
    std::string auth_env;  // environment variable holding the token
    double timeout_sec = 30.0;
    int max_retries = 3;
    int backoff_ms = 250;
    SyntheticForecaster::Rule synthetic_rule;  // seed filled from [run] seed

    // [embedder] optional remote embedding endpoint; empty = local encoder
    std::string embedder_url;

    // [mi]
    MiConfig mi;
    size_t mi_top = 18;

    // [prompts] template paths; empty = built-in defaults
    std::string rag_template_path;
    std::string bare_template_path;

    // [synthetic_market]
    int synth_stocks = 10;
    int synth_days = 500;
    Date synth_start{2014, 1, 2};

    // [run] the single seed every derived stream hangs off
    uint64_t seed = 0;
};

// Parses and validates; throws ConfigError with the offending line. The
// returned train/net/rule seeds are already set from [run] seed.
EngineConfig load_config(const std::string& path);

// Built-in prompt templates, used when [prompts] gives no override.
const std::string& default_rag_template();
const std::string& default_bare_template();

}  // namespace finsrag

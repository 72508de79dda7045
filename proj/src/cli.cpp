#include "finsrag/cli.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <span>

#include "finsrag/baselines.hpp"
#include "finsrag/config.hpp"
#include "finsrag/evaluation.hpp"
#include "finsrag/hash.hpp"
#include "finsrag/http_client.hpp"
#include "finsrag/indicators.hpp"
#include "finsrag/market_data.hpp"
#include "finsrag/retriever.hpp"
#include "finsrag/scorer.hpp"
#include "finsrag/sequence.hpp"
#include "finsrag/synthetic.hpp"

namespace finsrag {

namespace {

namespace fs = std::filesystem;
using json = nlohmann::json;           // sorted keys; manifest and reports
using ojson = nlohmann::ordered_json;  // summary lines keep insertion order

struct Ctx {
    EngineConfig cfg;
    std::string config_path;
    std::string config_hash;
    fs::path out;
};

// ─── artifact bookkeeping ───

std::string producer_hint(const std::string& name) {
    if (name == "bars.csv") return "ingest` or `finsrag synth";
    if (name == "partition.json") return "synth";
    if (name == "features.jsonl") return "features";
    if (name == "pool.jsonl") return "pool";
    if (name.rfind("queries_", 0) == 0) return "queries";
    if (name == "examples.jsonl") return "score";
    if (name == "params.bin" || name == "cache.bin") return "train";
    return "the producing command";
}

fs::path need_artifact(const Ctx& ctx, const std::string& name) {
    fs::path p = ctx.out / name;
    if (!fs::exists(p))
        throw std::runtime_error(p.string() + " is missing; run `finsrag " +
                                 producer_hint(name) + "` first");
    return p;
}

std::ifstream open_artifact(const Ctx& ctx, const std::string& name) {
    fs::path p = need_artifact(ctx, name);
    std::ifstream in(p, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + p.string());
    return in;
}

json load_manifest(const Ctx& ctx) {
    fs::path p = ctx.out / "manifest.json";
    if (!fs::exists(p)) return json{{"artifacts", json::object()}};
    std::ifstream in(p);
    json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw ConfigError(p.string() + " is unreadable (" + e.what() +
                          "); delete it and rebuild the artifacts");
    }
    if (!j.is_object() || !j.contains("artifacts") || !j["artifacts"].is_object())
        throw ConfigError(p.string() + " is malformed; delete it and rebuild the artifacts");
    return j;
}

void save_manifest(const Ctx& ctx, const json& manifest) {
    std::ofstream out(ctx.out / "manifest.json", std::ios::binary);
    out << manifest.dump(2) << '\n';
    if (!out) throw std::runtime_error("cannot write " + (ctx.out / "manifest.json").string());
}

json input_hashes(const Ctx& ctx, std::initializer_list<std::string> names) {
    json j = json::object();
    for (const auto& n : names) j[n] = hex64(hash_file((ctx.out / n).string()));
    return j;
}

// Manifest entry for a file already sitting in the output directory.
void record_artifact(Ctx& ctx, json& manifest, const std::string& name, json inputs,
                     json extra = json::object()) {
    json e;
    e["config"] = ctx.config_hash;
    e["inputs"] = std::move(inputs);
    e["output"] = hex64(hash_file((ctx.out / name).string()));
    e["seed"] = ctx.cfg.seed;
    e["tool"] = kToolVersion;
    for (auto& [k, v] : extra.items()) e[k] = v;
    manifest["artifacts"][name] = std::move(e);
}

template <class Writer>
void write_artifact(Ctx& ctx, json& manifest, const std::string& name, json inputs,
                    Writer&& writer, json extra = json::object()) {
    fs::path p = ctx.out / name;
    {
        std::ofstream out(p, std::ios::binary);
        if (!out) throw std::runtime_error("cannot write " + p.string());
        writer(out);
        if (!out) throw std::runtime_error("write to " + p.string() + " failed");
    }
    record_artifact(ctx, manifest, name, std::move(inputs), std::move(extra));
}

// Staleness gate used by `evaluate`: the artifact must match its manifest
// entry, the entry must come from the current config, and every recorded
// input that is itself a managed artifact must still be the recorded version.
void verify_artifact(const Ctx& ctx, const json& manifest, const std::string& name) {
    const json& arts = manifest.at("artifacts");
    if (!arts.contains(name))
        throw ConfigError(name + " has no manifest entry; run `finsrag " + producer_hint(name) +
                          "` (or pass --force)");
    const json& e = arts.at(name);
    std::string current = hex64(hash_file(need_artifact(ctx, name).string()));
    if (e.value("output", "") != current)
        throw ConfigError(name + " does not match its manifest entry; rebuild it with `finsrag " +
                          producer_hint(name) + "` (or pass --force)");
    if (e.value("config", "") != ctx.config_hash)
        throw ConfigError(name + " was built under a different config; rebuild it (or pass --force)");
    if (e.contains("inputs"))
        for (const auto& [in_name, in_hash] : e.at("inputs").items())
            if (arts.contains(in_name) && arts.at(in_name).value("output", "") != in_hash)
                throw ConfigError(name + " was built from an outdated " + in_name +
                                  "; rebuild it (or pass --force)");
}

// ─── shared loaders ───

FeatureTable load_features(const Ctx& ctx) {
    std::ifstream in = open_artifact(ctx, "features.jsonl");
    return read_datastore(in);
}

CandidatePool load_pool(const Ctx& ctx, const json& manifest) {
    std::ifstream in = open_artifact(ctx, "pool.jsonl");
    const json& arts = manifest.at("artifacts");
    if (!arts.contains("pool.jsonl") || !arts.at("pool.jsonl").contains("dataset_start") ||
        !arts.at("pool.jsonl").contains("high_water"))
        throw ConfigError(
            "pool.jsonl has no manifest entry carrying dataset_start/high_water; "
            "rebuild it with `finsrag pool`");
    const json& e = arts.at("pool.jsonl");
    return read_pool(in, parse_date(e.at("dataset_start").get<std::string>()),
                     parse_date(e.at("high_water").get<std::string>()));
}

std::vector<Query> load_queries(const Ctx& ctx, const std::string& split) {
    std::ifstream in = open_artifact(ctx, "queries_" + split + ".jsonl");
    return read_queries(in);
}

EmbedderParams load_params(const Ctx& ctx) {
    std::ifstream in = open_artifact(ctx, "params.bin");
    return read_params(in);
}

std::string slurp_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string effective_rag_template(const Ctx& ctx) {
    if (!ctx.cfg.rag_template_path.empty()) return slurp_file(ctx.cfg.rag_template_path);
    return default_rag_template();
}

std::string effective_bare_template(const Ctx& ctx) {
    if (!ctx.cfg.bare_template_path.empty()) return slurp_file(ctx.cfg.bare_template_path);
    return default_bare_template();
}

// Partition spec: an explicit [data] partition path wins, otherwise the
// generated partition.json in the output directory.
std::pair<PartitionSpec, std::pair<std::string, std::string>> load_partition(const Ctx& ctx) {
    if (!ctx.cfg.partition_path.empty()) {
        PartitionSpec spec = load_partition_spec(ctx.cfg.partition_path);
        return {spec, {"partition", hex64(hash_file(ctx.cfg.partition_path))}};
    }
    fs::path p = ctx.out / "partition.json";
    if (!fs::exists(p))
        throw ConfigError(
            "no partition spec: set [data] partition or generate one with `finsrag synth`");
    PartitionSpec spec = load_partition_spec(p.string());
    return {spec, {"partition.json", hex64(hash_file(p.string()))}};
}

struct ForecasterBundle {
    std::unique_ptr<Forecaster> forecaster;
    bool used_features = false;  // synthetic forecasters read features.jsonl for labels
};

ForecasterBundle make_forecaster(const Ctx& ctx) {
    if (ctx.cfg.forecaster_kind == "synthetic") {
        FeatureTable table = load_features(ctx);
        return {std::make_unique<SyntheticForecaster>(labels_from_features(table),
                                                      ctx.cfg.synthetic_rule),
                true};
    }
    HttpEndpoint ep = parse_endpoint(ctx.cfg.forecaster_url);
    ep.timeout_sec = ctx.cfg.timeout_sec;
    ep.max_retries = ctx.cfg.max_retries;
    ep.backoff_ms = ctx.cfg.backoff_ms;
    if (!ctx.cfg.auth_env.empty()) {
        const char* v = std::getenv(ctx.cfg.auth_env.c_str());
        if (!v || !*v)
            throw ConfigError("environment variable " + ctx.cfg.auth_env +
                              " (forecaster auth token) is not set");
        ep.auth_header = ctx.cfg.auth_header.empty() ? "Authorization" : ctx.cfg.auth_header;
        ep.auth_value = v;
    }
    return {std::make_unique<RemoteForecaster>(ep), false};
}

std::vector<Date> union_calendar(const FeatureTable& table) {
    std::vector<Date> days;
    for (const auto& s : table.stocks) days.insert(days.end(), s.dates.begin(), s.dates.end());
    std::sort(days.begin(), days.end());
    days.erase(std::unique(days.begin(), days.end()), days.end());
    return days;
}

void print_summary(const ojson& j) { std::cout << j.dump() << '\n'; }

// ─── subcommands ───

int cmd_ingest(Ctx& ctx) {
    if (ctx.cfg.bars_path.empty())
        throw ConfigError("config sets no [data] bars path; nothing to ingest");
    BarTable table = ingest_bars_file(ctx.cfg.bars_path, &std::cerr);
    json manifest = load_manifest(ctx);
    json inputs = json::object();
    inputs["bars"] = hex64(hash_file(ctx.cfg.bars_path));
    write_artifact(ctx, manifest, "bars.csv", std::move(inputs),
                   [&](std::ostream& out) { write_bars_csv(table, out); });
    save_manifest(ctx, manifest);
    print_summary({{"command", "ingest"},
                   {"status", "ok"},
                   {"stocks", table.stocks.size()},
                   {"bars", table.total_bars()},
                   {"first", format_date(table.first_date())},
                   {"last", format_date(table.last_date())},
                   {"out", "bars.csv"}});
    return 0;
}

int cmd_synth(Ctx& ctx) {
    SyntheticMarketSpec spec{ctx.cfg.synth_stocks, ctx.cfg.synth_days, ctx.cfg.synth_start,
                             ctx.cfg.seed};
    BarTable table = generate_synthetic_market(spec);
    PartitionSpec split = synthetic_partition(table);
    json manifest = load_manifest(ctx);
    write_artifact(ctx, manifest, "bars.csv", json::object(),
                   [&](std::ostream& out) { write_bars_csv(table, out); });
    write_artifact(ctx, manifest, "partition.json", json::object(), [&](std::ostream& out) {
        json j;
        for (const auto& [name, tickers] : split.splits) j[name] = tickers;
        out << j.dump(2) << '\n';
    });
    save_manifest(ctx, manifest);
    print_summary({{"command", "synth"},
                   {"status", "ok"},
                   {"stocks", table.stocks.size()},
                   {"days", ctx.cfg.synth_days},
                   {"first", format_date(table.first_date())},
                   {"last", format_date(table.last_date())},
                   {"out", "bars.csv"}});
    return 0;
}

int cmd_features(Ctx& ctx) {
    std::ifstream in = open_artifact(ctx, "bars.csv");
    BarTable bars = ingest_bars(in, &std::cerr);
    FeatureTable table = build_feature_table(bars, ctx.cfg.indicators, &std::cerr);
    json manifest = load_manifest(ctx);
    write_artifact(ctx, manifest, "features.jsonl", input_hashes(ctx, {"bars.csv"}),
                   [&](std::ostream& out) { write_datastore(table, out); });
    save_manifest(ctx, manifest);
    size_t rows = 0;
    for (const auto& s : table.stocks) rows += s.size();
    print_summary({{"command", "features"},
                   {"status", "ok"},
                   {"stocks", table.stocks.size()},
                   {"rows", rows},
                   {"columns", kNumColumns},
                   {"out", "features.jsonl"}});
    return 0;
}

int cmd_pool(Ctx& ctx, const std::string& as_of_str, int advance) {
    FeatureTable table = load_features(ctx);
    json manifest = load_manifest(ctx);
    CandidatePool pool;
    size_t appended = 0;
    if (advance > 0) {
        pool = load_pool(ctx, manifest);
        size_t before = pool.items.size();
        std::vector<Date> days = union_calendar(table);
        for (int i = 0; i < advance; ++i) {
            auto it = std::upper_bound(days.begin(), days.end(), pool.high_water);
            if (it == days.end())
                throw std::runtime_error(
                    "pool already covers every trading day in features.jsonl (high water " +
                    format_date(pool.high_water) + "); ingest newer bars first");
            advance_pool(pool, table, *it);
        }
        appended = pool.items.size() - before;
    } else {
        Date as_of = as_of_str.empty() ? table.last_date() : parse_date(as_of_str);
        pool = build_pool(table, as_of, table.first_date());
    }
    json extra = json::object();
    extra["dataset_start"] = format_date(pool.dataset_start);
    extra["high_water"] = format_date(pool.high_water);
    write_artifact(
        ctx, manifest, "pool.jsonl", input_hashes(ctx, {"features.jsonl"}),
        [&](std::ostream& out) { write_pool(pool, out); }, std::move(extra));
    save_manifest(ctx, manifest);
    ojson summary{{"command", "pool"},
                  {"status", "ok"},
                  {"candidates", pool.items.size()},
                  {"dataset_start", format_date(pool.dataset_start)},
                  {"high_water", format_date(pool.high_water)},
                  {"out", "pool.jsonl"}};
    if (advance > 0) {
        summary["advanced_days"] = advance;
        summary["appended"] = appended;
    }
    print_summary(summary);
    return 0;
}

int cmd_queries(Ctx& ctx, const std::string& split) {
    FeatureTable table = load_features(ctx);
    auto [spec, partition_input] = load_partition(ctx);
    auto it = spec.splits.find(split);
    if (it == spec.splits.end())
        throw ConfigError("partition spec has no '" + split + "' split");
    std::vector<Query> queries = enumerate_queries(it->second, table, table.first_date());
    json manifest = load_manifest(ctx);
    json inputs = input_hashes(ctx, {"features.jsonl"});
    inputs[partition_input.first] = partition_input.second;
    std::string name = "queries_" + split + ".jsonl";
    write_artifact(ctx, manifest, name, std::move(inputs),
                   [&](std::ostream& out) { write_queries(queries, out); });
    save_manifest(ctx, manifest);
    print_summary({{"command", "queries"},
                   {"status", "ok"},
                   {"split", split},
                   {"queries", queries.size()},
                   {"out", name}});
    return 0;
}

int cmd_score(Ctx& ctx, const std::string& split) {
    std::vector<Query> queries = load_queries(ctx, split);
    json manifest = load_manifest(ctx);
    CandidatePool pool = load_pool(ctx, manifest);
    ForecasterBundle fb = make_forecaster(ctx);
    std::string tmpl = effective_rag_template(ctx);

    std::vector<TrainingExample> examples;
    size_t skipped = 0, failures = 0;
    for (const Query& q : queries) {
        PoolView view = snapshot(pool, q.date);
        std::vector<const Candidate*> sample =
            sample_scoring_candidates(view, q, ctx.cfg.scoring_budget, ctx.cfg.seed);
        ScoreOutcome outcome =
            score_candidates(q, sample, *fb.forecaster, tmpl, ctx.cfg.max_in_flight);
        failures += outcome.failures;
        if (outcome.scored.size() < 16) {
            std::cerr << "score: skipped " << q.stock << ' ' << format_date(q.date) << ": only "
                      << outcome.scored.size() << " of the 16 required candidates scored\n";
            ++skipped;
            continue;
        }
        examples.push_back(mine_training_example(outcome, q, ctx.cfg.alpha));
    }

    json inputs = input_hashes(ctx, {"queries_" + split + ".jsonl", "pool.jsonl"});
    if (fb.used_features)
        inputs["features.jsonl"] = hex64(hash_file((ctx.out / "features.jsonl").string()));
    write_artifact(ctx, manifest, "examples.jsonl", std::move(inputs),
                   [&](std::ostream& out) { write_training_examples(examples, out); });
    save_manifest(ctx, manifest);
    print_summary({{"command", "score"},
                   {"status", "ok"},
                   {"split", split},
                   {"queries", queries.size()},
                   {"examples", examples.size()},
                   {"skipped", skipped},
                   {"failures", failures},
                   {"out", "examples.jsonl"}});
    return 0;
}

int cmd_train(Ctx& ctx) {
    std::vector<TrainingExample> examples;
    {
        std::ifstream in = open_artifact(ctx, "examples.jsonl");
        examples = read_training_examples(in);
    }
    TrainOutcome outcome = train(examples, ctx.cfg.net, ctx.cfg.train);
    json manifest = load_manifest(ctx);
    write_artifact(ctx, manifest, "params.bin", input_hashes(ctx, {"examples.jsonl"}),
                   [&](std::ostream& out) { write_params(outcome.params, out); });

    CandidatePool pool = load_pool(ctx, manifest);
    EmbeddingCache cache = embed_pool(pool.items, outcome.params);
    write_artifact(ctx, manifest, "cache.bin", input_hashes(ctx, {"pool.jsonl", "params.bin"}),
                   [&](std::ostream& out) { write_embedding_cache(cache, out); });
    save_manifest(ctx, manifest);
    print_summary({{"command", "train"},
                   {"status", "ok"},
                   {"examples", examples.size()},
                   {"epochs", ctx.cfg.train.epochs},
                   {"final_loss", outcome.epoch_mean_loss.empty()
                                      ? ojson(nullptr)
                                      : ojson(outcome.epoch_mean_loss.back())},
                   {"out", "params.bin"},
                   {"cache", "cache.bin"}});
    return 0;
}

int cmd_retrieve(Ctx& ctx, const std::string& split, const std::string& retriever) {
    std::vector<Query> queries = load_queries(ctx, split);
    json manifest = load_manifest(ctx);
    CandidatePool pool = load_pool(ctx, manifest);

    EmbedderParams params;
    EmbeddingCache cache;
    if (retriever == "finseer") {
        params = load_params(ctx);
        if (fs::exists(ctx.out / "cache.bin")) {
            std::ifstream in = open_artifact(ctx, "cache.bin");
            cache = read_embedding_cache(in);
        } else {
            cache = embed_pool(pool.items, params);
        }
    }

    std::vector<RetrievalLogEntry> log;
    log.reserve(queries.size());
    for (const Query& q : queries) {
        if (!q.ground_truth)
            throw std::runtime_error("query " + q.stock + " " + format_date(q.date) +
                                     " lacks a ground-truth movement");
        PoolView view = snapshot(pool, q.date);
        std::vector<RetrievedCandidate> got;
        if (retriever == "finseer")
            got = retrieve_topk(q, view, params, ctx.cfg.k, &cache);
        else if (retriever == "dtw")
            got = retrieve_dtw(q, view, ctx.cfg.k);
        else
            got = retrieve_random(q, view, ctx.cfg.k, ctx.cfg.seed);
        RetrievalLogEntry entry;
        entry.query_stock = q.stock;
        entry.query_date = q.date;
        entry.ground_truth = *q.ground_truth;
        entry.retriever = retriever;
        for (const RetrievedCandidate& r : got)
            entry.retrieved.push_back({r.id, std::string(kColumns[size_t(r.candidate->column)].name),
                                       r.candidate->movement, r.score});
        log.push_back(std::move(entry));
    }

    json inputs = input_hashes(ctx, {"queries_" + split + ".jsonl", "pool.jsonl"});
    if (retriever == "finseer") {
        inputs["params.bin"] = hex64(hash_file((ctx.out / "params.bin").string()));
        if (fs::exists(ctx.out / "cache.bin"))
            inputs["cache.bin"] = hex64(hash_file((ctx.out / "cache.bin").string()));
    }
    std::string name = "retrieval_" + retriever + ".jsonl";
    write_artifact(ctx, manifest, name, std::move(inputs),
                   [&](std::ostream& out) { write_retrieval_log(log, out); });
    save_manifest(ctx, manifest);
    print_summary({{"command", "retrieve"},
                   {"status", "ok"},
                   {"retriever", retriever},
                   {"split", split},
                   {"queries", queries.size()},
                   {"k", ctx.cfg.k},
                   {"out", name}});
    return 0;
}

int cmd_evaluate(Ctx& ctx, const std::string& split, const std::string& retriever, bool force) {
    json manifest = load_manifest(ctx);
    bool finseer = retriever == "finseer";

    std::vector<std::string> needed{"queries_" + split + ".jsonl"};
    if (retriever != "none") needed.push_back("pool.jsonl");
    if (finseer) {
        needed.push_back("params.bin");
        if (fs::exists(ctx.out / "cache.bin")) needed.push_back("cache.bin");
    }
    if (ctx.cfg.forecaster_kind == "synthetic") needed.push_back("features.jsonl");
    if (!force)
        for (const std::string& name : needed) verify_artifact(ctx, manifest, name);

    std::vector<Query> queries = load_queries(ctx, split);
    CandidatePool pool;
    if (retriever != "none") {
        pool = load_pool(ctx, manifest);
    } else if (!queries.empty()) {
        // Depth-0 runs never touch candidates; an empty pool spanning the
        // query range keeps the per-query snapshot happy.
        pool.dataset_start = queries.front().date;
        pool.high_water = queries.front().date;
        for (const Query& q : queries) pool.high_water = std::max(pool.high_water, q.date);
        pool.dataset_start = std::min(pool.dataset_start, pool.high_water);
    }

    EmbedderParams params;
    EmbeddingCache cache;
    bool have_cache = false;
    if (finseer) {
        params = load_params(ctx);
        if (fs::exists(ctx.out / "cache.bin")) {
            std::ifstream in = open_artifact(ctx, "cache.bin");
            cache = read_embedding_cache(in);
            have_cache = true;
        }
    }

    ForecasterBundle fb = make_forecaster(ctx);
    ExperimentConfig ecfg;
    ecfg.retriever = retriever;
    ecfg.k = ctx.cfg.k;
    ecfg.seed = ctx.cfg.seed;
    ecfg.max_in_flight = ctx.cfg.max_in_flight;
    ecfg.rag_template = effective_rag_template(ctx);
    ecfg.bare_template = effective_bare_template(ctx);

    std::string log_name = "eval_log_" + retriever + ".jsonl";
    std::vector<RetrievalLogEntry> entries;
    {
        std::ofstream log_out(ctx.out / log_name, std::ios::binary);
        if (!log_out) throw std::runtime_error("cannot write " + (ctx.out / log_name).string());
        entries = run_experiment(queries, pool, finseer ? &params : nullptr,
                                 have_cache ? &cache : nullptr, *fb.forecaster, ecfg, &log_out);
    }
    EvalReport report = aggregate_report(entries);

    json inputs = json::object();
    for (const std::string& name : needed)
        inputs[name] = hex64(hash_file((ctx.out / name).string()));
    record_artifact(ctx, manifest, log_name, inputs);
    write_artifact(ctx, manifest, "report_" + retriever + ".json", inputs,
                   [&](std::ostream& out) { write_report_json(report, out); });
    write_artifact(ctx, manifest, "occurrences_" + retriever + ".csv", inputs,
                   [&](std::ostream& out) { write_occurrences_csv(report, out); });
    save_manifest(ctx, manifest);
    print_summary({{"command", "evaluate"},
                   {"status", "ok"},
                   {"retriever", retriever},
                   {"split", split},
                   {"queries", report.query_count},
                   {"abstain", report.abstain_count},
                   {"acc", report.acc},
                   {"mcc", report.mcc},
                   {"report", "report_" + retriever + ".json"}});
    return 0;
}

int cmd_mi(Ctx& ctx) {
    FeatureTable table = load_features(ctx);
    // Pair every column against the labeled movement (rise 1, freeze 0,
    // fall -1). Numeric cells pair only where present; event columns read
    // null as "no event" and encode it as 0.
    std::vector<std::pair<std::string, double>> raw;
    size_t skipped = 0;
    for (int c = 1; c < kNumColumns; ++c) {
        std::vector<double> xs, ys;
        for (const auto& s : table.stocks) {
            for (size_t t = 0; t < s.size(); ++t) {
                const Cell& mv = s.cols[0][t];
                if (is_null(mv)) continue;
                double y = symbolic_code(std::get<Movement>(mv));
                const Cell& cell = s.cols[size_t(c)][t];
                if (kColumns[size_t(c)].kind == ColumnKind::numeric) {
                    if (is_null(cell)) continue;
                    xs.push_back(std::get<double>(cell));
                } else {
                    xs.push_back(is_null(cell) ? 0.0 : symbolic_code(std::get<Signal>(cell)));
                }
                ys.push_back(y);
            }
        }
        std::string name(kColumns[size_t(c)].name);
        if (xs.size() < 50) {
            std::cerr << "mi: skipped column '" << name << "': " << xs.size()
                      << " samples, need at least 50\n";
            ++skipped;
            continue;
        }
        raw.emplace_back(std::move(name), mutual_information(xs, ys, ctx.cfg.mi));
    }
    if (raw.empty()) throw std::runtime_error("mi: no column had enough samples to score");
    std::vector<MiScore> scores = rank_mi(std::move(raw), ctx.cfg.mi_top);

    json manifest = load_manifest(ctx);
    write_artifact(ctx, manifest, "mi_report.json", input_hashes(ctx, {"features.jsonl"}),
                   [&](std::ostream& out) {
                       ojson j;
                       j["estimator"] =
                           ctx.cfg.mi.estimator == MiConfig::Estimator::binned ? "binned" : "knn";
                       j["target"] = "movement";
                       j["scores"] = ojson::array();
                       for (const MiScore& s : scores)
                           j["scores"].push_back(
                               {{"name", s.name}, {"mi", s.mi}, {"normalized", s.normalized}});
                       out << j.dump(2) << '\n';
                   });
    save_manifest(ctx, manifest);
    print_summary({{"command", "mi"},
                   {"status", "ok"},
                   {"estimator", ctx.cfg.mi.estimator == MiConfig::Estimator::binned ? "binned" : "knn"},
                   {"scored", scores.size()},
                   {"skipped", skipped},
                   {"out", "mi_report.json"}});
    return 0;
}

}  // namespace

int run_command(std::vector<std::string> args) {
    CLI::App app{"retrieval-augmented stock movement forecasting pipeline", "finsrag"};
    app.require_subcommand(1);

    struct Flags {
        std::string config, out, as_of, split, retriever;
        int advance = 0;
        uint64_t seed = 0;
        bool force = false;
    } flags;

    auto date_check = CLI::Validator(
        [](std::string& s) -> std::string {
            try {
                (void)parse_date(s);
                return {};
            } catch (const std::exception& e) {
                return std::string(e.what());
            }
        },
        "DATE");

    auto add_common = [&](CLI::App* sc) {
        sc->add_option("--config", flags.config, "engine config file")->required();
        sc->add_option("--out", flags.out, "override the configured output directory");
        return sc;
    };
    auto add_seed = [&](CLI::App* sc) {
        sc->add_option("--seed", flags.seed, "override the configured seed");
        return sc;
    };

    add_common(app.add_subcommand("ingest", "normalize a raw daily-bar CSV into the store"));
    add_seed(add_common(
        app.add_subcommand("synth", "generate the synthetic market fixture and its partition")));
    add_common(app.add_subcommand("features", "build the indicator/alpha feature datastore"));

    CLI::App* sc_pool =
        add_common(app.add_subcommand("pool", "build or advance the candidate pool"));
    CLI::Option* opt_as_of =
        sc_pool->add_option("--as-of", flags.as_of, "candidates strictly before this date")
            ->check(date_check);
    sc_pool->add_option("--advance", flags.advance, "append the next N trading days")
        ->check(CLI::PositiveNumber)
        ->excludes(opt_as_of);

    add_common(app.add_subcommand("queries", "enumerate the query file for a split"))
        ->add_option("--split", flags.split, "partition split (default test)")
        ->check(CLI::IsMember({"train", "valid", "test"}));

    CLI::App* sc_score = add_seed(add_common(
        app.add_subcommand("score", "mine training examples through the forecaster")));
    sc_score->add_option("--split", flags.split, "partition split (default train)")
        ->check(CLI::IsMember({"train", "valid", "test"}));

    add_seed(add_common(
        app.add_subcommand("train", "fit the embedder and refresh the embedding cache")));

    CLI::App* sc_retrieve =
        add_seed(add_common(app.add_subcommand("retrieve", "top-k retrieval for a query file")));
    sc_retrieve->add_option("--split", flags.split, "partition split (default test)")
        ->check(CLI::IsMember({"train", "valid", "test"}));
    sc_retrieve->add_option("--retriever", flags.retriever, "finseer | dtw | random")
        ->check(CLI::IsMember({"finseer", "dtw", "random"}));

    CLI::App* sc_eval = add_seed(add_common(
        app.add_subcommand("evaluate", "run the forecasting experiment and report")));
    sc_eval->add_option("--split", flags.split, "partition split (default test)")
        ->check(CLI::IsMember({"train", "valid", "test"}));
    sc_eval->add_option("--retriever", flags.retriever, "finseer | dtw | random | none")
        ->check(CLI::IsMember({"finseer", "dtw", "random", "none"}));
    sc_eval->add_flag("--force", flags.force, "skip manifest staleness verification");

    add_common(app.add_subcommand("mi", "rank features by mutual information with movement"));

    try {
        std::reverse(args.begin(), args.end());
        app.parse(std::move(args));
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    CLI::App* sub = app.get_subcommands().front();
    std::string name = sub->get_name();
    try {
        Ctx ctx;
        ctx.cfg = load_config(flags.config);
        ctx.config_path = flags.config;
        if (!flags.out.empty()) ctx.cfg.out_dir = flags.out;
        const CLI::Option* seed_opt = sub->get_option_no_throw("--seed");
        if (seed_opt && seed_opt->count() > 0) {
            ctx.cfg.seed = flags.seed;
            ctx.cfg.train.seed = flags.seed;
            ctx.cfg.net.seed = flags.seed;
            ctx.cfg.synthetic_rule.seed = flags.seed;
        }
        ctx.out = ctx.cfg.out_dir;
        fs::create_directories(ctx.out);
        ctx.config_hash = hex64(hash_file(ctx.config_path));

        if (name == "ingest") return cmd_ingest(ctx);
        if (name == "synth") return cmd_synth(ctx);
        if (name == "features") return cmd_features(ctx);
        if (name == "pool") return cmd_pool(ctx, flags.as_of, flags.advance);
        if (name == "queries")
            return cmd_queries(ctx, flags.split.empty() ? "test" : flags.split);
        if (name == "score") return cmd_score(ctx, flags.split.empty() ? "train" : flags.split);
        if (name == "train") return cmd_train(ctx);
        if (name == "retrieve")
            return cmd_retrieve(ctx, flags.split.empty() ? "test" : flags.split,
                                flags.retriever.empty() ? "finseer" : flags.retriever);
        if (name == "evaluate")
            return cmd_evaluate(ctx, flags.split.empty() ? "test" : flags.split,
                                flags.retriever.empty() ? "finseer" : flags.retriever, flags.force);
        if (name == "mi") return cmd_mi(ctx);
        std::cerr << "unknown subcommand " << name << '\n';
        return 2;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}

}  // namespace finsrag

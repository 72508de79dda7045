#include "finsrag/evaluation.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <istream>
#include <map>
#include <mutex>
#include <numeric>
#include <ostream>
#include <stdexcept>
#include <thread>

#include <boost/math/distributions/students_t.hpp>
#include <boost/math/special_functions/digamma.hpp>
#include <nlohmann/json.hpp>

#include "finsrag/baselines.hpp"

namespace finsrag {

// ─── retrieval log round trip ───

namespace {

nlohmann::ordered_json entry_json(const RetrievalLogEntry& e) {
    nlohmann::ordered_json j = nlohmann::ordered_json::object();
    j["query_stock"] = e.query_stock;
    j["query_date"] = format_date(e.query_date);
    j["ground_truth"] = to_string(e.ground_truth);
    j["retriever"] = e.retriever;
    auto items = nlohmann::ordered_json::array();
    for (const auto& it : e.retrieved) {
        nlohmann::ordered_json ji = nlohmann::ordered_json::object();
        ji["id"] = it.id;
        ji["indicator"] = it.indicator;
        ji["movement"] = to_string(it.movement);
        ji["score"] = it.score;
        items.push_back(std::move(ji));
    }
    j["retrieved"] = std::move(items);
    if (e.prediction) j["prediction"] = to_string(*e.prediction);
    else j["prediction"] = nullptr;
    return j;
}

RetrievalLogEntry entry_from_json(const nlohmann::ordered_json& j) {
    if (!j.is_object()) throw std::runtime_error("log entry must be a JSON object");
    for (const auto& [key, _] : j.items())
        if (key != "query_stock" && key != "query_date" && key != "ground_truth" &&
            key != "retriever" && key != "retrieved" && key != "prediction")
            throw std::runtime_error("unknown key '" + key + "'");
    RetrievalLogEntry e;
    e.query_stock = j.at("query_stock").get<std::string>();
    e.query_date = parse_date(j.at("query_date").get<std::string>());
    e.ground_truth = movement_from_string(j.at("ground_truth").get<std::string>());
    e.retriever = j.at("retriever").get<std::string>();
    for (const auto& ji : j.at("retrieved")) {
        RetrievalLogEntry::Item it;
        if (!ji.at("id").is_number_unsigned()) throw std::runtime_error("item id must be unsigned");
        it.id = ji.at("id").get<size_t>();
        it.indicator = ji.at("indicator").get<std::string>();
        if (column_index(it.indicator) < 0)
            throw std::runtime_error("unknown indicator '" + it.indicator + "'");
        it.movement = movement_from_string(ji.at("movement").get<std::string>());
        if (!ji.at("score").is_number()) throw std::runtime_error("item score must be a number");
        it.score = ji.at("score").get<double>();
        e.retrieved.push_back(std::move(it));
    }
    const auto& pred = j.at("prediction");
    if (pred.is_null()) e.prediction = std::nullopt;
    else e.prediction = movement_from_string(pred.get<std::string>());
    return e;
}

}  // namespace

void write_retrieval_log(const std::vector<RetrievalLogEntry>& log, std::ostream& out) {
    for (const auto& e : log) out << entry_json(e).dump() << '\n';
    if (!out) throw std::runtime_error("write_retrieval_log: stream failure");
}

std::vector<RetrievalLogEntry> read_retrieval_log(std::istream& in) {
    std::vector<RetrievalLogEntry> out;
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        try {
            out.push_back(entry_from_json(nlohmann::ordered_json::parse(line)));
        } catch (const std::exception& e) {
            throw std::runtime_error("retrieval log line " + std::to_string(line_no) + ": " +
                                     e.what());
        }
    }
    return out;
}

// ─── headline metrics ───

double accuracy(const std::vector<std::optional<Movement>>& predictions,
                const std::vector<Movement>& labels) {
    if (predictions.size() != labels.size())
        throw std::invalid_argument("accuracy: length mismatch");
    if (predictions.empty()) throw std::invalid_argument("accuracy: empty input");
    size_t correct = 0;
    for (size_t i = 0; i < labels.size(); ++i)
        if (predictions[i] && *predictions[i] == labels[i]) ++correct;
    return double(correct) / double(labels.size());
}

double mcc(const std::vector<std::optional<Movement>>& predictions,
           const std::vector<Movement>& labels) {
    if (predictions.size() != labels.size()) throw std::invalid_argument("mcc: length mismatch");
    if (predictions.empty()) throw std::invalid_argument("mcc: empty input");
    double tp = 0, tn = 0, fp = 0, fn = 0;
    for (size_t i = 0; i < labels.size(); ++i) {
        bool label_rise;
        if (labels[i] == Movement::rise) label_rise = true;
        else if (labels[i] == Movement::fall) label_rise = false;
        else throw std::invalid_argument("mcc: labels must be rise or fall");
        // An abstain lands in the class opposite the label.
        bool pred_rise = predictions[i] ? *predictions[i] == Movement::rise : !label_rise;
        if (label_rise && pred_rise) ++tp;
        else if (label_rise) ++fn;
        else if (pred_rise) ++fp;
        else ++tn;
    }
    double denom2 = (tp + fp) * (tp + fn) * (tn + fp) * (tn + fn);
    if (denom2 <= 0) return 0.0;
    return (tp * tn - fp * fn) / std::sqrt(denom2);
}

std::vector<std::pair<std::string, size_t>> indicator_occurrences(
    const std::vector<RetrievalLogEntry>& log) {
    std::map<std::string, size_t> counts;
    for (const auto& e : log)
        for (const auto& it : e.retrieved) ++counts[it.indicator];
    std::vector<std::pair<std::string, size_t>> out(counts.begin(), counts.end());
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    return out;
}

std::optional<Correlation> movement_prediction_correlation(
    const std::vector<RetrievalLogEntry>& log) {
    std::vector<double> x, y;
    for (const auto& e : log) {
        if (!e.prediction || e.retrieved.empty()) continue;
        double sum = 0;
        for (const auto& it : e.retrieved) sum += symbolic_code(it.movement);
        x.push_back(sum / double(e.retrieved.size()));
        y.push_back(symbolic_code(*e.prediction));
    }
    size_t n = x.size();
    if (n < 3) return std::nullopt;
    double mx = std::accumulate(x.begin(), x.end(), 0.0) / double(n);
    double my = std::accumulate(y.begin(), y.end(), 0.0) / double(n);
    double sxx = 0, syy = 0, sxy = 0;
    for (size_t i = 0; i < n; ++i) {
        double dx = x[i] - mx, dy = y[i] - my;
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if (sxx <= 0 || syy <= 0) return std::nullopt;
    double r = std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
    double p = 0;
    double denom = 1 - r * r;
    if (denom > 0) {
        double t = r * std::sqrt((double(n) - 2) / denom);
        boost::math::students_t_distribution<double> dist(double(n) - 2);
        p = 2 * boost::math::cdf(dist, -std::abs(t));
    }
    return Correlation{r, p};
}

// ─── mutual information ───

namespace {

void check_mi_inputs(std::span<const double> feature, std::span<const double> target) {
    if (feature.size() != target.size())
        throw std::invalid_argument("mutual_information: length mismatch");
    if (feature.size() < 50)
        throw std::invalid_argument("mutual_information: need at least 50 samples, have " +
                                    std::to_string(feature.size()));
    for (double v : feature)
        if (!std::isfinite(v)) throw std::invalid_argument("mutual_information: non-finite value");
    for (double v : target)
        if (!std::isfinite(v)) throw std::invalid_argument("mutual_information: non-finite value");
}

// Equal-frequency bin ids; ties share the first tied rank so a constant
// series occupies a single bin.
std::vector<int> equal_freq_bins(std::span<const double> v, int bins) {
    std::vector<double> sorted(v.begin(), v.end());
    std::sort(sorted.begin(), sorted.end());
    std::vector<int> out(v.size());
    for (size_t i = 0; i < v.size(); ++i) {
        size_t rank = size_t(std::lower_bound(sorted.begin(), sorted.end(), v[i]) - sorted.begin());
        out[i] = int(rank * size_t(bins) / v.size());
    }
    return out;
}

}  // namespace

double mutual_information_binned(std::span<const double> feature, std::span<const double> target,
                                 int bins) {
    check_mi_inputs(feature, target);
    if (bins < 2) throw std::invalid_argument("mutual_information: need at least 2 bins");
    size_t n = feature.size();
    std::vector<int> bx = equal_freq_bins(feature, bins);
    std::vector<int> by = equal_freq_bins(target, bins);
    std::vector<double> nx(bins, 0), ny(bins, 0), nxy(size_t(bins) * bins, 0);
    for (size_t i = 0; i < n; ++i) {
        nx[bx[i]] += 1;
        ny[by[i]] += 1;
        nxy[size_t(bx[i]) * bins + by[i]] += 1;
    }
    double mi = 0;
    for (int a = 0; a < bins; ++a)
        for (int b = 0; b < bins; ++b) {
            double nab = nxy[size_t(a) * bins + b];
            if (nab == 0) continue;
            mi += (nab / double(n)) * std::log(nab * double(n) / (nx[a] * ny[b]));
        }
    return std::max(mi, 0.0);  // plug-in MI is non-negative; clamp fp dust
}

double mutual_information_knn(std::span<const double> feature, std::span<const double> target,
                              int k) {
    check_mi_inputs(feature, target);
    size_t n = feature.size();
    if (k < 1 || size_t(k) >= n)
        throw std::invalid_argument("mutual_information: k must be in [1, n)");
    double psi_sum = 0;
    std::vector<double> dist(n);
    for (size_t i = 0; i < n; ++i) {
        for (size_t j = 0; j < n; ++j)
            dist[j] = std::max(std::abs(feature[j] - feature[i]), std::abs(target[j] - target[i]));
        dist[i] = std::numeric_limits<double>::infinity();  // exclude self
        std::vector<double> scratch(dist);
        std::nth_element(scratch.begin(), scratch.begin() + (k - 1), scratch.end());
        double eps = scratch[k - 1];
        size_t cx = 0, cy = 0;
        for (size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            if (std::abs(feature[j] - feature[i]) < eps) ++cx;
            if (std::abs(target[j] - target[i]) < eps) ++cy;
        }
        psi_sum += boost::math::digamma(double(cx + 1)) + boost::math::digamma(double(cy + 1));
    }
    return boost::math::digamma(double(k)) + boost::math::digamma(double(n)) - psi_sum / double(n);
}

double mutual_information(std::span<const double> feature, std::span<const double> target,
                          const MiConfig& cfg) {
    switch (cfg.estimator) {
        case MiConfig::Estimator::binned: return mutual_information_binned(feature, target, cfg.bins);
        case MiConfig::Estimator::knn: return mutual_information_knn(feature, target, cfg.k);
    }
    throw std::logic_error("mutual_information: unhandled estimator");
}

std::vector<MiScore> rank_mi(std::vector<std::pair<std::string, double>> raw, size_t k) {
    if (raw.empty()) throw std::invalid_argument("rank_mi: no scores");
    std::vector<MiScore> scores;
    scores.reserve(raw.size());
    for (auto& [name, mi] : raw) scores.push_back({std::move(name), mi, 0});
    auto [lo, hi] = std::minmax_element(scores.begin(), scores.end(),
                                        [](const auto& a, const auto& b) { return a.mi < b.mi; });
    double span = hi->mi - lo->mi;
    for (auto& s : scores) s.normalized = span > 0 ? (s.mi - lo->mi) / span : 0.5;
    std::sort(scores.begin(), scores.end(), [](const auto& a, const auto& b) {
        if (a.mi != b.mi) return a.mi > b.mi;
        return a.name < b.name;
    });
    if (scores.size() > k) scores.resize(k);
    return scores;
}

std::vector<MiScore> select_top(
    const std::vector<std::pair<std::string, std::vector<double>>>& features,
    std::span<const double> target, size_t k, const MiConfig& cfg) {
    if (features.empty()) throw std::invalid_argument("select_top: no features");
    std::vector<std::pair<std::string, double>> raw;
    raw.reserve(features.size());
    for (const auto& [name, values] : features) {
        if (values.size() != target.size())
            throw std::invalid_argument("select_top: feature '" + name + "' length mismatch");
        raw.emplace_back(name, mutual_information(values, target, cfg));
    }
    return rank_mi(std::move(raw), k);
}

// ─── experiments ───

std::vector<RetrievalLogEntry> run_experiment(const std::vector<Query>& queries,
                                              const CandidatePool& pool,
                                              const EmbedderParams* params,
                                              const EmbeddingCache* cache, Forecaster& forecaster,
                                              const ExperimentConfig& cfg, std::ostream* log_out) {
    bool finseer = cfg.retriever == "finseer";
    if (!finseer && cfg.retriever != "dtw" && cfg.retriever != "random" &&
        cfg.retriever != "none")
        throw std::invalid_argument("run_experiment: unknown retriever '" + cfg.retriever + "'");
    size_t depth = cfg.retriever == "none" ? 0 : cfg.k;
    if (finseer && depth > 0 && !params)
        throw std::invalid_argument("run_experiment: finseer retrieval needs embedder params");

    // Embedding the pool once up front turns per-query retrieval into a dot
    // product scan over the visible prefix.
    EmbeddingCache local;
    const EmbeddingCache* use_cache = cache;
    if (finseer && depth > 0 && !use_cache) {
        local = embed_pool(pool.items, *params, ExecMode::parallel);
        use_cache = &local;
    }

    size_t n = queries.size();
    std::vector<std::optional<RetrievalLogEntry>> slots(n);
    std::vector<std::pair<size_t, std::string>> failures;
    std::mutex failures_mu;
    std::atomic<bool> abort{false};
    std::atomic<size_t> next{0};

    auto worker = [&] {
        for (;;) {
            if (abort.load(std::memory_order_relaxed)) return;
            size_t i = next.fetch_add(1);
            if (i >= n) return;
            const Query& q = queries[i];
            try {
                if (!q.ground_truth)
                    throw std::runtime_error("query lacks ground truth");
                PoolView view = snapshot(pool, q.date);
                std::vector<RetrievedCandidate> got;
                if (depth > 0) {
                    if (finseer)
                        got = retrieve_topk(q, view, *params, depth, use_cache, ExecMode::serial);
                    else if (cfg.retriever == "dtw")
                        got = retrieve_dtw(q, view, depth, ExecMode::serial);
                    else
                        got = retrieve_random(q, view, depth, cfg.seed);
                }
                std::vector<const Candidate*> ptrs;
                ptrs.reserve(got.size());
                for (const auto& rc : got) ptrs.push_back(rc.candidate);
                std::string prompt = depth > 0 ? assemble_prompt(cfg.rag_template, q, ptrs)
                                               : assemble_prompt(cfg.bare_template, q, {});
                ForecastResult reply = forecaster.predict(prompt);

                RetrievalLogEntry e;
                e.query_stock = q.stock;
                e.query_date = q.date;
                e.ground_truth = *q.ground_truth;
                e.retriever = cfg.retriever;
                for (const auto& rc : got)
                    e.retrieved.push_back({rc.id, std::string(kColumns[rc.candidate->column].name),
                                           rc.candidate->movement, rc.score});
                e.prediction = parse_prediction(reply);
                slots[i] = std::move(e);
            } catch (const std::exception& ex) {
                std::lock_guard<std::mutex> lock(failures_mu);
                failures.emplace_back(i, q.stock + " " + format_date(q.date) + ": " + ex.what());
                abort.store(true, std::memory_order_relaxed);
            }
        }
    };

    size_t threads = std::min(std::max<size_t>(cfg.max_in_flight, 1), std::max<size_t>(n, 1));
    if (threads <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool_threads;
        pool_threads.reserve(threads);
        for (size_t t = 0; t < threads; ++t) pool_threads.emplace_back(worker);
        for (auto& t : pool_threads) t.join();
    }

    // Claims are handed out in order, so everything before the earliest
    // failure is complete; flush that prefix before reporting the failure.
    size_t stop = n;
    if (!failures.empty()) {
        auto first = std::min_element(failures.begin(), failures.end());
        stop = first->first;
    }
    std::vector<RetrievalLogEntry> log;
    log.reserve(stop);
    for (size_t i = 0; i < stop; ++i) {
        if (log_out) *log_out << entry_json(*slots[i]).dump() << '\n';
        log.push_back(std::move(*slots[i]));
    }
    if (log_out) log_out->flush();
    if (!failures.empty()) {
        auto first = std::min_element(failures.begin(), failures.end());
        throw std::runtime_error("run_experiment: query " + first->second);
    }
    return log;
}

EvalReport aggregate_report(const std::vector<RetrievalLogEntry>& log) {
    if (log.empty()) throw std::invalid_argument("aggregate_report: empty log");
    EvalReport report;
    report.query_count = log.size();
    std::vector<std::optional<Movement>> preds;
    std::vector<Movement> labels;
    preds.reserve(log.size());
    labels.reserve(log.size());
    for (const auto& e : log) {
        preds.push_back(e.prediction);
        labels.push_back(e.ground_truth);
        if (!e.prediction) ++report.abstain_count;
    }
    report.acc = accuracy(preds, labels);
    report.mcc = mcc(preds, labels);
    report.correlation = movement_prediction_correlation(log);
    report.occurrences = indicator_occurrences(log);
    return report;
}

void write_report_json(const EvalReport& report, std::ostream& out) {
    nlohmann::ordered_json j = nlohmann::ordered_json::object();
    j["query_count"] = report.query_count;
    j["abstain_count"] = report.abstain_count;
    j["acc"] = report.acc;
    j["mcc"] = report.mcc;
    if (report.correlation) {
        nlohmann::ordered_json c = nlohmann::ordered_json::object();
        c["r"] = report.correlation->r;
        c["p"] = report.correlation->p;
        j["correlation"] = std::move(c);
    } else {
        j["correlation"] = nullptr;
    }
    auto occ = nlohmann::ordered_json::array();
    for (const auto& [name, count] : report.occurrences) {
        nlohmann::ordered_json o = nlohmann::ordered_json::object();
        o["indicator"] = name;
        o["count"] = count;
        occ.push_back(std::move(o));
    }
    j["occurrences"] = std::move(occ);
    out << j.dump(2) << '\n';
    if (!out) throw std::runtime_error("write_report_json: stream failure");
}

void write_occurrences_csv(const EvalReport& report, std::ostream& out) {
    out << "indicator,count\n";
    for (const auto& [name, count] : report.occurrences) out << name << ',' << count << '\n';
    if (!out) throw std::runtime_error("write_occurrences_csv: stream failure");
}

}  // namespace finsrag

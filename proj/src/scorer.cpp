#include "finsrag/scorer.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "finsrag/rng.hpp"
#include "finsrag/hash.hpp"

namespace finsrag {

double class_probability(const LogitVector& logits, Movement true_class) {
    if (!std::isfinite(logits.rise) || !std::isfinite(logits.fall))
        throw std::invalid_argument("class_probability: logits must be finite");
    double z_true, z_other;
    switch (true_class) {
        case Movement::rise: z_true = logits.rise; z_other = logits.fall; break;
        case Movement::fall: z_true = logits.fall; z_other = logits.rise; break;
        default: throw std::invalid_argument("class_probability: true class must be rise or fall");
    }
    double mx = std::max(z_true, z_other);
    double et = std::exp(z_true - mx);
    double eo = std::exp(z_other - mx);
    return et / (et + eo);
}

std::optional<Movement> parse_prediction(const ForecastResult& reply) {
    if (reply.logits) {
        if (reply.logits->rise > reply.logits->fall) return Movement::rise;
        if (reply.logits->fall > reply.logits->rise) return Movement::fall;
        return std::nullopt;
    }
    std::string lower(reply.text);
    std::transform(lower.begin(), lower.end(), lower.begin(),
                   [](unsigned char ch) { return std::tolower(ch); });
    size_t rise_at = lower.find("rise");
    size_t fall_at = lower.find("fall");
    if (rise_at == std::string::npos && fall_at == std::string::npos) return std::nullopt;
    return rise_at < fall_at ? Movement::rise : Movement::fall;
}

std::string assemble_prompt(const std::string& tmpl, const Query& query,
                            const std::vector<const Candidate*>& candidates) {
    auto is_word = [](char c) {
        return std::isalnum(static_cast<unsigned char>(c)) || c == '_';
    };
    std::string out;
    out.reserve(tmpl.size() + 256);
    for (size_t i = 0; i < tmpl.size();) {
        if (tmpl[i] != '{') {
            out += tmpl[i++];
            continue;
        }
        size_t end = i + 1;
        while (end < tmpl.size() && is_word(tmpl[end])) ++end;
        if (end == i + 1 || end == tmpl.size() || tmpl[end] != '}') {
            // A brace that opens no {word} token is literal text.
            out += tmpl[i++];
            continue;
        }
        std::string token = tmpl.substr(i + 1, end - i - 1);
        if (token == "query") {
            out += serialize_query(query);
        } else if (token == "candidates") {
            for (size_t c = 0; c < candidates.size(); ++c) {
                if (c > 0) out += '\n';
                out += serialize_candidate(*candidates[c]);
            }
        } else {
            throw std::invalid_argument("prompt template: unknown placeholder {" + token + "}");
        }
        i = end + 1;
    }
    return out;
}

bool scored_less(const ScoredCandidate& a, const ScoredCandidate& b) {
    if (a.score != b.score) return a.score > b.score;
    return candidate_less(*a.candidate, *b.candidate);
}

ScoreOutcome score_candidates(const Query& query, const std::vector<const Candidate*>& candidates,
                              Forecaster& forecaster, const std::string& prompt_template,
                              size_t max_in_flight) {
    if (!query.ground_truth)
        throw std::invalid_argument("score_candidates: query lacks ground truth");
    if (*query.ground_truth == Movement::freeze)
        throw std::invalid_argument("score_candidates: ground truth must be rise or fall");
    Movement truth = *query.ground_truth;

    // Surface template errors once, up front, instead of as n call failures.
    (void)assemble_prompt(prompt_template, query, {});

    size_t n = candidates.size();
    std::vector<std::optional<double>> slots(n);
    std::atomic<size_t> next{0};
    std::atomic<size_t> failures{0};
    auto worker = [&] {
        for (;;) {
            size_t i = next.fetch_add(1);
            if (i >= n) return;
            try {
                std::string prompt = assemble_prompt(prompt_template, query, {candidates[i]});
                ForecastResult reply = forecaster.predict(prompt);
                if (!reply.logits) {
                    failures.fetch_add(1);  // a text reply carries no probability
                    continue;
                }
                slots[i] = class_probability(*reply.logits, truth);
            } catch (const std::exception&) {
                failures.fetch_add(1);
            }
        }
    };

    size_t threads = std::min(std::max<size_t>(max_in_flight, 1), std::max<size_t>(n, 1));
    if (threads <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(threads);
        for (size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }

    ScoreOutcome out;
    out.failures = failures.load();
    out.scored.reserve(n);
    for (size_t i = 0; i < n; ++i)
        if (slots[i]) out.scored.push_back({candidates[i], *slots[i]});
    std::sort(out.scored.begin(), out.scored.end(), scored_less);
    return out;
}

std::vector<const Candidate*> sample_scoring_candidates(const PoolView& view, const Query& query,
                                                        size_t budget, uint64_t base_seed) {
    size_t n = view.items.size();
    size_t k = std::min(budget, n);
    DetRng rng(derive_seed(base_seed, "score-sample/" + query.stock + "/" + format_date(query.date)));
    std::vector<size_t> picks = rng.sample_without_replacement(n, k);
    std::sort(picks.begin(), picks.end());
    std::vector<const Candidate*> out;
    out.reserve(k);
    for (size_t i : picks) out.push_back(&view.items[i]);
    return out;
}

std::vector<double> compute_weights(const std::vector<double>& teacher_scores, double alpha) {
    if (alpha <= 0) throw std::invalid_argument("compute_weights: alpha must be positive");
    if (teacher_scores.empty())
        throw std::invalid_argument("compute_weights: need at least one score");
    double mx = *std::max_element(teacher_scores.begin(), teacher_scores.end());
    std::vector<double> w(teacher_scores.size());
    double sum = 0;
    for (size_t i = 0; i < w.size(); ++i) {
        w[i] = std::exp((teacher_scores[i] - mx) / alpha);
        sum += w[i];
    }
    for (double& x : w) x /= sum;
    return w;
}

TrainingExample mine_training_example(const ScoreOutcome& outcome, const Query& query,
                                      double alpha) {
    const auto& s = outcome.scored;
    if (s.size() < 16)
        throw std::runtime_error("mining needs at least 16 scored candidates, have " +
                                 std::to_string(s.size()));
    TrainingExample ex;
    ex.query = query;
    ex.positive = *s.front().candidate;
    ex.teacher_scores.reserve(16);
    ex.teacher_scores.push_back(s.front().score);
    ex.negatives.reserve(15);
    for (size_t i = s.size() - 15; i < s.size(); ++i) {
        ex.negatives.push_back(*s[i].candidate);
        ex.teacher_scores.push_back(s[i].score);
    }
    ex.weights = compute_weights(ex.teacher_scores, alpha);
    return ex;
}

// ─── training-example JSON lines ───

void write_training_examples(const std::vector<TrainingExample>& examples, std::ostream& out) {
    for (const auto& ex : examples) {
        nlohmann::ordered_json j = nlohmann::ordered_json::object();
        j["query"] = nlohmann::ordered_json::parse(query_file_line(ex.query));
        j["positive"] = nlohmann::ordered_json::parse(serialize_candidate(ex.positive));
        auto negs = nlohmann::ordered_json::array();
        for (const auto& c : ex.negatives)
            negs.push_back(nlohmann::ordered_json::parse(serialize_candidate(c)));
        j["negatives"] = std::move(negs);
        j["teacher_scores"] = ex.teacher_scores;
        j["weights"] = ex.weights;
        out << j.dump() << '\n';
    }
}

std::vector<TrainingExample> read_training_examples(std::istream& in) {
    std::vector<TrainingExample> out;
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        try {
            nlohmann::ordered_json j = nlohmann::ordered_json::parse(line);
            if (!j.is_object()) throw std::runtime_error("example must be a JSON object");
            for (const auto& [key, _] : j.items())
                if (key != "query" && key != "positive" && key != "negatives" &&
                    key != "teacher_scores" && key != "weights")
                    throw std::runtime_error("unknown key '" + key + "'");
            TrainingExample ex;
            ex.query = parse_query(j.at("query").dump());
            ex.positive = parse_candidate(j.at("positive").dump());
            for (const auto& c : j.at("negatives"))
                ex.negatives.push_back(parse_candidate(c.dump()));
            ex.teacher_scores = j.at("teacher_scores").get<std::vector<double>>();
            ex.weights = j.at("weights").get<std::vector<double>>();
            if (ex.negatives.size() != 15)
                throw std::runtime_error("expected 15 negatives, have " +
                                         std::to_string(ex.negatives.size()));
            if (ex.teacher_scores.size() != 16 || ex.weights.size() != 16)
                throw std::runtime_error("expected 16 teacher scores and weights");
            double wsum = 0;
            for (double w : ex.weights) {
                if (!std::isfinite(w) || w < 0) throw std::runtime_error("weights must be in [0,1]");
                wsum += w;
            }
            if (std::abs(wsum - 1.0) > 1e-6) throw std::runtime_error("weights must sum to 1");
            out.push_back(std::move(ex));
        } catch (const std::exception& e) {
            throw std::runtime_error("training examples line " + std::to_string(line_no) + ": " +
                                     e.what());
        }
    }
    return out;
}

// ─── synthetic forecaster ───

std::map<std::pair<std::string, Date>, Movement> labels_from_features(const FeatureTable& table) {
    std::map<std::pair<std::string, Date>, Movement> labels;
    for (const auto& sf : table.stocks)
        for (size_t t = 0; t < sf.dates.size(); ++t)
            if (const Movement* m = std::get_if<Movement>(&sf.cols[0][t]))
                labels.emplace(std::make_pair(sf.stock, sf.dates[t]), *m);
    return labels;
}

SyntheticForecaster::SyntheticForecaster(std::map<std::pair<std::string, Date>, Movement> labels,
                                         Rule rule)
    : labels_(std::move(labels)), rule_(std::move(rule)) {
    for (const auto& [name, weight] : rule_.indicator_weights) {
        if (column_index(name) < 0)
            throw std::invalid_argument("synthetic forecaster: unknown indicator '" + name + "'");
        if (!std::isfinite(weight))
            throw std::invalid_argument("synthetic forecaster: non-finite weight for '" + name + "'");
    }
    if (!(rule_.noise_sigma >= 0))
        throw std::invalid_argument("synthetic forecaster: noise sigma must be non-negative");
}

ForecastResult SyntheticForecaster::predict(const std::string& prompt) {
    // Serialized blocks sit one per line in the bundled templates; scan each
    // line for an embedded JSON object and classify it by its key set.
    std::optional<Query> query;
    double indicator_sum = 0;
    std::istringstream lines(prompt);
    std::string line;
    while (std::getline(lines, line)) {
        size_t brace = line.find('{');
        if (brace == std::string::npos) continue;
        std::string blob = line.substr(brace);
        nlohmann::ordered_json j = nlohmann::ordered_json::parse(blob, nullptr, false);
        if (j.is_discarded() || !j.is_object()) continue;
        if (j.contains("query_stock")) {
            query = parse_query(blob);
        } else if (j.contains("candidate_stock")) {
            Candidate c = parse_candidate(blob);
            auto it = rule_.indicator_weights.find(std::string(kColumns[c.column].name));
            if (it != rule_.indicator_weights.end()) indicator_sum += it->second;
        }
    }
    if (!query) throw std::runtime_error("synthetic forecaster: no query block in prompt");

    auto label = labels_.find({query->stock, query->date});
    if (label == labels_.end())
        throw std::runtime_error("synthetic forecaster: no label for " + query->stock + " " +
                                 format_date(query->date));
    if (label->second == Movement::freeze)
        throw std::runtime_error("synthetic forecaster: freeze label for " + query->stock + " " +
                                 format_date(query->date));

    double margin = rule_.intercept + indicator_sum;
    DetRng rng(derive_seed(rule_.seed, "synthetic-forecaster", fnv1a64(prompt)));
    margin += rng.normal(0.0, rule_.noise_sigma);

    ForecastResult out;
    LogitVector logits;
    if (label->second == Movement::rise) {
        logits.rise = margin / 2;
        logits.fall = -margin / 2;
    } else {
        logits.rise = -margin / 2;
        logits.fall = margin / 2;
    }
    out.logits = logits;
    return out;
}

// ─── remote forecaster ───

RemoteForecaster::RemoteForecaster(HttpEndpoint endpoint) : endpoint_(std::move(endpoint)) {}

ForecastResult RemoteForecaster::predict(const std::string& prompt) {
    nlohmann::ordered_json body = nlohmann::ordered_json::object();
    body["prompt"] = prompt;
    body["classes"] = nlohmann::ordered_json::array({"rise", "fall"});
    nlohmann::ordered_json reply = post_json(endpoint_, body);
    if (!reply.is_object()) throw std::runtime_error("forecaster reply: expected a JSON object");

    ForecastResult out;
    if (reply.contains("logits")) {
        const auto& lg = reply["logits"];
        if (!lg.is_object() || !lg.contains("rise") || !lg.contains("fall") ||
            !lg["rise"].is_number() || !lg["fall"].is_number())
            throw std::runtime_error("forecaster reply: logits must hold numeric rise and fall");
        LogitVector v{lg["rise"].get<double>(), lg["fall"].get<double>()};
        if (!std::isfinite(v.rise) || !std::isfinite(v.fall))
            throw std::runtime_error("forecaster reply: non-finite logit");
        out.logits = v;
    } else if (reply.contains("text") && reply["text"].is_string()) {
        out.text = reply["text"].get<std::string>();
    } else {
        throw std::runtime_error("forecaster reply: expected logits or text");
    }
    return out;
}

}  // namespace finsrag

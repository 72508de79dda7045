#pragma once
// Candidate scoring through a pluggable forecaster: correct-class
// probabilities, teacher-weight softmax, and top-1/bottom-15 mining.

#include <atomic>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "finsrag/http_client.hpp"
#include "finsrag/sequence.hpp"

namespace finsrag {

struct LogitVector {
    double rise = 0;
    double fall = 0;
};

// A forecaster reply carries per-class logits when the backend exposes them,
// otherwise free text for keyword parsing.
struct ForecastResult {
    std::optional<LogitVector> logits;
    std::string text;
};

class Forecaster {
public:
    virtual ~Forecaster() = default;
    // One prediction request; throws once any internal retry budget is
    // exhausted. Implementations must tolerate concurrent callers.
    virtual ForecastResult predict(const std::string& prompt) = 0;
};

// softmax probability of the true class, max-subtracted for stability.
// The class must be rise or fall and the logits finite.
double class_probability(const LogitVector& logits, Movement true_class);

// rise/fall from a reply: logits by argmax (an exact tie abstains), text by
// the earliest case-insensitive "rise"/"fall" keyword. nullopt = abstain.
std::optional<Movement> parse_prediction(const ForecastResult& reply);

// Substitutes {query} with the serialized query and {candidates} with the
// newline-joined serialized candidates, kept in the given order. Any other
// {word} placeholder throws.
std::string assemble_prompt(const std::string& tmpl, const Query& query,
                            const std::vector<const Candidate*>& candidates);

struct ScoredCandidate {
    const Candidate* candidate = nullptr;
    double score = 0;  // probability of the query's true class
};

// score desc, then (date, stock, indicator name) asc: a total order.
bool scored_less(const ScoredCandidate& a, const ScoredCandidate& b);

struct ScoreOutcome {
    std::vector<ScoredCandidate> scored;  // sorted by scored_less
    size_t failures = 0;  // dropped candidates: thrown calls or logit-free replies
};

// One forecaster call per candidate, each with a single-candidate prompt
// scored against the query's ground truth (which must be present). Calls run
// on up to max_in_flight threads; assembly order does not affect the result.
ScoreOutcome score_candidates(const Query& query, const std::vector<const Candidate*>& candidates,
                              Forecaster& forecaster, const std::string& prompt_template,
                              size_t max_in_flight = 1);

// Per-query scoring sample: `budget` distinct candidates from the snapshot
// (the whole pool when it is smaller), seeded by the query identity so the
// draw is stable across runs and query order.
std::vector<const Candidate*> sample_scoring_candidates(const PoolView& view, const Query& query,
                                                        size_t budget, uint64_t base_seed);

struct TrainingExample {
    Query query;
    Candidate positive;
    std::vector<Candidate> negatives;    // exactly 15, worst-scored first-to-last
    std::vector<double> teacher_scores;  // positive first, then the negatives
    std::vector<double> weights;         // softmax(score/alpha) over the 16
};

// w_i = softmax(score_i / alpha); alpha must be positive.
std::vector<double> compute_weights(const std::vector<double>& teacher_scores, double alpha);

// Positive = best-ranked, negatives = the 15 worst-ranked; throws when fewer
// than 16 candidates were scored (callers skip the query and log it).
TrainingExample mine_training_example(const ScoreOutcome& outcome, const Query& query,
                                      double alpha);

// JSON-lines round trip, one example per line.
void write_training_examples(const std::vector<TrainingExample>& examples, std::ostream& out);
std::vector<TrainingExample> read_training_examples(std::istream& in);

// ─── forecaster implementations ───

// (stock, date) -> labeled movement for every day the table labels.
std::map<std::pair<std::string, Date>, Movement> labels_from_features(const FeatureTable& table);

// Deterministic oracle for tests and the bundled synthetic market: replies
// with logits m/2 for the true class and -m/2 for the other, where
// m = intercept + sum of configured weights over the prompt's candidate
// indicators + seeded noise keyed by the prompt hash. Indicators the rule
// weights highly therefore make the oracle confidently right, which is the
// signal mining and retrieval training are meant to recover.
class SyntheticForecaster final : public Forecaster {
public:
    struct Rule {
        std::map<std::string, double> indicator_weights;  // column name -> weight
        double intercept = 0;
        double noise_sigma = 0;
        uint64_t seed = 0;
    };

    SyntheticForecaster(std::map<std::pair<std::string, Date>, Movement> labels, Rule rule);
    ForecastResult predict(const std::string& prompt) override;

private:
    std::map<std::pair<std::string, Date>, Movement> labels_;
    Rule rule_;
};

// POST {prompt, classes: [rise, fall]} -> {logits: {rise, fall}} or {text}.
class RemoteForecaster final : public Forecaster {
public:
    explicit RemoteForecaster(HttpEndpoint endpoint);
    ForecastResult predict(const std::string& prompt) override;

private:
    HttpEndpoint endpoint_;
};

}  // namespace finsrag

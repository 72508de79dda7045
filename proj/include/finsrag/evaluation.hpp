#pragma once
// ACC/MCC over rise/fall predictions, indicator-occurrence histograms,
// retrieval-movement vs prediction correlation, mutual-information feature
// ranking, and the end-to-end experiment driver.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "finsrag/retriever.hpp"

namespace finsrag {

// One JSON line per query in the experiment log.
struct RetrievalLogEntry {
    std::string query_stock;
    Date query_date;
    Movement ground_truth = Movement::freeze;  // rise or fall for real queries
    std::string retriever;                     // finseer | dtw | random | none
    struct Item {
        size_t id = 0;  // canonical pool index
        std::string indicator;
        Movement movement = Movement::freeze;
        double score = 0;
    };
    std::vector<Item> retrieved;               // rank order
    std::optional<Movement> prediction;        // nullopt = abstain
};

void write_retrieval_log(const std::vector<RetrievalLogEntry>& log, std::ostream& out);
std::vector<RetrievalLogEntry> read_retrieval_log(std::istream& in);

// Fraction of predictions equal to the label; an abstain is wrong. Lengths
// must match and be positive.
double accuracy(const std::vector<std::optional<Movement>>& predictions,
                const std::vector<Movement>& labels);

// Matthews correlation with rise as the positive class; an abstain is folded
// into the class opposite the label. Any zero factor under the root gives 0.
double mcc(const std::vector<std::optional<Movement>>& predictions,
           const std::vector<Movement>& labels);

// Counts of each indicator over every retrieved item, descending (ties by
// name) so the output is plot-ready.
std::vector<std::pair<std::string, size_t>> indicator_occurrences(
    const std::vector<RetrievalLogEntry>& log);

struct Correlation {
    double r = 0;
    double p = 1;
};

// Pearson r between x = mean retrieved-movement code (rise 1, freeze 0,
// fall -1) and y = predicted code, with a two-sided t-test p-value on n-2
// degrees of freedom. Abstaining entries and entries with nothing retrieved
// are excluded; fewer than 3 remaining pairs or zero variance gives nullopt.
std::optional<Correlation> movement_prediction_correlation(
    const std::vector<RetrievalLogEntry>& log);

// ─── mutual information ───

struct MiConfig {
    enum class Estimator { binned, knn };
    Estimator estimator = Estimator::binned;
    int bins = 16;  // per axis, equal-frequency (binned)
    int k = 3;      // neighbor count (knn)
};

// Plug-in estimate in nats over an equal-frequency binning of each axis.
// Tied values share the first tied rank, so a constant series lands in one
// bin and scores 0. Needs at least 50 samples.
double mutual_information_binned(std::span<const double> feature, std::span<const double> target,
                                 int bins = 16);

// Kraskov k-NN estimate (max-norm, estimator 1) in nats; can come out
// slightly negative by construction. Needs at least 50 samples.
double mutual_information_knn(std::span<const double> feature, std::span<const double> target,
                              int k = 3);

double mutual_information(std::span<const double> feature, std::span<const double> target,
                          const MiConfig& cfg = {});

struct MiScore {
    std::string name;
    double mi = 0;
    double normalized = 0;  // min-max over the scored set; all 0.5 when flat
};

// Rank already-computed MI values: min-max normalize (all 0.5 when flat),
// sort descending with name tie-break, keep the k best. Split out so callers
// that score features against unequal sample sets can still share the ranking.
std::vector<MiScore> rank_mi(std::vector<std::pair<std::string, double>> raw, size_t k);

// MI of every named feature against the target, min-max normalized, ranked
// descending (ties by name); returns the k best.
std::vector<MiScore> select_top(
    const std::vector<std::pair<std::string, std::vector<double>>>& features,
    std::span<const double> target, size_t k, const MiConfig& cfg = {});

// ─── experiments ───

struct ExperimentConfig {
    std::string retriever = "finseer";  // finseer | dtw | random | none
    size_t k = 5;                       // retrieval depth; none behaves as k = 0
    uint64_t seed = 0;                  // drives random retrieval
    size_t max_in_flight = 1;           // concurrent forecaster calls
    std::string rag_template;           // prompt with {query} and {candidates}
    std::string bare_template;          // prompt with {query} only
};

struct EvalReport {
    size_t query_count = 0;
    size_t abstain_count = 0;
    double acc = 0;
    double mcc = 0;
    std::optional<Correlation> correlation;
    std::vector<std::pair<std::string, size_t>> occurrences;
};

// Per query: snapshot the pool at the query date, retrieve, assemble the
// prompt, call the forecaster, and log. Queries are processed with bounded
// parallelism but logged in query order; when `log_out` is given each entry
// is appended as it is sealed, so an abort preserves the finished prefix.
// `params`/`cache` are required for (finseer, optional) and ignored otherwise.
std::vector<RetrievalLogEntry> run_experiment(const std::vector<Query>& queries,
                                              const CandidatePool& pool,
                                              const EmbedderParams* params,
                                              const EmbeddingCache* cache, Forecaster& forecaster,
                                              const ExperimentConfig& cfg,
                                              std::ostream* log_out = nullptr);

EvalReport aggregate_report(const std::vector<RetrievalLogEntry>& log);

void write_report_json(const EvalReport& report, std::ostream& out);
void write_occurrences_csv(const EvalReport& report, std::ostream& out);

}  // namespace finsrag

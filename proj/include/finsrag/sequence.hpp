#pragma once
// 5-day query/candidate windows, their bit-exact JSON forms, the append-only
// candidate pool with temporal-safety views, and dataset query enumeration.

#include <array>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "finsrag/indicators.hpp"

namespace finsrag {

inline constexpr int kWindowDays = 5;

struct Query {
    std::string stock;
    Date date;
    std::array<Date, kWindowDays> recent_dates;        // oldest first, all before date
    std::array<double, kWindowDays> adjusted_close{};  // aligned to recent_dates
    // rise or fall when known; absent on parsed prompt-side queries.
    std::optional<Movement> ground_truth;
    bool operator==(const Query&) const = default;
};

// Serialized candidate window values: number, event signal, or movement.
using CandidateValue = std::variant<double, Signal, Movement>;

struct Candidate {
    std::string stock;
    Date date;
    Movement movement = Movement::freeze;  // movement on `date`
    int column = 0;                        // registry index of the indicator
    std::array<Date, kWindowDays> recent_dates;  // the 5 trading days before `date`
    std::array<CandidateValue, kWindowDays> values{};
    bool operator==(const Candidate&) const = default;
};

// Canonical pool order: (date, stock, indicator name). Appends of later days
// always sort after existing entries, so canonical indices are stable ids.
bool candidate_less(const Candidate& a, const Candidate& b);

struct CandidatePool {
    Date dataset_start;
    Date high_water;  // entries are strictly before this date
    std::vector<Candidate> items;
};

// Candidates visible to a query dated `as_of`: a prefix of the canonical
// order, so no copy is made and ids stay global.
struct PoolView {
    std::span<const Candidate> items;
    Date as_of;
};

// nullopt when the date's movement is freeze (skipped, not an error);
// throws when the stock/date is unknown or fewer than 5 prior days exist.
std::optional<Query> build_query(const FeatureTable& table, std::string_view stock,
                                 const Date& date);

// All (stock, trading day) queries with ground truth rise/fall and date
// strictly after dataset_start + 1 calendar year, ordered by (date, stock).
std::vector<Query> enumerate_queries(const std::vector<std::string>& tickers,
                                     const FeatureTable& table, const Date& dataset_start);

CandidatePool build_pool(const FeatureTable& table, const Date& as_of, const Date& dataset_start);

// Appends exactly one trading day (new_day must be the next trading day
// after high_water; new_day == high_water is the identity).
void advance_pool(CandidatePool& pool, const FeatureTable& table, const Date& new_day);

// Throws if the pool has not been advanced through query_date.
PoolView snapshot(const CandidatePool& pool, const Date& query_date);

// Compact JSON, keys in the documented order, shortest round-trip numbers.
std::string serialize_query(const Query& q);
std::string serialize_candidate(const Candidate& c);

// Query-file lines carry a trailing ground_truth key that the prompt-side
// serialization never includes.
std::string query_file_line(const Query& q);

Query parse_query(const std::string& json_text);          // ground_truth optional
Candidate parse_candidate(const std::string& json_text);  // indicator from the *_list key

void write_pool(const CandidatePool& pool, std::ostream& out);
CandidatePool read_pool(std::istream& in, const Date& dataset_start, const Date& high_water);

void write_queries(const std::vector<Query>& queries, std::ostream& out);
std::vector<Query> read_queries(std::istream& in);

}  // namespace finsrag

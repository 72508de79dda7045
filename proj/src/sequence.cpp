#include "finsrag/sequence.hpp"

#include <algorithm>
#include <istream>
#include <ostream>
#include <set>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace finsrag {

bool candidate_less(const Candidate& a, const Candidate& b) {
    if (a.date != b.date) return a.date < b.date;
    if (a.stock != b.stock) return a.stock < b.stock;
    return kColumns[a.column].name < kColumns[b.column].name;
}

namespace {

// Candidate for (stock, index t, column): window is rows t-5..t-1, admitted
// only when the movement on t and all five window cells are non-null.
std::optional<Candidate> make_candidate(const StockFeatures& sf, size_t t, int column) {
    if (t < kWindowDays) return std::nullopt;
    const Cell& mv = sf.cols[0][t];
    if (!std::holds_alternative<Movement>(mv)) return std::nullopt;
    Candidate c;
    c.stock = sf.stock;
    c.date = sf.dates[t];
    c.movement = std::get<Movement>(mv);
    c.column = column;
    for (int i = 0; i < kWindowDays; ++i) {
        size_t idx = t - kWindowDays + size_t(i);
        Cell cell = emitted_cell(column, sf.cols[column][idx]);
        if (is_null(cell)) return std::nullopt;
        c.recent_dates[i] = sf.dates[idx];
        if (std::holds_alternative<double>(cell))
            c.values[i] = std::get<double>(cell);
        else if (std::holds_alternative<Signal>(cell))
            c.values[i] = std::get<Signal>(cell);
        else
            c.values[i] = std::get<Movement>(cell);
    }
    return c;
}

// All candidates dated in [from, to), canonically sorted.
std::vector<Candidate> candidates_in_range(const FeatureTable& table, const Date& from,
                                           const Date& to) {
    std::vector<Candidate> out;
    for (const auto& sf : table.stocks) {
        auto lo = std::lower_bound(sf.dates.begin(), sf.dates.end(), from);
        auto hi = std::lower_bound(sf.dates.begin(), sf.dates.end(), to);
        for (auto it = lo; it != hi; ++it) {
            size_t t = size_t(it - sf.dates.begin());
            for (int c = 0; c < kNumColumns; ++c)
                if (auto cand = make_candidate(sf, t, c)) out.push_back(std::move(*cand));
        }
    }
    std::sort(out.begin(), out.end(), candidate_less);
    return out;
}

std::set<Date> union_calendar(const FeatureTable& table) {
    std::set<Date> days;
    for (const auto& sf : table.stocks) days.insert(sf.dates.begin(), sf.dates.end());
    return days;
}

}  // namespace

std::optional<Query> build_query(const FeatureTable& table, std::string_view stock,
                                 const Date& date) {
    const StockFeatures* sf = table.find(stock);
    if (!sf) throw std::runtime_error("build_query: unknown stock " + std::string(stock));
    long long t = FeatureTable::date_index(*sf, date);
    if (t < 0)
        throw std::runtime_error("build_query: " + std::string(stock) + " has no bar on " +
                                 format_date(date));
    if (t < kWindowDays)
        throw std::runtime_error("build_query: " + std::string(stock) + " has only " +
                                 std::to_string(t) + " trading days before " + format_date(date));
    const Cell& mv = sf->cols[0][size_t(t)];
    if (!std::holds_alternative<Movement>(mv)) return std::nullopt;
    Movement truth = std::get<Movement>(mv);
    if (truth == Movement::freeze) return std::nullopt;
    Query q;
    q.stock = sf->stock;
    q.date = date;
    q.ground_truth = truth;
    for (int i = 0; i < kWindowDays; ++i) {
        size_t idx = size_t(t) - kWindowDays + size_t(i);
        q.recent_dates[i] = sf->dates[idx];
        q.adjusted_close[i] = std::get<double>(sf->cols[5][idx]);
    }
    return q;
}

std::vector<Query> enumerate_queries(const std::vector<std::string>& tickers,
                                     const FeatureTable& table, const Date& dataset_start) {
    Date earliest = add_years(dataset_start, 1);  // queries must be strictly later
    std::vector<Query> out;
    for (const auto& ticker : tickers) {
        const StockFeatures* sf = table.find(ticker);
        if (!sf) throw std::runtime_error("enumerate_queries: no data for ticker " + ticker);
        for (size_t t = kWindowDays; t < sf->size(); ++t) {
            if (!(earliest < sf->dates[t])) continue;
            const Cell& mv = sf->cols[0][t];
            if (!std::holds_alternative<Movement>(mv)) continue;
            if (std::get<Movement>(mv) == Movement::freeze) continue;
            auto q = build_query(table, ticker, sf->dates[t]);
            out.push_back(std::move(*q));
        }
    }
    std::sort(out.begin(), out.end(), [](const Query& a, const Query& b) {
        if (a.date != b.date) return a.date < b.date;
        return a.stock < b.stock;
    });
    return out;
}

CandidatePool build_pool(const FeatureTable& table, const Date& as_of, const Date& dataset_start) {
    if (as_of < dataset_start)
        throw std::invalid_argument("build_pool: as_of precedes dataset start");
    CandidatePool pool;
    pool.dataset_start = dataset_start;
    pool.high_water = as_of;
    pool.items = candidates_in_range(table, dataset_start, as_of);
    return pool;
}

void advance_pool(CandidatePool& pool, const FeatureTable& table, const Date& new_day) {
    if (new_day == pool.high_water) return;  // identity
    if (new_day < pool.high_water)
        throw std::invalid_argument("advance_pool: cannot move high water backwards");
    // One trading day at a time: new_day must be the very next trading day.
    auto days = union_calendar(table);
    auto next = days.upper_bound(pool.high_water);
    if (next == days.end() || *next != new_day)
        throw std::invalid_argument(
            "advance_pool: non-contiguous advance from " + format_date(pool.high_water) + " to " +
            format_date(new_day) +
            (next == days.end() ? " (no trading day follows)"
                                : " (next trading day is " + format_date(*next) + ")"));
    auto appended = candidates_in_range(table, pool.high_water, new_day);
    pool.items.insert(pool.items.end(), std::make_move_iterator(appended.begin()),
                      std::make_move_iterator(appended.end()));
    pool.high_water = new_day;
}

PoolView snapshot(const CandidatePool& pool, const Date& query_date) {
    if (pool.high_water < query_date)
        throw std::runtime_error("snapshot: pool only advanced through " +
                                 format_date(pool.high_water) + ", query is dated " +
                                 format_date(query_date));
    auto end = std::partition_point(pool.items.begin(), pool.items.end(),
                                    [&](const Candidate& c) { return c.date < query_date; });
    return PoolView{std::span<const Candidate>(pool.items.data(), size_t(end - pool.items.begin())),
                    query_date};
}

// ─── Serialization ───────────────────────────────────────────────────────

namespace {

nlohmann::ordered_json date_list(const std::array<Date, kWindowDays>& dates) {
    auto arr = nlohmann::ordered_json::array();
    for (const auto& d : dates) arr.push_back(format_date(d));
    return arr;
}

nlohmann::ordered_json value_list(const Candidate& c) {
    auto arr = nlohmann::ordered_json::array();
    bool is_volume = kColumns[c.column].name == "volume";
    for (const auto& v : c.values) {
        if (std::holds_alternative<double>(v)) {
            double d = std::get<double>(v);
            if (is_volume)
                arr.push_back(static_cast<long long>(d));
            else
                arr.push_back(d);
        } else if (std::holds_alternative<Signal>(v)) {
            arr.push_back(std::string(to_string(std::get<Signal>(v))));
        } else {
            arr.push_back(std::string(to_string(std::get<Movement>(v))));
        }
    }
    return arr;
}

nlohmann::ordered_json query_json(const Query& q) {
    nlohmann::ordered_json j;
    j["query_stock"] = q.stock;
    j["query_date"] = format_date(q.date);
    j["recent_date_list"] = date_list(q.recent_dates);
    auto arr = nlohmann::ordered_json::array();
    for (double v : q.adjusted_close) arr.push_back(v);
    j["adjusted_close_list"] = arr;
    return j;
}

}  // namespace

std::string serialize_query(const Query& q) { return query_json(q).dump(); }

std::string query_file_line(const Query& q) {
    auto j = query_json(q);
    if (!q.ground_truth)
        throw std::runtime_error("query_file_line: query " + q.stock + "/" + format_date(q.date) +
                                 " has no ground truth");
    j["ground_truth"] = std::string(to_string(*q.ground_truth));
    return j.dump();
}

std::string serialize_candidate(const Candidate& c) {
    nlohmann::ordered_json j;
    j["candidate_stock"] = c.stock;
    j["candidate_date"] = format_date(c.date);
    j["candidate_movement"] = std::string(to_string(c.movement));
    j["recent_date_list"] = date_list(c.recent_dates);
    j[std::string(kColumns[c.column].name) + "_list"] = value_list(c);
    return j.dump();
}

Query parse_query(const std::string& json_text) {
    auto j = nlohmann::ordered_json::parse(json_text);
    Query q;
    q.stock = j.at("query_stock").get<std::string>();
    q.date = parse_date(j.at("query_date").get<std::string>());
    const auto& dates = j.at("recent_date_list");
    const auto& closes = j.at("adjusted_close_list");
    if (dates.size() != kWindowDays || closes.size() != kWindowDays)
        throw std::runtime_error("parse_query: window must have exactly " +
                                 std::to_string(kWindowDays) + " entries");
    for (int i = 0; i < kWindowDays; ++i) {
        q.recent_dates[i] = parse_date(dates[i].get<std::string>());
        q.adjusted_close[i] = closes[i].get<double>();
    }
    if (j.contains("ground_truth"))
        q.ground_truth = movement_from_string(j["ground_truth"].get<std::string>());
    return q;
}

Candidate parse_candidate(const std::string& json_text) {
    auto j = nlohmann::ordered_json::parse(json_text);
    Candidate c;
    c.stock = j.at("candidate_stock").get<std::string>();
    c.date = parse_date(j.at("candidate_date").get<std::string>());
    c.movement = movement_from_string(j.at("candidate_movement").get<std::string>());
    const auto& dates = j.at("recent_date_list");
    if (dates.size() != kWindowDays)
        throw std::runtime_error("parse_candidate: window must have exactly " +
                                 std::to_string(kWindowDays) + " entries");
    for (int i = 0; i < kWindowDays; ++i) c.recent_dates[i] = parse_date(dates[i].get<std::string>());

    std::string list_key;
    for (const auto& [key, _] : j.items()) {
        if (key == "candidate_stock" || key == "candidate_date" || key == "candidate_movement" ||
            key == "recent_date_list")
            continue;
        if (!list_key.empty())
            throw std::runtime_error("parse_candidate: multiple value lists ('" + list_key +
                                     "', '" + key + "')");
        list_key = key;
    }
    if (list_key.size() < 6 || list_key.substr(list_key.size() - 5) != "_list")
        throw std::runtime_error("parse_candidate: missing <indicator>_list key");
    std::string name = list_key.substr(0, list_key.size() - 5);
    int col = column_index(name);
    if (col < 0) throw std::runtime_error("parse_candidate: unknown indicator '" + name + "'");
    c.column = col;

    const auto& vals = j.at(list_key);
    if (vals.size() != kWindowDays)
        throw std::runtime_error("parse_candidate: value list must have exactly " +
                                 std::to_string(kWindowDays) + " entries");
    for (int i = 0; i < kWindowDays; ++i) {
        const auto& v = vals[i];
        if (v.is_number()) {
            c.values[i] = v.get<double>();
        } else if (v.is_string()) {
            std::string s = v.get<std::string>();
            if (kColumns[col].kind == ColumnKind::movement)
                c.values[i] = movement_from_string(s);
            else
                c.values[i] = signal_from_string(s);
        } else {
            throw std::runtime_error("parse_candidate: bad value in " + list_key);
        }
    }
    return c;
}

void write_pool(const CandidatePool& pool, std::ostream& out) {
    for (const auto& c : pool.items) out << serialize_candidate(c) << '\n';
}

CandidatePool read_pool(std::istream& in, const Date& dataset_start, const Date& high_water) {
    CandidatePool pool;
    pool.dataset_start = dataset_start;
    pool.high_water = high_water;
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        try {
            pool.items.push_back(parse_candidate(line));
        } catch (const std::exception& e) {
            throw std::runtime_error("pool line " + std::to_string(line_no) + ": " + e.what());
        }
        if (pool.items.size() > 1 &&
            candidate_less(pool.items.back(), pool.items[pool.items.size() - 2]))
            throw std::runtime_error("pool line " + std::to_string(line_no) +
                                     ": canonical order violated");
    }
    return pool;
}

void write_queries(const std::vector<Query>& queries, std::ostream& out) {
    for (const auto& q : queries) out << query_file_line(q) << '\n';
}

std::vector<Query> read_queries(std::istream& in) {
    std::vector<Query> out;
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        try {
            out.push_back(parse_query(line));
        } catch (const std::exception& e) {
            throw std::runtime_error("query line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return out;
}

}  // namespace finsrag

#include "finsrag/market_data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace finsrag {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

double parse_double_field(const std::string& s, size_t line_no, const char* field) {
    double v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v))
        throw std::runtime_error("row " + std::to_string(line_no) + ": bad value '" + s +
                                 "' in field '" + field + "'");
    return v;
}

constexpr const char* kHeader[8] = {"stock", "date",  "open",      "high",
                                    "low",   "close", "adj_close", "volume"};

}  // namespace

const StockSeries* BarTable::find(std::string_view ticker) const {
    auto it = std::lower_bound(stocks.begin(), stocks.end(), ticker,
                               [](const StockSeries& s, std::string_view t) { return s.stock < t; });
    if (it == stocks.end() || it->stock != ticker) return nullptr;
    return &*it;
}

size_t BarTable::total_bars() const {
    size_t n = 0;
    for (const auto& s : stocks) n += s.size();
    return n;
}

Date BarTable::first_date() const {
    if (stocks.empty()) throw std::runtime_error("bar table is empty");
    Date d = stocks.front().dates.front();
    for (const auto& s : stocks) d = std::min(d, s.dates.front());
    return d;
}

Date BarTable::last_date() const {
    if (stocks.empty()) throw std::runtime_error("bar table is empty");
    Date d = stocks.front().dates.back();
    for (const auto& s : stocks) d = std::max(d, s.dates.back());
    return d;
}

BarTable ingest_bars(std::istream& in, std::ostream* warnings) {
    std::string line;
    if (!std::getline(in, line)) return {};  // empty stream -> empty table
    auto header = split_csv_line(line);
    if (header.size() != 8)
        throw std::runtime_error("bad CSV header: expected 8 columns, got " +
                                 std::to_string(header.size()));
    for (int i = 0; i < 8; ++i)
        if (header[i] != kHeader[i])
            throw std::runtime_error("bad CSV header: column " + std::to_string(i + 1) +
                                     " is '" + header[i] + "', expected '" + kHeader[i] + "'");

    std::map<std::string, std::vector<Bar>> by_stock;
    size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        auto f = split_csv_line(line);
        if (f.size() != 8)
            throw std::runtime_error("row " + std::to_string(line_no) + ": expected 8 fields, got " +
                                     std::to_string(f.size()));
        Bar b;
        b.stock = f[0];
        if (b.stock.empty())
            throw std::runtime_error("row " + std::to_string(line_no) + ": empty field 'stock'");
        try {
            b.date = parse_date(f[1]);
        } catch (const std::exception& e) {
            throw std::runtime_error("row " + std::to_string(line_no) + ": field 'date': " + e.what());
        }
        b.open = parse_double_field(f[2], line_no, "open");
        b.high = parse_double_field(f[3], line_no, "high");
        b.low = parse_double_field(f[4], line_no, "low");
        b.close = parse_double_field(f[5], line_no, "close");
        b.adj_close = parse_double_field(f[6], line_no, "adj_close");
        b.volume = parse_double_field(f[7], line_no, "volume");
        for (auto [v, name] : {std::pair{b.open, "open"}, {b.high, "high"}, {b.low, "low"},
                               {b.close, "close"}, {b.adj_close, "adj_close"}})
            if (v <= 0)
                throw std::runtime_error("row " + std::to_string(line_no) + ": field '" +
                                         std::string(name) + "' must be positive");
        if (b.volume < 0 || b.volume != std::floor(b.volume))
            throw std::runtime_error("row " + std::to_string(line_no) +
                                     ": field 'volume' must be a non-negative integer");
        if (warnings && !(b.low <= std::min(b.open, b.close) && std::max(b.open, b.close) <= b.high))
            *warnings << "warning: OHLC range anomaly for " << b.stock << " on "
                      << format_date(b.date) << "\n";
        by_stock[b.stock].push_back(std::move(b));
    }

    BarTable table;
    for (auto& [ticker, bars] : by_stock) {
        std::stable_sort(bars.begin(), bars.end(),
                         [](const Bar& a, const Bar& b) { return a.date < b.date; });
        StockSeries s;
        s.stock = ticker;
        for (size_t i = 0; i < bars.size(); ++i) {
            if (i > 0 && bars[i].date == bars[i - 1].date)
                throw std::runtime_error("duplicate bar for (" + ticker + ", " +
                                         format_date(bars[i].date) + ")");
            s.dates.push_back(bars[i].date);
            s.open.push_back(bars[i].open);
            s.high.push_back(bars[i].high);
            s.low.push_back(bars[i].low);
            s.close.push_back(bars[i].close);
            s.adj_close.push_back(bars[i].adj_close);
            s.volume.push_back(bars[i].volume);
        }
        table.stocks.push_back(std::move(s));
    }
    return table;  // map iteration already gives ticker order
}

BarTable ingest_bars_file(const std::string& path, std::ostream* warnings) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open bar CSV: " + path);
    return ingest_bars(in, warnings);
}

namespace {

std::string format_number(double v) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

}  // namespace

void write_bars_csv(const BarTable& table, std::ostream& out) {
    out << "stock,date,open,high,low,close,adj_close,volume\n";
    for (const auto& s : table.stocks)
        for (size_t t = 0; t < s.size(); ++t)
            out << s.stock << ',' << format_date(s.dates[t]) << ',' << format_number(s.open[t])
                << ',' << format_number(s.high[t]) << ',' << format_number(s.low[t]) << ','
                << format_number(s.close[t]) << ',' << format_number(s.adj_close[t]) << ','
                << static_cast<long long>(s.volume[t]) << '\n';
}

double compute_return(double adj_close_d, double adj_close_prev) {
    if (!std::isfinite(adj_close_d) || !std::isfinite(adj_close_prev) || adj_close_prev <= 0)
        throw std::domain_error("compute_return: previous price must be positive and finite");
    return (adj_close_d - adj_close_prev) / adj_close_prev * 100.0;
}

Movement label_movement(double return_pct) {
    if (!std::isfinite(return_pct)) throw std::domain_error("label_movement: non-finite return");
    if (return_pct > 0.55) return Movement::rise;
    if (return_pct < -0.5) return Movement::fall;
    return Movement::freeze;
}

PartitionSpec load_partition_spec(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open partition spec: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw std::runtime_error("partition spec " + path + ": " + e.what());
    }
    if (!j.is_object()) throw std::runtime_error("partition spec must be a JSON object");
    PartitionSpec spec;
    for (const char* name : {"train", "valid", "test"}) {
        if (!j.contains(name) || !j[name].is_array())
            throw std::runtime_error(std::string("partition spec needs array '") + name + "'");
        for (const auto& t : j[name]) spec.splits[name].push_back(t.get<std::string>());
    }
    for (const auto& [key, _] : j.items())
        if (key != "train" && key != "valid" && key != "test")
            throw std::runtime_error("partition spec has unknown split '" + key + "'");
    // pairwise disjoint
    std::map<std::string, std::string> seen;
    for (const auto& [split, tickers] : spec.splits)
        for (const auto& t : tickers) {
            auto [it, inserted] = seen.emplace(t, split);
            if (!inserted)
                throw std::runtime_error("ticker " + t + " appears in both '" + it->second +
                                         "' and '" + split + "'");
        }
    return spec;
}

std::map<std::string, std::string> partition_universe(const std::vector<std::string>& tickers,
                                                      const PartitionSpec& spec) {
    std::map<std::string, std::string> assignment;
    for (const auto& t : tickers) {
        const std::string* found = nullptr;
        for (const auto& [split, members] : spec.splits)
            if (std::find(members.begin(), members.end(), t) != members.end()) {
                if (found)
                    throw std::runtime_error("ticker " + t + " appears in two splits");
                found = &split;
            }
        if (!found) throw std::runtime_error("ticker " + t + " missing from partition spec");
        assignment[t] = *found;
    }
    return assignment;
}

}  // namespace finsrag

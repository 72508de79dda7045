#include "finsrag/columns.hpp"

#include <stdexcept>
#include <string>

namespace finsrag {

const std::array<ColumnInfo, kNumColumns> kColumns = {{
    {"movement", ColumnKind::movement},
    {"open", ColumnKind::numeric},
    {"high", ColumnKind::numeric},
    {"low", ColumnKind::numeric},
    {"close", ColumnKind::numeric},
    {"adj_close", ColumnKind::numeric},
    {"volume", ColumnKind::numeric},
    {"macd_histogram", ColumnKind::numeric},
    {"macd_crossover", ColumnKind::signal},
    {"bollinger_bands", ColumnKind::signal},
    {"exceeding_upper", ColumnKind::numeric},
    {"exceeding_lower", ColumnKind::numeric},
    {"overbought_and_oversold_conditions", ColumnKind::signal},
    {"kdj_crossover", ColumnKind::signal},
    {"returns", ColumnKind::numeric},
    {"VWAP", ColumnKind::numeric},
    {"alpha_smr", ColumnKind::numeric},
    {"alpha_mom", ColumnKind::numeric},
    {"alpha_002", ColumnKind::numeric},
    {"alpha_006", ColumnKind::numeric},
    {"alpha_009", ColumnKind::numeric},
    {"alpha_012", ColumnKind::numeric},
    {"alpha_021", ColumnKind::numeric},
    {"alpha_023", ColumnKind::numeric},
    {"alpha_024", ColumnKind::numeric},
    {"alpha_028", ColumnKind::numeric},
    {"alpha_032", ColumnKind::numeric},
    {"alpha_041", ColumnKind::numeric},
    {"alpha_046", ColumnKind::numeric},
    {"alpha_049", ColumnKind::numeric},
    {"alpha_051", ColumnKind::numeric},
    {"alpha_053", ColumnKind::numeric},
    {"alpha_054", ColumnKind::numeric},
    {"alpha_101", ColumnKind::numeric},
}};

int column_index(std::string_view name) {
    for (int i = 0; i < kNumColumns; ++i)
        if (kColumns[i].name == name) return i;
    return -1;
}

std::string_view to_string(Movement m) {
    switch (m) {
        case Movement::rise: return "rise";
        case Movement::fall: return "fall";
        case Movement::freeze: return "freeze";
    }
    throw std::logic_error("bad Movement value");
}

std::string_view to_string(Signal s) {
    switch (s) {
        case Signal::bullish: return "bullish";
        case Signal::bearish: return "bearish";
        case Signal::exceed_upper: return "exceed_upper";
        case Signal::exceed_lower: return "exceed_lower";
        case Signal::overbought: return "overbought";
        case Signal::oversold: return "oversold";
    }
    throw std::logic_error("bad Signal value");
}

Movement movement_from_string(std::string_view s) {
    if (s == "rise") return Movement::rise;
    if (s == "fall") return Movement::fall;
    if (s == "freeze") return Movement::freeze;
    throw std::invalid_argument("unknown movement label '" + std::string(s) + "'");
}

Signal signal_from_string(std::string_view s) {
    if (s == "bullish") return Signal::bullish;
    if (s == "bearish") return Signal::bearish;
    if (s == "exceed_upper") return Signal::exceed_upper;
    if (s == "exceed_lower") return Signal::exceed_lower;
    if (s == "overbought") return Signal::overbought;
    if (s == "oversold") return Signal::oversold;
    throw std::invalid_argument("unknown signal value '" + std::string(s) + "'");
}

double symbolic_code(Signal s) {
    switch (s) {
        case Signal::bullish:
        case Signal::exceed_upper:
        case Signal::overbought: return 1.0;
        case Signal::bearish:
        case Signal::exceed_lower:
        case Signal::oversold: return -1.0;
    }
    throw std::logic_error("bad Signal value");
}

double symbolic_code(Movement m) {
    switch (m) {
        case Movement::rise: return 1.0;
        case Movement::fall: return -1.0;
        case Movement::freeze: return 0.0;
    }
    throw std::logic_error("bad Movement value");
}

}  // namespace finsrag

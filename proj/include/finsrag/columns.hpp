#pragma once
// The 34-column indicator registry in exact datastore field order, plus the
// symbolic value domains (movement labels and event signals) shared by the
// feature table, candidate pool, and featurizer.

#include <array>
#include <cstdint>
#include <string_view>
#include <variant>

namespace finsrag {

enum class Movement : uint8_t { rise, fall, freeze };

// Event signals carried by the four signal-typed columns. Crossovers use
// bullish/bearish, Bollinger uses exceed_*, KDJ conditions use over*.
enum class Signal : uint8_t {
    bullish,
    bearish,
    exceed_upper,
    exceed_lower,
    overbought,
    oversold,
};

enum class ColumnKind : uint8_t { numeric, signal, movement };

struct ColumnInfo {
    std::string_view name;
    ColumnKind kind;
};

inline constexpr int kNumColumns = 34;

// Registry order == datastore field order == candidate `<name>_list` naming.
extern const std::array<ColumnInfo, kNumColumns> kColumns;

// -1 when unknown.
int column_index(std::string_view name);

std::string_view to_string(Movement m);
std::string_view to_string(Signal s);
Movement movement_from_string(std::string_view s);
Signal signal_from_string(std::string_view s);

// Ordinal codes for z-scoring symbolic windows: bullish-side events +1,
// bearish-side events -1, freeze 0.
double symbolic_code(Signal s);
double symbolic_code(Movement m);

// One feature-table cell; monostate means null (warmup or no event).
using Cell = std::variant<std::monostate, double, Signal, Movement>;

inline bool is_null(const Cell& c) { return std::holds_alternative<std::monostate>(c); }

}  // namespace finsrag

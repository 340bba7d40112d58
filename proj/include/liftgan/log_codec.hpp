#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "liftgan/log_event.hpp"

namespace liftgan::codec {

// ---------------------------------------------------------------------------
// Line grammar
//
//   {t} - New call: {id} from {o} to {d} guests {g}
//   {t} - Assign call: {id} on car_{SS}_{CC}
//   {t} - Load call: {id} on car_{SS}_{CC}
//   {t} - Unload call: {id} on car_{SS}_{CC} overtravel {v}
//
// Numbers are unsigned decimals without leading zeros. {id} is any non-empty
// run of [A-Za-z0-9_], so generated logs with foreign id schemes still parse.
// ---------------------------------------------------------------------------

std::string format_event(const LogEvent& event);

struct ParseOptions {
    // Match keywords ignoring ASCII case; needed for lowercase-folded text.
    bool case_insensitive = false;
};

struct ParseError {
    // Offset of the first mismatch: the start of a malformed field, or the
    // first differing character of an expected literal.
    std::size_t position = 0;
    std::string message;
};

using ParseResult = std::variant<LogEvent, ParseError>;

ParseResult parse_line(std::string_view line, ParseOptions options = {});

inline bool parsed(const ParseResult& r) { return std::holds_alternative<LogEvent>(r); }

// Splits on LF. A trailing LF does not start an extra (empty) line.
std::vector<std::string_view> split_lines(std::string_view text);

// ---------------------------------------------------------------------------
// Character vocabulary
// ---------------------------------------------------------------------------

using Token = std::int32_t;

class CodecError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class Vocabulary {
public:
    // Distinct bytes of the corpus (ASCII-lowercased first when fold_lowercase
    // is set), sorted by value and indexed from 0. Throws on an empty corpus.
    static Vocabulary build(std::string_view corpus, bool fold_lowercase);
    // Rebuilds from an explicit symbol list; it must be sorted and distinct.
    static Vocabulary from_symbols(std::string symbols, bool fold_lowercase);

    std::size_t size() const { return symbols_.size(); }
    bool folded() const { return folded_; }
    const std::string& symbols() const { return symbols_; }

    std::optional<Token> index_of(char c) const;
    char symbol(Token t) const;

    // Applies the folding this vocabulary was built with.
    std::string fold(std::string_view text) const;

    // FNV-1a over the symbols and the fold flag; identifies a vocabulary in
    // checkpoint manifests.
    std::uint64_t fingerprint() const;

    bool operator==(const Vocabulary&) const = default;

private:
    std::string symbols_;
    std::vector<std::int32_t> lookup_ = std::vector<std::int32_t>(256, -1);
    bool folded_ = false;
};

// Throws CodecError naming the first unknown character and its offset.
std::vector<Token> encode(std::string_view text, const Vocabulary& vocab);
// Throws CodecError on an out-of-range index.
std::string decode(std::span<const Token> tokens, const Vocabulary& vocab);

// Row-major [batch_size][seq_length] block of tokens.
struct SequenceBatch {
    std::size_t batch_size = 0;
    std::size_t seq_length = 0;
    std::vector<Token> tokens;

    Token at(std::size_t row, std::size_t t) const { return tokens[row * seq_length + t]; }
    std::span<const Token> row(std::size_t r) const {
        return std::span<const Token>(tokens).subspan(r * seq_length, seq_length);
    }
    bool operator==(const SequenceBatch&) const = default;
};

struct BatchPair {
    SequenceBatch input;
    SequenceBatch target;  // input shifted left by one character
};

// Cuts the stream into consecutive, non-overlapping windows of seq_length + 1
// tokens and groups batch_size windows per batch; the remainder is dropped.
std::vector<BatchPair> batchify(std::span<const Token> encoded, std::size_t seq_length, std::size_t batch_size);

// ---------------------------------------------------------------------------
// Realism / lifecycle validation
// ---------------------------------------------------------------------------

struct RealismReport {
    std::size_t lines_total = 0;
    std::size_t lines_parsed = 0;
    double line_parse_rate = 0.0;
    // Adjacent parsed lines with nondecreasing time. 1 when fewer than two
    // lines parsed.
    double timestamp_monotonic_fraction = 1.0;
    std::size_t call_ids = 0;
    // Ids whose events are exactly New, Assign, Load, Unload in line order.
    double lifecycle_complete_rate = 0.0;
    // Ids whose events are a proper, non-empty ordered prefix of the above
    // (consistent but cut off).
    double lifecycle_prefix_rate = 0.0;
    // Everything else: out of order, repeated, or not starting with New.
    double lifecycle_violation_rate = 0.0;
    // New events whose id already had a New event.
    double duplicate_new_rate = 0.0;
    std::size_t count_new = 0;
    std::size_t count_assign = 0;
    std::size_t count_load = 0;
    std::size_t count_unload = 0;
};

RealismReport realism_features(std::string_view log_text, ParseOptions options = {});

// key=value lines, one per field, fixed order.
std::string to_key_value(const RealismReport& report);
std::string realism_csv_header();
std::string to_csv_row(const RealismReport& report);

// Shortest round-trip decimal form of a double.
std::string format_double(double value);

}  // namespace liftgan::codec

#include "liftgan/log_codec.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cstdio>
#include <limits>
#include <unordered_map>

namespace liftgan {

std::string to_string(CarId id) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "car_%02d_%02d", id.shaft, id.car);
    return buf;
}

const char* to_string(EventKind kind) {
    switch (kind) {
        case EventKind::New: return "New";
        case EventKind::Assign: return "Assign";
        case EventKind::Load: return "Load";
        case EventKind::Unload: return "Unload";
    }
    return "?";
}

}  // namespace liftgan

namespace liftgan::codec {

namespace {

char lower(char c) { return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c; }

bool is_digit(char c) { return c >= '0' && c <= '9'; }

bool is_id_char(char c) {
    return is_digit(c) || c == '_' || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z');
}

class LineParser {
public:
    LineParser(std::string_view line, bool case_insensitive) : s_(line), ci_(case_insensitive) {}

    std::size_t pos() const { return pos_; }
    bool at_end() const { return pos_ == s_.size(); }

    ParseError error(std::size_t at, std::string message) const { return ParseError{at, std::move(message)}; }

    // Characters up to the next space or the end of the line.
    std::string_view field() {
        const auto end = std::min(s_.find(' ', pos_), s_.size());
        const auto f = s_.substr(pos_, end - pos_);
        pos_ = end;
        return f;
    }

    std::optional<ParseError> literal(std::string_view lit) {
        for (std::size_t i = 0; i < lit.size(); ++i) {
            if (pos_ + i >= s_.size() || !same(s_[pos_ + i], lit[i])) {
                return error(pos_ + i, "expected \"" + std::string(lit) + "\"");
            }
        }
        pos_ += lit.size();
        return std::nullopt;
    }

    std::optional<ParseError> number(std::int64_t& out) {
        const auto start = pos_;
        const auto f = field();
        if (f.empty() || !std::all_of(f.begin(), f.end(), is_digit) || (f.size() > 1 && f[0] == '0')) {
            return error(start, "expected a decimal number");
        }
        auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), out);
        if (ec != std::errc{}) return error(start, "number out of range");
        return std::nullopt;
    }

    std::optional<ParseError> identifier(std::string& out) {
        const auto start = pos_;
        const auto f = field();
        if (f.empty() || !std::all_of(f.begin(), f.end(), is_id_char)) return error(start, "expected a call id");
        out = std::string(f);
        return std::nullopt;
    }

    std::optional<ParseError> car(CarId& out) {
        const auto start = pos_;
        const auto f = field();
        const bool shape_ok = f.size() == 9 && same(f[0], 'c') && same(f[1], 'a') && same(f[2], 'r') &&
                              f[3] == '_' && is_digit(f[4]) && is_digit(f[5]) && f[6] == '_' && is_digit(f[7]) &&
                              is_digit(f[8]);
        if (!shape_ok) return error(start, "expected car_SS_CC");
        out = CarId{(f[4] - '0') * 10 + (f[5] - '0'), (f[7] - '0') * 10 + (f[8] - '0')};
        return std::nullopt;
    }

    std::optional<EventKind> kind() {
        static constexpr std::array<std::pair<std::string_view, EventKind>, 4> kinds{{
            {"New", EventKind::New},
            {"Assign", EventKind::Assign},
            {"Load", EventKind::Load},
            {"Unload", EventKind::Unload},
        }};
        const auto f = field();
        for (const auto& [name, k] : kinds) {
            if (f.size() == name.size() && std::equal(f.begin(), f.end(), name.begin(), [this](char a, char b) {
                    return same(a, b);
                })) {
                return k;
            }
        }
        return std::nullopt;
    }

private:
    bool same(char a, char b) const { return ci_ ? lower(a) == lower(b) : a == b; }

    std::string_view s_;
    std::size_t pos_ = 0;
    bool ci_;
};

}  // namespace

std::string format_event(const LogEvent& event) {
    std::string out = std::to_string(event.time);
    out += " - ";
    out += to_string(event.kind());
    out += " call: ";
    out += event.call_id;
    std::visit(
        [&out](const auto& p) {
            using P = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<P, NewCallPayload>) {
                out += " from " + std::to_string(p.origin) + " to " + std::to_string(p.destination) + " guests " +
                       std::to_string(p.guests);
            } else if constexpr (std::is_same_v<P, UnloadCallPayload>) {
                out += " on " + to_string(p.car) + " overtravel " + std::to_string(p.overtravel);
            } else {
                out += " on " + to_string(p.car);
            }
        },
        event.payload);
    return out;
}

ParseResult parse_line(std::string_view line, ParseOptions options) {
    LineParser p(line, options.case_insensitive);
    LogEvent event;

    if (auto e = p.number(event.time)) return *e;
    if (auto e = p.literal(" - ")) return *e;
    const auto kind_start = p.pos();
    const auto kind = p.kind();
    if (!kind) return p.error(kind_start, "unknown operation");
    if (auto e = p.literal(" call: ")) return *e;
    if (auto e = p.identifier(event.call_id)) return *e;

    switch (*kind) {
        case EventKind::New: {
            NewCallPayload payload;
            if (auto e = p.literal(" from ")) return *e;
            if (auto e = p.number(payload.origin)) return *e;
            if (auto e = p.literal(" to ")) return *e;
            if (auto e = p.number(payload.destination)) return *e;
            if (auto e = p.literal(" guests ")) return *e;
            if (auto e = p.number(payload.guests)) return *e;
            event.payload = payload;
            break;
        }
        case EventKind::Assign:
        case EventKind::Load: {
            CarId car;
            if (auto e = p.literal(" on ")) return *e;
            if (auto e = p.car(car)) return *e;
            if (*kind == EventKind::Assign) {
                event.payload = AssignCallPayload{car};
            } else {
                event.payload = LoadCallPayload{car};
            }
            break;
        }
        case EventKind::Unload: {
            UnloadCallPayload payload;
            if (auto e = p.literal(" on ")) return *e;
            if (auto e = p.car(payload.car)) return *e;
            if (auto e = p.literal(" overtravel ")) return *e;
            if (auto e = p.number(payload.overtravel)) return *e;
            event.payload = payload;
            break;
        }
    }
    if (!p.at_end()) return p.error(p.pos(), "trailing characters");
    return event;
}

std::vector<std::string_view> split_lines(std::string_view text) {
    std::vector<std::string_view> lines;
    std::size_t start = 0;
    while (start < text.size()) {
        const auto end = text.find('\n', start);
        if (end == std::string_view::npos) {
            lines.push_back(text.substr(start));
            break;
        }
        lines.push_back(text.substr(start, end - start));
        start = end + 1;
    }
    return lines;
}

// --- Vocabulary ------------------------------------------------------------

Vocabulary Vocabulary::build(std::string_view corpus, bool fold_lowercase) {
    if (corpus.empty()) throw CodecError("cannot build a vocabulary from an empty corpus");
    std::array<bool, 256> seen{};
    for (char c : corpus) seen[static_cast<unsigned char>(fold_lowercase ? lower(c) : c)] = true;
    std::string symbols;
    for (int b = 0; b < 256; ++b) {
        if (seen[static_cast<std::size_t>(b)]) symbols.push_back(static_cast<char>(b));
    }
    return from_symbols(std::move(symbols), fold_lowercase);
}

Vocabulary Vocabulary::from_symbols(std::string symbols, bool fold_lowercase) {
    if (symbols.empty()) throw CodecError("vocabulary must not be empty");
    Vocabulary v;
    v.folded_ = fold_lowercase;
    for (std::size_t i = 0; i < symbols.size(); ++i) {
        const auto b = static_cast<unsigned char>(symbols[i]);
        if (i > 0 && b <= static_cast<unsigned char>(symbols[i - 1])) {
            throw CodecError("vocabulary symbols must be sorted and distinct");
        }
        v.lookup_[b] = static_cast<std::int32_t>(i);
    }
    v.symbols_ = std::move(symbols);
    return v;
}

std::optional<Token> Vocabulary::index_of(char c) const {
    const auto i = lookup_[static_cast<unsigned char>(folded_ ? lower(c) : c)];
    if (i < 0) return std::nullopt;
    return i;
}

char Vocabulary::symbol(Token t) const {
    if (t < 0 || static_cast<std::size_t>(t) >= symbols_.size()) {
        throw CodecError("token " + std::to_string(t) + " outside vocabulary of size " + std::to_string(size()));
    }
    return symbols_[static_cast<std::size_t>(t)];
}

std::string Vocabulary::fold(std::string_view text) const {
    std::string out(text);
    if (folded_) std::transform(out.begin(), out.end(), out.begin(), lower);
    return out;
}

std::uint64_t Vocabulary::fingerprint() const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    const auto mix = [&h](unsigned char b) {
        h ^= b;
        h *= 0x100000001b3ULL;
    };
    for (char c : symbols_) mix(static_cast<unsigned char>(c));
    mix(folded_ ? 1 : 0);
    return h;
}

std::vector<Token> encode(std::string_view text, const Vocabulary& vocab) {
    std::vector<Token> out;
    out.reserve(text.size());
    for (std::size_t i = 0; i < text.size(); ++i) {
        const auto t = vocab.index_of(text[i]);
        if (!t) {
            char buf[96];
            std::snprintf(buf, sizeof buf, "character 0x%02x at offset %zu is not in the vocabulary",
                          static_cast<unsigned>(static_cast<unsigned char>(text[i])), i);
            throw CodecError(buf);
        }
        out.push_back(*t);
    }
    return out;
}

std::string decode(std::span<const Token> tokens, const Vocabulary& vocab) {
    std::string out;
    out.reserve(tokens.size());
    for (Token t : tokens) out.push_back(vocab.symbol(t));
    return out;
}

std::vector<BatchPair> batchify(std::span<const Token> encoded, std::size_t seq_length, std::size_t batch_size) {
    if (seq_length == 0 || batch_size == 0) throw CodecError("batchify: seq_length and batch_size must be positive");
    const std::size_t window = seq_length + 1;
    if (encoded.size() < batch_size * window) {
        throw CodecError("batchify: corpus of " + std::to_string(encoded.size()) + " tokens cannot fill one batch of " +
                         std::to_string(batch_size) + " x " + std::to_string(window));
    }
    const std::size_t n_batches = encoded.size() / window / batch_size;
    std::vector<BatchPair> batches;
    batches.reserve(n_batches);
    for (std::size_t b = 0; b < n_batches; ++b) {
        BatchPair pair;
        pair.input = {batch_size, seq_length, {}};
        pair.target = {batch_size, seq_length, {}};
        pair.input.tokens.reserve(batch_size * seq_length);
        pair.target.tokens.reserve(batch_size * seq_length);
        for (std::size_t r = 0; r < batch_size; ++r) {
            const auto w = encoded.subspan((b * batch_size + r) * window, window);
            pair.input.tokens.insert(pair.input.tokens.end(), w.begin(), w.end() - 1);
            pair.target.tokens.insert(pair.target.tokens.end(), w.begin() + 1, w.end());
        }
        batches.push_back(std::move(pair));
    }
    return batches;
}

// --- Realism ---------------------------------------------------------------

RealismReport realism_features(std::string_view log_text, ParseOptions options) {
    RealismReport r;
    // Per id: number of lifecycle stages seen in order, or -1 once violated.
    std::unordered_map<std::string, int> lifecycle;
    std::unordered_map<std::string, int> news;
    std::size_t pairs = 0;
    std::size_t monotonic = 0;
    std::optional<std::int64_t> previous_time;
    std::size_t duplicate_new = 0;

    for (const auto line : split_lines(log_text)) {
        ++r.lines_total;
        auto result = parse_line(line, options);
        if (!parsed(result)) continue;
        const LogEvent& e = std::get<LogEvent>(result);
        ++r.lines_parsed;

        if (previous_time) {
            ++pairs;
            if (e.time >= *previous_time) ++monotonic;
        }
        previous_time = e.time;

        switch (e.kind()) {
            case EventKind::New:
                ++r.count_new;
                if (news[e.call_id]++ > 0) ++duplicate_new;
                break;
            case EventKind::Assign: ++r.count_assign; break;
            case EventKind::Load: ++r.count_load; break;
            case EventKind::Unload: ++r.count_unload; break;
        }

        auto it = lifecycle.try_emplace(e.call_id, 0).first;
        int& stage = it->second;
        if (stage >= 0) stage = (static_cast<int>(e.kind()) == stage) ? stage + 1 : -1;
    }

    r.line_parse_rate = r.lines_total ? static_cast<double>(r.lines_parsed) / static_cast<double>(r.lines_total) : 0.0;
    r.timestamp_monotonic_fraction = pairs ? static_cast<double>(monotonic) / static_cast<double>(pairs) : 1.0;
    r.duplicate_new_rate = r.count_new ? static_cast<double>(duplicate_new) / static_cast<double>(r.count_new) : 0.0;

    r.call_ids = lifecycle.size();
    std::size_t complete = 0;
    std::size_t prefix = 0;
    for (const auto& [id, stage] : lifecycle) {
        if (stage == 4) {
            ++complete;
        } else if (stage > 0) {
            ++prefix;
        }
    }
    if (r.call_ids) {
        const auto n = static_cast<double>(r.call_ids);
        r.lifecycle_complete_rate = static_cast<double>(complete) / n;
        r.lifecycle_prefix_rate = static_cast<double>(prefix) / n;
        r.lifecycle_violation_rate = static_cast<double>(r.call_ids - complete - prefix) / n;
    }
    return r;
}

std::string format_double(double value) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
    return std::string(buf, ptr);
}

namespace {

std::vector<std::pair<std::string, std::string>> report_fields(const RealismReport& r) {
    return {
        {"lines_total", std::to_string(r.lines_total)},
        {"lines_parsed", std::to_string(r.lines_parsed)},
        {"line_parse_rate", format_double(r.line_parse_rate)},
        {"timestamp_monotonic_fraction", format_double(r.timestamp_monotonic_fraction)},
        {"call_ids", std::to_string(r.call_ids)},
        {"lifecycle_complete_rate", format_double(r.lifecycle_complete_rate)},
        {"lifecycle_prefix_rate", format_double(r.lifecycle_prefix_rate)},
        {"lifecycle_violation_rate", format_double(r.lifecycle_violation_rate)},
        {"duplicate_new_rate", format_double(r.duplicate_new_rate)},
        {"count_new", std::to_string(r.count_new)},
        {"count_assign", std::to_string(r.count_assign)},
        {"count_load", std::to_string(r.count_load)},
        {"count_unload", std::to_string(r.count_unload)},
    };
}

}  // namespace

std::string to_key_value(const RealismReport& report) {
    std::string out;
    for (const auto& [k, v] : report_fields(report)) out += k + "=" + v + "\n";
    return out;
}

std::string realism_csv_header() {
    std::string out;
    for (const auto& [k, v] : report_fields(RealismReport{})) out += (out.empty() ? "" : ",") + k;
    return out;
}

std::string to_csv_row(const RealismReport& report) {
    std::string out;
    for (const auto& [k, v] : report_fields(report)) out += (out.empty() ? "" : ",") + v;
    return out;
}

}  // namespace liftgan::codec

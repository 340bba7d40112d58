#pragma once

#include <compare>
#include <cstdint>
#include <string>
#include <variant>

namespace liftgan {

// Shaft and car indices are 1-based; car 1 is the lowest car in its shaft.
struct CarId {
    int shaft = 1;
    int car = 1;

    auto operator<=>(const CarId&) const = default;
};

// "car_SS_CC", zero-padded to two digits.
std::string to_string(CarId id);

enum class EventKind { New, Assign, Load, Unload };

const char* to_string(EventKind kind);

struct NewCallPayload {
    std::int64_t origin = 0;
    std::int64_t destination = 0;
    std::int64_t guests = 0;
    bool operator==(const NewCallPayload&) const = default;
};

struct AssignCallPayload {
    CarId car;
    bool operator==(const AssignCallPayload&) const = default;
};

struct LoadCallPayload {
    CarId car;
    bool operator==(const LoadCallPayload&) const = default;
};

struct UnloadCallPayload {
    CarId car;
    std::int64_t overtravel = 0;
    bool operator==(const UnloadCallPayload&) const = default;
};

// One line of the simulator log. The payload alternative determines the kind,
// so kind-specific fields are present exactly when they are meaningful.
struct LogEvent {
    std::int64_t time = 0;
    std::string call_id;
    std::variant<NewCallPayload, AssignCallPayload, LoadCallPayload, UnloadCallPayload> payload;

    EventKind kind() const { return static_cast<EventKind>(payload.index()); }

    bool operator==(const LogEvent&) const = default;
};

}  // namespace liftgan

#pragma once

#include <cstdint>
#include <deque>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "liftgan/kv_config.hpp"
#include "liftgan/log_event.hpp"
#include "liftgan/rng.hpp"

namespace liftgan::sim {

using Tick = std::int64_t;
using CallId = std::uint64_t;

inline constexpr Tick kDwellTicks = 2;
inline constexpr int kMaxGuestsPerCall = 10;

struct BuildingConfig {
    int num_shafts = 5;
    int cars_per_shaft = 3;
    int num_floors = 30;
    int car_capacity = 10;
    double arrival_rate = 0.0055;
    std::uint64_t seed = 1;

    // Throws ConfigError. Besides the basic ranges, requires
    // num_floors > cars_per_shaft (every car needs room to move) and at most
    // 99 shafts / cars per shaft (two-digit car ids).
    void validate() const;

    bool operator==(const BuildingConfig&) const = default;
};

// Reads num_shafts, cars_per_shaft, num_floors, car_capacity, arrival_rate and
// seed; missing keys keep their defaults.
BuildingConfig building_config_from(const KeyValueConfig& kv);

enum class Direction { Up, Down, Idle };
enum class StopAction { Load, Unload };

struct Stop {
    int floor = 1;
    StopAction action = StopAction::Load;
    CallId call = 0;
    bool operator==(const Stop&) const = default;
};

struct CarState {
    CarId id;
    int position = 1;
    Direction direction = Direction::Idle;
    int load = 0;
    std::deque<Stop> itinerary;
    // Ticks left before the doors close at the current stop; 0 when not dwelling.
    Tick dwell_remaining = 0;
    // Total floors travelled since the simulation started.
    std::int64_t odometer = 0;

    bool busy() const { return !itinerary.empty(); }
    bool operator==(const CarState&) const = default;
};

enum class CallStatus { Pending, Active, Completed };

struct Call {
    CallId id = 0;
    int origin = 1;
    int destination = 2;
    int guests = 1;
    Tick t_new = 0;
    std::optional<Tick> t_assign;
    std::optional<Tick> t_load;
    std::optional<Tick> t_unload;
    std::optional<CarId> assigned_car;
    std::optional<int> overtravel;
    std::int64_t odometer_at_load = 0;
    CallStatus status = CallStatus::Pending;

    bool operator==(const Call&) const = default;
};

// Raised when a tick leaves the building in an impossible state (cars
// crossing, overload). Indicates a bug in the simulator, not bad input.
class InvariantViolation : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

// (floors travelled by the car since the call was loaded) - |destination - origin|,
// clamped at zero.
int compute_overtravel(const CarState& car, const Call& call);

// Discrete-event simulation of a multi-car elevator building.
//
// One tick runs, in order: random call generation, assignment of every
// pending call (ascending id), car motion (at most one floor per car), and
// stop handling (doors stay open kDwellTicks ticks, then the stop's loads and
// unloads are performed). Events carry the clock value of the tick that
// emitted them.
//
// Cars sharing a shaft keep strict vertical order. Each busy car has an
// envelope, the span of floors between its position and its remaining stops.
// A car is only assigned a call if its grown envelope stays clear of every
// other busy car in the shaft (leaving room for the idle cars in between).
// Idle cars are pushed out of the way one floor per tick.
class Simulation {
public:
    explicit Simulation(BuildingConfig config);

    Tick clock() const { return clock_; }
    const BuildingConfig& config() const { return config_; }
    std::span<const CarState> cars() const { return cars_; }
    const CarState& car(CarId id) const;
    // Calls indexed by id - 1.
    const std::vector<Call>& calls() const { return calls_; }
    const Call& call(CallId id) const { return calls_.at(id - 1); }
    const std::vector<CallId>& pending() const { return pending_; }

    // True when no call is pending or in flight.
    bool quiescent() const;

    // One Bernoulli draw; on success draws the call and appends its New event.
    std::optional<CallId> maybe_generate_call(std::vector<LogEvent>& events);

    // Adds a call at the current clock without consuming randomness.
    CallId inject_call(int origin, int destination, int guests, std::vector<LogEvent>& events);

    // Greedy minimum-ETA assignment over feasible cars. Ties go to the lowest
    // shaft, then the lowest car. Returns nullopt (and emits nothing) when no
    // car can take the call this tick.
    std::optional<CarId> assign_call(CallId id, std::vector<LogEvent>& events);

    // Advances the clock by one tick and appends the emitted events.
    void step(std::vector<LogEvent>& events);
    std::vector<LogEvent> step();

    // Full consistency check (ordering, bounds, load conservation, call
    // bookkeeping). Throws InvariantViolation.
    void verify_invariants() const;

    bool operator==(const Simulation&) const = default;

private:
    struct Envelope {
        int lo;
        int hi;
    };

    std::size_t car_index(CarId id) const;
    Envelope envelope(const CarState& car) const;
    bool feasible(const CarState& car, const Call& call) const;
    Tick estimated_pickup(const CarState& car, const Call& call) const;
    void move_shaft(int shaft);
    void service_stops(std::vector<LogEvent>& events);
    void check_shaft_order() const;
    LogEvent make_event(const Call& call) const;

    BuildingConfig config_;
    Tick clock_ = 0;
    std::vector<CarState> cars_;  // shaft-major, lowest car first
    std::vector<Call> calls_;
    std::vector<CallId> pending_;
    Rng rng_;
};

// Runs a fresh simulation for t_max ticks and returns every event emitted.
// Calls still in flight at the horizon are simply cut off.
std::vector<LogEvent> run(const BuildingConfig& config, Tick t_max);

}  // namespace liftgan::sim

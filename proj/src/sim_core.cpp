#include "liftgan/sim_core.hpp"

#include <algorithm>
#include <cstdlib>
#include <limits>
#include <string>

namespace liftgan::sim {

namespace {

std::string call_name(CallId id) { return "call_" + std::to_string(id); }

}  // namespace

void BuildingConfig::validate() const {
    if (num_shafts < 1 || num_shafts > 99) throw ConfigError("num_shafts must be in 1..99");
    if (cars_per_shaft < 1 || cars_per_shaft > 99) throw ConfigError("cars_per_shaft must be in 1..99");
    if (num_floors < 2) throw ConfigError("num_floors must be at least 2");
    if (num_floors <= cars_per_shaft) throw ConfigError("num_floors must exceed cars_per_shaft");
    if (car_capacity < 1) throw ConfigError("car_capacity must be positive");
    if (!(arrival_rate >= 0.0 && arrival_rate <= 1.0)) throw ConfigError("arrival_rate must be in [0,1]");
}

BuildingConfig building_config_from(const KeyValueConfig& kv) {
    BuildingConfig c;
    c.num_shafts = static_cast<int>(kv.get_int("num_shafts", c.num_shafts));
    c.cars_per_shaft = static_cast<int>(kv.get_int("cars_per_shaft", c.cars_per_shaft));
    c.num_floors = static_cast<int>(kv.get_int("num_floors", c.num_floors));
    c.car_capacity = static_cast<int>(kv.get_int("car_capacity", c.car_capacity));
    c.arrival_rate = kv.get_double("arrival_rate", c.arrival_rate);
    c.seed = kv.get_uint("seed", c.seed);
    return c;
}

int compute_overtravel(const CarState& car, const Call& call) {
    if (!call.t_load) throw std::invalid_argument("compute_overtravel: call was never loaded");
    const std::int64_t travelled = car.odometer - call.odometer_at_load;
    const std::int64_t direct = std::abs(call.destination - call.origin);
    return static_cast<int>(std::max<std::int64_t>(0, travelled - direct));
}

Simulation::Simulation(BuildingConfig config) : config_(config), rng_(config.seed) {
    config_.validate();
    cars_.reserve(static_cast<std::size_t>(config_.num_shafts * config_.cars_per_shaft));
    for (int s = 1; s <= config_.num_shafts; ++s) {
        for (int k = 1; k <= config_.cars_per_shaft; ++k) {
            CarState car;
            car.id = CarId{s, k};
            car.position = k;
            cars_.push_back(std::move(car));
        }
    }
}

std::size_t Simulation::car_index(CarId id) const {
    if (id.shaft < 1 || id.shaft > config_.num_shafts || id.car < 1 || id.car > config_.cars_per_shaft) {
        throw std::out_of_range("no such car: " + to_string(id));
    }
    return static_cast<std::size_t>((id.shaft - 1) * config_.cars_per_shaft + (id.car - 1));
}

const CarState& Simulation::car(CarId id) const { return cars_[car_index(id)]; }

bool Simulation::quiescent() const {
    return std::all_of(calls_.begin(), calls_.end(),
                       [](const Call& c) { return c.status == CallStatus::Completed; });
}

LogEvent Simulation::make_event(const Call& call) const {
    LogEvent e;
    e.time = clock_;
    e.call_id = call_name(call.id);
    return e;
}

std::optional<CallId> Simulation::maybe_generate_call(std::vector<LogEvent>& events) {
    if (!rng_.bernoulli(config_.arrival_rate)) return std::nullopt;

    // Origin and destination are distinct floors. Pairs further apart than
    // num_floors - cars_per_shaft cannot be served by any single car without
    // breaking shaft order, so they are redrawn.
    const int reach = config_.num_floors - config_.cars_per_shaft;
    int origin = 0;
    int destination = 0;
    do {
        origin = static_cast<int>(rng_.uniform_int(1, config_.num_floors));
        destination = static_cast<int>(rng_.uniform_int(1, config_.num_floors - 1));
        if (destination >= origin) ++destination;
    } while (std::abs(destination - origin) > reach);
    const int guests = static_cast<int>(rng_.uniform_int(1, std::min(kMaxGuestsPerCall, config_.car_capacity)));
    return inject_call(origin, destination, guests, events);
}

CallId Simulation::inject_call(int origin, int destination, int guests, std::vector<LogEvent>& events) {
    if (origin < 1 || origin > config_.num_floors || destination < 1 || destination > config_.num_floors ||
        origin == destination) {
        throw std::invalid_argument("inject_call: invalid origin/destination");
    }
    if (guests < 1) throw std::invalid_argument("inject_call: guests must be positive");

    Call call;
    call.id = calls_.size() + 1;
    call.origin = origin;
    call.destination = destination;
    call.guests = guests;
    call.t_new = clock_;
    calls_.push_back(call);
    pending_.push_back(call.id);

    LogEvent e = make_event(call);
    e.payload = NewCallPayload{origin, destination, guests};
    events.push_back(std::move(e));
    return call.id;
}

Simulation::Envelope Simulation::envelope(const CarState& car) const {
    Envelope env{car.position, car.position};
    for (const Stop& stop : car.itinerary) {
        env.lo = std::min(env.lo, stop.floor);
        env.hi = std::max(env.hi, stop.floor);
    }
    return env;
}

bool Simulation::feasible(const CarState& car, const Call& call) const {
    if (call.guests > config_.car_capacity) return false;

    Envelope env = envelope(car);
    env.lo = std::min({env.lo, call.origin, call.destination});
    env.hi = std::max({env.hi, call.origin, call.destination});

    const int k = car.id.car;
    const int cars = config_.cars_per_shaft;
    if (env.lo < k || env.hi > config_.num_floors - cars + k) return false;

    const std::size_t first = car_index(CarId{car.id.shaft, 1});
    for (int other = 1; other <= cars; ++other) {
        if (other == k) continue;
        const CarState& neighbour = cars_[first + static_cast<std::size_t>(other - 1)];
        if (!neighbour.busy()) continue;
        const Envelope theirs = envelope(neighbour);
        if (other < k && theirs.hi + (k - other) > env.lo) return false;
        if (other > k && env.hi + (other - k) > theirs.lo) return false;
    }
    return true;
}

Tick Simulation::estimated_pickup(const CarState& car, const Call& call) const {
    Tick eta = 0;
    int pos = car.position;
    auto it = car.itinerary.begin();
    if (car.dwell_remaining > 0) {
        eta += car.dwell_remaining;
        while (it != car.itinerary.end() && it->floor == pos) ++it;
    }
    while (it != car.itinerary.end()) {
        const int floor = it->floor;
        eta += std::abs(floor - pos) + kDwellTicks;
        pos = floor;
        while (it != car.itinerary.end() && it->floor == floor) ++it;
    }
    return eta + std::abs(call.origin - pos);
}

std::optional<CarId> Simulation::assign_call(CallId id, std::vector<LogEvent>& events) {
    Call& call = calls_.at(id - 1);
    if (call.status != CallStatus::Pending) throw std::invalid_argument("assign_call: call is not pending");

    CarState* best = nullptr;
    Tick best_eta = std::numeric_limits<Tick>::max();
    for (CarState& car : cars_) {
        if (!feasible(car, call)) continue;
        const Tick eta = estimated_pickup(car, call);
        if (eta < best_eta) {
            best_eta = eta;
            best = &car;
        }
    }
    if (best == nullptr) return std::nullopt;

    best->itinerary.push_back(Stop{call.origin, StopAction::Load, call.id});
    best->itinerary.push_back(Stop{call.destination, StopAction::Unload, call.id});
    call.t_assign = clock_;
    call.assigned_car = best->id;
    call.status = CallStatus::Active;
    pending_.erase(std::find(pending_.begin(), pending_.end(), id));

    LogEvent e = make_event(call);
    e.payload = AssignCallPayload{best->id};
    events.push_back(std::move(e));
    return best->id;
}

void Simulation::move_shaft(int shaft) {
    const int n = config_.cars_per_shaft;
    CarState* cars = &cars_[car_index(CarId{shaft, 1})];

    // Intent per car: +1 up, -1 down, 0 stay.
    std::vector<int> intent(static_cast<std::size_t>(n), 0);
    for (int i = 0; i < n; ++i) {
        const CarState& car = cars[i];
        if (!car.busy() || car.dwell_remaining > 0) continue;
        const int target = car.itinerary.front().floor;
        intent[i] = (target > car.position) - (target < car.position);
    }

    // Busy movers push contiguous runs of idle cars ahead of them. An idle car
    // pushed from both sides stays put, and so do its pushers.
    std::vector<int> pushed(static_cast<std::size_t>(n), 0);
    bool conflict = false;
    for (int i = 0; i < n; ++i) {
        if (intent[i] != 1 || !cars[i].busy()) continue;
        for (int j = i + 1; j < n && !cars[j].busy() && cars[j].position == cars[j - 1].position + 1; ++j) {
            pushed[j] = 1;
        }
    }
    for (int i = n - 1; i >= 0; --i) {
        if (intent[i] != -1 || !cars[i].busy()) continue;
        for (int j = i - 1; j >= 0 && !cars[j].busy() && cars[j].position == cars[j + 1].position - 1; --j) {
            if (pushed[j] == 1) conflict = true;
            pushed[j] = -1;
        }
    }
    for (int i = 0; i < n; ++i) {
        if (!cars[i].busy()) intent[i] = conflict ? 0 : pushed[i];
    }

    // Upward moves from the top down, then downward moves from the bottom up,
    // so every car sees its neighbour's final position for this tick.
    for (int i = n - 1; i >= 0; --i) {
        if (intent[i] != 1) continue;
        const int limit = (i == n - 1) ? config_.num_floors : cars[i + 1].position - 1;
        if (cars[i].position + 1 <= limit) {
            ++cars[i].position;
            ++cars[i].odometer;
        }
    }
    for (int i = 0; i < n; ++i) {
        if (intent[i] != -1) continue;
        const int limit = (i == 0) ? 1 : cars[i - 1].position + 1;
        if (cars[i].position - 1 >= limit) {
            --cars[i].position;
            ++cars[i].odometer;
        }
    }
    for (int i = 0; i < n; ++i) {
        cars[i].direction = intent[i] > 0 ? Direction::Up : intent[i] < 0 ? Direction::Down : Direction::Idle;
    }
}

void Simulation::service_stops(std::vector<LogEvent>& events) {
    for (CarState& car : cars_) {
        if (car.dwell_remaining > 0) {
            if (--car.dwell_remaining > 0) continue;
            while (car.busy() && car.itinerary.front().floor == car.position) {
                const Stop stop = car.itinerary.front();
                car.itinerary.pop_front();
                Call& call = calls_.at(stop.call - 1);
                LogEvent e = make_event(call);
                if (stop.action == StopAction::Load) {
                    car.load += call.guests;
                    call.t_load = clock_;
                    call.odometer_at_load = car.odometer;
                    e.payload = LoadCallPayload{car.id};
                } else {
                    car.load -= call.guests;
                    call.t_unload = clock_;
                    call.overtravel = compute_overtravel(car, call);
                    call.status = CallStatus::Completed;
                    e.payload = UnloadCallPayload{car.id, *call.overtravel};
                }
                if (car.load > config_.car_capacity || car.load < 0) {
                    throw InvariantViolation("load out of range on " + to_string(car.id));
                }
                events.push_back(std::move(e));
            }
        } else if (car.busy() && car.itinerary.front().floor == car.position) {
            car.dwell_remaining = kDwellTicks;
        }
    }
}

void Simulation::check_shaft_order() const {
    const int n = config_.cars_per_shaft;
    for (std::size_t i = 0; i < cars_.size(); ++i) {
        const CarState& car = cars_[i];
        if (car.position < 1 || car.position > config_.num_floors) {
            throw InvariantViolation(to_string(car.id) + " left the building");
        }
        if (car.id.car < n && cars_[i + 1].position <= car.position) {
            throw InvariantViolation("shaft order violated above " + to_string(car.id) + " at tick " +
                                     std::to_string(clock_));
        }
    }
}

void Simulation::step(std::vector<LogEvent>& events) {
    ++clock_;
    maybe_generate_call(events);
    // assign_call edits pending_, so iterate over a snapshot.
    const std::vector<CallId> waiting = pending_;
    for (const CallId id : waiting) assign_call(id, events);
    for (int s = 1; s <= config_.num_shafts; ++s) move_shaft(s);
    check_shaft_order();
    service_stops(events);
}

std::vector<LogEvent> Simulation::step() {
    std::vector<LogEvent> events;
    step(events);
    return events;
}

void Simulation::verify_invariants() const {
    check_shaft_order();
    std::vector<int> expected_load(cars_.size(), 0);
    std::size_t pending_count = 0;
    for (const Call& call : calls_) {
        const auto ordered = [](std::optional<Tick> a, std::optional<Tick> b) { return !b || (a && *a <= *b); };
        if (!ordered(call.t_new, call.t_assign) || !ordered(call.t_assign, call.t_load) ||
            !ordered(call.t_load, call.t_unload)) {
            throw InvariantViolation("lifecycle out of order for " + call_name(call.id));
        }
        switch (call.status) {
            case CallStatus::Pending:
                ++pending_count;
                if (call.t_assign) throw InvariantViolation("pending call has an assignment");
                break;
            case CallStatus::Active:
                if (!call.t_assign || call.t_unload) throw InvariantViolation("active call in wrong phase");
                if (call.t_load) expected_load[car_index(*call.assigned_car)] += call.guests;
                break;
            case CallStatus::Completed:
                if (!call.t_unload || !call.overtravel) throw InvariantViolation("completed call missing unload");
                break;
        }
    }
    if (pending_count != pending_.size()) throw InvariantViolation("pending set out of sync");
    for (std::size_t i = 0; i < cars_.size(); ++i) {
        if (cars_[i].load != expected_load[i]) throw InvariantViolation("load not conserved on " + to_string(cars_[i].id));
        if (cars_[i].load > config_.car_capacity) throw InvariantViolation("capacity exceeded");
    }
}

std::vector<LogEvent> run(const BuildingConfig& config, Tick t_max) {
    Simulation sim(config);
    std::vector<LogEvent> events;
    events.reserve(static_cast<std::size_t>(std::max<double>(0.0, config.arrival_rate * t_max * 4.2)));
    for (Tick t = 0; t < t_max; ++t) sim.step(events);
    return events;
}

}  // namespace liftgan::sim

#pragma once

#include <cstdint>
#include <compare>
#include <iosfwd>
#include <set>
#include <span>
#include <string>
#include <vector>

namespace cosmos::context {

// Seconds since the Unix epoch, UTC. All timestamps in the system are this.
struct TimeInstant {
    std::int64_t seconds = 0;
    auto operator<=>(const TimeInstant&) const = default;
};

// Half-width of the interval around "now" used by the window filters.
class TimeWindow {
public:
    explicit TimeWindow(std::int64_t kappa_seconds);
    std::int64_t kappa_seconds() const { return kappa_seconds_; }

private:
    std::int64_t kappa_seconds_;
};

inline constexpr std::int64_t kDefaultWindowSeconds = 1800;
inline constexpr double kDefaultBatteryThresholdPct = 15.0;

enum class LocationSource { Gps, Wifi };

// One location fix: either a GPS lat/lon pair or a WiFi access-point sighting.
// Use the factories; they enforce that exactly the fields for the declared
// source are populated.
struct LocationReading {
    LocationSource source = LocationSource::Gps;
    double latitude = 0.0;        // GPS only
    double longitude = 0.0;       // GPS only
    std::string access_point_id;  // WiFi only
    double accuracy_m = 0.0;
    TimeInstant at;

    static LocationReading gps(double latitude, double longitude, double accuracy_m,
                               TimeInstant at);
    static LocationReading wifi(std::string access_point_id, double accuracy_m, TimeInstant at);
};

// A named circular region, optionally associated with WiFi access points.
// Discretizes raw location fixes into the categorical zone attribute.
struct Zone {
    std::string id;
    double center_lat = 0.0;
    double center_lon = 0.0;
    double radius_m = 0.0;
    std::set<std::string> wifi_ids;
};

struct SchedulerEvent {
    std::string category;  // e.g. "MEETING"
    std::string title;
    TimeInstant start;
};

enum class CallDirection { Incoming, Outgoing };

struct CallRecord {
    CallDirection direction = CallDirection::Incoming;
    std::string contact_id;
    std::string contact_category;  // e.g. "WORK", "FAMILY", "UNKNOWN"
    TimeInstant at;
    std::int64_t duration_s = 0;
};

struct BatteryState {
    double level_pct = 100.0;
    double threshold_pct = kDefaultBatteryThresholdPct;
    bool crisis = false;  // invariant: crisis == (level_pct <= threshold_pct)
};

// One observation of the four context factors at a capture instant.
// events/calls already satisfy the window conditions relative to captured_at.
struct ContextVector {
    LocationReading location;
    std::vector<SchedulerEvent> events;
    std::vector<CallRecord> calls;
    BatteryState battery;
    TimeInstant captured_at;
};

inline constexpr const char* kUnknownZone = "UNKNOWN";
inline constexpr const char* kNoneCategory = "NONE";

// The six classifier attributes derived from a ContextVector. This is the
// exact vector a client sends to the server.
struct AttributeRow {
    std::string zone_id = kUnknownZone;
    std::string event_category = kNoneCategory;
    int call_count = 0;
    std::string last_call_category = kNoneCategory;
    double battery_pct = 100.0;
    bool crisis = false;

    bool operator==(const AttributeRow&) const = default;
};

// Events whose start time lies within [now - kappa, now + kappa], input order
// preserved.
std::vector<SchedulerEvent> window_events(std::span<const SchedulerEvent> all_events,
                                          TimeInstant now, TimeWindow window);

// Calls within [now - kappa, now]. The log never contains future entries, so
// the window is one-sided at the top.
std::vector<CallRecord> window_calls(std::span<const CallRecord> all_calls, TimeInstant now,
                                     TimeWindow window);

// Throws DomainError unless both inputs are in [0, 100].
BatteryState assess_battery(double level_pct, double threshold_pct);

// GPS: nearest zone whose circle contains the point (ties: smaller distance,
// then lexicographically smaller id). WiFi: the zone listing the access point
// (ties: smaller id). "UNKNOWN" when nothing matches. Result does not depend
// on the order of the zone table.
std::string resolve_zone(const LocationReading& reading, std::span<const Zone> zones);

ContextVector assemble_context(LocationReading location,
                               std::span<const SchedulerEvent> all_events,
                               std::span<const CallRecord> all_calls, double battery_level_pct,
                               double battery_threshold_pct, TimeInstant now, TimeWindow window);

// zone id, category of the earliest event (ties: first listed), number of
// windowed calls, category of the most recent call (ties: last listed),
// battery level, crisis flag.
AttributeRow featurize(const ContextVector& ctx, std::span<const Zone> zones);

// Planar equirectangular distance in meters; adequate for zone radii up to a
// few kilometers.
double approx_distance_m(double lat1, double lon1, double lat2, double lon2);

// Zone table: one `id,center_lat,center_lon,radius_m[,wifi_id;wifi_id...]`
// per line, `#` comments. Throws ParseError / UsageError on bad tables.
std::vector<Zone> load_zones(std::istream& in);
std::vector<Zone> load_zones_file(const std::string& path);

}  // namespace cosmos::context

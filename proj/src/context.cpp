#include "cosmos/context.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>
#include <unordered_set>

#include "cosmos/errors.hpp"
#include "cosmos/strings.hpp"

namespace cosmos::context {

TimeWindow::TimeWindow(std::int64_t kappa_seconds) : kappa_seconds_(kappa_seconds) {
    if (kappa_seconds <= 0) throw DomainError("time window half-width must be positive");
}

LocationReading LocationReading::gps(double latitude, double longitude, double accuracy_m,
                                     TimeInstant at) {
    if (latitude < -90.0 || latitude > 90.0) throw DomainError("latitude out of [-90, 90]");
    if (longitude < -180.0 || longitude > 180.0) throw DomainError("longitude out of [-180, 180]");
    if (accuracy_m < 0.0) throw DomainError("accuracy must be non-negative");
    LocationReading r;
    r.source = LocationSource::Gps;
    r.latitude = latitude;
    r.longitude = longitude;
    r.accuracy_m = accuracy_m;
    r.at = at;
    return r;
}

LocationReading LocationReading::wifi(std::string access_point_id, double accuracy_m,
                                      TimeInstant at) {
    if (access_point_id.empty()) throw DomainError("access point id must be non-empty");
    if (accuracy_m < 0.0) throw DomainError("accuracy must be non-negative");
    LocationReading r;
    r.source = LocationSource::Wifi;
    r.access_point_id = std::move(access_point_id);
    r.accuracy_m = accuracy_m;
    r.at = at;
    return r;
}

std::vector<SchedulerEvent> window_events(std::span<const SchedulerEvent> all_events,
                                          TimeInstant now, TimeWindow window) {
    std::vector<SchedulerEvent> out;
    const auto kappa = window.kappa_seconds();
    for (const auto& ev : all_events) {
        if (ev.start.seconds >= now.seconds - kappa && ev.start.seconds <= now.seconds + kappa)
            out.push_back(ev);
    }
    return out;
}

std::vector<CallRecord> window_calls(std::span<const CallRecord> all_calls, TimeInstant now,
                                     TimeWindow window) {
    std::vector<CallRecord> out;
    const auto kappa = window.kappa_seconds();
    for (const auto& call : all_calls) {
        if (call.at.seconds >= now.seconds - kappa && call.at.seconds <= now.seconds)
            out.push_back(call);
    }
    return out;
}

BatteryState assess_battery(double level_pct, double threshold_pct) {
    if (!(level_pct >= 0.0 && level_pct <= 100.0))
        throw DomainError("battery level out of [0, 100]");
    if (!(threshold_pct >= 0.0 && threshold_pct <= 100.0))
        throw DomainError("battery threshold out of [0, 100]");
    return BatteryState{level_pct, threshold_pct, level_pct <= threshold_pct};
}

double approx_distance_m(double lat1, double lon1, double lat2, double lon2) {
    constexpr double kEarthRadiusM = 6371000.0;
    constexpr double kDegToRad = std::numbers::pi / 180.0;
    const double mean_lat = (lat1 + lat2) / 2.0 * kDegToRad;
    const double dx = (lon2 - lon1) * kDegToRad * std::cos(mean_lat);
    const double dy = (lat2 - lat1) * kDegToRad;
    return kEarthRadiusM * std::hypot(dx, dy);
}

std::string resolve_zone(const LocationReading& reading, std::span<const Zone> zones) {
    if (reading.source == LocationSource::Wifi) {
        const Zone* best = nullptr;
        for (const auto& z : zones) {
            if (!z.wifi_ids.contains(reading.access_point_id)) continue;
            if (best == nullptr || z.id < best->id) best = &z;
        }
        return best ? best->id : kUnknownZone;
    }
    const Zone* best = nullptr;
    double best_dist = 0.0;
    for (const auto& z : zones) {
        const double d =
            approx_distance_m(reading.latitude, reading.longitude, z.center_lat, z.center_lon);
        if (d > z.radius_m) continue;
        if (best == nullptr || d < best_dist || (d == best_dist && z.id < best->id)) {
            best = &z;
            best_dist = d;
        }
    }
    return best ? best->id : kUnknownZone;
}

ContextVector assemble_context(LocationReading location,
                               std::span<const SchedulerEvent> all_events,
                               std::span<const CallRecord> all_calls, double battery_level_pct,
                               double battery_threshold_pct, TimeInstant now, TimeWindow window) {
    ContextVector ctx;
    ctx.location = std::move(location);
    ctx.events = window_events(all_events, now, window);
    ctx.calls = window_calls(all_calls, now, window);
    ctx.battery = assess_battery(battery_level_pct, battery_threshold_pct);
    ctx.captured_at = now;
    return ctx;
}

AttributeRow featurize(const ContextVector& ctx, std::span<const Zone> zones) {
    AttributeRow row;
    row.zone_id = resolve_zone(ctx.location, zones);

    row.event_category = kNoneCategory;
    const SchedulerEvent* earliest = nullptr;
    for (const auto& ev : ctx.events) {
        if (earliest == nullptr || ev.start < earliest->start) earliest = &ev;
    }
    if (earliest) row.event_category = earliest->category;

    row.call_count = static_cast<int>(ctx.calls.size());
    row.last_call_category = kNoneCategory;
    const CallRecord* latest = nullptr;
    for (const auto& call : ctx.calls) {
        if (latest == nullptr || call.at >= latest->at) latest = &call;  // ties: last listed
    }
    if (latest) row.last_call_category = latest->contact_category;

    row.battery_pct = ctx.battery.level_pct;
    row.crisis = ctx.battery.crisis;
    return row;
}

std::vector<Zone> load_zones(std::istream& in) {
    std::vector<Zone> zones;
    std::unordered_set<std::string> seen;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto body = trim(line);
        if (body.empty() || body.front() == '#') continue;
        auto fields = split(body, ',');
        if (fields.size() != 4 && fields.size() != 5)
            throw ParseError(ParseErrorKind::Malformed,
                             "zone table line " + std::to_string(lineno) + ": expected 4 or 5 fields");
        Zone z;
        z.id = std::string(trim(fields[0]));
        if (z.id.empty())
            throw ParseError(ParseErrorKind::ValueError,
                             "zone table line " + std::to_string(lineno) + ": empty id");
        auto lat = parse_double(fields[1]);
        auto lon = parse_double(fields[2]);
        auto radius = parse_double(fields[3]);
        if (!lat || !lon || !radius)
            throw ParseError(ParseErrorKind::ValueError,
                             "zone table line " + std::to_string(lineno) + ": bad number");
        z.center_lat = *lat;
        z.center_lon = *lon;
        z.radius_m = *radius;
        if (z.radius_m <= 0.0)
            throw ParseError(ParseErrorKind::ValueError,
                             "zone table line " + std::to_string(lineno) + ": radius must be > 0");
        if (z.center_lat < -90.0 || z.center_lat > 90.0 || z.center_lon < -180.0 ||
            z.center_lon > 180.0)
            throw ParseError(ParseErrorKind::ValueError,
                             "zone table line " + std::to_string(lineno) + ": center out of range");
        if (fields.size() == 5) {
            for (const auto& ap : split(fields[4], ';')) {
                auto id = trim(ap);
                if (!id.empty()) z.wifi_ids.insert(std::string(id));
            }
        }
        if (!seen.insert(z.id).second)
            throw ParseError(ParseErrorKind::ValueError,
                             "zone table line " + std::to_string(lineno) + ": duplicate id " + z.id);
        zones.push_back(std::move(z));
    }
    return zones;
}

std::vector<Zone> load_zones_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw UsageError("cannot open zone table: " + path);
    return load_zones(in);
}

}  // namespace cosmos::context

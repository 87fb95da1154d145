#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "cosmos/context.hpp"
#include "cosmos/rng.hpp"
#include "cosmos/server.hpp"
#include "cosmos/settings.hpp"

namespace cosmos::harness {

// One simulated capture instant with everything the device would see, plus
// the scripted noise-free expectation kept in traces for auditing.
struct Tick {
    context::TimeInstant time;
    context::LocationReading location;
    std::vector<context::SchedulerEvent> events;
    std::vector<context::CallRecord> calls;
    double battery_pct = 100.0;
    settings::SettingsProfile ground_truth;
};

struct ScenarioScript {
    std::uint64_t seed = 0;
    std::vector<context::Zone> zones;
    std::vector<Tick> ticks;

    // Throws UsageError unless tick times are strictly increasing and battery
    // levels are in [0, 100].
    void validate() const;
};

// Scenario files are line oriented, `#` comments:
//   seed;<n>
//   zone;<id>,<lat>,<lon>,<radius_m>[,<ap>;<ap>...]
//   tick;<epoch>;<lat>,<lon> | wifi:<ap>;<cat>@<epoch>,...;<dir>,<cat>@<epoch>,...;<battery>;<B,P,W,Y,R,V>
ScenarioScript load_scenario(std::istream& in);
ScenarioScript load_scenario_file(const std::string& path);

// A single conjunct of a user rule.
struct UserCondition {
    enum class Kind { Zone, Event, CallCat, Crisis, BatteryLe, BatteryGt, CallsGe, CallsLt };
    Kind kind = Kind::Zone;
    std::string text;
    double number = 0.0;
    bool flag = false;

    bool matches(const context::AttributeRow& row) const;
};

struct UserRule {
    std::vector<UserCondition> conditions;  // conjunction, never empty
    settings::SettingsProfile profile;

    bool matches(const context::AttributeRow& row) const;
};

// Deterministic stand-in for the user: first matching rule wins, otherwise
// the default profile; each field then flips independently with probability
// noise_rate (toggles invert, levels move to one of the other four bins).
struct UserModel {
    std::vector<UserRule> rules;
    double noise_rate = 0.0;  // in [0, 1)
    settings::SettingsProfile default_profile;

    settings::SettingsProfile decide(const context::AttributeRow& row) const;
    settings::SettingsProfile respond(const context::AttributeRow& row, Rng& rng) const;
};

// User model files are line oriented, `#` comments:
//   noise;<rate>
//   default;<B,P,W,Y,R,V>
//   rule;<cond>&<cond>...;<B,P,W,Y,R,V>
// with conditions zone=V, event=V, callcat=V, crisis=yes|no, battery<=N,
// battery>N, calls>=N, calls<N.
UserModel load_user_model(std::istream& in);
UserModel load_user_model_file(const std::string& path);

enum class Relevance { CompletelyRelevant, PartiallyRelevant, CompletelyIrrelevant };

const char* relevance_name(Relevance r);  // "CR" / "PR" / "CIR"

// CR on all six fields matching, PR on 4 or 5, CIR on 3 or fewer.
Relevance score_relevance(const settings::SettingsProfile& suggested,
                          const settings::SettingsProfile& truth);

struct RelevanceTriple {
    double crs_pct = 0.0;
    double prs_pct = 0.0;
    double cis_pct = 0.0;
};

struct SessionScore {
    std::size_t scored = 0;  // suggestions graded (server already serving)
    std::size_t cr = 0;
    std::size_t pr = 0;
    std::size_t cir = 0;

    // Throws UsageError when nothing was scored.
    RelevanceTriple percentages() const;
};

struct RelevanceReport {
    std::vector<RelevanceTriple> sessions;
    double mean_crs = 0.0;
    double mean_prs = 0.0;
    double mean_cis = 0.0;
    double cumulative_relevant = 0.0;  // mean_crs + mean_prs
};

// Column means. Throws UsageError when sessions is empty, a percentage is
// outside [0, 100], or a triple does not sum to 100 within 0.1.
RelevanceReport aggregate_relevance(std::span<const RelevanceTriple> sessions);

struct BatterySession {
    double normal_hours = 0.0;
    double cosmos_hours = 0.0;
};

struct BatteryReport {
    std::vector<BatterySession> sessions;
    double mean_normal = 0.0;
    double mean_cosmos = 0.0;
};

// Column means. Throws UsageError when sessions is empty or any entry is
// not a positive number of hours.
BatteryReport aggregate_battery(std::span<const BatterySession> sessions);

// CSV fixtures with a header row:
//   session,normal_hours,cosmos_hours
//   session,crs,prs,cis
std::vector<BatterySession> load_battery_csv(std::istream& in);
std::vector<BatterySession> load_battery_csv_file(const std::string& path);
std::vector<RelevanceTriple> load_relevance_csv(std::istream& in);
std::vector<RelevanceTriple> load_relevance_csv_file(const std::string& path);

// Per-setting current draw. Brightness and ring volume scale linearly with
// their bin over 100; toggles contribute their full coefficient when ON.
struct DrainModel {
    double base_ma = 8.0;
    double bluetooth_ma = 4.0;
    double gps_ma = 25.0;
    double wifi_ma = 12.0;
    double brightness_ma = 30.0;
    double ring_ma = 0.0;
    double vibration_ma = 0.0;

    double drain_ma(const settings::SettingsProfile& p) const;
};

inline constexpr double kDefaultCapacityMah = 1500.0;

struct ProfileSpan {
    settings::SettingsProfile profile;
    double hours = 0.0;
};

// Integrates drain over the timeline; returns the elapsed hours at which the
// consumed charge reaches capacity, or the total timeline length when the
// battery outlasts it. Throws DomainError on non-positive capacity or base
// drain, UsageError on negative span durations.
double simulate_battery_hours(std::span<const ProfileSpan> timeline, double capacity_mah,
                              const DrainModel& model);

struct SimulationParams {
    server::ServerParams server;
    double battery_threshold_pct = context::kDefaultBatteryThresholdPct;
    std::int64_t window_seconds = context::kDefaultWindowSeconds;
    std::string client_id = "sim";
};

struct ScenarioResult {
    std::size_t ticks = 0;
    SessionScore score;
    server::Phase final_phase = server::Phase::Training;
    std::vector<std::string> trace;  // one line per tick
};

// Drives an in-process server tick by tick: featurize, ask the user model,
// upload with the observed profile, grade served responses against the user
// model's answer. Deterministic for a given (script, user, params).
ScenarioResult run_scenario(const ScenarioScript& script, const UserModel& user,
                            const SimulationParams& params);

}  // namespace cosmos::harness

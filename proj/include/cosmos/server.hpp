#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cosmos/context.hpp"
#include "cosmos/dtree.hpp"
#include "cosmos/protocol.hpp"
#include "cosmos/settings.hpp"

namespace cosmos::server {

struct Observation {
    context::AttributeRow row;
    settings::SettingsProfile label;
    context::TimeInstant at;
    std::uint64_t sequence = 0;
};

// One record per line: zone,event,callcount,callcat,battery,crisis followed
// by the six profile labels and the capture epoch. String fields share the
// dataset value alphabet: no commas or newlines, and `?` is reserved.
std::string observation_record(const Observation& o);
Observation parse_observation_record(std::string_view line);  // throws ParseError

// Append-only training store. With a backing file every append is flushed
// through; opening an existing file replays its records first.
class ObservationStore {
public:
    ObservationStore() = default;  // in-memory only
    static ObservationStore open(const std::string& path);

    // Throws UsageError when a string field cannot be represented in the
    // record format (see observation_record).
    std::uint64_t append(const context::AttributeRow& row,
                         const settings::SettingsProfile& label, context::TimeInstant at);

    const std::vector<Observation>& observations() const { return observations_; }
    std::size_t size() const { return observations_.size(); }
    std::uint64_t latest_id() const {
        return observations_.empty() ? 0 : observations_.back().sequence;
    }
    const std::string& path() const { return path_; }

private:
    std::vector<Observation> observations_;
    std::string path_;  // empty: no persistence
};

struct ServerParams {
    dtree::SufficiencyParams sufficiency;
    std::size_t retrain_every = 25;
    dtree::TrainParams train;
    settings::CriticalServicesRepository critical =
        settings::CriticalServicesRepository::defaults();
};

enum class Phase { Training, Serving };

using TreeSet = std::array<dtree::DecisionTree, settings::kSettingCount>;

// Context attribute schema covering the given observations: categorical value
// sets are the sorted distinct observed values plus the default sentinels
// ("UNKNOWN" zone, "NONE" categories), crisis is {NO, YES}; the label domain
// is the one for `setting`.
dtree::AttributeSchema build_schema(std::span<const Observation> observations,
                                    settings::SettingName setting);

struct RetrainOutcome {
    bool attempted = false;
    std::size_t trained_rows = 0;
    std::size_t holdout_rows = 0;
    double holdout_accuracy = 0.0;  // mean over the six settings
    bool sufficient = false;
};

class ServerState {
public:
    explicit ServerState(ServerParams params = ServerParams{})
        : params_(std::move(params)) {}
    ServerState(ObservationStore store, ServerParams params)
        : store_(std::move(store)), params_(std::move(params)) {}

    // Appends the upload to the store. Throws UsageError when the upload
    // carries no observed profile.
    std::uint64_t ingest_observation(const protocol::ContextUpload& upload);

    // Retrains when the store grew by at least retrain_every records since
    // the last attempt: chronological 80/20 split, six trees on the front
    // 80%, mean per-setting accuracy on the back 20%. Publishes the trees
    // and enters SERVING only when sufficiently trained; a SERVING server
    // keeps its previous trees across an insufficient retrain.
    RetrainOutcome retrain_if_due();

    // TRAINING: sentinel document. SERVING: decide_profile plus the
    // low-battery override. Never mutates state.
    protocol::SettingsDocument handle_context_request(
        const protocol::ContextUpload& upload) const;

    // Ingest when labeled, retrain when due, then answer.
    protocol::SettingsDocument process_upload(const protocol::ContextUpload& upload);

    Phase phase() const { return phase_; }
    const ObservationStore& store() const { return store_; }
    const std::optional<TreeSet>& trees() const { return trees_; }
    double last_holdout_accuracy() const { return last_accuracy_; }
    const ServerParams& params() const { return params_; }

private:
    ObservationStore store_;
    ServerParams params_;
    std::optional<TreeSet> trees_;
    Phase phase_ = Phase::Training;
    std::size_t last_retrain_size_ = 0;
    double last_accuracy_ = 0.0;
};

// Request body to response body. A plain body is context XML answered with
// settings XML. An "SMS "-prefixed body carries the same context XML and is
// answered with "SMS " plus the SMS-encoded settings document. Failures
// produce `ERR;<KIND>;<detail>` and leave the state untouched.
std::string process_request(ServerState& state, std::string_view body);

// --- local stream socket -----------------------------------------------

inline constexpr std::size_t kMaxFrameBytes = 1 << 20;

// Serves framed requests (4-byte big-endian length prefix) on a Unix stream
// socket until a frame with body "QUIT" arrives (answered "BYE"). Replaces
// any stale socket file. Throws DomainError on socket failures.
void run_server(const std::string& socket_path, ServerState& state);

// One framed request/response round trip.
std::string send_request(const std::string& socket_path, std::string_view body);

}  // namespace cosmos::server

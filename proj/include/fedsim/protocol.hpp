#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "fedsim/model.hpp"
#include "fedsim/vec.hpp"

namespace fedsim {

struct ProtocolConfig {
    double eta = 0.0;     // server-side learning rate, > 0
    int rounds = 0;       // >= 1
    int num_clients = 0;  // >= 2

    void validate() const;
};

// One client's submission for one round. Client ids run 1..N and every
// client submits exactly once per round (full participation).
struct UpdateMessage {
    int client_id = 0;
    int round = 0;
    ParamVector update;
};

struct ClientMetrics {
    double loss = 0.0;
    double accuracy_pct = 0.0;
};

// Full provenance for one round: everything needed to replay the server
// step and to audit any client's submitted update after the fact.
struct RoundRecord {
    int round = 0;
    ParamVector theta_before;
    std::vector<UpdateMessage> updates;  // ascending client id
    ParamVector theta_after;
    std::vector<ClientMetrics> per_client;  // index = client id - 1

    const UpdateMessage& update_from(int client_id) const;
};

// Payload exchanged over the declared coalition link, delivered by the
// engine after aggregation and before finish_round(). The fingerprint is
// the sender's shadow-model hash, letting receivers detect replicas that
// have drifted out of sync.
struct PeerMessage {
    int from = 0;
    int to = 0;
    int round = 0;
    ParamVector payload;
    std::uint64_t shadow_fingerprint = 0;
};

// A client's behavior in the round loop. The engine calls update() for
// every client, aggregates, then routes drain_outbox() output to receive()
// on the targets and finally calls finish_round() on everyone. Strategies
// own their private state; the engine never shares it.
class ClientStrategy {
public:
    virtual ~ClientStrategy() = default;
    virtual int client_id() const = 0;
    virtual UpdateMessage update(int round, const ParamVector& theta) = 0;
    virtual std::vector<PeerMessage> drain_outbox() { return {}; }
    virtual void receive(const PeerMessage&) {}
    virtual void finish_round(int /*round*/) {}
};

// Sends exactly the local gradient every round.
class HonestStrategy final : public ClientStrategy {
public:
    HonestStrategy(int id, const LossEvaluator& ev) : id_(id), ev_(&ev) {}
    int client_id() const override { return id_; }
    UpdateMessage update(int round, const ParamVector& theta) override;

private:
    int id_;
    const LossEvaluator* ev_;
};

// theta - eta * sum(updates), summed in ascending client-id order. Expects
// exactly one update from each of clients 1..num_clients; throws on
// missing or duplicate ids and on length mismatch.
ParamVector server_step(const ParamVector& theta, const std::vector<UpdateMessage>& updates,
                        double eta, int num_clients);

using MetricsFn = std::function<std::vector<ClientMetrics>(const ParamVector&)>;

// Runs the full broadcast / collect / aggregate / exchange loop for
// config.rounds rounds. Records are bitwise reproducible for the same
// inputs; metrics are measured on theta_after each round.
std::vector<RoundRecord> run_rounds(const ProtocolConfig& config,
                                    const std::vector<ClientStrategy*>& clients,
                                    const ParamVector& theta0,
                                    const MetricsFn& measure = {});

// Baseline trajectory if only this client trained: theta_{t+1} =
// theta_t - eta * grad(theta_t). Returns steps + 1 vectors starting at
// theta0.
std::vector<ParamVector> solo_trajectory(const LossEvaluator& ev, const ParamVector& theta0,
                                         double eta, int steps);

// Baseline trajectory if only this subset trained (>= 2 members); the
// gradient sum is taken in the order given, which callers keep at
// ascending client id.
std::vector<ParamVector> subset_trajectory(const std::vector<const LossEvaluator*>& evs,
                                           const ParamVector& theta0, double eta, int steps);

}  // namespace fedsim

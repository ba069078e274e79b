#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <vector>

#include "fedsim/protocol.hpp"

namespace fedsim {

// Privately maintained trajectory an attacker steers the server toward.
// After any completed round, current == previous - eta * (shadow gradient
// sum at previous).
struct ShadowState {
    enum class Kind { solo, coalition };
    ParamVector current;   // shadow at the next round
    ParamVector previous;  // shadow one step behind
    Kind kind = Kind::solo;
};

// Ordered set of collaborating dictator ids.
struct CoalitionSpec {
    std::vector<int> members;  // ascending, unique

    int size() const { return static_cast<int>(members.size()); }
    bool contains(int id) const;
    // 1 < P < num_clients and every id in 1..num_clients.
    void validate(int num_clients) const;
};

// Single dictator: sends the honest gradient at round 0, then each round a
// crafted update whose correction term reconstructs and cancels every other
// client's previous-round contribution, steering the server onto the solo
// shadow trajectory.
class DictatorStrategy final : public ClientStrategy {
public:
    DictatorStrategy(int id, const LossEvaluator& ev, double eta);

    int client_id() const override { return id_; }
    UpdateMessage update(int round, const ParamVector& theta) override;

    ShadowState shadow() const;

private:
    int id_;
    const LossEvaluator* ev_;
    double eta_;
    int next_round_ = 0;
    ParamVector cur_, prev_, grad_prev_;
};

// Coalition member: the correction term divides by P*eta so the P crafted
// updates jointly cancel the outsiders, and members exchange gradients each
// round to advance a bitwise-synchronized coalition shadow.
class CoalitionStrategy final : public ClientStrategy {
public:
    CoalitionStrategy(int id, CoalitionSpec coalition, const LossEvaluator& ev, double eta);

    int client_id() const override { return id_; }
    UpdateMessage update(int round, const ParamVector& theta) override;
    std::vector<PeerMessage> drain_outbox() override;
    void receive(const PeerMessage& msg) override;
    void finish_round(int round) override;

    ShadowState shadow() const;

private:
    int id_;
    CoalitionSpec coalition_;
    const LossEvaluator* ev_;
    double eta_;
    int next_round_ = 0;
    ParamVector cur_, prev_;
    ParamVector grad_self_, grad_prev_self_;
    std::vector<PeerMessage> outbox_;
    std::map<int, ParamVector> peer_grads_;
};

// Cheating coalition member (coalition of two). Cooperates like
// CoalitionStrategy while secretly tracking the solo trajectory and
// accumulating, over rounds 0..E-2, the gap between acting alone and
// collaborating. At the betrayal round E it sends the accumulated offset,
// teleporting the server near its solo trajectory; afterwards it behaves
// as a single dictator seeded from the secret shadow while still feeding
// the partner coalition gradients so the partnership machinery keeps
// running.
class CheaterStrategy final : public ClientStrategy {
public:
    CheaterStrategy(int id, int partner_id, int betrayal_round, const LossEvaluator& ev,
                    double eta);

    int client_id() const override { return id_; }
    UpdateMessage update(int round, const ParamVector& theta) override;
    std::vector<PeerMessage> drain_outbox() override;
    void receive(const PeerMessage& msg) override;
    void finish_round(int round) override;

    int betrayal_round() const { return betrayal_round_; }
    const ParamVector& accumulator() const { return accumulator_; }
    ShadowState coalition_shadow() const;
    ShadowState secret_shadow() const;

private:
    int id_;
    int partner_id_;
    int betrayal_round_;  // >= 2
    const LossEvaluator* ev_;
    double eta_;
    int next_round_ = 0;
    // Coalition bookkeeping shared with the partner.
    ParamVector coal_cur_, coal_prev_;
    ParamVector coal_grad_self_, coal_grad_prev_self_;
    std::optional<ParamVector> partner_grad_;
    std::vector<PeerMessage> outbox_;
    // Secret solo trajectory.
    ParamVector secret_cur_, secret_prev_, secret_grad_prev_;
    ParamVector accumulator_;
};

struct ProbeConfig {
    double magnitude = 0.0;  // B, intended far above the gradient scale
    int probe_round = 0;     // the only supported probe round

    void validate() const;
};

// Median over coordinates of (theta_t - theta_t1) / B. The relative error
// is bounded by max_i |sum of other clients' gradients at theta_t|_i / B.
double estimate_eta(const ParamVector& theta_t, const ParamVector& theta_t1, double B);

// Dictator that does not know the learning rate: sends the all-B probe at
// round 0, estimates eta from the observed displacement, then runs the
// dictator protocol with the estimate. The round-1 correction term cancels
// the probe's contribution along with everyone else's. `eta_override`
// replaces the estimate when supplied (the attacker being told the truth),
// which makes the run a plain dictator run from round 1 on.
class ProbeStrategy final : public ClientStrategy {
public:
    ProbeStrategy(int id, const LossEvaluator& ev, ProbeConfig probe,
                  std::optional<double> eta_override = std::nullopt);

    int client_id() const override { return id_; }
    UpdateMessage update(int round, const ParamVector& theta) override;

    double eta_hat() const;
    ShadowState shadow() const;

private:
    int id_;
    const LossEvaluator* ev_;
    ProbeConfig probe_;
    std::optional<double> eta_override_;
    std::optional<double> eta_hat_;
    int next_round_ = 0;
    ParamVector theta0_;
    ParamVector cur_, prev_, grad_prev_;
};

}  // namespace fedsim

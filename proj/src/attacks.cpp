#include "fedsim/attacks.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>

namespace fedsim {

namespace {

void require_round(int got, int expected) {
    if (got != expected) {
        throw std::logic_error("round gap in shadow state: expected round " +
                               std::to_string(expected) + ", got " + std::to_string(got));
    }
}

void require_positive_eta(double eta) {
    if (!(eta > 0.0)) {
        throw std::invalid_argument("attack strategy: eta must be positive (the correction "
                                    "term divides by it)");
    }
}

// grad_now - ((shadow_prev - theta) / divisor - grad_prev)
ParamVector crafted_update(const ParamVector& grad_now, const ParamVector& shadow_prev,
                           const ParamVector& theta, double divisor,
                           const ParamVector& grad_prev) {
    ParamVector reconstruction = scale(1.0 / divisor, sub(shadow_prev, theta));
    return add(sub(grad_now, reconstruction), grad_prev);
}

}  // namespace

bool CoalitionSpec::contains(int id) const {
    return std::find(members.begin(), members.end(), id) != members.end();
}

void CoalitionSpec::validate(int num_clients) const {
    if (size() < 2) {
        throw std::invalid_argument("CoalitionSpec: need at least two members");
    }
    if (size() >= num_clients) {
        throw std::invalid_argument("CoalitionSpec: coalition must leave at least one outsider");
    }
    for (std::size_t i = 0; i < members.size(); ++i) {
        if (members[i] < 1 || members[i] > num_clients) {
            throw std::invalid_argument("CoalitionSpec: member " + std::to_string(members[i]) +
                                        " outside 1.." + std::to_string(num_clients));
        }
        if (i > 0 && members[i] <= members[i - 1]) {
            throw std::invalid_argument("CoalitionSpec: members must be ascending and unique");
        }
    }
}

// ---------------------------------------------------------------------------
// Single dictator

DictatorStrategy::DictatorStrategy(int id, const LossEvaluator& ev, double eta)
    : id_(id), ev_(&ev), eta_(eta) {
    require_positive_eta(eta);
}

UpdateMessage DictatorStrategy::update(int round, const ParamVector& theta) {
    require_round(round, next_round_);
    ++next_round_;

    if (round == 0) {
        ParamVector g = ev_->evaluate(theta).grad;
        prev_ = theta;                      // shadow at round 0
        cur_ = axpy(-eta_, g, theta);       // shadow at round 1
        grad_prev_ = g;
        return UpdateMessage{id_, round, std::move(g)};
    }

    ParamVector g = ev_->evaluate(cur_).grad;
    ParamVector m = crafted_update(g, prev_, theta, eta_, grad_prev_);
    prev_ = cur_;
    cur_ = axpy(-eta_, g, cur_);
    grad_prev_ = std::move(g);
    return UpdateMessage{id_, round, std::move(m)};
}

ShadowState DictatorStrategy::shadow() const {
    return ShadowState{cur_, prev_, ShadowState::Kind::solo};
}

// ---------------------------------------------------------------------------
// Collaborative dictators

CoalitionStrategy::CoalitionStrategy(int id, CoalitionSpec coalition, const LossEvaluator& ev,
                                     double eta)
    : id_(id), coalition_(std::move(coalition)), ev_(&ev), eta_(eta) {
    require_positive_eta(eta);
    if (coalition_.size() < 2) {
        throw std::invalid_argument("CoalitionStrategy: coalition needs at least two members");
    }
    if (!coalition_.contains(id)) {
        throw std::invalid_argument("CoalitionStrategy: client " + std::to_string(id) +
                                    " is not a coalition member");
    }
}

UpdateMessage CoalitionStrategy::update(int round, const ParamVector& theta) {
    require_round(round, next_round_);
    ++next_round_;

    ParamVector m;
    if (round == 0) {
        cur_ = theta;
        prev_ = theta;
        grad_self_ = ev_->evaluate(theta).grad;
        m = grad_self_;
    } else {
        grad_self_ = ev_->evaluate(cur_).grad;
        m = crafted_update(grad_self_, prev_, theta, coalition_.size() * eta_, grad_prev_self_);
    }

    std::uint64_t fp = fingerprint(cur_);
    for (int peer : coalition_.members) {
        if (peer != id_) {
            outbox_.push_back(PeerMessage{id_, peer, round, grad_self_, fp});
        }
    }
    return UpdateMessage{id_, round, std::move(m)};
}

std::vector<PeerMessage> CoalitionStrategy::drain_outbox() {
    return std::exchange(outbox_, {});
}

void CoalitionStrategy::receive(const PeerMessage& msg) {
    if (!coalition_.contains(msg.from)) {
        throw std::runtime_error("CoalitionStrategy: gradient from non-member client " +
                                 std::to_string(msg.from));
    }
    if (msg.shadow_fingerprint != fingerprint(cur_)) {
        throw std::runtime_error("CoalitionStrategy: desynchronized shadow with client " +
                                 std::to_string(msg.from));
    }
    if (!peer_grads_.emplace(msg.from, msg.payload).second) {
        throw std::runtime_error("CoalitionStrategy: duplicate gradient from client " +
                                 std::to_string(msg.from));
    }
}

void CoalitionStrategy::finish_round(int round) {
    // Ascending member order keeps every replica's shadow bitwise equal.
    std::vector<const ParamVector*> grads;
    for (int member : coalition_.members) {
        if (member == id_) {
            grads.push_back(&grad_self_);
        } else {
            auto it = peer_grads_.find(member);
            if (it == peer_grads_.end()) {
                throw std::runtime_error("missing peer gradient from client " +
                                         std::to_string(member) + " at round " +
                                         std::to_string(round));
            }
            grads.push_back(&it->second);
        }
    }
    ParamVector sum = sum_of(grads);
    prev_ = cur_;
    cur_ = axpy(-eta_, sum, cur_);
    grad_prev_self_ = grad_self_;
    peer_grads_.clear();
}

ShadowState CoalitionStrategy::shadow() const {
    return ShadowState{cur_, prev_, ShadowState::Kind::coalition};
}

// ---------------------------------------------------------------------------
// Betrayal

CheaterStrategy::CheaterStrategy(int id, int partner_id, int betrayal_round,
                                 const LossEvaluator& ev, double eta)
    : id_(id), partner_id_(partner_id), betrayal_round_(betrayal_round), ev_(&ev), eta_(eta) {
    require_positive_eta(eta);
    if (partner_id == id) {
        throw std::invalid_argument("CheaterStrategy: partner must be a different client");
    }
    if (betrayal_round < 2) {
        // A round-1 betrayal would send an all-zero accumulator.
        throw std::invalid_argument("CheaterStrategy: betrayal round must be >= 2");
    }
}

UpdateMessage CheaterStrategy::update(int round, const ParamVector& theta) {
    require_round(round, next_round_);
    ++next_round_;

    ParamVector m;
    if (round == 0) {
        coal_cur_ = theta;
        coal_prev_ = theta;
        secret_cur_ = theta;
        secret_prev_ = theta;
        accumulator_ = zeros_like(theta);
        coal_grad_self_ = ev_->evaluate(theta).grad;
        m = coal_grad_self_;
    } else if (round < betrayal_round_) {
        coal_grad_self_ = ev_->evaluate(coal_cur_).grad;
        m = crafted_update(coal_grad_self_, coal_prev_, theta, 2.0 * eta_,
                           coal_grad_prev_self_);
    } else if (round == betrayal_round_) {
        coal_grad_self_ = ev_->evaluate(coal_cur_).grad;
        m = accumulator_;
    } else {
        // Single-dictator protocol seeded from the secret trajectory.
        coal_grad_self_ = ev_->evaluate(coal_cur_).grad;
        ParamVector g = ev_->evaluate(secret_cur_).grad;
        m = crafted_update(g, secret_prev_, theta, eta_, secret_grad_prev_);
    }

    // The partner is kept in the loop every round, betrayal included.
    outbox_.push_back(PeerMessage{id_, partner_id_, round, coal_grad_self_,
                                  fingerprint(coal_cur_)});
    return UpdateMessage{id_, round, std::move(m)};
}

std::vector<PeerMessage> CheaterStrategy::drain_outbox() {
    return std::exchange(outbox_, {});
}

void CheaterStrategy::receive(const PeerMessage& msg) {
    if (msg.from != partner_id_) {
        throw std::runtime_error("CheaterStrategy: gradient from unexpected client " +
                                 std::to_string(msg.from));
    }
    if (msg.shadow_fingerprint != fingerprint(coal_cur_)) {
        throw std::runtime_error("CheaterStrategy: desynchronized shadow with client " +
                                 std::to_string(msg.from));
    }
    if (partner_grad_.has_value()) {
        throw std::runtime_error("CheaterStrategy: duplicate gradient from partner");
    }
    partner_grad_ = msg.payload;
}

void CheaterStrategy::finish_round(int round) {
    if (!partner_grad_.has_value()) {
        throw std::runtime_error("missing peer gradient from client " +
                                 std::to_string(partner_id_) + " at round " +
                                 std::to_string(round));
    }

    ParamVector secret_grad = ev_->evaluate(secret_cur_).grad;
    if (round <= betrayal_round_ - 2) {
        // Gap between going solo and collaborating, at this round's
        // shadows. Accumulating rounds 0..E-2 makes the offset equal
        // (coalition shadow - secret shadow)/eta at round E-1, so sending
        // it replaces the coalition state with the secret one exactly.
        ParamVector coalition_sum = add(coal_grad_self_, *partner_grad_);
        accumulator_ = add(accumulator_, sub(secret_grad, coalition_sum));
    }

    // Advance the shared shadow exactly as the partner does (ascending ids).
    std::vector<const ParamVector*> grads;
    if (id_ < partner_id_) {
        grads = {&coal_grad_self_, &*partner_grad_};
    } else {
        grads = {&*partner_grad_, &coal_grad_self_};
    }
    ParamVector coal_sum = sum_of(grads);
    coal_prev_ = coal_cur_;
    coal_cur_ = axpy(-eta_, coal_sum, coal_cur_);
    coal_grad_prev_self_ = coal_grad_self_;

    secret_prev_ = secret_cur_;
    secret_cur_ = axpy(-eta_, secret_grad, secret_cur_);
    secret_grad_prev_ = std::move(secret_grad);

    partner_grad_.reset();
}

ShadowState CheaterStrategy::coalition_shadow() const {
    return ShadowState{coal_cur_, coal_prev_, ShadowState::Kind::coalition};
}

ShadowState CheaterStrategy::secret_shadow() const {
    return ShadowState{secret_cur_, secret_prev_, ShadowState::Kind::solo};
}

// ---------------------------------------------------------------------------
// Learning-rate probe

void ProbeConfig::validate() const {
    if (!(magnitude > 0.0)) {
        throw std::invalid_argument("ProbeConfig: magnitude must be positive");
    }
    if (probe_round != 0) {
        throw std::invalid_argument("ProbeConfig: only probe_round 0 is supported");
    }
}

double estimate_eta(const ParamVector& theta_t, const ParamVector& theta_t1, double B) {
    if (B == 0.0) {
        throw std::invalid_argument("estimate_eta: B must be nonzero");
    }
    require_same_shape(theta_t, theta_t1, "estimate_eta");
    if (theta_t.size() == 0) {
        throw std::invalid_argument("estimate_eta: zero-length vectors");
    }

    std::vector<double> ratios(theta_t.size());
    for (std::size_t i = 0; i < ratios.size(); ++i) {
        ratios[i] = (theta_t.values[i] - theta_t1.values[i]) / B;
    }
    std::sort(ratios.begin(), ratios.end());
    std::size_t n = ratios.size();
    if (n % 2 == 1) {
        return ratios[n / 2];
    }
    return 0.5 * (ratios[n / 2 - 1] + ratios[n / 2]);
}

ProbeStrategy::ProbeStrategy(int id, const LossEvaluator& ev, ProbeConfig probe,
                             std::optional<double> eta_override)
    : id_(id), ev_(&ev), probe_(probe), eta_override_(eta_override) {
    probe_.validate();
    if (eta_override_.has_value() && !(*eta_override_ > 0.0)) {
        throw std::invalid_argument("ProbeStrategy: eta override must be positive");
    }
}

double ProbeStrategy::eta_hat() const {
    if (!eta_hat_.has_value()) {
        throw std::logic_error("ProbeStrategy: estimate not available before round 1");
    }
    return *eta_hat_;
}

UpdateMessage ProbeStrategy::update(int round, const ParamVector& theta) {
    require_round(round, next_round_);
    ++next_round_;

    if (round == 0) {
        theta0_ = theta;
        return UpdateMessage{id_, round, constant_like(theta, probe_.magnitude)};
    }

    if (round == 1) {
        eta_hat_ = eta_override_.has_value()
                       ? *eta_override_
                       : estimate_eta(theta0_, theta, probe_.magnitude);
        if (!(*eta_hat_ > 0.0) || !std::isfinite(*eta_hat_)) {
            throw std::runtime_error("ProbeStrategy: estimated learning rate is unusable");
        }
        // Shadow starts from theta0 advanced by the true round-0 gradient;
        // the round-1 correction then cancels the probe the server applied.
        ParamVector g0 = ev_->evaluate(theta0_).grad;
        prev_ = theta0_;
        cur_ = axpy(-*eta_hat_, g0, theta0_);
        grad_prev_ = std::move(g0);
    }

    ParamVector g = ev_->evaluate(cur_).grad;
    ParamVector m = crafted_update(g, prev_, theta, *eta_hat_, grad_prev_);
    prev_ = cur_;
    cur_ = axpy(-*eta_hat_, g, cur_);
    grad_prev_ = std::move(g);
    return UpdateMessage{id_, round, std::move(m)};
}

ShadowState ProbeStrategy::shadow() const {
    return ShadowState{cur_, prev_, ShadowState::Kind::solo};
}

}  // namespace fedsim

#include "fedsim/protocol.hpp"

#include <algorithm>
#include <map>
#include <stdexcept>
#include <string>

namespace fedsim {

void ProtocolConfig::validate() const {
    if (!(eta > 0.0)) {
        throw std::invalid_argument("ProtocolConfig: eta must be positive");
    }
    if (rounds < 1) {
        throw std::invalid_argument("ProtocolConfig: rounds must be >= 1");
    }
    if (num_clients < 2) {
        throw std::invalid_argument("ProtocolConfig: num_clients must be >= 2");
    }
}

const UpdateMessage& RoundRecord::update_from(int client_id) const {
    for (const auto& u : updates) {
        if (u.client_id == client_id) {
            return u;
        }
    }
    throw std::out_of_range("RoundRecord: no update from client " + std::to_string(client_id));
}

UpdateMessage HonestStrategy::update(int round, const ParamVector& theta) {
    return UpdateMessage{id_, round, ev_->evaluate(theta).grad};
}

ParamVector server_step(const ParamVector& theta, const std::vector<UpdateMessage>& updates,
                        double eta, int num_clients) {
    if (static_cast<int>(updates.size()) != num_clients) {
        throw std::invalid_argument("server_step: expected " + std::to_string(num_clients) +
                                    " updates, got " + std::to_string(updates.size()));
    }

    // Canonical order: ascending client id, one update per client.
    std::map<int, const ParamVector*> by_id;
    for (const auto& u : updates) {
        if (u.client_id < 1 || u.client_id > num_clients) {
            throw std::invalid_argument("server_step: client id " +
                                        std::to_string(u.client_id) + " out of range");
        }
        if (!by_id.emplace(u.client_id, &u.update).second) {
            throw std::invalid_argument("server_step: duplicate update from client " +
                                        std::to_string(u.client_id));
        }
        require_same_shape(theta, u.update, "server_step");
    }

    std::vector<const ParamVector*> ordered;
    ordered.reserve(by_id.size());
    for (const auto& [id, vec] : by_id) {
        ordered.push_back(vec);
    }
    return axpy(-eta, sum_of(ordered), theta);
}

std::vector<RoundRecord> run_rounds(const ProtocolConfig& config,
                                    const std::vector<ClientStrategy*>& clients,
                                    const ParamVector& theta0,
                                    const MetricsFn& measure) {
    config.validate();
    if (static_cast<int>(clients.size()) != config.num_clients) {
        throw std::invalid_argument("run_rounds: strategy count != num_clients");
    }
    std::vector<bool> seen(config.num_clients + 1, false);
    for (const auto* c : clients) {
        int id = c->client_id();
        if (id < 1 || id > config.num_clients || seen[id]) {
            throw std::invalid_argument("run_rounds: client ids must be exactly 1.." +
                                        std::to_string(config.num_clients));
        }
        seen[id] = true;
    }

    // Index strategies by id so collection order is canonical no matter how
    // the caller ordered the list.
    std::vector<ClientStrategy*> by_id(config.num_clients + 1, nullptr);
    for (auto* c : clients) {
        by_id[c->client_id()] = c;
    }

    std::vector<RoundRecord> records;
    records.reserve(config.rounds);
    ParamVector theta = theta0;

    for (int t = 0; t < config.rounds; ++t) {
        RoundRecord rec;
        rec.round = t;
        rec.theta_before = theta;

        for (int id = 1; id <= config.num_clients; ++id) {
            UpdateMessage msg;
            try {
                msg = by_id[id]->update(t, theta);
            } catch (const std::exception& e) {
                throw std::runtime_error("round " + std::to_string(t) + ", client " +
                                         std::to_string(id) + ": " + e.what());
            }
            if (msg.client_id != id || msg.round != t) {
                throw std::runtime_error("round " + std::to_string(t) + ", client " +
                                         std::to_string(id) + ": mislabeled update message");
            }
            rec.updates.push_back(std::move(msg));
        }

        theta = server_step(theta, rec.updates, config.eta, config.num_clients);
        rec.theta_after = theta;

        // Coalition link: deliver between aggregation and the next round.
        std::vector<PeerMessage> mail;
        for (int id = 1; id <= config.num_clients; ++id) {
            auto out = by_id[id]->drain_outbox();
            mail.insert(mail.end(), std::make_move_iterator(out.begin()),
                        std::make_move_iterator(out.end()));
        }
        for (auto& m : mail) {
            if (m.to < 1 || m.to > config.num_clients) {
                throw std::runtime_error("round " + std::to_string(t) + ": peer message to unknown client " +
                                         std::to_string(m.to));
            }
            by_id[m.to]->receive(m);
        }
        for (int id = 1; id <= config.num_clients; ++id) {
            try {
                by_id[id]->finish_round(t);
            } catch (const std::exception& e) {
                throw std::runtime_error("round " + std::to_string(t) + ", client " +
                                         std::to_string(id) + ": " + e.what());
            }
        }

        if (measure) {
            rec.per_client = measure(theta);
        }
        records.push_back(std::move(rec));
    }
    return records;
}

std::vector<ParamVector> solo_trajectory(const LossEvaluator& ev, const ParamVector& theta0,
                                         double eta, int steps) {
    if (steps < 1) {
        throw std::invalid_argument("solo_trajectory: steps must be >= 1");
    }
    std::vector<ParamVector> traj;
    traj.reserve(steps + 1);
    traj.push_back(theta0);
    for (int t = 0; t < steps; ++t) {
        traj.push_back(axpy(-eta, ev.evaluate(traj.back()).grad, traj.back()));
    }
    return traj;
}

std::vector<ParamVector> subset_trajectory(const std::vector<const LossEvaluator*>& evs,
                                           const ParamVector& theta0, double eta, int steps) {
    if (evs.size() < 2) {
        throw std::invalid_argument("subset_trajectory: need at least two evaluators");
    }
    if (steps < 1) {
        throw std::invalid_argument("subset_trajectory: steps must be >= 1");
    }
    std::vector<ParamVector> traj;
    traj.reserve(steps + 1);
    traj.push_back(theta0);
    for (int t = 0; t < steps; ++t) {
        std::vector<ParamVector> grads;
        grads.reserve(evs.size());
        for (const auto* ev : evs) {
            grads.push_back(ev->evaluate(traj.back()).grad);
        }
        std::vector<const ParamVector*> ptrs;
        ptrs.reserve(grads.size());
        for (const auto& g : grads) {
            ptrs.push_back(&g);
        }
        traj.push_back(axpy(-eta, sum_of(ptrs), traj.back()));
    }
    return traj;
}

}  // namespace fedsim

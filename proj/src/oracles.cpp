#include "fedsim/oracles.hpp"

#include <cmath>
#include <stdexcept>

namespace fedsim {

namespace {

// Sum of gradients of the given clients at theta, ascending client id.
ParamVector grad_sum(const std::vector<const LossEvaluator*>& evaluators,
                     const std::vector<int>& ids, const ParamVector& theta) {
    ParamVector sum;
    bool first = true;
    for (int id : ids) {
        ParamVector g = evaluators[id - 1]->evaluate(theta).grad;
        if (first) {
            sum = std::move(g);
            first = false;
        } else {
            sum = add(sum, g);
        }
    }
    if (first) {
        throw std::invalid_argument("grad_sum: empty client set");
    }
    return sum;
}

std::vector<int> complement(int num_clients, const std::vector<int>& excluded) {
    std::vector<int> ids;
    for (int id = 1; id <= num_clients; ++id) {
        bool skip = false;
        for (int e : excluded) {
            skip = skip || id == e;
        }
        if (!skip) {
            ids.push_back(id);
        }
    }
    return ids;
}

EquivalenceReport against_baseline(const std::vector<RoundRecord>& records,
                                   const std::vector<ParamVector>& baseline,
                                   const std::vector<const LossEvaluator*>& evaluators,
                                   double eta, const std::vector<int>& attackers,
                                   std::string claim_id) {
    const int rounds = static_cast<int>(records.size());
    if (rounds < 1) {
        throw std::invalid_argument(claim_id + ": no rounds recorded");
    }
    if (static_cast<int>(baseline.size()) < rounds + 1) {
        throw std::invalid_argument(claim_id + ": trajectory length mismatch (need " +
                                    std::to_string(rounds + 1) + " baseline states, have " +
                                    std::to_string(baseline.size()) + ")");
    }
    std::vector<int> others = complement(static_cast<int>(evaluators.size()), attackers);

    EquivalenceReport rep;
    rep.claim_id = std::move(claim_id);
    rep.tolerance = kEquivalenceTolerance;
    for (int t = 0; t < rounds; ++t) {
        ParamVector rhs = axpy(-eta, grad_sum(evaluators, others, records[t].theta_before),
                               baseline[t + 1]);
        double diff = inf_norm(sub(records[t].theta_after, rhs));
        rep.diff_inf_norm = std::max(rep.diff_inf_norm, diff);
        if (t == rounds - 1) {
            rep.lhs_norm = inf_norm(records[t].theta_after);
            rep.rhs_norm = inf_norm(rhs);
            rep.residual_inf_norm =
                eta * inf_norm(grad_sum(evaluators, others, records[t].theta_before));
        }
    }
    rep.passed = rep.diff_inf_norm <= rep.tolerance;
    return rep;
}

}  // namespace

EquivalenceReport check_single_dictator(const std::vector<RoundRecord>& records,
                                        const std::vector<ParamVector>& solo,
                                        const std::vector<const LossEvaluator*>& evaluators,
                                        double eta, int dictator_id) {
    return against_baseline(records, solo, evaluators, eta, {dictator_id},
                            "single_dictator_equivalence");
}

EquivalenceReport check_coalition(const std::vector<RoundRecord>& records,
                                  const std::vector<ParamVector>& subset,
                                  const std::vector<const LossEvaluator*>& evaluators,
                                  double eta, const CoalitionSpec& coalition) {
    coalition.validate(static_cast<int>(evaluators.size()));
    return against_baseline(records, subset, evaluators, eta, coalition.members,
                            "coalition_equivalence");
}

EquivalenceReport check_mutual_domination_round2(const ParamVector& theta0,
                                                 const ParamVector& theta2,
                                                 const std::vector<const LossEvaluator*>& evaluators,
                                                 double eta) {
    const int n = static_cast<int>(evaluators.size());
    if (n < 2) {
        throw std::invalid_argument("check_mutual_domination_round2: need >= 2 clients");
    }

    ParamVector sum0 = zeros_like(theta0);         // sum_n grad_n(theta_0)
    ParamVector sum_shadow = zeros_like(theta0);   // sum_n grad_n(shadow_n at round 1)
    for (int id = 1; id <= n; ++id) {
        ParamVector g0 = evaluators[id - 1]->evaluate(theta0).grad;
        ParamVector shadow1 = axpy(-eta, g0, theta0);
        sum_shadow = add(sum_shadow, evaluators[id - 1]->evaluate(shadow1).grad);
        sum0 = add(sum0, g0);
    }
    ParamVector rhs = axpy(-eta, sum_shadow, axpy(eta * (n - 2), sum0, theta0));

    EquivalenceReport rep;
    rep.claim_id = "mutual_domination_round2";
    rep.tolerance = kEquivalenceTolerance;
    rep.lhs_norm = inf_norm(theta2);
    rep.rhs_norm = inf_norm(rhs);
    rep.diff_inf_norm = inf_norm(sub(theta2, rhs));
    rep.passed = rep.diff_inf_norm <= rep.tolerance;
    return rep;
}

EquivalenceReport check_betrayal(const std::vector<RoundRecord>& records,
                                 const std::vector<const LossEvaluator*>& evaluators,
                                 double eta, int betrayal_round, int cheater_id,
                                 int partner_id) {
    const int E = betrayal_round;
    if (E < 2) {
        throw std::invalid_argument("check_betrayal: betrayal round must be >= 2");
    }
    if (static_cast<int>(records.size()) < E + 1) {
        throw std::invalid_argument("check_betrayal: need at least betrayal_round + 1 rounds");
    }

    const ParamVector& theta0 = records[0].theta_before;
    const LossEvaluator& cheater_ev = *evaluators[cheater_id - 1];
    const LossEvaluator& partner_ev = *evaluators[partner_id - 1];

    // Re-simulate the secret solo recursion and the two-member coalition
    // recursion from scratch, up to round E-1.
    ParamVector secret = theta0;
    ParamVector coalition = theta0;
    const LossEvaluator* first = cheater_id < partner_id ? &cheater_ev : &partner_ev;
    const LossEvaluator* second = cheater_id < partner_id ? &partner_ev : &cheater_ev;
    for (int t = 0; t < E - 1; ++t) {
        secret = axpy(-eta, cheater_ev.evaluate(secret).grad, secret);
        ParamVector joint = add(first->evaluate(coalition).grad, second->evaluate(coalition).grad);
        coalition = axpy(-eta, joint, coalition);
    }
    ParamVector members_at_shadow =
        add(first->evaluate(coalition).grad, second->evaluate(coalition).grad);

    std::vector<int> outsiders = complement(static_cast<int>(evaluators.size()),
                                            {cheater_id, partner_id});
    ParamVector perturbation = members_at_shadow;
    perturbation = add(perturbation,
                       grad_sum(evaluators, outsiders, records[E - 1].theta_before));
    perturbation = add(perturbation, records[E].update_from(partner_id).update);
    perturbation = add(perturbation,
                       grad_sum(evaluators, outsiders, records[E].theta_before));
    ParamVector rhs = axpy(-eta, perturbation, secret);

    const ParamVector& lhs = records[E].theta_after;

    EquivalenceReport rep;
    rep.claim_id = "betrayal_equivalence";
    rep.tolerance = kEquivalenceTolerance;
    rep.lhs_norm = inf_norm(lhs);
    rep.rhs_norm = inf_norm(rhs);
    rep.diff_inf_norm = inf_norm(sub(lhs, rhs));
    rep.residual_inf_norm = inf_norm(sub(lhs, secret));
    rep.passed = rep.diff_inf_norm <= rep.tolerance;
    return rep;
}

ProbeCheck check_eta_estimate(double eta_hat, double eta_true,
                              const ParamVector& other_grad_sum_at_probe, double B) {
    if (B == 0.0) {
        throw std::invalid_argument("check_eta_estimate: B must be nonzero");
    }
    ProbeCheck c;
    c.eta_hat = eta_hat;
    c.eta_true = eta_true;
    c.relative_error = std::fabs(eta_hat - eta_true) / eta_true;
    c.bound = inf_norm(other_grad_sum_at_probe) / std::fabs(B);
    // Tiny absolute slack for the rounding of the ratio arithmetic itself.
    c.passed = c.relative_error <= c.bound + 1e-12;
    return c;
}

}  // namespace fedsim

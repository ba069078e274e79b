#pragma once

#include <string>
#include <vector>

#include "fedsim/attacks.hpp"
#include "fedsim/protocol.hpp"

namespace fedsim {

// Verdict for one theorem-level claim. Checkers rebuild their right-hand
// sides from recorded trajectories and raw evaluators only, never from the
// attack strategies' internals, so a pass is double-entry bookkeeping.
struct EquivalenceReport {
    std::string claim_id;
    double lhs_norm = 0.0;
    double rhs_norm = 0.0;
    double diff_inf_norm = 0.0;
    double residual_inf_norm = 0.0;
    bool passed = false;
    double tolerance = 0.0;
};

// Inf-norm tolerance for every equivalence claim; double rounding across a
// few hundred vector ops stays orders of magnitude below this.
inline constexpr double kEquivalenceTolerance = 1e-9;

// Verifies that every recorded round satisfies
//   theta_{t+1} = solo_{t+1} - eta * sum_{n != m} grad_n(theta_t)
// and reports the final-round residual norm separately. `evaluators` is
// indexed by client id - 1; `solo` must hold at least rounds+1 entries.
EquivalenceReport check_single_dictator(const std::vector<RoundRecord>& records,
                                        const std::vector<ParamVector>& solo,
                                        const std::vector<const LossEvaluator*>& evaluators,
                                        double eta, int dictator_id);

// Coalition analogue against the subset baseline trajectory.
EquivalenceReport check_coalition(const std::vector<RoundRecord>& records,
                                  const std::vector<ParamVector>& subset,
                                  const std::vector<const LossEvaluator*>& evaluators,
                                  double eta, const CoalitionSpec& coalition);

// All-dictator second-round identity:
//   theta_2 = theta_0 + eta (N-2) sum_n grad_n(theta_0)
//                     - eta sum_n grad_n(theta_0 - eta grad_n(theta_0)).
EquivalenceReport check_mutual_domination_round2(const ParamVector& theta0,
                                                 const ParamVector& theta2,
                                                 const std::vector<const LossEvaluator*>& evaluators,
                                                 double eta);

// Closed form for the post-betrayal state, from unrolling the accumulated
// offset (rounds 0..E-2 at the round's shadows):
//   theta_{E+1} = secret_{E-1} - eta (sum_members grad_k(coalition_{E-1})
//                 + sum_outsiders grad_n(theta_{E-1})
//                 + M^partner_E + sum_outsiders grad_n(theta_E))
// where secret and coalition are the solo and two-member baseline
// recursions re-simulated from theta_0 and M^partner_E is the partner's
// recorded round-E update. The residual field reports
// |theta_{E+1} - secret_{E-1}|, the total distance from the pure takeover
// state.
EquivalenceReport check_betrayal(const std::vector<RoundRecord>& records,
                                 const std::vector<const LossEvaluator*>& evaluators,
                                 double eta, int betrayal_round, int cheater_id,
                                 int partner_id);

// Bound check for the learning-rate probe: the estimate's relative error
// never exceeds max_i |sum of other gradients at theta_0|_i / B.
struct ProbeCheck {
    double eta_hat = 0.0;
    double eta_true = 0.0;
    double relative_error = 0.0;
    double bound = 0.0;
    bool passed = false;
};

ProbeCheck check_eta_estimate(double eta_hat, double eta_true,
                              const ParamVector& other_grad_sum_at_probe, double B);

}  // namespace fedsim

#pragma once

#include <Eigen/Dense>
#include <Eigen/SparseCore>
#include <array>
#include <memory>
#include <vector>

#include "gridcast/admittance.hpp"
#include "gridcast/feeder.hpp"

namespace gridcast {

struct PowerFlowSolution {
    Eigen::VectorXcd voltage;  // complex per node-phase, NodeIndex order
    int iterations = 0;
    double final_mismatch = 0.0;  // per-unit power mismatch at the last iterate
    bool converged = false;

    double vmag(int row) const { return std::abs(voltage(row)); }
    double vang_deg(int row) const { return std::arg(voltage(row)) * 180.0 / M_PI; }
};

struct SolverOptions {
    double tolerance = 1e-8;   // per-unit power mismatch bound
    int max_iterations = 200;
    const PowerFlowSolution* initial_guess = nullptr;  // null = flat start
};

// Ground-truth power-flow engine. Builds and factorizes the non-slack block
// of the admittance matrix once, then solves any number of load states
// against it. One instance is not safe for concurrent solve() calls (the
// factorization backend keeps scratch state); dataset generation constructs
// one engine per worker over the same immutable feeder.
class FixedPointSolver {
  public:
    explicit FixedPointSolver(const Feeder& f);
    FixedPointSolver(const Feeder& f, const AdmittanceMatrix& y);
    ~FixedPointSolver();
    FixedPointSolver(FixedPointSolver&&) noexcept;
    FixedPointSolver& operator=(FixedPointSolver&&) noexcept;

    /// One multiplier per feeder load, all >= 0.
    PowerFlowSolution solve(const std::vector<double>& multipliers,
                            const SolverOptions& opts = {}) const;

    const NodeIndex& index() const;
    /// Slack phasors per node-phase row of the slack bus (flat profile basis).
    Eigen::VectorXcd flat_start() const;

  private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

/// Convenience wrapper: build, factorize, solve once.
PowerFlowSolution solve_fixed_point(const Feeder& f, const std::vector<double>& multipliers,
                                    const SolverOptions& opts = {});

/// Worst-case |S_computed - S_specified| over non-slack node-phases, in
/// per-unit, for an arbitrary candidate voltage vector (NodeIndex order).
double power_mismatch(const Feeder& f, const std::vector<double>& multipliers,
                      const Eigen::VectorXcd& voltage);

/// Per-phase complex power entering the branch on the upstream side, flowing
/// from the parent cluster toward `head_bus` (the downstream endpoint).
/// Returns {P_A, P_B, P_C, Q_A, Q_B, Q_C} in per-unit; absent phases are 0.
std::array<double, 6> branch_injected_power(const PowerFlowSolution& sol, const Feeder& f,
                                            int branch_index, int head_bus);

/// Hot-path variant reusing a prebuilt node index.
std::array<double, 6> branch_injected_power(const PowerFlowSolution& sol, const Feeder& f,
                                            const NodeIndex& idx, int branch_index, int head_bus);

/// Specified complex power injection per node-phase (loads enter negative).
Eigen::VectorXcd specified_injection(const Feeder& f, const NodeIndex& idx,
                                     const std::vector<double>& multipliers);

}  // namespace gridcast

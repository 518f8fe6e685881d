#include "gridcast/solver.hpp"

#include <Eigen/SparseLU>
#include <cmath>

#include "gridcast/errors.hpp"

namespace gridcast {

namespace {

Complex phase_rotation(Phase p) {
    switch (p) {
        case Phase::A: return Complex(1.0, 0.0);
        case Phase::B: return std::polar(1.0, -2.0 * M_PI / 3.0);
        case Phase::C: return std::polar(1.0, 2.0 * M_PI / 3.0);
    }
    return Complex(1.0, 0.0);
}

constexpr double kVoltageFloor = 1e-6;  // constant-PQ current is singular at V = 0

}  // namespace

Eigen::VectorXcd specified_injection(const Feeder& f, const NodeIndex& idx,
                                     const std::vector<double>& multipliers) {
    if (multipliers.size() != f.loads.size())
        throw Error("multiplier count " + std::to_string(multipliers.size()) +
                    " does not match load count " + std::to_string(f.loads.size()));
    Eigen::VectorXcd s = Eigen::VectorXcd::Zero(idx.size());
    for (std::size_t l = 0; l < f.loads.size(); ++l) {
        const Load& ld = f.loads[l];
        if (multipliers[l] < 0.0)
            throw Error("negative multiplier for load " + std::to_string(l));
        int row = idx.row(ld.bus, ld.phase);
        if (row < 0) throw Error("load on absent phase");
        s(row) -= multipliers[l] * Complex(ld.base_p_kw, ld.base_q_kvar) / f.base_kva;
    }
    return s;
}

struct FixedPointSolver::Impl {
    NodeIndex idx;
    std::vector<int> non_slack_rows;          // L block rows in NodeIndex order
    std::vector<int> slack_rows;              // S block rows
    std::vector<int> compact_of_row;          // node-phase row -> L position or -1
    Eigen::SparseMatrix<Complex> y_ll;
    Eigen::SparseMatrix<Complex> y_ls;
    Eigen::SparseMatrix<Complex> y_full;
    Eigen::VectorXcd v_slack;                 // fixed slack phasors (S block order)
    Eigen::VectorXcd flat;                    // flat-start voltages, all rows
    Eigen::SparseLU<Eigen::SparseMatrix<Complex>> lu;
    const Feeder* feeder = nullptr;

    void build(const Feeder& f, const AdmittanceMatrix& y) {
        feeder = &f;
        idx = y.index;
        y_full = y.matrix;

        compact_of_row.assign(static_cast<std::size_t>(idx.size()), -1);
        for (int r = 0; r < idx.size(); ++r) {
            if (idx.entries[static_cast<std::size_t>(r)].first == f.slack_bus)
                slack_rows.push_back(r);
            else {
                compact_of_row[static_cast<std::size_t>(r)] = static_cast<int>(non_slack_rows.size());
                non_slack_rows.push_back(r);
            }
        }
        if (slack_rows.empty()) throw Error("slack bus has no node-phases");

        std::vector<int> slack_pos(static_cast<std::size_t>(idx.size()), -1);
        for (std::size_t i = 0; i < slack_rows.size(); ++i)
            slack_pos[static_cast<std::size_t>(slack_rows[i])] = static_cast<int>(i);

        const int nl = static_cast<int>(non_slack_rows.size());
        const int ns = static_cast<int>(slack_rows.size());
        std::vector<Eigen::Triplet<Complex>> tll, tls;
        for (int col = 0; col < y_full.outerSize(); ++col)
            for (Eigen::SparseMatrix<Complex>::InnerIterator it(y_full, col); it; ++it) {
                int r = compact_of_row[static_cast<std::size_t>(it.row())];
                if (r < 0) continue;
                int c = compact_of_row[static_cast<std::size_t>(it.col())];
                if (c >= 0)
                    tll.emplace_back(r, c, it.value());
                else
                    tls.emplace_back(r, slack_pos[static_cast<std::size_t>(it.col())], it.value());
            }
        y_ll.resize(nl, nl);
        y_ll.setFromTriplets(tll.begin(), tll.end());
        y_ls.resize(nl, ns);
        y_ls.setFromTriplets(tls.begin(), tls.end());

        v_slack.resize(ns);
        flat.resize(idx.size());
        for (int r = 0; r < idx.size(); ++r) {
            Phase p = idx.entries[static_cast<std::size_t>(r)].second;
            flat(r) = f.source_voltage_pu * phase_rotation(p);
        }
        for (int i = 0; i < ns; ++i) v_slack(i) = flat(slack_rows[static_cast<std::size_t>(i)]);

        if (nl > 0) {
            lu.compute(y_ll);
            if (lu.info() != Eigen::Success)
                throw Error("Y_LL factorization failed (singular non-slack block)");
        }
    }
};

FixedPointSolver::FixedPointSolver(const Feeder& f) : impl_(std::make_unique<Impl>()) {
    AdmittanceMatrix y = build_admittance(f);
    impl_->build(f, y);
}

FixedPointSolver::FixedPointSolver(const Feeder& f, const AdmittanceMatrix& y)
    : impl_(std::make_unique<Impl>()) {
    impl_->build(f, y);
}

FixedPointSolver::~FixedPointSolver() = default;
FixedPointSolver::FixedPointSolver(FixedPointSolver&&) noexcept = default;
FixedPointSolver& FixedPointSolver::operator=(FixedPointSolver&&) noexcept = default;

const NodeIndex& FixedPointSolver::index() const { return impl_->idx; }

Eigen::VectorXcd FixedPointSolver::flat_start() const { return impl_->flat; }

PowerFlowSolution FixedPointSolver::solve(const std::vector<double>& multipliers,
                                          const SolverOptions& opts) const {
    const Impl& im = *impl_;
    if (opts.tolerance <= 0.0) throw Error("solver tolerance must be positive");
    if (opts.max_iterations < 1) throw Error("max_iterations must be >= 1");

    Eigen::VectorXcd s_spec = specified_injection(*im.feeder, im.idx, multipliers);

    PowerFlowSolution sol;
    sol.voltage = opts.initial_guess ? opts.initial_guess->voltage : im.flat;
    if (sol.voltage.size() != im.idx.size()) throw Error("initial guess dimension mismatch");
    for (int r : im.slack_rows) sol.voltage(r) = im.flat(r);

    const int nl = static_cast<int>(im.non_slack_rows.size());
    Eigen::VectorXcd s_l(nl), i_inj(nl), rhs(nl), v_l(nl);
    for (int i = 0; i < nl; ++i) s_l(i) = s_spec(im.non_slack_rows[static_cast<std::size_t>(i)]);
    for (int i = 0; i < nl; ++i) v_l(i) = sol.voltage(im.non_slack_rows[static_cast<std::size_t>(i)]);

    Eigen::VectorXcd slack_feed = im.y_ls * im.v_slack;

    auto mismatch_of = [&](const Eigen::VectorXcd& vl) {
        // S_computed = V o conj(Y_LL V_L + Y_LS V_S) on the non-slack block
        Eigen::VectorXcd i_total = im.y_ll * vl + slack_feed;
        double worst = 0.0;
        for (int i = 0; i < nl; ++i)
            worst = std::max(worst, std::abs(vl(i) * std::conj(i_total(i)) - s_l(i)));
        return worst;
    };

    if (nl == 0) {
        sol.iterations = 0;
        sol.final_mismatch = 0.0;
        sol.converged = true;
        return sol;
    }

    double mismatch = mismatch_of(v_l);
    int iter = 0;
    while (mismatch > opts.tolerance && iter < opts.max_iterations) {
        ++iter;
        for (int i = 0; i < nl; ++i) {
            if (std::abs(v_l(i)) < kVoltageFloor)
                throw Error("voltage collapsed below " + std::to_string(kVoltageFloor) +
                            " pu during iteration (constant-PQ current undefined)");
            i_inj(i) = std::conj(s_l(i) / v_l(i));
        }
        rhs = i_inj - slack_feed;
        v_l = im.lu.solve(rhs);
        if (im.lu.info() != Eigen::Success) throw Error("Y_LL solve failed");
        mismatch = mismatch_of(v_l);
    }

    for (int i = 0; i < nl; ++i) sol.voltage(im.non_slack_rows[static_cast<std::size_t>(i)]) = v_l(i);
    sol.iterations = iter;
    sol.final_mismatch = mismatch;
    sol.converged = mismatch <= opts.tolerance;
    return sol;
}

PowerFlowSolution solve_fixed_point(const Feeder& f, const std::vector<double>& multipliers,
                                    const SolverOptions& opts) {
    FixedPointSolver solver(f);
    return solver.solve(multipliers, opts);
}

double power_mismatch(const Feeder& f, const std::vector<double>& multipliers,
                      const Eigen::VectorXcd& voltage) {
    AdmittanceMatrix y = build_admittance(f);
    if (voltage.size() != y.index.size())
        throw Error("voltage vector dimension " + std::to_string(voltage.size()) +
                    " does not match node-phase count " + std::to_string(y.index.size()));
    Eigen::VectorXcd s_spec = specified_injection(f, y.index, multipliers);
    Eigen::VectorXcd current = y.matrix * voltage;
    double worst = 0.0;
    for (int r = 0; r < y.index.size(); ++r) {
        if (y.index.entries[static_cast<std::size_t>(r)].first == f.slack_bus) continue;
        worst = std::max(worst, std::abs(voltage(r) * std::conj(current(r)) - s_spec(r)));
    }
    return worst;
}

std::array<double, 6> branch_injected_power(const PowerFlowSolution& sol, const Feeder& f,
                                            int branch_index, int head_bus) {
    NodeIndex idx = NodeIndex::build(f);
    return branch_injected_power(sol, f, idx, branch_index, head_bus);
}

std::array<double, 6> branch_injected_power(const PowerFlowSolution& sol, const Feeder& f,
                                            const NodeIndex& idx, int branch_index, int head_bus) {
    if (branch_index < 0 || branch_index >= static_cast<int>(f.branches.size()))
        throw Error("branch index " + std::to_string(branch_index) + " not in feeder");
    const Branch& br = f.branches[static_cast<std::size_t>(branch_index)];
    if (br.from != head_bus && br.to != head_bus)
        throw Error("bus is not an endpoint of the branch");
    int up = br.from == head_bus ? br.to : br.from;    // parent-side endpoint
    int down = head_bus;

    if (sol.voltage.size() != idx.size()) throw Error("solution does not cover the feeder");

    Eigen::Vector3cd v_up = Eigen::Vector3cd::Zero(), v_down = Eigen::Vector3cd::Zero();
    for (Phase p : kAllPhases) {
        int pi = static_cast<int>(p);
        if (int r = idx.row(up, p); r >= 0) v_up(pi) = sol.voltage(r);
        if (int r = idx.row(down, p); r >= 0) v_down(pi) = sol.voltage(r);
    }

    // current leaving the upstream bus into the branch (pi model, half shunt)
    Eigen::Vector3cd i_up = br.series * (v_up - v_down) + 0.5 * br.shunt * v_up;
    std::array<double, 6> out{};
    for (Phase p : kAllPhases) {
        int pi = static_cast<int>(p);
        Complex s = v_up(pi) * std::conj(i_up(pi));
        out[static_cast<std::size_t>(pi)] = s.real();
        out[static_cast<std::size_t>(pi) + 3] = s.imag();
    }
    return out;
}

}  // namespace gridcast

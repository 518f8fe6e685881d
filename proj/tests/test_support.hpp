#pragma once

// Shared fixtures and independent oracles for the test suites. Everything
// here is test-only and deliberately naive: dense assembly, Newton root
// finding on the power residuals, exhaustive partition enumeration.

#include <Eigen/Dense>
#include <functional>
#include <string>
#include <vector>

#include "gridcast/admittance.hpp"
#include "gridcast/feeder.hpp"
#include "gridcast/rng.hpp"
#include "gridcast/solver.hpp"

namespace gridcast::testing {

inline std::string data_path(const std::string& name) {
    return std::string(GRIDCAST_DATA_DIR) + "/" + name;
}

// Brute-force dense assembly: same per-branch block rule, naive dense
// accumulation in branch order.
inline Eigen::MatrixXcd dense_admittance(const Feeder& f, const NodeIndex& idx) {
    Eigen::MatrixXcd y = Eigen::MatrixXcd::Zero(idx.size(), idx.size());
    for (const auto& br : f.branches) {
        for (Phase p : kAllPhases)
            for (Phase q : kAllPhases) {
                Complex ys = br.series(static_cast<int>(p), static_cast<int>(q));
                Complex yh = 0.5 * br.shunt(static_cast<int>(p), static_cast<int>(q));
                int fp = idx.row(br.from, p), fq = idx.row(br.from, q);
                int tp = idx.row(br.to, p), tq = idx.row(br.to, q);
                if (fp >= 0 && fq >= 0) y(fp, fq) += ys + yh;
                if (tp >= 0 && tq >= 0) y(tp, tq) += ys + yh;
                if (fp >= 0 && tq >= 0) y(fp, tq) -= ys;
                if (tp >= 0 && fq >= 0) y(tp, fq) -= ys;
            }
    }
    return y;
}

// Random radial feeder: bus 0 is the three-phase slack; every other bus hangs
// off an earlier bus with a subset of its parent's phases. Series blocks are
// diagonally dominant with occasional mutual coupling and shunts.
inline Feeder make_random_radial_feeder(int n_buses, std::uint64_t seed,
                                        bool allow_missing_phases = true) {
    Rng rng(seed);
    Feeder f;
    f.base_kva = 1000.0;
    f.source_voltage_pu = 1.0;

    auto bus_id = [](int i) {
        char buf[8];
        std::snprintf(buf, sizeof buf, "b%02d", i);
        return std::string(buf);
    };

    for (int i = 0; i < n_buses; ++i) {
        Bus b;
        b.id = bus_id(i);
        b.kind = i == 0 ? BusKind::Slack : BusKind::Load;
        b.base_kv = 2.4;
        b.phases.add(Phase::A);
        b.phases.add(Phase::B);
        b.phases.add(Phase::C);
        f.bus_index.emplace(b.id, i);
        f.buses.push_back(std::move(b));
    }

    std::vector<int> parent(static_cast<std::size_t>(n_buses), -1);
    for (int i = 1; i < n_buses; ++i) {
        parent[static_cast<std::size_t>(i)] = static_cast<int>(rng.below(static_cast<std::size_t>(i)));
        if (allow_missing_phases && rng.uniform01() < 0.25) {
            // drop one phase (keeping at least one and staying inside the
            // parent's phase set, which is a superset by construction)
            PhaseSet& parent_phases = f.buses[static_cast<std::size_t>(parent[static_cast<std::size_t>(i)])].phases;
            PhaseSet child;
            for (Phase p : kAllPhases)
                if (parent_phases.contains(p) && rng.uniform01() < 0.7) child.add(p);
            if (!child.empty()) f.buses[static_cast<std::size_t>(i)].phases = child;
            else f.buses[static_cast<std::size_t>(i)].phases = parent_phases;
        } else {
            f.buses[static_cast<std::size_t>(i)].phases =
                f.buses[static_cast<std::size_t>(parent[static_cast<std::size_t>(i)])].phases;
        }
    }

    for (int i = 1; i < n_buses; ++i) {
        Branch br;
        br.from = parent[static_cast<std::size_t>(i)];
        br.to = i;
        const PhaseSet& common = f.buses[static_cast<std::size_t>(i)].phases;
        for (Phase p : kAllPhases) {
            if (!common.contains(p)) continue;
            int pi = static_cast<int>(p);
            br.series(pi, pi) = Complex(rng.uniform(30.0, 90.0), rng.uniform(-90.0, -30.0));
        }
        if (common.count() > 1 && rng.uniform01() < 0.5) {
            // symmetric mutual coupling between the first two present phases
            std::vector<int> present;
            for (Phase p : kAllPhases)
                if (common.contains(p)) present.push_back(static_cast<int>(p));
            Complex m(rng.uniform(-4.0, 4.0), rng.uniform(-4.0, 4.0));
            br.series(present[0], present[1]) = m;
            br.series(present[1], present[0]) = m;
        }
        if (rng.uniform01() < 0.3) {
            for (Phase p : kAllPhases)
                if (common.contains(p))
                    br.shunt(static_cast<int>(p), static_cast<int>(p)) = Complex(0.0, rng.uniform(0.001, 0.01));
        }
        f.branches.push_back(std::move(br));
    }

    int shape = 0;
    for (int i = 1; i < n_buses; ++i)
        for (Phase p : kAllPhases) {
            if (!f.buses[static_cast<std::size_t>(i)].phases.contains(p)) continue;
            if (rng.uniform01() < 0.7) {
                Load ld;
                ld.bus = i;
                ld.phase = p;
                ld.base_p_kw = rng.uniform(5.0, 30.0);
                ld.base_q_kvar = ld.base_p_kw * rng.uniform(0.3, 0.5);
                ld.shape_id = "s" + std::to_string(shape++ % 4);
                f.loads.push_back(std::move(ld));
            }
        }
    f.slack_bus = 0;
    return f;
}

// Single-phase radial feeder used by the Newton oracle comparison.
inline Feeder make_random_single_phase_feeder(int n_buses, std::uint64_t seed) {
    Rng rng(seed);
    Feeder f;
    f.base_kva = 1000.0;
    for (int i = 0; i < n_buses; ++i) {
        Bus b;
        b.id = "n" + std::to_string(i);
        b.kind = i == 0 ? BusKind::Slack : BusKind::Load;
        b.base_kv = 2.4;
        b.phases.add(Phase::A);
        f.bus_index.emplace(b.id, i);
        f.buses.push_back(std::move(b));
    }
    for (int i = 1; i < n_buses; ++i) {
        Branch br;
        br.from = static_cast<int>(rng.below(static_cast<std::size_t>(i)));
        br.to = i;
        br.series(0, 0) = Complex(rng.uniform(30.0, 80.0), rng.uniform(-80.0, -30.0));
        f.branches.push_back(std::move(br));
    }
    for (int i = 1; i < n_buses; ++i) {
        Load ld;
        ld.bus = i;
        ld.phase = Phase::A;
        ld.base_p_kw = rng.uniform(10.0, 60.0);
        ld.base_q_kvar = ld.base_p_kw * 0.4;
        ld.shape_id = "s0";
        f.loads.push_back(std::move(ld));
    }
    f.slack_bus = 0;
    return f;
}

// Independent oracle: damped Newton on the power-residual equations with a
// numerically differenced Jacobian. Shares nothing with the fixed-point
// solver path beyond the admittance builder input data.
inline Eigen::VectorXcd newton_power_flow(const Feeder& f, const std::vector<double>& multipliers,
                                          double tol = 1e-12) {
    NodeIndex idx = NodeIndex::build(f);
    Eigen::MatrixXcd y = dense_admittance(f, idx);

    std::vector<int> l_rows;
    for (int r = 0; r < idx.size(); ++r)
        if (idx.entries[static_cast<std::size_t>(r)].first != f.slack_bus) l_rows.push_back(r);
    const int nl = static_cast<int>(l_rows.size());

    Eigen::VectorXcd s_spec = specified_injection(f, idx, multipliers);
    Eigen::VectorXcd v = Eigen::VectorXcd::Ones(idx.size());

    auto residual = [&](const Eigen::VectorXd& x) {
        Eigen::VectorXcd vv = v;
        for (int k = 0; k < nl; ++k)
            vv(l_rows[static_cast<std::size_t>(k)]) = Complex(x(2 * k), x(2 * k + 1));
        Eigen::VectorXcd current = y * vv;
        Eigen::VectorXd r(2 * nl);
        for (int k = 0; k < nl; ++k) {
            Complex s = vv(l_rows[static_cast<std::size_t>(k)]) *
                        std::conj(current(l_rows[static_cast<std::size_t>(k)]));
            Complex d = s - s_spec(l_rows[static_cast<std::size_t>(k)]);
            r(2 * k) = d.real();
            r(2 * k + 1) = d.imag();
        }
        return r;
    };

    Eigen::VectorXd x(2 * nl);
    for (int k = 0; k < nl; ++k) {
        x(2 * k) = 1.0;
        x(2 * k + 1) = 0.0;
    }

    for (int iter = 0; iter < 100; ++iter) {
        Eigen::VectorXd r0 = residual(x);
        if (r0.lpNorm<Eigen::Infinity>() <= tol) break;
        Eigen::MatrixXd jac(2 * nl, 2 * nl);
        const double h = 1e-7;
        for (int c = 0; c < 2 * nl; ++c) {
            Eigen::VectorXd xp = x, xm = x;
            xp(c) += h;
            xm(c) -= h;
            jac.col(c) = (residual(xp) - residual(xm)) / (2.0 * h);
        }
        Eigen::VectorXd dx = jac.fullPivLu().solve(-r0);
        double step = 1.0;
        for (int halving = 0; halving < 30; ++halving) {
            Eigen::VectorXd xn = x + step * dx;
            if (residual(xn).norm() < r0.norm()) {
                x = xn;
                break;
            }
            step *= 0.5;
        }
    }

    for (int k = 0; k < nl; ++k)
        v(l_rows[static_cast<std::size_t>(k)]) = Complex(x(2 * k), x(2 * k + 1));
    return v;
}

/// Closed-form |V2| of the two-bus case (high-voltage quadratic root).
inline double two_bus_voltage(Complex z, Complex s_load) {
    Complex c = s_load * std::conj(z);
    double b = 2.0 * c.real() - 1.0;
    double disc = b * b - 4.0 * std::norm(c);
    double u = (-b + std::sqrt(disc)) / 2.0;
    return std::sqrt(u);
}

/// All set partitions of {0..n-1} via restricted growth strings.
inline void enumerate_partitions(int n, const std::function<void(const std::vector<int>&)>& visit) {
    std::vector<int> a(static_cast<std::size_t>(n), 0);
    std::function<void(int, int)> rec = [&](int i, int max_label) {
        if (i == n) {
            visit(a);
            return;
        }
        for (int label = 0; label <= max_label + 1; ++label) {
            a[static_cast<std::size_t>(i)] = label;
            rec(i + 1, std::max(max_label, label));
        }
    };
    if (n > 0) rec(1, 0);
}

}  // namespace gridcast::testing

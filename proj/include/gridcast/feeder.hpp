#pragma once

#include <Eigen/Dense>
#include <complex>
#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "gridcast/phase.hpp"

namespace gridcast {

using Complex = std::complex<double>;

enum class BusKind { Slack, Load };

struct Bus {
    std::string id;
    PhaseSet phases;
    BusKind kind = BusKind::Load;
    double base_kv = 0.0;  // line-to-neutral
};

// Branch admittance blocks are 3x3 complex in per-unit; rows/columns of
// phases absent at either endpoint are structural zeros. `series` is the
// series admittance (inverse of the series impedance block); `shunt` is the
// total shunt admittance of the branch, split half per end.
struct Branch {
    int from = -1;
    int to = -1;
    Eigen::Matrix3cd series = Eigen::Matrix3cd::Zero();
    Eigen::Matrix3cd shunt = Eigen::Matrix3cd::Zero();
};

struct Load {
    int bus = -1;
    Phase phase = Phase::A;
    double base_p_kw = 0.0;
    double base_q_kvar = 0.0;
    std::string shape_id;
};

// Immutable after construction; safe to share read-only across workers.
struct Feeder {
    std::vector<Bus> buses;
    std::vector<Branch> branches;
    std::vector<Load> loads;
    int slack_bus = -1;
    double base_kva = 0.0;        // per-unit power base
    double source_voltage_pu = 1.0;

    std::unordered_map<std::string, int> bus_index;

    int bus_of(const std::string& id) const {
        auto it = bus_index.find(id);
        return it == bus_index.end() ? -1 : it->second;
    }
};

/// Parses a feeder document. Throws ParseError (with line/column) on syntax
/// errors and Error on semantic ones (dangling reference, duplicate id,
/// nonpositive base).
Feeder parse_feeder(const std::string& text);

Feeder load_feeder_file(const std::string& path);

/// Canonical serialization; parse_feeder(serialize_feeder(f)) == f.
std::string serialize_feeder(const Feeder& f);

struct Violation {
    std::string code;     // multiple_slack | no_slack | disconnected | phase_mismatch
    std::string message;
};

/// Structural checks that are data, not failures: connectivity, phase
/// consistency, slack uniqueness. Empty result means valid.
std::vector<Violation> validate_feeder(const Feeder& f);

/// Content hash of the canonical serialization.
std::uint64_t feeder_hash(const Feeder& f);

bool feeder_equal(const Feeder& a, const Feeder& b);

}  // namespace gridcast

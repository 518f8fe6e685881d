#include "gridcast/feeder.hpp"

#include <algorithm>
#include <queue>
#include <sstream>

#include "gridcast/errors.hpp"
#include "gridcast/hash.hpp"
#include "gridcast/text.hpp"

namespace gridcast {

namespace {

[[noreturn]] void fail_at(const TextToken& tok, const std::string& msg) {
    throw ParseError(msg + " near '" + tok.value + "'", tok.line, tok.column);
}

double require_positive(const TextToken& tok, const char* what) {
    auto v = parse_double(tok.value);
    if (!v) fail_at(tok, std::string("expected a number for ") + what);
    if (*v <= 0.0) throw Error(std::string(what) + " must be positive, got " + tok.value);
    return *v;
}

Eigen::Matrix3cd read_block(const TextLine& line, std::size_t offset) {
    Eigen::Matrix3cd m;
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) {
            const TextToken& tok = line.tokens[offset + static_cast<std::size_t>(3 * r + c)];
            auto z = parse_complex(tok.value);
            if (!z) fail_at(tok, "expected a complex entry (re+imj)");
            m(r, c) = *z;
        }
    return m;
}

}  // namespace

Feeder parse_feeder(const std::string& text) {
    Feeder f;
    auto sections = parse_sections(text);

    const TextSection* buses = nullptr;
    const TextSection* branches = nullptr;
    const TextSection* loads = nullptr;
    const TextSection* source = nullptr;
    for (const auto& s : sections) {
        if (s.name.empty()) {
            if (!s.lines.empty())
                throw ParseError("content before first section", s.lines.front().line, 1);
            continue;
        }
        if (s.name == "buses") buses = &s;
        else if (s.name == "branches") branches = &s;
        else if (s.name == "loads") loads = &s;
        else if (s.name == "source") source = &s;
        else throw ParseError("unknown section [" + s.name + "]", s.line, 1);
    }
    if (!buses) throw Error("missing [buses] section");
    if (!source) throw Error("missing [source] section");

    for (const auto& line : buses->lines) {
        if (line.tokens.size() != 4)
            throw ParseError("bus line needs: id phases kind base_kv", line.line, 1);
        Bus b;
        b.id = line.tokens[0].value;
        if (f.bus_index.count(b.id)) throw Error("duplicate bus id '" + b.id + "'");
        auto phases = PhaseSet::parse(line.tokens[1].value);
        if (!phases) fail_at(line.tokens[1], "expected a phase set (subset of abc)");
        b.phases = *phases;
        const std::string& kind = line.tokens[2].value;
        if (kind == "slack") b.kind = BusKind::Slack;
        else if (kind == "load") b.kind = BusKind::Load;
        else fail_at(line.tokens[2], "bus kind must be 'slack' or 'load'");
        b.base_kv = require_positive(line.tokens[3], "bus base_kv");
        f.bus_index.emplace(b.id, static_cast<int>(f.buses.size()));
        f.buses.push_back(std::move(b));
    }

    if (branches) {
        for (const auto& line : branches->lines) {
            if (line.tokens.size() != 2 + 9 && line.tokens.size() != 2 + 18)
                throw ParseError("branch line needs: from to + 9 series entries [+ 9 shunt entries]",
                                 line.line, 1);
            Branch br;
            br.from = f.bus_of(line.tokens[0].value);
            if (br.from < 0) throw Error("branch references unknown bus '" + line.tokens[0].value + "'");
            br.to = f.bus_of(line.tokens[1].value);
            if (br.to < 0) throw Error("branch references unknown bus '" + line.tokens[1].value + "'");
            br.series = read_block(line, 2);
            if (line.tokens.size() == 2 + 18) br.shunt = read_block(line, 11);
            f.branches.push_back(std::move(br));
        }
    }

    if (loads) {
        for (const auto& line : loads->lines) {
            if (line.tokens.size() != 5)
                throw ParseError("load line needs: bus phase kw kvar shape_id", line.line, 1);
            Load ld;
            ld.bus = f.bus_of(line.tokens[0].value);
            if (ld.bus < 0) throw Error("load references unknown bus '" + line.tokens[0].value + "'");
            if (line.tokens[1].value.size() != 1)
                fail_at(line.tokens[1], "load phase must be a single letter");
            auto p = phase_from_letter(line.tokens[1].value[0]);
            if (!p) fail_at(line.tokens[1], "load phase must be a, b or c");
            ld.phase = *p;
            auto kw = parse_double(line.tokens[2].value);
            auto kvar = parse_double(line.tokens[3].value);
            if (!kw) fail_at(line.tokens[2], "expected kw");
            if (!kvar) fail_at(line.tokens[3], "expected kvar");
            ld.base_p_kw = *kw;
            ld.base_q_kvar = *kvar;
            ld.shape_id = line.tokens[4].value;
            f.loads.push_back(std::move(ld));
        }
    }

    for (const auto& line : source->lines) {
        if (line.tokens.size() < 2) throw ParseError("source line needs: key value", line.line, 1);
        const std::string& key = line.tokens[0].value;
        if (key == "bus") {
            f.slack_bus = f.bus_of(line.tokens[1].value);
            if (f.slack_bus < 0)
                throw Error("source references unknown bus '" + line.tokens[1].value + "'");
        } else if (key == "base_kva") {
            f.base_kva = require_positive(line.tokens[1], "base_kva");
        } else if (key == "voltage_pu") {
            f.source_voltage_pu = require_positive(line.tokens[1], "voltage_pu");
        } else {
            fail_at(line.tokens[0], "unknown source key");
        }
    }
    if (f.slack_bus < 0) throw Error("[source] must name the slack bus");
    if (f.base_kva <= 0.0) throw Error("[source] must set a positive base_kva");

    return f;
}

Feeder load_feeder_file(const std::string& path) { return parse_feeder(read_file(path)); }

std::string serialize_feeder(const Feeder& f) {
    std::ostringstream out;
    out << "[buses]\n";
    for (const auto& b : f.buses)
        out << b.id << ' ' << b.phases.to_string() << ' '
            << (b.kind == BusKind::Slack ? "slack" : "load") << ' ' << fmt_full(b.base_kv) << '\n';

    out << "\n[branches]\n";
    for (const auto& br : f.branches) {
        out << f.buses[static_cast<std::size_t>(br.from)].id << ' '
            << f.buses[static_cast<std::size_t>(br.to)].id;
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c) out << ' ' << fmt_complex(br.series(r, c));
        if (!br.shunt.isZero(0.0))
            for (int r = 0; r < 3; ++r)
                for (int c = 0; c < 3; ++c) out << ' ' << fmt_complex(br.shunt(r, c));
        out << '\n';
    }

    out << "\n[loads]\n";
    for (const auto& ld : f.loads)
        out << f.buses[static_cast<std::size_t>(ld.bus)].id << ' '
            << static_cast<char>(phase_letter(ld.phase) + ('a' - 'A')) << ' '
            << fmt_full(ld.base_p_kw) << ' ' << fmt_full(ld.base_q_kvar) << ' ' << ld.shape_id
            << '\n';

    out << "\n[source]\n";
    out << "bus " << f.buses[static_cast<std::size_t>(f.slack_bus)].id << '\n';
    out << "base_kva " << fmt_full(f.base_kva) << '\n';
    out << "voltage_pu " << fmt_full(f.source_voltage_pu) << '\n';
    return out.str();
}

std::vector<Violation> validate_feeder(const Feeder& f) {
    std::vector<Violation> out;

    std::vector<std::string> slack_ids;
    for (const auto& b : f.buses)
        if (b.kind == BusKind::Slack) slack_ids.push_back(b.id);
    if (slack_ids.empty()) {
        out.push_back({"no_slack", "feeder has no slack bus"});
    } else if (slack_ids.size() > 1) {
        std::string msg = "feeder has multiple slack buses:";
        for (const auto& id : slack_ids) msg += " " + id;
        out.push_back({"multiple_slack", msg});
    }
    if (f.slack_bus >= 0 &&
        f.buses[static_cast<std::size_t>(f.slack_bus)].kind != BusKind::Slack)
        out.push_back({"phase_mismatch",
                       "source bus " + f.buses[static_cast<std::size_t>(f.slack_bus)].id +
                           " is not marked slack"});

    // connectivity over the branch graph
    if (!f.buses.empty()) {
        std::vector<char> seen(f.buses.size(), 0);
        std::vector<std::vector<int>> adj(f.buses.size());
        for (const auto& br : f.branches) {
            adj[static_cast<std::size_t>(br.from)].push_back(br.to);
            adj[static_cast<std::size_t>(br.to)].push_back(br.from);
        }
        std::queue<int> q;
        int start = f.slack_bus >= 0 ? f.slack_bus : 0;
        q.push(start);
        seen[static_cast<std::size_t>(start)] = 1;
        while (!q.empty()) {
            int u = q.front();
            q.pop();
            for (int v : adj[static_cast<std::size_t>(u)])
                if (!seen[static_cast<std::size_t>(v)]) {
                    seen[static_cast<std::size_t>(v)] = 1;
                    q.push(v);
                }
        }
        std::string unreachable;
        for (std::size_t i = 0; i < f.buses.size(); ++i)
            if (!seen[i]) unreachable += " " + f.buses[i].id;
        if (!unreachable.empty())
            out.push_back({"disconnected", "unreachable buses:" + unreachable});
    }

    // load phases must exist at their bus; branch blocks must be zero on
    // absent phases and symmetric in the series block
    for (const auto& ld : f.loads) {
        const Bus& b = f.buses[static_cast<std::size_t>(ld.bus)];
        if (!b.phases.contains(ld.phase))
            out.push_back({"phase_mismatch", "load on bus " + b.id + " uses absent phase " +
                                                 std::string(1, phase_letter(ld.phase))});
    }
    for (std::size_t bi = 0; bi < f.branches.size(); ++bi) {
        const Branch& br = f.branches[bi];
        const PhaseSet& pf = f.buses[static_cast<std::size_t>(br.from)].phases;
        const PhaseSet& pt = f.buses[static_cast<std::size_t>(br.to)].phases;
        for (Phase p : kAllPhases)
            for (Phase q : kAllPhases) {
                bool present = pf.contains(p) && pt.contains(p) && pf.contains(q) && pt.contains(q);
                int r = static_cast<int>(p), c = static_cast<int>(q);
                if (!present && (br.series(r, c) != Complex(0, 0) || br.shunt(r, c) != Complex(0, 0)))
                    out.push_back({"phase_mismatch",
                                   "branch " + std::to_string(bi) + " has a nonzero entry on absent phase pair " +
                                       std::string(1, phase_letter(p)) + std::string(1, phase_letter(q))});
            }
        if (!br.series.isApprox(br.series.transpose(), 0.0))
            out.push_back({"phase_mismatch", "branch " + std::to_string(bi) + " series block is not symmetric"});
    }

    return out;
}

std::uint64_t feeder_hash(const Feeder& f) { return fnv1a64(serialize_feeder(f)); }

bool feeder_equal(const Feeder& a, const Feeder& b) {
    return serialize_feeder(a) == serialize_feeder(b);
}

}  // namespace gridcast

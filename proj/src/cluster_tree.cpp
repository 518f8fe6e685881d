#include "gridcast/cluster_tree.hpp"

#include <algorithm>
#include <map>
#include <queue>
#include <set>
#include <sstream>

#include "gridcast/community.hpp"
#include "gridcast/errors.hpp"
#include "gridcast/flow_graph.hpp"
#include "gridcast/text.hpp"

namespace gridcast {

namespace {

// Working representation during legalization: groups of bus indices.
struct Groups {
    std::vector<std::vector<int>> members;
    std::vector<int> group_of;

    void rebuild_group_of(std::size_t n_buses) {
        group_of.assign(n_buses, -1);
        for (std::size_t gi = 0; gi < members.size(); ++gi)
            for (int b : members[gi]) group_of[static_cast<std::size_t>(b)] = static_cast<int>(gi);
    }
};

std::vector<std::vector<int>> bus_adjacency(const Feeder& f) {
    std::vector<std::vector<int>> adj(f.buses.size());
    for (const auto& br : f.branches) {
        adj[static_cast<std::size_t>(br.from)].push_back(br.to);
        adj[static_cast<std::size_t>(br.to)].push_back(br.from);
    }
    return adj;
}

std::vector<std::vector<int>> connected_components(const std::vector<int>& nodes,
                                                   const std::vector<std::vector<int>>& adj) {
    std::set<int> pending(nodes.begin(), nodes.end());
    std::vector<std::vector<int>> comps;
    while (!pending.empty()) {
        int start = *pending.begin();
        std::vector<int> comp;
        std::queue<int> q;
        q.push(start);
        pending.erase(start);
        while (!q.empty()) {
            int u = q.front();
            q.pop();
            comp.push_back(u);
            for (int v : adj[static_cast<std::size_t>(u)])
                if (pending.erase(v)) q.push(v);
        }
        std::sort(comp.begin(), comp.end());
        comps.push_back(std::move(comp));
    }
    return comps;
}

}  // namespace

int ClusterTree::depth() const {
    int d = 0;
    for (const auto& c : clusters) d = std::max(d, c.layer);
    return d + (clusters.empty() ? 0 : 1);
}

std::vector<std::vector<int>> ClusterTree::layers() const {
    std::vector<std::vector<int>> out(static_cast<std::size_t>(depth()));
    for (std::size_t ci = 0; ci < clusters.size(); ++ci)
        out[static_cast<std::size_t>(clusters[ci].layer)].push_back(static_cast<int>(ci));
    return out;
}

std::string cluster_name(int index) {
    std::string out;
    int i = index;
    do {
        out.insert(out.begin(), static_cast<char>('A' + i % 26));
        i = i / 26 - 1;
    } while (i >= 0);
    return out;
}

std::string ClusterTree::check_invariants(const Feeder& f) const {
    std::vector<int> covered(f.buses.size(), 0);
    for (const auto& c : clusters)
        for (int b : c.buses) {
            if (b < 0 || b >= static_cast<int>(f.buses.size())) return "bus index out of range";
            covered[static_cast<std::size_t>(b)]++;
        }
    for (std::size_t b = 0; b < covered.size(); ++b)
        if (covered[b] != 1) return "bus " + f.buses[b].id + " covered " + std::to_string(covered[b]) + " times";

    if (top < 0 || top >= size()) return "missing top cluster";
    if (clusters[static_cast<std::size_t>(top)].parent != -1) return "top cluster has a parent";
    if (bus_to_cluster[static_cast<std::size_t>(f.slack_bus)] != top)
        return "slack bus is not in the top cluster";
    if (clusters[static_cast<std::size_t>(top)].head_bus != f.slack_bus)
        return "top cluster head is not the slack bus";

    auto adj = bus_adjacency(f);
    for (std::size_t ci = 0; ci < clusters.size(); ++ci) {
        const Cluster& c = clusters[ci];
        // connectivity of the induced subgraph
        std::vector<std::vector<int>> filtered(f.buses.size());
        for (int b : c.buses)
            for (int v : adj[static_cast<std::size_t>(b)])
                if (bus_to_cluster[static_cast<std::size_t>(v)] == static_cast<int>(ci))
                    filtered[static_cast<std::size_t>(b)].push_back(v);
        auto comps = connected_components(c.buses, filtered);
        if (comps.size() != 1)
            return "cluster " + cluster_name(static_cast<int>(ci)) + " is not connected";

        if (static_cast<int>(ci) == top) continue;
        if (c.parent < 0 || c.parent >= size())
            return "cluster " + cluster_name(static_cast<int>(ci)) + " has no parent";
        if (clusters[static_cast<std::size_t>(c.parent)].layer + 1 != c.layer)
            return "layer index mismatch at cluster " + cluster_name(static_cast<int>(ci));
        // exactly one branch must connect the cluster to its parent, and it
        // must land on the head bus
        int connecting = 0;
        for (std::size_t bi = 0; bi < f.branches.size(); ++bi) {
            const auto& br = f.branches[bi];
            int cf = bus_to_cluster[static_cast<std::size_t>(br.from)];
            int ct = bus_to_cluster[static_cast<std::size_t>(br.to)];
            if ((cf == static_cast<int>(ci) && ct == c.parent) ||
                (ct == static_cast<int>(ci) && cf == c.parent)) {
                ++connecting;
                int head = cf == static_cast<int>(ci) ? br.from : br.to;
                if (head != c.head_bus)
                    return "head bus of cluster " + cluster_name(static_cast<int>(ci)) +
                           " is not on the connecting branch";
            }
        }
        if (connecting != 1)
            return "cluster " + cluster_name(static_cast<int>(ci)) + " connects to its parent via " +
                   std::to_string(connecting) + " branches";
    }
    return "";
}

ClusterTree legalize_to_cluster_tree(const Feeder& f, const Partition& part,
                                     const GranularityPolicy& policy) {
    if (static_cast<int>(part.assignment.size()) != static_cast<int>(f.buses.size()))
        throw Error("partition does not cover the feeder buses");

    auto adj = bus_adjacency(f);
    Groups groups;
    groups.members.resize(static_cast<std::size_t>(std::max(part.module_count, 1)));
    for (std::size_t b = 0; b < part.assignment.size(); ++b)
        groups.members[static_cast<std::size_t>(part.assignment[b])].push_back(static_cast<int>(b));

    // re-split oversized modules on their induced flow subgraphs
    if (policy.recursive_split && policy.max_size > 0) {
        FlowGraph flow = FlowGraph::from_feeder(f);
        bool changed = true;
        int rounds = 0;
        while (changed && rounds++ < 16) {
            changed = false;
            std::vector<std::vector<int>> next;
            for (auto& group : groups.members) {
                if (static_cast<int>(group.size()) <= policy.max_size) {
                    next.push_back(group);
                    continue;
                }
                std::vector<int> local_of(f.buses.size(), -1);
                for (std::size_t k = 0; k < group.size(); ++k)
                    local_of[static_cast<std::size_t>(group[k])] = static_cast<int>(k);
                std::vector<FlowGraph::Edge> edges;
                for (const auto& e : flow.edges) {
                    int lu = local_of[static_cast<std::size_t>(e.u)];
                    int lv = local_of[static_cast<std::size_t>(e.v)];
                    if (lu >= 0 && lv >= 0) edges.push_back({lu, lv, e.w});
                }
                FlowGraph sub = FlowGraph::from_edges(static_cast<int>(group.size()), std::move(edges));
                if (!sub.connected()) {  // handled by the component split below
                    next.push_back(group);
                    continue;
                }
                DetectOptions opts;
                opts.seed = policy.seed;
                Partition sub_part = detect_communities(sub, opts);
                if (sub_part.module_count <= 1) {
                    next.push_back(group);
                    continue;
                }
                std::vector<std::vector<int>> pieces(static_cast<std::size_t>(sub_part.module_count));
                for (std::size_t k = 0; k < group.size(); ++k)
                    pieces[static_cast<std::size_t>(sub_part.assignment[k])].push_back(group[k]);
                for (auto& piece : pieces) next.push_back(std::move(piece));
                changed = true;
            }
            groups.members = std::move(next);
        }
    }

    // split disconnected modules into connected components
    {
        std::vector<std::vector<int>> next;
        for (const auto& group : groups.members) {
            if (group.empty()) continue;
            for (auto& comp : connected_components(group, adj)) next.push_back(std::move(comp));
        }
        groups.members = std::move(next);
    }
    groups.rebuild_group_of(f.buses.size());

    // merge until the cluster graph is a tree with single-branch attachments
    for (;;) {
        std::map<std::pair<int, int>, int> pair_branches;
        for (const auto& br : f.branches) {
            int a = groups.group_of[static_cast<std::size_t>(br.from)];
            int b = groups.group_of[static_cast<std::size_t>(br.to)];
            if (a == b) continue;
            pair_branches[std::minmax(a, b)]++;
        }
        int merge_a = -1, merge_b = -1;
        for (const auto& [pair, count] : pair_branches)
            if (count > 1) {
                merge_a = pair.first;
                merge_b = pair.second;
                break;
            }
        if (merge_a < 0) {
            // tree check: a connected cluster graph with E >= V has a cycle;
            // merge the endpoints of the first non-tree edge found by BFS
            std::size_t v = groups.members.size();
            if (pair_branches.size() >= v && v > 1) {
                std::vector<int> parent(v, -2);
                std::vector<std::set<int>> cadj(v);
                for (const auto& [pair, count] : pair_branches) {
                    cadj[static_cast<std::size_t>(pair.first)].insert(pair.second);
                    cadj[static_cast<std::size_t>(pair.second)].insert(pair.first);
                }
                std::queue<int> q;
                q.push(0);
                parent[0] = -1;
                while (!q.empty() && merge_a < 0) {
                    int u = q.front();
                    q.pop();
                    for (int w : cadj[static_cast<std::size_t>(u)]) {
                        if (parent[static_cast<std::size_t>(w)] == -2) {
                            parent[static_cast<std::size_t>(w)] = u;
                            q.push(w);
                        } else if (parent[static_cast<std::size_t>(u)] != w) {
                            merge_a = std::min(u, w);
                            merge_b = std::max(u, w);
                            break;
                        }
                    }
                }
            }
        }
        if (merge_a < 0) break;
        auto& dst = groups.members[static_cast<std::size_t>(merge_a)];
        auto& src = groups.members[static_cast<std::size_t>(merge_b)];
        dst.insert(dst.end(), src.begin(), src.end());
        std::sort(dst.begin(), dst.end());
        groups.members.erase(groups.members.begin() + merge_b);
        groups.rebuild_group_of(f.buses.size());
    }

    // orient away from the slack cluster and emit BFS order
    int slack_group = groups.group_of[static_cast<std::size_t>(f.slack_bus)];
    std::size_t n_groups = groups.members.size();

    struct Attachment {
        int branch = -1;
        int head = -1;
        int upstream = -1;
    };
    std::vector<std::vector<std::pair<int, Attachment>>> cluster_adj(n_groups);
    for (std::size_t bi = 0; bi < f.branches.size(); ++bi) {
        const auto& br = f.branches[bi];
        int a = groups.group_of[static_cast<std::size_t>(br.from)];
        int b = groups.group_of[static_cast<std::size_t>(br.to)];
        if (a == b) continue;
        cluster_adj[static_cast<std::size_t>(a)].push_back(
            {b, Attachment{static_cast<int>(bi), br.to, br.from}});
        cluster_adj[static_cast<std::size_t>(b)].push_back(
            {a, Attachment{static_cast<int>(bi), br.from, br.to}});
    }

    auto id_of = [&](int bus) -> const std::string& { return f.buses[static_cast<std::size_t>(bus)].id; };

    ClusterTree tree;
    std::vector<int> emitted(n_groups, -1);
    std::queue<int> q;
    q.push(slack_group);
    emitted[static_cast<std::size_t>(slack_group)] = 0;
    {
        Cluster c;
        c.buses = groups.members[static_cast<std::size_t>(slack_group)];
        std::sort(c.buses.begin(), c.buses.end(),
                  [&](int x, int y) { return id_of(x) < id_of(y); });
        c.head_bus = f.slack_bus;
        c.layer = 0;
        tree.clusters.push_back(std::move(c));
        tree.top = 0;
    }
    while (!q.empty()) {
        int gu = q.front();
        q.pop();
        int cu = emitted[static_cast<std::size_t>(gu)];
        // deterministic child order: by head bus id
        auto neighbors = cluster_adj[static_cast<std::size_t>(gu)];
        std::sort(neighbors.begin(), neighbors.end(),
                  [&](const auto& x, const auto& y) { return id_of(x.second.head) < id_of(y.second.head); });
        for (const auto& [gv, att] : neighbors) {
            if (emitted[static_cast<std::size_t>(gv)] >= 0) continue;
            Cluster c;
            c.buses = groups.members[static_cast<std::size_t>(gv)];
            std::sort(c.buses.begin(), c.buses.end(),
                      [&](int x, int y) { return id_of(x) < id_of(y); });
            c.head_bus = att.head;
            c.parent = cu;
            c.layer = tree.clusters[static_cast<std::size_t>(cu)].layer + 1;
            c.head_branch = att.branch;
            c.parent_side_bus = att.upstream;
            int ci = static_cast<int>(tree.clusters.size());
            emitted[static_cast<std::size_t>(gv)] = ci;
            tree.clusters[static_cast<std::size_t>(cu)].children.push_back(ci);
            tree.clusters.push_back(std::move(c));
            q.push(gv);
        }
    }

    tree.bus_to_cluster.assign(f.buses.size(), -1);
    for (std::size_t ci = 0; ci < tree.clusters.size(); ++ci)
        for (int b : tree.clusters[ci].buses)
            tree.bus_to_cluster[static_cast<std::size_t>(b)] = static_cast<int>(ci);
    return tree;
}

std::string serialize_cluster_tree(const ClusterTree& tree, const Feeder& f) {
    std::ostringstream out;
    out << "[clusters]\n";
    out << "# name parent head_bus layer\n";
    for (std::size_t ci = 0; ci < tree.clusters.size(); ++ci) {
        const Cluster& c = tree.clusters[ci];
        out << cluster_name(static_cast<int>(ci)) << ' '
            << (c.parent < 0 ? std::string("-") : cluster_name(c.parent)) << ' '
            << f.buses[static_cast<std::size_t>(c.head_bus)].id << ' ' << c.layer << '\n';
    }
    out << "\n[assignment]\n";
    out << "# bus cluster\n";
    for (std::size_t b = 0; b < f.buses.size(); ++b)
        out << f.buses[b].id << ' ' << cluster_name(tree.bus_to_cluster[b]) << '\n';
    return out.str();
}

ClusterTree parse_cluster_tree(const std::string& text, const Feeder& f) {
    auto sections = parse_sections(text);
    const TextSection* clusters = nullptr;
    const TextSection* assignment = nullptr;
    for (const auto& s : sections) {
        if (s.name == "clusters") clusters = &s;
        else if (s.name == "assignment") assignment = &s;
    }
    if (!clusters || !assignment) throw Error("partition export needs [clusters] and [assignment]");

    std::map<std::string, int> index_of_name;
    ClusterTree tree;
    for (const auto& line : clusters->lines) {
        if (line.tokens.size() != 4)
            throw ParseError("cluster line needs: name parent head_bus layer", line.line, 1);
        index_of_name[line.tokens[0].value] = static_cast<int>(tree.clusters.size());
        tree.clusters.emplace_back();
    }
    int row = 0;
    for (const auto& line : clusters->lines) {
        Cluster& c = tree.clusters[static_cast<std::size_t>(row++)];
        const std::string& parent = line.tokens[1].value;
        if (parent == "-") {
            c.parent = -1;
            tree.top = row - 1;
        } else {
            auto it = index_of_name.find(parent);
            if (it == index_of_name.end()) throw Error("unknown parent cluster " + parent);
            c.parent = it->second;
            tree.clusters[static_cast<std::size_t>(it->second)].children.push_back(row - 1);
        }
        c.head_bus = f.bus_of(line.tokens[2].value);
        if (c.head_bus < 0) throw Error("unknown head bus " + line.tokens[2].value);
        auto layer = parse_double(line.tokens[3].value);
        if (!layer) throw Error("bad layer index");
        c.layer = static_cast<int>(*layer);
    }
    tree.bus_to_cluster.assign(f.buses.size(), -1);
    for (const auto& line : assignment->lines) {
        if (line.tokens.size() != 2)
            throw ParseError("assignment line needs: bus cluster", line.line, 1);
        int b = f.bus_of(line.tokens[0].value);
        if (b < 0) throw Error("unknown bus " + line.tokens[0].value);
        auto it = index_of_name.find(line.tokens[1].value);
        if (it == index_of_name.end()) throw Error("unknown cluster " + line.tokens[1].value);
        tree.bus_to_cluster[static_cast<std::size_t>(b)] = it->second;
        tree.clusters[static_cast<std::size_t>(it->second)].buses.push_back(b);
    }
    for (auto& c : tree.clusters)
        std::sort(c.buses.begin(), c.buses.end(), [&](int x, int y) {
            return f.buses[static_cast<std::size_t>(x)].id < f.buses[static_cast<std::size_t>(y)].id;
        });
    // recover head branches from the feeder
    for (std::size_t ci = 0; ci < tree.clusters.size(); ++ci) {
        Cluster& c = tree.clusters[ci];
        if (c.parent < 0) continue;
        for (std::size_t bi = 0; bi < f.branches.size(); ++bi) {
            const auto& br = f.branches[bi];
            int cf = tree.bus_to_cluster[static_cast<std::size_t>(br.from)];
            int ct = tree.bus_to_cluster[static_cast<std::size_t>(br.to)];
            if (cf == static_cast<int>(ci) && ct == c.parent && br.from == c.head_bus) {
                c.head_branch = static_cast<int>(bi);
                c.parent_side_bus = br.to;
            } else if (ct == static_cast<int>(ci) && cf == c.parent && br.to == c.head_bus) {
                c.head_branch = static_cast<int>(bi);
                c.parent_side_bus = br.from;
            }
        }
        if (c.head_branch < 0) throw Error("no branch connects cluster to its parent through the head bus");
    }
    return tree;
}

}  // namespace gridcast

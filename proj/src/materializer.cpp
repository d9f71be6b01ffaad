#include <sharedb/materializer.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <queue>

namespace sharedb {

/*======================================================================================================================
 * WorkloadGraph
 *====================================================================================================================*/

std::uint32_t WorkloadGraph::add_component(std::uint32_t partition, std::uint32_t batch)
{
    components_.push_back({partition, batch, {}});
    return static_cast<std::uint32_t>(components_.size() - 1);
}

std::uint32_t WorkloadGraph::add_node(std::uint32_t component, int parent, double cost, std::optional<ViewKey> key,
                                      int plan_node)
{
    SHAREDB_CHECK(component < components_.size(), "unknown component");
    SHAREDB_CHECK(cost >= 0 && std::isfinite(cost), "node cost must be finite and non-negative");
    auto id = static_cast<std::uint32_t>(nodes_.size());
    Node n;
    n.component = component;
    n.parent = parent;
    n.cost = cost;
    n.plan_node = plan_node;
    if (key) {
        auto it = std::find(keys_.begin(), keys_.end(), *key);
        SHAREDB_CHECK(it != keys_.end(), "node key must be interned first");
        n.key = static_cast<int>(it - keys_.begin());
    }
    if (parent >= 0) {
        SHAREDB_CHECK(static_cast<std::size_t>(parent) < nodes_.size() && nodes_[parent].component == component,
                      "parent must be an earlier node of the same component");
        nodes_[parent].children.push_back(id);
    }
    nodes_.push_back(std::move(n));
    components_[component].nodes.push_back(id);
    return id;
}

int WorkloadGraph::intern(const ViewKey &key, double budget)
{
    auto it = std::find(keys_.begin(), keys_.end(), key);
    if (it != keys_.end()) return static_cast<int>(it - keys_.begin());
    SHAREDB_CHECK(budget >= 0 && std::isfinite(budget), "key budget must be finite and non-negative");
    keys_.push_back(key);
    budgets_.push_back(budget);
    return static_cast<int>(keys_.size() - 1);
}

double WorkloadGraph::total_cost() const
{
    double c = 0;
    for (auto &n : nodes_) c += n.cost;
    return c;
}

/*======================================================================================================================
 * Cut enumeration
 *====================================================================================================================*/

namespace {

using NodeSet = std::vector<std::uint32_t>;

struct Enumerator
{
    const WorkloadGraph &g;
    const CutLimits &limits;
    std::vector<std::vector<NodeSet>> frontier;
    bool truncated = false;

    void capped_push(std::vector<NodeSet> &out, NodeSet s)
    {
        if (out.size() >= limits.max_per_component) {
            truncated = true;
            return;
        }
        out.push_back(std::move(s));
    }

    /** Cuts anchored at `a`: {a} when materializable, plus one cut from every successor. */
    void build(std::uint32_t a)
    {
        auto &node = g.nodes()[a];
        std::vector<NodeSet> out;
        if (node.key >= 0) out.push_back({a});
        if (!node.children.empty()) {
            std::vector<NodeSet> product{{}};
            for (auto c : node.children) {
                auto &fc = frontier[c];
                std::vector<NodeSet> next;
                for (auto &p : product)
                    for (auto &s : fc) {
                        if (p.size() + s.size() > limits.max_width) {
                            truncated = true;
                            continue;
                        }
                        if (next.size() >= limits.max_per_component) {
                            truncated = true;
                            break;
                        }
                        NodeSet u = p;
                        u.insert(u.end(), s.begin(), s.end());
                        next.push_back(std::move(u));
                    }
                product = std::move(next);
                if (product.empty()) break;
            }
            for (auto &p : product) {
                std::sort(p.begin(), p.end());
                capped_push(out, std::move(p));
            }
        }
        frontier[a] = std::move(out);
    }
};

} // namespace

CutSet enumerate_cuts(const WorkloadGraph &g, const CutLimits &limits)
{
    if (limits.max_width == 0 || limits.max_per_component == 0) throw ConfigError("cut limits must be positive");
    CutSet out;
    Enumerator e{g, limits, std::vector<std::vector<NodeSet>>(g.nodes().size()), false};
    auto &nodes = g.nodes();

    for (auto &comp : g.components()) {
        e.truncated = false;
        // children have larger ids than their parents
        for (auto it = comp.nodes.rbegin(); it != comp.nodes.rend(); ++it) e.build(*it);

        std::size_t emitted = 0;
        for (auto a : comp.nodes) {
            // a cut is listed at the highest node whose frontier contains it: the minimal anchor
            int p = nodes[a].parent;
            if (p >= 0 && nodes[p].children.size() == 1) continue;
            for (auto &set : e.frontier[a]) {
                if (emitted >= limits.max_per_component) {
                    e.truncated = true;
                    break;
                }
                Cut c;
                c.id = static_cast<std::uint32_t>(out.cuts.size());
                c.nodes = set;
                c.anchor = a;
                for (auto u : set) {
                    for (std::int64_t x = u; x != static_cast<std::int64_t>(a); x = nodes[x].parent) {
                        SHAREDB_CHECK(x >= 0, "cut node outside its anchor's subtree");
                        c.bc.push_back(static_cast<std::uint32_t>(x));
                    }
                    c.keys.push_back(nodes[u].key);
                }
                c.bc.push_back(a);
                std::sort(c.bc.begin(), c.bc.end());
                c.bc.erase(std::unique(c.bc.begin(), c.bc.end()), c.bc.end());
                std::sort(c.keys.begin(), c.keys.end());
                c.keys.erase(std::unique(c.keys.begin(), c.keys.end()), c.keys.end());
                for (auto x : c.bc) c.bc_cost += nodes[x].cost;
                for (auto k : c.keys) c.budget += g.key_budget(k);
                out.cuts.push_back(std::move(c));
                ++emitted;
            }
        }
        if (e.truncated) ++out.truncated_components;
        for (auto a : comp.nodes) e.frontier[a].clear();
    }
    return out;
}

/*======================================================================================================================
 * Selection functions
 *====================================================================================================================*/

namespace {

/** Incremental R-bar / B-bar bookkeeping. */
class Coverage
{
    const WorkloadGraph &g_;
    const CutSet &cs_;
    std::vector<std::uint32_t> node_count_;
    std::vector<std::uint32_t> key_count_;
    std::vector<char> chosen_;
    double reduction_ = 0, budget_ = 0;

    public:
    Coverage(const WorkloadGraph &g, const CutSet &cs)
        : g_(g), cs_(cs), node_count_(g.nodes().size(), 0), key_count_(g.keys().size(), 0), chosen_(cs.cuts.size(), 0)
    {
    }

    double reduction() const { return reduction_; }
    double budget() const { return budget_; }
    bool chosen(std::uint32_t c) const { return chosen_[c]; }

    double gain(std::uint32_t c) const
    {
        double s = 0;
        for (auto x : cs_.cuts[c].bc)
            if (!node_count_[x]) s += g_.nodes()[x].cost;
        return s;
    }
    double extra_budget(std::uint32_t c) const
    {
        double s = 0;
        for (auto k : cs_.cuts[c].keys)
            if (!key_count_[k]) s += g_.key_budget(k);
        return s;
    }
    void add(std::uint32_t c)
    {
        SHAREDB_CHECK(!chosen_[c], "cut added twice");
        chosen_[c] = 1;
        for (auto x : cs_.cuts[c].bc)
            if (node_count_[x]++ == 0) reduction_ += g_.nodes()[x].cost;
        for (auto k : cs_.cuts[c].keys)
            if (key_count_[k]++ == 0) budget_ += g_.key_budget(k);
    }
};

bool fits(double used, double limit) { return used <= limit * (1 + 1e-12) + 1e-9; }

} // namespace

double reduction(const WorkloadGraph &g, const CutSet &cuts, std::span<const std::uint32_t> selection)
{
    std::vector<char> seen(g.nodes().size(), 0);
    double s = 0;
    for (auto c : selection)
        for (auto x : cuts.cuts.at(c).bc)
            if (!seen[x]) {
                seen[x] = 1;
                s += g.nodes()[x].cost;
            }
    return s;
}

double budget(const WorkloadGraph &g, const CutSet &cuts, std::span<const std::uint32_t> selection)
{
    double s = 0;
    for (auto k : domain(cuts, selection)) s += g.key_budget(k);
    return s;
}

std::vector<int> domain(const CutSet &cuts, std::span<const std::uint32_t> selection)
{
    std::vector<int> d;
    for (auto c : selection) {
        auto &k = cuts.cuts.at(c).keys;
        d.insert(d.end(), k.begin(), k.end());
    }
    std::sort(d.begin(), d.end());
    d.erase(std::unique(d.begin(), d.end()), d.end());
    return d;
}

std::vector<std::uint32_t> enrichment(const CutSet &cuts, std::span<const std::uint32_t> selection)
{
    auto d = domain(cuts, selection);
    std::vector<std::uint32_t> e;
    for (auto &c : cuts.cuts)
        if (std::includes(d.begin(), d.end(), c.keys.begin(), c.keys.end())) e.push_back(c.id);
    return e;
}

Selection make_selection(const WorkloadGraph &g, const CutSet &cuts, std::vector<std::uint32_t> chosen)
{
    Selection s;
    s.cuts = enrichment(cuts, chosen);
    s.domain = domain(cuts, s.cuts);
    s.reduction = reduction(g, cuts, s.cuts);
    s.budget = budget(g, cuts, s.cuts);
    return s;
}

/*======================================================================================================================
 * Gr
 *====================================================================================================================*/

Selection solve_gr(const WorkloadGraph &g, const CutSet &cuts, double budget_limit)
{
    if (!(budget_limit >= 0)) throw ConfigError("budget must be non-negative");
    Coverage cov(g, cuts);
    std::vector<std::uint32_t> chosen;
    for (;;) {
        int best = -1;
        double best_gain = 0;
        for (auto &c : cuts.cuts) {
            if (cov.chosen(c.id) || !fits(cov.budget() + cov.extra_budget(c.id), budget_limit)) continue;
            double gain = cov.gain(c.id);
            if (gain > best_gain) {
                best_gain = gain;
                best = static_cast<int>(c.id);
            }
        }
        if (best < 0) break;
        cov.add(static_cast<std::uint32_t>(best));
        chosen.push_back(static_cast<std::uint32_t>(best));
    }
    return make_selection(g, cuts, std::move(chosen));
}

/*======================================================================================================================
 * ISK
 *====================================================================================================================*/

namespace {

struct Candidate
{
    double ratio;
    std::uint32_t id;
    bool operator<(const Candidate &o) const     // max-heap: larger ratio first, then lower id
    {
        if (ratio != o.ratio) return ratio < o.ratio;
        return id > o.id;
    }
};

double ratio_of(double gain, double cost)
{
    if (gain <= 0) return -1;
    return cost <= 0 ? std::numeric_limits<double>::infinity() : gain / cost;
}

/** Maximizes R-bar subject to a modular cost, by partial enumeration of small prefixes and lazy greedy extension. */
class ModularKnapsack
{
    const WorkloadGraph &g_;
    const CutSet &cs_;
    const std::vector<double> &cost_;
    double limit_;
    std::vector<Candidate> initial_;

    public:
    ModularKnapsack(const WorkloadGraph &g, const CutSet &cs, const std::vector<double> &cost, double limit)
        : g_(g), cs_(cs), cost_(cost), limit_(limit)
    {
        for (auto &c : cs.cuts) {
            double r = ratio_of(c.bc_cost, cost[c.id]);
            if (r >= 0 && fits(cost[c.id], limit)) initial_.push_back({r, c.id});
        }
        std::make_heap(initial_.begin(), initial_.end());
    }

    /** Greedy extension of `prefix`; returns the chosen cuts and their R-bar. */
    std::pair<std::vector<std::uint32_t>, double> extend(const std::vector<std::uint32_t> &prefix) const
    {
        Coverage cov(g_, cs_);
        double used = 0;
        for (auto c : prefix) {
            cov.add(c);
            used += cost_[c];
        }
        std::vector<std::uint32_t> out = prefix;
        std::priority_queue<Candidate> heap(std::less<Candidate>{}, initial_);
        while (!heap.empty()) {
            auto top = heap.top();
            heap.pop();
            if (cov.chosen(top.id) || !fits(used + cost_[top.id], limit_)) continue;
            double r = ratio_of(cov.gain(top.id), cost_[top.id]);
            if (r < 0) continue;
            Candidate fresh{r, top.id};
            if (!heap.empty() && fresh < heap.top()) {
                heap.push(fresh);       // stale bound, no longer the best
                continue;
            }
            cov.add(top.id);
            used += cost_[top.id];
            out.push_back(top.id);
        }
        return {std::move(out), cov.reduction()};
    }
};

} // namespace

Selection solve_isk(const WorkloadGraph &g, const CutSet &cuts, double budget_limit, const IskConfig &config)
{
    if (!(budget_limit >= 0)) throw ConfigError("budget must be non-negative");
    if (config.max_iterations < 1) throw ConfigError("ISK needs at least one iteration");
    const std::size_t n = cuts.cuts.size();

    // f(j | V \ j): budget of the keys used by no other cut
    std::vector<std::uint32_t> key_users(g.keys().size(), 0);
    for (auto &c : cuts.cuts)
        for (auto k : c.keys) ++key_users[k];
    std::vector<double> exclusive(n, 0);
    for (auto &c : cuts.cuts)
        for (auto k : c.keys)
            if (key_users[k] == 1) exclusive[c.id] += g.key_budget(k);

    // prefix pool: cuts with the largest standalone reduction
    std::vector<std::uint32_t> pool(n);
    std::iota(pool.begin(), pool.end(), 0u);
    std::stable_sort(pool.begin(), pool.end(),
                     [&](auto a, auto b) { return cuts.cuts[a].bc_cost > cuts.cuts[b].bc_cost; });
    if (pool.size() > config.prefix_pool) pool.resize(config.prefix_pool);
    std::sort(pool.begin(), pool.end());

    std::vector<std::uint32_t> x, best;
    double best_reduction = -1;
    int rounds = 0;
    for (; rounds < config.max_iterations;) {
        ++rounds;
        // modular upper bound of B-bar at x
        std::vector<char> in_x(n, 0);
        for (auto c : x) in_x[c] = 1;
        Coverage at_x(g, cuts);
        for (auto c : x) at_x.add(c);
        double constant = at_x.budget();
        std::vector<double> cost(n);
        for (std::uint32_t j = 0; j < n; ++j) {
            if (in_x[j]) {
                cost[j] = exclusive[j];
                constant -= exclusive[j];
            } else {
                cost[j] = at_x.extra_budget(j);
            }
        }
        const double limit = budget_limit - std::max(constant, 0.0);

        ModularKnapsack knap(g, cuts, cost, limit);
        std::vector<std::uint32_t> round_best;
        double round_reduction = -1;
        std::vector<std::uint32_t> prefix;
        auto consider = [&] {
            double used = 0;
            for (auto c : prefix) used += cost[c];
            if (!fits(used, limit)) return;
            auto [sel, red] = knap.extend(prefix);
            if (red > round_reduction) {
                round_reduction = red;
                round_best = std::move(sel);
            }
        };
        // all prefixes of size <= prefix_size, in lexicographic order
        auto recurse = [&](auto &self, std::size_t from) -> void {
            consider();
            if (prefix.size() == config.prefix_size) return;
            for (std::size_t i = from; i < pool.size(); ++i) {
                prefix.push_back(pool[i]);
                self(self, i + 1);
                prefix.pop_back();
            }
        };
        recurse(recurse, 0);

        std::sort(round_best.begin(), round_best.end());
        SHAREDB_CHECK(fits(budget(g, cuts, round_best), budget_limit), "ISK round exceeded the budget");
        if (round_reduction > best_reduction) {
            best_reduction = round_reduction;
            best = round_best;
        }
        if (round_best == x) break;
        x = std::move(round_best);
    }
    auto s = make_selection(g, cuts, std::move(best));
    s.iterations = rounds;
    return s;
}

/*======================================================================================================================
 * Report
 *====================================================================================================================*/

std::string selection_report(const WorkloadGraph &g, const CutSet &cuts, const Selection &s)
{
    auto label = [&](std::uint32_t x) {
        auto &n = g.nodes()[x];
        auto &c = g.components()[n.component];
        char buf[64];
        std::snprintf(buf, sizeof buf, "p%u/b%u/n%d", c.partition, c.batch, n.plan_node);
        return std::string(buf);
    };
    std::string out;
    char buf[160];
    for (auto id : s.cuts) {
        auto &c = cuts.cuts[id];
        out += "cut " + std::to_string(id) + " nodes=";
        for (std::size_t i = 0; i < c.nodes.size(); ++i) out += (i ? "," : "") + label(c.nodes[i]);
        std::snprintf(buf, sizeof buf, " anchor=%s reduction=%.6g budget=%.6g\n", label(c.anchor).c_str(), c.bc_cost,
                      c.budget);
        out += buf;
    }
    for (auto k : s.domain) {
        auto &key = g.keys()[k];
        std::snprintf(buf, sizeof buf, "view partition=%u tables=%llu budget=%.6g\n", key.partition,
                      static_cast<unsigned long long>(key.tables), g.key_budget(k));
        out += buf;
    }
    std::snprintf(buf, sizeof buf, "total cuts=%zu views=%zu reduction=%.6g budget=%.6g graph_cost=%.6g\n",
                  s.cuts.size(), s.domain.size(), s.reduction, s.budget, g.total_cost());
    out += buf;
    return out;
}

} // namespace sharedb

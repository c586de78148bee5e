#include "concsp/poly_search.hpp"

#include <algorithm>
#include <bit>
#include <numeric>
#include <sstream>
#include <unordered_set>

namespace concsp {

namespace {

constexpr int kMaxMaskDomain = 31;

uint32_t full_mask(int d) { return (d >= 32) ? ~0u : ((1u << d) - 1); }

}  // namespace

IndicatorQuery wnu_query(int domain_size, int arity) {
    if (arity != 3 && arity != 4) throw error("wnu_query: arity must be 3 or 4");
    IndicatorQuery q;
    q.arity = arity;
    q.idempotent = true;
    for (int x = 0; x < domain_size; ++x) {
        for (int y = 0; y < domain_size; ++y) {
            if (x == y) continue;
            std::vector<Tuple> group;
            for (int pos = 0; pos < arity; ++pos) {
                Tuple t(arity, x);
                t[pos] = y;
                group.push_back(std::move(t));
            }
            q.forced_equal.push_back(std::move(group));
        }
    }
    return q;
}

std::string to_string(PairBehavior::Kind kind) {
    switch (kind) {
        case PairBehavior::Kind::semilattice: return "semilattice";
        case PairBehavior::Kind::majority: return "majority";
        case PairBehavior::Kind::minority: return "minority";
        case PairBehavior::Kind::projection: return "projection";
    }
    return "?";
}

struct PolymorphismSearcher::Impl {
    struct CompiledRelation {
        int arity = 0;
        std::vector<Tuple> rows;
        std::vector<char> member;             // indexed by encode_args
        std::vector<uint32_t> row_support;    // binary: [a] -> mask of b, (a,b) in rel
        std::vector<uint32_t> col_support;    // binary: [b] -> mask of a
        uint32_t diag_mask = 0;               // binary: mask of a with (a,a) in rel
        uint32_t element_mask = 0;            // unary: mask of members
    };

    struct Arc {
        int other;
        int rel;
        bool first;  // this endpoint is the first component of rel
    };
    struct Tern {
        std::array<int, 3> cls;
        int rel;
    };

    // Query-independent constraint graph over all d^arity argument tuples.
    struct ArityGraph {
        int num_tuples = 0;
        std::vector<uint32_t> base_cand;
        std::vector<std::array<int, 3>> binary_arcs;  // (u, v, rel)
        std::vector<std::array<int, 4>> ternary_cons; // (t1, t2, t3, rel)
    };

    const Structure* s = nullptr;
    int d = 0;
    std::vector<CompiledRelation> rels;
    std::array<std::unique_ptr<ArityGraph>, 5> graphs;

    // Per-query state.
    int arity = 0;
    int num_tuples = 0;
    int num_classes = 0;
    std::vector<int> class_of;
    std::vector<uint32_t> cand;
    std::vector<std::vector<Arc>> adj;
    std::vector<Tern> terns;
    std::vector<std::vector<int>> terns_of;
    std::vector<int> val;
    int unassigned = 0;
    std::vector<std::pair<int, uint32_t>> mask_trail;
    std::vector<int> assign_trail;

    explicit Impl(const Structure& structure) : s(&structure), d(structure.domain_size) {
        validate_structure(structure);
        if (d > kMaxMaskDomain) {
            throw error("polymorphism search supports domains up to " +
                        std::to_string(kMaxMaskDomain) + " elements");
        }
        rels.reserve(s->relations.size());
        for (const Relation& r : s->relations) {
            CompiledRelation c;
            c.arity = r.arity;
            c.rows = r.tuples;
            c.member.assign(table_size(d, r.arity), 0);
            for (const Tuple& t : r.tuples) c.member[encode_args(t, d)] = 1;
            if (r.arity == 1) {
                for (const Tuple& t : r.tuples) c.element_mask |= 1u << t[0];
            }
            if (r.arity == 2) {
                c.row_support.assign(d, 0);
                c.col_support.assign(d, 0);
                for (const Tuple& t : r.tuples) {
                    c.row_support[t[0]] |= 1u << t[1];
                    c.col_support[t[1]] |= 1u << t[0];
                    if (t[0] == t[1]) c.diag_mask |= 1u << t[0];
                }
            }
            rels.push_back(std::move(c));
        }
    }

    const ArityGraph& graph(int k) {
        if (!graphs[k]) {
            auto g = std::make_unique<ArityGraph>();
            g->num_tuples = static_cast<int>(table_size(d, k));
            const int n = g->num_tuples;

            std::vector<uint32_t> entry_mask(n, 0);
            std::vector<int> args(k);
            for (int t = 0; t < n; ++t) {
                decode_args(t, d, args);
                for (int a : args) entry_mask[t] |= 1u << a;
            }

            g->base_cand.assign(n, full_mask(d));
            for (std::size_t ri = 0; ri < rels.size(); ++ri) {
                const CompiledRelation& r = rels[ri];
                if (r.arity == 1) {
                    // a column tuple drawn from a unary relation has all its
                    // entries inside it
                    for (int t = 0; t < n; ++t) {
                        if ((entry_mask[t] & ~r.element_mask) == 0) {
                            g->base_cand[t] &= r.element_mask;
                        }
                    }
                } else if (r.arity == 2) {
                    std::vector<int> u(k), v(k);
                    for (int a = 0; a < n; ++a) {
                        decode_args(a, d, u);
                        for (int b = 0; b < n; ++b) {
                            decode_args(b, d, v);
                            bool ok = true;
                            for (int i = 0; i < k && ok; ++i) {
                                ok = (r.row_support[u[i]] >> v[i]) & 1u;
                            }
                            if (ok) g->binary_arcs.push_back({a, b, static_cast<int>(ri)});
                        }
                    }
                } else {
                    // enumerate row selections; dedupe the induced column triples
                    const std::size_t rows = r.rows.size();
                    if (rows == 0) continue;
                    std::unordered_set<std::uint64_t> seen;
                    std::vector<std::size_t> sel(k, 0);
                    std::vector<int> c1(k), c2(k), c3(k);
                    while (true) {
                        for (int i = 0; i < k; ++i) {
                            const Tuple& row = r.rows[sel[i]];
                            c1[i] = row[0];
                            c2[i] = row[1];
                            c3[i] = row[2];
                        }
                        int t1 = static_cast<int>(encode_args(c1, d));
                        int t2 = static_cast<int>(encode_args(c2, d));
                        int t3 = static_cast<int>(encode_args(c3, d));
                        std::uint64_t key =
                            (static_cast<std::uint64_t>(t1) * n + t2) * n + t3;
                        if (seen.insert(key).second) {
                            g->ternary_cons.push_back({t1, t2, t3, static_cast<int>(ri)});
                        }
                        int i = k - 1;
                        while (i >= 0 && sel[i] == rows - 1) { sel[i] = 0; --i; }
                        if (i < 0) break;
                        ++sel[i];
                    }
                }
            }
            graphs[k] = std::move(g);
        }
        return *graphs[k];
    }

    Tuple decode(int t) const {
        Tuple out(arity);
        decode_args(t, d, out);
        return out;
    }

    int tuple_index(const Tuple& t) const {
        if (static_cast<int>(t.size()) != arity) {
            throw error("query tuple has length " + std::to_string(t.size()) +
                        ", expected " + std::to_string(arity));
        }
        for (int v : t) {
            if (v < 0 || v >= d) throw error("query tuple entry outside domain");
        }
        return static_cast<int>(encode_args(t, d));
    }

    // Builds class structure, candidates and constraints for q.
    // Returns false when some candidate set is already empty.
    bool prepare(const IndicatorQuery& q) {
        if (q.arity < 1 || q.arity > 4) {
            throw error("query arity " + std::to_string(q.arity) +
                        " out of supported range 1..4");
        }
        arity = q.arity;
        const ArityGraph& g = graph(arity);
        num_tuples = g.num_tuples;

        // union-find over tuples
        std::vector<int> parent(num_tuples);
        std::iota(parent.begin(), parent.end(), 0);
        auto root = [&](int x) {
            while (parent[x] != x) x = parent[x] = parent[parent[x]];
            return x;
        };
        for (const auto& group : q.forced_equal) {
            if (group.empty()) continue;
            int first = root(tuple_index(group.front()));
            for (const Tuple& t : group) parent[root(tuple_index(t))] = first;
        }

        class_of.assign(num_tuples, -1);
        num_classes = 0;
        for (int t = 0; t < num_tuples; ++t) {
            int r = root(t);
            if (class_of[r] == -1) class_of[r] = num_classes++;
            class_of[t] = class_of[r];
        }

        cand.assign(num_classes, full_mask(d));
        for (int t = 0; t < num_tuples; ++t) cand[class_of[t]] &= g.base_cand[t];

        // prescriptions (explicit ones, then the idempotent diagonal)
        std::vector<int> pres(num_classes, -1);
        auto prescribe = [&](int cls, int v, const char* what) {
            if (v < 0 || v >= d) throw error(std::string(what) + ": value outside domain");
            if (pres[cls] != -1 && pres[cls] != v) {
                throw error("inconsistent query: " + std::string(what) +
                            " conflicts with an earlier prescription");
            }
            pres[cls] = v;
        };
        for (const auto& [t, v] : q.prescribed) {
            prescribe(class_of[tuple_index(t)], v, "prescription");
        }
        if (q.idempotent) {
            Tuple diag(arity);
            for (int x = 0; x < d; ++x) {
                std::fill(diag.begin(), diag.end(), x);
                prescribe(class_of[tuple_index(diag)], x, "idempotent diagonal");
            }
        }
        for (int c = 0; c < num_classes; ++c) {
            if (pres[c] != -1) cand[c] &= 1u << pres[c];
        }

        // class-level arcs, deduplicated
        adj.assign(num_classes, {});
        std::unordered_set<std::uint64_t> arc_seen;
        for (const auto& [u, v, rel] : g.binary_arcs) {
            int cu = class_of[u];
            int cv = class_of[v];
            if (cu == cv) {
                cand[cu] &= rels[rel].diag_mask;
                continue;
            }
            std::uint64_t key = (static_cast<std::uint64_t>(cu) * num_classes + cv) *
                                    rels.size() + rel;
            if (!arc_seen.insert(key).second) continue;
            adj[cu].push_back({cv, rel, true});
            adj[cv].push_back({cu, rel, false});
        }

        terns.clear();
        terns_of.assign(num_classes, {});
        std::unordered_set<std::uint64_t> tern_seen;
        for (const auto& [t1, t2, t3, rel] : g.ternary_cons) {
            Tern tn{{class_of[t1], class_of[t2], class_of[t3]}, rel};
            std::uint64_t key = ((static_cast<std::uint64_t>(tn.cls[0]) * num_classes +
                                  tn.cls[1]) * num_classes + tn.cls[2]) * rels.size() + rel;
            if (!tern_seen.insert(key).second) continue;
            int id = static_cast<int>(terns.size());
            terns.push_back(tn);
            for (int i = 0; i < 3; ++i) {
                int c = tn.cls[i];
                bool dup = false;
                for (int j = 0; j < i; ++j) dup = dup || tn.cls[j] == c;
                if (!dup) terns_of[c].push_back(id);
            }
        }

        val.assign(num_classes, -1);
        unassigned = num_classes;
        mask_trail.clear();
        assign_trail.clear();

        for (int c = 0; c < num_classes; ++c) {
            if (cand[c] == 0) return false;
        }
        return true;
    }

    struct Mark {
        std::size_t masks;
        std::size_t assigns;
    };
    Mark mark() const { return {mask_trail.size(), assign_trail.size()}; }
    void undo_to(Mark m) {
        while (assign_trail.size() > m.assigns) {
            val[assign_trail.back()] = -1;
            ++unassigned;
            assign_trail.pop_back();
        }
        while (mask_trail.size() > m.masks) {
            auto [c, old] = mask_trail.back();
            cand[c] = old;
            mask_trail.pop_back();
        }
    }

    bool shrink(int c, uint32_t keep) {
        uint32_t next = cand[c] & keep;
        if (next != cand[c]) {
            mask_trail.emplace_back(c, cand[c]);
            cand[c] = next;
        }
        return next != 0;
    }

    bool tern_member(const Tern& t, int a, int b, int c) const {
        const CompiledRelation& r = rels[t.rel];
        std::size_t idx = (static_cast<std::size_t>(a) * d + b) * d + c;
        return r.member[idx];
    }

    bool assign(int c, int v) {
        val[c] = v;
        --unassigned;
        assign_trail.push_back(c);
        if (!shrink(c, 1u << v)) return false;

        for (const Arc& a : adj[c]) {
            if (val[a.other] != -1) continue;  // pruned when a.other was assigned
            const CompiledRelation& r = rels[a.rel];
            uint32_t support = a.first ? r.row_support[v] : r.col_support[v];
            if (!shrink(a.other, support)) return false;
        }

        for (int ti : terns_of[c]) {
            const Tern& t = terns[ti];
            int open = -1;
            int open_count = 0;
            for (int cls : t.cls) {
                if (val[cls] == -1 && cls != open) {
                    open = cls;
                    ++open_count;
                }
            }
            if (open_count == 0) {
                if (!tern_member(t, val[t.cls[0]], val[t.cls[1]], val[t.cls[2]])) {
                    return false;
                }
            } else if (open_count == 1) {
                uint32_t allowed = 0;
                uint32_t m = cand[open];
                while (m) {
                    int w = std::countr_zero(m);
                    m &= m - 1;
                    int a0 = t.cls[0] == open ? w : val[t.cls[0]];
                    int a1 = t.cls[1] == open ? w : val[t.cls[1]];
                    int a2 = t.cls[2] == open ? w : val[t.cls[2]];
                    if (tern_member(t, a0, a1, a2)) allowed |= 1u << w;
                }
                if (!shrink(open, allowed)) return false;
            }
        }
        return true;
    }

    int pick_class() const {
        int best = -1;
        int best_count = 32 + 1;
        for (int c = 0; c < num_classes; ++c) {
            if (val[c] != -1) continue;
            int n = std::popcount(cand[c]);
            if (n < best_count) {
                best_count = n;
                best = c;
            }
        }
        return best;
    }

    // Completes the current partial assignment; leaves it in place on success.
    bool dfs() {
        if (unassigned == 0) return true;
        int c = pick_class();
        uint32_t m = cand[c];
        while (m) {
            int v = std::countr_zero(m);
            m &= m - 1;
            Mark mk = mark();
            if (assign(c, v) && dfs()) return true;
            undo_to(mk);
        }
        return false;
    }

    Operation extract() const {
        std::vector<int> table(num_tuples);
        for (int t = 0; t < num_tuples; ++t) table[t] = val[class_of[t]];
        return make_operation(arity, d, std::move(table));
    }
};

PolymorphismSearcher::PolymorphismSearcher(const Structure& s)
    : impl_(std::make_unique<Impl>(s)) {}
PolymorphismSearcher::~PolymorphismSearcher() = default;
PolymorphismSearcher::PolymorphismSearcher(PolymorphismSearcher&&) noexcept = default;
PolymorphismSearcher& PolymorphismSearcher::operator=(PolymorphismSearcher&&) noexcept =
    default;

const Structure& PolymorphismSearcher::structure() const { return *impl_->s; }

std::optional<Operation> PolymorphismSearcher::find(const IndicatorQuery& q) {
    if (!impl_->prepare(q)) return std::nullopt;
    if (!impl_->dfs()) return std::nullopt;
    Operation op = impl_->extract();
    // Witnesses are re-checked against the definitions before being handed out.
    if (!is_polymorphism(op, *impl_->s) || !satisfies_query(op, q)) {
        throw error("internal: search produced an invalid witness");
    }
    return op;
}

std::set<std::vector<int>> PolymorphismSearcher::enumerate_images(
    const IndicatorQuery& q, const std::vector<Tuple>& watched) {
    std::set<std::vector<int>> images;
    if (!impl_->prepare(q)) return images;

    std::vector<int> watched_cls;
    watched_cls.reserve(watched.size());
    for (const Tuple& t : watched) {
        watched_cls.push_back(impl_->class_of[impl_->tuple_index(t)]);
    }
    std::vector<int> order;  // distinct classes, first-occurrence order
    for (int c : watched_cls) {
        if (std::find(order.begin(), order.end(), c) == order.end()) order.push_back(c);
    }

    auto walk = [&](auto&& self, std::size_t i) -> void {
        if (i == order.size()) {
            std::vector<int> image(watched_cls.size());
            bool complete = true;
            for (std::size_t j = 0; j < watched_cls.size(); ++j) {
                image[j] = impl_->val[watched_cls[j]];
                complete = complete && image[j] != -1;
            }
            if (!complete || images.count(image)) return;  // nothing new down here
            Impl::Mark mk = impl_->mark();
            if (impl_->dfs()) images.insert(std::move(image));
            impl_->undo_to(mk);
            return;
        }
        int c = order[i];
        if (impl_->val[c] != -1) {  // merged with an earlier watched class
            self(self, i + 1);
            return;
        }
        uint32_t m = impl_->cand[c];
        while (m) {
            int v = std::countr_zero(m);
            m &= m - 1;
            Impl::Mark mk = impl_->mark();
            if (impl_->assign(c, v)) self(self, i + 1);
            impl_->undo_to(mk);
        }
    };
    walk(walk, 0);
    return images;
}

std::optional<Operation> find_polymorphism(const Structure& s, const IndicatorQuery& q) {
    PolymorphismSearcher searcher(s);
    return searcher.find(q);
}

std::set<std::vector<int>> enumerate_polymorphism_images(const Structure& s, int arity,
                                                         const std::vector<Tuple>& watched) {
    IndicatorQuery q;
    q.arity = arity;
    return enumerate_polymorphism_images(s, q, watched);
}

std::set<std::vector<int>> enumerate_polymorphism_images(const Structure& s,
                                                         const IndicatorQuery& q,
                                                         const std::vector<Tuple>& watched) {
    PolymorphismSearcher searcher(s);
    return searcher.enumerate_images(q, watched);
}

bool satisfies_query(const Operation& op, const IndicatorQuery& q) {
    if (op.arity != q.arity) return false;
    for (const auto& group : q.forced_equal) {
        if (group.empty()) continue;
        int v0 = apply(op, std::span<const int>(group.front()));
        for (const Tuple& t : group) {
            if (apply(op, std::span<const int>(t)) != v0) return false;
        }
    }
    for (const auto& [t, v] : q.prescribed) {
        if (apply(op, std::span<const int>(t)) != v) return false;
    }
    if (q.idempotent) {
        Tuple diag(op.arity);
        for (int x = 0; x < op.domain_size; ++x) {
            std::fill(diag.begin(), diag.end(), x);
            if (apply(op, std::span<const int>(diag)) != x) return false;
        }
    }
    return true;
}

bool check_wnu(const Operation& op) {
    if (op.arity != 3 && op.arity != 4) {
        throw error("check_wnu: arity must be 3 or 4");
    }
    const int d = op.domain_size;
    Tuple t(op.arity);
    for (int x = 0; x < d; ++x) {
        std::fill(t.begin(), t.end(), x);
        if (apply(op, std::span<const int>(t)) != x) return false;
        for (int y = 0; y < d; ++y) {
            if (x == y) continue;
            int ref = -1;
            for (int pos = 0; pos < op.arity; ++pos) {
                std::fill(t.begin(), t.end(), x);
                t[pos] = y;
                int v = apply(op, std::span<const int>(t));
                if (ref == -1) ref = v;
                if (v != ref) return false;
            }
        }
    }
    return true;
}

bool same_polymer(const Operation& u, const Operation& v) {
    if (u.arity != 3 || v.arity != 4) {
        throw error("same_polymer: expects a ternary and a quaternary operation");
    }
    if (u.domain_size != v.domain_size) throw error("same_polymer: domain mismatch");
    if (!check_wnu(u) || !check_wnu(v)) {
        throw error("same_polymer: inputs must be weak near-unanimity operations");
    }
    for (int x = 0; x < u.domain_size; ++x) {
        for (int y = 0; y < u.domain_size; ++y) {
            if (apply(u, {y, x, x}) != apply(v, {y, x, x, x})) return false;
        }
    }
    return true;
}

bool is_taylor(const Operation& op) {
    const int n = op.arity;
    const int d = op.domain_size;
    const int patterns = 1 << n;  // bit i set -> position i holds y
    Tuple args(n);
    auto evaluate = [&](int pat, int x, int y) {
        for (int i = 0; i < n; ++i) args[i] = (pat >> i) & 1 ? y : x;
        return apply(op, std::span<const int>(args));
    };
    for (int k = 0; k < n; ++k) {
        bool found = false;
        for (int p = 0; p < patterns && !found; ++p) {
            if ((p >> k) & 1) continue;  // x at coordinate k
            for (int q = 0; q < patterns && !found; ++q) {
                if (!((q >> k) & 1)) continue;  // y at coordinate k
                bool holds = true;
                for (int x = 0; x < d && holds; ++x) {
                    for (int y = 0; y < d && holds; ++y) {
                        holds = evaluate(p, x, y) == evaluate(q, x, y);
                    }
                }
                found = holds;
            }
        }
        if (!found) return false;
    }
    return true;
}

std::optional<PairBehavior> behavior_on_pair(const Operation& op, std::array<int, 2> pair) {
    if (pair[0] == pair[1]) throw error("behavior_on_pair: pair elements must differ");
    std::array<int, 2> sorted{std::min(pair[0], pair[1]), std::max(pair[0], pair[1])};
    Operation r = restrict_operation(op, std::span<const int>(sorted));

    auto equals = [&](const Operation& other) { return r.table == other.table; };

    for (int coord = 0; coord < op.arity; ++coord) {
        if (equals(projection(op.arity, coord, 2))) {
            PairBehavior b;
            b.kind = PairBehavior::Kind::projection;
            b.pair = sorted;
            b.projection_coord = coord;
            return b;
        }
    }
    if (op.arity == 2) {
        bool idem = apply(r, {0, 0}) == 0 && apply(r, {1, 1}) == 1;
        if (idem && apply(r, {0, 1}) == apply(r, {1, 0})) {
            PairBehavior b;
            b.kind = PairBehavior::Kind::semilattice;
            b.pair = sorted;
            b.absorber = sorted[apply(r, {0, 1})];
            return b;
        }
    }
    if (op.arity == 3) {
        Operation maj = make_operation(3, 2, [](std::span<const int> a) {
            return a[0] + a[1] + a[2] >= 2 ? 1 : 0;
        });
        Operation mino = make_operation(3, 2, [](std::span<const int> a) {
            return a[0] ^ a[1] ^ a[2];
        });
        if (equals(maj)) {
            PairBehavior b;
            b.kind = PairBehavior::Kind::majority;
            b.pair = sorted;
            return b;
        }
        if (equals(mino)) {
            PairBehavior b;
            b.kind = PairBehavior::Kind::minority;
            b.pair = sorted;
            return b;
        }
    }
    return std::nullopt;
}

std::string write_operation(const Operation& op, std::string_view name) {
    std::ostringstream out;
    out << "op " << name << ' ' << op.arity << ' ' << op.domain_size << '\n';
    std::vector<int> args(op.arity);
    for (std::size_t i = 0; i < op.table.size(); ++i) {
        decode_args(i, op.domain_size, args);
        for (int a : args) out << a << ' ';
        out << "-> " << op.table[i] << '\n';
    }
    return out.str();
}

std::pair<Operation, std::string> parse_operation(std::string_view text) {
    std::istringstream in{std::string(text)};
    std::string word, name;
    int arity = 0, domain = 0;
    if (!(in >> word) || word != "op" || !(in >> name >> arity >> domain)) {
        throw parse_error("expected 'op <name> <arity> <domain>'");
    }
    std::size_t n = table_size(domain, arity);
    std::vector<int> table(n, -1);
    std::vector<int> args(arity);
    for (std::size_t i = 0; i < n; ++i) {
        for (int j = 0; j < arity; ++j) {
            if (!(in >> args[j])) throw parse_error("operation table truncated");
        }
        int v;
        if (!(in >> word) || word != "->" || !(in >> v)) {
            throw parse_error("expected '-> <value>' in operation table");
        }
        table[encode_args(args, domain)] = v;
    }
    for (int v : table) {
        if (v == -1) throw parse_error("operation table leaves an input undefined");
    }
    try {
        return {make_operation(arity, domain, std::move(table)), name};
    } catch (const error& e) {
        throw parse_error(e.what());
    }
}

}  // namespace concsp

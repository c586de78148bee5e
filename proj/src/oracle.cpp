#include "concsp/oracle.hpp"

#include <algorithm>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace concsp::oracle {

namespace {

constexpr std::uint64_t kScanLimit = 1ull << 26;

std::uint64_t checked_count(int domain_size, int arity) {
    std::size_t entries = table_size(domain_size, arity);
    std::uint64_t count = 1;
    for (std::size_t i = 0; i < entries; ++i) {
        count *= static_cast<std::uint64_t>(domain_size);
        if (count > kScanLimit) {
            throw error("brute-force scan infeasible for domain " +
                        std::to_string(domain_size) + ", arity " +
                        std::to_string(arity));
        }
    }
    return count;
}

void table_from_index(std::uint64_t index, int domain_size, std::vector<int>& table) {
    for (std::size_t i = table.size(); i-- > 0;) {
        table[i] = static_cast<int>(index % domain_size);
        index /= domain_size;
    }
}

bool matches(const Operation& op, const Structure& s, const IndicatorQuery& q) {
    return satisfies_query(op, q) && is_polymorphism(op, s);
}

}  // namespace

std::uint64_t operation_count(int domain_size, int arity) {
    return checked_count(domain_size, arity);
}

void for_each_operation(int domain_size, int arity,
                        const std::function<bool(const Operation&)>& visit) {
    std::uint64_t count = checked_count(domain_size, arity);
    Operation op{arity, domain_size,
                 std::vector<int>(table_size(domain_size, arity), 0)};
    for (std::uint64_t i = 0; i < count; ++i) {
        table_from_index(i, domain_size, op.table);
        if (!visit(op)) return;
    }
}

std::optional<Operation> find_polymorphism(const Structure& s, const IndicatorQuery& q) {
    std::optional<Operation> found;
    for_each_operation(s.domain_size, q.arity, [&](const Operation& op) {
        if (matches(op, s, q)) {
            found = op;
            return false;
        }
        return true;
    });
    return found;
}

std::optional<Operation> find_polymorphism_parallel(const Structure& s,
                                                    const IndicatorQuery& q) {
    const std::uint64_t count = checked_count(s.domain_size, q.arity);
    const std::size_t entries = table_size(s.domain_size, q.arity);
    std::uint64_t best = count;  // lowest matching table index

#pragma omp parallel
    {
        Operation op{q.arity, s.domain_size, std::vector<int>(entries, 0)};
#pragma omp for schedule(static)
        for (std::int64_t i = 0; i < static_cast<std::int64_t>(count); ++i) {
            std::uint64_t current;
#pragma omp atomic read
            current = best;
            if (static_cast<std::uint64_t>(i) > current) continue;
            table_from_index(static_cast<std::uint64_t>(i), s.domain_size, op.table);
            if (matches(op, s, q)) {
#pragma omp critical
                {
                    if (static_cast<std::uint64_t>(i) < best) {
                        best = static_cast<std::uint64_t>(i);
                    }
                }
            }
        }
    }

    if (best == count) return std::nullopt;
    std::vector<int> table(entries);
    table_from_index(best, s.domain_size, table);
    return make_operation(q.arity, s.domain_size, std::move(table));
}

std::vector<Operation> all_polymorphisms(const Structure& s, int arity) {
    std::vector<Operation> out;
    for_each_operation(s.domain_size, arity, [&](const Operation& op) {
        if (is_polymorphism(op, s)) out.push_back(op);
        return true;
    });
    return out;
}

std::set<std::vector<int>> polymorphism_images(const Structure& s, int arity,
                                               const std::vector<Tuple>& watched) {
    std::set<std::vector<int>> images;
    for_each_operation(s.domain_size, arity, [&](const Operation& op) {
        if (is_polymorphism(op, s)) {
            std::vector<int> image;
            image.reserve(watched.size());
            for (const Tuple& t : watched) {
                image.push_back(apply(op, std::span<const int>(t)));
            }
            images.insert(std::move(image));
        }
        return true;
    });
    return images;
}

bool extendable(const Structure& s, int arity,
                const std::vector<std::pair<Tuple, int>>& pins) {
    validate_structure(s);
    const int d = s.domain_size;
    const int n = static_cast<int>(table_size(d, arity));

    std::vector<int> pinned(n, -1);
    for (const auto& [t, v] : pins) {
        if (static_cast<int>(t.size()) != arity) throw error("extendable: pin arity mismatch");
        if (v < 0 || v >= d) throw error("extendable: pin value outside domain");
        std::size_t idx = encode_args(t, d);
        if (pinned[idx] != -1 && pinned[idx] != v) return false;
        pinned[idx] = v;
    }

    // One check per row selection of each relation: the column tuples it
    // induces and which relation row set the image must land in. Bucketed by
    // the largest table index involved so each is tested exactly once,
    // as soon as its last entry gets filled.
    struct Check {
        std::vector<int> columns;  // table indices, one per relation coordinate
        int rel;
    };
    std::vector<std::vector<Check>> by_last(n);
    std::vector<int> args(arity);
    for (std::size_t ri = 0; ri < s.relations.size(); ++ri) {
        const Relation& r = s.relations[ri];
        const std::size_t rows = r.tuples.size();
        if (rows == 0) continue;
        std::vector<std::size_t> sel(arity, 0);
        while (true) {
            Check c;
            c.rel = static_cast<int>(ri);
            c.columns.resize(r.arity);
            int last = 0;
            for (int j = 0; j < r.arity; ++j) {
                for (int i = 0; i < arity; ++i) args[i] = r.tuples[sel[i]][j];
                int idx = static_cast<int>(encode_args(args, d));
                c.columns[j] = idx;
                last = std::max(last, idx);
            }
            by_last[last].push_back(std::move(c));
            int i = arity - 1;
            while (i >= 0 && sel[i] == rows - 1) { sel[i] = 0; --i; }
            if (i < 0) break;
            ++sel[i];
        }
    }

    std::vector<int> table(n, -1);
    Tuple image;
    auto fill = [&](auto&& self, int t) -> bool {
        if (t == n) return true;
        int lo = pinned[t] == -1 ? 0 : pinned[t];
        int hi = pinned[t] == -1 ? d - 1 : pinned[t];
        for (int v = lo; v <= hi; ++v) {
            table[t] = v;
            bool ok = true;
            for (const Check& c : by_last[t]) {
                image.clear();
                for (int col : c.columns) image.push_back(table[col]);
                if (!relation_contains(s.relations[c.rel], image)) {
                    ok = false;
                    break;
                }
            }
            if (ok && self(self, t + 1)) return true;
        }
        table[t] = -1;
        return false;
    };
    return fill(fill, 0);
}

}  // namespace concsp::oracle

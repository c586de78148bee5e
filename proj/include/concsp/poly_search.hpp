#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "concsp/core.hpp"

namespace concsp {

// A constrained search for a polymorphism: tuples in one forced_equal group
// must receive equal values, prescribed tuples are pinned, and the
// idempotent flag pins every diagonal (x,...,x) to x.
struct IndicatorQuery {
    int arity = 1;
    bool idempotent = false;
    std::vector<std::vector<Tuple>> forced_equal;
    std::vector<std::pair<Tuple, int>> prescribed;
};

// The ternary/quaternary weak near-unanimity constraint as a query: diagonal
// pinned, all one-off-diagonal patterns for each ordered pair forced equal.
IndicatorQuery wnu_query(int domain_size, int arity);

// How an operation behaves once restricted to a two-element subset.
struct PairBehavior {
    enum class Kind { semilattice, majority, minority, projection };
    Kind kind = Kind::projection;
    std::array<int, 2> pair{0, 1};
    int absorber = -1;          // semilattice only: the absorbing element
    int projection_coord = -1;  // projection only, 0-based

    bool operator==(const PairBehavior&) const = default;
};

std::string to_string(PairBehavior::Kind kind);

// Exact backtracking search over the indicator construction: one variable
// per forced_equal class of argument tuples, candidate values narrowed by
// the unary relations, propagation against each relation's rows. Reusable
// across queries on the same structure; the per-arity constraint graph is
// cached. Not safe for concurrent use; build one searcher per thread.
class PolymorphismSearcher {
public:
    explicit PolymorphismSearcher(const Structure& s);
    ~PolymorphismSearcher();
    PolymorphismSearcher(PolymorphismSearcher&&) noexcept;
    PolymorphismSearcher& operator=(PolymorphismSearcher&&) noexcept;

    const Structure& structure() const;

    // Complete: returns a witness iff one exists. Throws on an
    // inconsistent query (conflicting prescriptions).
    std::optional<Operation> find(const IndicatorQuery& q);

    // The exact set of value sequences the watched tuples can take across
    // all polymorphisms satisfying q. Only the watched projection is kept.
    std::set<std::vector<int>> enumerate_images(const IndicatorQuery& q,
                                                const std::vector<Tuple>& watched);

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

std::optional<Operation> find_polymorphism(const Structure& s, const IndicatorQuery& q);

std::set<std::vector<int>> enumerate_polymorphism_images(const Structure& s, int arity,
                                                         const std::vector<Tuple>& watched);
std::set<std::vector<int>> enumerate_polymorphism_images(const Structure& s,
                                                         const IndicatorQuery& q,
                                                         const std::vector<Tuple>& watched);

// Definition-level check, shared by the searcher's post-hoc verification and
// the brute-force oracle: group equalities, prescriptions, idempotence.
bool satisfies_query(const Operation& op, const IndicatorQuery& q);

// Idempotent and all one-off-diagonal evaluations agree (arity 3 or 4).
bool check_wnu(const Operation& op);

// u(y,x,x) = v(y,x,x,x) for all x, y. Both inputs must pass check_wnu.
bool same_polymer(const Operation& u, const Operation& v);

// For every coordinate there is a two-variable identity with x on the left
// and y on the right at that coordinate that op satisfies. Identifying the
// other variables of a general such identity down to {x,y} keeps it valid,
// so enumerating two-variable patterns decides the schema.
bool is_taylor(const Operation& op);

// Classifies op restricted to {pair[0], pair[1]}; nullopt when the
// restriction is none of semilattice / majority / minority / projection.
std::optional<PairBehavior> behavior_on_pair(const Operation& op, std::array<int, 2> pair);

// Witness table text format:
//   op <name> <arity> <domain>
//   <t1> ... <tk> -> <v>     (lexicographic input order)
std::string write_operation(const Operation& op, std::string_view name);
// Returns the operation plus its name.
std::pair<Operation, std::string> parse_operation(std::string_view text);

}  // namespace concsp

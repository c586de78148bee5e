#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <set>
#include <vector>

#include "concsp/core.hpp"
#include "concsp/poly_search.hpp"

namespace concsp::oracle {

// Brute-force reference implementations. These deliberately share no search
// machinery with PolymorphismSearcher: tables are enumerated raw, in
// lexicographic table order, so they can serve as an independent oracle for
// it. Feasible shapes only (domain 2 up to arity 4, domain 3 up to arity 2
// for full scans).

// d^(d^arity); throws when the scan would be infeasible (> 2^26 tables).
std::uint64_t operation_count(int domain_size, int arity);

// Visits all tables in lexicographic order; stop early by returning false.
void for_each_operation(int domain_size, int arity,
                        const std::function<bool(const Operation&)>& visit);

// First (lowest table) polymorphism of s satisfying q, by full scan.
std::optional<Operation> find_polymorphism(const Structure& s, const IndicatorQuery& q);

// Same answer as find_polymorphism, computed with an OpenMP scan.
std::optional<Operation> find_polymorphism_parallel(const Structure& s,
                                                    const IndicatorQuery& q);

// All polymorphisms of s with the given arity, by full scan.
std::vector<Operation> all_polymorphisms(const Structure& s, int arity);

// Watched-projection image set by full scan.
std::set<std::vector<int>> polymorphism_images(const Structure& s, int arity,
                                               const std::vector<Tuple>& watched);

// Whether some polymorphism of s agrees with the pinned table entries.
// Backtracks over raw table entries in lexicographic order, checking every
// relation's row selections as soon as their entries are filled. Usable
// where full scans are not (ternary tables on domain 3).
bool extendable(const Structure& s, int arity,
                const std::vector<std::pair<Tuple, int>>& pins);

}  // namespace concsp::oracle

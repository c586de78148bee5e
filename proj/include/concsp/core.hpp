#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace concsp {

class error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Malformed input text (structure files, instance files, edge lists).
class parse_error : public error {
public:
    using error::error;
};

using Tuple = std::vector<int>;

// A named finite relation: an explicit set of arity-length tuples over a
// 0-based integer domain. Tuples are kept lexicographically sorted and
// deduplicated so serialized output is bit-stable.
struct Relation {
    std::string name;
    int arity = 1;
    std::vector<Tuple> tuples;

    bool operator==(const Relation&) const = default;
};

// Canonicalizes (sorts, dedupes) and checks shape. Arities 1..3 are
// supported; entries must be non-negative (bounds against a domain are
// checked by make_structure / validate_structure).
Relation make_relation(std::string name, int arity, std::vector<Tuple> tuples);

bool relation_contains(const Relation& rel, std::span<const int> tuple);

// A finite relational structure. conservativity_level = k declares that
// every unary relation of size <= min(k, domain_size) is present.
struct Structure {
    int domain_size = 0;
    std::vector<Relation> relations;
    int conservativity_level = 0;

    bool operator==(const Structure&) const = default;
};

Structure make_structure(int domain_size, std::vector<Relation> relations,
                         int conservativity_level = 0);

// Throws error if any invariant fails (tuple bounds, canonical order,
// declared conservativity not backed by actual unary relations).
void validate_structure(const Structure& s);

const Relation* find_relation(const Structure& s, std::string_view name);

// A finite operation given by a complete value table. Arguments are encoded
// in mixed radix with the first argument most significant, so table order
// matches lexicographic order over argument tuples.
struct Operation {
    int arity = 1;
    int domain_size = 0;
    std::vector<int> table;

    bool operator==(const Operation&) const = default;
};

std::size_t table_size(int domain_size, int arity);
std::size_t encode_args(std::span<const int> args, int domain_size);
void decode_args(std::size_t index, int domain_size, std::span<int> out);

int apply(const Operation& op, std::span<const int> args);
int apply(const Operation& op, std::initializer_list<int> args);

Operation make_operation(int arity, int domain_size, std::vector<int> table);
Operation make_operation(int arity, int domain_size,
                         const std::function<int(std::span<const int>)>& fn);
// The i-th projection (0-based coordinate).
Operation projection(int arity, int coord, int domain_size);

// True iff applying op componentwise to every selection of op.arity rows of
// rel lands inside rel. Rows may repeat. Throws on a domain mismatch or an
// ill-formed relation.
bool preserves(const Operation& op, const Relation& rel);

// op preserves every relation of s.
bool is_polymorphism(const Operation& op, const Structure& s);

// Extends s with every missing unary relation of size <= min(k, domain_size)
// and sets conservativity_level to k. Existing relations are untouched;
// added relations are named u<e1>_<e2>_... and appended in size-then-lex
// order. k must be in 1..3.
Structure conservative_closure(const Structure& s, int k);

// The operation induced on a sub-domain, reindexed along `subset` (distinct
// elements, given order). Throws if some value escapes the subset.
Operation restrict_operation(const Operation& op, std::span<const int> subset);

// Structure text format (bit-exact writer):
//   domain <n>
//   conservative <k>        (only when level > 0)
//   rel <name> <arity>
//   <t1> ... <tk>           (one tuple per line, lexicographic)
//   end
// '#' starts a comment on read; blank lines are ignored.
std::string write_structure(const Structure& s);
Structure parse_structure(std::string_view text);
Structure read_structure_file(const std::string& path);

// FNV-1a over the canonical serialization.
std::uint64_t structure_hash(const Structure& s);

}  // namespace concsp

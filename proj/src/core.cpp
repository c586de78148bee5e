#include "concsp/core.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

namespace concsp {

namespace {

void check_arity(int arity, int lo, int hi, const char* what) {
    if (arity < lo || arity > hi) {
        throw error(std::string(what) + " arity " + std::to_string(arity) +
                    " out of supported range " + std::to_string(lo) + ".." +
                    std::to_string(hi));
    }
}

}  // namespace

Relation make_relation(std::string name, int arity, std::vector<Tuple> tuples) {
    check_arity(arity, 1, 3, "relation");
    for (const Tuple& t : tuples) {
        if (static_cast<int>(t.size()) != arity) {
            throw error("relation " + name + ": tuple length " +
                        std::to_string(t.size()) + " does not match arity " +
                        std::to_string(arity));
        }
        for (int v : t) {
            if (v < 0) throw error("relation " + name + ": negative entry");
        }
    }
    std::sort(tuples.begin(), tuples.end());
    tuples.erase(std::unique(tuples.begin(), tuples.end()), tuples.end());
    return Relation{std::move(name), arity, std::move(tuples)};
}

bool relation_contains(const Relation& rel, std::span<const int> tuple) {
    if (static_cast<int>(tuple.size()) != rel.arity) return false;
    Tuple key(tuple.begin(), tuple.end());
    return std::binary_search(rel.tuples.begin(), rel.tuples.end(), key);
}

Structure make_structure(int domain_size, std::vector<Relation> relations,
                         int conservativity_level) {
    Structure s{domain_size, std::move(relations), conservativity_level};
    validate_structure(s);
    return s;
}

void validate_structure(const Structure& s) {
    if (s.domain_size <= 0) throw error("structure: domain size must be positive");
    if (s.conservativity_level < 0 || s.conservativity_level > 3) {
        throw error("structure: conservativity level must be in 0..3");
    }
    for (const Relation& r : s.relations) {
        check_arity(r.arity, 1, 3, "relation");
        for (const Tuple& t : r.tuples) {
            if (static_cast<int>(t.size()) != r.arity) {
                throw error("relation " + r.name + ": ragged tuple");
            }
            for (int v : t) {
                if (v < 0 || v >= s.domain_size) {
                    throw error("relation " + r.name + ": entry " +
                                std::to_string(v) + " outside domain of size " +
                                std::to_string(s.domain_size));
                }
            }
        }
        if (!std::is_sorted(r.tuples.begin(), r.tuples.end()) ||
            std::adjacent_find(r.tuples.begin(), r.tuples.end()) != r.tuples.end()) {
            throw error("relation " + r.name + ": tuples not canonical (sorted, unique)");
        }
    }
    // Declared conservativity must be backed by actual unary relations.
    int need = std::min(s.conservativity_level, s.domain_size);
    for (int size = 1; size <= need; ++size) {
        std::vector<int> subset(size);
        std::iota(subset.begin(), subset.end(), 0);
        while (true) {
            bool found = false;
            for (const Relation& r : s.relations) {
                if (r.arity != 1 || static_cast<int>(r.tuples.size()) != size) continue;
                bool same = true;
                for (int i = 0; i < size; ++i) {
                    if (r.tuples[i][0] != subset[i]) { same = false; break; }
                }
                if (same) { found = true; break; }
            }
            if (!found) {
                throw error("structure declares conservativity level " +
                            std::to_string(s.conservativity_level) +
                            " but misses a unary relation of size " +
                            std::to_string(size));
            }
            // next size-subset of the domain in lexicographic order
            int i = size - 1;
            while (i >= 0 && subset[i] == s.domain_size - size + i) --i;
            if (i < 0) break;
            ++subset[i];
            for (int j = i + 1; j < size; ++j) subset[j] = subset[j - 1] + 1;
        }
    }
}

const Relation* find_relation(const Structure& s, std::string_view name) {
    for (const Relation& r : s.relations) {
        if (r.name == name) return &r;
    }
    return nullptr;
}

std::size_t table_size(int domain_size, int arity) {
    std::size_t n = 1;
    for (int i = 0; i < arity; ++i) n *= static_cast<std::size_t>(domain_size);
    return n;
}

std::size_t encode_args(std::span<const int> args, int domain_size) {
    std::size_t idx = 0;
    for (int a : args) idx = idx * static_cast<std::size_t>(domain_size) + static_cast<std::size_t>(a);
    return idx;
}

void decode_args(std::size_t index, int domain_size, std::span<int> out) {
    for (std::size_t i = out.size(); i-- > 0;) {
        out[i] = static_cast<int>(index % static_cast<std::size_t>(domain_size));
        index /= static_cast<std::size_t>(domain_size);
    }
}

int apply(const Operation& op, std::span<const int> args) {
    return op.table[encode_args(args, op.domain_size)];
}

int apply(const Operation& op, std::initializer_list<int> args) {
    return apply(op, std::span<const int>(args.begin(), args.size()));
}

Operation make_operation(int arity, int domain_size, std::vector<int> table) {
    check_arity(arity, 1, 4, "operation");
    if (domain_size <= 0) throw error("operation: domain size must be positive");
    if (table.size() != table_size(domain_size, arity)) {
        throw error("operation: table has " + std::to_string(table.size()) +
                    " entries, expected " +
                    std::to_string(table_size(domain_size, arity)));
    }
    for (int v : table) {
        if (v < 0 || v >= domain_size) {
            throw error("operation: value " + std::to_string(v) +
                        " outside domain of size " + std::to_string(domain_size));
        }
    }
    return Operation{arity, domain_size, std::move(table)};
}

Operation make_operation(int arity, int domain_size,
                         const std::function<int(std::span<const int>)>& fn) {
    check_arity(arity, 1, 4, "operation");
    std::size_t n = table_size(domain_size, arity);
    std::vector<int> table(n);
    std::vector<int> args(arity);
    for (std::size_t i = 0; i < n; ++i) {
        decode_args(i, domain_size, args);
        table[i] = fn(args);
    }
    return make_operation(arity, domain_size, std::move(table));
}

Operation projection(int arity, int coord, int domain_size) {
    if (coord < 0 || coord >= arity) throw error("projection: bad coordinate");
    return make_operation(arity, domain_size,
                          [coord](std::span<const int> a) { return a[coord]; });
}

bool preserves(const Operation& op, const Relation& rel) {
    if (rel.arity < 1) throw error("preserves: relation arity must be positive");
    for (const Tuple& t : rel.tuples) {
        for (int v : t) {
            if (v >= op.domain_size) {
                throw error("preserves: relation " + rel.name +
                            " does not fit the operation's domain");
            }
        }
    }
    const int k = op.arity;
    const int m = rel.arity;
    const std::size_t rows = rel.tuples.size();
    if (rows == 0) return true;

    std::vector<std::size_t> sel(k, 0);  // odometer over row selections
    std::vector<int> col(k);
    Tuple image(m);
    while (true) {
        for (int j = 0; j < m; ++j) {
            for (int i = 0; i < k; ++i) col[i] = rel.tuples[sel[i]][j];
            image[j] = apply(op, col);
        }
        if (!std::binary_search(rel.tuples.begin(), rel.tuples.end(), image)) {
            return false;
        }
        int i = k - 1;
        while (i >= 0 && sel[i] == rows - 1) { sel[i] = 0; --i; }
        if (i < 0) break;
        ++sel[i];
    }
    return true;
}

bool is_polymorphism(const Operation& op, const Structure& s) {
    if (op.domain_size != s.domain_size) {
        throw error("is_polymorphism: operation is over domain of size " +
                    std::to_string(op.domain_size) + ", structure over " +
                    std::to_string(s.domain_size));
    }
    for (const Relation& r : s.relations) {
        if (!preserves(op, r)) return false;
    }
    return true;
}

Structure conservative_closure(const Structure& s, int k) {
    if (k < 1 || k > 3) throw error("conservative_closure: level must be in 1..3");
    validate_structure(s);
    Structure out = s;
    int need = std::min(k, s.domain_size);
    for (int size = 1; size <= need; ++size) {
        std::vector<int> subset(size);
        std::iota(subset.begin(), subset.end(), 0);
        while (true) {
            bool present = false;
            for (const Relation& r : out.relations) {
                if (r.arity != 1 || static_cast<int>(r.tuples.size()) != size) continue;
                bool same = true;
                for (int i = 0; i < size; ++i) {
                    if (r.tuples[i][0] != subset[i]) { same = false; break; }
                }
                if (same) { present = true; break; }
            }
            if (!present) {
                std::string name = "u";
                std::vector<Tuple> tuples;
                for (int i = 0; i < size; ++i) {
                    if (i > 0) name += '_';
                    name += std::to_string(subset[i]);
                    tuples.push_back({subset[i]});
                }
                out.relations.push_back(make_relation(name, 1, std::move(tuples)));
            }
            int i = size - 1;
            while (i >= 0 && subset[i] == s.domain_size - size + i) --i;
            if (i < 0) break;
            ++subset[i];
            for (int j = i + 1; j < size; ++j) subset[j] = subset[j - 1] + 1;
        }
    }
    out.conservativity_level = k;
    validate_structure(out);
    return out;
}

Operation restrict_operation(const Operation& op, std::span<const int> subset) {
    const int n = static_cast<int>(subset.size());
    if (n <= 0) throw error("restrict_operation: empty subset");
    std::vector<int> back(op.domain_size, -1);
    for (int i = 0; i < n; ++i) {
        int e = subset[i];
        if (e < 0 || e >= op.domain_size) throw error("restrict_operation: element outside domain");
        if (back[e] != -1) throw error("restrict_operation: repeated element");
        back[e] = i;
    }
    std::size_t size = table_size(n, op.arity);
    std::vector<int> table(size);
    std::vector<int> sub_args(op.arity);
    std::vector<int> args(op.arity);
    for (std::size_t idx = 0; idx < size; ++idx) {
        decode_args(idx, n, sub_args);
        for (int i = 0; i < op.arity; ++i) args[i] = subset[sub_args[i]];
        int v = apply(op, args);
        if (v >= op.domain_size || back[v] == -1) {
            throw error("restrict_operation: image escapes the subset");
        }
        table[idx] = back[v];
    }
    return make_operation(op.arity, n, std::move(table));
}

std::string write_structure(const Structure& s) {
    std::ostringstream out;
    out << "domain " << s.domain_size << '\n';
    if (s.conservativity_level > 0) {
        out << "conservative " << s.conservativity_level << '\n';
    }
    for (const Relation& r : s.relations) {
        out << "rel " << r.name << ' ' << r.arity << '\n';
        for (const Tuple& t : r.tuples) {
            for (std::size_t i = 0; i < t.size(); ++i) {
                if (i > 0) out << ' ';
                out << t[i];
            }
            out << '\n';
        }
        out << "end\n";
    }
    return out.str();
}

namespace {

// Splits text into significant lines (comments stripped), keeping 1-based
// line numbers for error messages.
std::vector<std::pair<int, std::string>> significant_lines(std::string_view text) {
    std::vector<std::pair<int, std::string>> lines;
    int lineno = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        std::size_t eol = text.find('\n', pos);
        std::string line(text.substr(pos, eol == std::string_view::npos
                                              ? std::string_view::npos
                                              : eol - pos));
        ++lineno;
        if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
        std::istringstream probe(line);
        std::string w;
        if (probe >> w) lines.emplace_back(lineno, line);
        if (eol == std::string_view::npos) break;
        pos = eol + 1;
    }
    return lines;
}

[[noreturn]] void bad_line(int lineno, const std::string& msg) {
    throw parse_error("line " + std::to_string(lineno) + ": " + msg);
}

}  // namespace

Structure parse_structure(std::string_view text) {
    auto lines = significant_lines(text);
    std::size_t i = 0;
    auto next = [&]() -> std::pair<int, std::istringstream> {
        if (i >= lines.size()) throw parse_error("unexpected end of structure text");
        auto& [no, line] = lines[i++];
        return {no, std::istringstream(line)};
    };

    auto [no0, ls0] = next();
    std::string word;
    int domain = 0;
    if (!(ls0 >> word) || word != "domain" || !(ls0 >> domain)) {
        bad_line(no0, "expected 'domain <n>'");
    }

    int level = 0;
    std::vector<Relation> relations;
    while (i < lines.size()) {
        auto [no, ls] = next();
        ls >> word;
        if (word == "conservative") {
            if (!(ls >> level)) bad_line(no, "expected 'conservative <k>'");
        } else if (word == "rel") {
            std::string name;
            int arity = 0;
            if (!(ls >> name >> arity)) bad_line(no, "expected 'rel <name> <arity>'");
            std::vector<Tuple> tuples;
            bool closed = false;
            while (i < lines.size()) {
                auto [tno, tls] = next();
                std::string first;
                tls >> first;
                if (first == "end") { closed = true; break; }
                Tuple t;
                try {
                    t.push_back(std::stoi(first));
                } catch (const std::exception&) {
                    bad_line(tno, "expected tuple entry or 'end'");
                }
                int v;
                while (tls >> v) t.push_back(v);
                if (static_cast<int>(t.size()) != arity) {
                    bad_line(tno, "tuple length does not match arity " + std::to_string(arity));
                }
                tuples.push_back(std::move(t));
            }
            if (!closed) throw parse_error("relation " + name + " not terminated by 'end'");
            relations.push_back(make_relation(name, arity, std::move(tuples)));
        } else {
            bad_line(no, "unexpected directive '" + word + "'");
        }
    }
    try {
        return make_structure(domain, std::move(relations), level);
    } catch (const error& e) {
        throw parse_error(e.what());
    }
}

Structure read_structure_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw parse_error("cannot open structure file " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_structure(buf.str());
}

std::uint64_t structure_hash(const Structure& s) {
    std::string text = write_structure(s);
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

}  // namespace concsp

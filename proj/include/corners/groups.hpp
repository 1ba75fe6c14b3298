#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace corners {

enum class GroupKind { cyclic, vector_space, product };

// Descriptor grammar (also the PlaneSet header syntax):
//   cyclic N  |  vector p n  |  product <component> <component> ...
// where components are cyclic/vector terms.
struct GroupDescriptor {
    GroupKind kind = GroupKind::cyclic;
    std::uint64_t n = 0;                      // cyclic order
    std::uint64_t p = 0, dim = 0;             // vector(p, dim)
    std::vector<GroupDescriptor> components;  // product

    static GroupDescriptor cyclic_group(std::uint64_t n);
    static GroupDescriptor vector_group(std::uint64_t p, std::uint64_t dim);
    static GroupDescriptor parse(const std::string& text);
    std::string str() const;
};

// Finite abelian group with canonical element indices in [0, N). Internally
// everything is flattened to a list of cyclic factors (F_p^n = (Z/p)^n), and
// the canonical index is the big-endian mixed-radix encoding of the digits.
// For all-mod-2 groups the index of a sum is the XOR of the indices.
class FiniteAbelianGroup {
public:
    explicit FiniteAbelianGroup(GroupDescriptor d);

    std::uint64_t order() const { return order_; }
    const GroupDescriptor& descriptor() const { return desc_; }

    std::uint64_t add(std::uint64_t a, std::uint64_t b) const;
    std::uint64_t neg(std::uint64_t a) const;

    std::vector<std::uint64_t> digits(std::uint64_t a) const;  // mixed-radix decode
    std::uint64_t from_digits(std::span<const std::uint64_t> ds) const;

    bool is_cyclic() const { return radices_.size() == 1; }
    bool is_xor() const { return all_mod2_; }

private:
    void check(std::uint64_t a) const;

    GroupDescriptor desc_;
    std::uint64_t order_ = 1;
    std::vector<std::uint64_t> radices_;  // flattened cyclic factors, most significant first
    bool all_mod2_ = false;
};

// Subset A of the plane P = {x + y + z = 0}, stored as an N x N bit matrix
// over (x, y); membership of (x, y) means (x, y, -x-y) is in A.
class PlaneSet {
public:
    explicit PlaneSet(FiniteAbelianGroup g);

    const FiniteAbelianGroup& group() const { return group_; }
    std::uint64_t order() const { return n_; }
    std::size_t words_per_row() const { return words_; }

    bool get(std::uint64_t x, std::uint64_t y) const {
        return (bits_[x * words_ + y / 64] >> (y % 64)) & 1u;
    }
    void set(std::uint64_t x, std::uint64_t y, bool v) {
        std::uint64_t& w = bits_[x * words_ + y / 64];
        const std::uint64_t m = std::uint64_t{1} << (y % 64);
        w = v ? (w | m) : (w & ~m);
    }

    std::span<const std::uint64_t> row(std::uint64_t x) const {
        return {bits_.data() + x * words_, words_};
    }

    std::uint64_t size() const;  // |A|

private:
    FiniteAbelianGroup group_;
    std::uint64_t n_;
    std::size_t words_;
    std::vector<std::uint64_t> bits_;
};

// counts[d] = |S_d| for every d in G, indexed canonically; counts[0] = |A|
struct CornerCensus {
    std::vector<std::int64_t> counts;
    double alpha = 0.0;  // |A| / N^2
};

inline constexpr std::uint64_t kCensusOrderCap = 4096;
inline constexpr std::uint64_t kOracleOrderCap = 64;

// Word-parallel census over all d: counts[d] = sum_xy A(x,y) A(x+d,y) A(x,y+d).
// Rows are AND-ed with the (x+d)-row and with the row translated by d in y;
// the translation is a rotation for cyclic groups, an XOR butterfly for
// all-mod-2 groups, and a per-bit scatter otherwise. Parallel over d.
CornerCensus census(const PlaneSet& A);

// Same counts for a caller-chosen list of differences.
std::vector<std::int64_t> census_for(const PlaneSet& A, std::span<const std::uint64_t> ds);

// Serial reference: the naive triple loop through the group interface only.
CornerCensus census_oracle(const PlaneSet& A);

// Maximizing nonzero difference, ties broken by smallest canonical index.
std::pair<std::uint64_t, std::int64_t> max_popular_difference(const CornerCensus& c);

}  // namespace corners

#include "corners/groups.hpp"

#include <algorithm>
#include <bit>
#include <sstream>

#include "corners/errors.hpp"

namespace corners {

GroupDescriptor GroupDescriptor::cyclic_group(std::uint64_t n) {
    GroupDescriptor d;
    d.kind = GroupKind::cyclic;
    d.n = n;
    return d;
}

GroupDescriptor GroupDescriptor::vector_group(std::uint64_t p, std::uint64_t dim) {
    GroupDescriptor d;
    d.kind = GroupKind::vector_space;
    d.p = p;
    d.dim = dim;
    return d;
}

namespace {

GroupDescriptor parse_component(std::istringstream& in) {
    std::string word;
    if (!(in >> word)) throw ValidationError("group descriptor: expected a component");
    if (word == "cyclic") {
        std::uint64_t n = 0;
        if (!(in >> n) || n == 0) throw ValidationError("group descriptor: cyclic needs an order >= 1");
        return GroupDescriptor::cyclic_group(n);
    }
    if (word == "vector") {
        std::uint64_t p = 0, dim = 0;
        if (!(in >> p >> dim) || p < 2 || dim == 0)
            throw ValidationError("group descriptor: vector needs a prime p >= 2 and a dimension >= 1");
        return GroupDescriptor::vector_group(p, dim);
    }
    throw ValidationError("group descriptor: unknown component '" + word + "'");
}

}  // namespace

GroupDescriptor GroupDescriptor::parse(const std::string& text) {
    std::istringstream in(text);
    std::string word;
    if (!(in >> word)) throw ValidationError("empty group descriptor");
    GroupDescriptor d;
    if (word == "product") {
        d.kind = GroupKind::product;
        while (true) {
            std::streampos pos = in.tellg();
            std::string peek;
            if (!(in >> peek)) break;
            in.seekg(pos);
            d.components.push_back(parse_component(in));
        }
        if (d.components.size() < 2)
            throw ValidationError("group descriptor: product needs at least two components");
        return d;
    }
    in.seekg(0);
    d = parse_component(in);
    std::string rest;
    if (in >> rest) throw ValidationError("group descriptor: trailing tokens after component");
    return d;
}

std::string GroupDescriptor::str() const {
    std::ostringstream out;
    switch (kind) {
        case GroupKind::cyclic:
            out << "cyclic " << n;
            break;
        case GroupKind::vector_space:
            out << "vector " << p << " " << dim;
            break;
        case GroupKind::product:
            out << "product";
            for (const auto& c : components) out << " " << c.str();
            break;
    }
    return out.str();
}

FiniteAbelianGroup::FiniteAbelianGroup(GroupDescriptor d) : desc_(std::move(d)) {
    auto flatten = [this](const GroupDescriptor& g, auto&& self) -> void {
        switch (g.kind) {
            case GroupKind::cyclic:
                radices_.push_back(g.n);
                break;
            case GroupKind::vector_space:
                for (std::uint64_t i = 0; i < g.dim; ++i) radices_.push_back(g.p);
                break;
            case GroupKind::product:
                for (const auto& c : g.components) self(c, self);
                break;
        }
    };
    flatten(desc_, flatten);
    if (radices_.empty()) throw ValidationError("group descriptor has no components");
    for (std::uint64_t r : radices_) {
        if (r == 0) throw ValidationError("group component of order 0");
        if (order_ > ~std::uint64_t{0} / r) throw ResourceError("group order overflows 64 bits");
        order_ *= r;
    }
    all_mod2_ = std::all_of(radices_.begin(), radices_.end(),
                            [](std::uint64_t r) { return r == 2; });
}

void FiniteAbelianGroup::check(std::uint64_t a) const {
    if (a >= order_)
        throw DomainError("element index " + std::to_string(a) + " out of range for group of order " +
                          std::to_string(order_));
}

std::uint64_t FiniteAbelianGroup::add(std::uint64_t a, std::uint64_t b) const {
    check(a);
    check(b);
    if (is_cyclic()) {
        const std::uint64_t s = a + b;
        return s >= order_ ? s - order_ : s;
    }
    if (all_mod2_) return a ^ b;
    std::uint64_t out = 0;
    for (std::size_t t = radices_.size(); t-- > 0;) {
        const std::uint64_t r = radices_[t];
        std::uint64_t da = a % r, db = b % r;
        a /= r;
        b /= r;
        std::uint64_t ds = da + db;
        if (ds >= r) ds -= r;
        // rebuild big-endian: digit t has place value prod of radices after t
        std::uint64_t place = 1;
        for (std::size_t u = t + 1; u < radices_.size(); ++u) place *= radices_[u];
        out += ds * place;
    }
    return out;
}

std::uint64_t FiniteAbelianGroup::neg(std::uint64_t a) const {
    check(a);
    if (is_cyclic()) return a == 0 ? 0 : order_ - a;
    if (all_mod2_) return a;
    std::uint64_t out = 0;
    for (std::size_t t = radices_.size(); t-- > 0;) {
        const std::uint64_t r = radices_[t];
        const std::uint64_t da = a % r;
        a /= r;
        const std::uint64_t dn = da == 0 ? 0 : r - da;
        std::uint64_t place = 1;
        for (std::size_t u = t + 1; u < radices_.size(); ++u) place *= radices_[u];
        out += dn * place;
    }
    return out;
}

std::vector<std::uint64_t> FiniteAbelianGroup::digits(std::uint64_t a) const {
    check(a);
    std::vector<std::uint64_t> ds(radices_.size(), 0);
    for (std::size_t t = radices_.size(); t-- > 0;) {
        ds[t] = a % radices_[t];
        a /= radices_[t];
    }
    return ds;
}

std::uint64_t FiniteAbelianGroup::from_digits(std::span<const std::uint64_t> ds) const {
    if (ds.size() != radices_.size()) throw DomainError("digit count does not match group");
    std::uint64_t out = 0;
    for (std::size_t t = 0; t < ds.size(); ++t) {
        if (ds[t] >= radices_[t]) throw DomainError("digit out of range");
        out = out * radices_[t] + ds[t];
    }
    return out;
}

PlaneSet::PlaneSet(FiniteAbelianGroup g)
    : group_(std::move(g)), n_(group_.order()), words_((n_ + 63) / 64),
      bits_(n_ * words_, 0) {}

std::uint64_t PlaneSet::size() const {
    std::uint64_t total = 0;
    for (std::uint64_t w : bits_) total += static_cast<std::uint64_t>(std::popcount(w));
    return total;
}

namespace {

// Extract 64 bits starting at bit position s (s < nbits) from a row that was
// padded with a 63-bit circular head, i.e. ext holds bits 0..nbits-1 followed
// by bits 0..62 again.
inline std::uint64_t window64(const std::uint64_t* ext, std::uint64_t s) {
    const std::uint64_t w = s / 64, off = s % 64;
    if (off == 0) return ext[w];
    return (ext[w] >> off) | (ext[w + 1] << (64 - off));
}

constexpr std::uint64_t kXorMask[6] = {
    0x5555555555555555ull, 0x3333333333333333ull, 0x0F0F0F0F0F0F0F0Full,
    0x00FF00FF00FF00FFull, 0x0000FFFF0000FFFFull, 0x00000000FFFFFFFFull,
};

// In-place y -> y ^ d bit permutation of an N-bit row, N = 2^k.
void xor_translate(std::uint64_t* buf, std::size_t words, std::uint64_t d) {
    for (unsigned b = 0; b < 6; ++b) {
        if (!(d & (std::uint64_t{1} << b))) continue;
        const unsigned s = 1u << b;
        const std::uint64_t m = kXorMask[b];
        for (std::size_t w = 0; w < words; ++w)
            buf[w] = ((buf[w] >> s) & m) | ((buf[w] & m) << s);
    }
    for (unsigned b = 6; (std::uint64_t{1} << b) <= d; ++b) {
        if (!(d & (std::uint64_t{1} << b))) continue;
        const std::size_t stride = std::size_t{1} << (b - 6);
        for (std::size_t w = 0; w < words; ++w)
            if (!(w & stride)) std::swap(buf[w], buf[w | stride]);
    }
}

}  // namespace

std::vector<std::int64_t> census_for(const PlaneSet& A, std::span<const std::uint64_t> ds) {
    const FiniteAbelianGroup& g = A.group();
    const std::uint64_t n = A.order();
    if (n > kCensusOrderCap)
        throw ResourceError("census supports groups of order up to " + std::to_string(kCensusOrderCap) +
                            ", got " + std::to_string(n));
    const std::size_t words = A.words_per_row();
    std::vector<std::int64_t> counts(ds.size(), 0);

    const bool cyclic = g.is_cyclic();
    const bool xorg = g.is_xor();

    // circular 63-bit pad per row, shared across d for the cyclic rotation path
    std::vector<std::uint64_t> ext;
    if (cyclic) {
        ext.assign(n * (words + 1), 0);
        for (std::uint64_t x = 0; x < n; ++x) {
            auto r = A.row(x);
            std::uint64_t* e = &ext[x * (words + 1)];
            for (std::size_t w = 0; w < words; ++w) e[w] = r[w];
            // append bits 0..62 after bit n-1
            for (std::uint64_t b = 0; b < 63 && b < n; ++b)
                if (A.get(x, b)) e[(n + b) / 64] |= std::uint64_t{1} << ((n + b) % 64);
        }
    }

#pragma omp parallel
    {
        std::vector<std::uint64_t> scratch(words, 0);
        std::vector<std::uint64_t> dest;  // generic path: index shift table
#pragma omp for schedule(dynamic)
        for (std::ptrdiff_t di = 0; di < static_cast<std::ptrdiff_t>(ds.size()); ++di) {
            const std::uint64_t d = ds[static_cast<std::size_t>(di)];
            std::int64_t total = 0;
            if (!cyclic && !xorg) {
                // dest[z] = z - d, so bit z of the row lands at the y with y + d = z
                dest.resize(n);
                const std::uint64_t nd = g.neg(d);
                for (std::uint64_t z = 0; z < n; ++z) dest[z] = g.add(z, nd);
            }
            for (std::uint64_t x = 0; x < n; ++x) {
                const std::uint64_t xd = g.add(x, d);
                auto r0 = A.row(x);
                auto r1 = A.row(xd);
                if (cyclic) {
                    const std::uint64_t* e = &ext[x * (words + 1)];
                    for (std::size_t w = 0; w < words; ++w) {
                        std::uint64_t s = d + 64 * w;
                        if (s >= n) s -= n;  // d < n and 64w < n, so one subtraction suffices
                        const std::uint64_t tr = window64(e, s);
                        total += std::popcount(r0[w] & r1[w] & tr);
                    }
                } else if (xorg) {
                    for (std::size_t w = 0; w < words; ++w) scratch[w] = r0[w];
                    xor_translate(scratch.data(), words, d);
                    for (std::size_t w = 0; w < words; ++w)
                        total += std::popcount(r0[w] & r1[w] & scratch[w]);
                } else {
                    std::fill(scratch.begin(), scratch.end(), 0);
                    for (std::size_t w = 0; w < words; ++w) {
                        std::uint64_t bitsw = r0[w];
                        while (bitsw) {
                            const unsigned b = static_cast<unsigned>(std::countr_zero(bitsw));
                            bitsw &= bitsw - 1;
                            const std::uint64_t y = dest[64 * w + b];
                            scratch[y / 64] |= std::uint64_t{1} << (y % 64);
                        }
                    }
                    for (std::size_t w = 0; w < words; ++w)
                        total += std::popcount(r0[w] & r1[w] & scratch[w]);
                }
            }
            counts[static_cast<std::size_t>(di)] = total;
        }
    }
    return counts;
}

CornerCensus census(const PlaneSet& A) {
    const std::uint64_t n = A.order();
    std::vector<std::uint64_t> ds(n);
    for (std::uint64_t d = 0; d < n; ++d) ds[d] = d;
    CornerCensus c;
    c.counts = census_for(A, ds);
    c.alpha = static_cast<double>(A.size()) / (static_cast<double>(n) * static_cast<double>(n));
    return c;
}

CornerCensus census_oracle(const PlaneSet& A) {
    const FiniteAbelianGroup& g = A.group();
    const std::uint64_t n = A.order();
    if (n > kOracleOrderCap)
        throw ResourceError("census_oracle is capped at group order " + std::to_string(kOracleOrderCap) +
                            ", got " + std::to_string(n));
    CornerCensus c;
    c.counts.assign(n, 0);
    for (std::uint64_t d = 0; d < n; ++d)
        for (std::uint64_t x = 0; x < n; ++x)
            for (std::uint64_t y = 0; y < n; ++y)
                if (A.get(x, y) && A.get(g.add(x, d), y) && A.get(x, g.add(y, d)))
                    ++c.counts[d];
    c.alpha = static_cast<double>(A.size()) / (static_cast<double>(n) * static_cast<double>(n));
    return c;
}

std::pair<std::uint64_t, std::int64_t> max_popular_difference(const CornerCensus& c) {
    if (c.counts.size() < 2)
        throw DomainError("max_popular_difference needs a group of order >= 2");
    std::uint64_t best_d = 1;
    std::int64_t best = c.counts[1];
    for (std::uint64_t d = 2; d < c.counts.size(); ++d)
        if (c.counts[d] > best) {
            best = c.counts[d];
            best_d = d;
        }
    return {best_d, best};
}

}  // namespace corners

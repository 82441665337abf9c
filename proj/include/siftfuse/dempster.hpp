#pragma once

#include <array>
#include <cmath>
#include <cstdint>

#include "error.hpp"

namespace siftfuse::ds {

// Subsets of the two-hypothesis frame {genuine, impostor}, encoded as a
// bitmask: bit 0 = genuine, bit 1 = impostor.
enum class FrameSubset : std::uint8_t {
    empty = 0,
    genuine = 1,
    impostor = 2,
    theta = 3, // the whole frame
};

inline constexpr std::array<FrameSubset, 4> kAllSubsets = {
    FrameSubset::empty, FrameSubset::genuine, FrameSubset::impostor,
    FrameSubset::theta};

inline constexpr unsigned bits(FrameSubset s) {
    return static_cast<unsigned>(s);
}

inline constexpr FrameSubset complement(FrameSubset s) {
    return static_cast<FrameSubset>(~bits(s) & 3u);
}

inline constexpr bool is_subset(FrameSubset inner, FrameSubset outer) {
    return (bits(inner) & ~bits(outer)) == 0;
}

inline constexpr FrameSubset intersect(FrameSubset a, FrameSubset b) {
    return static_cast<FrameSubset>(bits(a) & bits(b));
}

inline constexpr int cardinality(FrameSubset s) {
    return (bits(s) & 1u) + ((bits(s) >> 1) & 1u);
}

// Basic probability assignment over {genuine, impostor}. The empty set
// carries no mass and is not stored; the three components sum to 1.
struct MassFunction {
    double genuine = 0.0;
    double impostor = 0.0;
    double theta = 1.0;

    double of(FrameSubset s) const {
        switch (s) {
            case FrameSubset::empty: return 0.0;
            case FrameSubset::genuine: return genuine;
            case FrameSubset::impostor: return impostor;
            case FrameSubset::theta: return theta;
        }
        return 0.0;
    }

    bool valid(double tol = 1e-9) const {
        return genuine >= 0.0 && impostor >= 0.0 && theta >= 0.0 &&
               std::abs(genuine + impostor + theta - 1.0) <= tol;
    }
};

// Lower bound on the probability of `set`: sum of masses of its subsets.
inline double belief(const MassFunction& mass, FrameSubset set) {
    double sum = 0.0;
    for (FrameSubset b : kAllSubsets)
        if (is_subset(b, set)) sum += mass.of(b);
    return sum;
}

// Upper bound: sum of masses of subsets intersecting `set`.
inline double plausibility(const MassFunction& mass, FrameSubset set) {
    double sum = 0.0;
    for (FrameSubset b : kAllSubsets)
        if (intersect(b, set) != FrameSubset::empty) sum += mass.of(b);
    return sum;
}

// A belief function given by its value on each of the four subsets,
// indexed by the subset bitmask.
using BeliefValues = std::array<double, 4>;

inline BeliefValues belief_values(const MassFunction& mass) {
    BeliefValues bel{};
    for (FrameSubset s : kAllSubsets) bel[bits(s)] = belief(mass, s);
    return bel;
}

// Moebius inversion: recovers the mass from a belief function,
// m(A) = sum over B subset of A of (-1)^|A-B| Bel(B).
inline MassFunction mass_from_belief(const BeliefValues& bel) {
    MassFunction mass;
    double recovered[4] = {0, 0, 0, 0};
    for (FrameSubset a : kAllSubsets) {
        double m = 0.0;
        for (FrameSubset b : kAllSubsets) {
            if (!is_subset(b, a)) continue;
            const int diff = cardinality(a) - cardinality(b);
            m += (diff % 2 == 0 ? 1.0 : -1.0) * bel[bits(b)];
        }
        recovered[bits(a)] = m;
    }
    for (FrameSubset a : kAllSubsets)
        if (a != FrameSubset::empty && recovered[bits(a)] < -1e-12)
            throw InvalidBelief("mass_from_belief: input is not a belief function "
                                "(negative recovered mass)");
    mass.genuine = recovered[bits(FrameSubset::genuine)];
    mass.impostor = recovered[bits(FrameSubset::impostor)];
    mass.theta = recovered[bits(FrameSubset::theta)];
    return mass;
}

// Dempster's orthogonal sum. K is the mass assigned to contradictory
// intersections; 1-K is the normalizer.
inline MassFunction dempster_combine(const MassFunction& a, const MassFunction& b) {
    const double conflict = a.genuine * b.impostor + a.impostor * b.genuine;
    if (conflict >= 1.0 - 1e-12)
        throw TotalConflict("dempster_combine: sources are in total conflict");
    const double norm = 1.0 - conflict;
    MassFunction out;
    out.genuine = (a.genuine * b.genuine + a.genuine * b.theta + a.theta * b.genuine) / norm;
    out.impostor = (a.impostor * b.impostor + a.impostor * b.theta + a.theta * b.impostor) / norm;
    out.theta = (a.theta * b.theta) / norm;
    return out;
}

} // namespace siftfuse::ds

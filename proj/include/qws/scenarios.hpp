// scenarios.hpp: the two reference walks with a perturbed region
// e = {−1, 0, 1} inside a bulk of real orthogonal coins [[1, 1], [−1, 1]]/√2:
//   edge_defect_model:  anti-diagonal coins [[0, 1], [−1, 0]] on e (defects at y = 0, 1)
//   vertex_model:       identity coins on e (perturbed, but no edge defect)

#pragma once

#include "qws/lattice.hpp"

namespace qws::scenarios {

inline FieldModel bulk_model() { return FieldModel{ModelParams::hadamard(), {}, {}, {}}; }

inline FieldModel edge_defect_model() {
    return FieldModel{ModelParams::hadamard(), DefectSpec({0, 1}, 0.0, 0.0), {}, {}};
}

inline FieldModel vertex_model() {
    FieldModel m = bulk_model();
    for (long x : {-1L, 0L, 1L}) m.overrides.push_back(SiteCoin{x, CoinMatrix::Identity()});
    return m;
}

/// [1/√6, i/√6] on each of the sites −1, 0, 1.
inline State initial_state(const Window& w) {
    State s = State::zero(w);
    const double a = 1.0 / std::sqrt(6.0);
    for (long x : {-1L, 0L, 1L}) {
        s(x, 0) = a;
        s(x, 1) = Complex(0.0, a);
    }
    return s;
}

}  // namespace qws::scenarios

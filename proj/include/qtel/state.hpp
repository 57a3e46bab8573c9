#pragma once

#include <cstdint>
#include <stdexcept>

namespace qtel {

/// Transmon levels resolvable in a single shot.
enum class State : std::uint8_t { G = 0, E = 1, F = 2 };

inline char to_char(State s) {
    switch (s) {
        case State::G: return 'G';
        case State::E: return 'E';
        case State::F: return 'F';
    }
    return '?';
}

inline State state_from_char(char c) {
    switch (c) {
        case 'G': return State::G;
        case 'E': return State::E;
        case 'F': return State::F;
        default: throw std::invalid_argument("state_from_char: bad label");
    }
}

} // namespace qtel

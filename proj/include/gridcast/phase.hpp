#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>

namespace gridcast {

// Phase conductors of the unbalanced three-phase network. A is the 0 degree
// phase, B is shifted -120 degrees, C is shifted +120 degrees.
enum class Phase : int { A = 0, B = 1, C = 2 };

inline constexpr std::array<Phase, 3> kAllPhases{Phase::A, Phase::B, Phase::C};

inline char phase_letter(Phase p) { return "ABC"[static_cast<int>(p)]; }

inline std::optional<Phase> phase_from_letter(char c) {
    switch (c) {
        case 'a': case 'A': return Phase::A;
        case 'b': case 'B': return Phase::B;
        case 'c': case 'C': return Phase::C;
        default: return std::nullopt;
    }
}

/// Non-empty subset of {A, B, C}.
class PhaseSet {
  public:
    PhaseSet() = default;

    static std::optional<PhaseSet> parse(const std::string& token) {
        PhaseSet s;
        for (char c : token) {
            auto p = phase_from_letter(c);
            if (!p) return std::nullopt;
            s.add(*p);
        }
        if (s.empty()) return std::nullopt;
        return s;
    }

    void add(Phase p) { bits_ |= static_cast<std::uint8_t>(1u << static_cast<int>(p)); }
    bool contains(Phase p) const { return (bits_ >> static_cast<int>(p)) & 1u; }
    bool empty() const { return bits_ == 0; }

    int count() const {
        int n = 0;
        for (Phase p : kAllPhases) n += contains(p) ? 1 : 0;
        return n;
    }

    std::string to_string() const {
        std::string out;
        for (Phase p : kAllPhases)
            if (contains(p)) out += static_cast<char>(phase_letter(p) + ('a' - 'A'));
        return out;
    }

    bool operator==(const PhaseSet&) const = default;

  private:
    std::uint8_t bits_ = 0;
};

}  // namespace gridcast

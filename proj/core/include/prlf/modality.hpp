#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>

namespace prlf {

// Storage order everywhere is (V, A, L), matching the importance vectors.
enum class Modality : std::uint8_t { V = 0, A = 1, L = 2 };

inline constexpr std::size_t kModalityCount = 3;
inline constexpr std::array<Modality, 3> kModalities{Modality::V, Modality::A, Modality::L};
// Tie-break precedence: language first, then acoustic, then visual.
inline constexpr std::array<Modality, 3> kPrecedence{Modality::L, Modality::A, Modality::V};

constexpr std::size_t index_of(Modality m) noexcept { return static_cast<std::size_t>(m); }

constexpr char tag(Modality m) noexcept {
    switch (m) {
        case Modality::V: return 'v';
        case Modality::A: return 'a';
        case Modality::L: return 'l';
    }
    return '?';
}

Modality modality_from_tag(char c);

// Subset of available modalities, written as a string of tags such as "la".
class ModalitySet {
public:
    constexpr ModalitySet() = default;
    static constexpr ModalitySet all() noexcept { return ModalitySet(0b111); }
    static ModalitySet parse(std::string_view tags);

    constexpr bool contains(Modality m) const noexcept { return (bits_ >> index_of(m)) & 1u; }
    constexpr bool empty() const noexcept { return bits_ == 0; }
    constexpr ModalitySet with(Modality m) const noexcept {
        return ModalitySet(static_cast<std::uint8_t>(bits_ | (1u << index_of(m))));
    }
    constexpr std::size_t size() const noexcept {
        return static_cast<std::size_t>((bits_ & 1u) + ((bits_ >> 1) & 1u) + ((bits_ >> 2) & 1u));
    }

    // Canonical "l", "a", "v" ordering, e.g. "lav".
    std::string to_string() const;
    // Table label, e.g. "{l,a}".
    std::string label() const;

    friend constexpr bool operator==(ModalitySet, ModalitySet) = default;

private:
    constexpr explicit ModalitySet(std::uint8_t bits) : bits_(bits) {}
    std::uint8_t bits_ = 0;
};

// The seven evaluation subsets in table order: {l} {a} {v} {l,a} {l,v} {a,v} {l,a,v}.
std::array<ModalitySet, 7> evaluation_subsets();

}  // namespace prlf

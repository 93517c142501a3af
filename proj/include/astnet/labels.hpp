#pragma once

#include <array>
#include <cstddef>
#include <string>

namespace astnet {

inline constexpr std::size_t kAttributeCount = 4;
inline constexpr std::array<const char*, kAttributeCount> kAttributeNames{"takeoff", "somersault",
                                                                          "twist", "flight"};

// The four-factor dive label: takeoff, somersault, twist, flight position.
struct AttributeTuple {
    std::size_t takeoff = 0;
    std::size_t somersault = 0;
    std::size_t twist = 0;
    std::size_t flight = 0;

    std::size_t operator[](std::size_t i) const {
        switch (i) {
            case 0: return takeoff;
            case 1: return somersault;
            case 2: return twist;
            default: return flight;
        }
    }
    std::size_t& operator[](std::size_t i) {
        switch (i) {
            case 0: return takeoff;
            case 1: return somersault;
            case 2: return twist;
            default: return flight;
        }
    }

    friend bool operator==(const AttributeTuple&, const AttributeTuple&) = default;
    friend auto operator<=>(const AttributeTuple&, const AttributeTuple&) = default;
};

struct Labels {
    AttributeTuple attributes;
    std::size_t class_index = 0;
};

std::string to_string(const AttributeTuple& t);

}  // namespace astnet

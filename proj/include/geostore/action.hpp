#pragma once

#include <array>
#include <cstdint>
#include <string>

namespace geostore {

/// Control actions. -2: over-spill, -1: move heat from the IES into the GES,
/// 0: wait, +1: heat pump from the GES into the IES, +2: fuel-fired boiler.
enum class Action : std::int8_t {
  OverSpill = -2,
  ChargeGes = -1,
  Wait = 0,
  DischargeGes = 1,
  Fuel = 2,
};

inline constexpr std::array<Action, 5> kAllActions{Action::OverSpill, Action::ChargeGes, Action::Wait,
                                                    Action::DischargeGes, Action::Fuel};

/// Order in which ties of the Bellman minimum are resolved: waiting first,
/// then smaller |a|, negative before positive.
inline constexpr std::array<Action, 5> kTieBreakOrder{Action::Wait, Action::ChargeGes, Action::DischargeGes,
                                                       Action::OverSpill, Action::Fuel};

inline constexpr int to_int(Action a) { return static_cast<int>(a); }

/// Dense index 0..4 in the order -2..+2.
inline constexpr int action_index(Action a) { return static_cast<int>(a) + 2; }

inline constexpr Action action_from_int(int v) { return static_cast<Action>(v); }

inline bool valid_action_value(int v) { return v >= -2 && v <= 2; }

/// Small bitset over the five actions.
class ActionSet {
 public:
  constexpr ActionSet() = default;
  constexpr explicit ActionSet(std::uint8_t bits) : bits_(bits) {}

  constexpr bool contains(Action a) const { return (bits_ >> action_index(a)) & 1u; }
  constexpr void insert(Action a) { bits_ = static_cast<std::uint8_t>(bits_ | (1u << action_index(a))); }
  constexpr void erase(Action a) { bits_ = static_cast<std::uint8_t>(bits_ & ~(1u << action_index(a))); }
  constexpr bool empty() const { return bits_ == 0; }
  constexpr std::uint8_t bits() const { return bits_; }
  int size() const { return __builtin_popcount(bits_); }

  static constexpr ActionSet all() { return ActionSet(0x1f); }

  std::string to_string() const {
    std::string s = "{";
    bool first = true;
    for (Action a : kAllActions) {
      if (!contains(a)) continue;
      if (!first) s += ",";
      s += std::to_string(to_int(a));
      first = false;
    }
    return s + "}";
  }

  friend constexpr bool operator==(ActionSet x, ActionSet y) { return x.bits_ == y.bits_; }

 private:
  std::uint8_t bits_ = 0;
};

}  // namespace geostore

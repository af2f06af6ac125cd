#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string_view>

namespace ecgsal {

// The eight beat classes kept for classification, in report column order.
enum class BeatClass : std::uint8_t {
  APB = 0,
  VentricularEscape = 1,
  JunctionalEscape = 2,
  LBBB = 3,
  Normal = 4,
  Paced = 5,
  RBBB = 6,
  PVC = 7,
};

inline constexpr std::size_t kNumClasses = 8;

inline constexpr std::array<BeatClass, kNumClasses> kAllClasses = {
    BeatClass::APB,  BeatClass::VentricularEscape, BeatClass::JunctionalEscape, BeatClass::LBBB,
    BeatClass::Normal, BeatClass::Paced,           BeatClass::RBBB,             BeatClass::PVC,
};

constexpr std::size_t index_of(BeatClass c) noexcept { return static_cast<std::size_t>(c); }

// PhysioNet annotation symbol ('A', 'E', 'j', 'L', 'N', '/', 'R', 'V').
char class_symbol(BeatClass c) noexcept;

// Report header, e.g. "Jesc (J)" or "Paced (P)".
std::string_view class_display_name(BeatClass c) noexcept;

// Short key used in JSON and file names, e.g. "APB", "Vesc", "Paced".
std::string_view class_key(BeatClass c) noexcept;

std::optional<BeatClass> class_from_symbol(char symbol) noexcept;
std::optional<BeatClass> class_from_key(std::string_view key) noexcept;

}  // namespace ecgsal

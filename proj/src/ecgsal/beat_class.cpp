#include "ecgsal/beat_class.hpp"

namespace ecgsal {

namespace {

struct ClassInfo {
  char symbol;
  std::string_view display;
  std::string_view key;
};

constexpr std::array<ClassInfo, kNumClasses> kInfo = {{
    {'A', "APB (A)", "APB"},
    {'E', "Vesc (E)", "Vesc"},
    {'j', "Jesc (J)", "Jesc"},
    {'L', "LBBB (L)", "LBBB"},
    {'N', "Normal (N)", "Normal"},
    {'/', "Paced (P)", "Paced"},
    {'R', "RBBB (R)", "RBBB"},
    {'V', "VT (V)", "VT"},
}};

}  // namespace

char class_symbol(BeatClass c) noexcept { return kInfo[index_of(c)].symbol; }

std::string_view class_display_name(BeatClass c) noexcept { return kInfo[index_of(c)].display; }

std::string_view class_key(BeatClass c) noexcept { return kInfo[index_of(c)].key; }

std::optional<BeatClass> class_from_symbol(char symbol) noexcept {
  for (BeatClass c : kAllClasses) {
    if (kInfo[index_of(c)].symbol == symbol) return c;
  }
  return std::nullopt;
}

std::optional<BeatClass> class_from_key(std::string_view key) noexcept {
  for (BeatClass c : kAllClasses) {
    if (kInfo[index_of(c)].key == key) return c;
  }
  return std::nullopt;
}

}  // namespace ecgsal

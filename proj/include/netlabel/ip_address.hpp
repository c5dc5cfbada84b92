#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>

namespace netlabel {

// An IPv4 or IPv6 address in binary form, so that textual variants of the
// same address ("::69" vs "0:0:...:0069") compare equal.
class IpAddress {
 public:
  enum class Family : std::uint8_t { V4, V6 };

  static std::optional<IpAddress> parse(std::string_view text);

  Family family() const noexcept { return family_; }
  std::string to_string() const;

  friend auto operator<=>(const IpAddress&, const IpAddress&) = default;
  friend bool operator==(const IpAddress&, const IpAddress&) = default;

 private:
  Family family_ = Family::V4;
  std::array<std::uint8_t, 16> bytes_{};

  friend struct std::hash<IpAddress>;
};

}  // namespace netlabel

template <>
struct std::hash<netlabel::IpAddress> {
  std::size_t operator()(const netlabel::IpAddress& ip) const noexcept {
    std::size_t h = static_cast<std::size_t>(ip.family_);
    for (auto b : ip.bytes_) h = h * 131 + b;
    return h;
  }
};

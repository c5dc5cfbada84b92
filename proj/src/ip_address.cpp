#include "netlabel/ip_address.hpp"

#include <arpa/inet.h>

#include <cstring>

namespace netlabel {

std::optional<IpAddress> IpAddress::parse(std::string_view text) {
  // inet_pton needs a NUL-terminated buffer; the longest textual IPv6 form
  // (with an embedded IPv4 tail) is 45 characters.
  char buf[INET6_ADDRSTRLEN + 1];
  if (text.empty() || text.size() >= sizeof(buf)) return std::nullopt;
  std::memcpy(buf, text.data(), text.size());
  buf[text.size()] = '\0';

  IpAddress ip;
  if (text.find(':') != std::string_view::npos) {
    if (inet_pton(AF_INET6, buf, ip.bytes_.data()) != 1) return std::nullopt;
    ip.family_ = Family::V6;
  } else {
    if (inet_pton(AF_INET, buf, ip.bytes_.data()) != 1) return std::nullopt;
    ip.family_ = Family::V4;
  }
  return ip;
}

std::string IpAddress::to_string() const {
  char buf[INET6_ADDRSTRLEN];
  const int af = family_ == Family::V6 ? AF_INET6 : AF_INET;
  if (inet_ntop(af, bytes_.data(), buf, sizeof(buf)) == nullptr) return {};
  return buf;
}

}  // namespace netlabel

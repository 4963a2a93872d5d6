#include "gdp/registry.hpp"

#include <algorithm>

#include "gdp/error.hpp"

namespace gdp {

const char* to_string(DeviceType t) noexcept {
  switch (t) {
    case DeviceType::Sensor: return "Sensor";
    case DeviceType::Gateway: return "Gateway";
    case DeviceType::Vehicle: return "Vehicle";
    case DeviceType::Meter: return "Meter";
    case DeviceType::Compute: return "Compute";
  }
  return "Unknown";
}

const char* to_string(DeviceStatus s) noexcept {
  switch (s) {
    case DeviceStatus::Active: return "Active";
    case DeviceStatus::Quarantined: return "Quarantined";
    case DeviceStatus::Banned: return "Banned";
  }
  return "Unknown";
}

DeviceId DeviceRegistry::add(DeviceProfile profile) {
  if (by_key_.contains(profile.public_key)) fail(ErrorCode::DuplicateDevice, profile.public_key.hex());
  profile.id = DeviceId{static_cast<std::uint32_t>(profiles_.size())};
  by_key_.emplace(profile.public_key, profile.id);
  profiles_.push_back(std::move(profile));
  return profiles_.back().id;
}

DeviceProfile& DeviceRegistry::at(DeviceId id) {
  if (!contains(id)) fail(ErrorCode::UnknownDevice, "device #" + std::to_string(id.value));
  return profiles_[id.value];
}

const DeviceProfile& DeviceRegistry::at(DeviceId id) const {
  if (!contains(id)) fail(ErrorCode::UnknownDevice, "device #" + std::to_string(id.value));
  return profiles_[id.value];
}

std::optional<DeviceId> DeviceRegistry::find(const PublicKey& key) const {
  auto it = by_key_.find(key);
  if (it == by_key_.end()) return std::nullopt;
  return it->second;
}

std::size_t DeviceRegistry::count_status(DeviceStatus s) const {
  return static_cast<std::size_t>(
      std::count_if(profiles_.begin(), profiles_.end(), [s](const DeviceProfile& p) { return p.status == s; }));
}

}  // namespace gdp

#pragma once

#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "gdp/types.hpp"

namespace gdp {

enum class DeviceType { Sensor, Gateway, Vehicle, Meter, Compute };
enum class DeviceStatus { Active, Quarantined, Banned };

const char* to_string(DeviceType t) noexcept;
const char* to_string(DeviceStatus s) noexcept;

namespace role {
inline constexpr unsigned kSender = 1u << 0;
inline constexpr unsigned kWitness = 1u << 1;
inline constexpr unsigned kValidator = 1u << 2;
inline constexpr unsigned kArbitrator = 1u << 3;
}  // namespace role

struct DeviceProfile {
  DeviceId id;
  PublicKey public_key;
  DeviceType device_type = DeviceType::Sensor;
  std::string model;
  std::string version;
  Tick onboarded_tick = 0;
  Digest credential;
  DeviceStatus status = DeviceStatus::Active;
  Tick last_revalidation_tick = 0;
  std::string operator_group;
  unsigned roles = 0;
  std::vector<std::string> expertise;

  bool has_role(unsigned r) const noexcept { return (roles & r) != 0; }
};

/// Finalized device profiles. Entries are never removed; bans and quarantine
/// are status changes.
class DeviceRegistry {
 public:
  DeviceId add(DeviceProfile profile);

  DeviceProfile& at(DeviceId id);
  const DeviceProfile& at(DeviceId id) const;
  std::optional<DeviceId> find(const PublicKey& key) const;
  bool contains(DeviceId id) const noexcept { return id.value < profiles_.size(); }

  std::size_t size() const noexcept { return profiles_.size(); }
  const std::vector<DeviceProfile>& all() const noexcept { return profiles_; }

  std::size_t count_status(DeviceStatus s) const;

 private:
  std::vector<DeviceProfile> profiles_;
  std::unordered_map<PublicKey, DeviceId, PublicKeyHash> by_key_;
};

}  // namespace gdp

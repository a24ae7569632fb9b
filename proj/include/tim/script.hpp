#pragma once

// Declarative description of one incident run. The engine executes it; the
// scenario catalogue builds it.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "tim/domain.hpp"
#include "tim/protocol.hpp"

namespace tim {

enum class Resolver : std::uint8_t {
  None,           // nothing to resolve (service lookups, diversions)
  TaTimed,        // the authority clears the road at a fixed time
  Official,       // an official vehicle attends and clears the incident
  TaService,      // the authority fixes it after its service delay
  VehicleClear,   // vehicles notice traffic flowing again
};

enum class Placement : std::uint8_t { Near, Far };

enum class Perturbation : std::uint8_t { None, Wreck, LaneBlockage, SlowZone };

struct ScenarioScript {
  std::string name;
  // Spawn index of the reporting vehicle; nullopt when detectors report.
  std::optional<std::uint32_t> reporter{17};
  bool reporter_is_official{false};
  MessageKind incident{MessageKind::Accident};
  RoadId road{"X"};
  Timestamp report_time{550.0};
  Resolver resolver{Resolver::TaTimed};
  Timestamp resolve_at{850.0};
  double on_site_time{120.0};
  double arrival_radius{50.0};
  std::size_t default_police{0};
  Placement placement{Placement::Near};
  Perturbation perturbation{Perturbation::Wreck};
  double perturb_position{500.0};  // on `road`, for lane blockages and slow zones
  int perturb_lane{1};
  Timestamp perturb_from{550.0};
  Timestamp perturb_until{800.0};
  double slow_speed{5.0};
  bool detectors{false};
  std::string service_category;
  std::vector<ServiceEntry> services;
  int figure{2};
};

}  // namespace tim

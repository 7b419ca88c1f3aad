#pragma once

#include "batchrl/mdp.hpp"

namespace batchrl {

/// Indoor temperature comfort limits enforced by the heat-pump backup.
struct ComfortBand {
  double t_low = 19.0;
  double t_high = 23.0;

  void validate() const;
};

inline constexpr double kEwhSocForceOn = 0.30;
inline constexpr double kEwhSocForceOff = 1.00;

/// Water-heater overrule on the attached state of charge:
/// soc <= 30% -> u_max, soc >= 100% -> 0, otherwise the request passes.
Action backup_ewh(const State& x, Action u, double u_max_kw = 2.3);

/// Heat-pump overrule on the indoor temperature (first physical component):
/// T_in <= t_low -> u_max, T_in >= t_high -> 0, otherwise the request passes.
Action backup_hp(const State& x, Action u, const ComfortBand& band, double u_max_kw = 3.0);

}  // namespace batchrl

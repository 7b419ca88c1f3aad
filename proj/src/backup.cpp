#include "batchrl/backup.hpp"

#include <stdexcept>

#include "batchrl/errors.hpp"

namespace batchrl {

void ComfortBand::validate() const {
  if (!(t_low < t_high)) throw std::invalid_argument("comfort band needs t_low < t_high");
}

Action backup_ewh(const State& x, Action u, double u_max_kw) {
  if (x.schema != "waterheater" || !x.soc) {
    throw SchemaError("water-heater backup needs a waterheater state with a soc reading");
  }
  if (*x.soc <= kEwhSocForceOn) return Action{u_max_kw};
  if (*x.soc >= kEwhSocForceOff) return Action{0.0};
  return u;
}

Action backup_hp(const State& x, Action u, const ComfortBand& band, double u_max_kw) {
  if (x.schema != "heatpump" || x.physical.empty()) {
    throw SchemaError("heat-pump backup needs a heatpump state");
  }
  const double t_in = x.physical[0];
  if (t_in <= band.t_low) return Action{u_max_kw};
  if (t_in >= band.t_high) return Action{0.0};
  return u;
}

}  // namespace batchrl

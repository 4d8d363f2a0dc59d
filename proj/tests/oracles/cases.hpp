#pragma once

#include <numbers>
#include <vector>

#include "gempic/mapping.hpp"
#include "oracles/oracles.hpp"

namespace cases {

struct MapCase {
  const char* name;
  gempic::MapFamily family;
  oracle::Family ofam;
  gempic::MapParams params;
  oracle::MapConsts consts() const {
    return {params.Lx, params.Ly, params.Lz, params.Lp, params.epsilon, params.r0, params.Lr};
  }
  gempic::Mapping map() const { return gempic::Mapping(family, params); }
};

// The four map families on the Weibel-sized domain.
inline std::vector<MapCase> all_maps(double eps = 0.05, double r0 = 0.01) {
  const double L = 2 * std::numbers::pi / 1.25;
  std::vector<MapCase> out;
  gempic::MapParams cart{L, L, L};
  out.push_back({"cartesian", gempic::MapFamily::Cartesian, oracle::Family::Cartesian, cart});
  gempic::MapParams dist{L, L, L, 2 * std::numbers::pi, eps};
  out.push_back({"distorted", gempic::MapFamily::Distorted, oracle::Family::Distorted, dist});
  gempic::MapParams rad;
  rad.Lz = L;
  rad.r0 = r0;
  rad.Lr = L - r0;
  out.push_back({"cylindrical", gempic::MapFamily::Cylindrical, oracle::Family::Cylindrical, rad});
  out.push_back({"elliptical", gempic::MapFamily::Elliptical, oracle::Family::Elliptical, rad});
  return out;
}

}  // namespace cases

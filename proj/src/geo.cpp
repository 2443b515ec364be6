#include "evtraffic/geo.hpp"

#include <cmath>
#include <numbers>

namespace evtraffic {
namespace {

constexpr double kRad = std::numbers::pi / 180.0;

}  // namespace

double haversine_km(GeoPoint a, GeoPoint b) {
  const double dlat = (b.lat - a.lat) * kRad;
  const double dlon = (b.lon - a.lon) * kRad;
  const double s = std::sin(dlat / 2.0);
  const double t = std::sin(dlon / 2.0);
  const double h = s * s + std::cos(a.lat * kRad) * std::cos(b.lat * kRad) * t * t;
  return 2.0 * kEarthRadiusKm * std::asin(std::min(1.0, std::sqrt(h)));
}

int nearest_index(GeoPoint p, std::span<const GeoPoint> candidates, double* distance_km) {
  int best = -1;
  double best_d = 0.0;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const double d = haversine_km(p, candidates[i]);
    if (best < 0 || d < best_d) {
      best = static_cast<int>(i);
      best_d = d;
    }
  }
  if (distance_km != nullptr) {
    *distance_km = best_d;
  }
  return best;
}

GeoPoint offset_km(GeoPoint origin, double north_km, double east_km) {
  const double dlat = north_km / kEarthRadiusKm / kRad;
  const double dlon = east_km / (kEarthRadiusKm * std::cos(origin.lat * kRad)) / kRad;
  return {origin.lat + dlat, origin.lon + dlon};
}

}  // namespace evtraffic

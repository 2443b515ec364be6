#pragma once

#include <span>

namespace evtraffic {

struct GeoPoint {
  double lat = 0.0;
  double lon = 0.0;
};

inline constexpr double kEarthRadiusKm = 6371.0088;

// Great-circle distance in kilometres.
double haversine_km(GeoPoint a, GeoPoint b);

// Index of the closest point in `candidates` (first wins on ties), or -1 if empty.
int nearest_index(GeoPoint p, std::span<const GeoPoint> candidates, double* distance_km = nullptr);

// Point at the given offset in kilometres north/east of `origin`. Used by fixtures.
GeoPoint offset_km(GeoPoint origin, double north_km, double east_km);

}  // namespace evtraffic

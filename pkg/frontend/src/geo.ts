/**
 * Local geodesy, identical to the simulator's convention: NED meters
 * (x north, y east, z down) on an equirectangular tangent plane around
 * the scenario origin, spherical earth radius 6371 km.
 */

export const EARTH_RADIUS = 6_371_000;

export interface GeoPoint {
  lat: number;
  lon: number;
}

export interface LocalPoint {
  north: number;
  east: number;
}

const DEG = Math.PI / 180;

export function toLocal(origin: GeoPoint, p: GeoPoint): LocalPoint {
  return {
    north: (p.lat - origin.lat) * DEG * EARTH_RADIUS,
    east: (p.lon - origin.lon) * DEG * EARTH_RADIUS * Math.cos(origin.lat * DEG),
  };
}

export function toGeo(origin: GeoPoint, p: LocalPoint): GeoPoint {
  return {
    lat: origin.lat + p.north / EARTH_RADIUS / DEG,
    lon:
      origin.lon +
      p.east / (EARTH_RADIUS * Math.cos(origin.lat * DEG)) / DEG,
  };
}

// Trip records (bikeshare style CSV) to hourly origin-destination networks.
//
// Expected columns (header names, any order): started_at, ended_at,
// start_station_id, end_station_id. Optional: start_lat, start_lng, end_lat,
// end_lng, used for station coordinates. Station identifiers are indexed in
// lexicographic order; rows and columns share that index.
#pragma once

#include <chrono>
#include <cstddef>
#include <istream>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ipfnet/network.hpp"

namespace ipfnet {

using TimePoint = std::chrono::sys_seconds;

struct TripRecord {
  TimePoint started_at;
  TimePoint ended_at;
  std::string start_station;
  std::string end_station;
};

/// Half-open window [begin, end).
struct TimeWindow {
  TimePoint begin;
  TimePoint end;
};

struct StationCoordinates {
  double lat = 0.0;
  double lng = 0.0;
  std::size_t samples = 0;
};

struct IngestReport {
  std::vector<std::string> stations;
  NetworkSeries series;  // one slice per hour, labels "YYYY-MM-DDTHH:00"
  SparseNetwork aggregated;
  std::vector<MarginalPair> hourly_marginals;
  std::size_t same_hour_trips = 0;
  std::size_t midpoint_trips = 0;
  std::size_t skipped_rows = 0;
  std::size_t outside_window = 0;
  /// Mean reported position per station; samples == 0 when never reported.
  std::vector<StationCoordinates> coordinates;
};

/// "YYYY-MM-DD HH:MM:SS" or "YYYY-MM-DDTHH:MM:SS", optional fractional
/// seconds (truncated). Throws InputError otherwise.
TimePoint parse_timestamp(std::string_view text);

std::string format_hour(TimePoint hour);

/// Start of the hour a trip is assigned to: the shared hour when start and
/// end fall in the same hour, otherwise the hour containing the midpoint.
TimePoint assigned_hour(TimePoint start, TimePoint end);

/// Splits one CSV line, honouring double quotes.
std::vector<std::string> split_csv_line(std::string_view line);

/// Reads all trips. Rows that fail to parse or have end before start are
/// counted in skipped_rows. When a window is given only trips whose assigned
/// hour lies in it are kept and every hour of the window gets a slice;
/// otherwise slices span the first to the last populated hour.
/// Throws InputError when no trip survives.
IngestReport ingest_trips(std::istream& in, std::optional<TimeWindow> window = std::nullopt);

/// Row-major station-to-station Euclidean distances in coordinate degrees.
/// Throws InputError when a station has no coordinates.
std::vector<double> station_distances(const IngestReport& report);

}  // namespace ipfnet

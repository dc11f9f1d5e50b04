#include "ipfnet/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <unordered_map>

namespace ipfnet {

namespace {

using std::chrono::hours;
using std::chrono::seconds;

int parse_int(std::string_view s, std::size_t pos, std::size_t len) {
  if (pos + len > s.size()) throw InputError("timestamp too short: " + std::string(s));
  int value = 0;
  auto [ptr, ec] = std::from_chars(s.data() + pos, s.data() + pos + len, value);
  if (ec != std::errc() || ptr != s.data() + pos + len) {
    throw InputError("malformed timestamp: " + std::string(s));
  }
  return value;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::optional<double> parse_double(std::string_view s) {
  s = trim(s);
  if (s.empty()) return std::nullopt;
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

TimePoint floor_hour(TimePoint t) { return std::chrono::floor<hours>(t); }

struct ParsedTrip {
  TripRecord trip;
  std::optional<double> start_lat, start_lng, end_lat, end_lng;
};

}  // namespace

TimePoint parse_timestamp(std::string_view text) {
  std::string_view s = trim(text);
  if (s.size() < 19 || s[4] != '-' || s[7] != '-' || (s[10] != ' ' && s[10] != 'T') ||
      s[13] != ':' || s[16] != ':') {
    throw InputError("malformed timestamp: " + std::string(text));
  }
  if (s.size() > 19) {
    std::string_view rest = s.substr(19);
    if (rest.front() == '.') rest.remove_prefix(1);
    else throw InputError("malformed timestamp: " + std::string(text));
    if (rest.empty() || !std::all_of(rest.begin(), rest.end(), [](char c) { return c >= '0' && c <= '9'; })) {
      throw InputError("malformed timestamp: " + std::string(text));
    }
  }
  using namespace std::chrono;
  year_month_day ymd{year{parse_int(s, 0, 4)}, month{static_cast<unsigned>(parse_int(s, 5, 2))},
                     day{static_cast<unsigned>(parse_int(s, 8, 2))}};
  int hh = parse_int(s, 11, 2), mm = parse_int(s, 14, 2), ss = parse_int(s, 17, 2);
  if (!ymd.ok() || hh > 23 || mm > 59 || ss > 60) {
    throw InputError("timestamp out of range: " + std::string(text));
  }
  return sys_days{ymd} + hours{hh} + minutes{mm} + seconds{ss};
}

std::string format_hour(TimePoint hour) {
  using namespace std::chrono;
  auto day = floor<days>(hour);
  year_month_day ymd{day};
  auto hh = duration_cast<hours>(hour - day).count();
  char buf[64];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02lld:00", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                static_cast<long long>(hh));
  return buf;
}

TimePoint assigned_hour(TimePoint start, TimePoint end) {
  if (end < start) throw InputError("trip ends before it starts");
  TimePoint hs = floor_hour(start);
  if (floor_hour(end) == hs) return hs;
  return floor_hour(start + (end - start) / 2);
}

std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> out;
  std::string field;
  bool quoted = false;
  for (std::size_t k = 0; k < line.size(); ++k) {
    char c = line[k];
    if (quoted) {
      if (c == '"') {
        if (k + 1 < line.size() && line[k + 1] == '"') {
          field.push_back('"');
          ++k;
        } else {
          quoted = false;
        }
      } else {
        field.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(field));
      field.clear();
    } else if (c != '\r') {
      field.push_back(c);
    }
  }
  if (quoted) throw InputError("unterminated quote in CSV line");
  out.push_back(std::move(field));
  return out;
}

IngestReport ingest_trips(std::istream& in, std::optional<TimeWindow> window) {
  if (window && !(window->begin < window->end)) throw InputError("empty time window");
  std::string line;
  if (!std::getline(in, line)) throw InputError("trip file is empty");
  auto header = split_csv_line(line);
  auto column = [&](std::string_view name) -> std::optional<std::size_t> {
    for (std::size_t k = 0; k < header.size(); ++k) {
      if (trim(header[k]) == name) return k;
    }
    return std::nullopt;
  };
  auto col_start = column("started_at"), col_end = column("ended_at");
  auto col_from = column("start_station_id"), col_to = column("end_station_id");
  if (!col_start || !col_end || !col_from || !col_to) {
    throw InputError("trip header must contain started_at, ended_at, start_station_id, end_station_id");
  }
  auto col_slat = column("start_lat"), col_slng = column("start_lng");
  auto col_elat = column("end_lat"), col_elng = column("end_lng");

  IngestReport rep;
  std::vector<ParsedTrip> trips;
  std::vector<TimePoint> hours_of;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    ParsedTrip pt;
    try {
      auto f = split_csv_line(line);
      auto field = [&](std::size_t k) -> std::string_view {
        if (k >= f.size()) throw InputError("short CSV row");
        return trim(f[k]);
      };
      pt.trip.started_at = parse_timestamp(field(*col_start));
      pt.trip.ended_at = parse_timestamp(field(*col_end));
      pt.trip.start_station = std::string(field(*col_from));
      pt.trip.end_station = std::string(field(*col_to));
      if (pt.trip.start_station.empty() || pt.trip.end_station.empty()) {
        throw InputError("missing station identifier");
      }
      if (pt.trip.ended_at < pt.trip.started_at) throw InputError("trip ends before it starts");
      auto opt = [&](std::optional<std::size_t> k) -> std::optional<double> {
        if (!k || *k >= f.size()) return std::nullopt;
        return parse_double(f[*k]);
      };
      pt.start_lat = opt(col_slat);
      pt.start_lng = opt(col_slng);
      pt.end_lat = opt(col_elat);
      pt.end_lng = opt(col_elng);
    } catch (const InputError&) {
      ++rep.skipped_rows;
      continue;
    }
    TimePoint h = assigned_hour(pt.trip.started_at, pt.trip.ended_at);
    if (window && (h < window->begin || h >= window->end)) {
      ++rep.outside_window;
      continue;
    }
    if (floor_hour(pt.trip.started_at) == floor_hour(pt.trip.ended_at)) {
      ++rep.same_hour_trips;
    } else {
      ++rep.midpoint_trips;
    }
    hours_of.push_back(h);
    trips.push_back(std::move(pt));
  }
  if (trips.empty()) throw InputError("no trips in the requested window");

  std::map<std::string, std::size_t> index;
  for (const auto& t : trips) {
    index.emplace(t.trip.start_station, 0);
    index.emplace(t.trip.end_station, 0);
  }
  for (auto& [name, idx] : index) {
    idx = rep.stations.size();
    rep.stations.push_back(name);
  }
  const std::size_t s = rep.stations.size();

  std::vector<long double> lat(s, 0.0L), lng(s, 0.0L);
  rep.coordinates.assign(s, {});
  auto add_coord = [&](std::size_t k, std::optional<double> a, std::optional<double> b) {
    if (!a || !b) return;
    lat[k] += *a;
    lng[k] += *b;
    ++rep.coordinates[k].samples;
  };

  TimePoint first, last;
  if (window) {
    first = floor_hour(window->begin);
    last = floor_hour(window->end - seconds{1});
  } else {
    first = *std::min_element(hours_of.begin(), hours_of.end());
    last = *std::max_element(hours_of.begin(), hours_of.end());
  }
  const auto slots = static_cast<std::size_t>((last - first) / hours{1}) + 1;
  std::vector<std::unordered_map<std::size_t, double>> counts(slots);
  for (std::size_t k = 0; k < trips.size(); ++k) {
    const auto& t = trips[k];
    std::size_t a = index.at(t.trip.start_station), b = index.at(t.trip.end_station);
    add_coord(a, t.start_lat, t.start_lng);
    add_coord(b, t.end_lat, t.end_lng);
    auto slot = static_cast<std::size_t>((hours_of[k] - first) / hours{1});
    counts[slot][a * s + b] += 1.0;
  }
  for (std::size_t k = 0; k < s; ++k) {
    if (rep.coordinates[k].samples > 0) {
      rep.coordinates[k].lat = static_cast<double>(lat[k] / rep.coordinates[k].samples);
      rep.coordinates[k].lng = static_cast<double>(lng[k] / rep.coordinates[k].samples);
    }
  }

  for (std::size_t slot = 0; slot < slots; ++slot) {
    std::vector<Entry> entries;
    entries.reserve(counts[slot].size());
    for (const auto& [key, c] : counts[slot]) entries.push_back({key / s, key % s, c});
    rep.series.timesteps.push_back(format_hour(first + hours{static_cast<long>(slot)}));
    rep.series.slices.push_back(SparseNetwork::from_entries(s, s, std::move(entries)));
    rep.hourly_marginals.push_back(marginals(rep.series.slices.back()));
  }
  rep.aggregated = aggregate(rep.series);
  return rep;
}

std::vector<double> station_distances(const IngestReport& report) {
  const std::size_t s = report.stations.size();
  if (report.coordinates.size() != s) throw InputError("station coordinates missing");
  for (std::size_t k = 0; k < s; ++k) {
    if (report.coordinates[k].samples == 0) {
      throw InputError("station " + report.stations[k] + " has no coordinates");
    }
  }
  std::vector<double> d(s * s);
  for (std::size_t a = 0; a < s; ++a) {
    for (std::size_t b = 0; b < s; ++b) {
      d[a * s + b] = std::hypot(report.coordinates[a].lat - report.coordinates[b].lat,
                                report.coordinates[a].lng - report.coordinates[b].lng);
    }
  }
  return d;
}

}  // namespace ipfnet

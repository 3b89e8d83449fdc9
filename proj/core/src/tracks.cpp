#include "pivio/tracks.hpp"

#include <sstream>

#include "pivio/errors.hpp"
#include "pivio/io.hpp"

namespace pivio {

std::vector<TrackFrameData> read_track_csv(const std::filesystem::path& path) {
  std::vector<TrackFrameData> frames;
  for (const auto& row : read_csv_rows(path)) {
    if (!row.cells.empty() && row.cells.front() == "timestamp_s") continue;
    if (row.cells.size() != 5) {
      std::ostringstream os;
      os << path.string() << ":" << row.line
         << ": expected timestamp_s,lens,landmark_id,u,v";
      throw ParseError(os.str());
    }
    const double t = parse_double_cell(row.cells[0], path, row.line, "timestamp_s");
    TrackObs obs;
    obs.lens = static_cast<int>(parse_double_cell(row.cells[1], path, row.line, "lens"));
    obs.landmark =
        static_cast<int>(parse_double_cell(row.cells[2], path, row.line, "landmark_id"));
    obs.pixel.u = parse_double_cell(row.cells[3], path, row.line, "u");
    obs.pixel.v = parse_double_cell(row.cells[4], path, row.line, "v");
    if (obs.lens != 0 && obs.lens != 1) {
      throw ParseError(path.string() + ":" + std::to_string(row.line) +
                       ": lens must be 0 or 1");
    }
    if (frames.empty() || frames.back().t != t) {
      if (!frames.empty() && t < frames.back().t) {
        throw ParseError(path.string() + ":" + std::to_string(row.line) +
                         ": timestamps must be non-decreasing");
      }
      frames.push_back({t, {}});
    }
    frames.back().obs.push_back(obs);
  }
  return frames;
}

void write_track_csv(const std::filesystem::path& path,
                     const std::vector<TrackFrameData>& frames) {
  std::ostringstream os;
  os << "timestamp_s,lens,landmark_id,u,v\n";
  for (const TrackFrameData& f : frames) {
    for (const TrackObs& o : f.obs) {
      os << format_double(f.t) << "," << o.lens << "," << o.landmark << ","
         << format_double(o.pixel.u) << "," << format_double(o.pixel.v) << "\n";
    }
  }
  write_text_file(path, os.str());
}

}  // namespace pivio

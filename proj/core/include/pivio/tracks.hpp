#pragma once

#include <filesystem>
#include <vector>

#include "pivio/camera.hpp"

namespace pivio {

// One candidate landmark observation in one lens at one video frame.
struct TrackObs {
  int landmark = -1;
  int lens = 0;
  PixelPoint pixel;
};

struct TrackFrameData {
  double t = 0.0;
  std::vector<TrackObs> obs;
};

// CSV schema: timestamp_s,lens,landmark_id,u,v ; rows grouped by timestamp.
std::vector<TrackFrameData> read_track_csv(const std::filesystem::path& path);
void write_track_csv(const std::filesystem::path& path,
                     const std::vector<TrackFrameData>& frames);

}  // namespace pivio

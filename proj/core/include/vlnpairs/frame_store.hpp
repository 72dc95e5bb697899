// Copyright 2026 The vlnpairs Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//    http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <map>
#include <string>
#include <vector>

#include "vlnpairs/types.hpp"

namespace vlnpairs {

// Supplies encoded image bytes for a frame.
class ImageSource {
 public:
  virtual ~ImageSource() = default;
  /// Throws Error(IoError) if the frame is unknown or unreadable.
  virtual std::string read(const FrameRef& frame) const = 0;
};

struct VideoFrames {
  std::string video_id;
  std::string directory;
  std::vector<FrameRef> frames;
  std::vector<std::string> filenames;  // parallel to frames
};

/// Reads `<directory>/index.txt`: one "filename frame_index timestamp_s"
/// line per frame (whitespace- or comma-separated, '#' comments). Frames must
/// be strictly increasing in frame_index and the files must exist.
/// video_id defaults to the directory's base name.
VideoFrames load_video_directory(const std::string& directory, std::string video_id = {});

class DirectoryImageSource : public ImageSource {
 public:
  void add(const VideoFrames& video);
  std::string read(const FrameRef& frame) const override;

 private:
  std::map<std::string, std::string> paths_;  // frame key -> file path
};

class MemoryImageSource : public ImageSource {
 public:
  void put(const FrameRef& frame, std::string bytes) { images_[frame.key()] = std::move(bytes); }
  std::string read(const FrameRef& frame) const override;

 private:
  std::map<std::string, std::string> images_;
};

}  // namespace vlnpairs

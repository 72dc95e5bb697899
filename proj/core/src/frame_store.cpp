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

#include "vlnpairs/frame_store.hpp"

#include <filesystem>
#include <sstream>

#include "vlnpairs/error.hpp"
#include "vlnpairs/util.hpp"

namespace vlnpairs {

namespace fs = std::filesystem;

VideoFrames load_video_directory(const std::string& directory, std::string video_id) {
  fs::path dir(directory);
  if (video_id.empty()) video_id = dir.lexically_normal().filename().string();
  if (video_id.empty()) video_id = dir.lexically_normal().parent_path().filename().string();
  const std::string index_path = (dir / "index.txt").string();
  std::istringstream in(read_file(index_path));

  VideoFrames video{video_id, directory, {}, {}};
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    for (char& c : line) {
      if (c == ',' || c == '\t' || c == '\r') c = ' ';
    }
    std::string content = trim(line);
    if (content.empty() || content.front() == '#') continue;
    std::istringstream fields(content);
    std::string filename;
    long long index = -1;
    double ts = -1;
    if (!(fields >> filename >> index >> ts) || index < 0 || ts < 0) {
      throw Error(ErrorCode::IoError, index_path + ":" + std::to_string(line_no) + ": malformed index line");
    }
    if (!video.frames.empty() && static_cast<std::uint32_t>(index) <= video.frames.back().frame_index) {
      throw Error(ErrorCode::IoError,
                  index_path + ":" + std::to_string(line_no) + ": frame_index not strictly increasing");
    }
    if (!fs::exists(dir / filename)) {
      throw Error(ErrorCode::IoError, index_path + ":" + std::to_string(line_no) + ": missing " + filename);
    }
    video.frames.push_back({video_id, static_cast<std::uint32_t>(index), ts});
    video.filenames.push_back(filename);
  }
  if (video.frames.empty()) throw Error(ErrorCode::IoError, index_path + ": no frames");
  return video;
}

void DirectoryImageSource::add(const VideoFrames& video) {
  for (std::size_t i = 0; i < video.frames.size(); ++i) {
    paths_[video.frames[i].key()] = (fs::path(video.directory) / video.filenames[i]).string();
  }
}

std::string DirectoryImageSource::read(const FrameRef& frame) const {
  auto it = paths_.find(frame.key());
  if (it == paths_.end()) throw Error(ErrorCode::IoError, "no image for frame " + frame.key());
  return read_file(it->second);
}

std::string MemoryImageSource::read(const FrameRef& frame) const {
  auto it = images_.find(frame.key());
  if (it == images_.end()) throw Error(ErrorCode::IoError, "no image for frame " + frame.key());
  return it->second;
}

}  // namespace vlnpairs

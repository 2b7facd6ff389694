#pragma once

#include <istream>
#include <map>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "geodepth/geometry.hpp"

namespace geodepth {

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, int line)
      : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + what
                                    : what),
        line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

/// A frame with no pose in the reconstruction.
class FrameUnregistered : public std::runtime_error {
 public:
  explicit FrameUnregistered(const std::string& name)
      : std::runtime_error("frame not registered in reconstruction: " + name),
        name_(name) {}
  const std::string& name() const { return name_; }

 private:
  std::string name_;
};

struct ImageEntry {
  int image_id = 0;
  int camera_id = 1;
  std::string name;
  Pose pose;  // world-to-camera
};

/// Coarse world-to-camera poses of one sequence.
struct SequencePoses {
  std::string sequence_id;
  Intrinsics intrinsics;
  std::vector<ImageEntry> entries;  // file order
  std::vector<std::string> warnings;

  bool contains(const std::string& name) const { return index_.count(name) > 0; }
  /// Throws FrameUnregistered.
  const Pose& pose(const std::string& name) const;
  /// Throws ParseError on a duplicate name.
  void add(ImageEntry entry, int line = 0);

 private:
  std::map<std::string, std::size_t> index_;
};

/// Reads the first camera of a cameras.txt stream (PINHOLE or SIMPLE_PINHOLE).
Intrinsics parse_cameras(std::istream& in);
/// Reads an images.txt stream. Keypoint lines are skipped unparsed.
SequencePoses parse_images(std::istream& in);

void write_cameras(std::ostream& out, const Intrinsics& k);
void write_images(std::ostream& out, const SequencePoses& seq);

/// Loads `<dir>/cameras.txt` and `<dir>/images.txt`.
SequencePoses load_colmap_dir(const std::string& dir, const std::string& sequence_id);
void save_colmap_dir(const std::string& dir, const SequencePoses& seq);

/// Relative coarse pose from target to source frame.
Pose coarse_relative(const SequencePoses& seq, const std::string& target,
                     const std::string& source);

}  // namespace geodepth

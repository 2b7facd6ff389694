#include "geodepth/colmap_io.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "geodepth/errors.hpp"

namespace geodepth {
namespace {

std::vector<std::string> tokenize(const std::string& line) {
  std::istringstream ss(line);
  std::vector<std::string> tokens;
  std::string tok;
  while (ss >> tok) tokens.push_back(tok);
  return tokens;
}

bool is_skippable(const std::vector<std::string>& tokens) {
  return tokens.empty() || tokens.front().front() == '#';
}

double to_double(const std::string& s, int line) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    throw ParseError("expected a number, got '" + s + "'", line);
  }
  if (used != s.size()) throw ParseError("expected a number, got '" + s + "'", line);
  return v;
}

int to_int(const std::string& s, int line) {
  std::size_t used = 0;
  int v = 0;
  try {
    v = std::stoi(s, &used);
  } catch (const std::exception&) {
    throw ParseError("expected an integer, got '" + s + "'", line);
  }
  if (used != s.size()) throw ParseError("expected an integer, got '" + s + "'", line);
  return v;
}

// A pose header has exactly ten fields with a numeric id; a keypoint line has
// a multiple of three.
bool looks_like_header(const std::vector<std::string>& tokens) {
  if (tokens.size() != 10) return false;
  try {
    (void)to_int(tokens[0], 0);
    for (int i = 1; i < 8; ++i) (void)to_double(tokens[i], 0);
  } catch (const ParseError&) {
    return false;
  }
  return true;
}

}  // namespace

const Pose& SequencePoses::pose(const std::string& name) const {
  const auto it = index_.find(name);
  if (it == index_.end()) throw FrameUnregistered(name);
  return entries[it->second].pose;
}

void SequencePoses::add(ImageEntry entry, int line) {
  if (index_.count(entry.name) > 0) {
    throw ParseError("duplicate image name '" + entry.name + "'", line);
  }
  index_[entry.name] = entries.size();
  entries.push_back(std::move(entry));
}

Intrinsics parse_cameras(std::istream& in) {
  std::string line;
  int line_no = 0;
  bool found = false;
  Intrinsics k;
  while (std::getline(in, line)) {
    ++line_no;
    const auto tok = tokenize(line);
    if (is_skippable(tok)) continue;
    if (found) {
      throw ParseError("multiple cameras are not supported", line_no);
    }
    if (tok.size() < 4) throw ParseError("malformed camera line", line_no);
    const std::string& model = tok[1];
    k.width = to_int(tok[2], line_no);
    k.height = to_int(tok[3], line_no);
    if (model == "PINHOLE") {
      if (tok.size() != 8) throw ParseError("PINHOLE expects 4 parameters", line_no);
      k.fx = to_double(tok[4], line_no);
      k.fy = to_double(tok[5], line_no);
      k.cx = to_double(tok[6], line_no);
      k.cy = to_double(tok[7], line_no);
    } else if (model == "SIMPLE_PINHOLE") {
      if (tok.size() != 7) {
        throw ParseError("SIMPLE_PINHOLE expects 3 parameters", line_no);
      }
      k.fx = k.fy = to_double(tok[4], line_no);
      k.cx = to_double(tok[5], line_no);
      k.cy = to_double(tok[6], line_no);
    } else {
      throw ParseError("unsupported camera model '" + model + "'", line_no);
    }
    try {
      k.validate();
    } catch (const std::invalid_argument& e) {
      throw ParseError(e.what(), line_no);
    }
    found = true;
  }
  if (!found) throw ParseError("no camera found", 0);
  return k;
}

SequencePoses parse_images(std::istream& in) {
  SequencePoses seq;
  std::string line;
  int line_no = 0;
  bool expect_points = false;
  while (std::getline(in, line)) {
    ++line_no;
    const auto tok = tokenize(line);
    if (expect_points) {
      expect_points = false;
      // A keypoint line (possibly blank) follows every header. Files written
      // without it are tolerated: a line that parses as a header is one.
      if (tok.empty()) continue;
      if (!looks_like_header(tok) && tok.front().front() != '#') continue;
    }
    if (is_skippable(tok)) continue;
    if (tok.size() != 10) {
      throw ParseError("expected 10 fields in image header, got " +
                           std::to_string(tok.size()),
                       line_no);
    }
    ImageEntry e;
    e.image_id = to_int(tok[0], line_no);
    const double qw = to_double(tok[1], line_no);
    const double qx = to_double(tok[2], line_no);
    const double qy = to_double(tok[3], line_no);
    const double qz = to_double(tok[4], line_no);
    const double norm = std::sqrt(qw * qw + qx * qx + qy * qy + qz * qz);
    if (norm == 0.0) throw ParseError("zero quaternion", line_no);
    if (std::abs(norm - 1.0) > 1e-3) {
      seq.warnings.push_back("line " + std::to_string(line_no) +
                             ": quaternion norm " + std::to_string(norm) +
                             " renormalised");
    }
    e.pose.rotation = Rotation::FromQuaternion(qw, qx, qy, qz);
    e.pose.translation = {to_double(tok[5], line_no), to_double(tok[6], line_no),
                          to_double(tok[7], line_no)};
    e.camera_id = to_int(tok[8], line_no);
    e.name = tok[9];
    seq.add(std::move(e), line_no);
    expect_points = true;
  }
  return seq;
}

void write_cameras(std::ostream& out, const Intrinsics& k) {
  out << "# Camera list with one line of data per camera:\n"
      << "#   CAMERA_ID, MODEL, WIDTH, HEIGHT, PARAMS[]\n"
      << "# Number of cameras: 1\n";
  out << std::setprecision(17) << "1 PINHOLE " << k.width << ' ' << k.height << ' '
      << k.fx << ' ' << k.fy << ' ' << k.cx << ' ' << k.cy << '\n';
}

void write_images(std::ostream& out, const SequencePoses& seq) {
  out << "# Image list with two lines of data per image:\n"
      << "#   IMAGE_ID, QW, QX, QY, QZ, TX, TY, TZ, CAMERA_ID, NAME\n"
      << "#   POINTS2D[] as (X, Y, POINT3D_ID)\n"
      << "# Number of images: " << seq.entries.size() << '\n';
  out << std::setprecision(17);
  for (const auto& e : seq.entries) {
    const auto& q = e.pose.rotation.quaternion();
    const Vec3& t = e.pose.translation;
    out << e.image_id << ' ' << q.w() << ' ' << q.x() << ' ' << q.y() << ' '
        << q.z() << ' ' << t.x() << ' ' << t.y() << ' ' << t.z() << ' '
        << e.camera_id << ' ' << e.name << "\n\n";
  }
}

SequencePoses load_colmap_dir(const std::string& dir, const std::string& sequence_id) {
  namespace fs = std::filesystem;
  const fs::path cameras = fs::path(dir) / "cameras.txt";
  const fs::path images = fs::path(dir) / "images.txt";
  std::ifstream cam_in(cameras);
  if (!cam_in) throw IoError("cannot open " + cameras.string());
  std::ifstream img_in(images);
  if (!img_in) throw IoError("cannot open " + images.string());
  Intrinsics k;
  SequencePoses seq;
  try {
    k = parse_cameras(cam_in);
  } catch (const ParseError& e) {
    throw ParseError(cameras.string() + ": " + e.what(), 0);
  }
  try {
    seq = parse_images(img_in);
  } catch (const ParseError& e) {
    throw ParseError(images.string() + ": " + e.what(), 0);
  }
  seq.intrinsics = k;
  seq.sequence_id = sequence_id;
  return seq;
}

void save_colmap_dir(const std::string& dir, const SequencePoses& seq) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  const fs::path cameras = fs::path(dir) / "cameras.txt";
  const fs::path images = fs::path(dir) / "images.txt";
  std::ofstream cam_out(cameras);
  if (!cam_out) throw IoError("cannot write " + cameras.string());
  write_cameras(cam_out, seq.intrinsics);
  std::ofstream img_out(images);
  if (!img_out) throw IoError("cannot write " + images.string());
  write_images(img_out, seq);
}

Pose coarse_relative(const SequencePoses& seq, const std::string& target,
                     const std::string& source) {
  return relative_pose(seq.pose(target), seq.pose(source));
}

}  // namespace geodepth

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "geodepth/colmap_io.hpp"
#include "geodepth/errors.hpp"

using namespace geodepth;

namespace {

Intrinsics cameras(const std::string& text) {
  std::istringstream in(text);
  return parse_cameras(in);
}

SequencePoses images(const std::string& text) {
  std::istringstream in(text);
  return parse_images(in);
}

double max_abs(const Mat4& m) { return m.cwiseAbs().maxCoeff(); }

}  // namespace

TEST_CASE("pinhole camera line") {
  const Intrinsics k = cameras("# comment\n1 PINHOLE 640 480 500 500 320 240\n");
  CHECK(k.fx == 500);
  CHECK(k.fy == 500);
  CHECK(k.cx == 320);
  CHECK(k.cy == 240);
  CHECK(k.width == 640);
  CHECK(k.height == 480);
}

TEST_CASE("simple pinhole shares the focal length") {
  const Intrinsics k = cameras("1 SIMPLE_PINHOLE 640 480 500 320 240\n");
  CHECK(k.fx == 500);
  CHECK(k.fy == 500);
  CHECK(k.cx == 320);
}

TEST_CASE("unsupported camera model is named") {
  try {
    cameras("1 RADIAL 640 480 500 320 240 0.1 0.01\n");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find("RADIAL") != std::string::npos);
    CHECK(e.line() == 1);
  }
}

TEST_CASE("malformed camera lines carry the line number") {
  try {
    cameras("# header\n\n1 PINHOLE 640 480 500 abc 320 240\n");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line() == 3);
  }
  CHECK_THROWS_AS(cameras("1 PINHOLE 640 480 500\n"), ParseError);
  CHECK_THROWS_AS(cameras("# nothing\n"), ParseError);
}

TEST_CASE("more than one camera is rejected") {
  CHECK_THROWS_AS(cameras("1 PINHOLE 64 64 50 50 32 32\n2 PINHOLE 64 64 50 50 32 32\n"),
                  ParseError);
}

TEST_CASE("identity image entry") {
  const SequencePoses s = images("1 1 0 0 0 0 0 0 1 a.png\n\n");
  REQUIRE(s.entries.size() == 1);
  CHECK(max_abs(s.pose("a.png").matrix() - Mat4::Identity()) == 0.0);
  CHECK(s.warnings.empty());
}

TEST_CASE("golden two-image reconstruction") {
  const std::string text =
      "# Image list with two lines of data per image:\n"
      "#   IMAGE_ID, QW, QX, QY, QZ, TX, TY, TZ, CAMERA_ID, NAME\n"
      "#   POINTS2D[] as (X, Y, POINT3D_ID)\n"
      "# Number of images: 2\n"
      "1   1 0 0 0   0 0 0   1 a.png\n"
      "10.5 20.25 -1 11.0 3.5 7\n"
      "2\t1 0 0 0\t1 0 0\t1\tb.png\n"
      "\n";
  const SequencePoses s = images(text);
  REQUIRE(s.entries.size() == 2);
  CHECK(s.entries[0].image_id == 1);
  CHECK(s.entries[1].image_id == 2);
  CHECK(s.entries[1].name == "b.png");
  const Pose rel = coarse_relative(s, "a.png", "b.png");
  CHECK((rel.translation - Vec3(1, 0, 0)).norm() < 1e-12);
  CHECK(rel.rotation.angle() < 1e-12);
}

TEST_CASE("golden file on disk") {
  const std::string dir = std::string(GEODEPTH_TEST_DATA) + "/colmap_two_images";
  const SequencePoses s = load_colmap_dir(dir, "golden");
  CHECK(s.intrinsics.fx == 52);
  CHECK(s.intrinsics.cx == 31.5);
  REQUIRE(s.entries.size() == 2);
  // 90 degrees about y: (w, y) = (cos 45, sin 45)
  const Pose& b = s.pose("frame_001.png");
  CHECK(((b.rotation * Vec3(1, 0, 0)) - Vec3(0, 0, -1)).norm() < 1e-6);
  CHECK((b.translation - Vec3(0.5, -0.25, 2.0)).norm() < 1e-12);
  CHECK(s.warnings.empty());
}

TEST_CASE("whitespace runs and comments are ignored") {
  const SequencePoses a = images("1 1 0 0 0 1 2 3 1 x.png\n\n2 1 0 0 0 4 5 6 1 y.png\n\n");
  const SequencePoses b =
      images("# c\n  1  1 0 0 0 \t1 2 3  1   x.png  \n\n# mid\n2 1 0 0 0 4 5 6 1 y.png\n\n");
  REQUIRE(b.entries.size() == 2);
  for (const char* name : {"x.png", "y.png"}) {
    CHECK(max_abs(a.pose(name).matrix() - b.pose(name).matrix()) == 0.0);
  }
}

TEST_CASE("header without keypoint line is tolerated") {
  const SequencePoses s = images("1 1 0 0 0 0 0 0 1 a.png\n2 1 0 0 0 1 0 0 1 b.png\n");
  CHECK(s.entries.size() == 2);
}

TEST_CASE("duplicate names are rejected") {
  CHECK_THROWS_AS(images("1 1 0 0 0 0 0 0 1 a.png\n\n2 1 0 0 0 0 0 0 1 a.png\n\n"),
                  ParseError);
}

TEST_CASE("non-unit quaternion is renormalised with a warning") {
  const SequencePoses s = images("1 2 0 0 0 0 0 0 1 a.png\n\n");
  CHECK(s.warnings.size() == 1);
  CHECK(std::abs(s.pose("a.png").rotation.quaternion().norm() - 1.0) < 1e-12);
  CHECK(images("1 1.0005 0 0 0 0 0 0 1 a.png\n\n").warnings.empty());
}

TEST_CASE("wrong field count in an image header") {
  CHECK_THROWS_AS(images("1 1 0 0 0 0 0 1 a.png\n\n"), ParseError);
}

TEST_CASE("write then parse round trip") {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> n(0.0, 1.0);
  SequencePoses seq;
  seq.intrinsics = {52.25, 51.75, 31.5, 30.5, 64, 62};
  for (int i = 0; i < 20; ++i) {
    ImageEntry e;
    e.image_id = i + 1;
    e.name = "frame_" + std::to_string(i) + ".png";
    e.pose.rotation = Rotation::FromAxisAngle(Vec3(n(rng), n(rng), n(rng)));
    e.pose.translation = Vec3(n(rng), n(rng), n(rng)) * 3.0;
    seq.add(e);
  }
  std::ostringstream cam_out, img_out;
  write_cameras(cam_out, seq.intrinsics);
  write_images(img_out, seq);
  const Intrinsics k = cameras(cam_out.str());
  CHECK(k.fx == doctest::Approx(52.25).epsilon(1e-9));
  CHECK(k.fy == doctest::Approx(51.75).epsilon(1e-9));
  CHECK(k.height == 62);
  const SequencePoses back = images(img_out.str());
  REQUIRE(back.entries.size() == seq.entries.size());
  for (const auto& e : seq.entries) {
    CHECK(max_abs(back.pose(e.name).matrix() - e.pose.matrix()) < 1e-6);
  }
}

TEST_CASE("directory round trip") {
  const auto dir = std::filesystem::temp_directory_path() / "geodepth_colmap_rt";
  std::filesystem::remove_all(dir);
  SequencePoses seq;
  seq.intrinsics = {52, 52, 31.5, 31.5, 64, 64};
  ImageEntry e;
  e.name = "a.png";
  e.pose.translation = Vec3(0.1, 0.2, 0.3);
  seq.add(e);
  save_colmap_dir(dir.string(), seq);
  const SequencePoses back = load_colmap_dir(dir.string(), "s");
  CHECK(back.sequence_id == "s");
  CHECK((back.pose("a.png").translation - e.pose.translation).norm() < 1e-6);
  std::filesystem::remove_all(dir);
  CHECK_THROWS_AS(load_colmap_dir(dir.string(), "s"), IoError);
}

TEST_CASE("coarse relative poses") {
  std::mt19937_64 rng(12);
  std::normal_distribution<double> n(0.0, 1.0);
  SequencePoses seq;
  for (int i = 0; i < 5; ++i) {
    ImageEntry e;
    e.image_id = i + 1;
    e.name = std::to_string(i);
    e.pose.rotation = Rotation::FromAxisAngle(Vec3(n(rng), n(rng), n(rng)));
    e.pose.translation = Vec3(n(rng), n(rng), n(rng));
    seq.add(e);
  }
  for (int a = 0; a < 5; ++a) {
    CHECK(max_abs(coarse_relative(seq, std::to_string(a), std::to_string(a)).matrix() -
                  Mat4::Identity()) < 1e-9);
    for (int b = 0; b < 5; ++b) {
      const Pose ab = coarse_relative(seq, std::to_string(a), std::to_string(b));
      const Pose ba = coarse_relative(seq, std::to_string(b), std::to_string(a));
      CHECK(max_abs(ab.matrix() - inverse(ba).matrix()) < 1e-9);
    }
  }
  CHECK_THROWS_AS(coarse_relative(seq, "0", "missing"), FrameUnregistered);
}

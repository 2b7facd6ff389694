#include "geodepth/dataset.hpp"

#include <algorithm>
#include <filesystem>

#include "geodepth/errors.hpp"
#include "geodepth/image_io.hpp"

namespace fs = std::filesystem;

namespace geodepth {
namespace {

void make_dirs(const fs::path& p) {
  std::error_code ec;
  fs::create_directories(p, ec);
  if (ec || !fs::is_directory(p)) {
    throw IoError("cannot create directory " + p.string());
  }
}

void require_file(const fs::path& p) {
  if (!fs::is_regular_file(p)) throw IoError("missing required file " + p.string());
}

}  // namespace

void save_dataset(const std::string& root, const Dataset& data,
                  const std::vector<SequencePoses>* gt_poses) {
  for (std::size_t s = 0; s < data.sequences.size(); ++s) {
    const Sequence& seq = data.sequences[s];
    const fs::path dir = fs::path(root) / seq.id;
    make_dirs(dir / "rgb");
    bool any_depth = false;
    for (const auto& f : seq.frames) any_depth |= !f.gt_depth.empty();
    if (any_depth) make_dirs(dir / "depth");
    for (const auto& f : seq.frames) {
      write_png8((dir / "rgb" / f.name).string(), f.image);
      if (!f.gt_depth.empty()) {
        write_depth_png16((dir / "depth" / f.name).string(), f.gt_depth);
      }
    }
    save_colmap_dir((dir / "sparse").string(), seq.coarse);
    if (gt_poses != nullptr) save_colmap_dir((dir / "gt").string(), (*gt_poses)[s]);
  }
}

Dataset load_dataset(const std::string& root) {
  if (!fs::is_directory(root)) throw IoError("dataset directory not found: " + root);
  std::vector<fs::path> seq_dirs;
  for (const auto& entry : fs::directory_iterator(root)) {
    if (entry.is_directory() && fs::is_directory(entry.path() / "rgb")) {
      seq_dirs.push_back(entry.path());
    }
  }
  std::sort(seq_dirs.begin(), seq_dirs.end());
  if (seq_dirs.empty()) {
    throw IoError("no sequence directories with an rgb/ folder under " + root);
  }

  Dataset data;
  for (const fs::path& dir : seq_dirs) {
    Sequence seq;
    seq.id = dir.filename().string();
    require_file(dir / "sparse" / "cameras.txt");
    require_file(dir / "sparse" / "images.txt");
    seq.coarse = load_colmap_dir((dir / "sparse").string(), seq.id);
    seq.intrinsics = seq.coarse.intrinsics;

    std::optional<SequencePoses> gt;
    if (fs::is_regular_file(dir / "gt" / "images.txt")) {
      gt = load_colmap_dir((dir / "gt").string(), seq.id);
    }

    std::vector<fs::path> images;
    for (const auto& e : fs::directory_iterator(dir / "rgb")) {
      if (e.is_regular_file() && e.path().extension() == ".png") {
        images.push_back(e.path());
      }
    }
    std::sort(images.begin(), images.end());
    for (const fs::path& img : images) {
      Frame f;
      f.name = img.filename().string();
      f.image = read_png8(img.string());
      if (f.image.channels() != 3) throw IoError(img.string() + ": expected RGB");
      if (f.image.width() != seq.intrinsics.width ||
          f.image.height() != seq.intrinsics.height) {
        throw IoError(img.string() + ": size differs from cameras.txt");
      }
      const fs::path depth = dir / "depth" / f.name;
      if (fs::is_regular_file(depth)) f.gt_depth = read_depth_png16(depth.string());
      if (gt && gt->contains(f.name)) f.gt_pose = gt->pose(f.name);
      seq.frames.push_back(std::move(f));
    }
    if (seq.frames.empty()) throw IoError("no images in " + (dir / "rgb").string());
    data.sequences.push_back(std::move(seq));
  }
  return data;
}

}  // namespace geodepth

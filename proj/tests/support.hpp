#pragma once

// Shared fixtures for the test binaries: scratch directories, synthetic
// manifest-backed datasets, and config plumbing toward the mock endpoint.

#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <unistd.h>

#include "tgeval/core.hpp"
#include "tgeval/datasets.hpp"

namespace tgtest {

namespace fs = std::filesystem;

class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::atomic<unsigned> counter{0};
    path_ = fs::temp_directory_path() /
            ("tgeval_" + tag + "_" + std::to_string(::getpid()) + "_" +
             std::to_string(counter.fetch_add(1)));
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const fs::path& path() const { return path_; }
  std::string str() const { return path_.string(); }

 private:
  fs::path path_;
};

inline void write_text_file(const fs::path& path, const std::string& text) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw std::runtime_error("cannot write " + path.string());
  }
  out << text;
}

inline std::string read_text_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw std::runtime_error("cannot read " + path.string());
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

// Synthetic corpus with integer ground-truth windows sitting well inside the
// clip, so integer-second prompt styles round-trip exactly and a disjoint
// answer always has room before the window.
struct SyntheticDataset {
  tgeval::DatasetDescriptor descriptor;
  // What the annotation file encodes, in file order.
  std::vector<tgeval::AnnotationSample> samples;
};

inline SyntheticDataset make_synthetic_dataset(const fs::path& root, int count,
                                               tgeval::Task task) {
  SyntheticDataset out;
  const fs::path frames_dir = root / "frames";
  fs::create_directories(frames_dir);
  write_text_file(frames_dir / "frame.jpg", "not a real jpeg payload\n");

  std::ostringstream ann;
  for (int i = 0; i < count; ++i) {
    char vid[16];
    std::snprintf(vid, sizeof(vid), "vid%03d", i);
    const double duration = 24.0 + (i % 5) * 8.0;
    const double start = 3.0 + (i % 7);
    const double end = start + 4.0 + (i % 6);

    tgeval::AnnotationSample sample;
    sample.video_id = vid;
    sample.duration_s = duration;
    sample.gt_windows = {tgeval::TimeInterval{start, end}};
    sample.task = task;

    ann << "{\"video_id\": \"" << vid << "\", \"duration\": " << duration
        << ", \"windows\": [[" << start << ", " << end << "]]";
    if (task == tgeval::Task::GroundedQA) {
      sample.query = "what happens near the door in clip " + std::to_string(i);
      sample.qa_options = {"it opens", "it closes", "it stays shut",
                           "it is painted"};
      sample.qa_answer_index = i % 4;
      ann << ", \"question\": \"" << sample.query << "\""
          << ", \"options\": [\"it opens\", \"it closes\", \"it stays shut\", "
             "\"it is painted\"], \"answer\": "
          << *sample.qa_answer_index;
    } else {
      sample.query = "person opens the door in clip " + std::to_string(i);
      ann << ", \"query\": \"" << sample.query << "\"";
    }
    ann << "}\n";
    out.samples.push_back(sample);

    std::ostringstream manifest;
    manifest << vid << "\t" << duration << "\n";
    for (double t = 1.0; t < duration; t += 2.0) {
      manifest << t << "\tframe.jpg\n";
    }
    write_text_file(frames_dir / (std::string(vid) + ".manifest"),
                    manifest.str());
  }
  write_text_file(root / "annotations.jsonl", ann.str());

  out.descriptor.name = "synthetic";
  out.descriptor.annotation_path = (root / "annotations.jsonl").string();
  out.descriptor.frames_root = frames_dir.string();
  out.descriptor.split = tgeval::Split::Val;
  out.descriptor.task = task;
  out.descriptor.format = task == tgeval::Task::GroundedQA
                              ? tgeval::AnnotationFormat::NextGqa
                              : tgeval::AnnotationFormat::Canonical;
  return out;
}

}  // namespace tgtest

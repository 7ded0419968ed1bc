#pragma once

// Annotation ingestion for the four benchmark families plus the canonical
// internal format, and frame resolution through either per-video manifest
// files or an external frame-provider command.

#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "tgeval/blueprint.hpp"
#include "tgeval/core.hpp"

namespace tgeval {

enum class Split { Train, Val, Test };

// Annotation file layout. Canonical is the internal line-delimited format;
// the others are thin adapters over the public benchmark formats.
enum class AnnotationFormat {
  Canonical,      // JSONL: video_id, duration, query, windows, options?, answer?
  CharadesSta,    // "VID START END##query" lines + a durations JSON file
  QvHighlights,   // JSONL with vid, duration, query, relevant_windows
  ActivityNet,    // JSON dict vid -> {duration, timestamps, sentences}
  NextGqa,        // JSONL with video_id, duration, question, options, answer,
                  // windows
};

struct DatasetDescriptor {
  std::string name;
  std::string annotation_path;
  // Directory of <video_id>.manifest files, or a provider command template
  // containing {video}/{timestamp}/{output} placeholders.
  std::string frames_root;
  Split split = Split::Val;
  Task task = Task::MomentRetrieval;
  AnnotationFormat format = AnnotationFormat::Canonical;
  // CharadesSta only: JSON object mapping video_id to duration seconds.
  std::string durations_path;
};

struct LoadResult {
  std::vector<AnnotationSample> samples;
  int n_loaded = 0;
  int n_skipped = 0;
  // One line per skipped record or clamped window, for the run log.
  std::vector<std::string> warnings;
};

// Parses the annotation file into samples. Malformed records are skipped and
// counted (n_loaded + n_skipped equals the input record count); out-of-range
// windows are clamped to [0, duration] with a warning. Throws
// std::runtime_error when the file is unreadable or yields zero valid
// samples.
LoadResult load_annotations(const DatasetDescriptor& desc);

struct FrameManifest {
  std::string video_id;
  double duration_s = 0.0;
  std::vector<std::pair<double, std::string>> entries;  // timestamp, path
};

// Reads one manifest file: a "video_id<TAB>duration" header line followed by
// "timestamp<TAB>image_path" lines sorted ascending. Relative image paths
// resolve against the manifest's directory. Throws std::runtime_error on
// unreadable or malformed files.
FrameManifest load_manifest(const std::string& path);

// Maps requested timestamps to image files for one video.
class FrameSource {
 public:
  virtual ~FrameSource() = default;
  // Returns one ImageRef per requested timestamp, in request order. Throws
  // std::runtime_error when the video is unknown or a frame cannot be
  // produced.
  virtual std::vector<ImageRef> resolve(
      const std::string& video_id,
      const std::vector<double>& timestamps) = 0;
};

// Looks up <frames_root>/<video_id>.manifest and picks the nearest entry per
// requested timestamp (ties to the earlier entry). Manifests are cached
// in-memory after first load.
std::unique_ptr<FrameSource> make_manifest_frame_source(
    const std::string& frames_root);

// Runs a shell command per (video, timestamp) with {video}, {timestamp} and
// {output} placeholders; the command must create the {output} image file.
// Outputs land in cache_dir and are reused on repeat requests.
std::unique_ptr<FrameSource> make_command_frame_source(
    const std::string& command_template, const std::string& cache_dir);

// Picks the source kind: the TGEVAL_FRAME_PROVIDER environment variable (a
// command template), if set, wins; otherwise frames_root containing a
// {video} placeholder selects the command source, anything else the manifest
// source.
std::unique_ptr<FrameSource> make_frame_source(const std::string& frames_root,
                                               const std::string& cache_dir);

}  // namespace tgeval

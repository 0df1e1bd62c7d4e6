#pragma once

// Track ingestion and preparation: CSV parsing, mini-track slicing, fold
// assignment, frame-rate subsampling and synthetic track generation.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bbtraj/model.hpp"

namespace bbtraj {

struct Track {
  std::string video_id;
  std::string track_id;
  std::vector<Box> boxes;  // consecutive frames
  double frame_rate_hz = 30.0;

  std::size_t length() const { return boxes.size(); }
  /// "video_id/track_id"; unique across a dataset.
  std::string key() const { return video_id + "/" + track_id; }
};

/// A contiguous (k + p)-frame slice of a track.
struct MiniTrack {
  std::string video_id;
  std::string track_id;
  std::int64_t start_frame = 0;
  std::vector<Box> boxes;
  std::optional<Box> predecessor;  // the frame before start_frame, when the track has one
};

/// Turns a mini-track into (k observed, rest predicted) model tensors.
Sample to_sample(const MiniTrack& mt, int k);

enum class BoxFormat {
  kCenter,   // cx, cy, w, h
  kCorners,  // x1, y1, x2, y2
};

struct TrackFormat {
  BoxFormat box_format = BoxFormat::kCenter;
  double frame_rate_hz = 30.0;
};

/// Header `video_id,track_id,frame,cx,cy,w,h` (or `...,x1,y1,x2,y2` in corner
/// format). One Track per (video_id, track_id) in first-appearance order,
/// sorted by frame; a track with missing frames is split at every gap into
/// pieces named `<track_id>#1`, `<track_id>#2`, ...
std::vector<Track> parse_tracks(std::istream& in, const TrackFormat& format = {});
std::vector<Track> parse_tracks(const std::filesystem::path& path, const TrackFormat& format = {});

/// Center-format CSV with shortest round-trip number formatting.
void write_tracks(std::ostream& out, std::span<const Track> tracks);
void write_tracks(const std::filesystem::path& path, std::span<const Track> tracks);

/// Windows at offsets 0, stride, 2*stride, ... while a full window fits.
std::vector<MiniTrack> slice_minitracks(const Track& track, int window, int stride);
std::vector<MiniTrack> slice_minitracks(std::span<const Track> tracks, int window, int stride);

struct FoldSplit {
  int n_folds = 0;
  std::uint64_t seed = 0;
  std::vector<std::vector<std::string>> folds;  // Track::key() per fold

  /// Fold index of a track key, or -1.
  int fold_of(const std::string& key) const;
};

/// Seeded shuffle of tracks followed by round-robin assignment. Assignment is
/// per track so overlapping mini-tracks never straddle train and test.
FoldSplit split_folds(std::span<const Track> tracks, int n_folds, std::uint64_t seed);

/// Tracks whose fold is (or is not, when `exclude`) `fold`.
std::vector<Track> select_fold(std::span<const Track> tracks, const FoldSplit& split, int fold,
                               bool exclude);

/// Keeps frames 0, factor, 2*factor, ... renumbered consecutively from the
/// first frame; the frame rate is divided by `factor`.
Track subsample(const Track& track, int factor);

enum class MotionKind { kConstantVelocity, kConstantAcceleration, kSinusoidal, kStopAndGo };

std::string to_string(MotionKind kind);
MotionKind parse_motion_kind(const std::string& text);

struct SynthSpec {
  MotionKind kind = MotionKind::kConstantVelocity;
  double start_cx = 0, start_cy = 0;
  double start_w = 40, start_h = 80;
  double vx = 2, vy = 1;            // px / frame
  double ax = 0, ay = 0;            // px / frame^2 (constant-acceleration)
  double dw = 0, dh = 0;            // size change, px / frame
  double amplitude = 10;            // sinusoidal lateral amplitude, px
  double period = 60;               // sinusoidal period, frames
  double stop_probability = 0.5;    // stop-and-go: chance a moving segment is followed by a stop
  int min_segment = 10, max_segment = 40;
  // Per-track uniform jitter half-widths; zero reproduces the closed form for every track.
  double start_jitter = 0, velocity_jitter = 0, accel_jitter = 0;
  int length = 150;
  double noise_stddev = 0;          // Gaussian noise on cx, cy, w, h, px
  std::uint64_t seed = 0;
  double frame_rate_hz = 30;
  std::string video_id = "synth";

  /// `min_length` is k + p when the tracks are meant for training.
  void validate(int min_length = 1) const;

  std::map<std::string, std::string> to_key_values() const;
  static SynthSpec from_key_values(const std::map<std::string, std::string>& kv);
  /// `key = value` lines, sorted by key.
  std::string to_text() const;
};

/// Generates `count` tracks; track i draws its jitter and noise from a stream
/// seeded by (seed, i), so the result does not depend on `count`.
std::vector<Track> synth_tracks(const SynthSpec& spec, int count);

/// Flat `key = value` text; `#` starts a comment.
std::map<std::string, std::string> parse_key_values(const std::string& text);

}  // namespace bbtraj

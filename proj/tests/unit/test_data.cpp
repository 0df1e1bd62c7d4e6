#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <set>
#include <sstream>

#include "bbtraj/data.hpp"

using namespace bbtraj;

namespace {

Track make_track(const std::string& id, int n, std::int64_t frame0 = 0, double vx = 1.0) {
  Track t;
  t.video_id = "v";
  t.track_id = id;
  for (int i = 0; i < n; ++i) t.boxes.push_back({10 + vx * i, 20 - 0.5 * i, 4, 8, frame0 + i});
  return t;
}

std::string csv_of(const std::vector<Track>& tracks) {
  std::ostringstream s;
  write_tracks(s, tracks);
  return s.str();
}

}  // namespace

TEST(ParseTracks, TwoTracksOfHundredRows) {
  std::istringstream in(csv_of({make_track("a", 100), make_track("b", 100, 500)}));
  const auto tracks = parse_tracks(in);
  ASSERT_EQ(tracks.size(), 2u);
  EXPECT_EQ(tracks[0].length(), 100u);
  EXPECT_EQ(tracks[1].length(), 100u);
  EXPECT_EQ(tracks[1].boxes.front().frame, 500);
}

TEST(ParseTracks, MissingFrameSplitsTrack) {
  auto t = make_track("a", 100);
  t.boxes.erase(t.boxes.begin() + 57);  // frame 57 absent
  std::istringstream in(csv_of({t}));
  const auto tracks = parse_tracks(in);
  ASSERT_EQ(tracks.size(), 2u);
  EXPECT_EQ(tracks[0].length(), 57u);
  EXPECT_EQ(tracks[1].length(), 42u);
  EXPECT_EQ(tracks[0].track_id, "a#1");
  EXPECT_EQ(tracks[1].track_id, "a#2");
  EXPECT_EQ(tracks[1].boxes.front().frame, 58);
}

TEST(ParseTracks, RowsMayArriveOutOfOrder) {
  std::istringstream in(
      "video_id,track_id,frame,cx,cy,w,h\n"
      "v,1,2,3,3,1,1\n"
      "v,1,0,1,1,1,1\n"
      "v,1,1,2,2,1,1\n");
  const auto tracks = parse_tracks(in);
  ASSERT_EQ(tracks.size(), 1u);
  EXPECT_EQ(tracks[0].boxes[0].cx, 1);
  EXPECT_EQ(tracks[0].boxes[2].cx, 3);
}

TEST(ParseTracks, CornerFormat) {
  std::istringstream in("video_id,track_id,frame,x1,y1,x2,y2\nv,1,0,10,20,14,28\n");
  TrackFormat f;
  f.box_format = BoxFormat::kCorners;
  const auto tracks = parse_tracks(in, f);
  const Box& b = tracks.at(0).boxes.at(0);
  EXPECT_EQ(b.cx, 12);
  EXPECT_EQ(b.cy, 24);
  EXPECT_EQ(b.w, 4);
  EXPECT_EQ(b.h, 8);
}

TEST(ParseTracks, ErrorsCarryLineNumbers) {
  auto line_of = [](const std::string& text) -> std::size_t {
    std::istringstream in(text);
    try {
      parse_tracks(in);
    } catch (const ParseError& e) {
      return e.line();
    }
    return 0;
  };
  const std::string hdr = "video_id,track_id,frame,cx,cy,w,h\n";
  EXPECT_EQ(line_of("frame,cx\n"), 1u);
  EXPECT_EQ(line_of(hdr + "v,1,0,1,1,1,1\nv,1,1,abc,1,1,1\n"), 3u);
  EXPECT_EQ(line_of(hdr + "v,1,0,1,1,1\n"), 2u);
  EXPECT_EQ(line_of(hdr + "v,1,0,1,1,0,1\n"), 2u);
  EXPECT_EQ(line_of(hdr + "v,1,0,1,1,1,1\nv,1,0,2,2,1,1\n"), 3u);
}

TEST(ParseTracks, WriteParseRoundTrip) {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> d(0.1, 1000);
  std::vector<Track> tracks;
  for (int n = 0; n < 5; ++n) {
    Track t;
    t.video_id = "vid" + std::to_string(n % 2);
    t.track_id = std::to_string(n);
    for (int i = 0; i < 20 + n; ++i) t.boxes.push_back({d(rng), d(rng), d(rng), d(rng), 1000 * n + i});
    tracks.push_back(t);
  }
  std::istringstream in(csv_of(tracks));
  const auto back = parse_tracks(in);
  ASSERT_EQ(back.size(), tracks.size());
  for (std::size_t n = 0; n < tracks.size(); ++n) {
    EXPECT_EQ(back[n].key(), tracks[n].key());
    ASSERT_EQ(back[n].length(), tracks[n].length());
    for (std::size_t i = 0; i < tracks[n].length(); ++i) {
      const Box &a = back[n].boxes[i], &b = tracks[n].boxes[i];
      ASSERT_EQ(a.cx, b.cx);
      ASSERT_EQ(a.cy, b.cy);
      ASSERT_EQ(a.w, b.w);
      ASSERT_EQ(a.h, b.h);
      ASSERT_EQ(a.frame, b.frame);
    }
  }
}

TEST(SliceMinitracks, PaperWindowExamples) {
  const auto mts = slice_minitracks(make_track("a", 150, 7), 90, 30);
  ASSERT_EQ(mts.size(), 3u);
  EXPECT_EQ(mts[0].start_frame, 7);
  EXPECT_EQ(mts[1].start_frame, 37);
  EXPECT_EQ(mts[2].start_frame, 67);
  EXPECT_FALSE(mts[0].predecessor.has_value());
  ASSERT_TRUE(mts[1].predecessor.has_value());
  EXPECT_EQ(mts[1].predecessor->frame, 36);
  for (const auto& m : mts) EXPECT_EQ(m.boxes.size(), 90u);

  EXPECT_TRUE(slice_minitracks(make_track("a", 89), 90, 30).empty());
  EXPECT_EQ(slice_minitracks(make_track("a", 90), 90, 30).size(), 1u);
}

TEST(SliceMinitracks, CountingOracle) {
  std::mt19937_64 rng(4);
  std::uniform_int_distribution<int> len(0, 400), win(1, 100), stride(1, 50);
  for (int trial = 0; trial < 300; ++trial) {
    const int n = len(rng), w = win(rng), s = stride(rng);
    const auto mts = slice_minitracks(make_track("a", n), w, s);
    const std::size_t want = n < w ? 0 : static_cast<std::size_t>((n - w) / s + 1);
    ASSERT_EQ(mts.size(), want) << n << " " << w << " " << s;
    for (std::size_t i = 0; i < mts.size(); ++i) ASSERT_EQ(mts[i].start_frame, static_cast<std::int64_t>(i) * s);
  }
}

TEST(SplitFolds, SizesDisjointCovering) {
  std::vector<Track> nine, ten;
  for (int i = 0; i < 9; ++i) nine.push_back(make_track(std::to_string(i), 5));
  for (int i = 0; i < 10; ++i) ten.push_back(make_track(std::to_string(i), 5));

  const auto s9 = split_folds(nine, 3, 1);
  std::set<std::string> seen;
  for (const auto& f : s9.folds) {
    EXPECT_EQ(f.size(), 3u);
    for (const auto& k : f) EXPECT_TRUE(seen.insert(k).second);
  }
  EXPECT_EQ(seen.size(), 9u);

  const auto s10 = split_folds(ten, 3, 1);
  std::multiset<std::size_t> sizes;
  for (const auto& f : s10.folds) sizes.insert(f.size());
  EXPECT_EQ(sizes, (std::multiset<std::size_t>{3, 3, 4}));

  EXPECT_EQ(split_folds(ten, 3, 1).folds, s10.folds);
  EXPECT_NE(split_folds(ten, 3, 2).folds, s10.folds);
  EXPECT_THROW(split_folds(nine, 1, 0), ConfigError);
}

TEST(SplitFolds, SelectFoldPartitionsTracks) {
  std::vector<Track> tracks;
  for (int i = 0; i < 11; ++i) tracks.push_back(make_track(std::to_string(i), 5));
  const auto split = split_folds(tracks, 3, 9);
  std::size_t total = 0;
  for (int f = 0; f < 3; ++f) {
    const auto in = select_fold(tracks, split, f, false);
    const auto out = select_fold(tracks, split, f, true);
    EXPECT_EQ(in.size() + out.size(), tracks.size());
    for (const auto& t : in) EXPECT_EQ(split.fold_of(t.key()), f);
    total += in.size();
  }
  EXPECT_EQ(total, tracks.size());
}

TEST(Synth, ConstantVelocityClosedForm) {
  SynthSpec spec;
  spec.vx = 2;
  spec.vy = 1;
  const auto tracks = synth_tracks(spec, 3);
  ASSERT_EQ(tracks.size(), 3u);
  EXPECT_EQ(tracks[0].boxes[10].cx, 20);
  EXPECT_EQ(tracks[0].boxes[10].cy, 10);
  const auto f = build_features(tracks[0].boxes);
  for (Eigen::Index i = 1; i < f.length(); ++i) EXPECT_EQ(f.rows(i, 4), 2);
}

TEST(Synth, NoiseMeanAbsoluteDeviation) {
  SynthSpec spec;
  spec.noise_stddev = 2.0;
  spec.length = 500;
  const auto noisy = synth_tracks(spec, 10);
  spec.noise_stddev = 0;
  const auto clean = synth_tracks(spec, 10);
  double sum = 0;
  std::size_t n = 0;
  for (std::size_t t = 0; t < noisy.size(); ++t) {
    for (std::size_t i = 0; i < noisy[t].length(); ++i) {
      sum += std::abs(noisy[t].boxes[i].cx - clean[t].boxes[i].cx);
      sum += std::abs(noisy[t].boxes[i].cy - clean[t].boxes[i].cy);
      n += 2;
    }
  }
  ASSERT_GE(n, 10'000u);
  const double want = 2.0 * std::sqrt(2.0 / std::numbers::pi);
  EXPECT_NEAR(sum / static_cast<double>(n), want, 0.05 * want);
}

TEST(Synth, SeededAndKindsProduceValidTracks) {
  for (auto kind : {MotionKind::kConstantVelocity, MotionKind::kConstantAcceleration,
                    MotionKind::kSinusoidal, MotionKind::kStopAndGo}) {
    SynthSpec spec;
    spec.kind = kind;
    spec.noise_stddev = 1.0;
    spec.velocity_jitter = 0.5;
    spec.seed = 42;
    const auto a = synth_tracks(spec, 4);
    const auto b = synth_tracks(spec, 4);
    ASSERT_EQ(a.size(), 4u);
    EXPECT_EQ(csv_of(a), csv_of(b));
    for (const auto& t : a) {
      EXPECT_EQ(t.length(), 150u);
      for (const auto& box : t.boxes) EXPECT_GT(std::min(box.w, box.h), 0.0);
    }
    EXPECT_EQ(parse_motion_kind(to_string(kind)), kind);
  }
}

TEST(Synth, StopAndGoHasStationaryStretches) {
  SynthSpec spec;
  spec.kind = MotionKind::kStopAndGo;
  spec.stop_probability = 1.0;
  spec.length = 300;
  const auto t = synth_tracks(spec, 1).at(0);
  int still = 0;
  for (std::size_t i = 1; i < t.length(); ++i) still += t.boxes[i].cx == t.boxes[i - 1].cx;
  EXPECT_GT(still, 0);
  EXPECT_LT(still, 299);
}

TEST(Synth, SpecKeyValueRoundTrip) {
  SynthSpec spec;
  spec.kind = MotionKind::kSinusoidal;
  spec.vx = 1.25;
  spec.noise_stddev = 0.3;
  spec.seed = 77;
  spec.video_id = "walk";
  const auto back = SynthSpec::from_key_values(parse_key_values(spec.to_text()));
  EXPECT_EQ(back.to_text(), spec.to_text());
  EXPECT_THROW(SynthSpec::from_key_values({{"nope", "1"}}), ConfigError);
}

TEST(Subsample, IdentityAndFactorThree) {
  auto t = make_track("a", 30, 100);
  t.frame_rate_hz = 30;
  const auto same = subsample(t, 1);
  EXPECT_EQ(csv_of({same}), csv_of({t}));

  const auto third = subsample(t, 3);
  ASSERT_EQ(third.length(), 10u);
  EXPECT_DOUBLE_EQ(third.frame_rate_hz, 10.0);
  for (int i = 0; i < 10; ++i) {
    EXPECT_EQ(third.boxes[i].cx, t.boxes[3 * i].cx);  // original frame 3i
    EXPECT_EQ(third.boxes[i].frame, 100 + i);
  }
}

TEST(Subsample, CompositionEqualsProduct) {
  std::mt19937_64 rng(12);
  std::uniform_int_distribution<int> len(1, 200), fac(1, 6);
  for (int trial = 0; trial < 100; ++trial) {
    const auto t = make_track("a", len(rng), 5, 0.37);
    const int a = fac(rng), b = fac(rng);
    ASSERT_EQ(csv_of({subsample(subsample(t, a), b)}), csv_of({subsample(t, a * b)}));
  }
}

TEST(ToSample, UsesPredecessorForFirstDelta) {
  const auto mts = slice_minitracks(make_track("a", 120), 90, 30);
  const Sample s = to_sample(mts[1], 30);
  EXPECT_EQ(s.input.length(), 30);
  EXPECT_EQ(s.future.length(), 60);
  EXPECT_EQ(s.input.rows(0, 4), 1.0);
  const Sample first = to_sample(mts[0], 30);
  EXPECT_EQ(first.input.rows(0, 4), 0.0);
}

#include "bbtraj/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>
#include <unordered_map>

namespace bbtraj {

Sample to_sample(const MiniTrack& mt, int k) {
  if (k < 1 || static_cast<std::size_t>(k) >= mt.boxes.size()) {
    throw InputError("mini-track of " + std::to_string(mt.boxes.size()) +
                     " boxes cannot be split with k=" + std::to_string(k));
  }
  std::span<const Box> all(mt.boxes);
  return make_sample(all.first(static_cast<std::size_t>(k)), all.subspan(static_cast<std::size_t>(k)),
                     mt.predecessor);
}

// ---------------------------------------------------------------------------
// CSV

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    fields.push_back(trim(line.substr(start, comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return fields;
}

template <typename T>
T parse_number(std::string_view text, std::size_t line, const char* column) {
  T value{};
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end || text.empty()) {
    throw ParseError(line, std::string("invalid ") + column + " '" + std::string(text) + "'");
  }
  return value;
}

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

struct Row {
  Box box;
  std::size_t line;
};

}  // namespace

std::vector<Track> parse_tracks(std::istream& in, const TrackFormat& format) {
  const std::vector<std::string_view> expected =
      format.box_format == BoxFormat::kCenter
          ? std::vector<std::string_view>{"video_id", "track_id", "frame", "cx", "cy", "w", "h"}
          : std::vector<std::string_view>{"video_id", "track_id", "frame", "x1", "y1", "x2", "y2"};

  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  std::vector<std::pair<std::string, std::string>> order;
  std::map<std::pair<std::string, std::string>, std::vector<Row>> groups;

  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split_csv(line);
    if (!have_header) {
      std::string_view first = fields.front();
      if (first.starts_with("\xEF\xBB\xBF")) first.remove_prefix(3);
      auto hdr = fields;
      hdr.front() = first;
      if (hdr != expected) {
        std::string want;
        for (auto e : expected) want += (want.empty() ? "" : ",") + std::string(e);
        throw ParseError(line_no, "unexpected header, expected '" + want + "'");
      }
      have_header = true;
      continue;
    }
    if (fields.size() != expected.size()) {
      throw ParseError(line_no, "expected " + std::to_string(expected.size()) + " fields, got " +
                                    std::to_string(fields.size()));
    }
    if (fields[0].empty() || fields[1].empty()) {
      throw ParseError(line_no, "empty video_id or track_id");
    }
    Box b;
    b.frame = parse_number<std::int64_t>(fields[2], line_no, "frame");
    const double a = parse_number<double>(fields[3], line_no, expected[3].data());
    const double c = parse_number<double>(fields[4], line_no, expected[4].data());
    const double d = parse_number<double>(fields[5], line_no, expected[5].data());
    const double e = parse_number<double>(fields[6], line_no, expected[6].data());
    if (format.box_format == BoxFormat::kCenter) {
      b.cx = a, b.cy = c, b.w = d, b.h = e;
    } else {
      b.cx = 0.5 * (a + d), b.cy = 0.5 * (c + e), b.w = d - a, b.h = e - c;
    }
    if (!std::isfinite(b.cx) || !std::isfinite(b.cy) || !(b.w > 0.0) || !(b.h > 0.0) ||
        !std::isfinite(b.w) || !std::isfinite(b.h)) {
      throw ParseError(line_no, "box must have finite centre and positive finite size");
    }
    auto key = std::make_pair(std::string(fields[0]), std::string(fields[1]));
    auto [it, inserted] = groups.try_emplace(key);
    if (inserted) order.push_back(key);
    it->second.push_back({b, line_no});
  }

  std::vector<Track> tracks;
  for (const auto& key : order) {
    auto& rows = groups[key];
    std::stable_sort(rows.begin(), rows.end(),
                     [](const Row& a, const Row& b) { return a.box.frame < b.box.frame; });
    std::vector<std::vector<Box>> pieces(1);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (i > 0) {
        const auto prev = rows[i - 1].box.frame;
        if (rows[i].box.frame == prev) {
          throw ParseError(rows[i].line, "duplicate frame " + std::to_string(prev) + " for track '" +
                                             key.second + "'");
        }
        if (rows[i].box.frame != prev + 1) pieces.emplace_back();
      }
      pieces.back().push_back(rows[i].box);
    }
    for (std::size_t j = 0; j < pieces.size(); ++j) {
      Track t;
      t.video_id = key.first;
      t.track_id = pieces.size() == 1 ? key.second : key.second + "#" + std::to_string(j + 1);
      t.boxes = std::move(pieces[j]);
      t.frame_rate_hz = format.frame_rate_hz;
      tracks.push_back(std::move(t));
    }
  }
  return tracks;
}

std::vector<Track> parse_tracks(const std::filesystem::path& path, const TrackFormat& format) {
  std::ifstream f(path);
  if (!f) {
    throw IoError("cannot open track file '" + path.string() + "'");
  }
  return parse_tracks(f, format);
}

void write_tracks(std::ostream& out, std::span<const Track> tracks) {
  out << "video_id,track_id,frame,cx,cy,w,h\n";
  for (const auto& t : tracks) {
    for (const auto& b : t.boxes) {
      out << t.video_id << ',' << t.track_id << ',' << b.frame << ',' << format_double(b.cx) << ','
          << format_double(b.cy) << ',' << format_double(b.w) << ',' << format_double(b.h) << '\n';
    }
  }
}

void write_tracks(const std::filesystem::path& path, std::span<const Track> tracks) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) {
    throw IoError("cannot open '" + path.string() + "' for writing");
  }
  write_tracks(f, tracks);
  if (!f) {
    throw IoError("failed writing '" + path.string() + "'");
  }
}

// ---------------------------------------------------------------------------

std::vector<MiniTrack> slice_minitracks(const Track& track, int window, int stride) {
  if (window < 1 || stride < 1) {
    throw ConfigError("slice_minitracks: window and stride must be positive");
  }
  std::vector<MiniTrack> out;
  const auto n = track.boxes.size();
  const auto w = static_cast<std::size_t>(window);
  for (std::size_t off = 0; off + w <= n; off += static_cast<std::size_t>(stride)) {
    MiniTrack mt;
    mt.video_id = track.video_id;
    mt.track_id = track.track_id;
    mt.start_frame = track.boxes[off].frame;
    mt.boxes.assign(track.boxes.begin() + static_cast<std::ptrdiff_t>(off),
                    track.boxes.begin() + static_cast<std::ptrdiff_t>(off + w));
    if (off > 0) mt.predecessor = track.boxes[off - 1];
    out.push_back(std::move(mt));
  }
  return out;
}

std::vector<MiniTrack> slice_minitracks(std::span<const Track> tracks, int window, int stride) {
  std::vector<MiniTrack> out;
  for (const auto& t : tracks) {
    auto part = slice_minitracks(t, window, stride);
    std::move(part.begin(), part.end(), std::back_inserter(out));
  }
  return out;
}

int FoldSplit::fold_of(const std::string& key) const {
  for (std::size_t f = 0; f < folds.size(); ++f) {
    if (std::find(folds[f].begin(), folds[f].end(), key) != folds[f].end()) {
      return static_cast<int>(f);
    }
  }
  return -1;
}

FoldSplit split_folds(std::span<const Track> tracks, int n_folds, std::uint64_t seed) {
  if (n_folds < 2) {
    throw ConfigError("split_folds: need at least 2 folds, got " + std::to_string(n_folds));
  }
  if (tracks.size() < static_cast<std::size_t>(n_folds)) {
    throw ConfigError("split_folds: " + std::to_string(tracks.size()) + " tracks cannot fill " +
                      std::to_string(n_folds) + " folds");
  }
  std::vector<std::string> keys;
  for (const auto& t : tracks) keys.push_back(t.key());
  std::mt19937_64 rng(seed);
  // Fisher-Yates with an explicit draw so the order is fixed by the seed alone.
  for (std::size_t i = keys.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng() % i);
    std::swap(keys[i - 1], keys[j]);
  }
  FoldSplit split;
  split.n_folds = n_folds;
  split.seed = seed;
  split.folds.resize(static_cast<std::size_t>(n_folds));
  for (std::size_t i = 0; i < keys.size(); ++i) {
    split.folds[i % static_cast<std::size_t>(n_folds)].push_back(keys[i]);
  }
  return split;
}

std::vector<Track> select_fold(std::span<const Track> tracks, const FoldSplit& split, int fold,
                               bool exclude) {
  std::vector<Track> out;
  for (const auto& t : tracks) {
    if ((split.fold_of(t.key()) == fold) != exclude) out.push_back(t);
  }
  return out;
}

Track subsample(const Track& track, int factor) {
  if (factor < 1) {
    throw ConfigError("subsample: factor must be >= 1");
  }
  Track out = track;
  out.boxes.clear();
  out.frame_rate_hz = track.frame_rate_hz / factor;
  if (track.boxes.empty()) return out;
  const auto first = track.boxes.front().frame;
  for (std::size_t i = 0, j = 0; i < track.boxes.size(); i += static_cast<std::size_t>(factor), ++j) {
    Box b = track.boxes[i];
    b.frame = first + static_cast<std::int64_t>(j);
    out.boxes.push_back(b);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Synthetic tracks

std::string to_string(MotionKind kind) {
  switch (kind) {
    case MotionKind::kConstantVelocity:
      return "constant-velocity";
    case MotionKind::kConstantAcceleration:
      return "constant-acceleration";
    case MotionKind::kSinusoidal:
      return "sinusoidal";
    case MotionKind::kStopAndGo:
      return "stop-and-go";
  }
  return "?";
}

MotionKind parse_motion_kind(const std::string& text) {
  for (auto k : {MotionKind::kConstantVelocity, MotionKind::kConstantAcceleration,
                 MotionKind::kSinusoidal, MotionKind::kStopAndGo}) {
    if (text == to_string(k)) return k;
  }
  throw ConfigError("unknown motion kind '" + text + "'");
}

void SynthSpec::validate(int min_length) const {
  if (length < std::max(1, min_length)) {
    throw ConfigError("synth: length " + std::to_string(length) + " is below the required " +
                      std::to_string(std::max(1, min_length)));
  }
  if (!(noise_stddev >= 0.0)) throw ConfigError("synth: noise_stddev must be >= 0");
  if (!(start_w > 0.0) || !(start_h > 0.0)) throw ConfigError("synth: start size must be positive");
  if (!(frame_rate_hz > 0.0)) throw ConfigError("synth: frame_rate_hz must be positive");
  if (start_jitter < 0 || velocity_jitter < 0 || accel_jitter < 0) {
    throw ConfigError("synth: jitter half-widths must be >= 0");
  }
  if (kind == MotionKind::kSinusoidal && !(period > 0.0)) {
    throw ConfigError("synth: sinusoidal period must be positive");
  }
  if (kind == MotionKind::kStopAndGo &&
      (min_segment < 1 || max_segment < min_segment || stop_probability < 0 ||
       stop_probability > 1)) {
    throw ConfigError("synth: stop-and-go needs 1 <= min_segment <= max_segment and "
                      "stop_probability in [0, 1]");
  }
}

std::map<std::string, std::string> SynthSpec::to_key_values() const {
  auto d = [](double v) { return format_double(v); };
  return {{"kind", to_string(kind)},
          {"start_cx", d(start_cx)},
          {"start_cy", d(start_cy)},
          {"start_w", d(start_w)},
          {"start_h", d(start_h)},
          {"vx", d(vx)},
          {"vy", d(vy)},
          {"ax", d(ax)},
          {"ay", d(ay)},
          {"dw", d(dw)},
          {"dh", d(dh)},
          {"amplitude", d(amplitude)},
          {"period", d(period)},
          {"stop_probability", d(stop_probability)},
          {"min_segment", std::to_string(min_segment)},
          {"max_segment", std::to_string(max_segment)},
          {"start_jitter", d(start_jitter)},
          {"velocity_jitter", d(velocity_jitter)},
          {"accel_jitter", d(accel_jitter)},
          {"length", std::to_string(length)},
          {"noise_stddev", d(noise_stddev)},
          {"seed", std::to_string(seed)},
          {"frame_rate_hz", d(frame_rate_hz)},
          {"video_id", video_id}};
}

SynthSpec SynthSpec::from_key_values(const std::map<std::string, std::string>& kv) {
  SynthSpec s;
  auto num = [](const std::string& key, const std::string& v) {
    try {
      std::size_t used = 0;
      const double x = std::stod(v, &used);
      if (used != v.size()) throw std::invalid_argument(v);
      return x;
    } catch (const std::exception&) {
      throw ConfigError("synth spec: invalid number for '" + key + "': '" + v + "'");
    }
  };
  for (const auto& [key, v] : kv) {
    if (key == "kind") s.kind = parse_motion_kind(v);
    else if (key == "start_cx") s.start_cx = num(key, v);
    else if (key == "start_cy") s.start_cy = num(key, v);
    else if (key == "start_w") s.start_w = num(key, v);
    else if (key == "start_h") s.start_h = num(key, v);
    else if (key == "vx") s.vx = num(key, v);
    else if (key == "vy") s.vy = num(key, v);
    else if (key == "ax") s.ax = num(key, v);
    else if (key == "ay") s.ay = num(key, v);
    else if (key == "dw") s.dw = num(key, v);
    else if (key == "dh") s.dh = num(key, v);
    else if (key == "amplitude") s.amplitude = num(key, v);
    else if (key == "period") s.period = num(key, v);
    else if (key == "stop_probability") s.stop_probability = num(key, v);
    else if (key == "min_segment") s.min_segment = static_cast<int>(num(key, v));
    else if (key == "max_segment") s.max_segment = static_cast<int>(num(key, v));
    else if (key == "start_jitter") s.start_jitter = num(key, v);
    else if (key == "velocity_jitter") s.velocity_jitter = num(key, v);
    else if (key == "accel_jitter") s.accel_jitter = num(key, v);
    else if (key == "length") s.length = static_cast<int>(num(key, v));
    else if (key == "noise_stddev") s.noise_stddev = num(key, v);
    else if (key == "seed") s.seed = static_cast<std::uint64_t>(std::stoull(v));
    else if (key == "frame_rate_hz") s.frame_rate_hz = num(key, v);
    else if (key == "video_id") s.video_id = v;
    else throw ConfigError("synth spec: unknown key '" + key + "'");
  }
  return s;
}

std::string SynthSpec::to_text() const {
  std::string out;
  for (const auto& [k, v] : to_key_values()) out += k + " = " + v + "\n";
  return out;
}

std::map<std::string, std::string> parse_key_values(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view s = line;
    if (auto hash = s.find('#'); hash != std::string_view::npos) s = s.substr(0, hash);
    s = trim(s);
    if (s.empty() || s.front() == '[') continue;
    const auto eq = s.find('=');
    if (eq == std::string_view::npos) {
      throw ParseError(line_no, "expected 'key = value'");
    }
    auto key = std::string(trim(s.substr(0, eq)));
    auto value = trim(s.substr(eq + 1));
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"') {
      value = value.substr(1, value.size() - 2);
    }
    kv[key] = std::string(value);
  }
  return kv;
}

std::vector<Track> synth_tracks(const SynthSpec& spec, int count) {
  spec.validate();
  if (count < 0) throw ConfigError("synth: count must be >= 0");
  std::vector<Track> tracks;
  tracks.reserve(static_cast<std::size_t>(count));
  for (int n = 0; n < count; ++n) {
    std::seed_seq seq{static_cast<std::uint32_t>(spec.seed), static_cast<std::uint32_t>(spec.seed >> 32),
                      static_cast<std::uint32_t>(n)};
    std::mt19937_64 rng(seq);
    auto jitter = [&rng](double half) {
      return half > 0 ? std::uniform_real_distribution<double>(-half, half)(rng) : 0.0;
    };
    const double cx0 = spec.start_cx + jitter(spec.start_jitter);
    const double cy0 = spec.start_cy + jitter(spec.start_jitter);
    const double vx = spec.vx + jitter(spec.velocity_jitter);
    const double vy = spec.vy + jitter(spec.velocity_jitter);
    const double ax = spec.ax + jitter(spec.accel_jitter);
    const double ay = spec.ay + jitter(spec.accel_jitter);

    // Stop-and-go: per-frame moving flags from alternating random segments.
    std::vector<char> moving;
    if (spec.kind == MotionKind::kStopAndGo) {
      std::uniform_int_distribution<int> seg(spec.min_segment, spec.max_segment);
      std::bernoulli_distribution stop(spec.stop_probability);
      bool state = true;
      while (moving.size() < static_cast<std::size_t>(spec.length)) {
        moving.insert(moving.end(), static_cast<std::size_t>(seg(rng)), state ? 1 : 0);
        state = state ? !stop(rng) : true;
      }
    }
    const double speed = std::hypot(vx, vy);
    const double nx = speed > 0 ? -vy / speed : 0.0;
    const double ny = speed > 0 ? vx / speed : 1.0;

    Track t;
    t.video_id = spec.video_id;
    t.track_id = std::to_string(n);
    t.frame_rate_hz = spec.frame_rate_hz;
    double sx = cx0, sy = cy0;
    for (int i = 0; i < spec.length; ++i) {
      const double fi = i;
      Box b;
      b.frame = i;
      switch (spec.kind) {
        case MotionKind::kConstantVelocity:
          b.cx = cx0 + vx * fi;
          b.cy = cy0 + vy * fi;
          break;
        case MotionKind::kConstantAcceleration:
          b.cx = cx0 + vx * fi + 0.5 * ax * fi * fi;
          b.cy = cy0 + vy * fi + 0.5 * ay * fi * fi;
          break;
        case MotionKind::kSinusoidal: {
          const double lateral = spec.amplitude * std::sin(2.0 * std::numbers::pi * fi / spec.period);
          b.cx = cx0 + vx * fi + lateral * nx;
          b.cy = cy0 + vy * fi + lateral * ny;
          break;
        }
        case MotionKind::kStopAndGo:
          if (i > 0 && moving[static_cast<std::size_t>(i)]) {
            sx += vx;
            sy += vy;
          }
          b.cx = sx;
          b.cy = sy;
          break;
      }
      b.w = spec.start_w + spec.dw * fi;
      b.h = spec.start_h + spec.dh * fi;
      t.boxes.push_back(b);
    }
    if (spec.noise_stddev > 0) {
      std::normal_distribution<double> noise(0.0, spec.noise_stddev);
      for (auto& b : t.boxes) {
        b.cx += noise(rng);
        b.cy += noise(rng);
        b.w += noise(rng);
        b.h += noise(rng);
      }
    }
    for (auto& b : t.boxes) {
      b.w = std::max(1.0, b.w);
      b.h = std::max(1.0, b.h);
    }
    tracks.push_back(std::move(t));
  }
  return tracks;
}

}  // namespace bbtraj

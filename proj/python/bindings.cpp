// Python bindings: boxes travel as (n, 4) float64 arrays of (cx, cy, w, h).

#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "bbtraj/data.hpp"
#include "bbtraj/errors.hpp"
#include "bbtraj/evaluation.hpp"
#include "bbtraj/training.hpp"
#include "bbtraj/weights.hpp"

namespace py = pybind11;
using namespace bbtraj;

namespace {

using BoxArray = Eigen::Matrix<double, Eigen::Dynamic, 4, Eigen::RowMajor>;

std::vector<Box> to_boxes(const BoxArray& a, std::int64_t first_frame = 0) {
  std::vector<Box> out;
  out.reserve(static_cast<std::size_t>(a.rows()));
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    out.push_back({a(i, 0), a(i, 1), a(i, 2), a(i, 3), first_frame + i});
  }
  return out;
}

BoxArray to_array(std::span<const Box> boxes) {
  BoxArray a(static_cast<Eigen::Index>(boxes.size()), 4);
  for (std::size_t i = 0; i < boxes.size(); ++i) a.row(static_cast<Eigen::Index>(i)) = boxes[i].values().transpose();
  return a;
}

std::optional<Box> to_predecessor(const std::optional<Eigen::Vector4d>& v) {
  if (!v) return std::nullopt;
  return Box{(*v)[0], (*v)[1], (*v)[2], (*v)[3], -1};
}

py::dict report_dict(const MetricReport& r) {
  py::dict d;
  d["ade"] = r.ade;
  d["fde"] = r.fde;
  d["per_step"] = r.per_step;
  d["n_samples"] = r.n_samples;
  d["k"] = r.input_length;
  d["p"] = r.horizon;
  d["nonpositive_sizes"] = r.nonpositive_sizes;
  return d;
}

/// Parameters are kept in double; saving rounds to single precision.
struct Model {
  ModelParams<double> params;

  BoxArray predict_boxes(const BoxArray& past, const std::optional<Eigen::Vector4d>& predecessor) const {
    const auto boxes = to_boxes(past, 1);
    return bbtraj::predict(params, std::span<const Box>(boxes), to_predecessor(predecessor)).rows;
  }
};

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "LSTM encoder-decoder forecaster for pedestrian bounding boxes";

  py::register_exception<IoError>(m, "IoError", PyExc_OSError);
  py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);
  py::register_exception<FormatError>(m, "FormatError", PyExc_ValueError);
  py::register_exception<bbtraj::ParseError>(m, "ParseError", PyExc_ValueError);
  // ConfigError, InputError and DimensionError derive from std::invalid_argument -> ValueError.

  py::class_<ModelConfig>(m, "ModelConfig")
      .def(py::init([](int k, int p, int hidden, int latent, const std::string& decoder_init) {
             ModelConfig c{k, p, hidden, latent, DecoderInit::kFullState};
             if (decoder_init == "hidden") {
               c.decoder_init = DecoderInit::kHiddenOnly;
             } else if (decoder_init != "full") {
               throw ConfigError("decoder_init must be 'full' or 'hidden'");
             }
             c.validate();
             return c;
           }),
           py::arg("k") = 30, py::arg("p") = 60, py::arg("hidden") = 512, py::arg("latent") = 256,
           py::arg("decoder_init") = "full")
      .def_readwrite("k", &ModelConfig::k)
      .def_readwrite("p", &ModelConfig::p)
      .def_readwrite("hidden", &ModelConfig::hidden)
      .def_readwrite("latent", &ModelConfig::latent)
      .def_property_readonly("decoder_init",
                             [](const ModelConfig& c) {
                               return c.decoder_init == DecoderInit::kFullState ? "full" : "hidden";
                             })
      .def("__repr__", [](const ModelConfig& c) {
        return "ModelConfig(k=" + std::to_string(c.k) + ", p=" + std::to_string(c.p) +
               ", hidden=" + std::to_string(c.hidden) + ", latent=" + std::to_string(c.latent) + ")";
      });

  m.def("parameter_count", &parameter_count, py::arg("config"));

  py::class_<TrainConfig>(m, "TrainConfig")
      .def(py::init([](const ModelConfig& model, int batch_size, int epochs, double lr, int halve_every,
                       double alpha, double beta, const std::string& mode, double clip_norm, int threads,
                       std::uint64_t seed) {
             TrainConfig c;
             c.model = model;
             c.batch_size = batch_size;
             c.epochs = epochs;
             c.base_lr = lr;
             c.halve_every = halve_every;
             c.loss.alpha = alpha;
             c.loss.beta = beta;
             c.loss.mode = parse_loss_mode(mode);
             c.clip_norm = clip_norm;
             c.threads = threads;
             c.seed = seed;
             c.validate();
             return c;
           }),
           py::arg("model") = ModelConfig{}, py::arg("batch_size") = 200, py::arg("epochs") = 30,
           py::arg("lr") = 0.00141, py::arg("halve_every") = 5, py::arg("alpha") = 1.0,
           py::arg("beta") = 2.0, py::arg("mode") = "traj+auto-enc", py::arg("clip_norm") = 0.0,
           py::arg("threads") = 1, py::arg("seed") = 0)
      .def_readwrite("model", &TrainConfig::model)
      .def_readwrite("batch_size", &TrainConfig::batch_size)
      .def_readwrite("epochs", &TrainConfig::epochs)
      .def_readwrite("lr", &TrainConfig::base_lr)
      .def_readwrite("halve_every", &TrainConfig::halve_every)
      .def_readwrite("seed", &TrainConfig::seed)
      .def_property_readonly("mode", [](const TrainConfig& c) { return std::string(to_string(c.loss.mode)); })
      .def("to_dict", &TrainConfig::to_key_values);

  m.def("lr_schedule", &lr_schedule, py::arg("epoch"), py::arg("config"));

  py::class_<Track>(m, "Track")
      .def(py::init([](const std::string& video_id, const std::string& track_id, const BoxArray& boxes,
                       std::int64_t first_frame, double frame_rate_hz) {
             return Track{video_id, track_id, to_boxes(boxes, first_frame), frame_rate_hz};
           }),
           py::arg("video_id"), py::arg("track_id"), py::arg("boxes"), py::arg("first_frame") = 0,
           py::arg("frame_rate_hz") = 30.0)
      .def_readonly("video_id", &Track::video_id)
      .def_readonly("track_id", &Track::track_id)
      .def_readonly("frame_rate_hz", &Track::frame_rate_hz)
      .def_property_readonly("boxes", [](const Track& t) { return to_array(t.boxes); })
      .def_property_readonly("frames",
                             [](const Track& t) {
                               std::vector<std::int64_t> f;
                               for (const auto& b : t.boxes) f.push_back(b.frame);
                               return f;
                             })
      .def("__len__", &Track::length)
      .def("__repr__", [](const Track& t) {
        return "Track('" + t.key() + "', " + std::to_string(t.length()) + " frames)";
      });

  m.def(
      "read_tracks",
      [](const std::filesystem::path& path, const std::string& box_format, double frame_rate_hz) {
        TrackFormat f;
        f.box_format = box_format == "corners" ? BoxFormat::kCorners : BoxFormat::kCenter;
        if (box_format != "corners" && box_format != "center") {
          throw ConfigError("box_format must be 'center' or 'corners'");
        }
        f.frame_rate_hz = frame_rate_hz;
        return parse_tracks(path, f);
      },
      py::arg("path"), py::arg("box_format") = "center", py::arg("frame_rate_hz") = 30.0);
  m.def(
      "write_tracks",
      [](const std::filesystem::path& path, const std::vector<Track>& tracks) { write_tracks(path, tracks); },
      py::arg("path"), py::arg("tracks"));
  m.def("subsample", &subsample, py::arg("track"), py::arg("factor"));

  m.def(
      "synth_tracks",
      [](int count, const py::kwargs& kwargs) {
        std::map<std::string, std::string> kv;
        for (const auto& [k, v] : kwargs) kv[py::str(k)] = py::str(v);
        return synth_tracks(SynthSpec::from_key_values(kv), count);
      },
      py::arg("count"),
      "Synthetic tracks; keyword arguments are SynthSpec keys such as kind, vx, noise_stddev, seed.");

  m.def(
      "build_features",
      [](const BoxArray& boxes, const std::optional<Eigen::Vector4d>& predecessor) {
        return build_features(to_boxes(boxes, 1), to_predecessor(predecessor)).rows;
      },
      py::arg("boxes"), py::arg("predecessor") = py::none());
  m.def(
      "reconstruction_target",
      [](const Matrix<double>& window) { return reconstruction_target(FeatureWindow{window}).rows; },
      py::arg("window"));
  m.def(
      "concat_trajectory",
      [](const Matrix<double>& deltas, const Eigen::Vector4d& anchor) {
        return concat_trajectory(DeltaSequence{deltas}, anchor).rows;
      },
      py::arg("deltas"), py::arg("anchor"));

  m.def(
      "ade", [](const BoxArray& pred, const BoxArray& gt) { return ade(BoxSequence{pred}, BoxSequence{gt}); },
      py::arg("pred"), py::arg("gt"));
  m.def(
      "fde", [](const BoxArray& pred, const BoxArray& gt) { return fde(BoxSequence{pred}, BoxSequence{gt}); },
      py::arg("pred"), py::arg("gt"));
  m.def(
      "fde_at",
      [](const BoxArray& pred, const BoxArray& gt, int t) { return fde_at(BoxSequence{pred}, BoxSequence{gt}, t); },
      py::arg("pred"), py::arg("gt"), py::arg("t"));
  m.def(
      "baseline_predict",
      [](const std::string& kind, const BoxArray& past, int p) {
        return baseline_predict(parse_baseline_kind(kind), to_boxes(past, 1), p).rows;
      },
      py::arg("kind"), py::arg("past"), py::arg("p"));

  py::class_<Model>(m, "Model")
      .def_static(
          "initialized",
          [](const ModelConfig& cfg, std::uint64_t seed) { return Model{ModelParams<double>::initialized(cfg, seed)}; },
          py::arg("config"), py::arg("seed") = 0)
      .def_static(
          "load", [](const std::filesystem::path& path) { return Model{load_model(path).params.cast<double>()}; },
          py::arg("path"))
      .def(
          "save",
          [](const Model& self, const std::filesystem::path& path, const std::string& echo) {
            save_model(self.params, echo, path);
          },
          py::arg("path"), py::arg("config_echo") = "")
      .def_property_readonly("config", [](const Model& self) { return self.params.config; })
      .def_property_readonly("parameter_count", [](const Model& self) { return self.params.size(); })
      .def("predict", &Model::predict_boxes, py::arg("past"), py::arg("predecessor") = py::none(),
           "Predict p future boxes from exactly k past boxes.")
      .def(
          "forward_train",
          [](const Model& self, const Matrix<double>& window) {
            auto out = forward_train(self.params, FeatureWindow{window});
            return py::make_tuple(out.reconstruction.rows, out.deltas.rows, out.trajectory.rows);
          },
          py::arg("window"), "Returns (reconstruction, deltas, trajectory) for a k x 8 feature window.");

  m.def(
      "train",
      [](const TrainConfig& cfg, const std::vector<Track>& tracks, int stride,
         const std::optional<std::function<void(int, double)>>& on_epoch) {
        const auto mts = slice_minitracks(std::span<const Track>(tracks), cfg.model.k + cfg.model.p, stride);
        TrainResult r;
        {
          py::gil_scoped_release release;
          r = train(cfg, std::span<const MiniTrack>(mts),
                    [&](const EpochStats& s, const ModelParams<double>&) {
                      if (on_epoch) {
                        py::gil_scoped_acquire acquire;
                        (*on_epoch)(s.epoch, s.loss);
                      }
                    });
        }
        py::list history;
        for (const auto& e : r.history.epochs) {
          py::dict d;
          d["epoch"] = e.epoch;
          d["loss"] = e.loss;
          d["loss_auto_enc"] = e.loss_auto_enc;
          d["loss_traj"] = e.loss_traj;
          d["lr"] = e.lr;
          d["seconds"] = e.seconds;
          history.append(d);
        }
        return py::make_tuple(Model{std::move(r.params)}, history);
      },
      py::arg("config"), py::arg("tracks"), py::arg("stride") = 30, py::arg("on_epoch") = py::none());

  m.def(
      "evaluate",
      [](const Model& model, const std::vector<Track>& tracks, int stride) {
        const auto& c = model.params.config;
        const auto mts = slice_minitracks(std::span<const Track>(tracks), c.k + c.p, stride);
        py::gil_scoped_release release;
        auto r = evaluate(model.params, std::span<const MiniTrack>(mts));
        py::gil_scoped_acquire acquire;
        return report_dict(r);
      },
      py::arg("model"), py::arg("tracks"), py::arg("stride") = 30);
  m.def(
      "evaluate_baseline",
      [](const std::string& kind, const std::vector<Track>& tracks, int k, int p, int stride) {
        const auto mts = slice_minitracks(std::span<const Track>(tracks), k + p, stride);
        return report_dict(evaluate(baseline_predictor(parse_baseline_kind(kind), p), mts, k));
      },
      py::arg("kind"), py::arg("tracks"), py::arg("k") = 30, py::arg("p") = 60, py::arg("stride") = 30);

  m.def(
      "benchmark",
      [](const Model& model, int threads, double duration, std::uint64_t seed) {
        const auto params = model.params.cast<float>();
        BenchReport r;
        {
          py::gil_scoped_release release;
          r = benchmark_tps(params, threads, duration, seed);
        }
        py::dict d;
        d["threads"] = r.threads;
        d["tps"] = r.trajectories_per_second;
        d["fps"] = r.equivalent_fps;
        d["seconds"] = r.seconds;
        d["predictions"] = r.predictions;
        return d;
      },
      py::arg("model"), py::arg("threads") = 1, py::arg("duration") = 1.0, py::arg("seed") = 0);
}

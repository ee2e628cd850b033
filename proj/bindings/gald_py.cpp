// Python surface: numpy-facing wrappers around the core operations.
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>
#include <stdexcept>

#include "gald/bench.hpp"
#include "gald/ga_heads.hpp"
#include "gald/ld_modules.hpp"
#include "gald/metrics.hpp"
#include "gald/tensor.hpp"
#include "gald/toy_pipeline.hpp"

namespace py = pybind11;
using namespace gald;

namespace {

Tensor tensor_from_array(const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
    if (a.ndim() != 4) throw std::invalid_argument("expected a 4-d (n,c,h,w) array");
    const Shape4 s{static_cast<std::size_t>(a.shape(0)), static_cast<std::size_t>(a.shape(1)),
                   static_cast<std::size_t>(a.shape(2)), static_cast<std::size_t>(a.shape(3))};
    Tensor t(s);
    std::copy(a.data(), a.data() + t.numel(), t.data().begin());
    return t;
}

py::array_t<double> array_from_tensor(const Tensor& t) {
    const auto s = t.shape();
    py::array_t<double> a({s.n, s.c, s.h, s.w});
    std::copy(t.data().begin(), t.data().end(), a.mutable_data());
    return a;
}

LabelMap labelmap_from_array(const py::array_t<int, py::array::c_style | py::array::forcecast>& a) {
    if (a.ndim() != 2) throw std::invalid_argument("expected a 2-d (h,w) label array");
    LabelMap m;
    m.h = static_cast<std::size_t>(a.shape(0));
    m.w = static_cast<std::size_t>(a.shape(1));
    m.labels.assign(a.data(), a.data() + m.h * m.w);
    return m;
}

GaKind ga_kind_from(const std::string& s) {
    if (s == "psp") return GaKind::psp;
    if (s == "aspp") return GaKind::aspp;
    if (s == "nonlocal") return GaKind::nonlocal;
    if (s == "cgnl") return GaKind::cgnl;
    throw std::invalid_argument("unknown ga head: " + s);
}

LdKind ld_kind_from(const std::string& s) {
    if (s == "none") return LdKind::none;
    if (s == "v1") return LdKind::v1;
    if (s == "v2") return LdKind::v2;
    throw std::invalid_argument("unknown ld module: " + s);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "GALD core: global-aggregation / local-distribution numerics";

    m.def("save_tensor",
          [](const std::string& path, const py::array_t<double>& a) {
              save(tensor_from_array(a), path);
          },
          py::arg("path"), py::arg("array"));
    m.def("load_tensor",
          [](const std::string& path) { return array_from_tensor(load(path)); },
          py::arg("path"));
    m.def("seeded_uniform",
          [](std::size_t n, std::size_t c, std::size_t h, std::size_t w, std::uint64_t seed,
             double lo, double hi) {
              return array_from_tensor(Tensor::seeded_uniform({n, c, h, w}, seed, lo, hi));
          },
          py::arg("n"), py::arg("c"), py::arg("h"), py::arg("w"), py::arg("seed") = 42,
          py::arg("lo") = -1.0, py::arg("hi") = 1.0);

    m.def("conv2d",
          [](const py::array_t<double>& x, const py::array_t<double>& kernel,
             const std::optional<py::array_t<double>>& bias, std::size_t stride,
             std::size_t dilation, std::size_t pad, std::size_t groups) {
              ConvSpec spec;
              spec.stride = stride;
              spec.dilation = dilation;
              spec.pad = pad;
              spec.groups = groups;
              ConvWeights w{tensor_from_array(kernel),
                            bias ? std::optional<Tensor>(tensor_from_array(*bias)) : std::nullopt,
                            spec};
              return array_from_tensor(conv2d(tensor_from_array(x), w).value);
          },
          py::arg("x"), py::arg("kernel"), py::arg("bias") = std::nullopt, py::arg("stride") = 1,
          py::arg("dilation") = 1, py::arg("pad") = 0, py::arg("groups") = 1);

    m.def("ga_forward",
          [](const py::array_t<double>& x, const std::string& kind, std::size_t reduced,
             std::uint64_t seed) {
              Tensor t = tensor_from_array(x);
              GaConfig cfg = default_ga_config(
                  ga_kind_from(kind),
                  reduced ? reduced : std::max<std::size_t>(1, t.shape().c / 2));
              GaParams p = ga_init(cfg, t.shape().c, seed);
              return array_from_tensor(ga_forward(t, cfg, p).value);
          },
          py::arg("x"), py::arg("kind") = "nonlocal", py::arg("reduced") = 0,
          py::arg("seed") = 42);

    m.def("gald_forward",
          [](const py::array_t<double>& x, const std::string& ga, const std::string& ld,
             std::uint64_t seed) {
              Tensor t = tensor_from_array(x);
              GaldConfig cfg = toy_head_config(ga_kind_from(ga), ld_kind_from(ld), t.shape().c);
              GaldParams p = gald_init(cfg, t.shape().c, seed);
              return array_from_tensor(gald_forward(t, cfg, p).value);
          },
          py::arg("x"), py::arg("ga") = "nonlocal", py::arg("ld") = "v2", py::arg("seed") = 42);

    m.def("local_attention",
          [](const py::array_t<double>& q, const py::array_t<double>& k,
             const py::array_t<double>& v, std::size_t ksize, std::size_t dilation,
             const std::string& border_mode) {
              const BorderMode mode = border_mode == "zero_pad_keys"
                                          ? BorderMode::zero_pad_keys
                                          : BorderMode::masked_softmax;
              return array_from_tensor(local_attention(tensor_from_array(q),
                                                       tensor_from_array(k),
                                                       tensor_from_array(v), ksize, dilation,
                                                       mode)
                                           .value);
          },
          py::arg("q"), py::arg("k"), py::arg("v"), py::arg("ksize") = 5, py::arg("dilation") = 3,
          py::arg("border_mode") = "masked_softmax");

    m.def("miou",
          [](const py::array_t<int>& pred, const py::array_t<int>& gt, int num_classes) {
              const MiouResult r = miou(labelmap_from_array(pred), labelmap_from_array(gt),
                                        num_classes);
              return py::make_tuple(r.miou, r.per_class);
          },
          py::arg("pred"), py::arg("gt"), py::arg("num_classes"));

    m.def("boundary_fscore",
          [](const py::array_t<int>& pred, const py::array_t<int>& gt, int class_id,
             std::size_t slack) {
              return boundary_fscore(labelmap_from_array(pred), labelmap_from_array(gt),
                                     class_id, slack);
          },
          py::arg("pred"), py::arg("gt"), py::arg("class_id"), py::arg("slack"));

    m.def("flop_model",
          [](const std::string& method, std::size_t h, std::size_t w, std::size_t c_reduced,
             std::size_t k) {
              return bench::flop_model(bench::parse_method(method), h, w, c_reduced, k);
          },
          py::arg("method"), py::arg("h"), py::arg("w"), py::arg("c_reduced") = 16,
          py::arg("k") = 5);

    m.def("train_toy",
          [](std::uint64_t seed, std::size_t epochs, double lr, std::size_t batch,
             double ohem_fraction, std::size_t samples, std::size_t eval_samples,
             std::size_t image_size, std::size_t channels, const std::string& ga,
             const std::string& ld) {
              TrainConfig cfg;
              cfg.seed = seed;
              cfg.epochs = epochs;
              cfg.lr = lr;
              cfg.batch = batch;
              cfg.ohem_topk_fraction = ohem_fraction;
              cfg.samples = samples;
              cfg.eval_samples = eval_samples;
              cfg.image_size = image_size;
              cfg.feature_channels = channels;
              cfg.head = toy_head_config(ga_kind_from(ga), ld_kind_from(ld), channels);
              const TrainReport r = train_toy(cfg);
              py::dict out;
              out["seed"] = r.seed;
              out["diverged"] = r.diverged;
              out["final_miou"] = r.final_miou;
              py::dict bf;
              for (const auto& [slack, f] : r.boundary_f) bf[py::int_(slack)] = f;
              out["boundary_f"] = bf;
              out["loss_curve"] = r.loss_curve;
              return out;
          },
          py::arg("seed") = 42, py::arg("epochs") = 2, py::arg("lr") = 0.2, py::arg("batch") = 4,
          py::arg("ohem_fraction") = 0.25, py::arg("samples") = 200,
          py::arg("eval_samples") = 16, py::arg("image_size") = 64, py::arg("channels") = 8,
          py::arg("ga") = "nonlocal", py::arg("ld") = "v2");
}

// SPDX-License-Identifier: Apache-2.0
//
// Python bindings for the pipeline's main operations. Images cross the
// boundary as (H, W, C) float64 arrays, matrices via Eigen, meshes as
// (vertices Nx3, faces Mx3) pairs.

#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "cdi3d/ablation.hpp"
#include "cdi3d/camera.hpp"
#include "cdi3d/dvi.hpp"
#include "cdi3d/errors.hpp"
#include "cdi3d/fusion.hpp"
#include "cdi3d/mesh.hpp"
#include "cdi3d/metrics.hpp"
#include "cdi3d/renderer.hpp"
#include "cdi3d/rng.hpp"
#include "cdi3d/triplane.hpp"

namespace py = pybind11;
using namespace cdi3d;

namespace {

Image image_from_array(const py::array_t<double, py::array::c_style | py::array::forcecast>& arr) {
  if (arr.ndim() != 3) throw py::value_error("image array must be (H, W, C)");
  Image img(static_cast<int>(arr.shape(0)), static_cast<int>(arr.shape(1)),
            static_cast<int>(arr.shape(2)));
  std::copy(arr.data(), arr.data() + arr.size(), img.data.begin());
  return img;
}

py::array_t<double> array_from_image(const Image& img) {
  py::array_t<double> arr({img.height, img.width, img.channels});
  std::copy(img.data.begin(), img.data.end(), arr.mutable_data());
  return arr;
}

std::vector<Eigen::Vector3d> points_from_array(
    const py::array_t<double, py::array::c_style | py::array::forcecast>& arr) {
  if (arr.ndim() != 2 || arr.shape(1) != 3)
    throw py::value_error("point array must be (N, 3)");
  std::vector<Eigen::Vector3d> pts(static_cast<size_t>(arr.shape(0)));
  for (py::ssize_t i = 0; i < arr.shape(0); ++i)
    pts[static_cast<size_t>(i)] = {arr.at(i, 0), arr.at(i, 1), arr.at(i, 2)};
  return pts;
}

TriangleMesh mesh_from_arrays(
    const py::array_t<double, py::array::c_style | py::array::forcecast>& verts,
    const py::array_t<int64_t, py::array::c_style | py::array::forcecast>& faces) {
  if (faces.ndim() != 2 || faces.shape(1) != 3)
    throw py::value_error("face array must be (M, 3)");
  TriangleMesh mesh;
  mesh.vertices = points_from_array(verts);
  mesh.faces.resize(static_cast<size_t>(faces.shape(0)));
  for (py::ssize_t i = 0; i < faces.shape(0); ++i)
    mesh.faces[static_cast<size_t>(i)] = {static_cast<int>(faces.at(i, 0)),
                                          static_cast<int>(faces.at(i, 1)),
                                          static_cast<int>(faces.at(i, 2))};
  return mesh;
}

py::tuple mesh_to_arrays(const TriangleMesh& mesh) {
  py::array_t<double> verts({static_cast<py::ssize_t>(mesh.vertices.size()),
                             static_cast<py::ssize_t>(3)});
  for (size_t i = 0; i < mesh.vertices.size(); ++i)
    for (int k = 0; k < 3; ++k)
      verts.mutable_at(static_cast<py::ssize_t>(i), k) = mesh.vertices[i][k];
  py::array_t<int64_t> faces({static_cast<py::ssize_t>(mesh.faces.size()),
                              static_cast<py::ssize_t>(3)});
  for (size_t i = 0; i < mesh.faces.size(); ++i)
    for (int k = 0; k < 3; ++k)
      faces.mutable_at(static_cast<py::ssize_t>(i), k) = mesh.faces[i][k];
  return py::make_tuple(verts, faces);
}

ShapeKind shape_kind_from(const std::string& kind) {
  if (kind == "sphere") return ShapeKind::Sphere;
  if (kind == "torus") return ShapeKind::Torus;
  if (kind == "box") return ShapeKind::Box;
  throw py::value_error("unknown shape kind: " + kind);
}

AttentionParams attention_from(const Eigen::MatrixXd& wq,
                               const Eigen::MatrixXd& wk,
                               const Eigen::MatrixXd& wv, int heads) {
  AttentionParams p;
  p.w_q = wq;
  p.w_k = wk;
  p.w_v = wv;
  p.heads = heads;
  return p;
}

}  // namespace

PYBIND11_MODULE(_cdi3d, m) {
  m.doc() = "tilt-trajectory image-to-3D pipeline core";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);
  py::register_exception<IoError>(m, "IoError", PyExc_OSError);

  m.def("seed_stream", &seed_stream, py::arg("master"), py::arg("name"),
        "derive the seed of a named substream");

  // --- camera ---------------------------------------------------------
  py::class_<TrajectoryConfig>(m, "TrajectoryConfig")
      .def(py::init<>())
      .def_readwrite("num_main_views", &TrajectoryConfig::num_main_views)
      .def_readwrite("num_interp", &TrajectoryConfig::num_interp)
      .def_readwrite("radius", &TrajectoryConfig::radius)
      .def_readwrite("interp_elevation_pattern",
                     &TrajectoryConfig::interp_elevation_pattern);

  py::class_<CameraPose>(m, "CameraPose")
      .def_readonly("rotation", &CameraPose::rotation)
      .def_readonly("translation", &CameraPose::translation)
      .def_readonly("azimuth_deg", &CameraPose::azimuth_deg)
      .def_readonly("elevation_deg", &CameraPose::elevation_deg)
      .def_readonly("radius", &CameraPose::radius)
      .def("center", &CameraPose::center);

  m.def("look_at_pose", &look_at_pose, py::arg("azimuth_deg"),
        py::arg("elevation_deg"), py::arg("radius"));
  m.def(
      "tilt_trajectory",
      [](const TrajectoryConfig& cfg) {
        py::list out;
        for (const auto& [role, pose] : tilt_trajectory(cfg))
          out.append(py::make_tuple(role.str(), pose));
        return out;
      },
      py::arg("config"), "list of (role string, CameraPose)");
  m.def(
      "assign_ref_cond",
      [](int slot, int num_interp) {
        const RefCondAssignment a = assign_ref_cond(slot, num_interp);
        return py::make_tuple(a.ref_index, a.cond_index);
      },
      py::arg("slot"), py::arg("num_interp"));

  // --- diffusion ------------------------------------------------------
  py::class_<DiffusionSchedule>(m, "DiffusionSchedule")
      .def_readonly("steps", &DiffusionSchedule::steps)
      .def_readonly("beta", &DiffusionSchedule::beta)
      .def_readonly("alpha", &DiffusionSchedule::alpha)
      .def_readonly("alpha_bar", &DiffusionSchedule::alpha_bar);

  m.def("make_schedule", &make_schedule, py::arg("steps"),
        py::arg("beta_start"), py::arg("beta_end"));
  m.def(
      "q_sample",
      [](const py::array_t<double, py::array::c_style | py::array::forcecast>& x0, int t,
         const py::array_t<double, py::array::c_style | py::array::forcecast>& eps,
         const DiffusionSchedule& schedule) {
        return array_from_image(
            q_sample(image_from_array(x0), t, image_from_array(eps), schedule));
      },
      py::arg("x0"), py::arg("t"), py::arg("eps"), py::arg("schedule"));

  // --- fusion ---------------------------------------------------------
  m.def(
      "cross_modal_attention",
      [](const Eigen::MatrixXd& p, const Eigen::MatrixXd& f,
         const Eigen::MatrixXd& wq, const Eigen::MatrixXd& wk,
         const Eigen::MatrixXd& wv, int heads) {
        return cross_modal_attention(p, f, attention_from(wq, wk, wv, heads));
      },
      py::arg("p"), py::arg("f"), py::arg("w_q"), py::arg("w_k"),
      py::arg("w_v"), py::arg("heads") = 1);
  m.def(
      "fuse",
      [](const Eigen::MatrixXd& p, const Eigen::MatrixXd& f,
         const Eigen::MatrixXd& wq, const Eigen::MatrixXd& wk,
         const Eigen::MatrixXd& wv, int heads) {
        return fuse(p, f, attention_from(wq, wk, wv, heads));
      },
      py::arg("p"), py::arg("f"), py::arg("w_q"), py::arg("w_k"),
      py::arg("w_v"), py::arg("heads") = 1);

  // --- tri-plane field ------------------------------------------------
  py::class_<TriPlane>(m, "TriPlane")
      .def_static("zeros", &TriPlane::zeros, py::arg("resolution"),
                  py::arg("features"))
      .def_readonly("resolution", &TriPlane::resolution)
      .def_readonly("features", &TriPlane::features)
      .def("plane", [](const TriPlane& tp, int i) { return tp.planes.at(i); })
      .def("set_plane",
           [](TriPlane& tp, int i, const Eigen::MatrixXd& v) {
             if (v.rows() != tp.planes.at(i).rows() ||
                 v.cols() != tp.planes.at(i).cols())
               throw py::value_error("plane shape mismatch");
             tp.planes.at(static_cast<size_t>(i)) = v;
           })
      .def("sample", [](const TriPlane& tp, const Eigen::Vector3d& point) {
        return sample_triplane(tp, point);
      });

  // --- analytic shapes & rendering -------------------------------------
  m.def(
      "render_shape_view",
      [](const std::string& kind, double azimuth_deg, double elevation_deg,
         double radius, int size, int n_samples) {
        RenderConfig rc;
        rc.width = rc.height = size;
        rc.n_samples = n_samples;
        const AnalyticShape shape = make_shape(shape_kind_from(kind));
        const RenderedView v = render_view(
            field_from_shape(shape),
            look_at_pose(azimuth_deg, elevation_deg, radius), rc);
        py::dict out;
        out["rgb"] = array_from_image(v.rgb);
        out["depth"] = array_from_image(v.depth);
        out["normal"] = array_from_image(v.normal);
        out["mask"] = array_from_image(v.mask);
        return out;
      },
      py::arg("kind"), py::arg("azimuth_deg"), py::arg("elevation_deg"),
      py::arg("radius") = 2.0, py::arg("size") = 64, py::arg("n_samples") = 64);

  m.def(
      "extract_shape_mesh",
      [](const std::string& kind, int grid) {
        return mesh_to_arrays(
            extract_shape_mesh(make_shape(shape_kind_from(kind)), grid));
      },
      py::arg("kind"), py::arg("grid") = 64);

  // --- metrics ---------------------------------------------------------
  m.def(
      "chamfer_distance",
      [](const py::array_t<double, py::array::c_style | py::array::forcecast>& a,
         const py::array_t<double, py::array::c_style | py::array::forcecast>& b) {
        return chamfer_distance(points_from_array(a), points_from_array(b));
      },
      py::arg("a"), py::arg("b"));
  m.def(
      "volume_iou",
      [](const py::array_t<double, py::array::c_style | py::array::forcecast>& va,
         const py::array_t<int64_t, py::array::c_style | py::array::forcecast>& fa,
         const py::array_t<double, py::array::c_style | py::array::forcecast>& vb,
         const py::array_t<int64_t, py::array::c_style | py::array::forcecast>& fb,
         int resolution) {
        return volume_iou(mesh_from_arrays(va, fa), mesh_from_arrays(vb, fb),
                          resolution);
      },
      py::arg("vertices_a"), py::arg("faces_a"), py::arg("vertices_b"),
      py::arg("faces_b"), py::arg("resolution") = 64);
  m.def(
      "psnr",
      [](const py::array_t<double, py::array::c_style | py::array::forcecast>& a,
         const py::array_t<double, py::array::c_style | py::array::forcecast>& b) {
        return psnr(image_from_array(a), image_from_array(b));
      },
      py::arg("a"), py::arg("b"));
  m.def(
      "ssim",
      [](const py::array_t<double, py::array::c_style | py::array::forcecast>& a,
         const py::array_t<double, py::array::c_style | py::array::forcecast>& b) {
        return ssim(image_from_array(a), image_from_array(b));
      },
      py::arg("a"), py::arg("b"));
}

#include <rgpe/harness.hpp>

#include <gtest/gtest.h>

#include <atomic>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace rgpe;

namespace {

Problem small_problem(double theta = 0.0) {
  RunConfig c;
  c.half_width = {6.0, 6.0};
  c.size = {16, 16};
  c.T = 1.0;
  c.theta = theta;
  return Problem::from_config(c);
}

std::filesystem::path temp_dir(const std::string& name) {
  auto d = std::filesystem::temp_directory_path() / ("rgpe-test-" + name);
  std::filesystem::remove_all(d);
  return d;
}

} // namespace

TEST(ParallelFor, VisitsEveryIndexOnceAndPropagatesErrors) {
  for (int workers : {1, 3, 8}) {
    std::vector<std::atomic<int>> hits(37);
    parallel_for(hits.size(), workers, [&](std::size_t i) { hits[i]++; });
    for (const auto& h : hits)
      EXPECT_EQ(h.load(), 1);
  }
  EXPECT_THROW(parallel_for(5, 2,
                            [](std::size_t i) {
                              if (i == 3)
                                throw RuntimeError("boom");
                            }),
               RuntimeError);
}

TEST(Csv, HeaderAndDivergentRows) {
  std::vector<ConvergenceRow> rows(2);
  rows[0] = {"cf2+strang", 0.25, 4, 1.5e-3, 8, 1.0, false};
  rows[1] = {"cf2+strang", 0.5, 2, std::numeric_limits<double>::infinity(), 0, 0.5, true};
  std::ostringstream os;
  write_csv(os, rows);
  std::istringstream is(os.str());
  std::string line;
  std::getline(is, line);
  EXPECT_EQ(line, "method,h,n_steps,l2_error,transform_pairs,wall_ms");
  std::getline(is, line);
  EXPECT_EQ(line.rfind("cf2+strang,0.25,4,", 0), 0u);
  std::getline(is, line);
  EXPECT_NE(line.find(",inf,"), std::string::npos);
}

TEST(ConvergenceStudy, RowsOrderedAndErrorsDecrease) {
  const auto p = small_problem();
  ReferenceSettings ref;
  ref.refine = 8;
  const auto study = convergence_study(p, {"cf2+strang", "cf4af+rkn74"}, {16, 4, 8}, ref, 2);
  ASSERT_EQ(study.rows.size(), 6u);
  EXPECT_EQ(study.reference.n_steps, 128);
  EXPECT_LT(study.reference.self_check, 1e-11);
  EXPECT_EQ(study.rows[0].method, "cf2+strang");
  EXPECT_EQ(study.rows[3].method, "cf4af+rkn74");
  const std::vector<int> expected_steps = {4, 8, 16};
  for (std::size_t i = 0; i < 6; ++i) {
    EXPECT_EQ(study.rows[i].n_steps, expected_steps[i % 3]);
    EXPECT_EQ(study.rows[i].transform_pairs,
              static_cast<std::uint64_t>(study.rows[i].n_steps) * (i < 3 ? 2u : 18u));
  }
  std::vector<double> hs, es;
  for (std::size_t i = 0; i < 3; ++i) {
    hs.push_back(study.rows[i].h);
    es.push_back(study.rows[i].l2_error);
    EXPECT_LT(study.rows[i + 3].l2_error, study.rows[i].l2_error);
  }
  EXPECT_NEAR(oracle::observed_order(hs, es), 2.0, 0.2);

  ReferenceSettings coarse = ref;
  coarse.refine = 3;
  EXPECT_THROW(convergence_study(p, {"cf2+strang"}, {4, 8}, coarse), ValidationError);
  EXPECT_THROW(convergence_study(p, {"cf2+strang"}, {4, 4}, ref), ValidationError);
  ReferenceSettings strict = ref;
  strict.method = "cf2+strang";
  strict.tolerance = 1e-14;
  EXPECT_THROW(convergence_study(p, {"cf2+strang"}, {4, 8}, strict), RuntimeError);
}

TEST(SelfConvergence, SlopeAndValidation) {
  const auto p = small_problem(1.0);
  EXPECT_THROW(self_convergence(p, "cf2+strang", {4, 8, 16}), ValidationError);
  const auto r = self_convergence(p, "cf2+strang", {4, 8, 16, 32});
  EXPECT_EQ(r.rows.size(), 4u);
  EXPECT_NEAR(r.slope, 2.0, 0.2);
}

TEST(Vortices, SingleVortexAtOrigin) {
  auto g = make_grid(2, {8.0, 8.0}, {64, 64});
  const auto v = find_vortices(initial_vortex(g), 5.0);
  ASSERT_EQ(v.size(), 1u);
  EXPECT_EQ(v[0].charge, 1);
  EXPECT_LT(std::hypot(v[0].x, v[0].y), g->spacing(0));
  EXPECT_TRUE(find_vortices(initial_gaussian(g, std::vector<double>{1.0, 1.0}), 5.0).empty());
}

TEST(LabFrame, DensityAtZeroAngleEqualsRotating) {
  auto g = make_grid(2, {6.0, 6.0}, {32, 32});
  const Field f = initial_gaussian(g, std::vector<double>{1.1, 0.9});
  const auto lab = lab_frame_density(f, RotationSchedule::linear(0.5));
  for (std::size_t i = 0; i < f.size(); ++i)
    EXPECT_NEAR(lab[i], std::norm(f[i]), 1e-12);

  // A quarter turn maps the anisotropic Gaussian onto its transpose.
  Field turned = f;
  turned.set_time(std::numbers::pi);
  const auto q = lab_frame_density(turned, RotationSchedule::linear(0.5));
  double worst = 0.0;
  for (std::size_t i = 0; i < 32; ++i)
    for (std::size_t j = 0; j < 32; ++j)
      worst = std::max(worst, std::abs(q[i * 32 + j] - std::norm(f[j * 32 + i])));
  EXPECT_LT(worst, 1e-8);
}

TEST(Simulate, WritesSnapshotsAndPreservesNorm) {
  const auto p = small_problem(2.0);
  SnapshotRequest req;
  req.times = {0.0, 0.5, 1.0};
  req.directory = temp_dir("simulate");
  const auto r = simulate(p, Method::parse("cf4af+rkn74"), 8, req);
  EXPECT_LT(r.norm_drift(), 1e-12);
  EXPECT_EQ(r.snapshots.size(), 6u);
  for (const auto& path : r.snapshots)
    EXPECT_TRUE(std::filesystem::exists(path)) << path;
  const Field back = read_field_dump(req.directory / (snapshot_stem(1.0, false) + ".rgpe"));
  EXPECT_EQ(l2_error(back, r.field), 0.0);

  std::ifstream txt(req.directory / (snapshot_stem(0.5, false) + "_density.txt"));
  std::string header;
  std::getline(txt, header);
  EXPECT_EQ(header[0], '#');
  std::filesystem::remove_all(req.directory);
}

TEST(Simulate, RealImagAndLabFrameOutputs) {
  const auto p = small_problem();
  SnapshotRequest req;
  req.times = {1.0};
  req.directory = temp_dir("realimag");
  req.quantity = SnapshotQuantity::real_imag;
  EXPECT_EQ(simulate(p, Method::parse("cf2+strang"), 4, req).snapshots.size(), 3u);
  req.quantity = SnapshotQuantity::density;
  req.lab_frame = true;
  const auto r = simulate(p, Method::parse("cf2+strang"), 4, req);
  ASSERT_EQ(r.snapshots.size(), 2u);
  EXPECT_NE(r.snapshots[1].filename().string().find("_lab"), std::string::npos);
  std::filesystem::remove_all(req.directory);
}

TEST(Simulate, DivergenceWritesPartialSnapshot) {
  auto p = small_problem();
  p.model.custom_nonlinearity = Nonlinearity([](double rho) { return rho > 0.9 ? std::numeric_limits<double>::infinity() : 0.0; });
  SnapshotRequest req;
  req.times = {1.0};
  req.directory = temp_dir("partial");
  EXPECT_THROW(simulate(p, Method::parse("cf2+strang"), 4, req), DivergenceError);
  bool found = false;
  for (const auto& e : std::filesystem::directory_iterator(req.directory))
    found = found || e.path().filename().string().rfind("partial", 0) == 0;
  EXPECT_TRUE(found);
  std::filesystem::remove_all(req.directory);
}

TEST(Reference, NormProjectionOnlyRemovesDrift) {
  const auto p = small_problem(5.0);
  const auto m = Method::parse("cf4af+rkn74");
  const Field projected = evolve_norm_projected(p, m, 32);
  const Field plain = evolve(p.initial, p.t0, p.T, 32, m, p.model).field;
  EXPECT_NEAR(l2_norm(projected), l2_norm(p.initial), 1e-15 * l2_norm(p.initial));
  EXPECT_LT(l2_error(projected, plain), 1e-12);
  EXPECT_EQ(projected.time(), p.T);
}

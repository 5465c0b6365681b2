#include <gtest/gtest.h>

#include <algorithm>

#include "interceptlab/bench.hpp"

using namespace interceptlab;

namespace {

RunReport report(const std::string& method, const std::string& traj,
                 std::vector<std::pair<double, double>> events, double duration = 100.0) {
  RunReport r;
  r.method = method;
  r.trajectory = traj;
  r.duration = duration;
  for (auto [t, acc] : events) r.events.push_back({t, acc, Vec3::Zero()});
  return r;
}

EstErrorSample sample(const Vec3& p, const Vec3& v) { return {0.0, p, v}; }

}  // namespace

TEST(MetricEx, SingleSamples) {
  auto m = metric_ex({sample(Vec3(1, 0, 0), Vec3::Zero())});
  EXPECT_DOUBLE_EQ(m.e_x, 1.0);
  EXPECT_DOUBLE_EQ(m.e_p, 1.0);
  EXPECT_DOUBLE_EQ(m.e_v, 0.0);
  EXPECT_DOUBLE_EQ(metric_ex({sample(Vec3::Zero(), Vec3(2, 0, 0))}, 1.0).e_x, 2.0);
  EXPECT_DOUBLE_EQ(metric_ex({sample(Vec3(3, 0, 0), Vec3(4, 0, 0))}).e_x, 5.0);
}

TEST(MetricEx, ZeroWeightIgnoresVelocity) {
  const std::vector<EstErrorSample> s = {sample(Vec3(1, 2, 0), Vec3(5, 0, 0)),
                                         sample(Vec3(0, 0, 3), Vec3(0, 1, 1))};
  const auto m = metric_ex(s, 0.0);
  EXPECT_DOUBLE_EQ(m.e_x, m.e_p);
  EXPECT_NEAR(m.e_p, std::sqrt((5.0 + 9.0) / 2.0), 1e-15);
}

TEST(MetricEx, EmptyIsError) { EXPECT_THROW(metric_ex({}), MetricError); }

TEST(Aggregate, HalfTheTrajectories) {
  const BenchTable t = aggregate({report("epn", "a", {{5.0, 0.1}}), report("epn", "b", {})});
  const BenchRow* r = t.find("epn");
  ASSERT_NE(r, nullptr);
  EXPECT_DOUBLE_EQ(r->pct_trajectories_with_interception, 50.0);
  EXPECT_EQ(r->trajectories, 2);
  EXPECT_EQ(r->trajectories_with_interception, 1);
  EXPECT_DOUBLE_EQ(r->mean_interceptions_per_trajectory, 0.5);
}

TEST(Aggregate, DirectMeansForOneReport) {
  const BenchRow r = aggregate({report("lpn", "a", {{3.0, 0.2}, {7.0, 0.4}})}).rows.at(0);
  EXPECT_DOUBLE_EQ(*r.mean_time_to_first, 3.0);
  EXPECT_DOUBLE_EQ(*r.mean_accuracy_all, 0.3);
  EXPECT_DOUBLE_EQ(*r.mean_accuracy_first, 0.2);
  EXPECT_DOUBLE_EQ(r.mean_interceptions_per_trajectory, 2.0);
}

TEST(Aggregate, NoEventsLeavesFirstMetricsAbsent) {
  const BenchRow r = aggregate({report("pp", "a", {}), report("pp", "b", {}, 50.0)}).rows.at(0);
  EXPECT_DOUBLE_EQ(r.pct_trajectories_with_interception, 0.0);
  EXPECT_FALSE(r.mean_time_to_first);
  EXPECT_FALSE(r.mean_accuracy_all);
  EXPECT_FALSE(r.e_x);
  EXPECT_DOUBLE_EQ(r.mean_time_to_first_imputed, 75.0);
}

TEST(Aggregate, RowsPerMethodAndOrderInvariance) {
  std::vector<RunReport> reps = {
      report("epn", "a", {{1.0, 0.1}}), report("epn", "a", {}),        report("epn", "b", {{2.0, 0.3}}),
      report("lpn", "a", {{4.0, 0.5}}), report("lpn", "b", {{9.0, 0.2}, {12.0, 0.1}})};
  reps[0].compute_times = {1e-4, 3e-4};
  reps[1].est_samples = {sample(Vec3(1, 0, 0), Vec3::Zero())};
  const BenchTable t = aggregate(reps);
  ASSERT_EQ(t.rows.size(), 2u);
  EXPECT_EQ(t.rows[0].method, "epn");
  EXPECT_EQ(t.rows[1].method, "lpn");
  // per-trajectory fractions: a = 1/2, b = 1
  EXPECT_DOUBLE_EQ(t.rows[0].pct_trajectories_with_interception, 75.0);
  EXPECT_DOUBLE_EQ(*t.rows[0].mean_compute_time, 2e-4);
  EXPECT_DOUBLE_EQ(*t.rows[0].e_p, 1.0);
  EXPECT_EQ(t.rows[0].runs, 3);

  std::reverse(reps.begin(), reps.end());
  const BenchTable u = aggregate(reps);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_EQ(t.rows[i].mean_interceptions_per_trajectory, u.rows[i].mean_interceptions_per_trajectory);
    EXPECT_EQ(t.rows[i].mean_time_to_first, u.rows[i].mean_time_to_first);
    EXPECT_EQ(t.rows[i].mean_accuracy_all, u.rows[i].mean_accuracy_all);
  }
}

TEST(ParallelMap, ResultsByIndexForAnyJobCount) {
  for (int jobs : {1, 2, 8}) {
    const auto v = parallel_map<int>(100, jobs, [](std::size_t i) { return static_cast<int>(i * i); });
    ASSERT_EQ(v.size(), 100u);
    for (std::size_t i = 0; i < v.size(); ++i) EXPECT_EQ(v[i], static_cast<int>(i * i));
  }
}

TEST(ParallelMap, PropagatesExceptions) {
  auto fn = [](std::size_t i) -> int {
    if (i == 17) throw ScenarioError("boom");
    return 0;
  };
  EXPECT_THROW(parallel_map<int>(40, 4, fn), ScenarioError);
}

TEST(ExpandBatch, StartsSharedAcrossMethods) {
  BatchSpec spec;
  RandomTrajSpec rs;
  rs.duration = 10;
  spec.trajectories = {{"t0", std::make_shared<Trajectory>(gen_random(1, rs))},
                       {"t1", std::make_shared<Trajectory>(gen_random(2, rs))}};
  spec.methods = {method_from_name("lpn"), method_from_name("epn")};
  spec.starts = 3;
  const auto sc = expand_batch(spec);
  ASSERT_EQ(sc.size(), 12u);
  for (std::size_t i = 0; i < 6; ++i) {
    EXPECT_EQ(sc[i].start.p, sc[i + 6].start.p);
    EXPECT_EQ(sc[i].seed, sc[i + 6].seed);
    EXPECT_EQ(sc[i].method.name, "lpn");
  }
  EXPECT_NE(sc[0].seed, sc[1].seed);
  spec.starts = 0;
  EXPECT_THROW(expand_batch(spec), ParameterError);
  spec.starts = 1;
  spec.trajectories.clear();
  EXPECT_THROW(expand_batch(spec), ParameterError);
}

TEST(RunBatch, JobCountDoesNotChangeResults) {
  BatchSpec spec;
  RandomTrajSpec rs;
  rs.duration = 20;
  for (int i = 0; i < 3; ++i)
    spec.trajectories.push_back({"t" + std::to_string(i), std::make_shared<Trajectory>(gen_random(10 + i, rs))});
  spec.methods = {method_from_name("epn"), method_from_name("pp")};
  spec.starts = 2;
  spec.base.duration = 20;
  spec.base.truth_feed = false;
  const auto sc = expand_batch(spec);
  const auto a = run_batch(sc, 1), b = run_batch(sc, 4);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    ASSERT_EQ(a[i].events.size(), b[i].events.size());
    for (std::size_t k = 0; k < a[i].events.size(); ++k) EXPECT_EQ(a[i].events[k].time, b[i].events[k].time);
    EXPECT_EQ(a[i].detections, b[i].detections);
  }
}

TEST(GridSearch, FindsUniqueMaximum) {
  const std::vector<GridAxis> axes = {{"a", linspace(-2, 2, 9)}, {"b", linspace(0, 1, 5)}};
  const GridResult r = grid_search(axes, [](const std::vector<double>& v) {
    return std::make_pair(-(v[0] - 0.5) * (v[0] - 0.5) - (v[1] - 0.75) * (v[1] - 0.75), 0.0);
  });
  // enumeration oracle
  double best = -kInf;
  std::vector<double> arg;
  for (double a : axes[0].values)
    for (double b : axes[1].values) {
      const double f = -(a - 0.5) * (a - 0.5) - (b - 0.75) * (b - 0.75);
      if (f > best) {
        best = f;
        arg = {a, b};
      }
    }
  EXPECT_EQ(r.best_point().values, arg);
  EXPECT_EQ(r.points.size(), 45u);
}

TEST(GridSearch, SecondaryBreaksPrimaryTies) {
  const GridResult r = grid_search({{"x", {1, 2, 3, 4}}}, [](const std::vector<double>& v) {
    return std::make_pair(1.0, v[0] == 3 ? 10.0 : 1.0);
  });
  EXPECT_EQ(r.best_point().values[0], 3.0);
}

TEST(GridSearch, ExactTieGoesToLowerTuple) {
  const GridResult r = grid_search({{"x", {3, 1, 2}}, {"y", {5, 4}}}, [](const std::vector<double>& v) {
    return std::make_pair(v[0] >= 2 ? 1.0 : 0.0, 0.0);
  });
  EXPECT_EQ(r.best_point().values, (std::vector<double>{2, 4}));
}

TEST(GridSearch, ParallelMatchesSerial) {
  const std::vector<GridAxis> axes = {{"x", linspace(0, 1, 7)}, {"y", linspace(0, 1, 7)}};
  auto f = [](const std::vector<double>& v) { return std::make_pair(std::sin(7 * v[0]) * v[1], v[0]); };
  EXPECT_EQ(grid_search(axes, f, 1).best, grid_search(axes, f, 4).best);
  EXPECT_THROW(grid_search({}, f), TuningError);
  EXPECT_THROW(grid_search({{"x", {}}}, f), TuningError);
}

TEST(GridAxes, Spacing) {
  const auto l = logspace(1, 100, 3);
  EXPECT_NEAR(l[1], 10.0, 1e-12);
  EXPECT_EQ(linspace(2, 3, 1), std::vector<double>{2});
  EXPECT_THROW(logspace(0, 1, 3), ParameterError);
  const auto axes = default_guidance_axes(GuidanceLaw::EPN, 5);
  ASSERT_EQ(axes.size(), 2u);
  EXPECT_NEAR(axes[0].values.front(), 19.7 / 10, 1e-12);
  EXPECT_NEAR(axes[0].values.back(), 19.7 * 10, 1e-9);
}

TEST(TuneGuidance, PicksAWorkingGain) {
  RandomTrajSpec rs;
  rs.duration = 60;
  rs.mean_speed = 1.0;
  rs.max_speed = 2.0;
  BatchSpec bs;
  bs.trajectories = {{"t", std::make_shared<Trajectory>(gen_random(21, rs))}};
  bs.methods = {method_from_name("pp")};
  bs.starts = 3;
  bs.base.duration = 60;
  GuidanceTuneSpec spec;
  spec.base = pp_preset();
  spec.axes = {{"G", {0.0, 0.83}}};
  const GridResult r = tune_guidance(spec, expand_batch(bs));
  EXPECT_EQ(r.points[0].primary, 0.0);
  EXPECT_EQ(r.best_point().values[0], 0.83);
  GuidanceTuneSpec bad = spec;
  bad.axes = {{"Q", {1.0}}};
  EXPECT_THROW(tune_guidance(bad, expand_batch(bs)), ParameterError);
}

TEST(Bfgs, QuadraticMinimum) {
  Eigen::Matrix3d A;
  A << 4, 1, 0, 1, 3, 0.5, 0, 0.5, 2;
  const Eigen::Vector3d b(1, -2, 0.5);
  auto f = [&](const VecX& x) { return 0.5 * x.dot(A * x) - b.dot(x) + 3.0; };
  const BfgsResult r = bfgs_minimize(f, VecX::Constant(3, 5.0));
  const Eigen::Vector3d xs = A.ldlt().solve(b);
  EXPECT_LT((r.x - xs).cwiseAbs().maxCoeff(), 1e-5);
}

TEST(Bfgs, Rosenbrock) {
  auto f = [](const VecX& x) {
    return 100 * std::pow(x[1] - x[0] * x[0], 2) + std::pow(1 - x[0], 2);
  };
  BfgsSettings s;
  s.max_iter = 500;
  VecX x0(2);
  x0 << -1.2, 1.0;
  const BfgsResult r = bfgs_minimize(f, x0, s);
  EXPECT_LT((r.x - Eigen::Vector2d(1, 1)).norm(), 1e-3);
}

TEST(Bfgs, ZeroBudgetAndNonFiniteStart) {
  auto f = [](const VecX& x) { return x.squaredNorm(); };
  BfgsSettings s;
  s.max_iter = 0;
  const VecX x0 = VecX::Constant(2, 3.0);
  EXPECT_EQ(bfgs_minimize(f, x0, s).x, x0);
  EXPECT_THROW(bfgs_minimize([](const VecX&) { return std::nan(""); }, x0), TuningError);
}

namespace {

// CV target driven by white acceleration of known stdev, measured with
// known isotropic noise.
DetectionLog cv_log(double sigma_a, double sigma_z, double duration, std::uint64_t seed) {
  const double dt = 0.1;
  const LinearModel m = build_model({MotionModel::CV, dt, sigma_a, 0.0});
  const MatX L = cholesky_psd(m.Xi, 0.0);
  Rng rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  State9 x = State9::Zero();
  x.segment<3>(3) = Vec3(2, -1, 0);
  DetectionLog log;
  for (int k = 0; k * dt <= duration + 1e-9; ++k) {
    if (k > 0) {
      Eigen::Matrix<double, 9, 1> e;
      for (int i = 0; i < 9; ++i) e[i] = g(rng);
      x = m.A * x + L * e;
    }
    LogEntry le;
    le.time = k * dt;
    le.p_true = x.segment<3>(0);
    le.v_true = x.segment<3>(3);
    Detection d;
    d.time = le.time;
    d.Z = sigma_z * sigma_z * Mat3::Identity();
    d.z = le.p_true + sigma_z * Vec3(g(rng), g(rng), g(rng));
    le.detection = d;
    log.push_back(le);
  }
  return log;
}

}  // namespace

TEST(TuneFilter, RecoversWhiteAccelerationLevel) {
  const double sigma_a = 1.0;
  FilterTuneSpec spec;
  spec.initial.kind = FilterKind::CV;
  spec.initial.cov_mode = CovarianceMode::Reported;
  spec.initial.sigma_a = 8.0;
  spec.params = {"sigma_a"};
  const FilterTuneResult r = tune_filter(spec, {cv_log(sigma_a, 0.1, 60.0, 5)});
  EXPECT_LT(r.e_x, r.initial_e_x);
  EXPECT_GT(r.params.sigma_a, sigma_a / 2);
  EXPECT_LT(r.params.sigma_a, sigma_a * 2);
}

TEST(TuneFilter, ZeroBudgetReturnsInitial) {
  FilterTuneSpec spec;
  spec.initial.kind = FilterKind::IMM;
  spec.initial.cov_mode = CovarianceMode::Reported;
  spec.bfgs.max_iter = 0;
  const FilterTuneResult r = tune_filter(spec, {cv_log(1.0, 0.1, 10.0, 6)});
  EXPECT_EQ(r.params.sigma_a, spec.initial.sigma_a);
  EXPECT_EQ(r.params.p_cv_to_ca, spec.initial.p_cv_to_ca);
  EXPECT_EQ(r.e_x, r.initial_e_x);
}

TEST(TuneFilter, Errors) {
  FilterTuneSpec spec;
  EXPECT_THROW(tune_filter(spec, {}), TuningError);
  // a log that never reaches the warm-up window has no samples
  spec.warmup = 1e6;
  EXPECT_THROW(tune_filter(spec, {cv_log(1.0, 0.1, 5.0, 7)}), TuningError);
  spec.warmup = 2.0;
  spec.params = {"bogus"};
  EXPECT_THROW(tune_filter(spec, {cv_log(1.0, 0.1, 5.0, 7)}), Error);
}

TEST(TuneFilter, DefaultParameterSets) {
  FilterParams p;
  p.kind = FilterKind::CV;
  p.cov_mode = CovarianceMode::Reported;
  EXPECT_EQ(default_tuned_params(p), std::vector<std::string>{"sigma_a"});
  p.kind = FilterKind::IMM;
  p.cov_mode = CovarianceMode::MotionDependent;
  const auto names = default_tuned_params(p);
  EXPECT_NE(std::find(names.begin(), names.end(), "c_alpha"), names.end());
  EXPECT_NE(std::find(names.begin(), names.end(), "p_ca_to_cv"), names.end());
  for (const auto& n : names) {
    const double v = 0.037;
    EXPECT_NEAR(detail::from_internal(n, detail::to_internal(n, v)), v, 1e-12) << n;
  }
}

TEST(ModeSwitching, AlternatesSegments) {
  ModeSwitchSpec spec;
  const Trajectory tr = gen_mode_switching(3, spec);
  EXPECT_NEAR(tr.duration(), spec.segment * spec.segments, 1e-9);
  const TrajStats s = stats(tr);
  EXPECT_LE(s.max_speed, spec.max_speed + 1e-6);
  // CV segments have zero acceleration, CA segments a constant one in the band
  const auto mid = [&](int seg) {
    return tr.acceleration(static_cast<std::size_t>((seg + 0.5) * spec.segment / spec.dt)).norm();
  };
  EXPECT_LT(mid(0), 1e-6);
  EXPECT_GE(mid(1), spec.min_accel - 1e-6);
  EXPECT_LE(mid(1), spec.max_accel + 1e-6);
  EXPECT_LT(mid(2), 1e-6);
  for (const auto& p : tr.positions) EXPECT_NEAR(p.z(), spec.altitude, 1e-9);
  EXPECT_EQ(gen_mode_switching(3, spec).positions, tr.positions);
}

TEST(DetectionLog, ObserverProfiles) {
  const Trajectory tr = gen_mode_switching(4);
  DetectionLogSpec spec;
  const DetectionLog man = make_detection_log(tr, 1, spec);
  EXPECT_EQ(man.size(), 1201u);
  double peak = 0.0;
  for (const auto& e : man) {
    ASSERT_TRUE(e.detection);
    EXPECT_GE(e.detection->range, spec.min_range - 1e-9);
    EXPECT_LE(e.detection->range, spec.max_range + 1e-9);
    peak = std::max(peak, e.detection->observer.omega.cwiseAbs().maxCoeff());
    // per-axis orientation stdev within the maneuvering band
    const Mat3 sa = orientation_cov(e.detection->observer.omega, spec.sensor.c_alpha);
    EXPECT_LE(std::sqrt(sa.diagonal().maxCoeff()), 0.011 + 1e-12);
  }
  EXPECT_GT(peak, 2.0);
  spec.motion = ObserverMotion::Hovering;
  for (const auto& e : make_detection_log(tr, 1, spec)) EXPECT_TRUE(e.detection->observer.omega.isZero());
}

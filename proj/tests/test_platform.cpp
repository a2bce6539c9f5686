#include <gtest/gtest.h>

#include <algorithm>
#include <chrono>
#include <thread>
#include <vector>

#include "asl/platform.hpp"

using namespace asl;

namespace {

const EmulationProfile& profile() {
  static const EmulationProfile p = calibrate_with_retry(4.7).profile;
  return p;
}

std::uint64_t time_work(std::uint64_t base, CoreClass cls, const EmulationProfile& p) {
  std::uint64_t t0 = now_ns();
  emulated_work(base, cls, p);
  return now_ns() - t0;
}

std::uint64_t median_work(std::uint64_t base, CoreClass cls, const EmulationProfile& p, int n) {
  std::vector<std::uint64_t> v;
  for (int i = 0; i < n; ++i) v.push_back(time_work(base, cls, p));
  std::sort(v.begin(), v.end());
  return v[v.size() / 2];
}

}  // namespace

TEST(Clock, ConsecutiveReadsAreMonotonic) {
  std::uint64_t prev = now_ns();
  for (int i = 0; i < 100000; ++i) {
    std::uint64_t t = now_ns();
    ASSERT_LE(prev, t);
    prev = t;
  }
}

TEST(Clock, OneMillisecondSleepIsCoarselyRight) {
  std::uint64_t t0 = now_ns();
  std::this_thread::sleep_for(std::chrono::milliseconds(1));
  std::uint64_t dt = now_ns() - t0;
  EXPECT_GE(dt, 1'000'000u);
  EXPECT_LE(dt, 5'000'000u);
}

TEST(Clock, MedianCallCostBelowOneMicrosecond) {
  constexpr int kBatches = 1000, kPerBatch = 1000;
  std::vector<std::uint64_t> per_call;
  for (int b = 0; b < kBatches; ++b) {
    std::uint64_t t0 = now_ns();
    for (int i = 0; i < kPerBatch; ++i) (void)now_ns();
    per_call.push_back((now_ns() - t0) / kPerBatch);
  }
  std::sort(per_call.begin(), per_call.end());
  EXPECT_LT(per_call[per_call.size() / 2], 1000u);
}

TEST(CoreClass, ParseAndPrint) {
  EXPECT_EQ(parse_core_class("big"), CoreClass::Big);
  EXPECT_EQ(parse_core_class("LITTLE"), CoreClass::Little);
  EXPECT_FALSE(parse_core_class("medium"));
  EXPECT_EQ(to_string(CoreClass::Little), "little");
}

TEST(CoreTypeMap, ParsesRanges) {
  auto m = CoreTypeMap::parse("0-3:big, 4-7:little");
  EXPECT_EQ(m.size(), 8u);
  EXPECT_EQ(m.lookup(0), CoreClass::Big);
  EXPECT_EQ(m.lookup(3), CoreClass::Big);
  EXPECT_EQ(m.lookup(5), CoreClass::Little);
  EXPECT_FALSE(m.lookup(8));
  EXPECT_EQ(CoreTypeMap::parse(m.to_spec()).entries(), m.entries());
}

TEST(CoreTypeMap, RejectsMalformedSpecs) {
  EXPECT_THROW(CoreTypeMap::parse("0-3"), ConfigError);
  EXPECT_THROW(CoreTypeMap::parse("0-3:huge"), ConfigError);
  EXPECT_THROW(CoreTypeMap::parse("3-1:big"), ConfigError);
  EXPECT_THROW(CoreTypeMap::parse("x:big"), ConfigError);
}

TEST(Classify, DeclaredLittleWinsOverMap) {
  CoreTypeMap all_big;
  for (int c : allowed_cores()) all_big.set(c, CoreClass::Big);
  declare_thread_class(CoreClass::Little);
  EXPECT_EQ(classify_current_core(all_big), CoreClass::Little);
  clear_thread_class();
  EXPECT_EQ(classify_current_core(all_big), CoreClass::Big);
}

TEST(Classify, MapLookupUsesCurrentCore) {
  CoreTypeMap m = CoreTypeMap::parse("0-3:big,4-7:little");
  int core = current_core_id();
  ASSERT_GE(core, 0);
  CoreTypeMap mine;
  mine.set(core, CoreClass::Little);
  EXPECT_EQ(classify_current_core(mine), CoreClass::Little);
  if (core >= 0 && core <= 7) {
    EXPECT_EQ(classify_current_core(m), core >= 4 ? CoreClass::Little : CoreClass::Big);
  }
}

TEST(Classify, PinnedToCoreFiveIsLittleWhenAvailable) {
  auto cores = allowed_cores();
  if (std::find(cores.begin(), cores.end(), 5) == cores.end()) GTEST_SKIP() << "core 5 not available";
  std::thread t([] {
    ASSERT_EQ(pin_thread(5), PinStatus::pinned);
    EXPECT_EQ(classify_current_core(CoreTypeMap::parse("0-3:big,4-7:little")), CoreClass::Little);
  });
  t.join();
}

TEST(Classify, UnmappedCoreRejectedAtInstall) {
  CoreTypeMap empty_for_us;
  empty_for_us.set(100000, CoreClass::Big);
  EXPECT_THROW(install_core_map(empty_for_us), ConfigError);
  CoreTypeMap ok;
  for (int c : allowed_cores()) ok.set(c, CoreClass::Little);
  install_core_map(ok);
  EXPECT_EQ(current_core_class(), CoreClass::Little);
  EXPECT_FALSE(is_big_core());
  reset_core_map();
  EXPECT_TRUE(is_big_core());
}

TEST(Pinning, PinToFirstAllowedCore) {
  int target = allowed_cores().front();
  std::thread t([target] {
    ASSERT_EQ(pin_thread(target), PinStatus::pinned);
    for (int i = 0; i < 100; ++i) EXPECT_EQ(current_core_id(), target);
  });
  t.join();
}

TEST(Pinning, NonexistentCoreFails) {
  EXPECT_EQ(pin_thread(1 << 20), PinStatus::failed);
  EXPECT_EQ(pin_thread(-1), PinStatus::failed);
}

TEST(Emulation, BigWorkTakesAboutBase) {
  std::uint64_t m = median_work(100'000, CoreClass::Big, profile(), 21);
  EXPECT_GE(m, 90'000u);
  EXPECT_LE(m, 150'000u);
}

TEST(Emulation, LittleOneMicrosecondTakesAboutInflation) {
  // 1 us is close to clock resolution, so batch 100 calls per sample.
  std::vector<double> ratios;
  for (int i = 0; i < 21; ++i) {
    std::uint64_t t0 = now_ns();
    for (int k = 0; k < 100; ++k) emulated_work(1000, CoreClass::Little, profile());
    ratios.push_back(static_cast<double>(now_ns() - t0) / 100.0 / 1000.0);
  }
  std::sort(ratios.begin(), ratios.end());
  EXPECT_NEAR(ratios[ratios.size() / 2], 4.7, 4.7 * 0.2);
}

TEST(Emulation, LittleToBigRatioMedianWithinTwentyPercent) {
  std::vector<double> ratios;
  for (int i = 0; i < 1000; ++i) {
    double big = static_cast<double>(time_work(20'000, CoreClass::Big, profile()));
    double little = static_cast<double>(time_work(20'000, CoreClass::Little, profile()));
    ratios.push_back(little / big);
  }
  std::sort(ratios.begin(), ratios.end());
  EXPECT_NEAR(ratios[500], 4.7, 4.7 * 0.2);
}

TEST(Emulation, InflationOneMakesClassesIndistinguishable) {
  EmulationProfile p = profile();
  p.inflation = 1.0;
  EXPECT_EQ(iterations_for(5000, p), iterations_for(5000, p));
  double big = static_cast<double>(median_work(50'000, CoreClass::Big, p, 21));
  double little = static_cast<double>(median_work(50'000, CoreClass::Little, p, 21));
  EXPECT_NEAR(little / big, 1.0, 0.2);
}

TEST(Calibration, PassesSelfCheck) {
  CalibrationReport r = calibrate_with_retry(4.7);
  EXPECT_GT(r.profile.iterations_per_ns, 0.0);
  EXPECT_GE(r.check_measured_ns, r.check_target_ns * 9 / 10);
  EXPECT_LE(r.check_measured_ns, r.check_target_ns * 3 / 2);
}

TEST(Calibration, ZeroRateIsRejected) {
  EmulationProfile p;
  p.iterations_per_ns = 0.0;
  EXPECT_THROW(verify_profile(p), CalibrationError);
  EXPECT_THROW(calibrate_delay(0.5), CalibrationError);
}

TEST(Calibration, RepeatedRunsAgreeWithinTwentyFivePercent) {
  double a = calibrate_delay().profile.iterations_per_ns;
  double b = calibrate_delay().profile.iterations_per_ns;
  EXPECT_LE(std::max(a, b) / std::min(a, b), 1.25);
}

TEST(Calibration, LogLineMentionsRate) {
  CalibrationReport r = calibrate_with_retry();
  char buf[512] = {};
  std::FILE* f = fmemopen(buf, sizeof(buf) - 1, "w");
  log_calibration(r, f);
  std::fclose(f);
  EXPECT_NE(std::string(buf).find("iterations/ns"), std::string::npos);
}

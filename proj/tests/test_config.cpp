#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "asl/config.hpp"

using namespace asl;

namespace {

struct EnvGuard {
  explicit EnvGuard(const char* name, const char* value) : name_(name) { setenv(name, value, 1); }
  ~EnvGuard() { unsetenv(name_); }
  const char* name_;
};

std::string write_temp(const std::string& text) {
  auto path = std::filesystem::temp_directory_path() / ("asl_cfg_" + std::to_string(::getpid()) + ".conf");
  std::ofstream(path) << text;
  return path.string();
}

}  // namespace

TEST(Config, DefaultsWithoutFileOrEnvironment) {
  Settings s = load_settings();
  EXPECT_EQ(s.runtime.slo.pct, 99);
  EXPECT_EQ(s.runtime.slo.min_unit_ns, 100u);
  EXPECT_EQ(s.runtime.slo.max_window_ns, 100'000'000u);
  EXPECT_EQ(s.runtime.threshold_ns, 200u);
  EXPECT_EQ(s.runtime.max_epochs, 64);
  EXPECT_DOUBLE_EQ(s.emulate_a, 4.7);
  EXPECT_FALSE(s.core_map);
}

TEST(Config, ParsesFileWithComments) {
  Settings s;
  apply_config_text(s,
                    "# tuning\n"
                    "core_map = 0-3:big,4-7:little\n"
                    "pct=90   # tail target\n"
                    "\n"
                    "  min_unit_ns = 250\n"
                    "max_window_ns = 5000000\n"
                    "threshold_ns = 300\n"
                    "max_epochs = 16\n"
                    "emulate_a = 2.5\n");
  EXPECT_EQ(s.runtime.slo.pct, 90);
  EXPECT_EQ(s.runtime.slo.min_unit_ns, 250u);
  EXPECT_EQ(s.runtime.slo.max_window_ns, 5'000'000u);
  EXPECT_EQ(s.runtime.threshold_ns, 300u);
  EXPECT_EQ(s.runtime.max_epochs, 16);
  EXPECT_DOUBLE_EQ(s.emulate_a, 2.5);
  ASSERT_TRUE(s.core_map);
  EXPECT_EQ(s.core_map->lookup(6), CoreClass::Little);
}

TEST(Config, EnvironmentOverridesFile) {
  std::string path = write_temp("pct = 90\nthreshold_ns = 300\n");
  EnvGuard g("ASL_PCT", "95");
  Settings s = load_settings(path);
  EXPECT_EQ(s.runtime.slo.pct, 95);
  EXPECT_EQ(s.runtime.threshold_ns, 300u);
  std::filesystem::remove(path);
}

TEST(Config, EnvironmentCoreMap) {
  EnvGuard g("ASL_CORE_MAP", "0-1:little");
  Settings s = load_settings();
  ASSERT_TRUE(s.core_map);
  EXPECT_EQ(s.core_map->lookup(1), CoreClass::Little);
}

TEST(Config, RejectsUnknownKeysAndBadValues) {
  Settings s;
  EXPECT_THROW(apply_config_text(s, "speed = 3\n"), ConfigError);
  EXPECT_THROW(apply_config_text(s, "pct = ninety\n"), ConfigError);
  EXPECT_THROW(apply_config_text(s, "pct = -5\n"), ConfigError);
  EXPECT_THROW(apply_config_text(s, "just a line\n"), ConfigError);
  EXPECT_THROW(apply_config_file(s, "/nonexistent/asl.conf"), ConfigError);
}

TEST(Config, ValidationRejectsOutOfRange) {
  EnvGuard g("ASL_PCT", "100");
  EXPECT_THROW(load_settings(), ConfigError);
}

TEST(Config, ValidationRejectsSubUnitInflation) {
  EnvGuard g("ASL_EMULATE_A", "0.5");
  EXPECT_THROW(load_settings(), ConfigError);
}

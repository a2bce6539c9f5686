#pragma once

#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "asl/harness/recorder.hpp"
#include "json.hpp"

namespace asl::harness {

struct ClassSummary {
  std::uint64_t count = 0;
  double throughput = 0.0;  // epochs per second
  double mean_ns = 0.0;
  std::uint64_t p50_ns = 0;
  std::uint64_t p90_ns = 0;
  std::uint64_t p99_ns = 0;
  std::uint64_t p999_ns = 0;
  std::uint64_t acquisitions = 0;  // whole run, including warm-up
  friend bool operator==(const ClassSummary&, const ClassSummary&) = default;
};

struct Topology {
  unsigned cpus = 0;
  bool pinned = false;
  double emulate_a = 1.0;
  double iterations_per_ns = 0.0;
  std::string standby = "spin";
  friend bool operator==(const Topology&, const Topology&) = default;
};

struct BenchReport {
  std::string scenario;
  std::string lock;
  unsigned n_big = 0;
  unsigned n_little = 0;
  std::optional<std::uint64_t> slo_ns;
  std::uint64_t cs_ns = 0;
  std::uint64_t non_cs_ns = 0;
  double measured_s = 0.0;  // span the throughput is computed over
  double throughput = 0.0;
  ClassSummary big;
  ClassSummary little;
  ClassSummary overall;
  std::vector<CdfPoint> cdf_big;
  std::vector<CdfPoint> cdf_little;
  std::vector<CdfPoint> cdf_overall;
  double violation_fraction = 0.0;
  bool accounting_ok = true;
  Topology topology;
  friend bool operator==(const BenchReport&, const BenchReport&) = default;
};

inline ClassSummary summarize(LatencyRecorder& rec, std::optional<CoreClass> cls, double span_s) {
  ClassSummary s;
  s.count = cls ? rec.count(*cls) : rec.count();
  if (s.count == 0) return s;
  s.throughput = span_s > 0 ? static_cast<double>(s.count) / span_s : 0.0;
  auto pct = [&](double p) { return cls ? rec.percentile(*cls, p) : rec.percentile(p); };
  s.mean_ns = cls ? rec.mean(*cls) : rec.mean();
  s.p50_ns = pct(50);
  s.p90_ns = pct(90);
  s.p99_ns = pct(99);
  s.p999_ns = pct(99.9);
  return s;
}

// --- JSON -------------------------------------------------------------------

inline void to_json(nlohmann::json& j, const CdfPoint& p) {
  j = nlohmann::json{{"latency_ns", p.latency_ns}, {"cumulative_fraction", p.fraction}};
}
inline void from_json(const nlohmann::json& j, CdfPoint& p) {
  j.at("latency_ns").get_to(p.latency_ns);
  j.at("cumulative_fraction").get_to(p.fraction);
}

inline void to_json(nlohmann::json& j, const ClassSummary& s) {
  j = nlohmann::json{{"count", s.count},   {"throughput", s.throughput}, {"mean_ns", s.mean_ns},
                     {"p50_ns", s.p50_ns}, {"p90_ns", s.p90_ns},         {"p99_ns", s.p99_ns},
                     {"p999_ns", s.p999_ns}, {"acquisitions", s.acquisitions}};
}
inline void from_json(const nlohmann::json& j, ClassSummary& s) {
  j.at("count").get_to(s.count);
  j.at("throughput").get_to(s.throughput);
  j.at("mean_ns").get_to(s.mean_ns);
  j.at("p50_ns").get_to(s.p50_ns);
  j.at("p90_ns").get_to(s.p90_ns);
  j.at("p99_ns").get_to(s.p99_ns);
  j.at("p999_ns").get_to(s.p999_ns);
  j.at("acquisitions").get_to(s.acquisitions);
}

inline void to_json(nlohmann::json& j, const Topology& t) {
  j = nlohmann::json{{"cpus", t.cpus},
                     {"pinned", t.pinned},
                     {"emulate_a", t.emulate_a},
                     {"iterations_per_ns", t.iterations_per_ns},
                     {"standby", t.standby}};
}
inline void from_json(const nlohmann::json& j, Topology& t) {
  j.at("cpus").get_to(t.cpus);
  j.at("pinned").get_to(t.pinned);
  j.at("emulate_a").get_to(t.emulate_a);
  j.at("iterations_per_ns").get_to(t.iterations_per_ns);
  j.at("standby").get_to(t.standby);
}

inline void to_json(nlohmann::json& j, const BenchReport& r) {
  j = nlohmann::json{{"scenario", r.scenario},
                     {"lock", r.lock},
                     {"n_big", r.n_big},
                     {"n_little", r.n_little},
                     {"slo_ns", r.slo_ns ? nlohmann::json(*r.slo_ns) : nlohmann::json(nullptr)},
                     {"cs_ns", r.cs_ns},
                     {"non_cs_ns", r.non_cs_ns},
                     {"measured_s", r.measured_s},
                     {"throughput", r.throughput},
                     {"big", r.big},
                     {"little", r.little},
                     {"overall", r.overall},
                     {"cdf", {{"big", r.cdf_big}, {"little", r.cdf_little}, {"overall", r.cdf_overall}}},
                     {"violation_fraction", r.violation_fraction},
                     {"accounting_ok", r.accounting_ok},
                     {"topology", r.topology}};
}

inline void from_json(const nlohmann::json& j, BenchReport& r) {
  j.at("scenario").get_to(r.scenario);
  j.at("lock").get_to(r.lock);
  j.at("n_big").get_to(r.n_big);
  j.at("n_little").get_to(r.n_little);
  if (j.at("slo_ns").is_null()) r.slo_ns.reset(); else r.slo_ns = j.at("slo_ns").get<std::uint64_t>();
  j.at("cs_ns").get_to(r.cs_ns);
  j.at("non_cs_ns").get_to(r.non_cs_ns);
  j.at("measured_s").get_to(r.measured_s);
  j.at("throughput").get_to(r.throughput);
  j.at("big").get_to(r.big);
  j.at("little").get_to(r.little);
  j.at("overall").get_to(r.overall);
  j.at("cdf").at("big").get_to(r.cdf_big);
  j.at("cdf").at("little").get_to(r.cdf_little);
  j.at("cdf").at("overall").get_to(r.cdf_overall);
  j.at("violation_fraction").get_to(r.violation_fraction);
  j.at("accounting_ok").get_to(r.accounting_ok);
  j.at("topology").get_to(r.topology);
}

// --- CSV --------------------------------------------------------------------

// One row per (metric, class).
inline std::string to_csv(const BenchReport& r) {
  std::ostringstream out;
  out.precision(17);
  out << "metric,class,value\n";
  auto rows = [&](const char* cls, const ClassSummary& s) {
    out << "count," << cls << ',' << s.count << '\n';
    out << "throughput," << cls << ',' << s.throughput << '\n';
    out << "mean_ns," << cls << ',' << s.mean_ns << '\n';
    out << "p50_ns," << cls << ',' << s.p50_ns << '\n';
    out << "p90_ns," << cls << ',' << s.p90_ns << '\n';
    out << "p99_ns," << cls << ',' << s.p99_ns << '\n';
    out << "p999_ns," << cls << ',' << s.p999_ns << '\n';
    out << "acquisitions," << cls << ',' << s.acquisitions << '\n';
  };
  rows("big", r.big);
  rows("little", r.little);
  rows("overall", r.overall);
  out << "violation_fraction,overall," << r.violation_fraction << '\n';
  return out.str();
}

// (class, latency_ns, cumulative_fraction) pairs.
inline std::string cdf_to_csv(const BenchReport& r) {
  std::ostringstream out;
  out.precision(17);
  out << "class,latency_ns,cumulative_fraction\n";
  auto rows = [&](const char* cls, const std::vector<CdfPoint>& pts) {
    for (auto& p : pts) out << cls << ',' << p.latency_ns << ',' << p.fraction << '\n';
  };
  rows("big", r.cdf_big);
  rows("little", r.cdf_little);
  rows("overall", r.cdf_overall);
  return out.str();
}

// One row per report, e.g. one per SLO point of a sweep.
inline std::string sweep_to_csv(const std::vector<BenchReport>& reports) {
  std::ostringstream out;
  out.precision(17);
  out << "scenario,lock,slo_ns,non_cs_ns,throughput,big_throughput,little_throughput,"
         "big_p99_ns,little_p99_ns,overall_p99_ns,violation_fraction\n";
  for (auto& r : reports) {
    out << r.scenario << ',' << r.lock << ',';
    if (r.slo_ns) out << *r.slo_ns;
    out << ',' << r.non_cs_ns << ',' << r.throughput << ',' << r.big.throughput << ',' << r.little.throughput
        << ',' << r.big.p99_ns << ',' << r.little.p99_ns << ',' << r.overall.p99_ns << ','
        << r.violation_fraction << '\n';
  }
  return out.str();
}

enum class ExportFormat { json, csv };

inline std::optional<ExportFormat> parse_format(const std::string& s) {
  if (s == "json") return ExportFormat::json;
  if (s == "csv") return ExportFormat::csv;
  return std::nullopt;
}

inline void write_file(const std::string& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open '" + path + "' for writing");
  f << content;
  if (!f) throw std::runtime_error("write to '" + path + "' failed");
}

/// Writes the report to `path`. CSV output also writes the CDF table to
/// `<path>.cdf.csv`. Returns the paths written.
inline std::vector<std::string> export_report(const BenchReport& r, ExportFormat fmt,
                                              const std::string& path) {
  if (fmt == ExportFormat::json) {
    write_file(path, nlohmann::json(r).dump(2) + "\n");
    return {path};
  }
  write_file(path, to_csv(r));
  write_file(path + ".cdf.csv", cdf_to_csv(r));
  return {path, path + ".cdf.csv"};
}

}  // namespace asl::harness

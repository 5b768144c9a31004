#include "gccn/metrics.hpp"

#include <charconv>
#include <cmath>
#include <fstream>

#include "gccn/error.hpp"

namespace gccn {

Summary summarize(std::span<const double> values) {
  Summary s;
  if (values.empty()) return s;
  const double n = static_cast<double>(values.size());
  double total = 0.0;
  for (double v : values) total += v;
  s.mean = total / n;
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.stderr_mean = std::sqrt(ss / (n - 1.0)) / std::sqrt(n);
  }
  return s;
}

std::string format_number(double value) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, ptr);
}

namespace {

std::ofstream open_csv(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  return out;
}

}  // namespace

void write_metrics_csv(const std::filesystem::path& path, std::span<const EpochMetrics> rows) {
  auto out = open_csv(path);
  out << "epoch,split,loss,accuracy\n";
  for (const auto& r : rows) {
    out << r.epoch << ',' << r.split << ',' << format_number(r.loss) << ',' << format_number(r.accuracy) << '\n';
  }
  if (!out) throw IoError("failed writing " + path.string());
}

void write_episodes_csv(const std::filesystem::path& path, std::span<const EpisodeRecord> rows, std::size_t ways,
                        std::size_t shots, const HeadConfig& head) {
  auto out = open_csv(path);
  out << "episode_id,W,K,metric,head,loss,accuracy\n";
  const std::string metric = to_string(head.metric);
  const std::string name = to_string(head.head);
  for (const auto& r : rows) {
    out << r.episode_id << ',' << ways << ',' << shots << ',' << metric << ',' << name << ','
        << format_number(r.loss) << ',' << format_number(r.accuracy) << '\n';
  }
  if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace gccn

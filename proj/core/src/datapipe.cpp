// Copyright 2026 The wearembed Authors.
// SPDX-License-Identifier: Apache-2.0

#include "wearembed/datapipe.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "wearembed/errors.hpp"
#include "wearembed/rng.hpp"

namespace wearembed {
namespace {

template <typename T>
bool parse_number(std::string_view text, T& out) {
  const char* first = text.data();
  const char* last = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last;
}

std::int64_t floor_div(std::int64_t a, std::int64_t b) {
  std::int64_t q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}

std::size_t geometric(Rng& rng, double mean) {
  if (mean <= 1.0) return 1;
  const double p = 1.0 / mean;
  const double u = 1.0 - rng.uniform();  // (0, 1]
  return 1 + static_cast<std::size_t>(std::floor(std::log(u) / std::log1p(-p)));
}

}  // namespace

std::string format_date(Date date) {
  const std::chrono::year_month_day ymd{date};
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
  return buf;
}

Date parse_date(std::string_view text) {
  int y = 0;
  unsigned m = 0;
  unsigned d = 0;
  if (text.size() != 10 || text[4] != '-' || text[7] != '-' ||
      !parse_number(text.substr(0, 4), y) || !parse_number(text.substr(5, 2), m) ||
      !parse_number(text.substr(8, 2), d)) {
    throw std::invalid_argument("malformed date '" + std::string(text) + "', want YYYY-MM-DD");
  }
  const std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{m},
                                        std::chrono::day{d}};
  if (!ymd.ok()) throw std::invalid_argument("invalid calendar date '" + std::string(text) + "'");
  return Date{ymd};
}

Date date_of_epoch_minute(std::int64_t epoch_minute) {
  return Date{std::chrono::days{floor_div(epoch_minute, 1440)}};
}

double DayLongSeries::completeness() const {
  const auto measured = std::count(mask.begin(), mask.end(), std::uint8_t{1});
  return static_cast<double>(measured) / static_cast<double>(mask.size());
}

std::size_t total_days(const std::vector<UserArchive>& archives) {
  std::size_t n = 0;
  for (const auto& a : archives) n += a.days.size();
  return n;
}

IngestResult ingest_csv_text(std::string_view text) {
  IngestResult result;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;

    const std::size_t c1 = line.find(',');
    const std::size_t c2 = c1 == std::string_view::npos ? c1 : line.find(',', c1 + 1);
    MeasurementRecord rec;
    if (c2 == std::string_view::npos || line.find(',', c2 + 1) != std::string_view::npos ||
        c1 == 0 || !parse_number(line.substr(c1 + 1, c2 - c1 - 1), rec.value) ||
        !parse_number(line.substr(c2 + 1), rec.epoch_minute) || !std::isfinite(rec.value) ||
        rec.value <= 0.0) {
      ++result.malformed_lines;
      continue;
    }
    rec.user_id = std::string(line.substr(0, c1));
    result.records.push_back(std::move(rec));
  }
  std::stable_sort(result.records.begin(), result.records.end(),
                   [](const MeasurementRecord& a, const MeasurementRecord& b) {
                     if (a.user_id != b.user_id) return a.user_id < b.user_id;
                     return a.epoch_minute < b.epoch_minute;
                   });
  return result;
}

IngestResult ingest_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open measurement file " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return ingest_csv_text(buffer.str());
}

std::vector<UserArchive> segment_days(const std::vector<MeasurementRecord>& records) {
  std::vector<UserArchive> archives;
  std::vector<std::uint32_t> counts(kMinutesPerDay, 0);
  std::size_t i = 0;
  while (i < records.size()) {
    UserArchive archive{records[i].user_id, {}, {}};
    while (i < records.size() && records[i].user_id == archive.user_id) {
      const Date day = date_of_epoch_minute(records[i].epoch_minute);
      DayLongSeries series;
      series.user_id = archive.user_id;
      series.date = day;
      std::fill(counts.begin(), counts.end(), 0u);
      while (i < records.size() && records[i].user_id == archive.user_id &&
             date_of_epoch_minute(records[i].epoch_minute) == day) {
        const auto slot = static_cast<std::size_t>(records[i].epoch_minute -
                                                   day.time_since_epoch().count() * 1440);
        series.values[slot] += records[i].value;
        ++counts[slot];
        ++i;
      }
      for (std::size_t k = 0; k < kMinutesPerDay; ++k) {
        if (counts[k] > 0) {
          series.values[k] /= counts[k];
          series.mask[k] = 1;
        }
      }
      archive.days.push_back(std::move(series));
    }
    archives.push_back(std::move(archive));
  }
  return archives;
}

std::vector<MeasurementRecord> to_records(const std::vector<UserArchive>& archives) {
  std::vector<MeasurementRecord> records;
  for (const auto& archive : archives) {
    for (const auto& day : archive.days) {
      const std::int64_t base = day.date.time_since_epoch().count() * 1440;
      for (std::size_t k = 0; k < kMinutesPerDay; ++k) {
        if (day.mask[k]) {
          records.push_back({archive.user_id, base + static_cast<std::int64_t>(k), day.values[k]});
        }
      }
    }
  }
  return records;
}

void validate(const SynthSpec& spec) {
  if (spec.n_users < 1 || spec.days_per_user < 1) {
    throw std::invalid_argument("synthetic spec needs at least one user and one day");
  }
  if (!(spec.gap_rate >= 0.0 && spec.gap_rate < 1.0)) {
    throw std::invalid_argument("gap_rate must lie in [0, 1)");
  }
  if (spec.baseline_std < 0.0 || spec.noise_std < 0.0 || spec.amplitude_max < spec.amplitude_min ||
      spec.phase_max < spec.phase_min || spec.gap_mean_length < 1.0) {
    throw std::invalid_argument("synthetic spec has an inverted range or negative spread");
  }
}

std::vector<UserArchive> generate_synthetic(const SynthSpec& spec) {
  validate(spec);
  std::vector<UserArchive> archives;
  archives.reserve(spec.n_users);
  const Rng root(spec.seed);
  for (std::size_t u = 0; u < spec.n_users; ++u) {
    Rng rng = root.fork(u);
    char id[16];
    std::snprintf(id, sizeof id, "u%03zu", u);
    UserArchive archive{id, {}, {}};

    const double baseline = rng.normal(spec.baseline_mean, spec.baseline_std);
    const double amplitude = rng.uniform(spec.amplitude_min, spec.amplitude_max);
    const double phase = rng.uniform(spec.phase_min, spec.phase_max);

    const double phase_span = spec.phase_max - spec.phase_min;
    const double phase_pos = phase_span > 0.0 ? (phase - spec.phase_min) / phase_span : 0.5;
    const double amp_span = spec.amplitude_max - spec.amplitude_min;
    const double amp_pos = amp_span > 0.0 ? (amplitude - spec.amplitude_min) / amp_span : 0.5;
    archive.labels["baseline_level"] = std::string(baseline >= spec.baseline_mean ? "high" : "low");
    archive.labels["chronotype"] = std::string(phase_pos < 1.0 / 3.0   ? "early"
                                               : phase_pos < 2.0 / 3.0 ? "intermediate"
                                                                       : "late");
    archive.labels["sleep_hours"] = 6.0 + 2.0 * amp_pos + rng.normal(0.0, 0.25);

    for (std::size_t d = 0; d < spec.days_per_user; ++d) {
      DayLongSeries day;
      day.user_id = archive.user_id;
      day.date = spec.start_date + std::chrono::days{static_cast<int>(d)};
      for (std::size_t k = 0; k < kMinutesPerDay; ++k) {
        const double angle = 2.0 * std::numbers::pi * static_cast<double>(k) / 1440.0 + phase;
        double v = baseline + amplitude * std::sin(angle);
        if (spec.noise_std > 0.0) v += rng.normal(0.0, spec.noise_std);
        day.values[k] = std::max(v, 30.0);
        day.mask[k] = 1;
      }
      while (spec.gap_rate > 0.0 && rng.bernoulli(spec.gap_rate)) {
        const std::size_t start = rng.index(kMinutesPerDay);
        const std::size_t length = geometric(rng, spec.gap_mean_length);
        const std::size_t stop = std::min(kMinutesPerDay, start + length);
        for (std::size_t k = start; k < stop; ++k) {
          day.values[k] = 0.0;
          day.mask[k] = 0;
        }
      }
      if (std::find(day.mask.begin(), day.mask.end(), 1) == day.mask.end()) {
        // Keep one measured slot so the day survives segmentation.
        day.mask[kMinutesPerDay / 2] = 1;
        day.values[kMinutesPerDay / 2] = std::max(baseline, 30.0);
      }
      archive.days.push_back(std::move(day));
    }
    archives.push_back(std::move(archive));
  }
  return archives;
}

UserSplit split_labels(const std::vector<UserArchive>& archives, std::array<double, 3> fractions,
                       std::uint64_t seed) {
  return split_labels(archives.size(), fractions, seed);
}

UserSplit split_labels(std::size_t n, std::array<double, 3> fractions, std::uint64_t seed) {
  if (n < 3) throw std::invalid_argument("label split needs at least 3 users");
  const double total = fractions[0] + fractions[1] + fractions[2];
  if (std::abs(total - 1.0) > 1e-9 ||
      std::any_of(fractions.begin(), fractions.end(), [](double f) { return f < 0.0; })) {
    throw std::invalid_argument("split fractions must be non-negative and sum to 1");
  }
  const auto n_valid = static_cast<std::size_t>(std::llround(fractions[1] * n));
  const auto n_test = static_cast<std::size_t>(std::llround(fractions[2] * n));
  if (n_valid + n_test > n) throw std::invalid_argument("split fractions over-allocate users");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  rng.shuffle(order);

  UserSplit split;
  const std::size_t n_train = n - n_valid - n_test;
  split.train.assign(order.begin(), order.begin() + n_train);
  split.valid.assign(order.begin() + n_train, order.begin() + n_train + n_valid);
  split.test.assign(order.begin() + n_train + n_valid, order.end());
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.valid.begin(), split.valid.end());
  std::sort(split.test.begin(), split.test.end());
  return split;
}

ChronoSplit split_chronological(const std::vector<UserArchive>& archives, Date train_end,
                                Date valid_end, Date test_end) {
  if (!(train_end < valid_end && valid_end < test_end)) {
    throw std::invalid_argument("chronological split dates must be strictly increasing");
  }
  ChronoSplit split;
  for (const auto& archive : archives) {
    UserArchive train{archive.user_id, {}, archive.labels};
    UserArchive valid = train;
    UserArchive test = train;
    for (const auto& day : archive.days) {
      if (day.date < train_end) {
        train.days.push_back(day);
      } else if (day.date < valid_end) {
        valid.days.push_back(day);
      } else if (day.date < test_end) {
        test.days.push_back(day);
      } else {
        ++split.dropped_days;
      }
    }
    if (!train.days.empty()) split.embed_train.push_back(std::move(train));
    if (!valid.days.empty()) split.valid.push_back(std::move(valid));
    if (!test.days.empty()) split.test.push_back(std::move(test));
  }
  if (split.embed_train.empty()) split.warnings.emplace_back("embed-train bucket is empty");
  if (split.valid.empty()) split.warnings.emplace_back("validation bucket is empty");
  if (split.test.empty()) split.warnings.emplace_back("test bucket is empty");
  return split;
}

}  // namespace wearembed

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace augmix {

/// One scored prediction. `posterior` is optional (empty when the source
/// CSV carries only the confidence column).
struct PredictionRecord {
  std::int64_t example_id = 0;
  int true_label = 0;
  int pred_label = 0;
  double confidence = 0.0;
  std::vector<double> posterior;
};

inline void validate_record(const PredictionRecord& r) {
  if (!(r.confidence >= 0.0 && r.confidence <= 1.0))
    throw std::invalid_argument("confidence outside [0,1] for example " +
                                std::to_string(r.example_id));
}

/// Error rates of one corruption type at the five severity levels.
struct CorruptionResults {
  std::string corruption_name;
  std::array<double, 5> errors_by_severity{};
};

/// Reference-model rates used for normalization: per-corruption severity
/// error vectors and per-perturbation flip probabilities, all in (0,1].
struct BaselineErrorTable {
  std::map<std::string, std::array<double, 5>> corruptions;
  std::map<std::string, double> perturbations;
};

/// Ordered frame predictions of one perturbation video.
struct PredictionStream {
  std::string video_id;
  std::vector<int> frame_predictions;
};

/// Per-corruption aggregate: the mean error over the five severities.
inline double unnormalized_ce(const CorruptionResults& results) {
  double sum = 0.0;
  for (const double e : results.errors_by_severity) {
    if (!(e >= 0.0 && e <= 1.0))
      throw std::invalid_argument("corruption error outside [0,1]");
    sum += e;
  }
  return sum / 5.0;
}

/// Baseline-normalized corruption error, as a percentage:
///   CE = 100 * sum_s E_model / sum_s E_baseline.
inline double normalized_ce(const CorruptionResults& model,
                            const CorruptionResults& baseline) {
  if (model.corruption_name != baseline.corruption_name)
    throw std::invalid_argument("normalized_ce corruption name mismatch: " +
                                model.corruption_name + " vs " +
                                baseline.corruption_name);
  double model_sum = 0.0, baseline_sum = 0.0;
  for (int s = 0; s < 5; ++s) {
    model_sum += model.errors_by_severity[s];
    baseline_sum += baseline.errors_by_severity[s];
  }
  if (baseline_sum <= 0.0)
    throw std::invalid_argument("zero baseline corruption error for " +
                                baseline.corruption_name);
  return 100.0 * model_sum / baseline_sum;
}

/// Mean over the per-corruption CE values.
inline double mce(const std::vector<double>& ces) {
  if (ces.empty()) throw std::invalid_argument("mce of empty input");
  double sum = 0.0;
  for (const double ce : ces) sum += ce;
  return sum / static_cast<double>(ces.size());
}

enum class FlipMode {
  adjacent,  // compare each frame with its predecessor
  vs_first,  // compare each frame with the first (clean) frame
};

/// Fraction of mismatched frame pairs in one video.
inline double flip_probability(const PredictionStream& stream,
                               FlipMode mode = FlipMode::adjacent) {
  const std::size_t n = stream.frame_predictions.size();
  if (n < 2)
    throw std::invalid_argument("prediction stream shorter than 2 frames: " +
                                stream.video_id);
  int flips = 0;
  for (std::size_t t = 1; t < n; ++t) {
    const int reference = mode == FlipMode::adjacent
                              ? stream.frame_predictions[t - 1]
                              : stream.frame_predictions[0];
    if (stream.frame_predictions[t] != reference) ++flips;
  }
  return static_cast<double>(flips) / static_cast<double>(n - 1);
}

/// All videos of one perturbation type.
struct PerturbationGroup {
  std::string name;
  std::vector<PredictionStream> streams;
};

struct FlipSummary {
  double mfp = 0.0;  // mean flip probability over perturbations
  double mfr = 0.0;  // baseline-normalized mean flip rate, percent
  std::map<std::string, double> fp_by_perturbation;
  std::map<std::string, double> fr_by_perturbation;
};

/// Per-perturbation FP is the mean flip probability over its streams; mFP
/// averages those and mFR averages the baseline ratios (x100).
inline FlipSummary mfp_and_mfr(const std::vector<PerturbationGroup>& groups,
                               const BaselineErrorTable& baseline,
                               FlipMode mode = FlipMode::adjacent) {
  if (groups.empty())
    throw std::invalid_argument("mfp_and_mfr needs at least one perturbation");
  FlipSummary summary;
  double fp_sum = 0.0, fr_sum = 0.0;
  for (const PerturbationGroup& group : groups) {
    if (group.streams.empty())
      throw std::invalid_argument("perturbation group " + group.name +
                                  " has no streams");
    double fp = 0.0;
    for (const PredictionStream& stream : group.streams)
      fp += flip_probability(stream, mode);
    fp /= static_cast<double>(group.streams.size());
    summary.fp_by_perturbation[group.name] = fp;
    fp_sum += fp;

    const auto it = baseline.perturbations.find(group.name);
    if (it == baseline.perturbations.end())
      throw std::invalid_argument("baseline has no flip rate for " +
                                  group.name);
    if (it->second <= 0.0)
      throw std::invalid_argument("zero baseline flip rate for " + group.name);
    const double ratio = fp / it->second;
    summary.fr_by_perturbation[group.name] = 100.0 * ratio;
    fr_sum += ratio;
  }
  summary.mfp = fp_sum / static_cast<double>(groups.size());
  summary.mfr = 100.0 * (fr_sum / static_cast<double>(groups.size()));
  return summary;
}

namespace detail {

struct CalibrationBin {
  double count = 0.0;        // |B|
  double accuracy = 0.0;     // mean correctness in the bin
  double confidence = 0.0;   // mean confidence in the bin
};

// Adaptive binning: sort by confidence (ties broken by example id for a
// reproducible order) and cut into contiguous bins of bin_size; the final
// bin may be smaller.
inline std::vector<CalibrationBin> confidence_bins(
    std::vector<PredictionRecord> records, int bin_size) {
  if (records.empty())
    throw std::invalid_argument("calibration of empty record set");
  if (bin_size < 1) throw std::invalid_argument("bin_size must be >= 1");
  for (const PredictionRecord& r : records) validate_record(r);
  std::sort(records.begin(), records.end(),
            [](const PredictionRecord& a, const PredictionRecord& b) {
              if (a.confidence != b.confidence)
                return a.confidence < b.confidence;
              return a.example_id < b.example_id;
            });
  const std::size_t n = records.size();
  std::vector<CalibrationBin> bins;
  for (std::size_t start = 0; start < n;
       start += static_cast<std::size_t>(bin_size)) {
    const std::size_t stop =
        std::min(n, start + static_cast<std::size_t>(bin_size));
    CalibrationBin bin;
    double correct = 0.0, conf = 0.0;
    for (std::size_t i = start; i < stop; ++i) {
      correct += records[i].true_label == records[i].pred_label ? 1.0 : 0.0;
      conf += records[i].confidence;
    }
    bin.count = static_cast<double>(stop - start);
    bin.accuracy = correct / bin.count;
    bin.confidence = conf / bin.count;
    bins.push_back(bin);
  }
  return bins;
}

}  // namespace detail

/// RMS calibration error with adaptive bins of `bin_size` predictions:
///   sqrt( sum_b (|B_b|/n) (acc_b - conf_b)^2 ).
/// Accumulated count-weighted with a single division by n.
inline double rms_calibration_error(const std::vector<PredictionRecord>& records,
                                    int bin_size = 100) {
  double sum = 0.0;
  for (const auto& bin : detail::confidence_bins(records, bin_size)) {
    const double gap = bin.accuracy - bin.confidence;
    sum += bin.count * gap * gap;
  }
  return std::sqrt(sum / static_cast<double>(records.size()));
}

/// Brier score on the correctness event, decomposed over the same bins:
/// squared RMS calibration error plus the refinement term
/// sum_b (|B_b|/n) acc_b (1 - acc_b).
inline double brier_score(const std::vector<PredictionRecord>& records,
                          int bin_size = 100) {
  double calibration = 0.0, refinement = 0.0;
  for (const auto& bin : detail::confidence_bins(records, bin_size)) {
    const double gap = bin.accuracy - bin.confidence;
    calibration += bin.count * gap * gap;
    refinement += bin.count * bin.accuracy * (1.0 - bin.accuracy);
  }
  return (calibration + refinement) / static_cast<double>(records.size());
}

/// Fraction of records whose predicted label differs from the true label.
inline double error_rate(const std::vector<PredictionRecord>& records) {
  if (records.empty()) throw std::invalid_argument("error_rate of no records");
  std::size_t wrong = 0;
  for (const PredictionRecord& r : records)
    if (r.pred_label != r.true_label) ++wrong;
  return static_cast<double>(wrong) / static_cast<double>(records.size());
}

// ---------------------------------------------------------------------------
// File formats
// ---------------------------------------------------------------------------

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

inline std::string strip_cr(std::string s) {
  if (!s.empty() && s.back() == '\r') s.pop_back();
  return s;
}

}  // namespace detail

/// Prediction CSV: header `example_id,true_label,pred_label,confidence`,
/// optionally followed by `p_0..p_{K-1}` posterior columns.
inline std::vector<PredictionRecord> read_prediction_csv(
    const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open file: " + path);
  std::string line;
  if (!std::getline(in, line))
    throw std::runtime_error("empty prediction CSV: " + path);
  const auto header = detail::split_csv_line(detail::strip_cr(line));
  if (header.size() < 4 || header[0] != "example_id" ||
      header[1] != "true_label" || header[2] != "pred_label" ||
      header[3] != "confidence")
    throw std::runtime_error("bad prediction CSV header in " + path);
  const std::size_t posterior_cols = header.size() - 4;

  std::vector<PredictionRecord> records;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    line = detail::strip_cr(line);
    if (line.empty()) continue;
    const auto fields = detail::split_csv_line(line);
    if (fields.size() != header.size())
      throw std::runtime_error("bad field count at " + path + ":" +
                               std::to_string(line_no));
    try {
      PredictionRecord r;
      r.example_id = std::stoll(fields[0]);
      r.true_label = std::stoi(fields[1]);
      r.pred_label = std::stoi(fields[2]);
      r.confidence = std::stod(fields[3]);
      for (std::size_t c = 0; c < posterior_cols; ++c)
        r.posterior.push_back(std::stod(fields[4 + c]));
      validate_record(r);
      records.push_back(std::move(r));
    } catch (const std::logic_error& e) {
      throw std::runtime_error("bad record at " + path + ":" +
                               std::to_string(line_no) + ": " + e.what());
    }
  }
  return records;
}

inline void write_prediction_csv(const std::vector<PredictionRecord>& records,
                                 const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write file: " + path);
  const std::size_t posterior_cols =
      records.empty() ? 0 : records.front().posterior.size();
  out << "example_id,true_label,pred_label,confidence";
  for (std::size_t c = 0; c < posterior_cols; ++c) out << ",p_" << c;
  out << "\n";
  out.precision(17);
  for (const PredictionRecord& r : records) {
    out << r.example_id << ',' << r.true_label << ',' << r.pred_label << ','
        << r.confidence;
    for (const double p : r.posterior) out << ',' << p;
    out << "\n";
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

/// Perturbation-stream CSV: header `video_id,frame_index,pred_label`, with
/// each video's frames contiguous from 0. Videos keep file order.
inline std::vector<PredictionStream> read_stream_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open file: " + path);
  std::string line;
  if (!std::getline(in, line))
    throw std::runtime_error("empty stream CSV: " + path);
  const auto header = detail::split_csv_line(detail::strip_cr(line));
  if (header.size() != 3 || header[0] != "video_id" ||
      header[1] != "frame_index" || header[2] != "pred_label")
    throw std::runtime_error("bad stream CSV header in " + path);

  std::vector<PredictionStream> streams;
  std::map<std::string, std::size_t> index_of;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    line = detail::strip_cr(line);
    if (line.empty()) continue;
    const auto fields = detail::split_csv_line(line);
    if (fields.size() != 3)
      throw std::runtime_error("bad field count at " + path + ":" +
                               std::to_string(line_no));
    const std::string& video = fields[0];
    auto [it, inserted] = index_of.try_emplace(video, streams.size());
    if (inserted) streams.push_back(PredictionStream{video, {}});
    PredictionStream& stream = streams[it->second];
    try {
      const long frame = std::stol(fields[1]);
      if (frame != static_cast<long>(stream.frame_predictions.size()))
        throw std::runtime_error("non-contiguous frame_index for video " +
                                 video);
      stream.frame_predictions.push_back(std::stoi(fields[2]));
    } catch (const std::logic_error& e) {
      throw std::runtime_error("bad record at " + path + ":" +
                               std::to_string(line_no) + ": " + e.what());
    }
  }
  return streams;
}

inline void write_stream_csv(const std::vector<PredictionStream>& streams,
                             const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write file: " + path);
  out << "video_id,frame_index,pred_label\n";
  for (const PredictionStream& stream : streams) {
    for (std::size_t t = 0; t < stream.frame_predictions.size(); ++t) {
      out << stream.video_id << ',' << t << ',' << stream.frame_predictions[t]
          << "\n";
    }
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

}  // namespace augmix

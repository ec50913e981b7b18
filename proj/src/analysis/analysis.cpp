#include "osvos/analysis.hpp"

#include <cstdio>
#include <fstream>

#include "json.hpp"
#include "osvos/error.hpp"

namespace osvos::analysis {

using json = nlohmann::ordered_json;

ErrorBreakdown error_decomposition(const Mask& pred, const Mask& gt, double distance) {
  if (!pred.same_shape(gt)) throw Error("error_decomposition: mask dimension mismatch");
  ErrorBreakdown e;
  std::vector<std::int64_t> sq;
  if (!gt.none()) sq = squared_distance_transform(gt);
  const double d2 = distance * distance;
  for (std::size_t i = 0; i < gt.size(); ++i) {
    if (pred[i] != gt[i]) ++e.total_error;
    if (gt[i] && !pred[i]) {
      ++e.fn;
    } else if (pred[i] && !gt[i]) {
      if (!sq.empty() && static_cast<double>(sq[i]) <= d2) {
        ++e.fp_close;
      } else {
        ++e.fp_far;
      }
    }
  }
  return e;
}

ErrorShares normalize(const ErrorBreakdown& e, double reference_total) {
  if (!(reference_total > 0.0)) return {};
  return {static_cast<double>(e.fp_close) / reference_total, static_cast<double>(e.fp_far) / reference_total,
          static_cast<double>(e.fn) / reference_total};
}

std::vector<double> default_tracker_thresholds() { return {0.5, 0.6, 0.7, 0.8, 0.9}; }

TrackerCurve tracker_eval(std::span<const Mask> pred, std::span<const Mask> gt, std::span<const double> thresholds) {
  if (pred.size() != gt.size()) throw Error("tracker_eval: prediction/ground-truth length mismatch");
  if (pred.empty()) throw Error("tracker_eval: no frames");
  TrackerCurve curve;
  curve.thresholds.assign(thresholds.begin(), thresholds.end());
  std::vector<double> iou(pred.size());
  std::vector<int> kind(pred.size());  // 0 both boxes, 1 both empty, 2 one empty
  for (std::size_t t = 0; t < pred.size(); ++t) {
    const auto pb = bounding_box(pred[t]);
    const auto gb = bounding_box(gt[t]);
    if (pb && gb) {
      kind[t] = 0;
      iou[t] = box_iou(*pb, *gb);
    } else {
      kind[t] = (!pb && !gb) ? 1 : 2;
    }
  }
  for (double th : thresholds) {
    std::size_t ok = 0;
    for (std::size_t t = 0; t < pred.size(); ++t) {
      if (kind[t] == 1 || (kind[t] == 0 && iou[t] > th)) ++ok;
    }
    curve.success.push_back(static_cast<double>(ok) / static_cast<double>(pred.size()));
  }
  return curve;
}

double mean_j(const MethodRun& run) {
  if (run.sequences.empty()) return 0.0;
  double s = 0.0;
  for (const auto& r : run.sequences) s += r.j.mean;
  return s / static_cast<double>(run.sequences.size());
}

namespace {

struct MethodSummary {
  metrics::Statistics j;
  metrics::Statistics f;
  double t = 0.0;
};

MethodSummary summarize(const MethodRun& run) {
  MethodSummary s;
  const double n = static_cast<double>(run.sequences.size());
  for (const auto& r : run.sequences) {
    s.j.mean += r.j.mean / n;
    s.j.recall += r.j.recall / n;
    s.j.decay += r.j.decay / n;
    s.f.mean += r.f.mean / n;
    s.f.recall += r.f.recall / n;
    s.f.decay += r.f.decay / n;
    s.t += r.t_mean / n;
  }
  return s;
}

json stats_json(const metrics::Statistics& s) { return json{{"mean", s.mean}, {"recall", s.recall}, {"decay", s.decay}}; }

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

ErrorBreakdown total_errors(const MethodRun& run) {
  ErrorBreakdown total;
  for (const auto& seq : run.errors) {
    for (const auto& e : seq) total += e;
  }
  return total;
}

}  // namespace

std::map<std::string, std::string> assemble_report(const ExperimentBundle& bundle) {
  if (bundle.methods.empty()) throw Error("assemble_report: no evaluated runs");
  std::map<std::string, std::string> files;

  const MethodRun* reference = nullptr;
  const MethodRun* error_reference = nullptr;
  for (const auto& m : bundle.methods) {
    if (m.method == bundle.reference_method) reference = &m;
    if (m.method == bundle.error_reference_method) error_reference = &m;
  }
  if (!reference) reference = &bundle.methods.front();

  json summary;
  summary["seed"] = bundle.seed;
  summary["sequences"] = bundle.sequences;

  // Per method: measure -> {mean, recall, decay}.
  json methods = json::object();
  std::map<std::string, MethodSummary> sums;
  for (const auto& m : bundle.methods) {
    const MethodSummary s = summarize(m);
    sums[m.method] = s;
    methods[m.method] = json{{"J", stats_json(s.j)}, {"F", stats_json(s.f)}, {"T", {{"mean", s.t}}}};
  }
  summary["methods"] = methods;

  // Positive delta = the variant loses quality relative to the reference.
  json deltas = json::object();
  const MethodSummary& ref = sums[reference->method];
  for (const auto& m : bundle.methods) {
    if (&m == reference) continue;
    const MethodSummary& s = sums[m.method];
    deltas[m.method] = json{{"J", {{"mean", ref.j.mean - s.j.mean}, {"recall", ref.j.recall - s.j.recall}, {"decay", s.j.decay - ref.j.decay}}},
                            {"F", {{"mean", ref.f.mean - s.f.mean}, {"recall", ref.f.recall - s.f.recall}, {"decay", s.f.decay - ref.f.decay}}},
                            {"T", {{"mean", s.t - ref.t}}}};
  }
  summary["ablation_deltas"] = deltas;

  json attributes = json::object();
  if (bundle.attributes.size() == bundle.sequences.size()) {
    for (const auto& m : bundle.methods) {
      if (m.sequences.size() != bundle.attributes.size()) continue;
      const auto report = metrics::attribute_report(m.sequences, bundle.attributes);
      json per = json::object();
      for (const auto& [tag, e] : report) {
        per[tag] = json{{"with", e.with_mean}, {"gain", e.gain}, {"n_with", e.n_with}, {"n_without", e.n_without}};
      }
      attributes[m.method] = per;
    }
  }
  summary["attributes"] = attributes;

  json per_sequence_j = json::object();
  for (const auto& m : bundle.methods) {
    json row = json::object();
    for (const auto& r : m.sequences) row[r.sequence] = r.j.mean;
    per_sequence_j[m.method] = row;
  }
  summary["per_sequence_J"] = per_sequence_j;

  json errors = json::object();
  const double ref_total = error_reference ? static_cast<double>(total_errors(*error_reference).total_error) : 0.0;
  for (const auto& m : bundle.methods) {
    if (m.errors.empty()) continue;
    const ErrorBreakdown t = total_errors(m);
    const ErrorShares sh = normalize(t, ref_total);
    errors[m.method] = json{{"fp_close", t.fp_close},
                            {"fp_far", t.fp_far},
                            {"fn", t.fn},
                            {"total", t.total_error},
                            {"relative", {{"fp_close", sh.fp_close}, {"fp_far", sh.fp_far}, {"fn", sh.fn}}}};
  }
  summary["errors"] = errors;

  json tracker = json::object();
  for (const auto& m : bundle.methods) {
    json arr = json::array();
    for (std::size_t i = 0; i < m.tracker.thresholds.size(); ++i) {
      arr.push_back(json{{"threshold", m.tracker.thresholds[i]}, {"success", m.tracker.success[i]}});
    }
    tracker[m.method] = arr;
  }
  summary["tracker"] = tracker;

  json budget = json::array();
  for (const auto& b : bundle.budget) budget.push_back(json{{"fraction", b.fraction}, {"frames", b.frames}, {"J", b.j_mean}});
  summary["budget"] = budget;

  json refinement = json::array();
  for (const auto& r : bundle.refinement) {
    refinement.push_back(json{{"annotations", r.label}, {"count", r.annotations}, {"J", r.j_mean}});
  }
  summary["refinement"] = refinement;

  json timing = json::array();
  for (const auto& t : bundle.timing) {
    timing.push_back(json{{"mode", t.mode}, {"iterations", t.iterations}, {"work_per_frame", t.work_per_frame}, {"J", t.j_mean}});
  }
  summary["timing"] = timing;

  json bounds = json::object();
  for (const auto& b : bundle.bounds) bounds[b.name] = b.j_mean;
  summary["bounds"] = bounds;

  files["summary.json"] = summary.dump(2) + "\n";

  std::string per_seq = "method,sequence,J_mean,J_recall,J_decay,F_mean,F_recall,F_decay,T\n";
  for (const auto& m : bundle.methods) {
    for (const auto& r : m.sequences) {
      per_seq += m.method + "," + r.sequence + "," + fmt(r.j.mean) + "," + fmt(r.j.recall) + "," + fmt(r.j.decay) + "," +
                 fmt(r.f.mean) + "," + fmt(r.f.recall) + "," + fmt(r.f.decay) + "," + fmt(r.t_mean) + "\n";
    }
  }
  files["per_sequence.csv"] = per_seq;

  std::string err = "method,sequence,frame,fp_close,fp_far,fn,total\n";
  for (const auto& m : bundle.methods) {
    for (std::size_t s = 0; s < m.errors.size(); ++s) {
      const std::string name = s < m.sequences.size() ? m.sequences[s].sequence : std::to_string(s);
      for (std::size_t t = 0; t < m.errors[s].size(); ++t) {
        const auto& e = m.errors[s][t];
        err += m.method + "," + name + "," + std::to_string(t) + "," + std::to_string(e.fp_close) + "," +
               std::to_string(e.fp_far) + "," + std::to_string(e.fn) + "," + std::to_string(e.total_error) + "\n";
      }
    }
  }
  files["errors.csv"] = err;

  std::string trk = "method,threshold,success\n";
  for (const auto& m : bundle.methods) {
    for (std::size_t i = 0; i < m.tracker.thresholds.size(); ++i) {
      trk += m.method + "," + fmt(m.tracker.thresholds[i]) + "," + fmt(m.tracker.success[i]) + "\n";
    }
  }
  files["tracker.csv"] = trk;

  std::string tim = "mode,iterations,work_per_frame,J_mean\n";
  for (const auto& t : bundle.timing) {
    tim += t.mode + "," + std::to_string(t.iterations) + "," + fmt(t.work_per_frame) + "," + fmt(t.j_mean) + "\n";
  }
  files["timing.csv"] = tim;
  return files;
}

void write_report(const ExperimentBundle& bundle, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  for (const auto& [name, content] : assemble_report(bundle)) {
    std::ofstream out(dir / name, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write '" + (dir / name).string() + "'");
    out << content;
  }
}

}  // namespace osvos::analysis

#include "salve/report.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

namespace salve {

void write_text_atomic(const std::filesystem::path& path, const std::string& content) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
    out << content;
    if (!out) throw IoError("failed writing " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot move " + tmp.string() + " to " + path.string() + ": " + ec.message());
}

std::string format_number(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::string profile_csv(const ClassLatentProfile& profile) {
  std::ostringstream os;
  os << "class";
  for (std::size_t j = 0; j < profile.latent_dim(); ++j) os << ",latent_" << j;
  os << '\n';
  for (std::size_t k = 0; k < profile.num_classes(); ++k) {
    os << k;
    for (std::size_t j = 0; j < profile.latent_dim(); ++j) os << ',' << format_number(profile.mu(k, j));
    os << '\n';
  }
  return os.str();
}

std::string confusion_csv(const ConfusionMatrix& cm) {
  std::ostringstream os;
  os << "true,pred,count\n";
  for (std::size_t t = 0; t < cm.classes(); ++t)
    for (std::size_t p = 0; p < cm.classes(); ++p) os << t << ',' << p << ',' << cm.at(t, p) << '\n';
  return os.str();
}

std::string sweep_csv(const SweepCurve& curve) {
  std::ostringstream os;
  os << "alpha,class,accuracy\n";
  for (std::size_t g = 0; g < curve.alphas.size(); ++g)
    for (std::size_t k = 0; k < curve.accuracy[g].size(); ++k)
      os << format_number(curve.alphas[g]) << ',' << k << ',' << format_number(curve.accuracy[g][k]) << '\n';
  return os.str();
}

std::string alpha_crit_csv(std::span<const AlphaCritSample> samples) {
  std::ostringstream os;
  os << "index,logit,relevance,analytical,numerical,analytical_exclusion,numerical_exclusion\n";
  for (const auto& s : samples) {
    os << s.index << ',' << format_number(s.logit) << ',' << format_number(s.relevance) << ','
       << (s.analytical ? format_number(*s.analytical) : "") << ','
       << (s.numerical ? format_number(*s.numerical) : "") << ',' << exclusion_reason(s.analytical_exclusion) << ','
       << exclusion_reason(s.numerical_exclusion) << '\n';
  }
  return os.str();
}

std::string heatmap_csv(const Heatmap& h) {
  std::ostringstream os;
  for (std::size_t i = 0; i < h.height; ++i) {
    for (std::size_t j = 0; j < h.width; ++j) os << (j ? "," : "") << format_number(h.at(i, j));
    os << '\n';
  }
  return os.str();
}

std::string trace_csv(const TrainTrace& trace) {
  std::ostringstream os;
  os << "epoch,total,recon,l1,lr\n";
  for (std::size_t e = 0; e < trace.size(); ++e) {
    const auto& r = trace[e];
    os << e << ',' << format_number(r.total) << ',' << format_number(r.recon) << ',' << format_number(r.l1) << ','
       << format_number(r.lr) << '\n';
  }
  return os.str();
}

nlohmann::json to_json(const ConfusionMatrix& cm) {
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t t = 0; t < cm.classes(); ++t) {
    nlohmann::json row = nlohmann::json::array();
    for (std::size_t p = 0; p < cm.classes(); ++p) row.push_back(cm.at(t, p));
    rows.push_back(row);
  }
  return {{"counts", rows}, {"per_class_accuracy", cm.per_class_accuracy()}, {"total", cm.total()}};
}

nlohmann::json to_json(const SweepCurve& curve) {
  nlohmann::json j = {{"alphas", curve.alphas},
                      {"target_class", curve.target_class},
                      {"target_count", curve.target_count},
                      {"accuracy", curve.accuracy},
                      {"target_predictions", curve.target_predictions}};
  const auto a50 = alpha_50(curve, curve.target_class);
  j["alpha_50"] = a50 ? nlohmann::json(*a50) : nlohmann::json(nullptr);
  return j;
}

nlohmann::json to_json(const AlphaCritSummary& s) {
  return {{"method", s.method}, {"median", s.median}, {"p25", s.p25},           {"p75", s.p75},
          {"p5", s.p5},         {"p95", s.p95},       {"included", s.included}, {"excluded", s.excluded}};
}

nlohmann::json to_json(const RobustnessResult& r) {
  return {{"alphas", r.alphas}, {"seeds", r.seeds}, {"latents", r.latents},
          {"curves", r.curves}, {"mean", r.mean},   {"std", r.stddev}};
}

nlohmann::json to_json(const ClassLatentProfile& profile) {
  nlohmann::json mu = nlohmann::json::array();
  for (std::size_t k = 0; k < profile.num_classes(); ++k) {
    auto row = profile.mu.row(k);
    mu.push_back(std::vector<float>(row.begin(), row.end()));
  }
  nlohmann::json dominant = nlohmann::json::array();
  for (std::size_t k = 0; k < profile.num_classes(); ++k) {
    const auto l = dominant_feature(profile, k);
    dominant.push_back({{"class", k},
                        {"latent", l},
                        {"mean_activation", profile.mu(k, l)},
                        {"dominance_ratio", dominance_ratio(profile, k)}});
  }
  return {{"mu", mu}, {"counts", profile.counts}, {"dominant", dominant}};
}

nlohmann::json to_json(const Heatmap& h) {
  return {{"height", h.height}, {"width", h.width}, {"values", h.data}};
}

nlohmann::json suppression_terms_json(const SuppressionTerms& terms, std::size_t bins) {
  nlohmann::json j = {{"count", terms.terms.size()}, {"fraction_negative", terms.fraction_negative}};
  if (terms.terms.empty() || bins == 0) return j;
  const auto [lo_it, hi_it] = std::minmax_element(terms.terms.begin(), terms.terms.end());
  const double lo = *lo_it;
  const double hi = *hi_it;
  std::vector<std::size_t> counts(bins, 0);
  const double width = hi > lo ? (hi - lo) / static_cast<double>(bins) : 1.0;
  for (double t : terms.terms) {
    auto b = static_cast<std::size_t>((t - lo) / width);
    ++counts[std::min(b, bins - 1)];
  }
  std::vector<double> edges(bins + 1);
  for (std::size_t b = 0; b <= bins; ++b) edges[b] = lo + width * static_cast<double>(b);
  j["min"] = lo;
  j["max"] = hi;
  j["bin_edges"] = edges;
  j["bin_counts"] = counts;
  return j;
}

}  // namespace salve

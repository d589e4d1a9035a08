#pragma once

#include <filesystem>
#include <span>
#include <string>

#include "json.hpp"
#include "salve/alphacrit.hpp"
#include "salve/eval.hpp"
#include "salve/features.hpp"
#include "salve/gradfam.hpp"
#include "salve/sae.hpp"

namespace salve {

// Temp file + rename so readers never observe a partial report.
void write_text_atomic(const std::filesystem::path& path, const std::string& content);

// Shortest round-trippable decimal for a double.
std::string format_number(double v);

std::string profile_csv(const ClassLatentProfile& profile);
std::string confusion_csv(const ConfusionMatrix& cm);
// Long format: alpha,class,accuracy. One row per (grid point, class).
std::string sweep_csv(const SweepCurve& curve);
std::string alpha_crit_csv(std::span<const AlphaCritSample> samples);
std::string heatmap_csv(const Heatmap& h);
std::string trace_csv(const TrainTrace& trace);

nlohmann::json to_json(const ConfusionMatrix& cm);
nlohmann::json to_json(const SweepCurve& curve);
nlohmann::json to_json(const AlphaCritSummary& s);
nlohmann::json to_json(const RobustnessResult& r);
nlohmann::json to_json(const ClassLatentProfile& profile);
nlohmann::json to_json(const Heatmap& h);

// Histogram of suppression terms with `bins` equal-width bins between the
// observed min and max, plus fraction_negative and count.
nlohmann::json suppression_terms_json(const SuppressionTerms& terms, std::size_t bins = 40);

}  // namespace salve

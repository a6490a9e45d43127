#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "spsqkd/bb84_sim.hpp"
#include "spsqkd/config.hpp"
#include "spsqkd/link_model.hpp"
#include "spsqkd/photophysics.hpp"

namespace spsqkd::io {

inline constexpr const char* kToolName = "spsqkd";
inline constexpr const char* kToolVersion = "0.1.0";
inline constexpr int kReportSchemaVersion = 1;

// Versioned JSON envelope around every emitted result: tool identity, config
// hash (recomputable from the embedded config), seed, timestamp and the
// analysis flags in effect.
nlohmann::json make_envelope(const RunConfig& cfg, std::optional<std::uint64_t> seed,
                             nlohmann::json results);

// Results payloads.
nlohmann::json sweep_to_json(const std::vector<link::SweepPoint>& points, double r_s);
nlohmann::json keyrate_result_to_json(const finitekey::KeyRateResult& kr);
nlohmann::json sim_result_to_json(const sim::SimResult& r);
nlohmann::json comparison_to_json(const sim::ComparisonReport& c);
nlohmann::json g2_to_json(const photo::G2FitResult& r);
nlohmann::json saturation_to_json(const photo::SaturationFit& f);
nlohmann::json stability_to_json(const photo::StabilityReport& r);

// Sweep CSV, one row per (distance, repetition rate):
// d_km,r_s,p_det,a,e_tilde,delta_n,s_finite,k_bits_per_s
std::string sweep_csv(const std::vector<std::pair<double, std::vector<link::SweepPoint>>>& curves);

// Serialize with a stable layout and write atomically.
void write_report(const std::filesystem::path& path, const nlohmann::json& envelope);

}  // namespace spsqkd::io

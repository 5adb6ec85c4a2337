// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstddef>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "cxrfuse/records.hpp"
#include "cxrfuse/text.hpp"

namespace cxrfuse {

/// One row of the raw (pre-normalization) dataset.
struct RawRecord {
    std::string sample_id;
    double acuity = 3;
    double o2sat = 0;
    double heart_rate = 0;
    double resp_rate = 0;
    double sbp = 0;
    double dbp = 0;
    double temperature_celsius = 0;
    std::string gender;
    std::string ethnicity;
    std::string chief_complaint;
    std::string icd_title;
    std::string report;
    std::string image_ref;

    friend bool operator==(const RawRecord&, const RawRecord&) = default;
};

nlohmann::json raw_to_json(const RawRecord& r);
RawRecord raw_from_json(const nlohmann::json& j);

double celsius_to_fahrenheit(double celsius);

/// "male" -> 0, "female" -> 1 (case-insensitive). Anything else is a DataError naming `sample_id`.
double encode_gender(std::string_view gender, std::string_view sample_id = {});

inline constexpr std::array<const char*, kEthnicityGroups> kEthnicityGroupNames = {
    "White", "African American", "Hispanic/Latino", "Black", "Asian", "White/European", "Russian", "Other", "Unknown"};

/// Category id in [1, 9] in the listing order above; unmatched strings map to Unknown (9).
int map_ethnicity(std::string_view ethnicity);

/// Acuity 1..5 -> (a - 1) / 4.
double normalize_acuity(double acuity);

enum class Vital { HeartRate, O2Sat, RespRate, Sbp, Dbp, Temperature };
inline constexpr std::size_t kVitalCount = 6;
inline constexpr std::array<const char*, kVitalCount> kVitalNames = {"heart_rate", "o2sat", "resp_rate",
                                                                     "sbp",        "dbp",   "temperature"};

struct FeatureStats {
    double min = 0.0;
    double max = 0.0;
};

/// Physiological plausibility windows in raw units (temperature in °C).
struct PlausibleBounds {
    std::array<double, kVitalCount> lo{20, 50, 4, 50, 20, 30};
    std::array<double, kVitalCount> hi{300, 100, 80, 300, 200, 43.5};
    double acuity_lo = 1, acuity_hi = 5;

    bool contains(const RawRecord& r) const;
};

/// Min/max per vital (temperature in °F), fitted on the training split.
struct NormalizationStats {
    std::array<FeatureStats, kVitalCount> vitals{};
    PlausibleBounds bounds;

    static NormalizationStats fit(const std::vector<RawRecord>& train, const PlausibleBounds& bounds = {});
    const FeatureStats& operator[](Vital v) const { return vitals[static_cast<std::size_t>(v)]; }

    nlohmann::json to_json() const;
    static NormalizationStats from_json(const nlohmann::json& j);
};

/// (x - min) / (max - min), clamped to [0, 1]. ConfigError when min == max.
double minmax_normalize(double x, const FeatureStats& stats);

/// Raw vital value in the unit the stats use (°F for temperature).
double vital_value(const RawRecord& r, Vital v);

struct OutlierReport {
    std::size_t kept = 0;
    std::size_t dropped = 0;
};

/// Drops records with any vital (or acuity) outside its plausible window.
std::vector<RawRecord> remove_outliers(const std::vector<RawRecord>& records, const PlausibleBounds& bounds = {},
                                       OutlierReport* report = nullptr);

struct TextVocabularies {
    Vocabulary chief;
    Vocabulary icd;
    Vocabulary report;
};

/// Standardizes and tokenizes the three text fields of every record and fits one
/// vocabulary per field.
TextVocabularies fit_vocabularies(const std::vector<RawRecord>& records, const AbbreviationMap& map);

struct SequenceLengths {
    std::size_t chief = 2;
    std::size_t icd = 6;
    std::size_t report = 43;
};

/// Normalizes, encodes and tokenizes one raw record. `image` is the resolved
/// feature vector referenced by `raw.image_ref`.
PatientRecord to_patient_record(const RawRecord& raw, const NormalizationStats& stats, const TextVocabularies& vocabs,
                                const AbbreviationMap& map, const SequenceLengths& lengths, std::vector<double> image,
                                std::string split);

}  // namespace cxrfuse

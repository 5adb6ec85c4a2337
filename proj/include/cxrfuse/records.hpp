// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <vector>

namespace cxrfuse {

inline constexpr std::size_t kScalarCount = 8;
inline constexpr std::size_t kEthnicityGroups = 9;

/// Reserved ids shared by every vocabulary.
inline constexpr std::size_t kPadId = 0;
inline constexpr std::size_t kStartId = 1;
inline constexpr std::size_t kEndId = 2;
inline constexpr std::size_t kUnkId = 3;

/// Normalized vitals and demographics, each in [0, 1]. Array order is the
/// declaration order below and is the column order fed to the scalar dense layer.
struct ScalarFeatures {
    double heart_rate = 0.0;
    double o2sat = 0.0;
    double resp_rate = 0.0;
    double sbp = 0.0;
    double dbp = 0.0;
    double temperature = 0.0;
    double acuity = 0.0;
    double gender = 0.0;

    std::array<double, kScalarCount> as_array() const {
        return {heart_rate, o2sat, resp_rate, sbp, dbp, temperature, acuity, gender};
    }
    static ScalarFeatures from_array(const std::array<double, kScalarCount>& a) {
        return {a[0], a[1], a[2], a[3], a[4], a[5], a[6], a[7]};
    }
    /// Throws ContractError when a value leaves [0, 1] or gender is not 0/1.
    void validate() const;

    friend bool operator==(const ScalarFeatures&, const ScalarFeatures&) = default;
};

inline constexpr std::array<const char*, kScalarCount> kScalarNames = {
    "heart_rate", "o2sat", "resp_rate", "sbp", "dbp", "temperature", "acuity", "gender"};

/// One model-ready sample.
struct PatientRecord {
    std::string sample_id;
    ScalarFeatures scalars;
    int ethnicity = 9;  // 1..9
    std::vector<std::size_t> chief_ids;
    std::vector<std::size_t> icd_ids;
    /// Backbone feature vector (precomputed mode) or raw pixels (toy extractor mode).
    std::vector<double> image;
    /// START ... END PAD..., padded to the report length.
    std::vector<std::size_t> report_ids;
    std::string report_text;
    std::string split;

    friend bool operator==(const PatientRecord&, const PatientRecord&) = default;
};

}  // namespace cxrfuse

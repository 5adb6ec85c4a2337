// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "cxrfuse/preprocess.hpp"

namespace cxrfuse {

/// What selects a report sentence.
enum class SlotDriver {
    /// A latent class that is also written into the image features.
    ImageLatent,
    /// o2sat bucket: low [86, 89], mid [91, 93], high [96, 99].
    O2SatBucket,
    /// Acuity 1-2, 3, 4-5.
    AcuityGroup,
    /// One option per chief complaint family.
    ChiefComplaint,
};

struct ReportSlot {
    std::string name;
    SlotDriver driver = SlotDriver::ImageLatent;
    /// One sentence per class. Options of a slot have equal token length.
    std::vector<std::string> options;

    bool planted() const { return driver != SlotDriver::ImageLatent; }
};

/// Built-in template: three image-driven sentences followed by the
/// o2sat, acuity and chief-complaint sentences.
std::vector<ReportSlot> default_report_slots();

/// Chief complaint families in the order of the ChiefComplaint slot options;
/// each entry lists raw spellings that standardize to the same text.
std::vector<std::vector<std::string>> default_chief_spellings();

struct SyntheticConfig {
    std::size_t num_samples = 2000;
    std::uint64_t seed = 0;
    std::size_t image_dim = 1280;
    /// Stddev of per-component Gaussian noise relative to unit-variance class directions.
    double image_noise = 0.5;
    /// Fraction of records given one physiologically implausible vital.
    double outlier_rate = 0.02;
    /// Fraction of report sentences written with extra punctuation or casing.
    double text_noise = 0.15;
    std::vector<ReportSlot> slots = default_report_slots();
    std::vector<std::vector<std::string>> chief_spellings = default_chief_spellings();
};

/// Location of a planted sentence in the standardized report tokens.
struct PlantedSpan {
    std::string slot;
    std::size_t offset = 0;
    std::vector<std::string> tokens;
};

struct SyntheticDataset {
    std::vector<RawRecord> records;
    /// image_ref -> feature vector.
    std::map<std::string, std::vector<double>> images;
    /// sample_id -> planted sentences.
    std::map<std::string, std::vector<PlantedSpan>> planted;
};

/// Seeded, bitwise reproducible dataset with planted non-image signal.
SyntheticDataset generate_synthetic(const SyntheticConfig& cfg);

int o2sat_bucket(double o2sat);
int acuity_group(double acuity);

using ReportKey = std::function<std::string(const RawRecord&)>;

/// Groups records by report (exact text unless `key` is given) and draws
/// round-robin across groups, in a seeded group order, until `target_size`.
/// Within a group records keep their input order.
std::vector<RawRecord> balance_by_unique_reports(const std::vector<RawRecord>& records, std::size_t target_size,
                                                 std::uint64_t seed = 0, const ReportKey& key = {});

/// Fraction of planted tokens reproduced at their reference position.
struct PlantedAccuracy {
    std::size_t correct = 0;
    std::size_t total = 0;
    double value() const { return total == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(total); }
};
void score_planted(const std::vector<std::string>& generated, const std::vector<PlantedSpan>& spans,
                   PlantedAccuracy& acc);

}  // namespace cxrfuse

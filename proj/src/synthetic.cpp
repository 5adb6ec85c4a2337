// SPDX-License-Identifier: Apache-2.0
#include "cxrfuse/synthetic.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <deque>

#include "cxrfuse/errors.hpp"
#include "cxrfuse/rng.hpp"

namespace cxrfuse {

std::vector<ReportSlot> default_report_slots() {
    return {
        {"heart",
         SlotDriver::ImageLatent,
         {"The cardiac silhouette is normal", "The cardiac silhouette is enlarged",
          "The cardiac silhouette is borderline"}},
        {"lungs",
         SlotDriver::ImageLatent,
         {"No focal consolidation is seen", "Right lower lobe opacity noted",
          "Mild interstitial pulmonary edema present"}},
        {"pleura",
         SlotDriver::ImageLatent,
         {"Without pleural effusion or pneumothorax", "Small left pleural effusion present",
          "Small bilateral pleural effusions seen"}},
        {"oxygenation",
         SlotDriver::O2SatBucket,
         {"Features suggest significant hypoxia", "Oxygenation appears mildly reduced",
          "Oxygen saturation remains adequate"}},
        {"acuity",
         SlotDriver::AcuityGroup,
         {"Urgent clinical correlation recommended", "Routine outpatient follow up",
          "Stable nonurgent presentation overall"}},
        {"complaint",
         SlotDriver::ChiefComplaint,
         {"Cardiac ischemic etiology considered", "Reactive airway disease possible",
          "Infectious source not excluded", "Bronchitic changes are likely"}},
    };
}

std::vector<std::vector<std::string>> default_chief_spellings() {
    return {{"CP", "Chest pain", "cp"}, {"SOB", "Shortness of breath", "Dyspnea"}, {"Fevers", "Fever", "fevers"},
            {"Cough", "cough", "COUGH"}};
}

int o2sat_bucket(double o2sat) {
    if (o2sat < 90.0) return 0;
    if (o2sat < 95.0) return 1;
    return 2;
}

int acuity_group(double acuity) {
    if (acuity <= 2.0) return 0;
    if (acuity <= 3.0) return 1;
    return 2;
}

namespace {

const std::vector<std::string>& icd_titles() {
    static const std::vector<std::string> t{"Chest pain, unspecified",
                                            "Pneumonia, unspecified organism",
                                            "Other chest pain",
                                            "Fever, unspecified",
                                            "Acute bronchitis, unspecified",
                                            "Dyspnea, unspecified",
                                            "Essential (primary) hypertension",
                                            "Cough"};
    return t;
}

const std::vector<std::string>& ethnicity_labels() {
    static const std::vector<std::string> e{"White", "African American", "Hispanic/Latino", "Black",  "Asian",
                                            "White/European", "Russian", "Other", "Unknown", "Declined"};
    return e;
}

std::string noisy_sentence(const std::string& sentence, Rng& rng, double rate) {
    std::string s = sentence;
    if (rng.uniform() < rate) {
        switch (rng.below(3)) {
            case 0: std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::toupper(c)); }); break;
            case 1: s += ".."; break;
            default: s = "  " + s + " "; break;
        }
    }
    return s + ".";
}

int class_for(const ReportSlot& slot, std::size_t image_class, double o2sat, double acuity, int chief) {
    switch (slot.driver) {
        case SlotDriver::ImageLatent: return static_cast<int>(image_class);
        case SlotDriver::O2SatBucket: return o2sat_bucket(o2sat);
        case SlotDriver::AcuityGroup: return acuity_group(acuity);
        case SlotDriver::ChiefComplaint: return chief;
    }
    return 0;
}

}  // namespace

SyntheticDataset generate_synthetic(const SyntheticConfig& cfg) {
    if (cfg.num_samples == 0) throw ConfigError("num_samples must be >= 1");
    if (cfg.image_dim == 0) throw ConfigError("image_dim must be >= 1");
    for (const auto& slot : cfg.slots) {
        if (slot.options.empty()) throw ConfigError("report slot '" + slot.name + "' has no options");
        const std::size_t len = tokenize(standardize_text(slot.options.front())).size();
        for (const auto& o : slot.options) {
            if (tokenize(standardize_text(o)).size() != len) {
                throw ConfigError("report slot '" + slot.name + "' options differ in length");
            }
        }
        if (slot.driver == SlotDriver::O2SatBucket && slot.options.size() != 3) throw ConfigError("o2sat slot needs 3 options");
        if (slot.driver == SlotDriver::AcuityGroup && slot.options.size() != 3) throw ConfigError("acuity slot needs 3 options");
        if (slot.driver == SlotDriver::ChiefComplaint && slot.options.size() != cfg.chief_spellings.size()) {
            throw ConfigError("complaint slot needs one option per chief complaint family");
        }
    }

    Rng rng(cfg.seed);
    // Fixed class directions for every image-driven slot, drawn before any record.
    std::vector<std::vector<std::vector<double>>> directions;
    for (const auto& slot : cfg.slots) {
        std::vector<std::vector<double>> dirs;
        if (!slot.planted()) {
            for (std::size_t k = 0; k < slot.options.size(); ++k) {
                std::vector<double> d(cfg.image_dim);
                for (double& x : d) x = rng.normal();
                dirs.push_back(std::move(d));
            }
        }
        directions.push_back(std::move(dirs));
    }

    SyntheticDataset ds;
    const int digits = static_cast<int>(std::to_string(cfg.num_samples).size());
    for (std::size_t i = 0; i < cfg.num_samples; ++i) {
        char id[32];
        std::snprintf(id, sizeof id, "syn-%0*zu", digits, i);
        RawRecord r;
        r.sample_id = id;
        r.image_ref = r.sample_id;

        static constexpr double kO2Lo[] = {86, 91, 96};
        const int bucket = static_cast<int>(rng.below(3));
        r.o2sat = kO2Lo[bucket] + static_cast<double>(rng.below(bucket == 1 ? 3 : 4));
        r.acuity = static_cast<double>(1 + rng.below(5));
        r.heart_rate = std::round(rng.uniform(55, 115));
        r.resp_rate = std::round(rng.uniform(12, 26));
        r.sbp = std::round(rng.uniform(95, 165));
        r.dbp = std::round(rng.uniform(55, 100));
        r.temperature_celsius = std::round(rng.uniform(36.0, 38.6) * 10.0) / 10.0;
        r.gender = rng.below(2) == 0 ? "Male" : "Female";
        r.ethnicity = ethnicity_labels()[rng.below(ethnicity_labels().size())];
        const int chief = static_cast<int>(rng.below(cfg.chief_spellings.size()));
        const auto& spellings = cfg.chief_spellings[static_cast<std::size_t>(chief)];
        r.chief_complaint = spellings[rng.below(spellings.size())];
        r.icd_title = icd_titles()[rng.below(icd_titles().size())];

        std::vector<double> image(cfg.image_dim, 0.0);
        std::string report;
        std::vector<PlantedSpan> spans;
        std::size_t offset = 0;
        for (std::size_t s = 0; s < cfg.slots.size(); ++s) {
            const auto& slot = cfg.slots[s];
            const std::size_t image_class = slot.planted() ? 0 : rng.below(slot.options.size());
            const int cls = class_for(slot, image_class, r.o2sat, r.acuity, chief);
            const std::string& sentence = slot.options[static_cast<std::size_t>(cls)];
            if (!slot.planted()) {
                const auto& d = directions[s][image_class];
                for (std::size_t k = 0; k < cfg.image_dim; ++k) image[k] += d[k];
            }
            if (!report.empty()) report += ' ';
            report += noisy_sentence(sentence, rng, cfg.text_noise);
            auto toks = tokenize(standardize_text(sentence));
            if (slot.planted()) spans.push_back({slot.name, offset, toks});
            offset += toks.size();
        }
        for (double& x : image) x += cfg.image_noise * rng.normal();
        r.report = std::move(report);

        if (rng.uniform() < cfg.outlier_rate) {
            switch (rng.below(4)) {
                case 0: r.heart_rate = 2000; break;
                case 1: r.o2sat = 0; break;
                case 2: r.temperature_celsius = 98.6; break;
                default: r.resp_rate = 0; break;
            }
        }
        ds.images.emplace(r.image_ref, std::move(image));
        ds.planted.emplace(r.sample_id, std::move(spans));
        ds.records.push_back(std::move(r));
    }
    return ds;
}

std::vector<RawRecord> balance_by_unique_reports(const std::vector<RawRecord>& records, std::size_t target_size,
                                                 std::uint64_t seed, const ReportKey& key) {
    if (target_size > records.size()) {
        throw ConfigError("balanced subset of " + std::to_string(target_size) + " requested from " +
                          std::to_string(records.size()) + " records");
    }
    std::map<std::string, std::deque<std::size_t>> groups;
    for (std::size_t i = 0; i < records.size(); ++i) {
        groups[key ? key(records[i]) : records[i].report].push_back(i);
    }
    std::vector<std::deque<std::size_t>*> order;
    for (auto& [_, g] : groups) order.push_back(&g);
    Rng rng(seed ^ 0x42414c414e4345ULL);
    rng.shuffle(order);

    std::vector<std::size_t> picked;
    picked.reserve(target_size);
    while (picked.size() < target_size) {
        for (auto* g : order) {
            if (picked.size() == target_size) break;
            if (g->empty()) continue;
            picked.push_back(g->front());
            g->pop_front();
        }
    }
    std::sort(picked.begin(), picked.end());
    std::vector<RawRecord> out;
    out.reserve(picked.size());
    for (auto i : picked) out.push_back(records[i]);
    return out;
}

void score_planted(const std::vector<std::string>& generated, const std::vector<PlantedSpan>& spans,
                   PlantedAccuracy& acc) {
    for (const auto& span : spans) {
        for (std::size_t k = 0; k < span.tokens.size(); ++k) {
            ++acc.total;
            const std::size_t pos = span.offset + k;
            if (pos < generated.size() && generated[pos] == span.tokens[k]) ++acc.correct;
        }
    }
}

}  // namespace cxrfuse

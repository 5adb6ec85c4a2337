// SPDX-License-Identifier: Apache-2.0
#include "cxrfuse/preprocess.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>

#include "cxrfuse/errors.hpp"

namespace cxrfuse {

nlohmann::json raw_to_json(const RawRecord& r) {
    return {{"sample_id", r.sample_id},
            {"acuity", r.acuity},
            {"o2sat", r.o2sat},
            {"heart_rate", r.heart_rate},
            {"resp_rate", r.resp_rate},
            {"sbp", r.sbp},
            {"dbp", r.dbp},
            {"temperature_celsius", r.temperature_celsius},
            {"gender", r.gender},
            {"ethnicity", r.ethnicity},
            {"chief_complaint", r.chief_complaint},
            {"icd_title", r.icd_title},
            {"report", r.report},
            {"image_ref", r.image_ref}};
}

RawRecord raw_from_json(const nlohmann::json& j) {
    RawRecord r;
    try {
        r.sample_id = j.at("sample_id").get<std::string>();
        r.acuity = j.at("acuity").get<double>();
        r.o2sat = j.at("o2sat").get<double>();
        r.heart_rate = j.at("heart_rate").get<double>();
        r.resp_rate = j.at("resp_rate").get<double>();
        r.sbp = j.at("sbp").get<double>();
        r.dbp = j.at("dbp").get<double>();
        r.temperature_celsius = j.at("temperature_celsius").get<double>();
        r.gender = j.at("gender").get<std::string>();
        r.ethnicity = j.value("ethnicity", "");
        r.chief_complaint = j.value("chief_complaint", "");
        r.icd_title = j.value("icd_title", "");
        r.report = j.at("report").get<std::string>();
        r.image_ref = j.value("image_ref", r.sample_id);
    } catch (const nlohmann::json::exception& e) {
        throw DataError("malformed raw record: " + std::string(e.what()));
    }
    return r;
}

double celsius_to_fahrenheit(double celsius) { return celsius * 9.0 / 5.0 + 32.0; }

namespace {

std::string lower_trim(std::string_view s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    std::string out(s.substr(b, e - b));
    std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

}  // namespace

double encode_gender(std::string_view gender, std::string_view sample_id) {
    const std::string g = lower_trim(gender);
    if (g == "male") return 0.0;
    if (g == "female") return 1.0;
    throw DataError("record '" + std::string(sample_id) + "': unrecognized gender '" + std::string(gender) + "'");
}

int map_ethnicity(std::string_view ethnicity) {
    const std::string e = lower_trim(ethnicity);
    for (std::size_t i = 0; i < kEthnicityGroupNames.size(); ++i) {
        if (e == lower_trim(kEthnicityGroupNames[i])) return static_cast<int>(i) + 1;
    }
    return static_cast<int>(kEthnicityGroups);
}

double normalize_acuity(double acuity) {
    if (!(acuity >= 1.0 && acuity <= 5.0)) throw DataError("acuity " + std::to_string(acuity) + " outside [1, 5]");
    return (acuity - 1.0) / 4.0;
}

double vital_value(const RawRecord& r, Vital v) {
    switch (v) {
        case Vital::HeartRate: return r.heart_rate;
        case Vital::O2Sat: return r.o2sat;
        case Vital::RespRate: return r.resp_rate;
        case Vital::Sbp: return r.sbp;
        case Vital::Dbp: return r.dbp;
        case Vital::Temperature: return celsius_to_fahrenheit(r.temperature_celsius);
    }
    return 0.0;
}

bool PlausibleBounds::contains(const RawRecord& r) const {
    const std::array<double, kVitalCount> raw{r.heart_rate, r.o2sat, r.resp_rate, r.sbp, r.dbp, r.temperature_celsius};
    for (std::size_t i = 0; i < kVitalCount; ++i) {
        if (!(raw[i] >= lo[i] && raw[i] <= hi[i])) return false;
    }
    return r.acuity >= acuity_lo && r.acuity <= acuity_hi;
}

NormalizationStats NormalizationStats::fit(const std::vector<RawRecord>& train, const PlausibleBounds& bounds) {
    if (train.empty()) throw ConfigError("cannot fit normalization statistics on an empty split");
    NormalizationStats s;
    s.bounds = bounds;
    for (std::size_t i = 0; i < kVitalCount; ++i) {
        s.vitals[i] = {std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
    }
    for (const auto& r : train) {
        for (std::size_t i = 0; i < kVitalCount; ++i) {
            const double v = vital_value(r, static_cast<Vital>(i));
            s.vitals[i].min = std::min(s.vitals[i].min, v);
            s.vitals[i].max = std::max(s.vitals[i].max, v);
        }
    }
    return s;
}

nlohmann::json NormalizationStats::to_json() const {
    nlohmann::json features = nlohmann::json::object();
    for (std::size_t i = 0; i < kVitalCount; ++i) {
        features[kVitalNames[i]] = {{"min", vitals[i].min},
                                    {"max", vitals[i].max},
                                    {"plausible_lo", bounds.lo[i]},
                                    {"plausible_hi", bounds.hi[i]}};
    }
    return {{"features", features},
            {"temperature_unit", "fahrenheit"},
            {"plausible_temperature_unit", "celsius"},
            {"acuity", {{"plausible_lo", bounds.acuity_lo}, {"plausible_hi", bounds.acuity_hi}}}};
}

NormalizationStats NormalizationStats::from_json(const nlohmann::json& j) {
    NormalizationStats s;
    for (std::size_t i = 0; i < kVitalCount; ++i) {
        const auto& f = j.at("features").at(kVitalNames[i]);
        s.vitals[i] = {f.at("min").get<double>(), f.at("max").get<double>()};
        s.bounds.lo[i] = f.at("plausible_lo").get<double>();
        s.bounds.hi[i] = f.at("plausible_hi").get<double>();
    }
    s.bounds.acuity_lo = j.at("acuity").at("plausible_lo").get<double>();
    s.bounds.acuity_hi = j.at("acuity").at("plausible_hi").get<double>();
    return s;
}

double minmax_normalize(double x, const FeatureStats& stats) {
    if (!(stats.max > stats.min)) {
        throw ConfigError("degenerate normalization range [" + std::to_string(stats.min) + ", " +
                          std::to_string(stats.max) + "]");
    }
    return std::clamp((x - stats.min) / (stats.max - stats.min), 0.0, 1.0);
}

std::vector<RawRecord> remove_outliers(const std::vector<RawRecord>& records, const PlausibleBounds& bounds,
                                       OutlierReport* report) {
    std::vector<RawRecord> kept;
    kept.reserve(records.size());
    for (const auto& r : records) {
        if (bounds.contains(r)) kept.push_back(r);
    }
    if (report != nullptr) *report = {kept.size(), records.size() - kept.size()};
    return kept;
}

TextVocabularies fit_vocabularies(const std::vector<RawRecord>& records, const AbbreviationMap& map) {
    std::vector<std::vector<std::string>> chief, icd, report;
    for (const auto& r : records) {
        chief.push_back(tokenize(standardize_text(r.chief_complaint, map)));
        icd.push_back(tokenize(standardize_text(r.icd_title, map)));
        report.push_back(tokenize(standardize_text(r.report, map)));
    }
    return {Vocabulary::fit(chief), Vocabulary::fit(icd), Vocabulary::fit(report)};
}

PatientRecord to_patient_record(const RawRecord& raw, const NormalizationStats& stats, const TextVocabularies& vocabs,
                                const AbbreviationMap& map, const SequenceLengths& lengths, std::vector<double> image,
                                std::string split) {
    PatientRecord p;
    p.sample_id = raw.sample_id;
    p.scalars.heart_rate = minmax_normalize(vital_value(raw, Vital::HeartRate), stats[Vital::HeartRate]);
    p.scalars.o2sat = minmax_normalize(vital_value(raw, Vital::O2Sat), stats[Vital::O2Sat]);
    p.scalars.resp_rate = minmax_normalize(vital_value(raw, Vital::RespRate), stats[Vital::RespRate]);
    p.scalars.sbp = minmax_normalize(vital_value(raw, Vital::Sbp), stats[Vital::Sbp]);
    p.scalars.dbp = minmax_normalize(vital_value(raw, Vital::Dbp), stats[Vital::Dbp]);
    p.scalars.temperature = minmax_normalize(vital_value(raw, Vital::Temperature), stats[Vital::Temperature]);
    p.scalars.acuity = normalize_acuity(raw.acuity);
    p.scalars.gender = encode_gender(raw.gender, raw.sample_id);
    p.ethnicity = map_ethnicity(raw.ethnicity);

    const auto chief = tokenize(standardize_text(raw.chief_complaint, map));
    const auto icd = tokenize(standardize_text(raw.icd_title, map));
    const auto report = tokenize(standardize_text(raw.report, map));
    p.chief_ids = pad_truncate(vocabs.chief.encode(chief), lengths.chief);
    p.icd_ids = pad_truncate(vocabs.icd.encode(icd), lengths.icd);
    p.report_ids = encode_target(vocabs.report, report, lengths.report);
    p.report_text = join_tokens(report);
    p.image = std::move(image);
    p.split = std::move(split);
    return p;
}

}  // namespace cxrfuse

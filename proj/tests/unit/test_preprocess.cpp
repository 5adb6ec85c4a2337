// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <fstream>

#include "cxrfuse/errors.hpp"
#include "cxrfuse/preprocess.hpp"
#include "cxrfuse/text.hpp"
#include "support/test_support.hpp"

using namespace cxrfuse;

namespace {

RawRecord plausible(const std::string& id) {
    RawRecord r;
    r.sample_id = id;
    r.acuity = 3;
    r.o2sat = 97;
    r.heart_rate = 80;
    r.resp_rate = 16;
    r.sbp = 120;
    r.dbp = 80;
    r.temperature_celsius = 37.0;
    r.gender = "Female";
    r.ethnicity = "Asian";
    r.chief_complaint = "CP";
    r.icd_title = "Chest pain, unspecified";
    r.report = "No acute cardiopulmonary process.";
    r.image_ref = id;
    return r;
}

}  // namespace

TEST_CASE("quoted standardization rules") {
    CHECK(standardize_text("CP") == "chest pain");
    CHECK(standardize_text("cp") == "chest pain");
    CHECK(standardize_text("SOB") == "dyspnea");
    CHECK(standardize_text("sob") == "dyspnea");
    CHECK(standardize_text("Shortness of breath") == "dyspnea");
    CHECK(standardize_text("chest pain, dyspnea") == "chest pain and dyspnea");
    CHECK(standardize_text("Fevers") == "fever");
    CHECK(standardize_text("fevers") == "fever");
    CHECK(standardize_text("") == "");
}

TEST_CASE("standardization handles punctuation and whole words") {
    CHECK(standardize_text("Heart size normal.. Lungs clear.") == "heart size normal lungs clear");
    CHECK(standardize_text("CP, SOB") == "chest pain and dyspnea");
    CHECK(standardize_text("cpr") == "cpr");
    CHECK(standardize_text("  Multiple   spaces\nand lines ") == "multiple spaces and lines");
}

TEST_CASE("standardization is idempotent") {
    const std::vector<std::string> corpus{"CP, SOB", "Fevers.. cough", "Shortness of breath, chest pain",
                                          "Small LEFT pleural effusion present.", "sob sob cp", "a, b, c",
                                          "...", "N/A; unknown!"};
    for (const auto& s : corpus) {
        const std::string once = standardize_text(s);
        CHECK(standardize_text(once) == once);
    }
}

TEST_CASE("non-idempotent abbreviation rules are rejected") {
    CHECK_THROWS_AS(AbbreviationMap(std::vector<AbbreviationMap::Rule>{{"a", "b"}, {"b", "c"}}), ConfigError);
    CHECK_NOTHROW(AbbreviationMap(std::vector<AbbreviationMap::Rule>{{"htn", "hypertension"}}));
}

TEST_CASE("abbreviation extension file adds rules after the defaults") {
    const auto dir = cxrfuse::testing::scratch_dir("abbrev");
    std::ofstream(dir / "ext.json") << R"([{"pattern": "htn", "replacement": "hypertension"}])";
    const AbbreviationMap map = AbbreviationMap::with_extension_file(dir / "ext.json");
    CHECK(standardize_text("HTN, CP", map) == "hypertension and chest pain");
}

TEST_CASE("gender encoding") {
    CHECK(encode_gender("Male") == 0.0);
    CHECK(encode_gender("Female") == 1.0);
    CHECK(encode_gender("FEMALE") == 1.0);
    CHECK_THROWS_AS(encode_gender("unknown", "rec-7"), DataError);
    try {
        encode_gender("X", "rec-42");
    } catch (const DataError& e) {
        CHECK(std::string(e.what()).find("rec-42") != std::string::npos);
    }
}

TEST_CASE("temperature conversion") {
    CHECK(celsius_to_fahrenheit(0) == 32.0);
    CHECK(celsius_to_fahrenheit(37.0) == doctest::Approx(98.6).epsilon(1e-14));
    CHECK(celsius_to_fahrenheit(100) == 212.0);
}

TEST_CASE("ethnicity mapping follows the listing order") {
    CHECK(map_ethnicity("White") == 1);
    CHECK(map_ethnicity("African American") == 2);
    CHECK(map_ethnicity("Hispanic/Latino") == 3);
    CHECK(map_ethnicity("Black") == 4);
    CHECK(map_ethnicity("Asian") == 5);
    CHECK(map_ethnicity("White/European") == 6);
    CHECK(map_ethnicity("Russian") == 7);
    CHECK(map_ethnicity("Other") == 8);
    CHECK(map_ethnicity("Unknown") == 9);
    CHECK(map_ethnicity("zzz-unlisted") == 9);
}

TEST_CASE("acuity normalization") {
    CHECK(normalize_acuity(1) == 0.0);
    CHECK(normalize_acuity(3) == 0.5);
    CHECK(normalize_acuity(5) == 1.0);
    CHECK_THROWS_AS(normalize_acuity(6), DataError);
}

TEST_CASE("min-max normalization") {
    const FeatureStats s{10.0, 30.0};
    CHECK(minmax_normalize(10.0, s) == 0.0);
    CHECK(minmax_normalize(30.0, s) == 1.0);
    CHECK(minmax_normalize(20.0, s) == 0.5);
    CHECK(minmax_normalize(50.0, s) == 1.0);
    CHECK(minmax_normalize(-5.0, s) == 0.0);
    CHECK_THROWS_AS(minmax_normalize(1.0, FeatureStats{2.0, 2.0}), ConfigError);
}

TEST_CASE("outlier removal") {
    std::vector<RawRecord> rs{plausible("a"), plausible("b"), plausible("c")};
    rs[1].heart_rate = 2000;
    OutlierReport rep;
    const auto kept = remove_outliers(rs, {}, &rep);
    REQUIRE(kept.size() == 2);
    CHECK(kept[0].sample_id == "a");
    CHECK(kept[1].sample_id == "c");
    CHECK(rep.kept == 2);
    CHECK(rep.dropped == 1);
    CHECK(remove_outliers({}).empty());
    RawRecord cold = plausible("d");
    cold.temperature_celsius = 20;
    CHECK(remove_outliers({cold}).empty());
}

TEST_CASE("normalization fitted on a split maps it into [0, 1] exactly") {
    std::vector<RawRecord> train;
    cxrfuse::Rng rng(3);
    for (int i = 0; i < 50; ++i) {
        RawRecord r = plausible("r" + std::to_string(i));
        r.heart_rate = rng.uniform(50, 150);
        r.o2sat = rng.uniform(85, 100);
        r.resp_rate = rng.uniform(10, 30);
        r.sbp = rng.uniform(90, 180);
        r.dbp = rng.uniform(50, 110);
        r.temperature_celsius = rng.uniform(35, 40);
        train.push_back(r);
    }
    const NormalizationStats stats = NormalizationStats::fit(train);
    CHECK(stats[Vital::Temperature].min >= celsius_to_fahrenheit(35));
    bool hit0 = false, hit1 = false;
    for (const auto& r : train)
        for (std::size_t v = 0; v < kVitalCount; ++v) {
            const double x = minmax_normalize(vital_value(r, static_cast<Vital>(v)), stats.vitals[v]);
            CHECK(x >= 0.0);
            CHECK(x <= 1.0);
            hit0 |= x == 0.0;
            hit1 |= x == 1.0;
        }
    CHECK(hit0);
    CHECK(hit1);
    const NormalizationStats back = NormalizationStats::from_json(stats.to_json());
    for (std::size_t v = 0; v < kVitalCount; ++v) {
        CHECK(back.vitals[v].min == stats.vitals[v].min);
        CHECK(back.vitals[v].max == stats.vitals[v].max);
    }
}

TEST_CASE("vocabulary ordering and reserved ids") {
    const Vocabulary v = Vocabulary::fit({{"b", "a", "c"}, {"a", "c"}, {"a"}});
    CHECK(v.size() == 7);
    CHECK(v.token(kPadId) == "<pad>");
    CHECK(v.id("a") == 4);
    CHECK(v.id("c") == 5);
    CHECK(v.id("b") == 6);
    CHECK(v.id("never") == kUnkId);
    CHECK(Vocabulary::from_json(v.to_json()) == v);
    CHECK(Vocabulary::fit({{"b", "a", "c"}, {"a", "c"}, {"a"}}) == v);
    CHECK_THROWS_AS(Vocabulary::fit({}), ConfigError);
}

TEST_CASE("pad and truncate always yield the requested length") {
    for (std::size_t n = 0; n < 10; ++n)
        for (std::size_t L = 1; L < 8; ++L) {
            const auto out = pad_truncate(std::vector<std::size_t>(n, 7), L);
            CHECK(out.size() == L);
        }
    const auto chief = tokenize(standardize_text("CP"));
    CHECK(chief.size() == 2);
    const Vocabulary v = Vocabulary::fit({chief});
    CHECK(pad_truncate(v.encode(chief), 2).size() == 2);
    const auto long_report = std::vector<std::string>(60, "x");
    const Vocabulary rv = Vocabulary::fit({long_report});
    const auto target = encode_target(rv, long_report, 43);
    CHECK(target.size() == 43);
    CHECK(target.front() == kStartId);
    CHECK(target.back() == kEndId);
}

TEST_CASE("tokenize and detokenize round trip") {
    const std::string s = "the heart is normal in size";
    const auto toks = tokenize(s);
    CHECK(join_tokens(toks) == s);
    const Vocabulary v = Vocabulary::fit({toks});
    CHECK(v.detokenize(encode_target(v, toks, 43)) == s);
}

TEST_CASE("raw record to patient record") {
    std::vector<RawRecord> rs{plausible("a"), plausible("b")};
    rs[1].heart_rate = 120;
    rs[1].o2sat = 92;
    rs[1].resp_rate = 20;
    rs[1].sbp = 140;
    rs[1].dbp = 90;
    rs[1].temperature_celsius = 38.5;
    rs[1].gender = "Male";
    rs[1].ethnicity = "Russian";
    const auto& map = AbbreviationMap::clinical_defaults();
    const TextVocabularies vocabs = fit_vocabularies(rs, map);
    const NormalizationStats stats = NormalizationStats::fit(rs);
    const PatientRecord p = to_patient_record(rs[1], stats, vocabs, map, {}, {0.5, 0.5}, "train");
    CHECK(p.scalars.heart_rate == 1.0);
    CHECK(p.scalars.gender == 0.0);
    CHECK(p.scalars.acuity == 0.5);
    CHECK(p.ethnicity == 7);
    CHECK(p.chief_ids.size() == 2);
    CHECK(p.icd_ids.size() == 6);
    CHECK(p.report_ids.size() == 43);
    CHECK(vocabs.chief.detokenize(p.chief_ids) == "chest pain");
    CHECK(p.report_text == "no acute cardiopulmonary process");
    CHECK(p.split == "train");
}

TEST_CASE("raw record JSON round trip") {
    const RawRecord r = plausible("x");
    CHECK(raw_from_json(raw_to_json(r)) == r);
    nlohmann::json bad = raw_to_json(r);
    bad.erase("o2sat");
    CHECK_THROWS_AS(raw_from_json(bad), DataError);
}

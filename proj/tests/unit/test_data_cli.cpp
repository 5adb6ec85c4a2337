// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <map>
#include <set>

#include "cxrfuse/dataset.hpp"
#include "cxrfuse/errors.hpp"
#include "cxrfuse/pipeline.hpp"
#include "cxrfuse/synthetic.hpp"
#include "cxrfuse/text.hpp"
#include "support/test_support.hpp"

using namespace cxrfuse;
using cxrfuse::testing::scratch_dir;

namespace {

SyntheticConfig small_config(std::size_t n, std::uint64_t seed) {
    SyntheticConfig c;
    c.num_samples = n;
    c.seed = seed;
    c.image_dim = 16;
    return c;
}

int run_cli(const std::string& args) {
    const std::string cmd = std::string(CXRFUSE_CLI_PATH) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string capture_cli(const std::string& args) {
    const auto out = std::filesystem::temp_directory_path() / "cxrfuse-cli-capture.txt";
    const std::string cmd = std::string(CXRFUSE_CLI_PATH) + " " + args + " >" + out.string() + " 2>&1";
    REQUIRE(std::system(cmd.c_str()) == 0);
    return read_text(out);
}

bool contains_tokens(const std::vector<std::string>& hay, const std::vector<std::string>& needle) {
    for (std::size_t i = 0; i + needle.size() <= hay.size(); ++i)
        if (std::equal(needle.begin(), needle.end(), hay.begin() + static_cast<std::ptrdiff_t>(i))) return true;
    return false;
}

}  // namespace

TEST_CASE("synthetic generation is bitwise reproducible") {
    const SyntheticDataset a = generate_synthetic(small_config(200, 7));
    const SyntheticDataset b = generate_synthetic(small_config(200, 7));
    CHECK(a.records == b.records);
    CHECK(a.images == b.images);
    const SyntheticDataset c = generate_synthetic(small_config(200, 8));
    CHECK_FALSE(a.records == c.records);
}

TEST_CASE("planted phrases follow their driving features") {
    const SyntheticConfig cfg = small_config(600, 3);
    const SyntheticDataset d = generate_synthetic(cfg);
    const auto& slots = cfg.slots;
    const auto find_slot = [&](SlotDriver drv) -> const ReportSlot& {
        for (const auto& s : slots)
            if (s.driver == drv) return s;
        FAIL("missing slot");
        return slots.front();
    };
    const ReportSlot& oxy = find_slot(SlotDriver::O2SatBucket);
    const ReportSlot& acu = find_slot(SlotDriver::AcuityGroup);
    std::size_t low = 0;
    for (const auto& r : d.records) {
        const auto report = tokenize(standardize_text(r.report));
        if (r.o2sat < 50 || r.o2sat > 100) continue;  // planted outlier
        const int bucket = o2sat_bucket(r.o2sat);
        low += bucket == 0;
        CHECK(contains_tokens(report, tokenize(standardize_text(oxy.options[static_cast<std::size_t>(bucket)]))));
        CHECK(contains_tokens(report,
                              tokenize(standardize_text(acu.options[static_cast<std::size_t>(acuity_group(r.acuity))]))));
        const auto& spans = d.planted.at(r.sample_id);
        for (const auto& s : spans) {
            REQUIRE(s.offset + s.tokens.size() <= report.size());
            CHECK(std::equal(s.tokens.begin(), s.tokens.end(), report.begin() + static_cast<std::ptrdiff_t>(s.offset)));
        }
    }
    CHECK(low > 0);
}

TEST_CASE("feature marginals stay in configured ranges") {
    SyntheticConfig cfg = small_config(10000, 5);
    cfg.outlier_rate = 0.0;
    const SyntheticDataset d = generate_synthetic(cfg);
    std::map<int, std::size_t> acuity;
    std::size_t female = 0;
    for (const auto& r : d.records) {
        CHECK(PlausibleBounds{}.contains(r));
        ++acuity[static_cast<int>(r.acuity)];
        female += r.gender == "Female";
    }
    CHECK(acuity.size() == 5);
    for (const auto& [a, n] : acuity) CHECK(std::abs(static_cast<double>(n) / 10000.0 - 0.2) < 0.03);
    CHECK(std::abs(static_cast<double>(female) / 10000.0 - 0.5) < 0.03);
    const auto kept = remove_outliers(generate_synthetic(small_config(2000, 5)).records);
    CHECK(kept.size() < 2000);
    CHECK(kept.size() > 1900);
}

TEST_CASE("balancing by unique report") {
    std::vector<RawRecord> rs;
    for (int i = 0; i < 100; ++i) {
        RawRecord r;
        r.sample_id = std::to_string(i);
        r.report = i < 90 ? "common" : "rare";
        rs.push_back(r);
    }
    const auto out = balance_by_unique_reports(rs, 20, 1);
    std::map<std::string, int> counts;
    for (const auto& r : out) ++counts[r.report];
    CHECK(counts["common"] == 10);
    CHECK(counts["rare"] == 10);
    CHECK_THROWS_AS(balance_by_unique_reports(rs, 101, 1), ConfigError);

    std::vector<RawRecord> unique(30);
    for (std::size_t i = 0; i < unique.size(); ++i) unique[i].report = unique[i].sample_id = std::to_string(i);
    const auto pick = balance_by_unique_reports(unique, 12, 2);
    std::set<std::string> ids;
    for (const auto& r : pick) ids.insert(r.sample_id);
    CHECK(ids.size() == 12);
}

TEST_CASE("balanced pull from synthetic data keeps group counts within one") {
    const SyntheticDataset d = generate_synthetic(small_config(6000, 9));
    const auto key = [](const RawRecord& r) { return standardize_text(r.report); };
    std::map<std::string, std::size_t> available;
    for (const auto& r : d.records) ++available[key(r)];
    const auto out = balance_by_unique_reports(d.records, 3000, 4, key);
    CHECK(out.size() == 3000);
    std::map<std::string, std::size_t> counts;
    for (const auto& r : out) ++counts[key(r)];
    std::size_t lo = SIZE_MAX, hi = 0;
    for (const auto& [g, n] : counts) {
        if (n < available.at(g)) lo = std::min(lo, n);
        hi = std::max(hi, n);
    }
    // Groups that were not exhausted differ by at most one.
    if (lo != SIZE_MAX) CHECK(hi - lo <= 1);
    if (available.size() <= 3000) CHECK(counts.size() == available.size());
}

TEST_CASE("planted accuracy is position aligned") {
    const std::vector<PlantedSpan> spans{{"oxygenation", 2, {"x", "y"}}};
    PlantedAccuracy acc;
    score_planted({"a", "b", "x", "y"}, spans, acc);
    score_planted({"a", "b", "x", "z"}, spans, acc);
    score_planted({"x", "y"}, spans, acc);
    CHECK(acc.total == 6);
    CHECK(acc.correct == 3);
}

TEST_CASE("CSV parsing and raw record round trip") {
    const auto rows = parse_csv("a,\"b,c\",\"d \"\"q\"\"\"\r\n1,,3\n");
    REQUIRE(rows.size() == 2);
    CHECK(rows[0] == std::vector<std::string>{"a", "b,c", "d \"q\""});
    CHECK(rows[1] == std::vector<std::string>{"1", "", "3"});
    CHECK(csv_field("x,y") == "\"x,y\"");

    const auto dir = scratch_dir("csv");
    const auto records = generate_synthetic(small_config(40, 2)).records;
    write_raw_records(dir / "raw.csv", records, DataFormat::Csv);
    write_raw_records(dir / "raw.jsonl", records, DataFormat::Jsonl);
    CHECK(read_raw_records(dir / "raw.csv") == records);
    CHECK(read_raw_records(dir / "raw.jsonl") == records);
    auto dup = records;
    dup.push_back(records.front());
    write_raw_records(dir / "dup.jsonl", dup, DataFormat::Jsonl);
    CHECK_THROWS_AS(read_raw_records(dir / "dup.jsonl"), DataError);
    CHECK_THROWS_AS(data_format_from_name("xml"), ConfigError);
}

TEST_CASE("sha256 known answers") {
    CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("manifest detects a single-byte corruption") {
    const auto dir = scratch_dir("manifest");
    write_text(dir / "a.txt", "hello world\n");
    write_text(dir / "b.txt", "second file\n");
    const DatasetManifest m = write_manifest(dir, "test", {{"a", "a.txt"}, {"b", "b.txt"}}, {{"train", 3}});
    CHECK(verify_manifest(dir).content_hash == m.content_hash);
    CHECK(DatasetManifest::from_json(m.to_json()).content_hash == m.content_hash);
    std::string bytes = read_text(dir / "b.txt");
    bytes[3] ^= 0x01;
    write_text(dir / "b.txt", bytes);
    CHECK_THROWS_AS(verify_manifest(dir), DataError);
    std::filesystem::remove(dir / "a.txt");
    CHECK_THROWS_AS(verify_manifest(dir), DataError);
}

TEST_CASE("prepared dataset round trips through disk") {
    const auto dir = scratch_dir("prepared");
    SyntheticConfig sc = small_config(120, 4);
    run_synth(sc, dir / "raw", DataFormat::Jsonl);
    PreprocessOptions po;
    run_preprocess(dir / "raw", dir / "prep", po);
    const PreparedDataset a = load_prepared(dir / "prep");
    CHECK(a.train.size() + a.val.size() + a.test.size() == a.outliers.kept);
    const PreparedDataset direct = prepare_dataset(generate_synthetic(sc), po);
    CHECK(a.train == direct.train);
    CHECK(a.test == direct.test);
    CHECK(a.vocabs.report == direct.vocabs.report);
}

TEST_CASE("cli exit codes") {
    CHECK(run_cli("") == 2);
    CHECK(run_cli("frobnicate") == 2);
    CHECK(run_cli("synth --bogus-flag") == 2);
    CHECK(run_cli("synth --n 5") == 2);
    CHECK(run_cli("--help") == 0);
    const auto dir = scratch_dir("cli");
    CHECK(run_cli("synth --n 8 --format xml --out " + (dir / "x").string()) == 2);
    write_text(dir / "garbage.jsonl", "{not json\n");
    CHECK(run_cli("evaluate --in " + (dir / "garbage.jsonl").string() + " --out " + (dir / "e").string()) == 1);
}

TEST_CASE("cli synth twice gives identical manifest hashes") {
    const auto dir = scratch_dir("cli-synth");
    const std::string a = capture_cli("synth --n 256 --seed 7 --out " + (dir / "a").string());
    const std::string b = capture_cli("synth --n 256 --seed 7 --out " + (dir / "b").string());
    CHECK(verify_manifest(dir / "a").content_hash == verify_manifest(dir / "b").content_hash);
    CHECK(a.find(verify_manifest(dir / "a").content_hash) != std::string::npos);
    capture_cli("synth --n 256 --seed 8 --out " + (dir / "c").string());
    CHECK(verify_manifest(dir / "c").content_hash != verify_manifest(dir / "a").content_hash);
}

TEST_CASE("cli evaluate on identical generated and reference text scores 1") {
    const auto dir = scratch_dir("cli-eval");
    write_generated(dir / "gen.jsonl", {{"s1", "the heart is normal", "the heart is normal"},
                                        {"s2", "small left pleural effusion present", "small left pleural effusion present"}});
    capture_cli("evaluate --in " + (dir / "gen.jsonl").string() + " --out " + (dir / "eval").string());
    const auto j = read_json(dir / "eval" / "eval_report.json");
    const auto& means = j.at("means");
    for (const auto& [k, v] : means.items()) {
        CAPTURE(k);
        CHECK(v.get<double>() == doctest::Approx(1.0).epsilon(1e-12));
    }
    CHECK(std::filesystem::exists(dir / "eval" / "per_sample.csv"));
}

TEST_CASE("shipped configuration files parse") {
    const fs::path configs = fs::path(CXRFUSE_SOURCE_DIR) / "configs";
    const PipelineConfig desk = load_pipeline_config(configs / "desk_ablation.json", desk_scale_config());
    const PipelineConfig ref = desk_scale_config();
    CHECK(config_to_json(desk.model) == config_to_json(ref.model));
    CHECK(train_config_to_json(desk.train) == train_config_to_json(ref.train));
    CHECK(desk.ablation.seeds == ref.ablation.seeds);
    CHECK(desk.ablation.eval_limit == ref.ablation.eval_limit);
    const PipelineConfig full = load_pipeline_config(configs / "full_ablation.json", desk_scale_config());
    CHECK(full.ablation.masks.size() == 5);
    const AbbreviationMap map = AbbreviationMap::with_extension_file(configs / "abbreviations_extension.json");
    CHECK(standardize_text("HTN, abd pain", map) == "hypertension and abdominal pain");
    CHECK(standardize_text("CP", map) == "chest pain");
    CHECK_THROWS_AS(load_pipeline_config(configs / "missing.json"), ConfigError);
}

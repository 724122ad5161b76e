#include <catch_amalgamated.hpp>

#include <filesystem>

#include "wqed/trace_io.hpp"

using namespace wqed;
using Catch::Matchers::ContainsSubstring;

namespace {
SpectrumTrace sample_1d() {
    SpectrumTrace tr;
    tr.kind = "rt_scan";
    tr.axis1 = {"freq_thz", {326.6131, 326.614, 326.6149000000001}};
    tr.value_label = "transmission";
    tr.values = {0.1 + 0.2, 1.0 / 3.0, 2.0e-17};
    tr.uncertainty = {1e-3, 2e-3, 3e-3};
    tr.meta = {{"cfg.scan.kind", "rt_scan"}, {"note", "a=b"}};
    return tr;
}

SpectrumTrace sample_2d() {
    SpectrumTrace tr;
    tr.kind = "rf1";
    tr.axis1 = {"laser_detuning_ghz", {-1.0, 0.0, 1.0}};
    tr.axis2 = Axis{"emitter_detuning_ghz", {-0.5, 0.5}};
    tr.value_label = "counts_per_s";
    tr.values = {1, 2, 3, 4, 5, 6.25};
    return tr;
}

std::string message_of(const std::string& text) {
    try {
        trace_from_csv(text, "f.csv");
    } catch (const std::exception& e) {
        return e.what();
    }
    return {};
}

void check_equal(const SpectrumTrace& a, const SpectrumTrace& b) {
    CHECK(a.kind == b.kind);
    CHECK(a.axis1.label == b.axis1.label);
    CHECK(a.axis1.values == b.axis1.values);
    CHECK(a.axis2.has_value() == b.axis2.has_value());
    if (a.axis2 && b.axis2) {
        CHECK(a.axis2->label == b.axis2->label);
        CHECK(a.axis2->values == b.axis2->values);
    }
    CHECK(a.value_label == b.value_label);
    CHECK(a.values == b.values);
    CHECK(a.uncertainty == b.uncertainty);
    CHECK(a.meta == b.meta);
}
}  // namespace

TEST_CASE("CSV round trip is lossless") {
    for (const auto& tr : {sample_1d(), sample_2d()}) {
        const auto text = trace_to_csv(tr);
        check_equal(trace_from_csv(text), tr);
        CHECK(trace_to_csv(trace_from_csv(text)) == text);
    }
}

TEST_CASE("JSON round trip is lossless") {
    for (const auto& tr : {sample_1d(), sample_2d()}) check_equal(trace_from_json(trace_to_json(tr)), tr);
}

TEST_CASE("file round trip picks the format from the extension") {
    const auto dir = std::filesystem::temp_directory_path() / "wqed_trace_io";
    std::filesystem::create_directories(dir);
    const auto tr = sample_2d();
    write_trace_csv((dir / "a.csv").string(), tr);
    write_trace_json((dir / "a.json").string(), tr);
    check_equal(read_trace((dir / "a.csv").string()), tr);
    check_equal(read_trace((dir / "a.json").string()), tr);
    CHECK_THROWS_AS(read_trace((dir / "missing.csv").string()), ValidationError);
}

TEST_CASE("CSV header layout") {
    const auto text = trace_to_csv(sample_1d());
    CHECK_THAT(text, ContainsSubstring("# trace.kind=rt_scan\n"));
    CHECK_THAT(text, ContainsSubstring("\nfreq_thz,transmission,stderr\n"));
    CHECK_THAT(trace_to_csv(sample_2d()), ContainsSubstring("\nemitter_detuning_ghz,laser_detuning_ghz,counts_per_s\n"));
}

TEST_CASE("malformed CSV is rejected with a line number") {
    const std::string head = "# trace.kind=x\nfreq_thz,transmission\n326.6,0.5\n";
    CHECK_THAT(message_of(head + "326.7,nan\n"), ContainsSubstring("f.csv:4"));
    CHECK_THAT(message_of(head + "326.7,NaN\n"), ContainsSubstring("f.csv:4"));
    CHECK_THAT(message_of(head + "326.7,inf\n"), ContainsSubstring("f.csv:4"));
    CHECK_THAT(message_of(head + "326.7,abc\n"), ContainsSubstring("f.csv:4"));
    CHECK_THAT(message_of(head + "326.7\n"), ContainsSubstring("f.csv:4"));
    CHECK_THAT(message_of(head + "326.7,\"1,000\"\n"), ContainsSubstring("f.csv:4"));
    CHECK_THAT(message_of(head + "# late=1\n"), ContainsSubstring("f.csv:4"));
}

TEST_CASE("missing columns are named") {
    CHECK_THAT(message_of("transmission\n0.5\n0.6\n"), ContainsSubstring("axis column"));
    CHECK_THAT(message_of("freq_thz\n326.6\n326.7\n"), ContainsSubstring("value column"));
    CHECK_THAT(message_of("freq_thz,stderr\n326.6,1\n"), ContainsSubstring("value column"));
    CHECK_THAT(message_of(""), ContainsSubstring("header"));
}

TEST_CASE("incomplete 2D grids are rejected") {
    CHECK_THROWS_AS(trace_from_csv("voltage_v,freq_thz,transmission\n0,1,1\n0,2,1\n1,1,1\n"), ValidationError);
    CHECK_THROWS_AS(trace_from_csv("voltage_v,freq_thz,transmission\n0,1,1\n1,2,1\n0,2,1\n1,1,1\n"), ValidationError);
}

TEST_CASE("external two-column file in GHz") {
    const auto tr = read_trace(std::string(WQED_FIXTURE_DIR) + "/external_freq_ghz.csv");
    CHECK(tr.axis1.label == "freq_thz");
    CHECK(tr.axis1.values.front() == Catch::Approx(326.612).epsilon(1e-12));
    CHECK(tr.value_label == "transmission");
    CHECK(tr.values.size() == 81);
    CHECK(tr.kind == "external");
    CHECK_FALSE(tr.has_uncertainty());
}

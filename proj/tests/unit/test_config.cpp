#include <catch_amalgamated.hpp>

#include <filesystem>

#include "wqed/config.hpp"
#include "wqed/trace_io.hpp"

using namespace wqed;
using Catch::Approx;
using Catch::Matchers::ContainsSubstring;

namespace {
const char* minimal = R"(
[scan]
kind = rt_scan
model = single

[emitter1]
nu0 = 326.614 THz
gamma = 0.25 GHz
beta = 0.85
)";

std::string message_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const std::exception& e) {
        return e.what();
    }
    return {};
}
}  // namespace

TEST_CASE("INI parsing flattens sections and strips comments") {
    const auto kv = parse_ini("# top\n[scan]\nkind = rt_scan ; trailing\n\n[emitter1]\nbeta=0.5#not a comment\n");
    CHECK(kv.at("scan.kind") == "rt_scan");
    CHECK(kv.at("emitter1.beta") == "0.5#not a comment");
    CHECK(kv.size() == 2);
}

TEST_CASE("INI errors carry the line number") {
    CHECK_THAT(message_of([] { parse_ini("[scan]\nkind rt_scan\n", "a.ini"); }), ContainsSubstring("a.ini:2"));
    CHECK_THAT(message_of([] { parse_ini("[scan\n", "b.ini"); }), ContainsSubstring("b.ini:1"));
    CHECK_THAT(message_of([] { parse_ini("kind = x\n", "c.ini"); }), ContainsSubstring("outside"));
    CHECK_THAT(message_of([] { parse_ini("[scan]\nkind = a\n\nkind = b\n", "d.ini"); }),
               ContainsSubstring("d.ini:4"));
    CHECK_THAT(message_of([] { parse_ini("[scan]\nkind = a\n\nkind = b\n", "d.ini"); }),
               ContainsSubstring("duplicate"));
}

TEST_CASE("unit suffixes") {
    CHECK(parse_quantity("326.614 THz", Quantity::frequency, "k") == 326.614);
    CHECK(parse_quantity("2400 GHz", Quantity::frequency, "k") == Approx(2.4).epsilon(1e-15));
    CHECK(parse_quantity("1 GHz", Quantity::rate, "k") == Approx(two_pi).epsilon(1e-15));
    CHECK(parse_quantity("500 MHz", Quantity::rate, "k") == Approx(std::numbers::pi).epsilon(1e-15));
    CHECK(parse_quantity("180 deg", Quantity::phase, "k") == Approx(std::numbers::pi).epsilon(1e-15));
    CHECK(parse_quantity("20 GHz/V", Quantity::slope, "k") == Approx(40.0 * std::numbers::pi).epsilon(1e-15));
    CHECK(parse_quantity("250 mV", Quantity::voltage, "k") == Approx(0.25).epsilon(1e-15));
    CHECK(parse_quantity("1e5", Quantity::count_rate, "k") == 1e5);
    CHECK(parse_quantity("0.85", Quantity::dimensionless, "k") == 0.85);

    CHECK_THAT(message_of([] { parse_quantity("0.25", Quantity::rate, "emitter1.gamma"); }),
               ContainsSubstring("missing unit"));
    CHECK_THAT(message_of([] { parse_quantity("0.25 THz", Quantity::rate, "emitter1.gamma"); }),
               ContainsSubstring("emitter1.gamma"));
    CHECK_THAT(message_of([] { parse_quantity("0.25 THz", Quantity::rate, "emitter1.gamma"); }),
               ContainsSubstring("does not match"));
    CHECK_THROWS_AS(parse_quantity("0.5 GHz", Quantity::dimensionless, "k"), ValidationError);
    CHECK_THROWS_AS(parse_quantity("nan THz", Quantity::frequency, "k"), ValidationError);
    CHECK_THROWS_AS(parse_quantity("1,000 GHz", Quantity::rate, "k"), ValidationError);
}

TEST_CASE("unknown keys name the nearest valid key") {
    auto kv = parse_ini(minimal);
    kv["emitter1.gama"] = "0.25 GHz";
    const auto msg = message_of([&] { scan_config_from(kv); });
    CHECK_THAT(msg, ContainsSubstring("'emitter1.gama'"));
    CHECK_THAT(msg, ContainsSubstring("did you mean 'emitter1.gamma'"));

    auto kv2 = parse_ini(minimal);
    kv2["scan.omgea"] = "0.1 GHz";
    CHECK_THAT(message_of([&] { scan_config_from(kv2); }), ContainsSubstring("'scan.omega'"));

    auto kv3 = parse_ini(minimal);
    kv3["emitter2.betta"] = "0.5";
    CHECK_THAT(message_of([&] { scan_config_from(kv3); }), ContainsSubstring("'emitter2.beta'"));
}

TEST_CASE("config validation") {
    CHECK_NOTHROW(scan_config_from(parse_ini(minimal)));
    auto missing = parse_ini(minimal);
    missing.erase("emitter1.beta");
    CHECK_THROWS_AS(scan_config_from(missing), ValidationError);

    auto gap = parse_ini(minimal);
    gap["emitter3.nu0"] = "326.614 THz";
    CHECK_THROWS_AS(scan_config_from(gap), ValidationError);

    auto coupled = parse_ini(minimal);
    coupled["scan.model"] = "coupled";
    CHECK_THROWS_AS(scan_config_from(coupled), ValidationError);

    auto bad_beta = parse_ini(minimal);
    bad_beta["emitter1.beta"] = "1.5";
    CHECK_THROWS_AS(scan_config_from(bad_beta), ValidationError);

    auto grid = parse_ini(minimal);
    grid["scan.freq_start"] = "326.62 THz";
    grid["scan.freq_stop"] = "326.61 THz";
    grid["scan.freq_points"] = "11";
    CHECK_THROWS_AS(scan_config_from(grid), ValidationError);

    auto sat = parse_ini(minimal);
    sat["scan.kind"] = "saturation";
    CHECK_THROWS_AS(scan_config_from(sat), ValidationError);
}

TEST_CASE("canonical round trip reproduces the configuration") {
    for (const auto& entry : std::filesystem::directory_iterator(WQED_CONFIG_DIR)) {
        if (entry.path().extension() != ".ini") continue;
        INFO(entry.path().string());
        const auto kv = read_config_file(entry.path().string());
        const ScanConfig cfg = scan_config_from(kv);
        const KeyValues canon = to_keyvalues(cfg);
        const ScanConfig again = scan_config_from(canon);
        CHECK(to_keyvalues(again) == canon);
        CHECK(config_hash(to_keyvalues(again)) == config_hash(canon));
    }
}

TEST_CASE("config hash is deterministic and sensitive") {
    const auto kv = parse_ini(minimal);
    CHECK(config_hash(kv) == config_hash(parse_ini(minimal)));
    CHECK(config_hash(kv).size() == 16);
    auto other = kv;
    other["emitter1.beta"] = "0.84";
    CHECK(config_hash(other) != config_hash(kv));
}

TEST_CASE("overrides replace or add entries") {
    auto kv = parse_ini(minimal);
    apply_overrides(kv, {"emitter1.beta=0.5", "scan.omega = 0.1 GHz"});
    CHECK(kv.at("emitter1.beta") == "0.5");
    CHECK(kv.at("scan.omega") == "0.1 GHz");
    CHECK_THROWS_AS(apply_overrides(kv, {"nonsense"}), ValidationError);
}

#include <doctest.h>

#include <sstream>

#include "upseg/complexity.hpp"
#include "upseg/errors.hpp"

using namespace upseg;

namespace {

BackboneConfig default_backbone() { return BackboneConfig{}; }

ModelGraph with_stack(const BackboneConfig& bb, int m, bool skips = false) {
    UpscaleStackConfig sc;
    sc.num_classes = bb.num_classes;
    sc.num_stages = m;
    sc.use_skips = skips;
    return build_upscale_stack(build_unet(bb), sc);
}

const LayerCost& find(const ComplexityReport& r, const std::string& name) {
    for (const auto& l : r.layers)
        if (l.name == name) return l;
    FAIL("no layer " << name);
    throw;
}

}  // namespace

TEST_CASE("single conv MACs") {
    BackboneConfig bb;
    bb.base_channels = 4;
    auto r = profile(build_unet(bb), 16, 16);
    const auto& first = find(r, "enc.0.conv1");
    CHECK(first.macs == 16 * 16 * 4 * 9 * 1);
    CHECK(first.macs == 9216);
    CHECK(first.params == 40);
    CHECK(first.activation_bytes == 16 * 16 * 4 * 4);

    const auto& up = find(r, "dec.0.up");  // 8 -> 4 channels, 8x8 -> 16x16
    CHECK(up.macs == 8 * 8 * 8 * 4 * 4);
    CHECK(find(r, "enc.0.pool").macs == 0);
    CHECK(find(r, "enc.0.relu1").macs == 0);
}

TEST_CASE("totals are sums of non-negative layer entries") {
    auto r = profile(with_stack(default_backbone(), 3, true), 16, 16);
    std::int64_t p = 0, m = 0, a = 0;
    for (const auto& l : r.layers) {
        CHECK(l.params >= 0);
        CHECK(l.macs >= 0);
        CHECK(l.activation_bytes >= 0);
        p += l.params;
        m += l.macs;
        a += l.activation_bytes;
    }
    CHECK(r.total_params == p);
    CHECK(r.total_macs == m);
    CHECK(r.total_activation_bytes == a);
    CHECK(r.layers.front().name != "input");
    CHECK(r.parameter_bytes() == 4 * p);
}

TEST_CASE("profiled parameters equal enumeration") {
    for (int m : {0, 2, 4}) {
        auto g = with_stack(default_backbone(), m, m > 0);
        CHECK(profile(g, 16, 16).total_params == count_parameters(g));
    }
    auto classic = build_unet(BackboneConfig::classic_unet());
    CHECK(profile(classic, 32, 32).total_params == count_parameters(classic));
}

TEST_CASE("doubling the input quadruples MACs and activations") {
    for (const auto& bb : {default_backbone(), BackboneConfig::classic_unet()}) {
        auto g = build_unet(bb);
        auto small = profile(g, 32, 32), large = profile(g, 64, 64);
        CHECK(large.total_macs == 4 * small.total_macs);
        CHECK(large.total_activation_bytes == 4 * small.total_activation_bytes);
    }
}

TEST_CASE("resolution ratios across the reported input sizes") {
    const std::vector<std::pair<int, int>> pairs{{320, 160}, {160, 80}, {80, 32}, {32, 16}};
    const std::vector<double> expect{4.0, 4.0, 6.25, 4.0};
    for (const auto& bb : {default_backbone(), BackboneConfig::classic_unet()}) {
        auto g = build_unet(bb);
        for (std::size_t i = 0; i < pairs.size(); ++i) {
            auto hi = profile(g, pairs[i].first, pairs[i].first);
            auto lo = profile(g, pairs[i].second, pairs[i].second);
            const double macs = static_cast<double>(hi.total_macs) / static_cast<double>(lo.total_macs);
            const double act = static_cast<double>(hi.total_activation_bytes) /
                               static_cast<double>(lo.total_activation_bytes);
            CHECK(macs == doctest::Approx(expect[i]).epsilon(0.01));
            CHECK(act == doctest::Approx(expect[i]).epsilon(0.01));
        }
    }
}

TEST_CASE("stack overhead") {
    auto bb = default_backbone();
    auto base = profile(build_unet(bb), 16, 16);
    auto ext = profile(with_stack(bb, 4), 16, 16);
    auto o = upscale_overhead(base, ext);
    CHECK(o.params == 60);
    CHECK(o.macs > 0);
    CHECK(o.activation_bytes > 0);

    auto same = upscale_overhead(base, profile(with_stack(bb, 0), 16, 16));
    CHECK(same.params == 0);
    CHECK(same.macs == 0);
    CHECK(same.activation_bytes == 0);
    CHECK(same.macs_relative == 0.0);

    for (int m = 1; m <= 4; ++m) {
        auto grown = upscale_overhead(base, profile(with_stack(bb, m), 16, 16));
        CHECK(grown.activation_bytes > 0);
    }

    CHECK_THROWS_AS(upscale_overhead(base, profile(with_stack(bb, 4), 32, 32)), UsageError);
}

TEST_CASE("stack MACs are negligible next to a full-width backbone") {
    auto bb = BackboneConfig::classic_unet();
    auto base = profile(build_unet(bb), 160, 160);
    auto ext = profile(with_stack(bb, 4), 160, 160);
    auto o = upscale_overhead(base, ext);
    MESSAGE("stack adds " << o.macs << " MACs, " << 100.0 * o.macs_relative << "% of the backbone");
    CHECK(o.macs_relative < 0.01);
}

TEST_CASE("report rendering") {
    auto r = profile(with_stack(default_backbone(), 1), 16, 16);
    auto csv = r.to_csv();
    CHECK(csv.starts_with("layer,name,params,macs,act_bytes\n"));
    CHECK(csv.find('\r') == std::string::npos);
    std::istringstream rows(csv);
    std::string line;
    std::size_t count = 0;
    while (std::getline(rows, line)) ++count;
    CHECK(count == r.layers.size() + 1);
    CHECK(r.to_table().find("up.0.conv") != std::string::npos);
}

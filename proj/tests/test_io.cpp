#include <gtest/gtest.h>

#include "oracles.hpp"

using namespace stripldp;

TEST(Sha256, KnownDigest)
{
    EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(SpecIO, LoadsExampleSpecs)
{
    for (const char* name : {"p075.json", "p025.json", "symmetric.json", "two_point_iid.json", "periodic_d2.json",
                             "iid_d2.json", "jump_1_1.json", "jump_2_2.json", "jump_2_1.json"}) {
        EXPECT_NO_THROW(load_spec(oracle::spec_path(name))) << name;
    }
}

TEST(SpecIO, HashIgnoresLayoutAndKeyOrder)
{
    auto a = parse_spec_text(R"({"d":1,"kappa":0.25,"kind":"periodic","slices":[{"q":[[0.25]],"r":[[0]],"p":[[0.75]]}]})");
    auto b = parse_spec_text("{\n  \"kind\": \"periodic\", \"slices\": [ {\"p\": 0.75, \"r\": 0.0, \"q\": 0.25} ],\n"
                             "  \"kappa\": 0.25, \"d\": 1 }");
    EXPECT_EQ(a.hash, b.hash);
    auto c = parse_spec_text(R"({"d":1,"kappa":0.25,"kind":"periodic","slices":[{"q":[[0.3]],"r":[[0]],"p":[[0.7]]}]})");
    EXPECT_NE(a.hash, c.hash);
}

TEST(SpecIO, RoundTrip)
{
    auto a = load_spec(oracle::spec_path("iid_d2.json"));
    auto b = parse_spec_text(spec_to_json(a.spec).dump());
    EXPECT_EQ(a.hash, b.hash);
    EXPECT_EQ(a.spec.weights, b.spec.weights);
}

TEST(SpecIO, SyntaxErrorHasLineAndColumn)
{
    try {
        load_spec(oracle::spec_path("malformed.json"));
        FAIL() << "expected a parse error";
    } catch (const SpecError& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("malformed.json:2:"), std::string::npos) << msg;
    }
}

TEST(SpecIO, SemanticErrorNamesField)
{
    try {
        parse_spec_text(R"({"d":1,"kappa":0.2,"kind":"iid","slices":[{"q":0.5,"r":0,"p":0.4,"weight":1}]})", "x.json");
        FAIL() << "expected a validation error";
    } catch (const SpecError& e) {
        EXPECT_NE(std::string(e.what()).find("/slices/0"), std::string::npos) << e.what();
    }
    EXPECT_THROW(parse_spec_text(R"({"d":1,"kappa":0.2,"kind":"markov","slices":[]})"), SpecError);
}

TEST(SpecIO, AsymmetricEmbeddingSurvivesRoundTrip)
{
    auto a = load_spec(oracle::spec_path("jump_2_1.json"));
    ASSERT_TRUE(a.embedding.has_value());
    EXPECT_FALSE(a.embedding->warning.empty());
    auto b = parse_spec_text(spec_to_json(a.spec).dump());
    EXPECT_TRUE(b.spec.bounded_jump.has_value());
}

TEST(SpecIO, WindowExportReloads)
{
    auto spec = oracle::two_point_iid();
    auto w = sample_window(spec, -5, 5, 3);
    auto j = window_to_json(w);
    auto back = parse_spec_text(j.dump());
    auto w2 = sample_window(back.spec, -5, 5, 0);
    EXPECT_TRUE(w == w2);
}

TEST(CurveIO, CsvHasMetadataAndRows)
{
    RateOptions o;
    o.analysis.lmgf.n_levels = 64;
    auto c = hitting_rate_curve(homogeneous_spec(0.75), {1.5, 2.0, 3.0}, o);
    c.spec_hash = "abc";
    const auto csv = curve_to_csv(c);
    EXPECT_EQ(csv.rfind("# kind=hitting spec_hash=abc", 0), 0u);
    EXPECT_NE(csv.find("\nt,value,argmax_lambda,det_error,stat_error\n"), std::string::npos);
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 5);
    EXPECT_EQ(csv, curve_to_csv(c));
}

TEST(TailIO, JsonFields)
{
    auto e = empirical_hitting_tail(homogeneous_spec(0.75), 10, 3.0, 1000, 1);
    auto j = tail_to_json(e, "h");
    for (const char* k : {"event", "n", "method", "point", "ci", "trials", "ess", "spec_hash", "seed"})
        EXPECT_TRUE(j.contains(k)) << k;
}

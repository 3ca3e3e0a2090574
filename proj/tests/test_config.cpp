#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "doctest.h"
#include "rt/config.hpp"

using namespace rt;

TEST_CASE("empty text yields the default config") {
    RunConfig c = parse_config_text("", "t.ini");
    CHECK(c == default_run_config());
    CHECK(c.model.kind == ModelConfig::Kind::mlp);
    CHECK(c.model.input_shape == std::vector<int>{1, 12, 12});
    CHECK(c.model.hidden == std::vector<int>{64, 64});
    CHECK(c.model.classes == 4);
    CHECK(c.model_seed == 7);
    CHECK(c.train.epochs == 30);
    CHECK(c.train.batch == 64);
    CHECK_FALSE(c.train.attack.has_value());
    CHECK_FALSE(c.free_training);
    CHECK(c.replay == 4);
    CHECK(c.data.source == DataConfig::Source::shapes);
    CHECK(c.data.n == 512);
    CHECK(c.output_dir == "run");
}

TEST_CASE("comments and blank lines are ignored") {
    RunConfig c = parse_config_text("# a comment\n"
                                    "\n"
                                    "[train]\n"
                                    "epochs = 3   ; trailing comment\n"
                                    "  batch=16#no spaces needed\n",
                                    "t.ini");
    CHECK(c.train.epochs == 3);
    CHECK(c.train.batch == 16);
}

TEST_CASE("the attack section switches adversarial training on") {
    RunConfig plain = parse_config_text("[train]\nepochs = 1\n", "t.ini");
    CHECK_FALSE(plain.train.attack.has_value());

    RunConfig adv = parse_config_text("[attack]\n", "t.ini");
    REQUIRE(adv.train.attack.has_value());
    CHECK(*adv.train.attack == PerturbationSpec{});

    RunConfig full = parse_config_text("[attack]\n"
                                       "norm = linf\n"
                                       "eps = 0.3\n"
                                       "step_size = 0.1\n"
                                       "steps = 7\n"
                                       "rand_init = true\n"
                                       "restarts = 2\n"
                                       "seed = 99\n",
                                       "t.ini");
    REQUIRE(full.train.attack.has_value());
    CHECK(full.train.attack->norm == Norm::linf);
    CHECK(full.train.attack->eps == 0.3);
    CHECK(full.train.attack->step_size == 0.1);
    CHECK(full.train.attack->steps == 7);
    CHECK(full.train.attack->rand_init);
    CHECK(full.train.attack->restarts == 2);
    CHECK(full.train.attack->rng_seed == 99);
}

TEST_CASE("every section parses its keys") {
    RunConfig c = parse_config_text("[model]\n"
                                    "kind = rescnn\n"
                                    "input = 3x16x16\n"
                                    "widths = 8,16\n"
                                    "blocks = 2\n"
                                    "classes = 10\n"
                                    "seed = 21\n"
                                    "[train]\n"
                                    "lr = 0.05\n"
                                    "momentum = 0.8\n"
                                    "weight_decay = 1e-4\n"
                                    "lr_decay_factor = 0.5\n"
                                    "lr_decay_interval = 10\n"
                                    "validation_cadence = 2\n"
                                    "seed = 12\n"
                                    "free = true\n"
                                    "replay = 8\n"
                                    "[attack]\n"
                                    "eps = 1\n"
                                    "steps = 1\n"
                                    "[data]\n"
                                    "source = shapes\n"
                                    "n = 100\n"
                                    "classes = 10\n"
                                    "size = 16\n"
                                    "noise = 0.1\n"
                                    "seed = 5\n"
                                    "val_n = 20\n"
                                    "val_seed = 6\n"
                                    "[output]\n"
                                    "dir = out/here\n",
                                    "t.ini");
    CHECK(c.model.kind == ModelConfig::Kind::rescnn);
    CHECK(c.model.input_shape == std::vector<int>{3, 16, 16});
    CHECK(c.model.widths == std::vector<int>{8, 16});
    CHECK(c.model.blocks_per_stage == 2);
    CHECK(c.model_seed == 21);
    CHECK(c.train.lr == 0.05);
    CHECK(c.train.momentum == 0.8);
    CHECK(c.train.weight_decay == 1e-4);
    CHECK(c.train.lr_decay_factor == 0.5);
    CHECK(c.train.lr_decay_interval == 10);
    CHECK(c.train.validation_cadence == 2);
    CHECK(c.train.master_seed == 12);
    CHECK(c.free_training);
    CHECK(c.replay == 8);
    CHECK(c.data.size == 16);
    CHECK(c.data.val_n == 20);
    CHECK(c.output_dir == "out/here");
}

TEST_CASE("serialize then parse reproduces the config exactly") {
    RunConfig c = default_run_config();
    c.model = ModelConfig::rescnn_tiny({1, 16, 16}, 6);
    c.model_seed = 1234567;
    c.train.epochs = 77;
    c.train.lr = 0.012345678901234567;  // needs full precision
    c.train.weight_decay = 3e-7;
    c.train.master_seed = 0xFFFFFFFFFFFFFFFFULL;
    PerturbationSpec atk;
    atk.norm = Norm::linf;
    atk.eps = 8.0 / 255.0;
    atk.steps = 10;
    atk.rand_init = true;
    atk.restarts = 3;
    c.train.attack = atk;
    c.free_training = true;
    c.replay = 5;
    c.data.source = DataConfig::Source::shapes;
    c.data.n = 2000;
    c.data.classes = 6;
    c.data.size = 16;
    c.data.noise = 0.125;
    c.data.path = "some/where.rdset";  // carried even while unused
    c.output_dir = "runs/exp1";

    RunConfig back = parse_config_text(serialize_config(c), "round.ini");
    CHECK(back == c);

    // a file-source config with customized generator params survives too
    RunConfig f = default_run_config();
    f.data.source = DataConfig::Source::file;
    f.data.path = "train.rdset";
    f.data.val_path = "val.rdset";
    f.data.n = 9;         // generator params persist even for file sources
    f.data.noise = 0.75;
    RunConfig fback = parse_config_text(serialize_config(f), "round.ini");
    CHECK(fback == f);

    // defaults round trip unchanged
    CHECK(parse_config_text(serialize_config(default_run_config()), "d.ini") ==
          default_run_config());
}

TEST_CASE("parse errors carry file and line") {
    auto fails_with = [](const std::string& text, const std::string& needle) {
        CHECK_THROWS_WITH_AS(parse_config_text(text, "bad.ini"), doctest::Contains(needle.c_str()),
                             std::runtime_error);
    };
    fails_with("[nope]\n", "bad.ini:1: unknown section");
    fails_with("[model\n", "bad.ini:1: unterminated section");
    fails_with("[model]\nfoo = 1\n", "bad.ini:2: unknown key 'foo'");
    fails_with("epochs = 3\n", "bad.ini:1: key 'epochs' appears before any [section]");
    fails_with("[train]\nepochs\n", "bad.ini:2: expected 'key = value'");
    fails_with("[train]\nepochs = soon\n", "bad.ini:2: expected an integer");
    fails_with("[train]\nlr = fast\n", "bad.ini:2: expected a number");
    fails_with("[train]\nfree = maybe\n", "bad.ini:2: expected a boolean");
    fails_with("[train]\nseed = -4\n", "bad.ini:2: expected a nonnegative integer");
    fails_with("[train]\nepochs = 1\nepochs = 2\n", "bad.ini:3: duplicate key 'epochs'");
    fails_with("[model]\nkind = transformer\n", "bad.ini:2: model kind must be");
    fails_with("[attack]\nnorm = l7\n", "bad.ini:2: unknown norm");
    fails_with("[data]\nsource = cloud\n", "bad.ini:2: data source must be");
    fails_with("[train]\n= 3\n", "bad.ini:2: empty key");
}

TEST_CASE("semantic validation runs after parsing") {
    // parses fine, but the assembled config is invalid
    CHECK_THROWS_WITH_AS(parse_config_text("[train]\nbatch = 0\n", "v.ini"),
                         doctest::Contains("v.ini: "), std::runtime_error);
    CHECK_THROWS_AS(parse_config_text("[train]\nfree = true\n", "v.ini"), std::runtime_error);
    CHECK_THROWS_AS(parse_config_text("[data]\nsource = file\n", "v.ini"), std::runtime_error);
    CHECK_THROWS_AS(parse_config_text("[model]\nclasses = 1\n", "v.ini"), std::runtime_error);
    CHECK_THROWS_AS(parse_config_text("[train]\nreplay = 0\n", "v.ini"), std::runtime_error);
}

TEST_CASE("config files load from disk") {
    const char* path = "test_config_tmp.ini";
    {
        std::ofstream out(path);
        out << "[train]\nepochs = 2\n[output]\ndir = elsewhere\n";
    }
    RunConfig c = parse_config(path);
    CHECK(c.train.epochs == 2);
    CHECK(c.output_dir == "elsewhere");
    std::remove(path);
    CHECK_THROWS_WITH_AS(parse_config(path), doctest::Contains("cannot open"),
                         std::runtime_error);
}

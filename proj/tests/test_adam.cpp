#include <cmath>
#include <vector>

#include "doctest.h"
#include "qgs/adam.hpp"

using namespace qgs;

TEST_CASE("zero gradients leave parameters unchanged") {
    std::vector<double> p{1.0, -2.0, 3.0};
    std::vector<double> g{0.0, 0.0, 0.0};
    ParamGroup grp{"test", 1e-2, {{p.data(), g.data(), p.size()}}, {}, {}, 0};
    grp.init_state();
    CHECK(adam_step(grp));
    CHECK(p == std::vector<double>{1.0, -2.0, 3.0});
}

TEST_CASE("first step with unit gradient moves by about -lr") {
    std::vector<double> p{0.0};
    std::vector<double> g{1.0};
    ParamGroup grp{"test", 1e-3, {{p.data(), g.data(), 1}}, {}, {}, 0};
    grp.init_state();
    CHECK(adam_step(grp));
    // bias-corrected first step: -lr * 1 / (1 + eps)
    CHECK(p[0] == doctest::Approx(-1e-3 / (1.0 + 1e-8)).epsilon(1e-12));
}

TEST_CASE("constant gradient reaches the lr-sized step limit") {
    std::vector<double> p{0.0};
    std::vector<double> g{0.37};
    ParamGroup grp{"test", 1e-2, {{p.data(), g.data(), 1}}, {}, {}, 0};
    grp.init_state();
    double prev = p[0];
    double step_size = 0.0;
    for (int i = 0; i < 2000; ++i) {
        adam_step(grp);
        step_size = prev - p[0];
        prev = p[0];
    }
    CHECK(step_size == doctest::Approx(1e-2).epsilon(1e-3));
}

TEST_CASE("non-finite gradient skips the group") {
    std::vector<double> p{1.0, 2.0};
    std::vector<double> g{0.5, std::nan("")};
    ParamGroup grp{"bad", 1e-2, {{p.data(), g.data(), 2}}, {}, {}, 0};
    grp.init_state();
    CHECK_FALSE(adam_step(grp));
    CHECK(p[0] == 1.0);
    CHECK(p[1] == 2.0);
    CHECK(grp.step == 0);
}

TEST_CASE("determinism across reruns") {
    auto run = [] {
        std::vector<double> p{0.3, -0.7};
        std::vector<double> g{0.0, 0.0};
        ParamGroup grp{"d", 5e-3, {{p.data(), g.data(), 2}}, {}, {}, 0};
        grp.init_state();
        for (int i = 0; i < 100; ++i) {
            g[0] = 0.1 * (i % 7) - 0.3;
            g[1] = std::sin(double(i));
            adam_step(grp);
        }
        return p;
    };
    CHECK(run() == run());
}

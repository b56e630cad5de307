#include <catch2/catch_amalgamated.hpp>

#include <delaysim/time_grid.hpp>

using delaysim::TimeGrid;

TEST_CASE("grid derives step count and step size from delay and horizon") {
    const TimeGrid grid(1.0, 2.0, 4);
    CHECK(grid.dt() == 0.25);
    CHECK(grid.steps_per_delay() == 4);
    CHECK(grid.total_steps() == 8);
    CHECK(grid.delay() == 1.0);
    CHECK(grid.horizon() == 2.0);
}

TEST_CASE("grid accepts horizons that are non-integer multiples of the delay") {
    const TimeGrid grid(1.0, 1.5, 4);
    CHECK(grid.dt() == 0.25);
    CHECK(grid.total_steps() == 6);
}

TEST_CASE("grid rejects step sizes outside (0,1)") {
    CHECK_THROWS_AS(TimeGrid(1.0, 2.0, 1), std::invalid_argument);   // dt = 1
    CHECK_THROWS_AS(TimeGrid(2.5, 5.0, 2), std::invalid_argument);   // dt = 1.25
}

TEST_CASE("grid rejects horizons that do not land on a node") {
    CHECK_THROWS_AS(TimeGrid(1.0, 2.1, 4), std::invalid_argument);
    CHECK_THROWS_AS(TimeGrid(1.0, 0.1, 4), std::invalid_argument);
}

TEST_CASE("grid rejects degenerate delay, horizon, or step counts") {
    CHECK_THROWS_AS(TimeGrid(0.0, 2.0, 4), std::invalid_argument);
    CHECK_THROWS_AS(TimeGrid(-1.0, 2.0, 4), std::invalid_argument);
    CHECK_THROWS_AS(TimeGrid(1.0, 0.0, 4), std::invalid_argument);
    CHECK_THROWS_AS(TimeGrid(1.0, 2.0, 0), std::invalid_argument);
}

TEST_CASE("grid tolerates benign rounding in the horizon ratio") {
    // 0.3 / 0.1 is not exact in binary; the ratio check must not reject it.
    const TimeGrid grid(0.1, 0.3, 1);
    CHECK(grid.total_steps() == 3);
}

TEST_CASE("delayed index points one delay into the past") {
    const TimeGrid grid(1.0, 2.0, 4);
    CHECK(grid.delayed_index(0) == -4);
    CHECK(grid.delayed_index(4) == 0);
    CHECK(grid.delayed_index(7) == 3);
    CHECK(delaysim::delayed_index(grid, 2) == -2);
}

TEST_CASE("node times are exact multiples of the step") {
    const TimeGrid grid(1.0, 2.0, 4);
    CHECK(grid.time_at(-4) == -1.0);
    CHECK(grid.time_at(0) == 0.0);
    CHECK(grid.time_at(8) == 2.0);
    CHECK(grid.time_at(3) == 0.75);
}

TEST_CASE("product identities N*dt = delay and M*dt = horizon hold to 1 ulp") {
    for (double delay : {1.0, 0.7, 1.0 / 3.0}) {
        for (int steps : {3, 5, 64}) {
            const double horizon = 2 * delay;
            const TimeGrid grid(delay, horizon, steps);
            CHECK(grid.steps_per_delay() * grid.dt() ==
                  Catch::Approx(delay).epsilon(1e-15));
            CHECK(static_cast<double>(grid.total_steps()) * grid.dt() ==
                  Catch::Approx(horizon).epsilon(1e-15));
        }
    }
}

TEST_CASE("power-of-2 refinement preserves shared node times bitwise") {
    for (double delay : {1.0, 1.0 / 3.0, 0.7}) {
        const TimeGrid coarse(delay, 2 * delay, 5);
        for (int factor : {2, 4, 8, 64}) {
            const TimeGrid fine = coarse.refined(factor);
            CHECK(fine.steps_per_delay() == 5 * factor);
            for (std::int64_t k = -coarse.steps_per_delay(); k <= coarse.total_steps(); ++k)
                CHECK(fine.time_at(k * factor) == coarse.time_at(k));
        }
    }
}

TEST_CASE("refinement rejects factors that are not powers of 2") {
    const TimeGrid grid(1.0, 2.0, 4);
    CHECK_THROWS_AS(grid.refined(3), std::invalid_argument);
    CHECK_THROWS_AS(grid.refined(0), std::invalid_argument);
    CHECK_THROWS_AS(grid.refined(-2), std::invalid_argument);
    CHECK(delaysim::refine(grid, 2).steps_per_delay() == 8);
}

TEST_CASE("grids compare by value") {
    CHECK(TimeGrid(1.0, 2.0, 4) == TimeGrid(1.0, 2.0, 4));
    CHECK(TimeGrid(1.0, 2.0, 4) != TimeGrid(1.0, 2.0, 8));
}

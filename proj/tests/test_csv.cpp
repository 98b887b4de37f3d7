#include <gtest/gtest.h>

#include <sstream>

#include "ilcset/config.hpp"
#include "ilcset/csv.hpp"

using namespace ilcset;

TEST(Csv, MetricsHeaderAndRows) {
    RunResult r;
    IterationMetrics a;
    a.l = 0;
    a.E = 0.5;
    a.U = 2;
    a.res_eq27 = 1e-15;
    a.res_eq17 = 0;
    IterationMetrics b;
    b.l = 1;
    b.E = 0.1;
    b.U = 3.25;
    r.metrics = {a, b};
    std::ostringstream os;
    csv::write_metrics(os, r);
    EXPECT_EQ(os.str(), "l,E_inf,U_inf,res_eq27,res_eq17\r\n0,0.5,2,1e-15,0\r\n1,0.1,3.25,,\r\n");
}

TEST(Csv, ShortestRoundTripNumbers) {
    for (double x : {0.1, 1.0 / 3.0, 2.5e-300, -7.0, 123456789.125}) {
        const std::string s = csv::num(x);
        EXPECT_EQ(std::stod(s), x) << s;
    }
    EXPECT_EQ(csv::num(0.30000000000000004), "0.30000000000000004");
}

TEST(Csv, TrajectoryHeader) {
    EXPECT_EQ(csv::trajectory_header(2, false), "k,y1,y2,r1,r2,e1,e2");
    EXPECT_EQ(csv::trajectory_header(1, true), "l,k,y1,r1,e1");
}

TEST(Csv, FinalTrajectoryRows) {
    auto c = load_preset("example1");
    c.run.iterations = 2;
    const auto r = run(c.system, c.uncertainty, c.gains, c.run);
    std::ostringstream os;
    csv::write_trajectories(os, r, 2, false);
    const std::string s = os.str();
    std::size_t lines = 0;
    for (std::size_t i = 0; i + 1 < s.size(); ++i) lines += s[i] == '\r' && s[i + 1] == '\n';
    EXPECT_EQ(lines, 102u);
    EXPECT_EQ(s.rfind("k,y1,y2,r1,r2,e1,e2\r\n0,", 0), 0u);
}

TEST(Csv, ByteIdenticalAcrossRuns) {
    auto c = load_preset("example1");
    c.run.iterations = 20;
    std::ostringstream a, b;
    csv::write_metrics(a, run(c.system, c.uncertainty, c.gains, c.run));
    csv::write_metrics(b, run(c.system, c.uncertainty, c.gains, c.run));
    EXPECT_EQ(a.str(), b.str());
}

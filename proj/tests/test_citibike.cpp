// Real-data check against the September 2023 CitiBike trip file. Set
// IPFNET_CITIBIKE_CSV to the (concatenated) monthly CSV to enable it.
#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>

#include "ipfnet/ingest.hpp"
#include "ipfnet/ipf.hpp"
#include "ipfnet/summary.hpp"
#include "ipfnet/synth.hpp"

namespace ipfnet {
namespace {

TEST(CitiBike, MonthAggregateHourlyCosine) {
  const char* path = std::getenv("IPFNET_CITIBIKE_CSV");
  if (path == nullptr) GTEST_SKIP() << "IPFNET_CITIBIKE_CSV not set";
  std::ifstream in(path);
  ASSERT_TRUE(in) << "cannot open " << path;
  TimeWindow month{parse_timestamp("2023-09-01 00:00:00"), parse_timestamp("2023-10-01 00:00:00")};
  IngestReport rep = ingest_trips(in, month);

  std::vector<double> cos;
  for (std::size_t t = 0; t < 24; ++t) {
    const auto& y = rep.series.slices[t];
    if (y.empty()) continue;
    IpfResult res = run_ipf(rep.aggregated, rep.hourly_marginals[t]);
    ASSERT_EQ(res.status, IpfStatus::Converged) << rep.series.timesteps[t];
    cos.push_back(cosine_similarity(scaled_matrix(rep.aggregated, res.d0, res.d1), y));
  }
  ASSERT_FALSE(cos.empty());
  EXPECT_NEAR(mean(cos), 0.363, 0.01);
}

}  // namespace
}  // namespace ipfnet

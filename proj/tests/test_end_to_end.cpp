#include <doctest.h>

#include <sharedb/executor.hpp>
#include <sharedb/oracle.hpp>
#include <sharedb/tuner.hpp>

using namespace sharedb;

namespace {

const char *kWorkload = R"(
schema
  fact F rows=20000
  dim B rows=500
  dim C rows=300
  dim D rows=200
  fk F.b -> B
  fk F.c -> C
  fk F.d -> D
  column F.x domain=0:100
  column F.y domain=0:1000
  column F.v domain=0:50
  column B.p domain=0:20
  column C.q domain=0:10
  column D.r domain=0:40
end
template t1 sum=F.v join=B,C filter=F.x[w=20,from=0,to=50,step=10] filter=B.p[w=10]
template t2 sum=F.v join=B,D filter=F.x[w=30,from=40,to=100,step=10] filter=D.r[w=20,step=5]
template t3 sum=F.y join=B,C,D filter=F.y[w=300,step=100]
batch tune T1 seed=7
  use t1 count=6
  use t2 count=6
  use t3 count=4
end
batch run R1 seed=7
  use t1 count=6
  use t2 count=6
  use t3 count=4
end
batch run R2 seed=9
  use t1 count=5 shift=15
  use t2 count=5 shift=-10
  use t3 count=3 shift=50
end
)";

} // namespace

TEST_CASE("tuned execution matches the query-at-a-time oracle")
{
    auto w = parse_workload(kWorkload);
    auto db = generate_database(w.schema, 42);

    TunerConfig tc;
    tc.sample_rate = 0.2;
    tc.partitioner.ps_min = 2000;
    tc.blocking.min_average = 64;
    tc.blocking.max_block = 512;
    tc.model.c_f = 1.0;
    auto tuned = tune(db, w.tuning, tc);
    CHECK(tuned.views.size() > 0);

    for (auto &batch : w.runtime) {
        auto expect = qat_results(db, batch);
        for (int mode = 0; mode < 4; ++mode) {
            ExecConfig ec;
            ec.model = tc.model;
            ec.threads = 3;
            ec.skipping = mode != 1;
            ec.reuse = mode != 2;
            ec.naive_reuse = mode == 3;
            auto r = execute_batch(db, tuned.layout, &tuned.views, batch, ec);
            CAPTURE(batch.name);
            CAPTURE(mode);
            CHECK(r.sums == expect);
        }
    }
}

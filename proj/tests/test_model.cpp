#include <doctest.h>

#include "parmatch/error.hpp"
#include "parmatch/model.hpp"

using namespace parmatch;

namespace {

MatchResult result_with(std::vector<Correspondence> cs) {
  MatchResult r;
  r.task_id = "t";
  r.correspondences = std::move(cs);
  return r;
}

Correspondence corr(const char* src_a, const char* id_a, const char* src_b,
                    const char* id_b, double sim) {
  return Correspondence{{src_a, id_a}, {src_b, id_b}, sim};
}

}  // namespace

TEST_CASE("canonical_pair orders by (source, id)") {
  auto [a, b] = canonical_pair({"src1", "b"}, {"src1", "a"});
  CHECK(a == EntityKey{"src1", "a"});
  CHECK(b == EntityKey{"src1", "b"});

  auto [c, d] = canonical_pair({"src2", "a"}, {"src1", "z"});
  CHECK(c == EntityKey{"src1", "z"});
  CHECK(d == EntityKey{"src2", "a"});
}

TEST_CASE("canonical_pair rejects self-pairs") {
  CHECK_THROWS_AS(canonical_pair({"src1", "a"}, {"src1", "a"}), IntegrityError);
  // Same id in different sources is a valid pair.
  CHECK_NOTHROW(canonical_pair({"src1", "a"}, {"src2", "a"}));
}

TEST_CASE("canonical_pair is idempotent") {
  auto once = canonical_pair({"s", "q"}, {"s", "p"});
  auto twice = canonical_pair(once.first, once.second);
  CHECK(once == twice);
}

TEST_CASE("merge_results unions disjoint sets") {
  std::vector<MatchResult> results;
  results.push_back(result_with({corr("s", "a", "s", "b", 0.9)}));
  results.push_back(result_with({corr("s", "c", "s", "d", 0.8)}));
  auto merged = merge_results(results);
  REQUIRE(merged.size() == 2);
  CHECK(merged[0].a.id == "a");
  CHECK(merged[1].a.id == "c");
}

TEST_CASE("merge_results collapses identical duplicates") {
  std::vector<MatchResult> results;
  results.push_back(result_with({corr("s", "a", "s", "b", 0.9)}));
  results.push_back(result_with({corr("s", "a", "s", "b", 0.9)}));
  auto merged = merge_results(results);
  REQUIRE(merged.size() == 1);
  CHECK(merged[0].sim == 0.9);
}

TEST_CASE("merge_results rejects conflicting similarities") {
  std::vector<MatchResult> results;
  results.push_back(result_with({corr("s", "a", "s", "b", 0.9)}));
  results.push_back(result_with({corr("s", "a", "s", "b", 0.7)}));
  CHECK_THROWS_AS(merge_results(results), IntegrityError);
}

TEST_CASE("merge_results is order-independent") {
  std::vector<Correspondence> cs = {corr("s", "a", "s", "b", 0.9),
                                    corr("s", "c", "s", "d", 0.8),
                                    corr("s", "a", "s", "z", 0.75)};
  std::vector<MatchResult> forward;
  for (auto& c : cs) forward.push_back(result_with({c}));
  std::vector<MatchResult> backward(forward.rbegin(), forward.rend());
  CHECK(merge_results(forward) == merge_results(backward));
}

TEST_CASE("make_task canonicalizes the partition pair") {
  MatchTask t1 = make_task("P2", "P1", "wam", 0);
  CHECK(t1.partition_a == "P1");
  CHECK(t1.partition_b == "P2");
  CHECK(t1.id == "P1|P2");
  CHECK_FALSE(t1.self_task);

  MatchTask t2 = make_task("P1", "P1", "wam", 1);
  CHECK(t2.self_task);
}

TEST_CASE("make_correspondence clamps sim into [0,1]") {
  auto c = make_correspondence({"s", "a"}, {"s", "b"}, 1.0 + 1e-12);
  CHECK(c.sim == 1.0);
}

TEST_CASE("entity attribute lookup distinguishes absent from empty") {
  Entity e;
  e.id = "x";
  e.source_id = "s";
  e.attributes["title"] = "";
  CHECK(e.attribute("title") != nullptr);
  CHECK(e.attribute("title")->empty());
  CHECK(e.attribute("description") == nullptr);
}
